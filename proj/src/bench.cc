//
// Copyright 2026 The DBDP Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#include "dbdp/bench.h"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace dbdp {
namespace {

constexpr char kResultsHeader[] =
    "dataset,model,method,epsilon,delta,seed,accuracy,optimality_gap,sigma,"
    "fraction_noised,runtime,regime,notes";

std::string CsvSafe(std::string s) {
  std::replace(s.begin(), s.end(), ',', ';');
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

std::string FormatDouble(double v, int precision) {
  std::ostringstream os;
  os << std::setprecision(precision) << v;
  return os.str();
}

double DeltaFor(const ExperimentConfig& cfg, const DatasetSource& source,
                std::size_t n_train) {
  if (source.delta) return *source.delta;
  if (cfg.delta) return *cfg.delta;
  const double n = static_cast<double>(n_train);
  return 1.0 / (n * n);
}

TrainConfig BaseTrainConfig(const ExperimentConfig& cfg, std::size_t n) {
  TrainConfig train = cfg.train;
  if (cfg.batch_size) {
    train.sampling_probability =
        static_cast<double>(*cfg.batch_size) / static_cast<double>(n);
  }
  return train;
}

}  // namespace

ReferenceOptimum ReferenceOptimum::From(const LossModel& model,
                                        const Dataset& train,
                                        const SgdResult& sgd) {
  return {sgd.theta,     sgd.objective,     model.architecture(),
          model.l2(),    train.Checksum(),  sgd.converged};
}

double OptimalityGap(const LossModel& model, const ModelParams& theta_priv,
                     const Dataset& train, const ReferenceOptimum& ref) {
  if (model.architecture() != ref.architecture || model.l2() != ref.l2 ||
      train.Checksum() != ref.data_checksum) {
    throw std::invalid_argument(
        "optimality gap requested against a different training objective");
  }
  const double gap = model.Objective(theta_priv, train) - ref.objective;
  if (gap < -1e-9) {
    std::clog << "warning: negative optimality gap " << gap
              << " clamped to 0 (reference optimum not global)\n";
    return 0.0;
  }
  return gap;
}

PreparedData PrepareDataset(const DatasetSource& source) {
  std::optional<Dataset> full;
  if (source.kind == DatasetSource::Kind::kSynthetic) {
    full = Synthesize(source.n, source.d, source.margin, source.seed)
               .WithName(source.name);
  } else {
    full = LoadCsv(source.path, source.encoding).data.WithName(source.name);
    if (source.subsample > 0) {
      full = Subsample(*full, source.subsample, source.subsample_seed);
    }
  }
  Split split = SplitDataset(*full, source.train_fraction, source.split_seed);
  if (source.standardize) {
    const auto standardizer = FeatureStandardizer::Fit(split.train);
    split = {standardizer.Apply(split.train), standardizer.Apply(split.test)};
  }
  NormalizedDataset norm = NormalizeUnitBall(split.train);
  return {std::move(norm.data), ApplyScale(split.test, norm.scale),
          norm.scale};
}

void WriteDatasetCache(const std::string& dir, const std::string& name,
                       const PreparedData& data) {
  std::filesystem::create_directories(dir);
  const auto base = std::filesystem::path(dir) / name;
  ExportPrivate(data.train, base.string() + ".train.csv");
  ExportPrivate(data.test, base.string() + ".test.csv");
  std::ofstream meta(base.string() + ".meta");
  if (!meta) throw std::runtime_error("cannot write cache metadata in " + dir);
  meta << std::setprecision(17) << "scale=" << data.scale << "\n"
       << "train_crc32=" << data.train.Checksum() << "\n"
       << "test_crc32=" << data.test.Checksum() << "\n";
}

std::optional<PreparedData> ReadDatasetCache(const std::string& dir,
                                             const std::string& name) {
  const auto base = std::filesystem::path(dir) / name;
  const std::string meta_path = base.string() + ".meta";
  if (!std::filesystem::exists(meta_path)) return std::nullopt;

  std::ifstream meta(meta_path);
  std::map<std::string, std::string> fields;
  std::string line;
  while (std::getline(meta, line)) {
    const auto eq = line.find('=');
    if (eq != std::string::npos) fields[line.substr(0, eq)] = line.substr(eq + 1);
  }
  for (const char* key : {"scale", "train_crc32", "test_crc32"}) {
    if (!fields.count(key)) {
      throw std::runtime_error(meta_path + ": missing '" + key + "'");
    }
  }
  const auto spec = EncodingSpec::ForExported();
  Dataset train = LoadCsv(base.string() + ".train.csv", spec).data.WithName(name);
  Dataset test = LoadCsv(base.string() + ".test.csv", spec).data.WithName(name);
  if (std::to_string(train.Checksum()) != fields["train_crc32"] ||
      std::to_string(test.Checksum()) != fields["test_crc32"]) {
    throw std::runtime_error("dataset cache for '" + name + "' in " + dir +
                             " fails its checksum; re-run ingest");
  }
  return PreparedData{std::move(train), std::move(test),
                      std::stod(fields["scale"])};
}

Hyperparameters SelectHyperparameters(const ExperimentConfig& cfg,
                                      const LossModel& model,
                                      const Dataset& train,
                                      std::uint64_t split_seed) {
  const Split folds = SplitDataset(train, cfg.cv_fraction, split_seed + 1);
  const double n_fit = static_cast<double>(folds.train.size());
  const PrivacyBudget budget(cfg.cv_epsilon,
                             cfg.delta.value_or(1.0 / (n_fit * n_fit)));
  TrainConfig base = BaseTrainConfig(cfg, folds.train.size());
  base.record_loss = false;

  Hyperparameters best;
  best.cross_validated = true;
  best.validation_accuracy = -1.0;
  for (long iterations : cfg.iterations_grid) {
    for (double rate : cfg.learning_rate_grid) {
      TrainConfig trial = base;
      trial.iterations = iterations;
      trial.learning_rate = rate;
      double total = 0.0;
      for (int s = 0; s < cfg.cv_seeds; ++s) {
        trial.seed = static_cast<std::uint64_t>(s);
        const TrainOutcome out =
            TrainDbdp(model, folds.train, budget, trial, cfg.consts);
        total += model.Accuracy(out.theta, folds.test);
      }
      const double mean = total / cfg.cv_seeds;
      if (mean > best.validation_accuracy + 1e-12) {
        best.iterations = iterations;
        best.learning_rate = rate;
        best.validation_accuracy = mean;
      }
    }
  }
  return best;
}

DatasetContext BuildContext(const ExperimentConfig& cfg,
                            const DatasetSource& source,
                            const std::string& cache_dir, bool need_hessian) {
  std::optional<PreparedData> data;
  if (!cache_dir.empty()) data = ReadDatasetCache(cache_dir, source.name);
  if (!data) data = PrepareDataset(source);

  DatasetContext ctx{source, std::move(*data), nullptr, {}, {}, nullptr,
                     {},     {},               0.0,     0.0};
  const Dataset& train = ctx.data.train;
  ctx.model = MakeModel(cfg.architecture, train.dim(), cfg.model_options);
  ctx.train = BaseTrainConfig(cfg, train.size());
  ctx.delta = DeltaFor(cfg, source, train.size());

  ctx.hyper.iterations = cfg.train.iterations;
  ctx.hyper.learning_rate = ctx.train.StepSize(*ctx.model);
  if (cfg.cross_validate && !source.iterations && !source.learning_rate) {
    ctx.hyper = SelectHyperparameters(cfg, *ctx.model, train, source.split_seed);
  }
  if (source.iterations) ctx.hyper.iterations = *source.iterations;
  if (source.learning_rate) ctx.hyper.learning_rate = *source.learning_rate;
  ctx.train.iterations = ctx.hyper.iterations;
  ctx.train.learning_rate = ctx.hyper.learning_rate;

  TrainConfig ref_cfg = ctx.train;
  ref_cfg.seed = source.split_seed;
  ctx.optimum = TrainSgd(*ctx.model, train, ref_cfg);
  ctx.reference = ReferenceOptimum::From(*ctx.model, train, ctx.optimum);
  ctx.initial_objective =
      ctx.model->Objective(ctx.model->InitialParams(source.split_seed), train);
  if (need_hessian) {
    ctx.hess = std::make_shared<HessianOperator>(HessianOperator::Assemble(
        *ctx.model, ctx.optimum.theta, train, cfg.damping));
  }
  return ctx;
}

TrainOutcome RunMethod(const ExperimentConfig& cfg, const DatasetContext& ctx,
                       Method method, double epsilon, std::uint64_t seed) {
  const LossModel& model = *ctx.model;
  const Dataset& train = ctx.data.train;
  const PrivacyBudget budget(epsilon, ctx.delta);
  TrainConfig train_cfg = ctx.train;
  train_cfg.seed = seed;

  switch (method) {
    case Method::kSgd: {
      train_cfg.sigma_override = 0.0;
      return TrainDbdp(model, train, budget, train_cfg, cfg.consts);
    }
    case Method::kDbdp:
      train_cfg.noise_mode = NoiseMode::kFixedPerInstance;
      return TrainDbdp(model, train, budget, train_cfg, cfg.consts);
    case Method::kDbdpFresh:
      train_cfg.noise_mode = NoiseMode::kFreshPerIteration;
      return TrainDbdp(model, train, budget, train_cfg, cfg.consts);
    case Method::kDbdpImproved:
      if (!ctx.hess) throw std::logic_error("Hessian was not assembled");
      return TrainDbdpImproved(model, train, budget, train_cfg, cfg.consts,
                               ctx.optimum.theta, *ctx.hess);
    case Method::kGradient:
      return TrainGradientPerturbation(model, train, budget, train_cfg,
                                       cfg.consts);
    case Method::kOutput:
      return TrainOutputPerturbation(model, train, budget, train_cfg,
                                     &ctx.optimum);
  }
  throw std::logic_error("unhandled method");
}

ResultRow RunCell(const ExperimentConfig& cfg, const DatasetContext& ctx,
                  Method method, double epsilon, std::uint64_t seed) {
  ResultRow row;
  row.dataset = ctx.source.name;
  row.model = ArchitectureName(cfg.architecture);
  row.method = MethodName(method);
  row.epsilon = epsilon;
  row.delta = ctx.delta;
  row.seed = seed;

  std::ostringstream notes;
  notes << "c=" << cfg.consts.c << ";c1=" << cfg.consts.c1
        << ";w_floor=" << cfg.consts.w_floor << ";I=" << cfg.consts.infimum
        << ";T=" << ctx.train.iterations << ";alpha="
        << ctx.train.StepSize(*ctx.model) << ";q="
        << FormatDouble(ctx.train.sampling_probability, 6);
  if (method == Method::kDbdpImproved) {
    notes << ";T_local=" << ctx.train.local_iterations
          << ";damping=" << ctx.hess->damping()
          << ";pretrain_not_privacy_accounted";
  }

  const auto start = std::chrono::steady_clock::now();
  try {
    const TrainOutcome out = RunMethod(cfg, ctx, method, epsilon, seed);
    row.accuracy = ctx.model->Accuracy(out.theta, ctx.data.test);
    row.optimality_gap =
        OptimalityGap(*ctx.model, out.theta, ctx.data.train, ctx.reference);
    row.sigma = out.sigma;
    row.fraction_noised =
        method == Method::kDbdpImproved ? out.FractionNoised()
        : (method == Method::kSgd ? 0.0 : 1.0);
    if (method == Method::kSgd) {
      row.regime = "n/a";
    } else if (method == Method::kDbdp || method == Method::kDbdpFresh ||
               method == Method::kDbdpImproved) {
      row.regime = out.regime_warning ? "outside" : "inside";
    } else {
      const auto warning = ValidateBudget(
          PrivacyBudget(epsilon, ctx.delta), ctx.train.sampling_probability,
          ctx.train.iterations, static_cast<long>(ctx.data.train.size()),
          cfg.consts);
      row.regime = warning ? "outside" : "inside";
    }
    if (!ctx.optimum.converged) notes << ";reference_not_converged";
  } catch (const std::exception& e) {
    row.failed = true;
    row.accuracy = std::numeric_limits<double>::quiet_NaN();
    row.optimality_gap = std::numeric_limits<double>::quiet_NaN();
    row.regime = "error";
    notes << ";error: " << e.what();
  }
  row.runtime = std::chrono::duration<double>(
                    std::chrono::steady_clock::now() - start)
                    .count();
  row.notes = CsvSafe(notes.str());
  return row;
}

bool ResultsTable::AnyFailed() const {
  return std::any_of(rows.begin(), rows.end(),
                     [](const ResultRow& r) { return r.failed; });
}

ResultsTable RunExperiment(const ExperimentConfig& cfg,
                           const std::string& cache_dir) {
  cfg.Validate();
  const bool need_hessian =
      std::find(cfg.methods.begin(), cfg.methods.end(),
                Method::kDbdpImproved) != cfg.methods.end();

  ResultsTable table;
  std::vector<DatasetContext> contexts;
  for (const auto& source : cfg.datasets) {
    contexts.push_back(BuildContext(cfg, source, cache_dir, need_hessian));
    const DatasetContext& ctx = contexts.back();
    std::ostringstream os;
    os << std::setprecision(12) << ctx.source.name
       << ".n_train=" << ctx.data.train.size()
       << " n_test=" << ctx.data.test.size() << " d=" << ctx.data.train.dim()
       << " scale=" << ctx.data.scale << " T=" << ctx.train.iterations
       << " alpha=" << ctx.train.StepSize(*ctx.model)
       << " cross_validated=" << (ctx.hyper.cross_validated ? 1 : 0)
       << " delta=" << ctx.delta << " L*=" << ctx.optimum.objective
       << " L(theta0)=" << ctx.initial_objective
       << " reference_converged=" << (ctx.optimum.converged ? 1 : 0);
    if (ctx.hess) os << " damping=" << ctx.hess->damping();
    table.metadata.push_back(os.str());
  }

  struct Cell {
    std::size_t context;
    Method method;
    double epsilon;
    std::uint64_t seed;
  };
  std::vector<Cell> cells;
  for (std::size_t c = 0; c < contexts.size(); ++c) {
    for (Method m : cfg.methods) {
      for (double eps : cfg.epsilons) {
        for (auto seed : cfg.seeds) cells.push_back({c, m, eps, seed});
      }
    }
  }

  table.rows.resize(cells.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      const Cell& cell = cells[i];
      table.rows[i] = RunCell(cfg, contexts[cell.context], cell.method,
                              cell.epsilon, cell.seed);
    }
  };
  const int jobs = std::max(1, std::min<int>(cfg.jobs, cells.size()));
  std::vector<std::thread> threads;
  for (int j = 1; j < jobs; ++j) threads.emplace_back(worker);
  worker();
  for (auto& t : threads) t.join();
  return table;
}

void WriteResultsCsv(const ResultsTable& table, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << kResultsHeader << "\n";
  for (const auto& r : table.rows) {
    out << r.dataset << "," << r.model << "," << r.method << ","
        << FormatDouble(r.epsilon, 17) << "," << FormatDouble(r.delta, 17)
        << "," << r.seed << "," << FormatDouble(r.accuracy, 12) << ","
        << FormatDouble(r.optimality_gap, 12) << ","
        << FormatDouble(r.sigma, 17) << ","
        << FormatDouble(r.fraction_noised, 12) << ","
        << FormatDouble(r.runtime, 6) << "," << r.regime << "," << r.notes
        << "\n";
  }
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

ResultsTable ReadResultsCsv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || line != kResultsHeader) {
    throw std::runtime_error(path + ": not a results file (header mismatch)");
  }
  ResultsTable table;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string item;
    while (std::getline(ss, item, ',')) f.push_back(item);
    if (f.size() == 12) f.emplace_back();
    if (f.size() != 13) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": expected 13 fields");
    }
    try {
      ResultRow r;
      r.dataset = f[0];
      r.model = f[1];
      r.method = f[2];
      r.epsilon = std::stod(f[3]);
      r.delta = std::stod(f[4]);
      r.seed = std::stoull(f[5]);
      r.accuracy = std::stod(f[6]);
      r.optimality_gap = std::stod(f[7]);
      r.sigma = std::stod(f[8]);
      r.fraction_noised = std::stod(f[9]);
      r.runtime = std::stod(f[10]);
      r.regime = f[11];
      r.notes = f[12];
      r.failed = r.regime == "error";
      table.rows.push_back(std::move(r));
    } catch (const std::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " +
                               e.what());
    }
  }
  return table;
}

void WriteMetadata(const ResultsTable& table, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  for (const auto& line : table.metadata) out << line << "\n";
}

std::vector<std::string> EmitPlotData(const ResultsTable& table,
                                      const std::string& dir) {
  if (table.rows.empty()) {
    throw std::invalid_argument("results table is empty; nothing to report");
  }
  std::filesystem::create_directories(dir);

  // First-appearance order for groups and methods keeps output stable.
  std::vector<std::pair<std::string, std::string>> groups;
  std::vector<std::string> methods;
  std::vector<double> epsilons;
  for (const auto& r : table.rows) {
    std::pair<std::string, std::string> g{r.dataset, r.model};
    if (std::find(groups.begin(), groups.end(), g) == groups.end()) {
      groups.push_back(g);
    }
    if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) {
      methods.push_back(r.method);
    }
    if (std::find(epsilons.begin(), epsilons.end(), r.epsilon) ==
        epsilons.end()) {
      epsilons.push_back(r.epsilon);
    }
  }
  std::sort(epsilons.begin(), epsilons.end());

  struct Metric {
    const char* name;
    double ResultRow::*field;
  };
  const Metric metrics[] = {{"accuracy", &ResultRow::accuracy},
                            {"gap", &ResultRow::optimality_gap}};

  std::vector<std::string> written;
  for (const auto& [dataset, model] : groups) {
    for (const Metric& metric : metrics) {
      const auto path = (std::filesystem::path(dir) /
                         (dataset + "_" + model + "_" + metric.name + ".csv"))
                            .string();
      std::ofstream out(path);
      if (!out) throw std::runtime_error("cannot write '" + path + "'");
      out << "epsilon";
      for (const auto& m : methods) out << "," << m << "_mean," << m << "_std";
      out << "\n" << std::setprecision(12);
      for (double eps : epsilons) {
        out << eps;
        for (const auto& m : methods) {
          std::vector<double> values;
          for (const auto& r : table.rows) {
            if (r.dataset == dataset && r.model == model && r.method == m &&
                r.epsilon == eps && !r.failed) {
              values.push_back(r.*(metric.field));
            }
          }
          if (values.empty()) {
            out << ",nan,nan";
            continue;
          }
          double mean = 0.0;
          for (double v : values) mean += v;
          mean /= static_cast<double>(values.size());
          double var = 0.0;
          for (double v : values) var += (v - mean) * (v - mean);
          const double sd =
              values.size() > 1
                  ? std::sqrt(var / static_cast<double>(values.size() - 1))
                  : 0.0;
          out << "," << mean << "," << sd;
        }
        out << "\n";
      }
      if (!out) throw std::runtime_error("write to '" + path + "' failed");
      written.push_back(path);
    }
  }
  return written;
}

}  // namespace dbdp
