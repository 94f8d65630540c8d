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

// Command-line front end: ingest, pretrain, run, export-priv, report.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dbdp/bench.h"
#include "dbdp/config.h"
#include "dbdp/dataset.h"
#include "dbdp/trainers.h"

namespace {

constexpr int kUsageError = 1;
constexpr int kRuntimeError = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

dbdp::ExperimentConfig LoadConfigOrThrow(const std::string& path) {
  if (!std::filesystem::exists(path)) {
    throw UsageError("config file not found: " + path);
  }
  try {
    return dbdp::LoadExperimentConfig(path);
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
}

std::string OutDir(const dbdp::ExperimentConfig& cfg, const std::string& flag) {
  return flag.empty() ? cfg.output_dir : flag;
}

std::string CacheDir(const std::string& out) {
  return (std::filesystem::path(out) / "cache").string();
}

const dbdp::DatasetSource& FindDataset(const dbdp::ExperimentConfig& cfg,
                                       const std::string& name) {
  for (const auto& ds : cfg.datasets) {
    if (ds.name == name) return ds;
  }
  throw UsageError("dataset '" + name + "' is not in the config");
}

int Ingest(const std::string& config_path, const std::string& out_flag) {
  const auto cfg = LoadConfigOrThrow(config_path);
  const std::string cache = CacheDir(OutDir(cfg, out_flag));
  int cached = 0;
  std::size_t instances = 0;
  for (const auto& source : cfg.datasets) {
    if (source.kind != dbdp::DatasetSource::Kind::kCsv) continue;
    const auto data = dbdp::PrepareDataset(source);
    dbdp::WriteDatasetCache(cache, source.name, data);
    instances += data.train.size() + data.test.size();
    ++cached;
  }
  std::cout << "ingest: cached " << cached << " dataset(s), " << instances
            << " instances, in " << cache << "\n";
  return 0;
}

int Pretrain(const std::string& config_path, const std::string& out_flag) {
  const auto cfg = LoadConfigOrThrow(config_path);
  const std::string out = OutDir(cfg, out_flag);
  std::filesystem::create_directories(out);
  for (const auto& source : cfg.datasets) {
    const auto ctx = dbdp::BuildContext(cfg, source, CacheDir(out), true);
    const auto base = (std::filesystem::path(out) / source.name).string();
    dbdp::SaveModel(*ctx.model, ctx.optimum.theta, base + ".model");

    std::ofstream hess(base + ".hessian");
    hess << std::setprecision(17) << ctx.hess->dim() << " "
         << ctx.hess->damping() << "\n";
    for (Eigen::Index i = 0; i < ctx.hess->dim(); ++i) {
      for (Eigen::Index j = 0; j < ctx.hess->dim(); ++j) {
        hess << (j ? " " : "") << ctx.hess->matrix()(i, j);
      }
      hess << "\n";
    }
    std::ofstream summary(base + ".pretrain");
    summary << std::setprecision(17) << "L_star=" << ctx.optimum.objective
            << "\ngrad_norm=" << ctx.optimum.grad_norm
            << "\nconverged=" << (ctx.optimum.converged ? 1 : 0)
            << "\ndamping=" << ctx.hess->damping()
            << "\niterations=" << ctx.train.iterations
            << "\nlearning_rate=" << ctx.train.StepSize(*ctx.model) << "\n";
    std::cout << "pretrain: " << source.name << " L*=" << std::setprecision(8)
              << ctx.optimum.objective << " |grad|=" << ctx.optimum.grad_norm
              << " damping=" << ctx.hess->damping() << " -> " << base
              << ".{model,hessian,pretrain}\n";
  }
  return 0;
}

int Run(const std::string& config_path, const std::string& out_flag,
        const std::string& seeds, const std::string& epsilons,
        const std::vector<std::string>& methods, int jobs) {
  auto cfg = LoadConfigOrThrow(config_path);
  try {
    if (!seeds.empty()) cfg.seeds = dbdp::ParseSeedList(seeds);
    if (!epsilons.empty()) cfg.epsilons = dbdp::ParseDoubleList(epsilons);
    if (!methods.empty()) {
      cfg.methods.clear();
      for (const auto& m : methods) cfg.methods.push_back(dbdp::ParseMethod(m));
    }
    if (jobs > 0) cfg.jobs = jobs;
    cfg.Validate();
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
  const std::string out = OutDir(cfg, out_flag);
  std::filesystem::create_directories(out);
  const auto table = dbdp::RunExperiment(cfg, CacheDir(out));
  const auto results = (std::filesystem::path(out) / "results.csv").string();
  dbdp::WriteResultsCsv(table, results);
  dbdp::WriteMetadata(table,
                      (std::filesystem::path(out) / "metadata.txt").string());
  std::size_t failed = 0;
  for (const auto& r : table.rows) failed += r.failed ? 1 : 0;
  std::cout << "run: " << table.rows.size() << " cells, " << failed
            << " failed -> " << results << "\n";
  return failed > 0 ? kRuntimeError : 0;
}

int ExportPriv(const std::string& config_path, const std::string& dataset,
               const std::string& method, double epsilon, std::uint64_t seed,
               const std::string& out_path, const std::string& step_log) {
  const auto cfg = LoadConfigOrThrow(config_path);
  const auto& source = FindDataset(cfg, dataset);
  dbdp::Method m;
  try {
    m = dbdp::ParseMethod(method);
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
  const auto ctx = dbdp::BuildContext(cfg, source, CacheDir(cfg.output_dir),
                                      m == dbdp::Method::kDbdpImproved);
  const auto outcome = dbdp::RunMethod(cfg, ctx, m, epsilon, seed);
  dbdp::ExportPrivate(outcome.data_priv, out_path);
  if (!step_log.empty()) dbdp::WriteStepLog(outcome.step_log, step_log);
  std::cout << "export-priv: " << dataset << " " << method << " eps=" << epsilon
            << " seed=" << seed << " sigma=" << outcome.sigma << " noised="
            << outcome.FractionNoised() << " -> " << out_path << "\n";
  return 0;
}

int Report(const std::string& config_path, const std::string& results_flag,
           const std::string& out_flag) {
  std::string results = results_flag;
  std::string out = out_flag;
  if (results.empty()) {
    if (config_path.empty()) throw UsageError("report needs --results or --config");
    const auto cfg = LoadConfigOrThrow(config_path);
    results = (std::filesystem::path(cfg.output_dir) / "results.csv").string();
    if (out.empty()) out = (std::filesystem::path(cfg.output_dir) / "plots").string();
  }
  if (out.empty()) {
    out = (std::filesystem::path(results).parent_path() / "plots").string();
  }
  const auto table = dbdp::ReadResultsCsv(results);
  const auto files = dbdp::EmitPlotData(table, out);
  std::cout << "report: " << files.size() << " tables from " << table.rows.size()
            << " rows -> " << out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Differentially private ERM by data perturbation"};
  app.require_subcommand(1);

  std::string config, out, seeds, epsilons, dataset, method = "dbdp", results,
                                                     step_log;
  std::vector<std::string> methods;
  int jobs = 0;
  double epsilon = 1.0;
  std::uint64_t seed = 0;

  auto* ingest = app.add_subcommand("ingest", "CSV -> normalized dataset cache");
  ingest->add_option("--config", config, "Experiment config")->required();
  ingest->add_option("--out", out, "Output directory (default: from config)");

  auto* pretrain =
      app.add_subcommand("pretrain", "Fit reference model, Hessian and L*");
  pretrain->add_option("--config", config, "Experiment config")->required();
  pretrain->add_option("--out", out, "Output directory");

  auto* run = app.add_subcommand("run", "Run the sweep in a config file");
  run->add_option("--config", config, "Experiment config")->required();
  run->add_option("--out", out, "Output directory");
  run->add_option("--seeds", seeds, "Seed list, e.g. 1-20 or 1,2,3");
  run->add_option("--epsilons", epsilons, "Epsilon list");
  run->add_option("--method", methods, "Method (repeatable)");
  run->add_option("--jobs", jobs, "Concurrent cells")->check(CLI::PositiveNumber);

  auto* exporter =
      app.add_subcommand("export-priv", "Train once and write D_priv");
  exporter->add_option("--config", config, "Experiment config")->required();
  exporter->add_option("--dataset", dataset, "Dataset name")->required();
  exporter->add_option("--method", method, "dbdp | dbdp_fresh | dbdp_improved");
  exporter->add_option("--epsilon", epsilon, "Privacy budget epsilon");
  exporter->add_option("--seed", seed, "Seed");
  exporter->add_option("--out", out, "Output CSV")->required();
  exporter->add_option("--step-log", step_log, "Optional step log CSV");

  auto* report = app.add_subcommand("report", "Emit plot-ready tables");
  report->add_option("--config", config, "Experiment config");
  report->add_option("--results", results, "results.csv to summarize");
  report->add_option("--out", out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsageError;
  }

  try {
    if (*ingest) return Ingest(config, out);
    if (*pretrain) return Pretrain(config, out);
    if (*run) return Run(config, out, seeds, epsilons, methods, jobs);
    if (*exporter) {
      return ExportPriv(config, dataset, method, epsilon, seed, out, step_log);
    }
    if (*report) return Report(config, results, out);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
  return kUsageError;
}
