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

#include "dbdp/trainers.h"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace dbdp {
namespace {

constexpr double kNoClip = std::numeric_limits<double>::infinity();
constexpr double kGradientTolerance = 1e-8;
constexpr long kGradientDescentCap = 100000;

// Sum of clipped per-example gradients divided by the batch size.
template <typename InstanceAt>
Vector AveragedClippedGradient(const LossModel& model, const ModelParams& theta,
                               const std::vector<long>& batch,
                               InstanceAt&& instance_at, double clip_bound,
                               double* max_norm) {
  Vector sum = Vector::Zero(model.param_dim());
  double largest = 0.0;
  for (long i : batch) {
    Vector g = ClipToNorm(model.Gradient(theta, instance_at(i)), clip_bound);
    largest = std::max(largest, g.norm());
    sum += g;
  }
  if (max_norm != nullptr) *max_norm = largest;
  return sum / static_cast<double>(batch.size());
}

void CheckConfig(const TrainConfig& cfg, std::size_t n) {
  if (cfg.iterations < 1) throw std::invalid_argument("iterations must be >= 1");
  if (!(cfg.sampling_probability > 0.0 && cfg.sampling_probability <= 1.0)) {
    throw std::invalid_argument("sampling probability must lie in (0, 1]");
  }
  if (cfg.sampling_probability * static_cast<double>(n) < 0.5) {
    throw std::invalid_argument(
        "sampling probability selects no instances (q * n < 1)");
  }
  if (cfg.sigma_override && !(*cfg.sigma_override >= 0.0)) {
    throw std::invalid_argument("sigma override must be >= 0");
  }
}

Dataset CopyWithFeatures(const Dataset& ds,
                         const std::vector<std::optional<Vector>>& features) {
  std::vector<DataInstance> out;
  out.reserve(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    out.push_back({features[i] ? *features[i] : ds[i].x, ds[i].y});
  }
  return Dataset(ds.name(), std::move(out));
}

}  // namespace

double TrainConfig::StepSize(const LossModel& model) const {
  return learning_rate > 0.0 ? learning_rate : 1.0 / model.SmoothnessBound();
}

long TrainConfig::BatchSize(std::size_t n) const {
  return std::max<long>(
      1, std::lround(sampling_probability * static_cast<double>(n)));
}

long TrainConfig::GlobalRounds() const {
  if (local_iterations < 1 || iterations % local_iterations != 0) {
    throw std::invalid_argument(
        "iterations must be a positive multiple of local_iterations");
  }
  return iterations / local_iterations;
}

std::vector<std::vector<long>> MinibatchSchedule(std::size_t n, long batch_size,
                                                 long iterations,
                                                 std::uint64_t seed) {
  if (batch_size < 1 || static_cast<std::size_t>(batch_size) > n) {
    throw std::invalid_argument("batch size must lie in [1, n]");
  }
  Rng rng = MakeRng(seed, kStreamSchedule);
  std::vector<long> pool(n);
  std::iota(pool.begin(), pool.end(), 0L);
  std::vector<std::vector<long>> schedule;
  schedule.reserve(iterations);
  for (long t = 0; t < iterations; ++t) {
    // Partial Fisher-Yates: the first batch_size slots form the batch.
    for (long k = 0; k < batch_size; ++k) {
      std::uniform_int_distribution<std::size_t> pick(k, n - 1);
      std::swap(pool[k], pool[pick(rng)]);
    }
    schedule.emplace_back(pool.begin(), pool.begin() + batch_size);
  }
  return schedule;
}

std::vector<long> SelectionSchedule(std::size_t n, long iterations,
                                    std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("empty dataset");
  Rng rng = MakeRng(seed, kStreamSchedule);
  std::uniform_int_distribution<long> pick(0, static_cast<long>(n) - 1);
  std::vector<long> out(iterations);
  for (auto& i : out) i = pick(rng);
  return out;
}

ModelParams RunSgdSteps(const LossModel& model, const Dataset& ds,
                        ModelParams theta, double learning_rate,
                        const std::vector<std::vector<long>>& schedule,
                        double clip_bound) {
  auto at = [&ds](long i) -> const DataInstance& { return ds[i]; };
  for (const auto& batch : schedule) {
    theta -= learning_rate *
             AveragedClippedGradient(model, theta, batch, at, clip_bound,
                                     nullptr);
  }
  return theta;
}

double TrainOutcome::FractionNoised() const {
  if (step_log.empty()) return 0.0;
  long noised = 0;
  for (const auto& step : step_log) noised += step.gated ? 0 : 1;
  return static_cast<double>(noised) / static_cast<double>(step_log.size());
}

void WriteStepLog(const std::vector<StepRecord>& log, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << "iteration,instance_index,gated,sigma,w_t,loss\n"
      << std::setprecision(17);
  for (const auto& step : log) {
    for (long i : step.indices) {
      out << step.iteration << "," << i << "," << (step.gated ? 1 : 0) << ","
          << step.sigma << "," << step.mixed_norm << "," << step.loss << "\n";
    }
  }
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

SgdResult TrainSgd(const LossModel& model, const Dataset& ds,
                   const TrainConfig& cfg) {
  if (ds.dim() != model.feature_dim()) {
    throw std::invalid_argument("dataset dimension does not match model");
  }
  SgdResult result;
  ModelParams theta = model.InitialParams(cfg.seed);
  if (cfg.iterations > 0) {
    CheckConfig(cfg, ds.size());
    const auto schedule = MinibatchSchedule(ds.size(), cfg.BatchSize(ds.size()),
                                            cfg.iterations, cfg.seed);
    theta = RunSgdSteps(model, ds, std::move(theta), cfg.StepSize(model),
                        schedule, kNoClip);
  }
  result.sgd_phase_theta = theta;

  const double step = 1.0 / model.SmoothnessBound();
  ModelParams best = theta;
  double best_norm = std::numeric_limits<double>::infinity();
  for (long k = 0; k <= kGradientDescentCap; ++k) {
    const Vector grad = model.ObjectiveGradient(theta, ds);
    const double norm = grad.norm();
    if (!std::isfinite(norm)) break;
    if (norm < best_norm) {
      best_norm = norm;
      best = theta;
    }
    if (norm <= kGradientTolerance) {
      result.converged = true;
      result.gd_iterations = k;
      break;
    }
    if (k == kGradientDescentCap) {
      result.gd_iterations = k;
      break;
    }
    theta -= step * grad;
  }
  result.theta = result.converged ? theta : best;
  result.grad_norm = best_norm;
  result.objective = model.Objective(result.theta, ds);
  return result;
}

TrainOutcome TrainDbdp(const LossModel& model, const Dataset& ds,
                       const PrivacyBudget& budget, const TrainConfig& cfg,
                       const CalibrationConstants& consts) {
  CheckConfig(cfg, ds.size());
  const std::size_t n = ds.size();
  const long batch_size = cfg.BatchSize(n);
  const double q = static_cast<double>(batch_size) / static_cast<double>(n);
  const double clip = model.LipschitzBound();
  const double alpha = cfg.StepSize(model);

  TrainOutcome out{model.InitialParams(cfg.seed), ds, {}, {}, 0.0, {}};
  out.sigma = cfg.sigma_override
                  ? *cfg.sigma_override
                  : CalibrateDataPerturbation(budget, q, cfg.iterations, clip,
                                              consts)
                        .sigma;
  out.regime_warning = ValidateBudget(budget, q, cfg.iterations,
                                      static_cast<long>(n), consts);
  const NoiseScale scale{out.sigma};

  Rng noise_rng = MakeRng(cfg.seed, kStreamNoise);
  std::vector<std::optional<Vector>> perturbed(n);
  if (cfg.noise_mode == NoiseMode::kFixedPerInstance) {
    for (std::size_t i = 0; i < n; ++i) {
      perturbed[i] = ds[i].x + GaussianVector(ds.dim(), scale, noise_rng);
    }
    out.data_priv = CopyWithFeatures(ds, perturbed);
  }

  const auto schedule =
      MinibatchSchedule(n, batch_size, cfg.iterations, cfg.seed);
  out.step_log.reserve(cfg.iterations);
  for (long t = 0; t < cfg.iterations; ++t) {
    const auto& batch = schedule[t];
    StepRecord rec;
    rec.iteration = t;
    rec.indices = batch;
    rec.sigma = out.sigma;

    Vector avg;
    if (cfg.noise_mode == NoiseMode::kFixedPerInstance) {
      auto at = [&out](long i) -> const DataInstance& {
        return out.data_priv[i];
      };
      avg = AveragedClippedGradient(model, out.theta, batch, at, clip,
                                    &rec.max_clipped_norm);
    } else {
      std::vector<DataInstance> fresh;
      fresh.reserve(batch.size());
      for (long i : batch) {
        Vector x = ds[i].x + GaussianVector(ds.dim(), scale, noise_rng);
        perturbed[i] = x;
        fresh.push_back({std::move(x), ds[i].y});
      }
      std::vector<long> local(batch.size());
      std::iota(local.begin(), local.end(), 0L);
      auto at = [&fresh](long k) -> const DataInstance& { return fresh[k]; };
      avg = AveragedClippedGradient(model, out.theta, local, at, clip,
                                    &rec.max_clipped_norm);
    }
    out.theta -= alpha * avg;
    if (cfg.record_loss) {
      rec.loss = model.Objective(out.theta, ds);
      out.loss_trace.push_back(rec.loss);
    }
    out.step_log.push_back(std::move(rec));
  }
  if (cfg.noise_mode == NoiseMode::kFreshPerIteration) {
    out.data_priv = CopyWithFeatures(ds, perturbed);
  }
  return out;
}

TrainOutcome TrainDbdpImproved(const LossModel& model, const Dataset& ds,
                               const PrivacyBudget& budget,
                               const TrainConfig& cfg,
                               const CalibrationConstants& consts,
                               const ModelParams& reference,
                               const HessianOperator& hess) {
  if (cfg.iterations < 1) throw std::invalid_argument("iterations must be >= 1");
  const long rounds = cfg.GlobalRounds();
  if (reference.size() != model.param_dim() ||
      hess.dim() != model.param_dim()) {
    throw std::invalid_argument("reference model or Hessian has wrong size");
  }
  if (cfg.sigma_override && !(*cfg.sigma_override >= 0.0)) {
    throw std::invalid_argument("sigma override must be >= 0");
  }
  const std::size_t n = ds.size();
  const long n_long = static_cast<long>(n);
  const double clip = model.LipschitzBound();
  const double alpha = cfg.StepSize(model);
  const auto selection = SelectionSchedule(n, cfg.iterations, cfg.seed);
  Rng noise_rng = MakeRng(cfg.seed, kStreamNoise);

  TrainOutcome out{reference, ds, {}, {}, 0.0, {}};
  out.regime_warning = ValidateBudget(budget, 1.0 / static_cast<double>(n),
                                      cfg.iterations, n_long, consts);
  std::vector<std::optional<Vector>> perturbed(n);
  ModelParams global = reference;
  ModelParams& local = out.theta;
  double sigma_sum = 0.0;
  long noised = 0;

  out.step_log.reserve(cfg.iterations);
  long step = 0;
  for (long r = 0; r < rounds; ++r) {
    for (long t = 0; t < cfg.local_iterations; ++t, ++step) {
      const long idx = selection[step];
      const DataInstance& z = ds[idx];
      // Drawn every step so the noise sequence does not depend on gating.
      const Vector unit_noise = GaussianVector(ds.dim(), {1.0}, noise_rng);

      StepRecord rec;
      rec.iteration = step;
      rec.indices = {idx};
      rec.models_synced = (global.array() == local.array()).all();

      const Vector contribution =
          Influence(hess, model, global, z, n_long);
      const InfluenceReport report = ThresholdCheck(
          contribution, global, budget.epsilon(), cfg.gate_mode,
          cfg.theta_floor);
      rec.gated = report.gated;

      Vector g;
      if (report.gated) {
        g = ClipToNorm(model.Gradient(local, z), clip);
      } else {
        rec.mixed_norm = model.MixedNorm(local, z);
        rec.sigma = cfg.sigma_override
                        ? *cfg.sigma_override
                        : CalibrateInstanceNoise(budget, n_long,
                                                 cfg.iterations, clip,
                                                 rec.mixed_norm, consts)
                              .sigma;
        DataInstance noisy{z.x + rec.sigma * unit_noise, z.y};
        g = ClipToNorm(model.Gradient(local, noisy), clip);
        perturbed[idx] = std::move(noisy.x);
        sigma_sum += rec.sigma;
        ++noised;
      }
      rec.max_clipped_norm = g.norm();
      local -= alpha * g;
      if (cfg.record_loss) {
        rec.loss = model.Objective(local, ds);
        out.loss_trace.push_back(rec.loss);
      }
      out.step_log.push_back(std::move(rec));
    }
    global = local;
  }
  out.sigma = noised > 0 ? sigma_sum / static_cast<double>(noised) : 0.0;
  out.data_priv = CopyWithFeatures(ds, perturbed);
  return out;
}

TrainOutcome TrainGradientPerturbation(const LossModel& model,
                                       const Dataset& ds,
                                       const PrivacyBudget& budget,
                                       const TrainConfig& cfg,
                                       const CalibrationConstants& consts) {
  CheckConfig(cfg, ds.size());
  const std::size_t n = ds.size();
  const long batch_size = cfg.BatchSize(n);
  const double q = static_cast<double>(batch_size) / static_cast<double>(n);
  const double clip = model.LipschitzBound();
  const double alpha = cfg.StepSize(model);

  TrainOutcome out{model.InitialParams(cfg.seed), ds, {}, {}, 0.0, {}};
  out.sigma = cfg.sigma_override
                  ? *cfg.sigma_override
                  : CalibrateGradientNoise(budget, q, cfg.iterations, clip,
                                           consts)
                        .sigma;
  const NoiseScale scale{out.sigma};
  Rng noise_rng = MakeRng(cfg.seed, kStreamNoise);
  const auto schedule =
      MinibatchSchedule(n, batch_size, cfg.iterations, cfg.seed);
  auto at = [&ds](long i) -> const DataInstance& { return ds[i]; };

  out.step_log.reserve(cfg.iterations);
  for (long t = 0; t < cfg.iterations; ++t) {
    StepRecord rec;
    rec.iteration = t;
    rec.indices = schedule[t];
    rec.sigma = out.sigma;
    const Vector avg = AveragedClippedGradient(model, out.theta, schedule[t],
                                               at, clip, &rec.max_clipped_norm);
    out.theta -= alpha * (avg + GaussianVector(model.param_dim(), scale,
                                               noise_rng));
    if (cfg.record_loss) {
      rec.loss = model.Objective(out.theta, ds);
      out.loss_trace.push_back(rec.loss);
    }
    out.step_log.push_back(std::move(rec));
  }
  return out;
}

TrainOutcome TrainOutputPerturbation(const LossModel& model, const Dataset& ds,
                                     const PrivacyBudget& budget,
                                     const TrainConfig& cfg,
                                     const SgdResult* optimum) {
  if (!(model.l2() > 0.0)) {
    throw std::invalid_argument(
        "output perturbation requires l2 > 0 (strongly convex objective)");
  }
  SgdResult computed;
  if (optimum == nullptr) {
    computed = TrainSgd(model, ds, cfg);
    optimum = &computed;
  }
  TrainOutcome out{optimum->theta, ds, {}, {}, 0.0, {}};
  out.sigma = cfg.sigma_override
                  ? *cfg.sigma_override
                  : CalibrateOutputNoise(budget, static_cast<long>(ds.size()),
                                         model.LipschitzBound(), model.l2())
                        .sigma;
  Rng noise_rng = MakeRng(cfg.seed, kStreamNoise);
  out.theta += GaussianVector(model.param_dim(), {out.sigma}, noise_rng);
  return out;
}

}  // namespace dbdp
