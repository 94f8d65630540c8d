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

#ifndef DBDP_TRAINERS_H_
#define DBDP_TRAINERS_H_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dbdp/dataset.h"
#include "dbdp/influence.h"
#include "dbdp/linalg.h"
#include "dbdp/models.h"
#include "dbdp/privacy.h"

namespace dbdp {

// How long a perturbed copy of an instance lives in data-perturbation SGD.
enum class NoiseMode {
  // One b_i per instance, drawn before training; D_priv = {z_i + b_i}.
  kFixedPerInstance,
  // A fresh b for every selected instance at every step.
  kFreshPerIteration,
};

struct TrainConfig {
  // Step size; <= 0 means 1 / L for the model.
  double learning_rate = 0.0;
  // Total iterations T.
  long iterations = 100;
  // Mini-batch sampling probability q; batches hold round(q * n) instances.
  double sampling_probability = 0.01;
  // T_local for the influence-gated trainer; R = T / T_local.
  long local_iterations = 10;
  std::uint64_t seed = 0;
  NoiseMode noise_mode = NoiseMode::kFixedPerInstance;
  GateMode gate_mode = GateMode::kLiteral;
  double theta_floor = 1e-12;
  // Replaces the calibrated noise scale, e.g. 0 for the zero-noise limit.
  std::optional<double> sigma_override;
  // Record the full training objective after each step.
  bool record_loss = true;

  double StepSize(const LossModel& model) const;
  long BatchSize(std::size_t n) const;
  long GlobalRounds() const;
};

// Index sequence for T mini-batches of `batch_size` instances drawn without
// replacement within a batch. Depends only on (n, batch_size, T, seed).
std::vector<std::vector<long>> MinibatchSchedule(std::size_t n, long batch_size,
                                                 long iterations,
                                                 std::uint64_t seed);

// T single instances drawn uniformly with replacement.
std::vector<long> SelectionSchedule(std::size_t n, long iterations,
                                    std::uint64_t seed);

// Plain mini-batch SGD over an explicit schedule. Per-example gradients are
// clipped to `clip_bound` when it is finite.
ModelParams RunSgdSteps(const LossModel& model, const Dataset& ds,
                        ModelParams theta, double learning_rate,
                        const std::vector<std::vector<long>>& schedule,
                        double clip_bound);

struct StepRecord {
  long iteration = 0;
  std::vector<long> indices;
  // Influence gate passed: the step used clean data.
  bool gated = false;
  double sigma = 0.0;
  double mixed_norm = 0.0;
  double loss = 0.0;
  // Largest per-example gradient norm after clipping.
  double max_clipped_norm = 0.0;
  // Global and local models were identical when the gate was evaluated.
  bool models_synced = false;
};

struct TrainOutcome {
  ModelParams theta;
  Dataset data_priv;
  std::vector<StepRecord> step_log;
  std::vector<double> loss_trace;
  // Calibrated scale; for the gated trainer, the mean over noised steps.
  double sigma = 0.0;
  // Set when the budget lies outside the proven range.
  std::optional<std::string> regime_warning;

  double FractionNoised() const;
};

// Writes iteration,instance_index,gated,sigma,w_t,loss. Mini-batches write
// one row per selected instance.
void WriteStepLog(const std::vector<StepRecord>& log, const std::string& path);

struct SgdResult {
  ModelParams theta;
  double objective = 0.0;
  double grad_norm = 0.0;
  bool converged = false;
  long gd_iterations = 0;
  // Parameters after the mini-batch phase, before gradient descent.
  ModelParams sgd_phase_theta;
};

// Non-private reference optimum: cfg.iterations mini-batch SGD steps from
// the model's initial point, then full-batch gradient descent with step 1 / L
// until ||grad L|| <= 1e-8 or 1e5 iterations.
SgdResult TrainSgd(const LossModel& model, const Dataset& ds,
                   const TrainConfig& cfg);

// Data-perturbation SGD: noise on features, clean labels, noise scale from
// CalibrateDataPerturbation.
TrainOutcome TrainDbdp(const LossModel& model, const Dataset& ds,
                       const PrivacyBudget& budget, const TrainConfig& cfg,
                       const CalibrationConstants& consts);

// Influence-gated data-perturbation SGD. Starts from the pre-trained
// `reference` with `hess` assembled there; each step either trains on the
// clean instance or on a perturbed copy with noise from
// CalibrateInstanceNoise.
TrainOutcome TrainDbdpImproved(const LossModel& model, const Dataset& ds,
                               const PrivacyBudget& budget,
                               const TrainConfig& cfg,
                               const CalibrationConstants& consts,
                               const ModelParams& reference,
                               const HessianOperator& hess);

// Gradient perturbation: Gaussian noise on the averaged clipped gradient.
TrainOutcome TrainGradientPerturbation(const LossModel& model,
                                       const Dataset& ds,
                                       const PrivacyBudget& budget,
                                       const TrainConfig& cfg,
                                       const CalibrationConstants& consts);

// Output perturbation: the exact optimum plus Gaussian noise. Refuses
// models without L2 regularization. The step log is empty. When `optimum`
// is given it is used instead of re-running TrainSgd.
TrainOutcome TrainOutputPerturbation(const LossModel& model, const Dataset& ds,
                                     const PrivacyBudget& budget,
                                     const TrainConfig& cfg,
                                     const SgdResult* optimum = nullptr);

}  // namespace dbdp

#endif  // DBDP_TRAINERS_H_
