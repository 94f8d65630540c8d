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

#ifndef DBDP_BENCH_H_
#define DBDP_BENCH_H_

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dbdp/config.h"
#include "dbdp/dataset.h"
#include "dbdp/influence.h"
#include "dbdp/models.h"
#include "dbdp/trainers.h"

namespace dbdp {

// The non-private optimum of one training objective, tagged with what it
// was computed on so a gap is never taken against the wrong objective.
struct ReferenceOptimum {
  ModelParams theta;
  double objective = 0.0;
  Architecture architecture = Architecture::kLogistic;
  double l2 = 0.0;
  std::uint32_t data_checksum = 0;
  bool converged = false;

  static ReferenceOptimum From(const LossModel& model, const Dataset& train,
                               const SgdResult& sgd);
};

// L(theta_priv) - L* on the clean training objective. Values below -1e-9
// (possible only for non-convex models or an unconverged L*) are clamped to
// 0 with a warning. Throws std::invalid_argument when `model` or `train` is
// not the objective `ref` was computed on.
double OptimalityGap(const LossModel& model, const ModelParams& theta_priv,
                     const Dataset& train, const ReferenceOptimum& ref);

struct PreparedData {
  Dataset train;
  Dataset test;
  // Training-set scale also applied to the test set.
  double scale = 1.0;
};

// Load or synthesize, subsample, split, then normalize by the training scale.
PreparedData PrepareDataset(const DatasetSource& source);

// Cache layout under `dir`: <name>.train.csv, <name>.test.csv and
// <name>.meta (scale and CRC-32 of each split).
void WriteDatasetCache(const std::string& dir, const std::string& name,
                       const PreparedData& data);
// nullopt when no cache exists; throws std::runtime_error on a checksum
// mismatch.
std::optional<PreparedData> ReadDatasetCache(const std::string& dir,
                                             const std::string& name);

struct Hyperparameters {
  long iterations = 0;
  double learning_rate = 0.0;
  bool cross_validated = false;
  double validation_accuracy = 0.0;
};

// Grid search over (T, alpha) scored by validation accuracy of data
// perturbation SGD at cfg.cv_epsilon, averaged over cfg.cv_seeds runs.
// Ties go to the earlier grid entry.
Hyperparameters SelectHyperparameters(const ExperimentConfig& cfg,
                                      const LossModel& model,
                                      const Dataset& train,
                                      std::uint64_t split_seed);

// Per-dataset state shared by every cell of a sweep.
struct DatasetContext {
  DatasetSource source;
  PreparedData data;
  std::shared_ptr<const LossModel> model;
  SgdResult optimum;
  ReferenceOptimum reference;
  std::shared_ptr<const HessianOperator> hess;
  TrainConfig train;
  Hyperparameters hyper;
  double delta = 0.0;
  double initial_objective = 0.0;
};

// Prepares data (from `cache_dir` when a cache exists there), fits the
// reference optimum, and assembles the Hessian when `need_hessian`.
DatasetContext BuildContext(const ExperimentConfig& cfg,
                            const DatasetSource& source,
                            const std::string& cache_dir = "",
                            bool need_hessian = true);

TrainOutcome RunMethod(const ExperimentConfig& cfg, const DatasetContext& ctx,
                       Method method, double epsilon, std::uint64_t seed);

struct ResultRow {
  std::string dataset;
  std::string model;
  std::string method;
  double epsilon = 0.0;
  double delta = 0.0;
  std::uint64_t seed = 0;
  double accuracy = 0.0;
  double optimality_gap = 0.0;
  double sigma = 0.0;
  double fraction_noised = 0.0;
  double runtime = 0.0;
  std::string regime;
  std::string notes;
  bool failed = false;
};

ResultRow RunCell(const ExperimentConfig& cfg, const DatasetContext& ctx,
                  Method method, double epsilon, std::uint64_t seed);

struct ResultsTable {
  std::vector<ResultRow> rows;
  // "key=value" lines describing per-dataset choices (T, alpha, delta, ...).
  std::vector<std::string> metadata;

  bool AnyFailed() const;
};

// Runs every (dataset, method, epsilon, seed) cell, cfg.jobs at a time.
// Row order is fixed by the config, not by execution order.
ResultsTable RunExperiment(const ExperimentConfig& cfg,
                           const std::string& cache_dir = "");

void WriteResultsCsv(const ResultsTable& table, const std::string& path);
ResultsTable ReadResultsCsv(const std::string& path);
void WriteMetadata(const ResultsTable& table, const std::string& path);

// One CSV per (dataset, model, metric) with columns epsilon, then
// <method>_mean,<method>_std for each method. Returns the paths written.
std::vector<std::string> EmitPlotData(const ResultsTable& table,
                                      const std::string& dir);

}  // namespace dbdp

#endif  // DBDP_BENCH_H_
