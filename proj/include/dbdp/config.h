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

#ifndef DBDP_CONFIG_H_
#define DBDP_CONFIG_H_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dbdp/dataset.h"
#include "dbdp/models.h"
#include "dbdp/privacy.h"
#include "dbdp/trainers.h"

namespace dbdp {

enum class Method {
  kSgd,            // non-private reference on the same schedule
  kDbdp,           // data perturbation, fixed noise per instance
  kDbdpFresh,      // data perturbation, fresh noise per step
  kDbdpImproved,   // influence-gated data perturbation
  kGradient,       // gradient perturbation
  kOutput,         // output perturbation
};

std::string MethodName(Method method);
Method ParseMethod(const std::string& name);

struct DatasetSource {
  enum class Kind { kSynthetic, kCsv };

  std::string name;
  Kind kind = Kind::kSynthetic;

  // Synthetic.
  std::size_t n = 400;
  int d = 10;
  double margin = 1.5;
  std::uint64_t seed = 0;

  // CSV, resolved against the config file's directory.
  std::string path;
  EncodingSpec encoding;
  std::size_t subsample = 0;  // 0 keeps every row
  std::uint64_t subsample_seed = 0;

  // Standardize each feature with training-split statistics before the
  // unit-ball scaling; needed when features are all positive, since the
  // models carry no intercept.
  bool standardize = false;

  double train_fraction = 0.8;
  std::uint64_t split_seed = 0;

  // Per-dataset overrides of the [training] section.
  std::optional<long> iterations;
  std::optional<double> learning_rate;
  std::optional<double> delta;
};

// Everything a sweep needs. Parsed from an INI-style file:
//
//   [experiment]  name, output, methods, epsilons, seeds, delta, jobs
//   [model]       architecture, l2, clip, mixed_norm
//   [training]    iterations (number or "cv"), learning_rate (number or
//                 "auto"), sampling_probability, batch_size, local_iterations,
//                 noise_mode, gate_mode, theta_floor, damping,
//                 iterations_grid, learning_rate_grid, cv_epsilon, cv_seeds,
//                 cv_fraction
//   [calibration] c, c1, w_floor, infimum
//   [dataset:<name>] source = synthetic | csv, plus the fields above
//
// Lists are comma separated; seeds also accept ranges such as "1-20".
struct ExperimentConfig {
  std::string name = "experiment";
  std::string output_dir = "results";
  std::string base_dir = ".";

  std::vector<DatasetSource> datasets;
  Architecture architecture = Architecture::kLogistic;
  ModelOptions model_options;

  std::vector<Method> methods = {Method::kDbdp, Method::kDbdpImproved,
                                 Method::kGradient, Method::kOutput};
  std::vector<double> epsilons = {0.1, 0.5, 1.0, 3.0, 7.0};
  // nullopt: 1 / n^2 for each training set.
  std::optional<double> delta;
  std::vector<std::uint64_t> seeds = {0};
  int jobs = 1;

  TrainConfig train;
  // When set, batches hold this many instances regardless of n.
  std::optional<long> batch_size;
  double damping = 0.0;

  bool cross_validate = false;
  std::vector<long> iterations_grid = {50, 100, 200, 400};
  std::vector<double> learning_rate_grid = {0.5, 1.0, 2.0, 4.0};
  double cv_epsilon = 1.0;
  int cv_seeds = 3;
  double cv_fraction = 0.75;

  CalibrationConstants consts;

  // Throws std::invalid_argument describing the first violated invariant.
  void Validate() const;
};

// Throws std::runtime_error naming the file, or the section and key, that
// could not be understood.
ExperimentConfig LoadExperimentConfig(const std::string& path);
ExperimentConfig ParseExperimentConfig(const std::string& text,
                                       const std::string& base_dir = ".");

std::vector<double> ParseDoubleList(const std::string& text);
std::vector<std::uint64_t> ParseSeedList(const std::string& text);

}  // namespace dbdp

#endif  // DBDP_CONFIG_H_
