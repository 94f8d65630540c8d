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

#ifndef DBDP_DATASET_H_
#define DBDP_DATASET_H_

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dbdp/linalg.h"

namespace dbdp {

// A labelled training example z = (x, y) with y in {-1, +1}.
struct DataInstance {
  Vector x;
  int y = 1;
};

// An ordered, non-empty collection of instances sharing one feature
// dimension. Immutable once constructed.
class Dataset {
 public:
  // Throws std::invalid_argument when `instances` is empty, dimensions
  // disagree, or a label is not +-1.
  Dataset(std::string name, std::vector<DataInstance> instances);

  const std::string& name() const { return name_; }
  std::size_t size() const { return instances_.size(); }
  int dim() const { return dim_; }

  const DataInstance& operator[](std::size_t i) const { return instances_[i]; }
  const std::vector<DataInstance>& instances() const { return instances_; }
  auto begin() const { return instances_.begin(); }
  auto end() const { return instances_.end(); }

  double MaxNorm() const;
  double PositiveFraction() const;

  // Order-sensitive digest of names-free content, used for cache checks.
  std::uint32_t Checksum() const;

  Dataset WithName(std::string name) const;

 private:
  std::string name_;
  std::vector<DataInstance> instances_;
  int dim_ = 0;
};

enum class ColumnRole { kNumeric, kCategorical, kLabel, kIgnore };

// What to do with rows whose label is not in the label map.
enum class UnmappedLabel { kError, kSkip, kNegative, kPositive };

// Describes how raw CSV columns turn into (x, y). Columns not listed in
// `roles` are numeric. Categorical levels are taken from `levels` when given,
// otherwise learned from the file in lexicographic order; values outside the
// level list encode as an all-zero block.
struct EncodingSpec {
  std::map<std::string, ColumnRole> roles;
  std::map<std::string, int> label_map;
  UnmappedLabel unmapped = UnmappedLabel::kError;
  std::map<std::string, std::vector<std::string>> levels;

  // Default spec for files written by ExportPrivate: every column numeric
  // except `label_column`, whose values are "-1"/"1"/"+1".
  static EncodingSpec ForExported(const std::string& label_column = "label");
};

struct EncodedDataset {
  Dataset data;
  std::vector<std::string> feature_names;
  // Categorical levels actually used, so a test file can be encoded the same.
  std::map<std::string, std::vector<std::string>> levels;
};

// Reads a comma-separated file with a header row. Throws std::runtime_error
// with the file name and line number on malformed input.
EncodedDataset LoadCsv(const std::string& path, const EncodingSpec& spec);

struct NormalizedDataset {
  Dataset data;
  // Divisor applied to every feature vector; 1 when nothing was scaled.
  double scale = 1.0;
  // Set when every feature vector was zero.
  bool degenerate = false;
};

// Divides every x by max_i ||x_i|| when that exceeds 1.
NormalizedDataset NormalizeUnitBall(const Dataset& ds);

// Applies a previously computed scale (e.g. the training scale to test data).
Dataset ApplyScale(const Dataset& ds, double scale);

// Per-feature centering and scaling fitted on one dataset (normally the
// training split) and applied unchanged to others. Zero-variance features are
// only centered.
class FeatureStandardizer {
 public:
  static FeatureStandardizer Fit(const Dataset& ds);
  Dataset Apply(const Dataset& ds) const;

  const Vector& mean() const { return mean_; }
  const Vector& stddev() const { return stddev_; }

 private:
  Vector mean_;
  Vector stddev_;
};

struct Split {
  Dataset train;
  Dataset test;
};

// Seeded uniform shuffle; the training part holds ceil(f * n) instances.
Split SplitDataset(const Dataset& ds, double train_fraction,
                   std::uint64_t seed);

// Seeded subsample without replacement, original order preserved. Returns
// the input unchanged when `count` >= n.
Dataset Subsample(const Dataset& ds, std::size_t count, std::uint64_t seed);

// Two Gaussian clusters at +-margin * u for a random unit u, unit-variance
// isotropic spread, labelled by cluster, then normalized to the unit ball.
Dataset Synthesize(std::size_t n, int d, double margin, std::uint64_t seed);

// Writes features then a trailing `label` column with values -1/1, using 17
// significant digits. Throws std::runtime_error on an unwritable path.
void ExportPrivate(const Dataset& ds, const std::string& path);

}  // namespace dbdp

#endif  // DBDP_DATASET_H_
