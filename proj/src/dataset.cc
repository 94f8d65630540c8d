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

#include "dbdp/dataset.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>
#include <system_error>

#include <boost/crc.hpp>
#include <boost/tokenizer.hpp>

namespace dbdp {
namespace {

std::string Trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> SplitCsvLine(const std::string& line) {
  using Tokenizer = boost::tokenizer<boost::escaped_list_separator<char>>;
  std::vector<std::string> fields;
  Tokenizer tok(line, boost::escaped_list_separator<char>('\\', ',', '"'));
  for (const auto& f : tok) fields.push_back(Trim(f));
  return fields;
}

std::optional<double> ParseDouble(const std::string& s) {
  double value = 0.0;
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  if (!s.empty() && s.front() == '+') ++begin;
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end || begin == end) return std::nullopt;
  return value;
}

[[noreturn]] void FailAt(const std::string& path, std::size_t line,
                         const std::string& what) {
  std::ostringstream os;
  os << path << ":" << line << ": " << what;
  throw std::runtime_error(os.str());
}

}  // namespace

Dataset::Dataset(std::string name, std::vector<DataInstance> instances)
    : name_(std::move(name)), instances_(std::move(instances)) {
  if (instances_.empty()) {
    throw std::invalid_argument("dataset '" + name_ + "' has no instances");
  }
  dim_ = static_cast<int>(instances_.front().x.size());
  for (std::size_t i = 0; i < instances_.size(); ++i) {
    const auto& z = instances_[i];
    if (z.x.size() != dim_) {
      throw std::invalid_argument("dataset '" + name_ + "': instance " +
                                  std::to_string(i) + " has dimension " +
                                  std::to_string(z.x.size()) + ", expected " +
                                  std::to_string(dim_));
    }
    if (z.y != 1 && z.y != -1) {
      throw std::invalid_argument("dataset '" + name_ + "': instance " +
                                  std::to_string(i) + " has label " +
                                  std::to_string(z.y));
    }
  }
}

double Dataset::MaxNorm() const {
  double max_norm = 0.0;
  for (const auto& z : instances_) max_norm = std::max(max_norm, z.x.norm());
  return max_norm;
}

double Dataset::PositiveFraction() const {
  const auto positives = std::count_if(
      instances_.begin(), instances_.end(),
      [](const DataInstance& z) { return z.y == 1; });
  return static_cast<double>(positives) / static_cast<double>(size());
}

std::uint32_t Dataset::Checksum() const {
  boost::crc_32_type crc;
  const std::int64_t header[2] = {static_cast<std::int64_t>(size()), dim_};
  crc.process_bytes(header, sizeof(header));
  for (const auto& z : instances_) {
    crc.process_bytes(z.x.data(), sizeof(double) * z.x.size());
    const std::int32_t y = z.y;
    crc.process_bytes(&y, sizeof(y));
  }
  return crc.checksum();
}

Dataset Dataset::WithName(std::string name) const {
  return Dataset(std::move(name), instances_);
}

EncodingSpec EncodingSpec::ForExported(const std::string& label_column) {
  EncodingSpec spec;
  spec.roles[label_column] = ColumnRole::kLabel;
  spec.label_map = {{"-1", -1}, {"1", 1}, {"+1", 1}};
  return spec;
}

EncodedDataset LoadCsv(const std::string& path, const EncodingSpec& spec) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");

  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (!Trim(line).empty()) {
      header = SplitCsvLine(line);
      break;
    }
  }
  if (header.empty()) FailAt(path, line_no, "missing header row");

  for (const auto& [column, role] : spec.roles) {
    if (std::find(header.begin(), header.end(), column) == header.end()) {
      throw std::runtime_error(path + ": column '" + column +
                               "' named in encoding is not in the header");
    }
  }
  std::vector<ColumnRole> roles(header.size(), ColumnRole::kNumeric);
  int label_col = -1;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (auto it = spec.roles.find(header[c]); it != spec.roles.end()) {
      roles[c] = it->second;
    }
    if (roles[c] == ColumnRole::kLabel) {
      if (label_col >= 0) {
        throw std::runtime_error(path + ": more than one label column");
      }
      label_col = static_cast<int>(c);
    }
  }
  if (label_col < 0) throw std::runtime_error(path + ": no label column");

  struct Row {
    std::size_t line;
    std::vector<std::string> fields;
  };
  std::vector<Row> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (Trim(line).empty()) continue;
    std::vector<std::string> fields;
    try {
      fields = SplitCsvLine(line);
    } catch (const boost::escaped_list_error& e) {
      FailAt(path, line_no, std::string("unparseable row: ") + e.what());
    }
    if (fields.size() != header.size()) {
      FailAt(path, line_no,
             "unparseable row: expected " + std::to_string(header.size()) +
                 " fields, found " + std::to_string(fields.size()));
    }
    rows.push_back({line_no, std::move(fields)});
  }

  // Categorical levels: configured, or learned in lexicographic order.
  std::map<std::string, std::vector<std::string>> levels;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (roles[c] != ColumnRole::kCategorical) continue;
    if (auto it = spec.levels.find(header[c]); it != spec.levels.end()) {
      levels[header[c]] = it->second;
      continue;
    }
    std::set<std::string> seen;
    for (const auto& row : rows) seen.insert(row.fields[c]);
    levels[header[c]] = {seen.begin(), seen.end()};
  }

  std::vector<std::string> feature_names;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (roles[c] == ColumnRole::kNumeric) {
      feature_names.push_back(header[c]);
    } else if (roles[c] == ColumnRole::kCategorical) {
      for (const auto& level : levels[header[c]]) {
        feature_names.push_back(header[c] + "=" + level);
      }
    }
  }
  const auto dim = static_cast<Eigen::Index>(feature_names.size());

  std::vector<DataInstance> instances;
  instances.reserve(rows.size());
  for (const auto& row : rows) {
    const std::string& raw_label = row.fields[label_col];
    int y = 0;
    if (auto it = spec.label_map.find(raw_label); it != spec.label_map.end()) {
      y = it->second;
    } else {
      switch (spec.unmapped) {
        case UnmappedLabel::kError:
          FailAt(path, row.line,
                 "label value '" + raw_label + "' is not in the label map");
        case UnmappedLabel::kSkip:
          continue;
        case UnmappedLabel::kNegative:
          y = -1;
          break;
        case UnmappedLabel::kPositive:
          y = 1;
          break;
      }
    }
    if (y != 1 && y != -1) {
      FailAt(path, row.line, "label map sends '" + raw_label + "' to " +
                                 std::to_string(y) + ", expected -1 or +1");
    }

    Vector x = Vector::Zero(dim);
    Eigen::Index k = 0;
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (roles[c] == ColumnRole::kNumeric) {
        auto value = ParseDouble(row.fields[c]);
        if (!value) {
          FailAt(path, row.line,
                 "non-numeric value '" + row.fields[c] + "' in column '" +
                     header[c] + "'");
        }
        x[k++] = *value;
      } else if (roles[c] == ColumnRole::kCategorical) {
        const auto& lv = levels[header[c]];
        auto it = std::find(lv.begin(), lv.end(), row.fields[c]);
        if (it != lv.end()) x[k + (it - lv.begin())] = 1.0;
        k += static_cast<Eigen::Index>(lv.size());
      }
    }
    instances.push_back({std::move(x), y});
  }
  if (instances.empty()) {
    throw std::runtime_error(path + ": no instances after label mapping");
  }

  std::string name = path;
  if (auto slash = name.find_last_of('/'); slash != std::string::npos) {
    name = name.substr(slash + 1);
  }
  if (auto dot = name.find_last_of('.'); dot != std::string::npos) {
    name = name.substr(0, dot);
  }
  return {Dataset(name, std::move(instances)), std::move(feature_names),
          std::move(levels)};
}

NormalizedDataset NormalizeUnitBall(const Dataset& ds) {
  const double s = ds.MaxNorm();
  if (s == 0.0) {
    std::clog << "warning: dataset '" << ds.name()
              << "' has only zero feature vectors; normalization skipped\n";
    return {ds, 1.0, true};
  }
  if (s <= 1.0) return {ds, 1.0, false};
  return {ApplyScale(ds, s), s, false};
}

Dataset ApplyScale(const Dataset& ds, double scale) {
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    throw std::invalid_argument("scale must be positive and finite");
  }
  std::vector<DataInstance> out;
  out.reserve(ds.size());
  for (const auto& z : ds) out.push_back({z.x / scale, z.y});
  return Dataset(ds.name(), std::move(out));
}

FeatureStandardizer FeatureStandardizer::Fit(const Dataset& ds) {
  const double n = static_cast<double>(ds.size());
  FeatureStandardizer out;
  out.mean_ = Vector::Zero(ds.dim());
  for (const auto& z : ds) out.mean_ += z.x;
  out.mean_ /= n;
  Vector var = Vector::Zero(ds.dim());
  for (const auto& z : ds) var += (z.x - out.mean_).array().square().matrix();
  out.stddev_ = (var / n).array().sqrt().matrix();
  return out;
}

Dataset FeatureStandardizer::Apply(const Dataset& ds) const {
  if (ds.dim() != mean_.size()) {
    throw std::invalid_argument("standardizer fitted on a different dimension");
  }
  const Vector inv = stddev_.unaryExpr(
      [](double s) { return s > 0.0 ? 1.0 / s : 1.0; });
  std::vector<DataInstance> out;
  out.reserve(ds.size());
  for (const auto& z : ds) {
    out.push_back({((z.x - mean_).array() * inv.array()).matrix(), z.y});
  }
  return Dataset(ds.name(), std::move(out));
}

Split SplitDataset(const Dataset& ds, double train_fraction,
                   std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw std::invalid_argument("train fraction must lie in (0, 1)");
  }
  const std::size_t n = ds.size();
  const auto n_train = static_cast<std::size_t>(
      std::ceil(train_fraction * static_cast<double>(n)));
  if (n_train == 0 || n_train >= n) {
    throw std::invalid_argument(
        "train fraction " + std::to_string(train_fraction) + " on " +
        std::to_string(n) + " instances leaves an empty partition");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng = MakeRng(seed, kStreamSplit);
  for (std::size_t i = n - 1; i > 0; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i);
    std::swap(order[i], order[pick(rng)]);
  }
  std::vector<DataInstance> train, test;
  for (std::size_t i = 0; i < n; ++i) {
    (i < n_train ? train : test).push_back(ds[order[i]]);
  }
  return {Dataset(ds.name(), std::move(train)),
          Dataset(ds.name(), std::move(test))};
}

Dataset Subsample(const Dataset& ds, std::size_t count, std::uint64_t seed) {
  if (count == 0) throw std::invalid_argument("subsample size must be >= 1");
  if (count >= ds.size()) return ds;
  std::vector<std::size_t> order(ds.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng = MakeRng(seed, kStreamSubsample);
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, order.size() - 1);
    std::swap(order[i], order[pick(rng)]);
  }
  order.resize(count);
  std::sort(order.begin(), order.end());
  std::vector<DataInstance> out;
  out.reserve(count);
  for (auto i : order) out.push_back(ds[i]);
  return Dataset(ds.name(), std::move(out));
}

Dataset Synthesize(std::size_t n, int d, double margin, std::uint64_t seed) {
  if (n < 2 || d < 1 || !(margin >= 0.0)) {
    throw std::invalid_argument("synthesize requires n >= 2, d >= 1, margin >= 0");
  }
  Rng rng = MakeRng(seed, kStreamSynth);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::bernoulli_distribution coin(0.5);

  Vector u(d);
  do {
    for (int j = 0; j < d; ++j) u[j] = normal(rng);
  } while (u.norm() == 0.0);
  u.normalize();

  std::vector<DataInstance> instances;
  instances.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int y = coin(rng) ? 1 : -1;
    Vector x = (margin * y) * u;
    for (int j = 0; j < d; ++j) x[j] += normal(rng);
    instances.push_back({std::move(x), y});
  }
  return NormalizeUnitBall(Dataset("synthetic", std::move(instances))).data;
}

void ExportPrivate(const Dataset& ds, const std::string& path) {
  if (path.empty()) throw std::runtime_error("export path is empty");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  for (int j = 0; j < ds.dim(); ++j) out << "f" << j << ",";
  out << "label\n";
  out << std::setprecision(17);
  for (const auto& z : ds) {
    for (int j = 0; j < ds.dim(); ++j) out << z.x[j] << ",";
    out << z.y << "\n";
  }
  out.flush();
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

}  // namespace dbdp
