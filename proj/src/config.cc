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

#include "dbdp/config.h"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace dbdp {
namespace {

std::string Trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> SplitList(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = Trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double ToDouble(const std::string& s) {
  double value = 0.0;
  const std::string t = Trim(s);
  const char* begin = t.data();
  if (!t.empty() && t.front() == '+') ++begin;
  auto [ptr, ec] = std::from_chars(begin, t.data() + t.size(), value);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) {
    throw std::invalid_argument("not a number: '" + s + "'");
  }
  return value;
}

long ToLong(const std::string& s) {
  long value = 0;
  const std::string t = Trim(s);
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) {
    throw std::invalid_argument("not an integer: '" + s + "'");
  }
  return value;
}

bool ToBool(const std::string& s) {
  const std::string t = Trim(s);
  if (t == "true" || t == "1" || t == "yes") return true;
  if (t == "false" || t == "0" || t == "no") return false;
  throw std::invalid_argument("not a boolean: '" + s + "'");
}

// One [section]: keys are consumed as they are read so leftovers can be
// reported as unknown.
class Section {
 public:
  Section(std::string name, const boost::property_tree::ptree& tree)
      : name_(std::move(name)) {
    for (const auto& [key, child] : tree) {
      values_.emplace_back(key, child.data());
    }
  }

  const std::string& name() const { return name_; }

  std::optional<std::string> Take(const std::string& key) {
    for (auto it = values_.begin(); it != values_.end(); ++it) {
      if (it->first == key) {
        std::string value = Trim(it->second);
        values_.erase(it);
        return value;
      }
    }
    return std::nullopt;
  }

  // Applies `parse` to the value of `key` when present, rewrapping any
  // failure with the section and key.
  template <typename Fn>
  void With(const std::string& key, Fn&& parse) {
    auto value = Take(key);
    if (!value) return;
    try {
      parse(*value);
    } catch (const std::exception& e) {
      throw std::runtime_error("config [" + name_ + "] key '" + key +
                               "': " + e.what());
    }
  }

  void RejectLeftovers() const {
    if (!values_.empty()) {
      throw std::runtime_error("config [" + name_ + "]: unknown key '" +
                               values_.front().first + "'");
    }
  }

 private:
  std::string name_;
  std::vector<std::pair<std::string, std::string>> values_;
};

UnmappedLabel ParseUnmapped(const std::string& s) {
  if (s == "error") return UnmappedLabel::kError;
  if (s == "skip") return UnmappedLabel::kSkip;
  if (s == "negative" || s == "rest") return UnmappedLabel::kNegative;
  if (s == "positive") return UnmappedLabel::kPositive;
  throw std::invalid_argument("expected error | skip | negative | positive");
}

DatasetSource ParseDataset(Section& sec, const std::string& name,
                           const std::string& base_dir) {
  DatasetSource ds;
  ds.name = name;
  sec.With("source", [&](const std::string& v) {
    if (v == "synthetic") {
      ds.kind = DatasetSource::Kind::kSynthetic;
    } else if (v == "csv") {
      ds.kind = DatasetSource::Kind::kCsv;
    } else {
      throw std::invalid_argument("expected synthetic | csv");
    }
  });
  sec.With("n", [&](const std::string& v) { ds.n = ToLong(v); });
  sec.With("d", [&](const std::string& v) { ds.d = static_cast<int>(ToLong(v)); });
  sec.With("margin", [&](const std::string& v) { ds.margin = ToDouble(v); });
  sec.With("seed", [&](const std::string& v) { ds.seed = ToLong(v); });
  sec.With("path", [&](const std::string& v) {
    std::filesystem::path p(v);
    ds.path = p.is_absolute() ? v : (std::filesystem::path(base_dir) / p).string();
  });
  sec.With("label", [&](const std::string& v) {
    ds.encoding.roles[v] = ColumnRole::kLabel;
  });
  sec.With("positive", [&](const std::string& v) {
    for (const auto& level : SplitList(v)) ds.encoding.label_map[level] = 1;
  });
  sec.With("negative", [&](const std::string& v) {
    for (const auto& level : SplitList(v)) ds.encoding.label_map[level] = -1;
  });
  sec.With("unmapped", [&](const std::string& v) {
    ds.encoding.unmapped = ParseUnmapped(v);
  });
  sec.With("categorical", [&](const std::string& v) {
    for (const auto& c : SplitList(v)) ds.encoding.roles[c] = ColumnRole::kCategorical;
  });
  sec.With("ignore", [&](const std::string& v) {
    for (const auto& c : SplitList(v)) ds.encoding.roles[c] = ColumnRole::kIgnore;
  });
  sec.With("subsample", [&](const std::string& v) { ds.subsample = ToLong(v); });
  sec.With("subsample_seed",
           [&](const std::string& v) { ds.subsample_seed = ToLong(v); });
  sec.With("standardize", [&](const std::string& v) { ds.standardize = ToBool(v); });
  sec.With("train_fraction",
           [&](const std::string& v) { ds.train_fraction = ToDouble(v); });
  sec.With("split_seed", [&](const std::string& v) { ds.split_seed = ToLong(v); });
  sec.With("iterations", [&](const std::string& v) { ds.iterations = ToLong(v); });
  sec.With("learning_rate",
           [&](const std::string& v) { ds.learning_rate = ToDouble(v); });
  sec.With("delta", [&](const std::string& v) { ds.delta = ToDouble(v); });
  sec.RejectLeftovers();

  if (ds.kind == DatasetSource::Kind::kCsv) {
    if (ds.path.empty()) {
      throw std::runtime_error("config [" + sec.name() + "]: csv source needs 'path'");
    }
    const bool has_label = std::any_of(
        ds.encoding.roles.begin(), ds.encoding.roles.end(),
        [](const auto& kv) { return kv.second == ColumnRole::kLabel; });
    if (!has_label) {
      throw std::runtime_error("config [" + sec.name() + "]: csv source needs 'label'");
    }
  }
  return ds;
}

}  // namespace

std::string MethodName(Method method) {
  switch (method) {
    case Method::kSgd: return "sgd";
    case Method::kDbdp: return "dbdp";
    case Method::kDbdpFresh: return "dbdp_fresh";
    case Method::kDbdpImproved: return "dbdp_improved";
    case Method::kGradient: return "dpsgd";
    case Method::kOutput: return "output";
  }
  return "unknown";
}

Method ParseMethod(const std::string& name) {
  for (Method m : {Method::kSgd, Method::kDbdp, Method::kDbdpFresh,
                   Method::kDbdpImproved, Method::kGradient, Method::kOutput}) {
    if (MethodName(m) == name) return m;
  }
  throw std::invalid_argument(
      "unknown method '" + name +
      "' (expected sgd, dbdp, dbdp_fresh, dbdp_improved, dpsgd, output)");
}

std::vector<double> ParseDoubleList(const std::string& text) {
  std::vector<double> out;
  for (const auto& item : SplitList(text)) out.push_back(ToDouble(item));
  return out;
}

std::vector<std::uint64_t> ParseSeedList(const std::string& text) {
  std::vector<std::uint64_t> out;
  for (const auto& item : SplitList(text)) {
    const auto dash = item.find('-', 1);
    if (dash == std::string::npos) {
      const long v = ToLong(item);
      if (v < 0) throw std::invalid_argument("seeds must be >= 0");
      out.push_back(static_cast<std::uint64_t>(v));
      continue;
    }
    const long lo = ToLong(item.substr(0, dash));
    const long hi = ToLong(item.substr(dash + 1));
    if (lo < 0 || hi < lo) {
      throw std::invalid_argument("bad seed range '" + item + "'");
    }
    for (long s = lo; s <= hi; ++s) out.push_back(static_cast<std::uint64_t>(s));
  }
  return out;
}

void ExperimentConfig::Validate() const {
  if (datasets.empty()) throw std::invalid_argument("no datasets configured");
  if (methods.empty()) throw std::invalid_argument("no methods configured");
  if (epsilons.empty()) throw std::invalid_argument("epsilon grid is empty");
  for (std::size_t i = 0; i < epsilons.size(); ++i) {
    if (!(epsilons[i] > 0.0)) {
      throw std::invalid_argument("epsilon grid must be strictly positive");
    }
    if (i > 0 && !(epsilons[i] > epsilons[i - 1])) {
      throw std::invalid_argument("epsilon grid must be sorted ascending");
    }
  }
  if (seeds.empty()) throw std::invalid_argument("at least one seed is required");
  if (delta && !(*delta > 0.0 && *delta < 1.0)) {
    throw std::invalid_argument("delta must lie in (0, 1)");
  }
  if (jobs < 1) throw std::invalid_argument("jobs must be >= 1");
  std::set<std::string> names;
  for (const auto& ds : datasets) {
    if (!names.insert(ds.name).second) {
      throw std::invalid_argument("duplicate dataset '" + ds.name + "'");
    }
  }
  consts.Validate();
}

ExperimentConfig ParseExperimentConfig(const std::string& text,
                                       const std::string& base_dir) {
  boost::property_tree::ptree tree;
  std::istringstream in(text);
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw std::runtime_error("config line " + std::to_string(e.line()) + ": " +
                             e.message());
  }

  ExperimentConfig cfg;
  cfg.base_dir = base_dir;
  for (const auto& [key, child] : tree) {
    if (child.empty() && !child.data().empty()) {
      throw std::runtime_error("config key '" + key + "' is outside any section");
    }
    Section sec(key, child);
    if (key == "experiment") {
      sec.With("name", [&](const std::string& v) { cfg.name = v; });
      sec.With("output", [&](const std::string& v) {
        std::filesystem::path p(v);
        cfg.output_dir =
            p.is_absolute() ? v : (std::filesystem::path(base_dir) / p).string();
      });
      sec.With("methods", [&](const std::string& v) {
        cfg.methods.clear();
        for (const auto& m : SplitList(v)) cfg.methods.push_back(ParseMethod(m));
      });
      sec.With("epsilons", [&](const std::string& v) { cfg.epsilons = ParseDoubleList(v); });
      sec.With("seeds", [&](const std::string& v) { cfg.seeds = ParseSeedList(v); });
      sec.With("delta", [&](const std::string& v) {
        if (v == "auto") {
          cfg.delta.reset();
        } else {
          cfg.delta = ToDouble(v);
        }
      });
      sec.With("jobs", [&](const std::string& v) { cfg.jobs = static_cast<int>(ToLong(v)); });
    } else if (key == "model") {
      sec.With("architecture",
               [&](const std::string& v) { cfg.architecture = ParseArchitecture(v); });
      sec.With("l2", [&](const std::string& v) { cfg.model_options.l2 = ToDouble(v); });
      sec.With("clip", [&](const std::string& v) { cfg.model_options.clip_bound = ToDouble(v); });
      sec.With("mixed_norm", [&](const std::string& v) {
        if (v == "spectral") {
          cfg.model_options.mixed_norm = MixedNormKind::kSpectral;
        } else if (v == "frobenius") {
          cfg.model_options.mixed_norm = MixedNormKind::kFrobenius;
        } else {
          throw std::invalid_argument("expected spectral | frobenius");
        }
      });
    } else if (key == "training") {
      sec.With("iterations", [&](const std::string& v) {
        if (v == "cv") {
          cfg.cross_validate = true;
        } else {
          cfg.train.iterations = ToLong(v);
        }
      });
      sec.With("learning_rate", [&](const std::string& v) {
        cfg.train.learning_rate = v == "auto" ? 0.0 : ToDouble(v);
      });
      sec.With("sampling_probability",
               [&](const std::string& v) { cfg.train.sampling_probability = ToDouble(v); });
      sec.With("batch_size", [&](const std::string& v) { cfg.batch_size = ToLong(v); });
      sec.With("local_iterations",
               [&](const std::string& v) { cfg.train.local_iterations = ToLong(v); });
      sec.With("noise_mode", [&](const std::string& v) {
        if (v == "fixed") {
          cfg.train.noise_mode = NoiseMode::kFixedPerInstance;
        } else if (v == "fresh") {
          cfg.train.noise_mode = NoiseMode::kFreshPerIteration;
        } else {
          throw std::invalid_argument("expected fixed | fresh");
        }
      });
      sec.With("gate_mode", [&](const std::string& v) {
        if (v == "literal") {
          cfg.train.gate_mode = GateMode::kLiteral;
        } else if (v == "normalized") {
          cfg.train.gate_mode = GateMode::kNormalized;
        } else {
          throw std::invalid_argument("expected literal | normalized");
        }
      });
      sec.With("theta_floor", [&](const std::string& v) { cfg.train.theta_floor = ToDouble(v); });
      sec.With("damping", [&](const std::string& v) { cfg.damping = ToDouble(v); });
      sec.With("record_loss", [&](const std::string& v) { cfg.train.record_loss = ToBool(v); });
      sec.With("iterations_grid", [&](const std::string& v) {
        cfg.iterations_grid.clear();
        for (const auto& item : SplitList(v)) cfg.iterations_grid.push_back(ToLong(item));
      });
      sec.With("learning_rate_grid",
               [&](const std::string& v) { cfg.learning_rate_grid = ParseDoubleList(v); });
      sec.With("cv_epsilon", [&](const std::string& v) { cfg.cv_epsilon = ToDouble(v); });
      sec.With("cv_seeds", [&](const std::string& v) { cfg.cv_seeds = static_cast<int>(ToLong(v)); });
      sec.With("cv_fraction", [&](const std::string& v) { cfg.cv_fraction = ToDouble(v); });
    } else if (key == "calibration") {
      sec.With("c", [&](const std::string& v) { cfg.consts.c = ToDouble(v); });
      sec.With("c1", [&](const std::string& v) { cfg.consts.c1 = ToDouble(v); });
      sec.With("w_floor", [&](const std::string& v) { cfg.consts.w_floor = ToDouble(v); });
      sec.With("infimum", [&](const std::string& v) { cfg.consts.infimum = ToDouble(v); });
    } else if (key.rfind("dataset:", 0) == 0 && key.size() > 8) {
      cfg.datasets.push_back(ParseDataset(sec, key.substr(8), base_dir));
    } else {
      throw std::runtime_error("config: unknown section [" + key + "]");
    }
    sec.RejectLeftovers();
  }
  try {
    cfg.Validate();
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(std::string("config: ") + e.what());
  }
  return cfg;
}

ExperimentConfig LoadExperimentConfig(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  const auto parent = std::filesystem::path(path).parent_path();
  try {
    return ParseExperimentConfig(buffer.str(),
                                 parent.empty() ? "." : parent.string());
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

}  // namespace dbdp
