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

#ifndef DBDP_LINALG_H_
#define DBDP_LINALG_H_

#include <cstdint>
#include <random>

#include <Eigen/Dense>

namespace dbdp {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Model parameters theta. Kept as a plain vector; the owning LossModel
// defines the layout.
using ModelParams = Eigen::VectorXd;

using Rng = std::mt19937_64;

// Independent generator streams derived from one user seed. Distinct
// `stream` tags never share state, so e.g. batch selection stays identical
// whether or not noise is drawn.
inline Rng MakeRng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream),
                    static_cast<std::uint32_t>(stream >> 32)};
  return Rng(seq);
}

// Stream tags used throughout the library.
enum RngStream : std::uint64_t {
  kStreamSchedule = 1,
  kStreamNoise = 2,
  kStreamInit = 3,
  kStreamSplit = 4,
  kStreamSynth = 5,
  kStreamSubsample = 6,
};

}  // namespace dbdp

#endif  // DBDP_LINALG_H_
