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

#include "dbdp/privacy.h"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace dbdp {
namespace {

void CheckPositive(double value, const char* what) {
  if (!(value > 0.0) || !std::isfinite(value)) {
    std::ostringstream os;
    os << what << " must be positive and finite, got " << value;
    throw std::invalid_argument(os.str());
  }
}

void CheckIterations(long iterations) {
  if (iterations < 1) throw std::invalid_argument("iteration count must be >= 1");
}

void CheckSampling(double q) {
  if (!(q > 0.0 && q <= 1.0)) {
    throw std::invalid_argument("sampling probability must lie in (0, 1]");
  }
}

}  // namespace

PrivacyBudget::PrivacyBudget(double epsilon, double delta)
    : epsilon_(epsilon), delta_(delta) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    throw std::invalid_argument("epsilon must be positive and finite");
  }
  if (!(delta > 0.0 && delta < 1.0)) {
    throw std::invalid_argument("delta must lie in (0, 1)");
  }
}

void CalibrationConstants::Validate() const {
  CheckPositive(c, "c");
  CheckPositive(c1, "c1");
  CheckPositive(w_floor, "w_floor");
  CheckPositive(infimum, "infimum");
}

NoiseScale CalibrateDataPerturbation(const PrivacyBudget& budget,
                                     double sampling_probability,
                                     long iterations, double lipschitz,
                                     const CalibrationConstants& consts) {
  consts.Validate();
  const NoiseScale base = CalibrateGradientNoise(
      budget, sampling_probability, iterations, lipschitz, consts);
  return {base.sigma / std::sqrt(consts.infimum)};
}

NoiseScale CalibrateInstanceNoise(const PrivacyBudget& budget, long n,
                                  long iterations, double lipschitz,
                                  double mixed_norm,
                                  const CalibrationConstants& consts) {
  consts.Validate();
  if (n < 1) throw std::invalid_argument("dataset size must be >= 1");
  CheckIterations(iterations);
  CheckPositive(lipschitz, "Lipschitz bound");
  if (!(mixed_norm >= 0.0)) {
    throw std::invalid_argument("mixed norm must be >= 0");
  }
  const double w = std::max(mixed_norm, consts.w_floor);
  const double t_log = static_cast<double>(iterations) *
                       std::log(1.0 / budget.delta());
  return {consts.c * lipschitz * std::sqrt(t_log) /
          (std::sqrt(w) * static_cast<double>(n) * budget.epsilon())};
}

NoiseScale CalibrateGradientNoise(const PrivacyBudget& budget,
                                  double sampling_probability,
                                  long iterations, double lipschitz,
                                  const CalibrationConstants& consts) {
  consts.Validate();
  CheckSampling(sampling_probability);
  CheckIterations(iterations);
  CheckPositive(lipschitz, "Lipschitz bound");
  const double t_log = static_cast<double>(iterations) *
                       std::log(1.0 / budget.delta());
  return {consts.c * sampling_probability * lipschitz * std::sqrt(t_log) /
          budget.epsilon()};
}

NoiseScale CalibrateOutputNoise(const PrivacyBudget& budget, long n,
                                double lipschitz, double l2) {
  if (n < 1) throw std::invalid_argument("dataset size must be >= 1");
  CheckPositive(lipschitz, "Lipschitz bound");
  if (!(l2 > 0.0)) {
    throw std::invalid_argument(
        "output perturbation needs a strongly convex objective (l2 > 0)");
  }
  return {2.0 * lipschitz * std::sqrt(2.0 * std::log(1.25 / budget.delta())) /
          (static_cast<double>(n) * l2 * budget.epsilon())};
}

std::optional<std::string> ValidateBudget(const PrivacyBudget& budget,
                                          double sampling_probability,
                                          long iterations, long n,
                                          const CalibrationConstants& consts) {
  double q = sampling_probability;
  if (!(q > 0.0) && n > 0) q = 1.0 / static_cast<double>(n);
  const double limit = consts.c1 * q * q * static_cast<double>(iterations);
  if (iterations >= 1 && budget.epsilon() < limit) return std::nullopt;
  std::ostringstream os;
  os << "epsilon=" << budget.epsilon() << " outside proven range (0, "
     << limit << ") for c1=" << consts.c1 << " q=" << q
     << " T=" << iterations;
  return os.str();
}

Vector GaussianVector(int dim, NoiseScale scale, Rng& rng) {
  if (dim < 1) throw std::invalid_argument("noise dimension must be >= 1");
  if (!(scale.sigma >= 0.0) || !std::isfinite(scale.sigma)) {
    throw std::invalid_argument("noise scale must be finite and >= 0");
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector out(dim);
  for (int i = 0; i < dim; ++i) out[i] = normal(rng);
  if (scale.sigma == 0.0) return Vector::Zero(dim);
  return scale.sigma * out;
}

}  // namespace dbdp
