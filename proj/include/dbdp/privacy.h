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

#ifndef DBDP_PRIVACY_H_
#define DBDP_PRIVACY_H_

#include <optional>
#include <string>

#include "dbdp/linalg.h"

namespace dbdp {

// (epsilon, delta) with epsilon > 0 and 0 < delta < 1.
class PrivacyBudget {
 public:
  // Throws std::invalid_argument outside the valid range.
  PrivacyBudget(double epsilon, double delta);

  double epsilon() const { return epsilon_; }
  double delta() const { return delta_; }

 private:
  double epsilon_;
  double delta_;
};

// Constants left open by the privacy analysis. `infimum` is the lower bound
// I on the mixed-partial norm; the data-noise scale is divided by sqrt(I).
struct CalibrationConstants {
  double c = 2.0;
  double c1 = 1.0;
  double w_floor = 1e-6;
  double infimum = 1.0;

  // Throws std::invalid_argument unless every field is > 0.
  void Validate() const;
};

// Standard deviation of per-coordinate Gaussian noise.
struct NoiseScale {
  double sigma = 0.0;
};

// Noise on features for mini-batch data-perturbation SGD:
//   sigma = c * q * G * sqrt(T * ln(1 / delta)) / (epsilon * sqrt(I)).
NoiseScale CalibrateDataPerturbation(const PrivacyBudget& budget,
                                     double sampling_probability,
                                     long iterations, double lipschitz,
                                     const CalibrationConstants& consts);

// Per-instance noise on features for the influence-gated trainer:
//   sigma_t = c * G * sqrt(T * ln(1 / delta)) / (sqrt(max(w_t, w_floor)) * n * epsilon).
NoiseScale CalibrateInstanceNoise(const PrivacyBudget& budget, long n,
                                  long iterations, double lipschitz,
                                  double mixed_norm,
                                  const CalibrationConstants& consts);

// Noise added to the averaged gradient by the gradient-perturbation
// baseline. Same closed form as CalibrateDataPerturbation without the
// infimum correction.
NoiseScale CalibrateGradientNoise(const PrivacyBudget& budget,
                                  double sampling_probability,
                                  long iterations, double lipschitz,
                                  const CalibrationConstants& consts);

// Per-coordinate noise for output perturbation of a lambda-strongly convex
// minimizer: 2 G sqrt(2 ln(1.25 / delta)) / (n * lambda * epsilon).
NoiseScale CalibrateOutputNoise(const PrivacyBudget& budget, long n,
                                double lipschitz, double l2);

// Checks epsilon < c1 * q^2 * T, the range in which the per-instance
// calibration is proven. Returns a description of the violation, or nullopt.
std::optional<std::string> ValidateBudget(const PrivacyBudget& budget,
                                          double sampling_probability,
                                          long iterations, long n,
                                          const CalibrationConstants& consts);

// `dim` independent N(0, sigma^2) draws. Draws are sigma times a standard
// normal sample, so runs that differ only in sigma share their randomness.
Vector GaussianVector(int dim, NoiseScale scale, Rng& rng);

}  // namespace dbdp

#endif  // DBDP_PRIVACY_H_
