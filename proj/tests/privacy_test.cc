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
#include <random>

#include "gtest/gtest.h"

namespace dbdp {
namespace {

TEST(PrivacyBudgetTest, RejectsOutOfRange) {
  EXPECT_NO_THROW(PrivacyBudget(0.5, 1e-5));
  EXPECT_THROW(PrivacyBudget(0.0, 1e-5), std::invalid_argument);
  EXPECT_THROW(PrivacyBudget(-1.0, 1e-5), std::invalid_argument);
  EXPECT_THROW(PrivacyBudget(1.0, 0.0), std::invalid_argument);
  EXPECT_THROW(PrivacyBudget(1.0, 1.0), std::invalid_argument);
  EXPECT_THROW(PrivacyBudget(std::nan(""), 0.1), std::invalid_argument);
}

TEST(CalibrationTest, DataPerturbationKnownValue) {
  // 2 * 0.01 * sqrt(100 * ln 1e5).
  const auto s = CalibrateDataPerturbation(PrivacyBudget(1.0, 1e-5), 0.01, 100,
                                           1.0, {});
  EXPECT_NEAR(s.sigma, 0.6787, 1e-3);
}

TEST(CalibrationTest, InstanceNoiseKnownValue) {
  // 2 * sqrt(100 * ln 1e5) / (sqrt(0.25) * 1000).
  const PrivacyBudget budget(1.0, 1e-5);
  const auto s = CalibrateInstanceNoise(budget, 1000, 100, 1.0, 0.25, {});
  EXPECT_NEAR(s.sigma, 0.1357, 1e-3);
  const auto quadrupled = CalibrateInstanceNoise(budget, 1000, 100, 1.0, 1.0, {});
  EXPECT_DOUBLE_EQ(quadrupled.sigma, s.sigma / 2);
}

TEST(CalibrationTest, InstanceNoiseFloorsMixedNorm) {
  const PrivacyBudget budget(1.0, 1e-5);
  CalibrationConstants consts;
  const double at_zero = CalibrateInstanceNoise(budget, 100, 10, 1.0, 0.0, consts).sigma;
  EXPECT_TRUE(std::isfinite(at_zero));
  EXPECT_EQ(at_zero,
            CalibrateInstanceNoise(budget, 100, 10, 1.0, consts.w_floor, consts).sigma);
}

TEST(CalibrationTest, InstanceNoiseWithUnitNormMatchesDataNoise) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.05, 5.0);
  for (int i = 0; i < 50; ++i) {
    const long n = 50 + i * 37;
    const PrivacyBudget budget(u(rng), 1e-6);
    const long T = 10 + 3 * i;
    const double a = CalibrateInstanceNoise(budget, n, T, 1.0, 1.0, {}).sigma;
    const double b =
        CalibrateDataPerturbation(budget, 1.0 / n, T, 1.0, {}).sigma;
    EXPECT_NEAR(a, b, 1e-14 * b);
  }
}

TEST(CalibrationTest, InducedGradientNoiseMeetsBound) {
  const PrivacyBudget budget(0.7, 1e-5);
  const CalibrationConstants consts;
  const long n = 300, T = 200;
  const double G = 1.0;
  const double bound = consts.c * consts.c * G * G * T * std::log(1e5) /
                       (double(n) * n * 0.7 * 0.7);
  for (double w : {1e-3, 0.1, 0.5, 1.0, 4.0}) {
    const double s = CalibrateInstanceNoise(budget, n, T, G, w, consts).sigma;
    EXPECT_NEAR(w * s * s, bound, 1e-12 * bound);
  }
}

TEST(CalibrationTest, InfimumCorrection) {
  CalibrationConstants consts;
  const PrivacyBudget budget(1.0, 1e-5);
  const double plain = CalibrateDataPerturbation(budget, 0.05, 50, 1.0, consts).sigma;
  consts.infimum = 4.0;
  EXPECT_DOUBLE_EQ(CalibrateDataPerturbation(budget, 0.05, 50, 1.0, consts).sigma,
                   plain / 2);
  // The gradient baseline has no infimum term.
  EXPECT_DOUBLE_EQ(CalibrateGradientNoise(budget, 0.05, 50, 1.0, consts).sigma,
                   plain);
}

TEST(CalibrationTest, DataPerturbationMonotonicity) {
  const CalibrationConstants consts;
  auto sigma = [&](double eps, double delta, double q, long T, double G) {
    return CalibrateDataPerturbation(PrivacyBudget(eps, delta), q, T, G, consts)
        .sigma;
  };
  const double base = sigma(1.0, 1e-5, 0.01, 100, 1.0);
  EXPECT_LT(sigma(2.0, 1e-5, 0.01, 100, 1.0), base);
  EXPECT_LT(sigma(1.0, 1e-3, 0.01, 100, 1.0), base);
  EXPECT_GT(sigma(1.0, 1e-5, 0.02, 100, 1.0), base);
  EXPECT_GT(sigma(1.0, 1e-5, 0.01, 200, 1.0), base);
  EXPECT_GT(sigma(1.0, 1e-5, 0.01, 100, 2.0), base);
  EXPECT_EQ(base, sigma(1.0, 1e-5, 0.01, 100, 1.0));
}

TEST(CalibrationTest, OutputNoiseKnownValue) {
  // 2 * sqrt(2 ln 1.25e5) / (1000 * 1e-3).
  const auto s = CalibrateOutputNoise(PrivacyBudget(1.0, 1e-5), 1000, 1.0, 1e-3);
  EXPECT_NEAR(s.sigma, 9.70, 0.02);
  EXPECT_THROW(CalibrateOutputNoise(PrivacyBudget(1.0, 1e-5), 1000, 1.0, 0.0),
               std::invalid_argument);
}

TEST(CalibrationTest, RejectsBadInputs) {
  const PrivacyBudget budget(1.0, 1e-5);
  EXPECT_THROW(CalibrateDataPerturbation(budget, 0.0, 10, 1.0, {}),
               std::invalid_argument);
  EXPECT_THROW(CalibrateDataPerturbation(budget, 0.1, 0, 1.0, {}),
               std::invalid_argument);
  EXPECT_THROW(CalibrateInstanceNoise(budget, 0, 10, 1.0, 1.0, {}),
               std::invalid_argument);
  CalibrationConstants bad;
  bad.c = 0.0;
  EXPECT_THROW(bad.Validate(), std::invalid_argument);
  EXPECT_THROW(CalibrateDataPerturbation(budget, 0.1, 10, 1.0, bad),
               std::invalid_argument);
}

TEST(ValidateBudgetTest, ProvenRange) {
  const CalibrationConstants consts;
  // c1 q^2 T = 0.1.
  EXPECT_FALSE(ValidateBudget(PrivacyBudget(0.01, 1e-5), 0.01, 1000, 100, consts));
  const auto violation =
      ValidateBudget(PrivacyBudget(7.0, 1e-5), 0.01, 1000, 100, consts);
  ASSERT_TRUE(violation);
  EXPECT_FALSE(violation->empty());
  EXPECT_TRUE(ValidateBudget(PrivacyBudget(1e-6, 1e-5), 0.01, 0, 100, consts));
}

TEST(GaussianVectorTest, ZeroScaleIsZero) {
  Rng rng = MakeRng(1, kStreamNoise);
  EXPECT_EQ(GaussianVector(7, {0.0}, rng), Vector::Zero(7));
}

TEST(GaussianVectorTest, StandardNormalMoments) {
  Rng rng = MakeRng(2024, kStreamNoise);
  const Vector v = GaussianVector(100000, {1.0}, rng);
  const double mean = v.mean();
  const double var = (v.array() - mean).square().sum() / (v.size() - 1);
  EXPECT_NEAR(mean, 0.0, 0.02);
  EXPECT_GE(var, 0.97);
  EXPECT_LE(var, 1.03);
}

TEST(GaussianVectorTest, SeededAndScaled) {
  Rng a = MakeRng(9, kStreamNoise), b = MakeRng(9, kStreamNoise);
  Rng c = MakeRng(9, kStreamNoise);
  const Vector va = GaussianVector(50, {1.0}, a);
  EXPECT_EQ(va, GaussianVector(50, {1.0}, b));
  EXPECT_EQ(3.0 * va, GaussianVector(50, {3.0}, c));
  Rng other = MakeRng(9, kStreamSchedule);
  EXPECT_NE(va, GaussianVector(50, {1.0}, other));
}

}  // namespace
}  // namespace dbdp
