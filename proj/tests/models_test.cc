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

#include "dbdp/models.h"

#include <cmath>
#include <filesystem>
#include <random>

#include "gtest/gtest.h"
#include "oracles.h"

namespace dbdp {
namespace {

using testing::FiniteDifferenceGradient;
using testing::FiniteDifferenceHessian;
using testing::FiniteDifferenceMixed;
using testing::RandomInstance;
using testing::RandomParams;
using testing::RelativeError;

ModelOptions WithL2(double l2) {
  ModelOptions o;
  o.l2 = l2;
  return o;
}

TEST(LogisticLossTest, KnownValues) {
  LogisticModel model(3, WithL2(0.0));
  const DataInstance z{Eigen::Vector3d(0.2, -0.5, 0.1), -1};
  EXPECT_DOUBLE_EQ(model.Loss(Vector::Zero(3), z), std::log(2.0));

  const DataInstance e1{Eigen::Vector3d(1, 0, 0), 1};
  EXPECT_NEAR(model.Loss(Eigen::Vector3d(10, 0, 0), e1), 4.5398899216870535e-5,
              1e-15);

  LogisticModel reg(2, WithL2(1.0));
  const DataInstance orth{Eigen::Vector2d(1, -1), 1};
  EXPECT_NEAR(reg.Loss(Eigen::Vector2d(1, 1), orth), std::log(2.0) + 1.0, 1e-15);
}

TEST(LogisticLossTest, DerivativesAtZero) {
  LogisticModel model(3, WithL2(0.0));
  const DataInstance z{Eigen::Vector3d(0.2, -0.5, 0.1), -1};
  const Vector theta = Vector::Zero(3);
  EXPECT_TRUE(model.Gradient(theta, z).isApprox(-z.y * z.x / 2.0));

  const DataInstance e1{Eigen::Vector3d(1, 0, 0), 1};
  Matrix expected = Matrix::Zero(3, 3);
  expected(0, 0) = 0.25;
  EXPECT_EQ(model.Hessian(theta, e1), expected);

  const DataInstance origin{Vector::Zero(3), -1};
  EXPECT_EQ(model.MixedPartial(theta, origin), 0.5 * Matrix::Identity(3, 3));
}

TEST(LogisticLossTest, DimensionMismatchThrows) {
  LogisticModel model(3);
  const DataInstance z{Eigen::Vector2d(0.1, 0.2), 1};
  EXPECT_THROW(model.Loss(Vector::Zero(3), z), std::invalid_argument);
  EXPECT_THROW(model.Gradient(Vector::Zero(3), z), std::invalid_argument);
  EXPECT_THROW(model.Hessian(Vector::Zero(2), z), std::invalid_argument);
  EXPECT_THROW(model.MixedPartial(Vector::Zero(4), z), std::invalid_argument);
}

class DerivativeTest : public ::testing::TestWithParam<Architecture> {};

TEST_P(DerivativeTest, MatchFiniteDifferences) {
  const int d = 4;
  const auto model = MakeModel(GetParam(), d, WithL2(1e-2));
  std::mt19937_64 rng(17);
  for (int draw = 0; draw < 100; ++draw) {
    const ModelParams theta = RandomParams(model->param_dim(), 1.0, rng);
    const DataInstance z = RandomInstance(d, rng);
    EXPECT_LE(RelativeError(model->Gradient(theta, z),
                            FiniteDifferenceGradient(*model, theta, z)),
              1e-5);
    EXPECT_LE(RelativeError(model->Hessian(theta, z),
                            FiniteDifferenceHessian(*model, theta, z)),
              1e-4);
    EXPECT_LE(RelativeError(model->MixedPartial(theta, z),
                            FiniteDifferenceMixed(*model, theta, z)),
              1e-4);
  }
}

TEST_P(DerivativeTest, HessianIsSymmetric) {
  const auto model = MakeModel(GetParam(), 3);
  std::mt19937_64 rng(5);
  for (int draw = 0; draw < 20; ++draw) {
    const Matrix h = model->Hessian(RandomParams(model->param_dim(), 1.0, rng),
                                    RandomInstance(3, rng));
    EXPECT_LE((h - h.transpose()).norm(), 1e-14 * h.norm());
  }
}

INSTANTIATE_TEST_SUITE_P(Models, DerivativeTest,
                         ::testing::Values(Architecture::kLogistic,
                                           Architecture::kMlp),
                         [](const auto& info) {
                           return ArchitectureName(info.param);
                         });

// Perturbing x by b moves the gradient by M b up to a term quadratic in |b|,
// so halving the perturbation should cut the residual about fourfold.
TEST_P(DerivativeTest, MixedPartialIsFirstOrderPropagation) {
  const int d = 4;
  const auto model = MakeModel(GetParam(), d, WithL2(1e-2));
  std::mt19937_64 rng(31);
  std::normal_distribution<double> normal;
  auto residual = [&](const ModelParams& theta, const DataInstance& z,
                      const Vector& b) {
    const DataInstance moved{z.x + b, z.y};
    return (model->Gradient(theta, moved) - model->Gradient(theta, z) -
            model->MixedPartial(theta, z) * b)
        .norm();
  };
  const double sigma = 1e-3;
  double ratio_sum = 0.0;
  for (int draw = 0; draw < 100; ++draw) {
    const ModelParams theta = RandomParams(model->param_dim(), 1.0, rng);
    const DataInstance z = RandomInstance(d, rng);
    Vector b(d);
    for (auto& v : b) v = sigma * normal(rng);
    ratio_sum += residual(theta, z, b) / residual(theta, z, b / 2);
  }
  const double mean_ratio = ratio_sum / 100;
  EXPECT_GE(mean_ratio, 3.5);
  EXPECT_LE(mean_ratio, 4.5);
}

TEST(MlpTest, ParameterLayout) {
  MlpModel model(3);
  EXPECT_EQ(model.param_dim(), 12);
  // W = I, v = (1, 2, 3): s = sum_k v_k tanh(x_k).
  ModelParams theta(12);
  theta << 1, 0, 0, 0, 1, 0, 0, 0, 1, 1, 2, 3;
  const Eigen::Vector3d x(0.1, -0.2, 0.3);
  const double expected =
      std::tanh(0.1) + 2 * std::tanh(-0.2) + 3 * std::tanh(0.3);
  EXPECT_NEAR(model.Score(theta, x), expected, 1e-15);
  EXPECT_EQ(model.InitialParams(4), model.InitialParams(4));
  EXPECT_NE(model.InitialParams(4), model.InitialParams(5));
}

TEST(LogisticLossTest, PerInstanceHessianIsPsd) {
  LogisticModel model(4, WithL2(0.0));
  std::mt19937_64 rng(3);
  for (int draw = 0; draw < 50; ++draw) {
    const Matrix h = model.Hessian(RandomParams(4, 2.0, rng),
                                   RandomInstance(4, rng));
    Eigen::SelfAdjointEigenSolver<Matrix> eig(h);
    EXPECT_GE(eig.eigenvalues().minCoeff(), -1e-14);
  }
}

TEST(LogisticLossTest, UnregularizedGradientIsOneLipschitz) {
  LogisticModel model(5, WithL2(0.0));
  EXPECT_EQ(model.LipschitzBound(), 1.0);
  std::mt19937_64 rng(8);
  for (int draw = 0; draw < 200; ++draw) {
    const DataInstance z = RandomInstance(5, rng);
    EXPECT_LE(model.Gradient(RandomParams(5, 10.0, rng), z).norm(), 1.0);
  }
}

TEST(LipschitzTest, ClipBoundOtherwise) {
  ModelOptions opts;
  opts.clip_bound = 2.5;
  EXPECT_EQ(LogisticModel(3, opts).LipschitzBound(), 2.5);
  EXPECT_EQ(MlpModel(3).LipschitzBound(), 1.0);
  EXPECT_EQ(MlpModel(3, opts).LipschitzBound(), 2.5);
  EXPECT_DOUBLE_EQ(LogisticModel(3).SmoothnessBound(), 0.25 + 1e-3);
}

TEST(SpectralNormTest, RankOneAndZero) {
  const Eigen::Vector4d u(1, -2, 0.5, 3);
  const Eigen::Vector3d v(0.3, 0.1, -1);
  EXPECT_NEAR(SpectralNorm(u * v.transpose()), u.norm() * v.norm(), 1e-12);
  EXPECT_EQ(SpectralNorm(Matrix::Zero(5, 3)), 0.0);
  EXPECT_EQ(SpectralNormPowerIteration(Matrix::Zero(5, 3)), 0.0);
}

TEST(SpectralNormTest, MatchesSvd) {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> normal;
  for (int draw = 0; draw < 50; ++draw) {
    Matrix m(5, 3);
    for (auto& v : m.reshaped()) v = normal(rng);
    const double svd = Eigen::JacobiSVD<Matrix>(m).singularValues()(0);
    EXPECT_NEAR(SpectralNorm(m), svd, 1e-6 * svd);
    EXPECT_NEAR(SpectralNormPowerIteration(m), svd, 1e-6 * svd);
    EXPECT_NEAR(SpectralNorm(m.transpose()), SpectralNorm(m), 1e-12 * svd);
  }
  Matrix big(120, 90);
  for (auto& v : big.reshaped()) v = normal(rng);
  const double svd = Eigen::JacobiSVD<Matrix>(big).singularValues()(0);
  EXPECT_NEAR(SpectralNorm(big), svd, 1e-6 * svd);
}

TEST(SpectralNormTest, PowerIterationReportsNonConvergence) {
  // One step at a tight tolerance cannot settle from the fixed start vector.
  Matrix m = Matrix::Identity(6, 6);
  m(0, 1) = 0.9;
  EXPECT_THROW(SpectralNormPowerIteration(m, 1e-15, 1), std::runtime_error);
}

TEST(MixedNormTest, FrobeniusSwitch) {
  ModelOptions opts;
  opts.mixed_norm = MixedNormKind::kFrobenius;
  LogisticModel fro(3, opts);
  LogisticModel spec(3);
  std::mt19937_64 rng(2);
  const ModelParams theta = RandomParams(3, 1.0, rng);
  const DataInstance z = RandomInstance(3, rng);
  const Matrix m = spec.MixedPartial(theta, z);
  EXPECT_NEAR(fro.MixedNorm(theta, z), m.norm(), 1e-14);
  EXPECT_NEAR(spec.MixedNorm(theta, z),
              Eigen::JacobiSVD<Matrix>(m).singularValues()(0), 1e-12);
}

TEST(PredictTest, TiesGoPositive) {
  LogisticModel model(2);
  const Dataset ds("d", {{Eigen::Vector2d(1, 0), 1},
                         {Eigen::Vector2d(0, 1), -1},
                         {Eigen::Vector2d(1, 1), -1},
                         {Eigen::Vector2d(-1, 0), 1}});
  EXPECT_EQ(model.Predict(Vector::Zero(2), ds[1].x), 1);
  EXPECT_DOUBLE_EQ(model.Accuracy(Vector::Zero(2), ds), ds.PositiveFraction());
  EXPECT_EQ(model.Accuracy(Eigen::Vector2d(1, 0), Dataset("one", {ds[0]})), 1.0);
}

TEST(PredictTest, TrueSeparatorIsPerfect) {
  std::mt19937_64 rng(1);
  const Eigen::Vector3d w(0.6, -0.8, 0.0);
  std::vector<DataInstance> rows;
  for (int i = 0; i < 200; ++i) {
    DataInstance z = RandomInstance(3, rng);
    if (std::abs(w.dot(z.x)) < 1e-3) continue;
    z.y = w.dot(z.x) > 0 ? 1 : -1;
    rows.push_back(z);
  }
  LogisticModel model(3);
  EXPECT_EQ(model.Accuracy(w, Dataset("sep", rows)), 1.0);
}

TEST(ClipTest, ProjectsOntoBall) {
  const Eigen::Vector2d g(3, 4);
  EXPECT_TRUE(ClipToNorm(g, 1.0).isApprox(Eigen::Vector2d(0.6, 0.8)));
  EXPECT_EQ(ClipToNorm(g, 10.0), Vector(g));
  EXPECT_EQ(ClipToNorm(g, std::numeric_limits<double>::infinity()), Vector(g));
}

TEST(ModelIoTest, SaveLoadRoundTrip) {
  const auto path =
      (std::filesystem::temp_directory_path() / "dbdp_models_test.model").string();
  MlpModel model(3, WithL2(0.05));
  std::mt19937_64 rng(9);
  const ModelParams theta = RandomParams(model.param_dim(), 1.0, rng);
  SaveModel(model, theta, path);
  const auto loaded = LoadModel(path);
  EXPECT_EQ(loaded.model->architecture(), Architecture::kMlp);
  EXPECT_EQ(loaded.model->feature_dim(), 3);
  EXPECT_EQ(loaded.model->l2(), 0.05);
  EXPECT_EQ(loaded.theta, theta);
  EXPECT_THROW(LoadModel(path + ".missing"), std::runtime_error);
}

}  // namespace
}  // namespace dbdp
