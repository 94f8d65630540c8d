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

#include "dbdp/trainers.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>

#include <boost/math/distributions/students_t.hpp>

#include "gtest/gtest.h"
#include "oracles.h"

namespace dbdp {
namespace {

ModelOptions WithL2(double l2) {
  ModelOptions o;
  o.l2 = l2;
  return o;
}

TrainConfig SmallConfig(long iterations, double q, std::uint64_t seed = 0) {
  TrainConfig cfg;
  cfg.iterations = iterations;
  cfg.sampling_probability = q;
  cfg.seed = seed;
  return cfg;
}

// Objective after each step of plain SGD over `schedule`.
std::vector<double> ReferenceLossTrace(const LossModel& model,
                                       const Dataset& ds, ModelParams theta,
                                       double alpha,
                                       const std::vector<std::vector<long>>& schedule,
                                       double clip) {
  std::vector<double> trace;
  for (const auto& batch : schedule) {
    theta = RunSgdSteps(model, ds, theta, alpha, {batch}, clip);
    trace.push_back(model.Objective(theta, ds));
  }
  return trace;
}

TEST(ScheduleTest, MinibatchesAreDistinctWithinBatch) {
  const auto schedule = MinibatchSchedule(30, 7, 50, 3);
  ASSERT_EQ(schedule.size(), 50u);
  for (const auto& batch : schedule) {
    ASSERT_EQ(batch.size(), 7u);
    std::set<long> unique(batch.begin(), batch.end());
    EXPECT_EQ(unique.size(), 7u);
    for (long i : batch) EXPECT_TRUE(i >= 0 && i < 30);
  }
  EXPECT_EQ(schedule, MinibatchSchedule(30, 7, 50, 3));
  EXPECT_NE(schedule, MinibatchSchedule(30, 7, 50, 4));
  EXPECT_THROW(MinibatchSchedule(5, 6, 1, 0), std::invalid_argument);
}

TEST(ScheduleTest, SelectionIsUniform) {
  const auto sel = SelectionSchedule(10, 20000, 1);
  std::vector<int> counts(10);
  for (long i : sel) ++counts[i];
  for (int c : counts) EXPECT_NEAR(c, 2000, 200);
}

TEST(TrainConfigTest, DerivedQuantities) {
  TrainConfig cfg;
  LogisticModel model(2);
  EXPECT_DOUBLE_EQ(cfg.StepSize(model), 1.0 / (0.25 + 1e-3));
  cfg.learning_rate = 0.3;
  EXPECT_EQ(cfg.StepSize(model), 0.3);
  cfg.sampling_probability = 0.004;
  EXPECT_EQ(cfg.BatchSize(100), 1);
  cfg.sampling_probability = 0.05;
  EXPECT_EQ(cfg.BatchSize(400), 20);
  cfg.iterations = 40;
  cfg.local_iterations = 10;
  EXPECT_EQ(cfg.GlobalRounds(), 4);
  cfg.iterations = 45;
  EXPECT_THROW(cfg.GlobalRounds(), std::invalid_argument);
}

TEST(TrainSgdTest, ConvergesOnStronglyConvexObjective) {
  LogisticModel model(5);
  const Dataset ds = Synthesize(100, 5, 1.5, 1);
  const auto fit = TrainSgd(model, ds, SmallConfig(100, 0.05));
  EXPECT_TRUE(fit.converged);
  EXPECT_LE(fit.grad_norm, 1e-8);
  EXPECT_LE(model.ObjectiveGradient(fit.theta, ds).norm(), 1e-8);
  EXPECT_EQ(fit.objective, model.Objective(fit.theta, ds));
}

TEST(TrainSgdTest, OneDimensionalOptimumMatchesBisection) {
  LogisticModel model(1, WithL2(1.0));
  const Dataset ds("one", {{Vector::Ones(1), 1}});
  // Stationarity: -sigmoid(-theta) + theta = 0.
  const auto stationarity = [](double t) { return t - 1.0 / (1.0 + std::exp(t)); };
  const double root = testing::Bisect(stationarity, 0.0, 1.0);
  EXPECT_LE(std::abs(stationarity(root)), 1e-13);
  const auto fit = TrainSgd(model, ds, SmallConfig(10, 1.0));
  EXPECT_NEAR(fit.theta(0), root, 1e-6);
}

TEST(TrainSgdTest, Deterministic) {
  MlpModel model(3);
  const Dataset ds = Synthesize(60, 3, 1.5, 2);
  auto cfg = SmallConfig(50, 0.1, 7);
  const auto a = TrainSgd(model, ds, cfg);
  const auto b = TrainSgd(model, ds, cfg);
  EXPECT_EQ(a.theta, b.theta);
  EXPECT_EQ(a.sgd_phase_theta, b.sgd_phase_theta);
}

TEST(TrainDbdpTest, ZeroNoiseReproducesSgdTrajectory) {
  ModelOptions opts;
  opts.clip_bound = 1e9;  // inactive, so the unclipped reference applies
  LogisticModel model(4, opts);
  const Dataset ds = Synthesize(80, 4, 1.5, 3);
  auto cfg = SmallConfig(60, 0.1, 11);
  cfg.learning_rate = 2.0;
  cfg.sigma_override = 0.0;
  const auto sgd = TrainSgd(model, ds, cfg);
  for (NoiseMode mode : {NoiseMode::kFixedPerInstance, NoiseMode::kFreshPerIteration}) {
    cfg.noise_mode = mode;
    const auto out = TrainDbdp(model, ds, PrivacyBudget(1.0, 1e-5), cfg, {});
    EXPECT_EQ(out.theta, sgd.sgd_phase_theta);
    const auto schedule = MinibatchSchedule(80, 8, 60, 11);
    EXPECT_EQ(out.loss_trace,
              ReferenceLossTrace(model, ds, model.InitialParams(11), 2.0,
                                 schedule, 1e9));
    for (std::size_t i = 0; i < ds.size(); ++i) {
      EXPECT_EQ(out.data_priv[i].x, ds[i].x);
    }
  }
}

TEST(TrainDbdpTest, RetrainingOnPrivateDataReproducesModel) {
  LogisticModel model(3);
  const Dataset ds = Synthesize(50, 3, 1.5, 4);
  auto cfg = SmallConfig(40, 0.1, 5);
  const auto out = TrainDbdp(model, ds, PrivacyBudget(0.5, 1e-4), cfg, {});
  EXPECT_GT(out.sigma, 0.0);
  const auto schedule = MinibatchSchedule(50, 5, 40, 5);
  const ModelParams retrained =
      RunSgdSteps(model, out.data_priv, model.InitialParams(5),
                  cfg.StepSize(model), schedule, model.LipschitzBound());
  EXPECT_EQ(retrained, out.theta);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    EXPECT_EQ(out.data_priv[i].y, ds[i].y);
    EXPECT_NE(out.data_priv[i].x, ds[i].x);
  }
}

TEST(TrainDbdpTest, FreshModeOnlyPerturbsSelectedInstances) {
  LogisticModel model(3);
  const Dataset ds = Synthesize(100, 3, 1.5, 4);
  auto cfg = SmallConfig(5, 0.02, 6);
  cfg.noise_mode = NoiseMode::kFreshPerIteration;
  const auto out = TrainDbdp(model, ds, PrivacyBudget(1.0, 1e-4), cfg, {});
  std::set<long> selected;
  for (const auto& step : out.step_log) {
    selected.insert(step.indices.begin(), step.indices.end());
  }
  for (std::size_t i = 0; i < ds.size(); ++i) {
    EXPECT_EQ(out.data_priv[i].x == ds[i].x, selected.count(i) == 0) << i;
  }
}

TEST(TrainDbdpTest, UsesCalibratedScaleAndFlagsRegime) {
  LogisticModel model(3);
  const Dataset ds = Synthesize(100, 3, 1.5, 4);
  const auto cfg = SmallConfig(30, 0.05, 1);
  const PrivacyBudget budget(7.0, 1e-4);
  const auto out = TrainDbdp(model, ds, budget, cfg, {});
  EXPECT_EQ(out.sigma,
            CalibrateDataPerturbation(budget, 0.05, 30, 1.0, {}).sigma);
  EXPECT_TRUE(out.regime_warning);
  EXPECT_EQ(out.FractionNoised(), 1.0);
}

TEST(TrainDbdpTest, AccuracyRisesWithEpsilon) {
  const Split split = SplitDataset(Synthesize(400, 10, 1.5, 7), 0.8, 0);
  LogisticModel model(10);
  auto cfg = SmallConfig(320, 1.0 / 320.0);
  cfg.learning_rate = 4.0;
  cfg.record_loss = false;
  const double delta = 1.0 / (320.0 * 320.0);
  std::vector<double> diff;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    cfg.seed = seed;
    const auto low = TrainDbdp(model, split.train, PrivacyBudget(0.1, delta), cfg, {});
    const auto high = TrainDbdp(model, split.train, PrivacyBudget(5.0, delta), cfg, {});
    diff.push_back(model.Accuracy(high.theta, split.test) -
                   model.Accuracy(low.theta, split.test));
  }
  // One-sided paired t-test at the 5% level.
  const double n = static_cast<double>(diff.size());
  const double mean = std::accumulate(diff.begin(), diff.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : diff) ss += (v - mean) * (v - mean);
  const double t = mean / std::sqrt(ss / (n - 1) / n);
  const boost::math::students_t dist(n - 1);
  EXPECT_GT(t, boost::math::quantile(dist, 0.95)) << "mean gain " << mean;
}

TEST(TrainDbdpTest, ClipsEveryExampleGradient) {
  ModelOptions opts;
  opts.clip_bound = 0.05;
  MlpModel model(3, opts);
  const Dataset ds = Synthesize(60, 3, 1.5, 4);
  const PrivacyBudget budget(1.0, 1e-4);
  const auto cfg = SmallConfig(30, 0.1, 2);
  for (const auto& out : {TrainDbdp(model, ds, budget, cfg, {}),
                          TrainGradientPerturbation(model, ds, budget, cfg, {})}) {
    double largest = 0.0;
    for (const auto& step : out.step_log) {
      EXPECT_LE(step.max_clipped_norm, 0.05 + 1e-12);
      largest = std::max(largest, step.max_clipped_norm);
    }
    EXPECT_NEAR(largest, 0.05, 1e-12) << "clipping never engaged";
  }
}

TEST(GradientPerturbationTest, ZeroNoiseReproducesSgd) {
  ModelOptions opts;
  opts.clip_bound = 1e9;
  LogisticModel model(4, opts);
  const Dataset ds = Synthesize(80, 4, 1.5, 3);
  auto cfg = SmallConfig(60, 0.1, 12);
  cfg.sigma_override = 0.0;
  const auto out = TrainGradientPerturbation(model, ds, PrivacyBudget(1.0, 1e-5), cfg, {});
  EXPECT_EQ(out.theta, TrainSgd(model, ds, cfg).sgd_phase_theta);
  for (std::size_t i = 0; i < ds.size(); ++i) EXPECT_EQ(out.data_priv[i].x, ds[i].x);
}

TEST(GradientPerturbationTest, InjectedNoiseHasCalibratedVariance) {
  LogisticModel model(50);
  const Dataset ds = Synthesize(100, 50, 1.0, 5);
  const PrivacyBudget budget(1.0, 1e-5);
  auto cfg = SmallConfig(1, 0.1);
  cfg.learning_rate = 0.5;
  const double sigma = CalibrateGradientNoise(budget, 0.1, 1, 1.0, {}).sigma;
  std::vector<double> noise;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    cfg.seed = seed;
    cfg.sigma_override.reset();
    const auto noisy = TrainGradientPerturbation(model, ds, budget, cfg, {});
    EXPECT_EQ(noisy.sigma, sigma);
    cfg.sigma_override = 0.0;
    const auto clean = TrainGradientPerturbation(model, ds, budget, cfg, {});
    const Vector b = (clean.theta - noisy.theta) / 0.5;
    noise.insert(noise.end(), b.begin(), b.end());
  }
  double ss = 0.0;
  for (double v : noise) ss += v * v;
  EXPECT_NEAR(ss / noise.size(), sigma * sigma, 0.05 * sigma * sigma);
}

TEST(OutputPerturbationTest, RefusesUnregularizedModel) {
  LogisticModel model(2, WithL2(0.0));
  const Dataset ds = Synthesize(30, 2, 1.0, 1);
  EXPECT_THROW(TrainOutputPerturbation(model, ds, PrivacyBudget(1.0, 1e-5),
                                       SmallConfig(10, 0.1)),
               std::invalid_argument);
}

TEST(OutputPerturbationTest, LargeBudgetApproachesOptimum) {
  LogisticModel model(3);
  const Dataset ds = Synthesize(100, 3, 1.5, 1);
  const auto cfg = SmallConfig(50, 0.1);
  const auto optimum = TrainSgd(model, ds, cfg);
  double previous = std::numeric_limits<double>::infinity();
  for (double eps : {1.0, 1e3, 1e6, 1e9}) {
    const auto out = TrainOutputPerturbation(model, ds, PrivacyBudget(eps, 1e-5),
                                             cfg, &optimum);
    const double dist = (out.theta - optimum.theta).norm();
    EXPECT_LT(dist, previous);
    previous = dist;
    EXPECT_TRUE(out.step_log.empty());
  }
  EXPECT_LT(previous, 1e-6);
}

class ImprovedTest : public ::testing::Test {
 protected:
  ImprovedTest()
      : ds_(Synthesize(120, 4, 1.5, 8)),
        model_(4),
        optimum_(TrainSgd(model_, ds_, SmallConfig(50, 0.1))),
        hess_(HessianOperator::Assemble(model_, optimum_.theta, ds_)) {}

  TrainConfig Config(long iterations, long local, std::uint64_t seed) const {
    TrainConfig cfg = SmallConfig(iterations, 1.0 / 120.0, seed);
    cfg.local_iterations = local;
    cfg.learning_rate = 1.0;
    return cfg;
  }

  TrainOutcome Run(double eps, const TrainConfig& cfg) const {
    return TrainDbdpImproved(model_, ds_, PrivacyBudget(eps, 1e-4), cfg, {},
                             optimum_.theta, hess_);
  }

  Dataset ds_;
  LogisticModel model_;
  SgdResult optimum_;
  HessianOperator hess_;
};

TEST_F(ImprovedTest, GateOpenLimitIsPlainSgd) {
  const auto cfg = Config(60, 10, 3);
  const auto out = Run(50.0, cfg);
  ASSERT_EQ(out.step_log.size(), 60u);
  for (const auto& step : out.step_log) EXPECT_TRUE(step.gated);
  EXPECT_EQ(out.FractionNoised(), 0.0);

  std::vector<std::vector<long>> schedule;
  for (long i : SelectionSchedule(ds_.size(), 60, 3)) schedule.push_back({i});
  EXPECT_EQ(out.theta, RunSgdSteps(model_, ds_, optimum_.theta, 1.0, schedule,
                                   model_.LipschitzBound()));
  EXPECT_EQ(out.loss_trace, ReferenceLossTrace(model_, ds_, optimum_.theta, 1.0,
                                               schedule, model_.LipschitzBound()));
  for (std::size_t i = 0; i < ds_.size(); ++i) EXPECT_EQ(out.data_priv[i].x, ds_[i].x);
}

TEST_F(ImprovedTest, SingleLocalStepKeepsModelsSynced) {
  const auto out = Run(1.0, Config(40, 1, 4));
  for (const auto& step : out.step_log) EXPECT_TRUE(step.models_synced);
  const auto lagged = Run(1.0, Config(40, 10, 4));
  long synced = 0;
  for (const auto& step : lagged.step_log) synced += step.models_synced ? 1 : 0;
  EXPECT_EQ(synced, 4);
}

TEST_F(ImprovedTest, GateAccountingAndNoiseScales) {
  const PrivacyBudget budget(0.5, 1e-4);
  const auto cfg = Config(50, 10, 5);
  const auto out = Run(0.5, cfg);
  long gated = 0, noised = 0;
  for (const auto& step : out.step_log) {
    ASSERT_EQ(step.indices.size(), 1u);
    if (step.gated) {
      ++gated;
      EXPECT_EQ(step.sigma, 0.0);
    } else {
      ++noised;
      EXPECT_EQ(step.sigma, CalibrateInstanceNoise(budget, 120, 50, 1.0,
                                                   step.mixed_norm, {})
                                .sigma);
    }
    EXPECT_LE(step.max_clipped_norm, 1.0 + 1e-12);
  }
  EXPECT_EQ(gated + noised, 50);
  EXPECT_DOUBLE_EQ(out.FractionNoised(), noised / 50.0);
}

TEST_F(ImprovedTest, LooserBudgetNoisesFewerSteps) {
  double low = 0.0, high = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    low += Run(0.1, Config(50, 10, seed)).FractionNoised();
    high += Run(5.0, Config(50, 10, seed)).FractionNoised();
  }
  EXPECT_GE(low, high);
}

TEST_F(ImprovedTest, RejectsIncompatibleRounds) {
  EXPECT_THROW(Run(1.0, Config(45, 10, 0)), std::invalid_argument);
}

TEST(StepLogTest, WritesOneRowPerSelectedInstance) {
  LogisticModel model(2);
  const Dataset ds = Synthesize(20, 2, 1.0, 1);
  const auto out = TrainDbdp(model, ds, PrivacyBudget(1.0, 1e-3),
                             SmallConfig(3, 0.1), {});
  const auto path =
      (std::filesystem::temp_directory_path() / "dbdp_step_log.csv").string();
  WriteStepLog(out.step_log, path);
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "iteration,instance_index,gated,sigma,w_t,loss");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 3 * 2);
}

TEST(DeterminismTest, EveryTrainerIsPure) {
  MlpModel model(3);
  const Dataset ds = Synthesize(60, 3, 1.5, 9);
  const PrivacyBudget budget(1.0, 1e-4);
  const auto cfg = SmallConfig(20, 0.1, 3);
  EXPECT_EQ(TrainDbdp(model, ds, budget, cfg, {}).theta,
            TrainDbdp(model, ds, budget, cfg, {}).theta);
  EXPECT_EQ(TrainGradientPerturbation(model, ds, budget, cfg, {}).theta,
            TrainGradientPerturbation(model, ds, budget, cfg, {}).theta);
  const auto opt = TrainSgd(model, ds, cfg);
  const auto hess = HessianOperator::Assemble(model, opt.theta, ds);
  EXPECT_EQ(TrainDbdpImproved(model, ds, budget, cfg, {}, opt.theta, hess).theta,
            TrainDbdpImproved(model, ds, budget, cfg, {}, opt.theta, hess).theta);
}

}  // namespace
}  // namespace dbdp
