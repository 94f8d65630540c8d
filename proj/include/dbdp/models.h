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

#ifndef DBDP_MODELS_H_
#define DBDP_MODELS_H_

#include <cstdint>
#include <memory>
#include <string>

#include "dbdp/dataset.h"
#include "dbdp/linalg.h"

namespace dbdp {

enum class Architecture { kLogistic, kMlp };

// Which matrix norm stands for ||grad_x grad_theta loss||.
enum class MixedNormKind { kSpectral, kFrobenius };

std::string ArchitectureName(Architecture arch);
Architecture ParseArchitecture(const std::string& name);

struct ModelOptions {
  // L2 penalty lambda; the loss carries (lambda / 2) * ||theta||^2.
  double l2 = 1e-3;
  // Per-example gradient clipping bound used whenever the loss is not
  // analytically G-Lipschitz.
  double clip_bound = 1.0;
  MixedNormKind mixed_norm = MixedNormKind::kSpectral;
};

// A twice-differentiable per-example loss l(z, theta) built on the logistic
// link: l = log(1 + exp(-y * s(theta, x))) + (lambda / 2) * ||theta||^2.
//
// Every derivative is analytic. Implementations are immutable and safe to
// share between threads.
class LossModel {
 public:
  LossModel(int feature_dim, int param_dim, ModelOptions options);
  virtual ~LossModel() = default;

  virtual Architecture architecture() const = 0;

  int feature_dim() const { return feature_dim_; }
  int param_dim() const { return param_dim_; }
  double l2() const { return options_.l2; }
  const ModelOptions& options() const { return options_; }

  // Network score s(theta, x); its sign is the prediction.
  virtual double Score(const ModelParams& theta, const Vector& x) const = 0;

  double Loss(const ModelParams& theta, const DataInstance& z) const;
  // d l / d theta, length m.
  virtual Vector Gradient(const ModelParams& theta,
                          const DataInstance& z) const = 0;
  // d^2 l / d theta^2, m x m and symmetric.
  virtual Matrix Hessian(const ModelParams& theta,
                         const DataInstance& z) const = 0;
  // d/dx of the gradient, m x d: entry (j, k) is d^2 l / (d theta_j d x_k).
  virtual Matrix MixedPartial(const ModelParams& theta,
                              const DataInstance& z) const = 0;

  // Norm of MixedPartial, the factor by which feature noise reaches the
  // gradient.
  double MixedNorm(const ModelParams& theta, const DataInstance& z) const;

  // Average loss over `ds`.
  double Objective(const ModelParams& theta, const Dataset& ds) const;
  Vector ObjectiveGradient(const ModelParams& theta, const Dataset& ds) const;

  // +1 when the score is >= 0.
  int Predict(const ModelParams& theta, const Vector& x) const;
  double Accuracy(const ModelParams& theta, const Dataset& ds) const;

  // G. Exactly 1 for unregularized logistic regression on the unit ball,
  // otherwise the configured clipping bound.
  double LipschitzBound() const;

  // Smoothness constant L used for the default step size 1 / L.
  double SmoothnessBound() const { return 0.25 + options_.l2; }

  // Deterministic starting point for training.
  virtual ModelParams InitialParams(std::uint64_t seed) const = 0;

 protected:
  void CheckDims(const ModelParams& theta, const Vector& x) const;

 private:
  int feature_dim_;
  int param_dim_;
  ModelOptions options_;
};

// theta in R^d, s = theta^T x.
class LogisticModel final : public LossModel {
 public:
  LogisticModel(int feature_dim, ModelOptions options = {});

  Architecture architecture() const override { return Architecture::kLogistic; }
  double Score(const ModelParams& theta, const Vector& x) const override;
  Vector Gradient(const ModelParams& theta,
                  const DataInstance& z) const override;
  Matrix Hessian(const ModelParams& theta,
                 const DataInstance& z) const override;
  Matrix MixedPartial(const ModelParams& theta,
                      const DataInstance& z) const override;
  ModelParams InitialParams(std::uint64_t seed) const override;
};

// One tanh hidden layer of width d, no biases: s = v^T tanh(W x).
// theta = [W row-major (d * d entries), v (d entries)], so m = d^2 + d.
class MlpModel final : public LossModel {
 public:
  MlpModel(int feature_dim, ModelOptions options = {});

  Architecture architecture() const override { return Architecture::kMlp; }
  double Score(const ModelParams& theta, const Vector& x) const override;
  Vector Gradient(const ModelParams& theta,
                  const DataInstance& z) const override;
  Matrix Hessian(const ModelParams& theta,
                 const DataInstance& z) const override;
  Matrix MixedPartial(const ModelParams& theta,
                      const DataInstance& z) const override;
  ModelParams InitialParams(std::uint64_t seed) const override;
};

std::unique_ptr<LossModel> MakeModel(Architecture arch, int feature_dim,
                                     ModelOptions options = {});

// Largest singular value. Exact for small inputs, power iteration otherwise.
double SpectralNorm(const Matrix& m);

// Power iteration on the Gram matrix. Stops when successive estimates of the
// norm agree to `rel_tol`; throws std::runtime_error after `max_iter` steps.
double SpectralNormPowerIteration(const Matrix& m, double rel_tol = 1e-8,
                                  int max_iter = 1000);

// Rescales `g` onto the ball of radius `bound` if it lies outside.
Vector ClipToNorm(Vector g, double bound);

// Text format: a header line "<arch> <d> <m> <lambda>", then one parameter
// per line with 17 significant digits.
void SaveModel(const LossModel& model, const ModelParams& theta,
               const std::string& path);

struct LoadedModel {
  std::unique_ptr<LossModel> model;
  ModelParams theta;
};
LoadedModel LoadModel(const std::string& path, ModelOptions options = {});

}  // namespace dbdp

#endif  // DBDP_MODELS_H_
