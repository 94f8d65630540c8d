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

#ifndef DBDP_INFLUENCE_H_
#define DBDP_INFLUENCE_H_

#include "dbdp/dataset.h"
#include "dbdp/linalg.h"
#include "dbdp/models.h"

namespace dbdp {

// The averaged Hessian at a reference model, factorized once for repeated
// solves. Immutable after construction; concurrent Solve calls are safe.
class HessianOperator {
 public:
  // Averages per-instance Hessians of `model` at `reference` over `ds` and
  // factorizes H + damping * I. When that is not positive definite the
  // damping is raised to |lambda_min(H)| + 1e-4. Throws std::runtime_error if
  // factorization still fails.
  static HessianOperator Assemble(const LossModel& model,
                                  const ModelParams& reference,
                                  const Dataset& ds, double damping = 0.0);

  // Factorizes an explicit symmetric matrix under the same rules.
  static HessianOperator FromMatrix(Matrix hessian, double damping = 0.0);

  const Matrix& matrix() const { return hessian_; }
  double damping() const { return damping_; }
  bool damping_escalated() const { return escalated_; }
  Eigen::Index dim() const { return hessian_.rows(); }

  // x with (H + damping * I) x = rhs, refined until the relative residual is
  // at most 1e-8; throws std::runtime_error otherwise.
  Vector Solve(const Vector& rhs) const;

 private:
  HessianOperator(Matrix hessian, double damping);

  Matrix hessian_;
  double damping_ = 0.0;
  bool escalated_ = false;
  Eigen::LLT<Matrix> factor_;
};

// Estimated parameter shift from deleting z from an n-instance training
// set: c = (1 / n) * H^{-1} * grad_theta l(z, at).
Vector Influence(const HessianOperator& hess, const LossModel& model,
                 const ModelParams& at, const DataInstance& z, long n);

// Same, from a precomputed gradient.
Vector InfluenceFromGradient(const HessianOperator& hess, const Vector& grad,
                             long n);

enum class GateMode {
  // || (c + theta) / theta ||_2 exactly.
  kLiteral,
  // The same norm divided by sqrt(m), so c = 0 always lands on 1.
  kNormalized,
};

struct InfluenceReport {
  Vector contribution;
  double ratio_norm = 0.0;
  // True when e^-eps <= ratio_norm <= e^eps: the instance moves the model
  // too little to need noise.
  bool gated = false;
};

// Element-wise ratio (c + theta) / theta, with entries of theta smaller than
// `theta_floor` in magnitude replaced by +-theta_floor (zero maps to +).
InfluenceReport ThresholdCheck(const Vector& contribution,
                               const ModelParams& theta, double epsilon,
                               GateMode mode = GateMode::kLiteral,
                               double theta_floor = 1e-12);

}  // namespace dbdp

#endif  // DBDP_INFLUENCE_H_
