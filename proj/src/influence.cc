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

#include "dbdp/influence.h"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace dbdp {

HessianOperator::HessianOperator(Matrix hessian, double damping)
    : hessian_(std::move(hessian)), damping_(damping) {
  if (hessian_.rows() != hessian_.cols() || hessian_.rows() == 0) {
    throw std::invalid_argument("Hessian must be a non-empty square matrix");
  }
  if (!(damping_ >= 0.0)) throw std::invalid_argument("damping must be >= 0");

  // Symmetrize against round-off in the accumulation.
  hessian_ = 0.5 * (hessian_ + hessian_.transpose()).eval();
  const Eigen::Index m = hessian_.rows();

  Matrix damped = hessian_ + damping_ * Matrix::Identity(m, m);
  factor_.compute(damped);
  if (factor_.info() == Eigen::Success) return;

  Eigen::SelfAdjointEigenSolver<Matrix> eig(hessian_, Eigen::EigenvaluesOnly);
  const double lambda_min = eig.eigenvalues().minCoeff();
  damping_ = std::abs(lambda_min) + 1e-4;
  escalated_ = true;
  damped = hessian_ + damping_ * Matrix::Identity(m, m);
  factor_.compute(damped);
  if (factor_.info() != Eigen::Success) {
    std::ostringstream os;
    os << "Hessian factorization failed after raising damping to " << damping_;
    throw std::runtime_error(os.str());
  }
}

HessianOperator HessianOperator::Assemble(const LossModel& model,
                                          const ModelParams& reference,
                                          const Dataset& ds, double damping) {
  const Eigen::Index m = model.param_dim();
  Matrix total = Matrix::Zero(m, m);
  for (const auto& z : ds) total += model.Hessian(reference, z);
  return HessianOperator(total / static_cast<double>(ds.size()), damping);
}

HessianOperator HessianOperator::FromMatrix(Matrix hessian, double damping) {
  return HessianOperator(std::move(hessian), damping);
}

Vector HessianOperator::Solve(const Vector& rhs) const {
  if (rhs.size() != dim()) {
    throw std::invalid_argument("right-hand side does not match Hessian size");
  }
  const double rhs_norm = rhs.norm();
  if (rhs_norm == 0.0) return Vector::Zero(dim());

  auto apply = [this](const Vector& v) -> Vector {
    return hessian_ * v + damping_ * v;
  };
  Vector x = factor_.solve(rhs);
  Vector residual = rhs - apply(x);
  for (int refine = 0; refine < 3 && residual.norm() > 1e-8 * rhs_norm;
       ++refine) {
    x += factor_.solve(residual);
    residual = rhs - apply(x);
  }
  if (residual.norm() > 1e-8 * rhs_norm) {
    std::ostringstream os;
    os << "Hessian solve residual " << residual.norm() / rhs_norm
       << " exceeds tolerance";
    throw std::runtime_error(os.str());
  }
  return x;
}

Vector InfluenceFromGradient(const HessianOperator& hess, const Vector& grad,
                             long n) {
  if (n < 1) throw std::invalid_argument("dataset size must be >= 1");
  return hess.Solve(grad) / static_cast<double>(n);
}

Vector Influence(const HessianOperator& hess, const LossModel& model,
                 const ModelParams& at, const DataInstance& z, long n) {
  return InfluenceFromGradient(hess, model.Gradient(at, z), n);
}

InfluenceReport ThresholdCheck(const Vector& contribution,
                               const ModelParams& theta, double epsilon,
                               GateMode mode, double theta_floor) {
  if (contribution.size() != theta.size()) {
    throw std::invalid_argument("contribution and parameters differ in size");
  }
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be > 0");
  if (!(theta_floor > 0.0)) {
    throw std::invalid_argument("theta floor must be > 0");
  }
  Vector ratio(theta.size());
  for (Eigen::Index j = 0; j < theta.size(); ++j) {
    double t = theta[j];
    if (std::abs(t) < theta_floor) {
      t = std::signbit(t) && t != 0.0 ? -theta_floor : theta_floor;
    }
    ratio[j] = (contribution[j] + t) / t;
  }
  double norm = ratio.norm();
  if (mode == GateMode::kNormalized) {
    norm /= std::sqrt(static_cast<double>(theta.size()));
  }
  InfluenceReport report;
  report.contribution = contribution;
  report.ratio_norm = norm;
  report.gated = std::exp(-epsilon) <= norm && norm <= std::exp(epsilon);
  return report;
}

}  // namespace dbdp
