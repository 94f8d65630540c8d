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
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace dbdp {
namespace {

// log(1 + exp(t)) without overflow.
double Softplus(double t) {
  return std::max(t, 0.0) + std::log1p(std::exp(-std::abs(t)));
}

double Sigmoid(double t) {
  if (t >= 0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

// Derivatives of the link log(1 + exp(-y s)) with respect to s.
struct LinkDerivs {
  double first;   // -y * p
  double second;  // p * (1 - p)
};

LinkDerivs Link(double s, int y) {
  const double p = Sigmoid(-y * s);
  return {-y * p, p * (1.0 - p)};
}

}  // namespace

std::string ArchitectureName(Architecture arch) {
  return arch == Architecture::kLogistic ? "logistic" : "mlp";
}

Architecture ParseArchitecture(const std::string& name) {
  if (name == "logistic") return Architecture::kLogistic;
  if (name == "mlp") return Architecture::kMlp;
  throw std::invalid_argument("unknown model architecture '" + name + "'");
}

LossModel::LossModel(int feature_dim, int param_dim, ModelOptions options)
    : feature_dim_(feature_dim), param_dim_(param_dim), options_(options) {
  if (feature_dim < 1) throw std::invalid_argument("feature dimension < 1");
  if (!(options_.l2 >= 0.0)) throw std::invalid_argument("l2 must be >= 0");
  if (!(options_.clip_bound > 0.0)) {
    throw std::invalid_argument("clip bound must be > 0");
  }
}

void LossModel::CheckDims(const ModelParams& theta, const Vector& x) const {
  if (theta.size() != param_dim_ || x.size() != feature_dim_) {
    std::ostringstream os;
    os << ArchitectureName(architecture()) << " model expects theta of size "
       << param_dim_ << " and x of size " << feature_dim_ << ", got "
       << theta.size() << " and " << x.size();
    throw std::invalid_argument(os.str());
  }
}

double LossModel::Loss(const ModelParams& theta, const DataInstance& z) const {
  CheckDims(theta, z.x);
  return Softplus(-z.y * Score(theta, z.x)) +
         0.5 * options_.l2 * theta.squaredNorm();
}

double LossModel::MixedNorm(const ModelParams& theta,
                            const DataInstance& z) const {
  const Matrix m = MixedPartial(theta, z);
  return options_.mixed_norm == MixedNormKind::kFrobenius ? m.norm()
                                                          : SpectralNorm(m);
}

double LossModel::Objective(const ModelParams& theta, const Dataset& ds) const {
  double total = 0.0;
  for (const auto& z : ds) total += Loss(theta, z);
  return total / static_cast<double>(ds.size());
}

Vector LossModel::ObjectiveGradient(const ModelParams& theta,
                                    const Dataset& ds) const {
  Vector total = Vector::Zero(param_dim_);
  for (const auto& z : ds) total += Gradient(theta, z);
  return total / static_cast<double>(ds.size());
}

int LossModel::Predict(const ModelParams& theta, const Vector& x) const {
  CheckDims(theta, x);
  return Score(theta, x) >= 0.0 ? 1 : -1;
}

double LossModel::Accuracy(const ModelParams& theta, const Dataset& ds) const {
  std::size_t correct = 0;
  for (const auto& z : ds) correct += Predict(theta, z.x) == z.y ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(ds.size());
}

double LossModel::LipschitzBound() const {
  if (architecture() == Architecture::kLogistic && options_.l2 == 0.0) {
    return 1.0;
  }
  return options_.clip_bound;
}

// --- Logistic regression ---------------------------------------------------

LogisticModel::LogisticModel(int feature_dim, ModelOptions options)
    : LossModel(feature_dim, feature_dim, options) {}

double LogisticModel::Score(const ModelParams& theta, const Vector& x) const {
  return theta.dot(x);
}

Vector LogisticModel::Gradient(const ModelParams& theta,
                               const DataInstance& z) const {
  CheckDims(theta, z.x);
  const LinkDerivs link = Link(Score(theta, z.x), z.y);
  return link.first * z.x + l2() * theta;
}

Matrix LogisticModel::Hessian(const ModelParams& theta,
                              const DataInstance& z) const {
  CheckDims(theta, z.x);
  const LinkDerivs link = Link(Score(theta, z.x), z.y);
  Matrix h = link.second * (z.x * z.x.transpose());
  h.diagonal().array() += l2();
  return h;
}

// d/dx [-y p x] = -y p I + p (1 - p) x theta^T, with p = sigmoid(-y theta^T x).
Matrix LogisticModel::MixedPartial(const ModelParams& theta,
                                   const DataInstance& z) const {
  CheckDims(theta, z.x);
  const LinkDerivs link = Link(Score(theta, z.x), z.y);
  Matrix m = link.second * (z.x * theta.transpose());
  m.diagonal().array() += link.first;
  return m;
}

ModelParams LogisticModel::InitialParams(std::uint64_t) const {
  return ModelParams::Zero(param_dim());
}

// --- One-hidden-layer perceptron -------------------------------------------

MlpModel::MlpModel(int feature_dim, ModelOptions options)
    : LossModel(feature_dim, feature_dim * feature_dim + feature_dim,
                options) {}

namespace {

struct MlpView {
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                 Eigen::RowMajor>>
      w;
  Eigen::Map<const Vector> v;

  MlpView(const ModelParams& theta, int d)
      : w(theta.data(), d, d), v(theta.data() + d * d, d) {}
};

}  // namespace

double MlpModel::Score(const ModelParams& theta, const Vector& x) const {
  const MlpView p(theta, feature_dim());
  return p.v.dot((p.w * x).array().tanh().matrix());
}

Vector MlpModel::Gradient(const ModelParams& theta,
                          const DataInstance& z) const {
  CheckDims(theta, z.x);
  const int d = feature_dim();
  const MlpView p(theta, d);
  const Vector h = (p.w * z.x).array().tanh().matrix();
  const LinkDerivs link = Link(p.v.dot(h), z.y);
  const Vector vt = p.v.array() * (1.0 - h.array().square());

  Vector g(param_dim());
  for (int i = 0; i < d; ++i) {
    g.segment(i * d, d) = (link.first * vt[i]) * z.x;
  }
  g.tail(d) = link.first * h;
  g += l2() * theta;
  return g;
}

Matrix MlpModel::Hessian(const ModelParams& theta,
                         const DataInstance& z) const {
  CheckDims(theta, z.x);
  const int d = feature_dim();
  const int m = param_dim();
  const MlpView p(theta, d);
  const Vector h = (p.w * z.x).array().tanh().matrix();
  const LinkDerivs link = Link(p.v.dot(h), z.y);
  const Vector t = 1.0 - h.array().square();
  const Vector vt = p.v.array() * t.array();

  Vector ds(m);  // ds / d theta
  for (int i = 0; i < d; ++i) ds.segment(i * d, d) = vt[i] * z.x;
  ds.tail(d) = h;

  Matrix hess = link.second * (ds * ds.transpose());
  const Matrix xx = z.x * z.x.transpose();
  for (int i = 0; i < d; ++i) {
    // d^2 s / dW_i. dW_i. = -2 v_i h_i t_i x x^T
    hess.block(i * d, i * d, d, d) +=
        (link.first * -2.0 * p.v[i] * h[i] * t[i]) * xx;
    // d^2 s / dW_ij dv_i = t_i x_j
    hess.block(i * d, d * d + i, d, 1) += (link.first * t[i]) * z.x;
    hess.block(d * d + i, i * d, 1, d) +=
        (link.first * t[i]) * z.x.transpose();
  }
  hess.diagonal().array() += l2();
  return hess;
}

Matrix MlpModel::MixedPartial(const ModelParams& theta,
                              const DataInstance& z) const {
  CheckDims(theta, z.x);
  const int d = feature_dim();
  const int m = param_dim();
  const MlpView p(theta, d);
  const Vector h = (p.w * z.x).array().tanh().matrix();
  const LinkDerivs link = Link(p.v.dot(h), z.y);
  const Vector t = 1.0 - h.array().square();
  const Vector vt = p.v.array() * t.array();

  Vector ds(m);
  for (int i = 0; i < d; ++i) ds.segment(i * d, d) = vt[i] * z.x;
  ds.tail(d) = h;
  const Vector ds_dx = p.w.transpose() * vt;

  Matrix mixed = link.second * (ds * ds_dx.transpose());
  for (int i = 0; i < d; ++i) {
    // d/dx_k (v_i t_i x_j) = v_i (-2 h_i t_i W_ik x_j + t_i [j == k])
    Matrix block = (link.first * -2.0 * p.v[i] * h[i] * t[i]) *
                   (z.x * p.w.row(i));
    block.diagonal().array() += link.first * vt[i];
    mixed.block(i * d, 0, d, d) += block;
    // d/dx_k h_i = t_i W_ik
    mixed.row(d * d + i) += (link.first * t[i]) * p.w.row(i);
  }
  return mixed;
}

ModelParams MlpModel::InitialParams(std::uint64_t seed) const {
  Rng rng = MakeRng(seed, kStreamInit);
  std::normal_distribution<double> normal(
      0.0, 1.0 / std::sqrt(static_cast<double>(feature_dim())));
  ModelParams theta(param_dim());
  for (Eigen::Index i = 0; i < theta.size(); ++i) theta[i] = normal(rng);
  return theta;
}

std::unique_ptr<LossModel> MakeModel(Architecture arch, int feature_dim,
                                     ModelOptions options) {
  if (arch == Architecture::kLogistic) {
    return std::make_unique<LogisticModel>(feature_dim, options);
  }
  return std::make_unique<MlpModel>(feature_dim, options);
}

// --- Norms -----------------------------------------------------------------

namespace {

Matrix SmallGram(const Matrix& m) {
  return m.cols() <= m.rows() ? Matrix(m.transpose() * m)
                              : Matrix(m * m.transpose());
}

}  // namespace

double SpectralNorm(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  if (std::min(m.rows(), m.cols()) > 64) return SpectralNormPowerIteration(m);
  const Matrix gram = SmallGram(m);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram, Eigen::EigenvaluesOnly);
  return std::sqrt(std::max(0.0, eig.eigenvalues().maxCoeff()));
}

double SpectralNormPowerIteration(const Matrix& m, double rel_tol,
                                  int max_iter) {
  if (m.size() == 0 || m.cwiseAbs().maxCoeff() == 0.0) return 0.0;
  const Matrix gram = SmallGram(m);
  const Eigen::Index k = gram.rows();
  Vector v(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    v[i] = 1.0 + 0.1 * std::sin(static_cast<double>(i + 1));
  }
  v.normalize();
  double estimate = std::sqrt(std::max(0.0, v.dot(gram * v)));
  for (int iter = 0; iter < max_iter; ++iter) {
    Vector w = gram * v;
    const double w_norm = w.norm();
    if (w_norm == 0.0) return 0.0;
    v = w / w_norm;
    const double next = std::sqrt(std::max(0.0, v.dot(gram * v)));
    if (std::abs(next - estimate) <= rel_tol * next) return next;
    estimate = next;
  }
  throw std::runtime_error("power iteration did not converge in " +
                           std::to_string(max_iter) + " steps");
}

Vector ClipToNorm(Vector g, double bound) {
  const double norm = g.norm();
  if (norm > bound) g *= bound / norm;
  return g;
}

// --- Persistence -------------------------------------------------------------

void SaveModel(const LossModel& model, const ModelParams& theta,
               const std::string& path) {
  if (theta.size() != model.param_dim()) {
    throw std::invalid_argument("parameter vector does not match model");
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << std::setprecision(17) << ArchitectureName(model.architecture()) << " "
      << model.feature_dim() << " " << model.param_dim() << " " << model.l2()
      << "\n";
  for (Eigen::Index i = 0; i < theta.size(); ++i) out << theta[i] << "\n";
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

LoadedModel LoadModel(const std::string& path, ModelOptions options) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::string arch;
  int d = 0;
  int m = 0;
  double l2 = 0.0;
  if (!(in >> arch >> d >> m >> l2)) {
    throw std::runtime_error(path + ": malformed model header");
  }
  options.l2 = l2;
  LoadedModel loaded{MakeModel(ParseArchitecture(arch), d, options), {}};
  if (loaded.model->param_dim() != m) {
    throw std::runtime_error(path + ": header declares " + std::to_string(m) +
                             " parameters, architecture implies " +
                             std::to_string(loaded.model->param_dim()));
  }
  loaded.theta.resize(m);
  for (int i = 0; i < m; ++i) {
    if (!(in >> loaded.theta[i]) || !std::isfinite(loaded.theta[i])) {
      throw std::runtime_error(path + ": bad parameter at index " +
                               std::to_string(i));
    }
  }
  return loaded;
}

}  // namespace dbdp
