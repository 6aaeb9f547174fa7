#include "screener/mlp.hpp"

#include <cmath>
#include <stdexcept>

namespace screener::rl {
namespace {

// Orthogonal rows or columns (whichever is fewer), as in torch.nn.init.orthogonal_.
Eigen::MatrixXd orthogonal(int rows, int cols, double gain, Rng& rng) {
  const bool tall = rows >= cols;
  const int big = tall ? rows : cols;
  const int small = tall ? cols : rows;
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd a(big, small);
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    for (Eigen::Index i = 0; i < a.rows(); ++i) a(i, j) = normal(rng);
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(big, small);
  // Sign fix so the result is uniformly distributed.
  const Eigen::MatrixXd r = qr.matrixQR().topRows(small).triangularView<Eigen::Upper>();
  for (int j = 0; j < small; ++j) {
    if (r(j, j) < 0.0) q.col(j) *= -1.0;
  }
  if (!tall) q.transposeInPlace();
  return gain * q;
}

}  // namespace

Mlp::Mlp(int inputs, int hidden, int outputs) : inputs_(inputs), hidden_(hidden), outputs_(outputs) {
  if (inputs < 1 || hidden < 1 || outputs < 1) throw std::invalid_argument("Mlp: layer sizes must be positive");
  params_ = Eigen::VectorXd::Zero(offsets().total);
}

Mlp::Offsets Mlp::offsets() const {
  Offsets o{};
  o.w1 = 0;
  o.b1 = o.w1 + Eigen::Index{hidden_} * inputs_;
  o.w2 = o.b1 + hidden_;
  o.b2 = o.w2 + Eigen::Index{hidden_} * hidden_;
  o.w3 = o.b2 + hidden_;
  o.b3 = o.w3 + Eigen::Index{outputs_} * hidden_;
  o.total = o.b3 + outputs_;
  return o;
}

void Mlp::init_orthogonal(double hidden_gain, double output_gain, Rng& rng) {
  const Offsets o = offsets();
  params_.setZero();
  MatMap(params_.data() + o.w1, hidden_, inputs_) = orthogonal(hidden_, inputs_, hidden_gain, rng);
  MatMap(params_.data() + o.w2, hidden_, hidden_) = orthogonal(hidden_, hidden_, hidden_gain, rng);
  MatMap(params_.data() + o.w3, outputs_, hidden_) = orthogonal(outputs_, hidden_, output_gain, rng);
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& x, Cache* cache) const {
  if (x.rows() != inputs_) throw std::invalid_argument("Mlp::forward: input size mismatch");
  const Offsets o = offsets();
  const double* p = params_.data();
  const ConstMatMap w1(p + o.w1, hidden_, inputs_);
  const ConstVecMap b1(p + o.b1, hidden_);
  const ConstMatMap w2(p + o.w2, hidden_, hidden_);
  const ConstVecMap b2(p + o.b2, hidden_);
  const ConstMatMap w3(p + o.w3, outputs_, hidden_);
  const ConstVecMap b3(p + o.b3, outputs_);

  Eigen::MatrixXd h1 = ((w1 * x).colwise() + b1).array().tanh().matrix();
  Eigen::MatrixXd h2 = ((w2 * h1).colwise() + b2).array().tanh().matrix();
  Eigen::MatrixXd out = (w3 * h2).colwise() + b3;
  if (cache != nullptr) {
    cache->input = x;
    cache->h1 = std::move(h1);
    cache->h2 = std::move(h2);
  }
  return out;
}

void Mlp::backward(const Cache& cache, const Eigen::MatrixXd& d_output, Eigen::VectorXd& grad) const {
  const Offsets o = offsets();
  if (grad.size() != o.total) grad = Eigen::VectorXd::Zero(o.total);
  const double* p = params_.data();
  const ConstMatMap w2(p + o.w2, hidden_, hidden_);
  const ConstMatMap w3(p + o.w3, outputs_, hidden_);
  double* g = grad.data();

  MatMap(g + o.w3, outputs_, hidden_).noalias() += d_output * cache.h2.transpose();
  Eigen::Map<Eigen::VectorXd>(g + o.b3, outputs_) += d_output.rowwise().sum();

  const Eigen::MatrixXd dz2 = ((w3.transpose() * d_output).array() * (1.0 - cache.h2.array().square())).matrix();
  MatMap(g + o.w2, hidden_, hidden_).noalias() += dz2 * cache.h1.transpose();
  Eigen::Map<Eigen::VectorXd>(g + o.b2, hidden_) += dz2.rowwise().sum();

  const Eigen::MatrixXd dz1 = ((w2.transpose() * dz2).array() * (1.0 - cache.h1.array().square())).matrix();
  MatMap(g + o.w1, hidden_, inputs_).noalias() += dz1 * cache.input.transpose();
  Eigen::Map<Eigen::VectorXd>(g + o.b1, hidden_) += dz1.rowwise().sum();
}

void Adam::step(Eigen::VectorXd& params, const Eigen::VectorXd& grad) {
  if (m.size() != params.size()) {
    m = Eigen::VectorXd::Zero(params.size());
    v = Eigen::VectorXd::Zero(params.size());
  }
  ++t;
  m = beta1 * m + (1.0 - beta1) * grad;
  v = beta2 * v + (1.0 - beta2) * grad.cwiseProduct(grad);
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
  const double step = learning_rate / bc1;
  params.array() -= step * m.array() / ((v.array() / bc2).sqrt() + epsilon);
}

}  // namespace screener::rl
