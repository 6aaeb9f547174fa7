#pragma once

#include <Eigen/Dense>

#include "screener/random.hpp"

namespace screener::rl {

/// input -> tanh(hidden) -> tanh(hidden) -> linear output.
///
/// All weights live in one flat parameter vector (W1, b1, W2, b2, W3, b3; column-major), so
/// the optimizer, gradient checks and checkpoints see a single contiguous array. Batches are
/// column-per-sample.
class Mlp {
 public:
  struct Cache {
    Eigen::MatrixXd input;
    Eigen::MatrixXd h1;
    Eigen::MatrixXd h2;
  };

  Mlp() = default;
  Mlp(int inputs, int hidden, int outputs);

  /// Orthogonal weights scaled by `hidden_gain` (hidden layers) / `output_gain` (last layer),
  /// zero biases.
  void init_orthogonal(double hidden_gain, double output_gain, Rng& rng);

  [[nodiscard]] Eigen::MatrixXd forward(const Eigen::MatrixXd& x, Cache* cache = nullptr) const;

  /// Adds d(loss)/d(params) to `grad` given d(loss)/d(output) for the cached batch.
  void backward(const Cache& cache, const Eigen::MatrixXd& d_output, Eigen::VectorXd& grad) const;

  [[nodiscard]] int inputs() const { return inputs_; }
  [[nodiscard]] int hidden() const { return hidden_; }
  [[nodiscard]] int outputs() const { return outputs_; }
  [[nodiscard]] Eigen::Index parameter_count() const { return params_.size(); }

  Eigen::VectorXd& parameters() { return params_; }
  [[nodiscard]] const Eigen::VectorXd& parameters() const { return params_; }

 private:
  using MatMap = Eigen::Map<Eigen::MatrixXd>;
  using ConstMatMap = Eigen::Map<const Eigen::MatrixXd>;
  using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;

  struct Offsets {
    Eigen::Index w1, b1, w2, b2, w3, b3, total;
  };
  [[nodiscard]] Offsets offsets() const;

  int inputs_ = 0;
  int hidden_ = 0;
  int outputs_ = 0;
  Eigen::VectorXd params_;
};

/// Adam with bias correction.
struct Adam {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-5;
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  long long t = 0;

  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad);
};

}  // namespace screener::rl
