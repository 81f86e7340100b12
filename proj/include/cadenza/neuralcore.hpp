#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

namespace cadenza {

// Rows are samples. All training arithmetic is float64.
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Activation : std::uint8_t { Identity = 0, Relu = 1, Sigmoid = 2 };

struct DenseLayer {
  Matrix weights;  // out x in
  Vector bias;     // out
  Activation activation = Activation::Identity;
  double dropout_rate = 0.0;  // applied to this layer's output in train mode

  std::size_t in_dim() const { return static_cast<std::size_t>(weights.cols()); }
  std::size_t out_dim() const { return static_cast<std::size_t>(weights.rows()); }
};

struct Mlp {
  std::vector<DenseLayer> layers;

  std::size_t in_dim() const { return layers.front().in_dim(); }
  std::size_t out_dim() const { return layers.back().out_dim(); }
  std::vector<std::size_t> dims() const;
  std::size_t parameter_count() const;
  // Throws on incompatible adjacent dims, non-finite parameters or dropout >= 1.
  void validate() const;
};

struct MlpSpec {
  std::vector<std::size_t> dims;
  Activation hidden = Activation::Relu;
  Activation output = Activation::Sigmoid;
  // Applied after every hidden layer; never on the output layer.
  double dropout = 0.3;
};

// Glorot-uniform weights in +-sqrt(6 / (in + out)), zero biases.
Mlp init_mlp(const MlpSpec& spec, std::uint64_t seed);

enum class Mode { Train, Eval };

struct LayerCache {
  Matrix input;
  Matrix activated;  // activation output before dropout
  Matrix mask;       // inverted-dropout multipliers; empty when no dropout
};

struct GradientTape {
  std::vector<LayerCache> layers;
};

struct ForwardResult {
  Matrix output;
  std::optional<GradientTape> tape;  // present only in train mode
};

// Train mode draws inverted-dropout masks (keep / (1 - p)) from `seed`;
// eval mode is deterministic and unscaled.
ForwardResult forward(const Mlp& mlp, const Matrix& x, Mode mode, std::uint64_t seed = 0);
inline Matrix predict(const Mlp& mlp, const Matrix& x) { return forward(mlp, x, Mode::Eval).output; }

struct LayerGradient {
  Matrix weights;
  Vector bias;
};

struct MlpGradients {
  std::vector<LayerGradient> layers;
  Matrix input;
};

MlpGradients backward(const Mlp& mlp, const GradientTape& tape, const Matrix& grad_output);

// theta <- theta - lr * g.
void sgd_step(Mlp& mlp, const MlpGradients& grads, double lr);

// Throws Error(Validation) naming the first zero row.
Matrix l2_normalize_rows(const Matrix& x);

}  // namespace cadenza
