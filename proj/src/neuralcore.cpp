#include "cadenza/neuralcore.hpp"

#include <cmath>
#include <string>

#include "cadenza/error.hpp"
#include "cadenza/rng.hpp"

namespace cadenza {

std::vector<std::size_t> Mlp::dims() const {
  std::vector<std::size_t> d;
  if (layers.empty()) return d;
  d.push_back(in_dim());
  for (const auto& l : layers) d.push_back(l.out_dim());
  return d;
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += static_cast<std::size_t>(l.weights.size() + l.bias.size());
  return n;
}

void Mlp::validate() const {
  if (layers.empty()) throw Error(ErrorKind::Shape, "mlp has no layers");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    if (l.weights.rows() == 0 || l.weights.cols() == 0 || l.bias.size() != l.weights.rows()) {
      throw Error(ErrorKind::Shape, "layer " + std::to_string(i) + " has inconsistent shapes");
    }
    if (i > 0 && layers[i - 1].out_dim() != l.in_dim()) {
      throw Error(ErrorKind::Shape, "layer " + std::to_string(i) + " input dim " +
                                        std::to_string(l.in_dim()) + " != previous output dim " +
                                        std::to_string(layers[i - 1].out_dim()));
    }
    if (!l.weights.allFinite() || !l.bias.allFinite()) {
      throw Error(ErrorKind::NonFinite, "layer " + std::to_string(i) + " has non-finite parameters");
    }
    if (!(l.dropout_rate >= 0.0 && l.dropout_rate < 1.0)) {
      throw Error(ErrorKind::Config, "layer " + std::to_string(i) + " dropout must lie in [0, 1)");
    }
  }
}

Mlp init_mlp(const MlpSpec& spec, std::uint64_t seed) {
  if (spec.dims.size() < 2) throw Error(ErrorKind::Config, "an mlp needs at least two dims");
  for (auto d : spec.dims) {
    if (d == 0) throw Error(ErrorKind::Config, "mlp dims must be positive");
  }
  if (!(spec.dropout >= 0.0 && spec.dropout < 1.0)) {
    throw Error(ErrorKind::Config, "dropout must lie in [0, 1)");
  }
  auto rng = Rng(seed);
  Mlp mlp;
  const std::size_t n_layers = spec.dims.size() - 1;
  for (std::size_t i = 0; i < n_layers; ++i) {
    const auto in = spec.dims[i], out = spec.dims[i + 1];
    const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
    DenseLayer layer;
    layer.weights.resize(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in));
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) layer.weights(r, c) = rng.uniform(-bound, bound);
    layer.bias = Vector::Zero(static_cast<Eigen::Index>(out));
    const bool last = i + 1 == n_layers;
    layer.activation = last ? spec.output : spec.hidden;
    layer.dropout_rate = last ? 0.0 : spec.dropout;
    mlp.layers.push_back(std::move(layer));
  }
  return mlp;
}

namespace {

Matrix activate(const Matrix& z, Activation act) {
  switch (act) {
    case Activation::Identity: return z;
    case Activation::Relu: return z.cwiseMax(0.0);
    case Activation::Sigmoid: return z.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
  }
  return z;
}

// Derivative expressed through the activation output.
Matrix activation_grad(const Matrix& activated, Activation act) {
  switch (act) {
    case Activation::Identity: return Matrix::Ones(activated.rows(), activated.cols());
    case Activation::Relu: return (activated.array() > 0.0).cast<double>().matrix();
    case Activation::Sigmoid: return (activated.array() * (1.0 - activated.array())).matrix();
  }
  return activated;
}

}  // namespace

ForwardResult forward(const Mlp& mlp, const Matrix& x, Mode mode, std::uint64_t seed) {
  if (mlp.layers.empty()) throw Error(ErrorKind::Shape, "mlp has no layers");
  if (static_cast<std::size_t>(x.cols()) != mlp.in_dim()) {
    throw Error(ErrorKind::Shape, "input has " + std::to_string(x.cols()) + " columns, mlp expects " +
                                      std::to_string(mlp.in_dim()));
  }
  if (!x.allFinite()) throw Error(ErrorKind::NonFinite, "forward input contains NaN/Inf");

  ForwardResult result;
  GradientTape tape;
  auto rng = Rng(seed);
  Matrix h = x;
  for (const auto& layer : mlp.layers) {
    Matrix z = h * layer.weights.transpose();
    z.rowwise() += layer.bias.transpose();
    Matrix a = activate(z, layer.activation);
    LayerCache cache;
    if (mode == Mode::Train) cache.input = std::move(h);
    if (mode == Mode::Train && layer.dropout_rate > 0.0) {
      const double p = layer.dropout_rate, keep = 1.0 / (1.0 - p);
      cache.mask.resize(a.rows(), a.cols());
      for (Eigen::Index r = 0; r < a.rows(); ++r)
        for (Eigen::Index c = 0; c < a.cols(); ++c) cache.mask(r, c) = rng.uniform() < p ? 0.0 : keep;
      h = a.cwiseProduct(cache.mask);
    } else {
      h = a;
    }
    if (mode == Mode::Train) {
      cache.activated = std::move(a);
      tape.layers.push_back(std::move(cache));
    }
  }
  result.output = std::move(h);
  if (mode == Mode::Train) result.tape = std::move(tape);
  return result;
}

MlpGradients backward(const Mlp& mlp, const GradientTape& tape, const Matrix& grad_output) {
  if (tape.layers.size() != mlp.layers.size()) {
    throw Error(ErrorKind::Shape, "tape does not match the mlp depth");
  }
  const auto& last = tape.layers.back();
  if (grad_output.rows() != last.activated.rows() || grad_output.cols() != last.activated.cols()) {
    throw Error(ErrorKind::Shape, "grad_output shape does not match the forward output");
  }
  MlpGradients grads;
  grads.layers.resize(mlp.layers.size());
  Matrix g = grad_output;
  for (std::size_t i = mlp.layers.size(); i-- > 0;) {
    const auto& layer = mlp.layers[i];
    const auto& cache = tape.layers[i];
    if (cache.mask.size() > 0) g = g.cwiseProduct(cache.mask);
    const Matrix dz = g.cwiseProduct(activation_grad(cache.activated, layer.activation));
    grads.layers[i].weights = dz.transpose() * cache.input;
    grads.layers[i].bias = dz.colwise().sum().transpose();
    g = dz * layer.weights;
  }
  grads.input = std::move(g);
  return grads;
}

void sgd_step(Mlp& mlp, const MlpGradients& grads, double lr) {
  if (grads.layers.size() != mlp.layers.size()) throw Error(ErrorKind::Shape, "gradient depth mismatch");
  for (std::size_t i = 0; i < mlp.layers.size(); ++i) {
    mlp.layers[i].weights -= lr * grads.layers[i].weights;
    mlp.layers[i].bias -= lr * grads.layers[i].bias;
  }
}

Matrix l2_normalize_rows(const Matrix& x) {
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double norm = x.row(r).norm();
    if (!(norm > 0.0)) throw Error(ErrorKind::Validation, "zero row " + std::to_string(r) + " cannot be normalized");
    out.row(r) = x.row(r) / norm;
  }
  return out;
}

}  // namespace cadenza
