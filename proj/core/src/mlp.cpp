#include "edp/mlp.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "edp/errors.hpp"

namespace edp {
namespace {

double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// One exp per element: with e = exp(x) and n = e (e + 2),
// tanh(softplus(x)) = n / (n + 2). exp is capped at x = 20, where the ratio is
// already 1 to double precision.
void apply_activation(Activation act, const Matrix& z, Matrix& h) {
  if (act == Activation::kRelu) {
    h = z.cwiseMax(0.0);
    return;
  }
  const Eigen::ArrayXXd e = z.array().min(20.0).exp();
  const Eigen::ArrayXXd n = e * (e + 2.0);
  h = (z.array() * n / (n + 2.0)).matrix();
}

void apply_activation_grad(Activation act, const Matrix& z, Matrix& d) {
  if (act == Activation::kRelu) {
    d.array() *= (z.array() > 0.0).cast<double>();
    return;
  }
  const Eigen::ArrayXXd e = z.array().min(20.0).exp();
  const Eigen::ArrayXXd n = e * (e + 2.0);
  const Eigen::ArrayXXd t = n / (n + 2.0);
  const Eigen::ArrayXXd sig = e / (1.0 + e);
  d.array() *= t + z.array() * (1.0 - t.square()) * sig;
}

void require_finite(const Matrix& m, std::size_t layer, const char* stage) {
  if (!m.allFinite()) {
    throw NumericError(std::string("non-finite value in ") + stage +
                       " of layer " + std::to_string(layer));
  }
}

}  // namespace

Activation parse_activation(std::string_view name) {
  if (name == "mish") return Activation::kMish;
  if (name == "relu") return Activation::kRelu;
  throw ParameterError("unknown activation '" + std::string(name) +
                       "' (expected mish|relu)");
}

std::string_view to_string(Activation activation) {
  return activation == Activation::kMish ? "mish" : "relu";
}

double mish(double x) { return x * std::tanh(softplus(x)); }

double mish_derivative(double x) {
  const double t = std::tanh(softplus(x));
  return t + x * (1.0 - t * t) * sigmoid(x);
}

Vector sinusoidal_embed(double k, int dim) {
  if (dim <= 0 || dim % 2 != 0) {
    throw ParameterError("embedding dimension must be even and positive, got " +
                         std::to_string(dim));
  }
  thread_local int cached_dim = 0;
  thread_local std::vector<double> freq;
  if (cached_dim != dim) {
    freq.resize(static_cast<std::size_t>(dim / 2));
    for (int i = 0; i < dim / 2; ++i) {
      freq[static_cast<std::size_t>(i)] = std::pow(10000.0, -2.0 * i / dim);
    }
    cached_dim = dim;
  }
  Vector e(dim);
  for (int i = 0; i < dim / 2; ++i) {
    const double arg = k * freq[static_cast<std::size_t>(i)];
    e(2 * i) = std::sin(arg);
    e(2 * i + 1) = std::cos(arg);
  }
  return e;
}

// ---------------------------------------------------------------------------
// Params

Params Params::zeros_like() const {
  Params out;
  out.layers.reserve(layers.size());
  for (const auto& l : layers) {
    out.layers.push_back({Matrix::Zero(l.weight.rows(), l.weight.cols()),
                          Vector::Zero(l.bias.size())});
  }
  return out;
}

bool Params::same_shape(const Params& other) const {
  if (layers.size() != other.layers.size()) return false;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& a = layers[i];
    const auto& b = other.layers[i];
    if (a.weight.rows() != b.weight.rows() ||
        a.weight.cols() != b.weight.cols() || a.bias.size() != b.bias.size()) {
      return false;
    }
  }
  return true;
}

Index Params::size() const {
  Index n = 0;
  for (const auto& l : layers) n += l.weight.size() + l.bias.size();
  return n;
}

double Params::squared_norm() const {
  double s = 0.0;
  for (const auto& l : layers) {
    s += l.weight.squaredNorm() + l.bias.squaredNorm();
  }
  return s;
}

bool Params::all_finite() const {
  for (const auto& l : layers) {
    if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
  }
  return true;
}

void Params::set_zero() {
  for (auto& l : layers) {
    l.weight.setZero();
    l.bias.setZero();
  }
}

void Params::round_to_float() {
  for (auto& l : layers) {
    edp::round_to_float(l.weight);
    edp::round_to_float(l.bias);
  }
}

Params& Params::operator+=(const Params& other) {
  if (!same_shape(other)) throw ShapeError("Params += : shape mismatch");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    layers[i].weight += other.layers[i].weight;
    layers[i].bias += other.layers[i].bias;
  }
  return *this;
}

Params& Params::operator*=(double c) {
  for (auto& l : layers) {
    l.weight *= c;
    l.bias *= c;
  }
  return *this;
}

double& Params::at(Index flat) {
  for (auto& l : layers) {
    if (flat < l.weight.size()) return l.weight.data()[flat];
    flat -= l.weight.size();
    if (flat < l.bias.size()) return l.bias.data()[flat];
    flat -= l.bias.size();
  }
  throw ParameterError("Params::at: index out of range");
}

double Params::at(Index flat) const {
  return const_cast<Params*>(this)->at(flat);
}

bool operator==(const Params& a, const Params& b) {
  if (!a.same_shape(b)) return false;
  for (std::size_t i = 0; i < a.layers.size(); ++i) {
    if (a.layers[i].weight != b.layers[i].weight ||
        a.layers[i].bias != b.layers[i].bias) {
      return false;
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// Mlp

Mlp::Mlp(const std::vector<int>& sizes, Activation activation, Rng& rng,
         bool zero_head)
    : activation_(activation) {
  if (sizes.size() < 2) throw ParameterError("Mlp needs at least two sizes");
  for (int s : sizes) {
    if (s <= 0) throw ParameterError("Mlp layer sizes must be positive");
  }
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
    const int in = sizes[i];
    const int out = sizes[i + 1];
    const double bound = std::sqrt(1.0 / in);
    Layer layer{Matrix(out, in), Vector(out)};
    for (Index c = 0; c < in; ++c) {
      for (Index r = 0; r < out; ++r) layer.weight(r, c) = bound * unit(rng);
    }
    for (Index r = 0; r < out; ++r) layer.bias(r) = bound * unit(rng);
    params_.layers.push_back(std::move(layer));
  }
  if (zero_head) {
    params_.layers.back().weight.setZero();
    params_.layers.back().bias.setZero();
  }
  params_.round_to_float();
}

Index Mlp::input_dim() const { return params_.layers.front().weight.cols(); }
Index Mlp::output_dim() const { return params_.layers.back().weight.rows(); }

std::vector<int> Mlp::sizes() const {
  std::vector<int> out;
  out.push_back(static_cast<int>(input_dim()));
  for (const auto& l : params_.layers) {
    out.push_back(static_cast<int>(l.weight.rows()));
  }
  return out;
}

Matrix Mlp::forward(const Matrix& x) const {
  if (x.rows() != input_dim()) {
    throw ShapeError("Mlp::forward: expected " + std::to_string(input_dim()) +
                     " input rows, got " + std::to_string(x.rows()));
  }
  Matrix h = x;
  Matrix z;
  const std::size_t n = params_.layers.size();
  for (std::size_t i = 0; i < n; ++i) {
    const auto& l = params_.layers[i];
    z.noalias() = l.weight * h;
    z.colwise() += l.bias;
    require_finite(z, i, "forward");
    if (i + 1 < n) {
      apply_activation(activation_, z, h);
    } else {
      h.swap(z);
    }
  }
  return h;
}

Matrix Mlp::forward(const Matrix& x, MlpTape& tape) const {
  if (x.rows() != input_dim()) {
    throw ShapeError("Mlp::forward: expected " + std::to_string(input_dim()) +
                     " input rows, got " + std::to_string(x.rows()));
  }
  const std::size_t n = params_.layers.size();
  tape.inputs.resize(n);
  tape.preactivations.resize(n - 1);
  tape.inputs[0] = x;
  Matrix z;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& l = params_.layers[i];
    z.noalias() = l.weight * tape.inputs[i];
    z.colwise() += l.bias;
    require_finite(z, i, "forward");
    if (i + 1 < n) {
      apply_activation(activation_, z, tape.inputs[i + 1]);
      tape.preactivations[i].swap(z);
    }
  }
  return z;
}

Matrix Mlp::backward(const MlpTape& tape, const Matrix& d_out,
                     Params* grad) const {
  const std::size_t n = params_.layers.size();
  if (tape.inputs.size() != n) throw ShapeError("Mlp::backward: stale tape");
  if (d_out.rows() != output_dim() || d_out.cols() != tape.inputs[0].cols()) {
    throw ShapeError("Mlp::backward: output gradient shape mismatch");
  }
  if (grad != nullptr && !grad->same_shape(params_)) {
    throw ShapeError("Mlp::backward: gradient buffer shape mismatch");
  }
  Matrix d = d_out;
  Matrix d_in;
  for (std::size_t step = 0; step < n; ++step) {
    const std::size_t i = n - 1 - step;
    const auto& l = params_.layers[i];
    require_finite(d, i, "backward");
    if (grad != nullptr) {
      grad->layers[i].weight.noalias() += d * tape.inputs[i].transpose();
      grad->layers[i].bias += d.rowwise().sum();
    }
    d_in.noalias() = l.weight.transpose() * d;
    if (i > 0) {
      apply_activation_grad(activation_, tape.preactivations[i - 1], d_in);
    }
    d.swap(d_in);
  }
  return d;
}

}  // namespace edp
