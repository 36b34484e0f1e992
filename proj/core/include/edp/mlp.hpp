#ifndef EDP_MLP_HPP_
#define EDP_MLP_HPP_

#include <span>
#include <string_view>
#include <vector>

#include "edp/types.hpp"

namespace edp {

enum class Activation { kMish, kRelu };

Activation parse_activation(std::string_view name);
std::string_view to_string(Activation activation);

// x * tanh(softplus(x)), stable for large |x|.
double mish(double x);
double mish_derivative(double x);

// Transformer-style timestep embedding, interleaved sin/cos:
// e[2i] = sin(k / 10000^(2i/dim)), e[2i+1] = cos(k / 10000^(2i/dim)).
// k may be fractional (the ODE sampler evaluates between integer steps).
Vector sinusoidal_embed(double k, int dim);

struct Layer {
  Matrix weight;  // out x in
  Vector bias;    // out
};

/// A stack of affine layers. The same type carries parameters, gradients and
/// optimizer moments so they can be combined elementwise.
struct Params {
  std::vector<Layer> layers;

  Params zeros_like() const;
  bool same_shape(const Params& other) const;
  Index size() const;  // total scalar count
  double squared_norm() const;
  bool all_finite() const;
  void set_zero();
  void round_to_float();

  Params& operator+=(const Params& other);
  Params& operator*=(double c);

  // Flat indexed access, weights (column-major) then bias, layer by layer.
  // Used by finite-difference tests and the checkpoint writer.
  double& at(Index flat);
  double at(Index flat) const;
};

using Gradient = Params;

bool operator==(const Params& a, const Params& b);

/// Activations cached by a forward pass for the matching backward pass.
struct MlpTape {
  std::vector<Matrix> inputs;       // input to each layer
  std::vector<Matrix> preactivations;  // W h + b of each hidden layer
};

/// Multilayer perceptron: hidden layers use the chosen activation, the output
/// layer is linear.
class Mlp {
 public:
  Mlp() = default;
  // sizes = {in, hidden..., out}. Weights and biases are uniform in
  // +-sqrt(1/fan_in); zero_head zeroes the output layer.
  Mlp(const std::vector<int>& sizes, Activation activation, Rng& rng,
      bool zero_head = false);

  Index input_dim() const;
  Index output_dim() const;
  Activation activation() const { return activation_; }
  std::vector<int> sizes() const;

  const Params& params() const { return params_; }
  Params& params() { return params_; }

  Matrix forward(const Matrix& x) const;
  Matrix forward(const Matrix& x, MlpTape& tape) const;

  // Reverse-mode pass. Accumulates parameter gradients into *grad (skipped when
  // grad is null) and returns the gradient with respect to the input.
  Matrix backward(const MlpTape& tape, const Matrix& d_out, Params* grad) const;

 private:
  Params params_;
  Activation activation_ = Activation::kMish;
};

}  // namespace edp

#endif  // EDP_MLP_HPP_
