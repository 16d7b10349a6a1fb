#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "scatterforge/linalg.hpp"
#include "scatterforge/rng.hpp"

namespace scatterforge {

struct Layer {
  Matrix weight;  // out x in
  std::vector<double> bias;  // out

  friend bool operator==(const Layer&, const Layer&) = default;
};

// Multilayer perceptron f_theta. ReLU on every hidden layer, identity on the
// last; the last layer's outputs are both the logits and the features used
// for feature matching.
struct MlpParams {
  std::vector<Layer> layers;

  // dims = {input, hidden..., classes}. Weights uniform in +-1/sqrt(fan_in).
  static MlpParams init(std::span<const std::size_t> dims, Rng& rng);
  // Same shape as `like`, every entry zero.
  static MlpParams zeros_like(const MlpParams& like);

  std::size_t input_dim() const;
  std::size_t classes() const;
  std::vector<std::size_t> layer_dims() const;

  // Throws ContractError if the layer chain is inconsistent.
  void validate() const;

  friend bool operator==(const MlpParams&, const MlpParams&) = default;
};

// Gradients share the parameter layout.
using ParamGrads = MlpParams;

struct LabeledBatch {
  Matrix inputs;  // n x d, entries in [0, 1]
  std::vector<int> labels;

  std::size_t size() const { return inputs.rows(); }
  void validate(std::size_t classes) const;
};

struct ForwardTrace {
  // activations[0] is the input; activations[k] feeds layer k.
  std::vector<Matrix> activations;
  // pre_activations[k] is layer k's affine output.
  std::vector<Matrix> pre_activations;
};

struct ForwardResult {
  Matrix logits;
  ForwardTrace trace;
};

struct LossAndGrad {
  double loss = 0.0;
  Matrix dlogits;
};

struct Backward {
  ParamGrads params;
  Matrix inputs;
};

ForwardResult forward(const MlpParams& params, const Matrix& inputs);
Matrix logits(const MlpParams& params, const Matrix& inputs);

// Mean cross-entropy against targets (1 - s) * onehot(y) + s / C.
LossAndGrad cross_entropy(const Matrix& logits, std::span<const int> labels, double smoothing);

// Backpropagates an upstream logits-gradient through a recorded pass.
Backward backward(const MlpParams& params, const ForwardTrace& trace, const Matrix& dlogits);

struct ParamGradResult {
  double loss = 0.0;
  ParamGrads grads;
};

// Gradient of the mean smoothed cross-entropy over the batch.
ParamGradResult grad_params(const MlpParams& params, const LabeledBatch& batch, double smoothing);

// Input gradient for an arbitrary upstream logits-gradient.
Matrix grad_input(const MlpParams& params, const Matrix& inputs, const Matrix& dlogits);
// Input gradient of the mean smoothed cross-entropy.
Matrix grad_input(const MlpParams& params, const Matrix& inputs, std::span<const int> labels,
                  double smoothing = 0.0);

// Row-wise argmax, ties to the lowest class index.
std::vector<int> predict(const MlpParams& params, const Matrix& inputs);
std::vector<int> argmax_rows(const Matrix& m);

}  // namespace scatterforge
