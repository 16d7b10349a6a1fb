#include "scatterforge/model.hpp"

#include <cmath>
#include <string>

#include "scatterforge/errors.hpp"

namespace scatterforge {

MlpParams MlpParams::init(std::span<const std::size_t> dims, Rng& rng) {
  require(dims.size() >= 2, "MlpParams::init: need at least input and output dims");
  MlpParams p;
  for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
    const std::size_t in = dims[k];
    const std::size_t out = dims[k + 1];
    require(in > 0 && out > 0, "MlpParams::init: zero-width layer");
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    Layer layer;
    layer.weight = uniform(rng, out, in, -bound, bound);
    layer.bias.resize(out);
    for (double& b : layer.bias) b = rng.uniform(-bound, bound);
    p.layers.push_back(std::move(layer));
  }
  return p;
}

MlpParams MlpParams::zeros_like(const MlpParams& like) {
  MlpParams p;
  for (const auto& l : like.layers)
    p.layers.push_back({Matrix(l.weight.rows(), l.weight.cols()), std::vector<double>(l.bias.size(), 0.0)});
  return p;
}

std::size_t MlpParams::input_dim() const { return layers.empty() ? 0 : layers.front().weight.cols(); }

std::size_t MlpParams::classes() const { return layers.empty() ? 0 : layers.back().weight.rows(); }

std::vector<std::size_t> MlpParams::layer_dims() const {
  std::vector<std::size_t> dims;
  if (layers.empty()) return dims;
  dims.push_back(input_dim());
  for (const auto& l : layers) dims.push_back(l.weight.rows());
  return dims;
}

void MlpParams::validate() const {
  require(!layers.empty(), "MlpParams: no layers");
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const auto& l = layers[k];
    require(l.bias.size() == l.weight.rows(),
            "MlpParams: layer " + std::to_string(k) + " bias length does not match output dim");
    if (k + 1 < layers.size())
      require(layers[k + 1].weight.cols() == l.weight.rows(),
              "MlpParams: layer " + std::to_string(k) + " output dim does not chain into layer " +
                  std::to_string(k + 1));
  }
}

void LabeledBatch::validate(std::size_t classes) const {
  require(labels.size() == inputs.rows(), "LabeledBatch: label count does not match input rows");
  for (double v : inputs.data()) require(v >= 0.0 && v <= 1.0, "LabeledBatch: input outside [0,1]");
  for (int y : labels)
    require(y >= 0 && static_cast<std::size_t>(y) < classes, "LabeledBatch: label out of range");
}

ForwardResult forward(const MlpParams& params, const Matrix& inputs) {
  require(!params.layers.empty(), "forward: empty network");
  require(inputs.cols() == params.input_dim(),
          "forward: input width " + std::to_string(inputs.cols()) + " does not match network input dim " +
              std::to_string(params.input_dim()));
  ForwardResult result;
  auto& trace = result.trace;
  trace.activations.push_back(inputs);
  for (std::size_t k = 0; k < params.layers.size(); ++k) {
    const auto& layer = params.layers[k];
    Matrix z = matmul_nt(trace.activations.back(), layer.weight);
    for (std::size_t i = 0; i < z.rows(); ++i) {
      auto r = z.row(i);
      for (std::size_t j = 0; j < r.size(); ++j) r[j] += layer.bias[j];
    }
    trace.pre_activations.push_back(z);
    if (k + 1 < params.layers.size()) {
      for (double& v : z.data()) v = v > 0.0 ? v : 0.0;
      trace.activations.push_back(std::move(z));
    } else {
      result.logits = std::move(z);
    }
  }
  return result;
}

Matrix logits(const MlpParams& params, const Matrix& inputs) { return forward(params, inputs).logits; }

LossAndGrad cross_entropy(const Matrix& logits, std::span<const int> labels, double smoothing) {
  require(labels.size() == logits.rows(), "cross_entropy: label count does not match logits rows");
  require(smoothing >= 0.0 && smoothing <= 1.0, "cross_entropy: smoothing must lie in [0,1]");
  const std::size_t n = logits.rows();
  const std::size_t classes = logits.cols();
  require(classes > 0, "cross_entropy: no classes");
  const double off = smoothing / static_cast<double>(classes);
  const double on = (1.0 - smoothing) + off;

  LossAndGrad out{0.0, Matrix(n, classes)};
  if (n == 0) return out;
  const Matrix logp = row_log_softmax(logits);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int y = labels[i];
    require(y >= 0 && static_cast<std::size_t>(y) < classes, "cross_entropy: label out of range");
    double sample = 0.0;
    for (std::size_t c = 0; c < classes; ++c) {
      const double t = c == static_cast<std::size_t>(y) ? on : off;
      if (t != 0.0) sample -= t * logp(i, c);
      out.dlogits(i, c) = (std::exp(logp(i, c)) - t) * inv_n;
    }
    out.loss += sample;
  }
  out.loss *= inv_n;
  return out;
}

Backward backward(const MlpParams& params, const ForwardTrace& trace, const Matrix& dlogits) {
  const std::size_t depth = params.layers.size();
  require(trace.pre_activations.size() == depth && trace.activations.size() == depth,
          "backward: trace does not match network depth");
  require(dlogits.rows() == trace.activations.front().rows() && dlogits.cols() == params.classes(),
          "backward: upstream gradient shape mismatch");
  Backward out{MlpParams::zeros_like(params), Matrix()};
  Matrix delta = dlogits;
  for (std::size_t k = depth; k-- > 0;) {
    const auto& layer = params.layers[k];
    auto& g = out.params.layers[k];
    g.weight = matmul_tn(delta, trace.activations[k]);
    g.bias = col_sums(delta);
    Matrix upstream = matmul(delta, layer.weight);
    if (k > 0) {
      const Matrix& z = trace.pre_activations[k - 1];
      for (std::size_t i = 0; i < upstream.size(); ++i)
        if (!(z.data()[i] > 0.0)) upstream.data()[i] = 0.0;
    }
    delta = std::move(upstream);
  }
  out.inputs = std::move(delta);
  return out;
}

ParamGradResult grad_params(const MlpParams& params, const LabeledBatch& batch, double smoothing) {
  auto fwd = forward(params, batch.inputs);
  auto lg = cross_entropy(fwd.logits, batch.labels, smoothing);
  return {lg.loss, backward(params, fwd.trace, lg.dlogits).params};
}

Matrix grad_input(const MlpParams& params, const Matrix& inputs, const Matrix& dlogits) {
  auto fwd = forward(params, inputs);
  return backward(params, fwd.trace, dlogits).inputs;
}

Matrix grad_input(const MlpParams& params, const Matrix& inputs, std::span<const int> labels, double smoothing) {
  auto fwd = forward(params, inputs);
  auto lg = cross_entropy(fwd.logits, labels, smoothing);
  return backward(params, fwd.trace, lg.dlogits).inputs;
}

std::vector<int> argmax_rows(const Matrix& m) {
  std::vector<int> out(m.rows(), 0);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto r = m.row(i);
    std::size_t best = 0;
    for (std::size_t j = 1; j < r.size(); ++j)
      if (r[j] > r[best]) best = j;
    out[i] = static_cast<int>(best);
  }
  return out;
}

std::vector<int> predict(const MlpParams& params, const Matrix& inputs) {
  return argmax_rows(logits(params, inputs));
}

}  // namespace scatterforge
