#pragma once

// Fully connected networks with hand-written reverse mode.
// Flat parameter order: layer by layer, weight (row-major) then bias.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "sonode/errors.hpp"
#include "sonode/tensor.hpp"

namespace sonode {

enum class Activation { none, elu, tanh };

inline double activate(Activation a, double x) {
  switch (a) {
    case Activation::elu: return elu(x);
    case Activation::tanh: return tanh_act(x);
    default: return x;
  }
}

inline double activate_grad(Activation a, double x) {
  switch (a) {
    case Activation::elu: return elu_grad(x);
    case Activation::tanh: return tanh_grad(x);
    default: return 1.0;
  }
}

inline std::string to_string(Activation a) {
  switch (a) {
    case Activation::elu: return "elu";
    case Activation::tanh: return "tanh";
    default: return "none";
  }
}

inline Activation activation_from_string(const std::string& s) {
  if (s == "elu") return Activation::elu;
  if (s == "tanh") return Activation::tanh;
  if (s == "none") return Activation::none;
  throw ConfigError("unknown activation '" + s + "'");
}

struct Layer {
  Tensor weight;  // out x in
  Tensor bias;    // out
};

struct MlpParams {
  std::vector<Layer> layers;
  Activation hidden_activation = Activation::elu;
  Activation output_activation = Activation::none;

  std::size_t in_dim() const { return layers.empty() ? 0 : layers.front().weight.cols(); }
  std::size_t out_dim() const { return layers.empty() ? 0 : layers.back().weight.rows(); }

  std::size_t param_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.weight.size() + l.bias.size();
    return n;
  }

  Activation activation_of(std::size_t layer) const {
    return layer + 1 == layers.size() ? output_activation : hidden_activation;
  }

  std::vector<double> flatten() const {
    std::vector<double> out;
    out.reserve(param_count());
    for (const auto& l : layers) {
      out.insert(out.end(), l.weight.values().begin(), l.weight.values().end());
      out.insert(out.end(), l.bias.values().begin(), l.bias.values().end());
    }
    return out;
  }

  void unflatten(std::span<const double> flat) {
    if (flat.size() != param_count()) {
      throw DimensionError("mlp expects " + std::to_string(param_count()) + " parameters, got " +
                           std::to_string(flat.size()));
    }
    std::size_t k = 0;
    for (auto& l : layers) {
      for (auto& w : l.weight.values()) w = flat[k++];
      for (auto& b : l.bias.values()) b = flat[k++];
    }
  }

  void validate() const {
    if (layers.empty()) throw DimensionError("mlp has no layers");
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const auto& l = layers[i];
      if (l.weight.rank() != 2 || l.bias.size() != l.weight.rows())
        throw DimensionError("mlp layer " + std::to_string(i) + " has inconsistent bias");
      if (i > 0 && l.weight.cols() != layers[i - 1].weight.rows())
        throw DimensionError("mlp layer " + std::to_string(i) + " does not chain");
    }
  }

  /// Layer widths [in, h1, ..., out], weights uniform in +-1/sqrt(fan_in), zero biases.
  static MlpParams init(const std::vector<std::size_t>& sizes, Activation hidden, Activation output,
                        std::mt19937_64& rng) {
    if (sizes.size() < 2) throw DimensionError("mlp needs at least input and output sizes");
    MlpParams p;
    p.hidden_activation = hidden;
    p.output_activation = output;
    for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
      const std::size_t in = sizes[i];
      const std::size_t out = sizes[i + 1];
      const double bound = in == 0 ? 0.0 : 1.0 / std::sqrt(static_cast<double>(in));
      std::uniform_real_distribution<double> dist(-bound, bound);
      Layer l{Tensor({out, in}), Tensor({out})};
      for (auto& w : l.weight.values()) w = dist(rng);
      p.layers.push_back(std::move(l));
    }
    return p;
  }

  static MlpParams zeros(const std::vector<std::size_t>& sizes, Activation hidden, Activation output) {
    if (sizes.size() < 2) throw DimensionError("mlp needs at least input and output sizes");
    MlpParams p;
    p.hidden_activation = hidden;
    p.output_activation = output;
    for (std::size_t i = 0; i + 1 < sizes.size(); ++i)
      p.layers.push_back({Tensor({sizes[i + 1], sizes[i]}), Tensor({sizes[i + 1]})});
    return p;
  }

  /// Single affine layer without activation.
  static MlpParams affine(Tensor weight, Tensor bias) {
    MlpParams p;
    p.hidden_activation = Activation::none;
    p.output_activation = Activation::none;
    p.layers.push_back({std::move(weight), std::move(bias)});
    p.validate();
    return p;
  }
};

/// Pre- and post-activation values of a batched forward pass, kept for the
/// reverse sweep. post[0] is the input.
struct MlpTape {
  std::size_t batch = 0;
  std::vector<std::vector<double>> pre;
  std::vector<std::vector<double>> post;
};

namespace detail {

inline void mlp_forward_batch(const MlpParams& p, std::span<const double> input, std::size_t batch,
                              MlpTape& tape) {
  const std::size_t n = p.layers.size();
  tape.batch = batch;
  tape.pre.resize(n);
  tape.post.resize(n + 1);
  tape.post[0].assign(input.begin(), input.end());
  for (std::size_t li = 0; li < n; ++li) {
    const auto& l = p.layers[li];
    const std::size_t in = l.weight.cols();
    const std::size_t out = l.weight.rows();
    const Activation act = p.activation_of(li);
    const auto& x = tape.post[li];
    auto& z = tape.pre[li];
    auto& y = tape.post[li + 1];
    z.resize(batch * out);
    y.resize(batch * out);
    const double* w = l.weight.values().data();
    const double* b = l.bias.values().data();
    for (std::size_t s = 0; s < batch; ++s) {
      const double* xs = x.data() + s * in;
      for (std::size_t o = 0; o < out; ++o) {
        const double* wr = w + o * in;
        double acc = b[o];
        for (std::size_t i = 0; i < in; ++i) acc += wr[i] * xs[i];
        z[s * out + o] = acc;
        y[s * out + o] = activate(act, acc);
      }
    }
  }
}

/// Adds cotangent-weighted parameter gradients into grad_params (may be
/// empty to skip) and writes the input cotangent into grad_input (may be
/// empty to skip).
inline void mlp_vjp_batch(const MlpParams& p, const MlpTape& tape, std::span<const double> cotangent,
                          std::span<double> grad_input, std::span<double> grad_params) {
  const std::size_t n = p.layers.size();
  const std::size_t batch = tape.batch;
  std::vector<double> g(cotangent.begin(), cotangent.end());
  std::vector<double> gnext;
  // Offsets of each layer inside the flat parameter vector.
  std::vector<std::size_t> offset(n, 0);
  for (std::size_t li = 1; li < n; ++li)
    offset[li] = offset[li - 1] + p.layers[li - 1].weight.size() + p.layers[li - 1].bias.size();

  for (std::size_t li = n; li-- > 0;) {
    const auto& l = p.layers[li];
    const std::size_t in = l.weight.cols();
    const std::size_t out = l.weight.rows();
    const Activation act = p.activation_of(li);
    const auto& z = tape.pre[li];
    if (act != Activation::none)
      for (std::size_t k = 0; k < batch * out; ++k) g[k] *= activate_grad(act, z[k]);
    const auto& x = tape.post[li];
    if (!grad_params.empty()) {
      double* gw = grad_params.data() + offset[li];
      double* gb = gw + out * in;
      for (std::size_t s = 0; s < batch; ++s) {
        const double* xs = x.data() + s * in;
        for (std::size_t o = 0; o < out; ++o) {
          const double go = g[s * out + o];
          if (go == 0.0) continue;
          gb[o] += go;
          double* gwr = gw + o * in;
          for (std::size_t i = 0; i < in; ++i) gwr[i] += go * xs[i];
        }
      }
    }
    if (li == 0 && grad_input.empty()) break;
    gnext.assign(batch * in, 0.0);
    const double* w = l.weight.values().data();
    for (std::size_t s = 0; s < batch; ++s)
      for (std::size_t o = 0; o < out; ++o) {
        const double go = g[s * out + o];
        if (go == 0.0) continue;
        const double* wr = w + o * in;
        double* gn = gnext.data() + s * in;
        for (std::size_t i = 0; i < in; ++i) gn[i] += go * wr[i];
      }
    g.swap(gnext);
  }
  if (!grad_input.empty()) std::copy(g.begin(), g.end(), grad_input.begin());
}

inline std::size_t batch_of(const MlpParams& p, const Tensor& input) {
  const std::size_t in = p.in_dim();
  if (input.rank() == 1) {
    if (input.size() != in)
      throw DimensionError("mlp input has " + std::to_string(input.size()) + " entries, expected " +
                           std::to_string(in));
    return 1;
  }
  if (input.rank() == 2 && input.shape()[1] == in) return input.shape()[0];
  throw DimensionError("mlp input shape " + Tensor::shape_string(input.shape()) + " does not match width " +
                       std::to_string(in));
}

}  // namespace detail

/// Evaluates the network on a single input [in] or a batch [B x in].
inline Tensor mlp_forward(const MlpParams& p, const Tensor& input) {
  p.validate();
  const std::size_t batch = detail::batch_of(p, input);
  MlpTape tape;
  detail::mlp_forward_batch(p, input.data(), batch, tape);
  std::vector<std::size_t> shape =
      input.rank() == 1 ? std::vector<std::size_t>{p.out_dim()} : std::vector<std::size_t>{batch, p.out_dim()};
  return Tensor(std::move(shape), std::move(tape.post.back()));
}

struct MlpVjp {
  Tensor grad_input;
  Tensor grad_params;
};

inline MlpVjp mlp_vjp(const MlpParams& p, const Tensor& input, const Tensor& cotangent) {
  p.validate();
  const std::size_t batch = detail::batch_of(p, input);
  if (cotangent.size() != batch * p.out_dim())
    throw DimensionError("mlp cotangent has " + std::to_string(cotangent.size()) + " entries, expected " +
                         std::to_string(batch * p.out_dim()));
  MlpTape tape;
  detail::mlp_forward_batch(p, input.data(), batch, tape);
  MlpVjp r{Tensor(input.shape()), Tensor({p.param_count()})};
  detail::mlp_vjp_batch(p, tape, cotangent.data(), r.grad_input.data(), r.grad_params.data());
  return r;
}

}  // namespace sonode
