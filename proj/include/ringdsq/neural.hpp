#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "ringdsq/rng.hpp"

namespace ringdsq::nn {

/// One dense layer; `weight` is row-major out x in.
struct LayerParams {
  int in = 0;
  int out = 0;
  std::vector<double> weight;
  std::vector<double> bias;

  LayerParams() = default;
  LayerParams(int in_, int out_)
      : in(in_), out(out_), weight(static_cast<std::size_t>(in_) * out_, 0.0),
        bias(out_, 0.0) {}
};

/// Dense stack with rectifier hidden units and an identity output layer.
struct Mlp {
  std::vector<LayerParams> layers;

  int input_size() const { return layers.empty() ? 0 : layers.front().in; }
  int output_size() const { return layers.empty() ? 0 : layers.back().out; }

  std::size_t param_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.weight.size() + l.bias.size();
    return n;
  }
};

/// Builds an all-zero network from a size chain, e.g. {3, 64, 32}.
inline Mlp make_mlp(std::span<const int> sizes) {
  if (sizes.size() < 2) throw std::invalid_argument("mlp needs at least one layer");
  Mlp net;
  net.layers.reserve(sizes.size() - 1);
  for (std::size_t k = 0; k + 1 < sizes.size(); ++k)
    net.layers.emplace_back(sizes[k], sizes[k + 1]);
  return net;
}

inline Mlp make_mlp(std::initializer_list<int> sizes) {
  return make_mlp(std::span<const int>(sizes.begin(), sizes.size()));
}

/// Glorot-uniform weights in +-sqrt(6/(fan_in+fan_out)), zero biases.
inline void init_glorot_uniform(Mlp& net, Rng& rng) {
  for (auto& l : net.layers) {
    const double bound = std::sqrt(6.0 / (l.in + l.out));
    for (double& w : l.weight) w = rng.uniform(-bound, bound);
    for (double& b : l.bias) b = 0.0;
  }
}

/// Forward-pass bookkeeping for backprop: the input copy and each layer's
/// pre- and post-activation. Buffers grow once and are reused across calls.
struct MlpCache {
  std::vector<std::vector<double>> pre;
  std::vector<std::vector<double>> post;  // post[0] = input, post[k+1] = layer k output

  const std::vector<double>& output() const { return post.back(); }
};

inline const std::vector<double>& mlp_forward(const Mlp& net,
                                              std::span<const double> input,
                                              MlpCache& cache) {
  if (static_cast<int>(input.size()) != net.input_size())
    throw std::invalid_argument("mlp_forward: input width mismatch");
  const std::size_t depth = net.layers.size();
  cache.pre.resize(depth);
  cache.post.resize(depth + 1);
  cache.post[0].assign(input.begin(), input.end());

  for (std::size_t k = 0; k < depth; ++k) {
    const LayerParams& l = net.layers[k];
    cache.pre[k].resize(l.out);
    cache.post[k + 1].resize(l.out);
    const double* __restrict x = cache.post[k].data();
    double* __restrict z = cache.pre[k].data();
    double* __restrict y = cache.post[k + 1].data();
    const bool hidden = k + 1 < depth;
    for (int o = 0; o < l.out; ++o) {
      const double* __restrict row =
          l.weight.data() + static_cast<std::size_t>(o) * l.in;
      // four independent accumulators in a fixed order: deterministic, and the
      // dot product is not serialized on one dependency chain
      double a0 = 0, a1 = 0, a2 = 0, a3 = 0;
      int i = 0;
      for (; i + 4 <= l.in; i += 4) {
        a0 += row[i] * x[i];
        a1 += row[i + 1] * x[i + 1];
        a2 += row[i + 2] * x[i + 2];
        a3 += row[i + 3] * x[i + 3];
      }
      double acc = l.bias[o];
      for (; i < l.in; ++i) acc += row[i] * x[i];
      acc += (a0 + a2) + (a1 + a3);
      z[o] = acc;
      y[o] = hidden && acc < 0 ? 0.0 : acc;
    }
  }
  return cache.post.back();
}

inline std::vector<double> mlp_forward(const Mlp& net, std::span<const double> input) {
  MlpCache cache;
  return mlp_forward(net, input, cache);
}

/// Parameter gradients shaped like the network; accumulated across calls.
struct MlpGrads {
  std::vector<LayerParams> layers;

  MlpGrads() = default;
  explicit MlpGrads(const Mlp& net) { match(net); }

  void match(const Mlp& net) {
    layers.clear();
    layers.reserve(net.layers.size());
    for (const auto& l : net.layers) layers.emplace_back(l.in, l.out);
  }

  void zero() {
    for (auto& l : layers) {
      std::fill(l.weight.begin(), l.weight.end(), 0.0);
      std::fill(l.bias.begin(), l.bias.end(), 0.0);
    }
  }
};

/// Reverse-mode gradients of the forward map. Accumulates parameter gradients
/// into `grads`; when `input_grad` is given it receives d(loss)/d(input).
/// `scratch` carries the backpropagated signal between layers.
inline void mlp_backward(const Mlp& net, const MlpCache& cache,
                         std::span<const double> output_grad, MlpGrads& grads,
                         std::vector<double>* input_grad = nullptr,
                         std::vector<double>* scratch = nullptr) {
  const std::size_t depth = net.layers.size();
  if (grads.layers.size() != depth)
    throw std::invalid_argument("mlp_backward: gradient shape mismatch");
  if (static_cast<int>(output_grad.size()) != net.output_size())
    throw std::invalid_argument("mlp_backward: output gradient width mismatch");

  std::vector<double> local;
  std::vector<double>& g = scratch ? *scratch : local;
  g.assign(output_grad.begin(), output_grad.end());

  std::vector<double> g_prev;
  for (std::size_t k = depth; k-- > 0;) {
    const LayerParams& l = net.layers[k];
    LayerParams& gl = grads.layers[k];
    const std::vector<double>& x = cache.post[k];
    const std::vector<double>& z = cache.pre[k];

    if (k + 1 < depth)  // rectifier derivative on hidden layers
      for (int o = 0; o < l.out; ++o)
        if (z[o] < 0) g[o] = 0.0;

    const bool need_input = k > 0 || input_grad != nullptr;
    if (need_input) {
      g_prev.assign(l.in, 0.0);
      for (int o = 0; o < l.out; ++o) {
        const double go = g[o];
        if (go == 0.0) continue;
        const double* row = l.weight.data() + static_cast<std::size_t>(o) * l.in;
        double* wrow = gl.weight.data() + static_cast<std::size_t>(o) * l.in;
        gl.bias[o] += go;
        for (int i = 0; i < l.in; ++i) {
          wrow[i] += go * x[i];
          g_prev[i] += row[i] * go;
        }
      }
    } else {
      for (int o = 0; o < l.out; ++o) {
        const double go = g[o];
        if (go == 0.0) continue;
        double* wrow = gl.weight.data() + static_cast<std::size_t>(o) * l.in;
        gl.bias[o] += go;
        for (int i = 0; i < l.in; ++i) wrow[i] += go * x[i];
      }
    }
    if (k == 0) {
      if (input_grad) *input_grad = g_prev;
    } else {
      g.swap(g_prev);
    }
  }
}

struct AdamParams {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First/second moment accumulators shaped like the network.
struct AdamState {
  AdamParams hp{};
  long t = 0;
  std::vector<LayerParams> m, v;

  AdamState() = default;
  explicit AdamState(const Mlp& net, AdamParams hp_ = {}) : hp(hp_) { match(net); }

  void match(const Mlp& net) {
    m.clear();
    v.clear();
    for (const auto& l : net.layers) {
      m.emplace_back(l.in, l.out);
      v.emplace_back(l.in, l.out);
    }
  }
};

namespace detail {

inline void adam_update(std::span<double> theta, std::span<const double> grad,
                        std::span<double> m, std::span<double> v,
                        const AdamParams& hp, double bc1, double bc2) {
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double g = grad[i];
    m[i] = hp.beta1 * m[i] + (1.0 - hp.beta1) * g;
    v[i] = hp.beta2 * v[i] + (1.0 - hp.beta2) * g * g;
    const double m_hat = m[i] / bc1;
    const double v_hat = v[i] / bc2;
    theta[i] -= hp.lr * m_hat / (std::sqrt(v_hat) + hp.eps);
  }
}

}  // namespace detail

/// One bias-corrected Adam step over every parameter of the network.
inline void adam_step(Mlp& net, const MlpGrads& grads, AdamState& state) {
  if (grads.layers.size() != net.layers.size() || state.m.size() != net.layers.size())
    throw std::invalid_argument("adam_step: shape mismatch");
  ++state.t;
  const double bc1 = 1.0 - std::pow(state.hp.beta1, state.t);
  const double bc2 = 1.0 - std::pow(state.hp.beta2, state.t);
  for (std::size_t k = 0; k < net.layers.size(); ++k) {
    detail::adam_update(net.layers[k].weight, grads.layers[k].weight,
                        state.m[k].weight, state.v[k].weight, state.hp, bc1, bc2);
    detail::adam_update(net.layers[k].bias, grads.layers[k].bias,
                        state.m[k].bias, state.v[k].bias, state.hp, bc1, bc2);
  }
}

/// Online encoder phi, online Q head rho, and their target copies.
struct NetworkPair {
  Mlp phi, rho;
  Mlp phi_target, rho_target;
  double tau = 1e-2;
};

namespace detail {

inline void blend(Mlp& target, const Mlp& online, double tau) {
  for (std::size_t k = 0; k < target.layers.size(); ++k) {
    auto& t = target.layers[k];
    const auto& o = online.layers[k];
    for (std::size_t i = 0; i < t.weight.size(); ++i)
      t.weight[i] = tau * o.weight[i] + (1.0 - tau) * t.weight[i];
    for (std::size_t i = 0; i < t.bias.size(); ++i)
      t.bias[i] = tau * o.bias[i] + (1.0 - tau) * t.bias[i];
  }
}

}  // namespace detail

/// target <- tau * online + (1 - tau) * target, elementwise.
inline void soft_update(NetworkPair& pair) {
  detail::blend(pair.phi_target, pair.phi, pair.tau);
  detail::blend(pair.rho_target, pair.rho, pair.tau);
}

/// Periodic full copy, the alternative target rule.
inline void hard_update(NetworkPair& pair) {
  pair.phi_target = pair.phi;
  pair.rho_target = pair.rho;
}

}  // namespace ringdsq::nn
