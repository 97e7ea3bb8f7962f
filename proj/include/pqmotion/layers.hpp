#pragma once

#include <string>
#include <vector>

#include "pqmotion/ops.hpp"
#include "pqmotion/rng.hpp"
#include "pqmotion/tensor.hpp"

namespace pqmotion {

// Named views over a model's state: trainable parameters (autodiff leaves)
// and non-trainable buffers (running stats, codebooks, EMA accumulators).
template <typename S>
struct ParamRegistry {
  std::vector<std::pair<std::string, Var<S>>> trainable;
  std::vector<std::pair<std::string, MatX<S>*>> buffers;

  void add(const std::string& name, const Var<S>& v) {
    trainable.emplace_back(name, v);
  }
  void add_buffer(const std::string& name, MatX<S>* m) {
    buffers.emplace_back(name, m);
  }

  std::vector<Var<S>> trainable_vars() const {
    std::vector<Var<S>> out;
    out.reserve(trainable.size());
    for (const auto& [name, v] : trainable) out.push_back(v);
    return out;
  }

  void set_trainable(bool on) {
    for (auto& [name, v] : trainable) v.set_requires_grad(on);
  }
};

template <typename S>
Var<S> uniform_leaf(Eigen::Index rows, Eigen::Index cols, S bound, Rng& rng) {
  MatX<S> m(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index r = 0; r < rows; ++r)
      m(r, c) = static_cast<S>(rng.uniform(-double(bound), double(bound)));
  return Var<S>::leaf(std::move(m));
}

template <typename S>
struct Linear {
  Var<S> w, b;  // [in x out], [1 x out]

  Linear() = default;
  Linear(int in, int out, Rng& rng) {
    const S bound = S(1) / std::sqrt(static_cast<S>(in));
    w = uniform_leaf<S>(in, out, bound, rng);
    b = Var<S>::leaf(MatX<S>::Zero(1, out));
  }

  Var<S> operator()(const Var<S>& x) const { return rowwise_add(x * w, b); }

  void collect(const std::string& p, ParamRegistry<S>& reg) {
    reg.add(p + ".w", w);
    reg.add(p + ".b", b);
  }
};

struct ConvGeom {
  int k = 3, stride = 1, pad = 1;
};

template <typename S>
struct Conv1dLayer {
  Var<S> w, b;  // [C_out x C_in*k], [C_out x 1]
  ConvGeom geom;

  Conv1dLayer() = default;
  Conv1dLayer(int c_in, int c_out, ConvGeom g, Rng& rng) : geom(g) {
    const S bound = S(1) / std::sqrt(static_cast<S>(c_in * g.k));
    w = uniform_leaf<S>(c_out, static_cast<Eigen::Index>(c_in) * g.k, bound, rng);
    b = Var<S>::leaf(MatX<S>::Zero(c_out, 1));
  }

  Var<S> operator()(const Var<S>& x) const {
    return conv1d(x, w, b, geom.k, geom.stride, geom.pad);
  }

  void collect(const std::string& p, ParamRegistry<S>& reg) {
    reg.add(p + ".w", w);
    reg.add(p + ".b", b);
  }
};

template <typename S>
struct ConvTranspose1dLayer {
  Var<S> w, b;  // [C_in x k*C_out], [C_out x 1]
  ConvGeom geom;

  ConvTranspose1dLayer() = default;
  ConvTranspose1dLayer(int c_in, int c_out, ConvGeom g, Rng& rng) : geom(g) {
    const S bound = S(1) / std::sqrt(static_cast<S>(c_in * g.k));
    w = uniform_leaf<S>(c_in, static_cast<Eigen::Index>(g.k) * c_out, bound, rng);
    b = Var<S>::leaf(MatX<S>::Zero(c_out, 1));
  }

  Var<S> operator()(const Var<S>& x) const {
    return conv_transpose1d(x, w, b, geom.k, geom.stride, geom.pad);
  }

  void collect(const std::string& p, ParamRegistry<S>& reg) {
    reg.add(p + ".w", w);
    reg.add(p + ".b", b);
  }
};

enum class NormMode { PerChannel, PerStep };

// Per-channel normalization with running statistics (the stand-in for batch
// norm at single-sequence scale), or the per-step layer-style variant that
// needs no running state. Inference always uses running stats in PerChannel
// mode.
template <typename S>
struct NormLayer {
  Var<S> gamma, beta;          // [C x 1]
  MatX<S> running_mean, running_var;
  NormMode mode = NormMode::PerChannel;
  S momentum = S(0.1);
  S eps = S(1e-5);

  NormLayer() = default;
  NormLayer(int channels, NormMode m) : mode(m) {
    gamma = Var<S>::leaf(MatX<S>::Ones(channels, 1));
    beta = Var<S>::leaf(MatX<S>::Zero(channels, 1));
    running_mean = MatX<S>::Zero(channels, 1);
    running_var = MatX<S>::Ones(channels, 1);
  }

  Var<S> operator()(const Var<S>& x, bool training) {
    if (mode == NormMode::PerStep) return norm_step(x, gamma, beta, eps);
    if (training) {
      VecX<S> mu, var;
      Var<S> y = norm_time_train(x, gamma, beta, eps, &mu, &var);
      running_mean.col(0) =
          (S(1) - momentum) * running_mean.col(0) + momentum * mu;
      running_var.col(0) =
          (S(1) - momentum) * running_var.col(0) + momentum * var;
      return y;
    }
    return norm_time_eval(x, gamma, beta, VecX<S>(running_mean.col(0)),
                          VecX<S>(running_var.col(0)), eps);
  }

  void collect(const std::string& p, ParamRegistry<S>& reg) {
    reg.add(p + ".gamma", gamma);
    reg.add(p + ".beta", beta);
    reg.add_buffer(p + ".running_mean", &running_mean);
    reg.add_buffer(p + ".running_var", &running_var);
  }
};

// tanh(feature) * sigmoid(gate), both paths sharing geometry.
template <typename S>
struct GatedConv1d {
  Conv1dLayer<S> feature, gate;

  GatedConv1d() = default;
  GatedConv1d(int c_in, int c_out, ConvGeom g, Rng& rng)
      : feature(c_in, c_out, g, rng), gate(c_in, c_out, g, rng) {}

  Var<S> operator()(const Var<S>& x) const {
    return hadamard(tanh_elems(feature(x)), sigmoid(gate(x)));
  }

  void collect(const std::string& p, ParamRegistry<S>& reg) {
    feature.collect(p + ".feature", reg);
    gate.collect(p + ".gate", reg);
  }
};

// Three k3/s1/p1 convs, each followed by norm + leaky relu, plus the skip.
template <typename S>
struct ResidualBlock {
  Conv1dLayer<S> convs[3];
  NormLayer<S> norms[3];
  S slope = S(0.2);

  ResidualBlock() = default;
  ResidualBlock(int channels, NormMode nm, S lrelu_slope, Rng& rng)
      : slope(lrelu_slope) {
    for (int i = 0; i < 3; ++i) {
      convs[i] = Conv1dLayer<S>(channels, channels, ConvGeom{3, 1, 1}, rng);
      norms[i] = NormLayer<S>(channels, nm);
    }
  }

  Var<S> operator()(const Var<S>& x, bool training) {
    Var<S> h = x;
    for (int i = 0; i < 3; ++i)
      h = leaky_relu(norms[i](convs[i](h), training), slope);
    return x + h;
  }

  void collect(const std::string& p, ParamRegistry<S>& reg) {
    for (int i = 0; i < 3; ++i) {
      convs[i].collect(p + ".conv" + std::to_string(i), reg);
      norms[i].collect(p + ".norm" + std::to_string(i), reg);
    }
  }
};

template <typename S>
AttentionWeights<S> make_attention(int d_model, int heads, Rng& rng) {
  AttentionWeights<S> a;
  const S bound = S(1) / std::sqrt(static_cast<S>(d_model));
  a.wq = uniform_leaf<S>(d_model, d_model, bound, rng);
  a.wk = uniform_leaf<S>(d_model, d_model, bound, rng);
  a.wv = uniform_leaf<S>(d_model, d_model, bound, rng);
  a.wo = uniform_leaf<S>(d_model, d_model, bound, rng);
  a.bq = Var<S>::leaf(MatX<S>::Zero(1, d_model));
  a.bk = Var<S>::leaf(MatX<S>::Zero(1, d_model));
  a.bv = Var<S>::leaf(MatX<S>::Zero(1, d_model));
  a.bo = Var<S>::leaf(MatX<S>::Zero(1, d_model));
  a.heads = heads;
  return a;
}

template <typename S>
void collect_attention(AttentionWeights<S>& a, const std::string& p,
                       ParamRegistry<S>& reg) {
  reg.add(p + ".wq", a.wq);
  reg.add(p + ".bq", a.bq);
  reg.add(p + ".wk", a.wk);
  reg.add(p + ".bk", a.bk);
  reg.add(p + ".wv", a.wv);
  reg.add(p + ".bv", a.bv);
  reg.add(p + ".wo", a.wo);
  reg.add(p + ".bo", a.bo);
}

}  // namespace pqmotion
