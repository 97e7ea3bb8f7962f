#pragma once

#include <cmath>
#include <vector>

#include "pqmotion/tensor.hpp"

namespace pqmotion {

template <typename S>
Var<S> leaky_relu(const Var<S>& x, S slope) {
  if (!(slope > S(0) && slope < S(1)))
    throw std::invalid_argument("leaky_relu: slope must lie in (0,1)");
  MatX<S> y = (x.value().array() >= S(0))
                  .select(x.value(), x.value() * slope);
  return Var<S>::make(std::move(y), {x}, [x, slope](typename Var<S>::Node& n) {
    MatX<S> d = (x.value().array() >= S(0))
                    .select(MatX<S>::Constant(x.rows(), x.cols(), S(1)),
                            MatX<S>::Constant(x.rows(), x.cols(), slope));
    detail::accum(x, MatX<S>(n.grad.cwiseProduct(d)));
  });
}

// Row-wise softmax (each row sums to one), numerically stable.
template <typename S>
Var<S> softmax_rows(const Var<S>& x) {
  MatX<S> y = x.value();
  for (Eigen::Index r = 0; r < y.rows(); ++r) {
    auto row = y.row(r).array();
    S m = row.maxCoeff();
    y.row(r) = (row - m).exp();
    y.row(r) /= y.row(r).sum();
  }
  return Var<S>::make(y, {x}, [x, y](typename Var<S>::Node& n) {
    MatX<S> dx(y.rows(), y.cols());
    for (Eigen::Index r = 0; r < y.rows(); ++r) {
      S dot = n.grad.row(r).cwiseProduct(y.row(r)).sum();
      dx.row(r) = y.row(r).cwiseProduct(
          (n.grad.row(r).array() - dot).matrix());
    }
    detail::accum(x, dx);
  });
}

// Mean of -log softmax(logits)[target] over rows. `row_weights`, when
// non-empty, re-weights rows (0 drops a row); the mean is over total weight.
// Returns 0 when the total weight is zero.
template <typename S>
Var<S> softmax_cross_entropy(const Var<S>& logits,
                             const std::vector<int>& targets,
                             const std::vector<S>& row_weights = {}) {
  const Eigen::Index rows = logits.rows();
  const Eigen::Index k = logits.cols();
  if (static_cast<Eigen::Index>(targets.size()) != rows)
    throw std::invalid_argument("softmax_cross_entropy: one target per row");
  if (!row_weights.empty() &&
      static_cast<Eigen::Index>(row_weights.size()) != rows)
    throw std::invalid_argument("softmax_cross_entropy: bad weight count");
  for (int t : targets)
    if (t < 0 || t >= k)
      throw std::invalid_argument("softmax_cross_entropy: target out of range");

  S total_w = S(0);
  for (Eigen::Index r = 0; r < rows; ++r)
    total_w += row_weights.empty() ? S(1) : row_weights[r];
  if (!(total_w > S(0))) return Var<S>::scalar(S(0));

  MatX<S> probs(rows, k);
  S loss = S(0);
  for (Eigen::Index r = 0; r < rows; ++r) {
    auto row = logits.value().row(r).array();
    S m = row.maxCoeff();
    VecX<S> e = (row - m).exp().matrix().transpose();
    S z = e.sum();
    probs.row(r) = (e / z).transpose();
    S w = row_weights.empty() ? S(1) : row_weights[r];
    if (w != S(0))
      loss += w * (std::log(z) + m - logits.value()(r, targets[r]));
  }
  MatX<S> out(1, 1);
  out(0, 0) = loss / total_w;
  return Var<S>::make(
      std::move(out), {logits},
      [logits, targets, row_weights, probs, total_w](typename Var<S>::Node& n) {
        if (!logits.requires_grad()) return;
        const S g0 = n.grad(0, 0) / total_w;
        MatX<S> d = probs;
        for (Eigen::Index r = 0; r < d.rows(); ++r) {
          d(r, targets[r]) -= S(1);
          S w = row_weights.empty() ? S(1) : row_weights[r];
          d.row(r) *= g0 * w;
        }
        detail::accum(logits, d);
      });
}

// ---- 1-D convolutions (channels x time layout) ----
//
// Weight layout for conv1d is [C_out x (C_in*k)] with column index
// c_in*k + j; conv_transpose1d uses [C_in x (k*C_out)] with column index
// j*C_out + c_out so each tap j is a contiguous C_in x C_out block.

template <typename S>
MatX<S> im2col_1d(const MatX<S>& x, int k, int stride, int pad, int l_out) {
  const int c_in = static_cast<int>(x.rows());
  const int l = static_cast<int>(x.cols());
  MatX<S> cols = MatX<S>::Zero(static_cast<Eigen::Index>(c_in) * k, l_out);
  for (int t = 0; t < l_out; ++t) {
    for (int j = 0; j < k; ++j) {
      int src = t * stride + j - pad;
      if (src < 0 || src >= l) continue;
      for (int c = 0; c < c_in; ++c) cols(c * k + j, t) = x(c, src);
    }
  }
  return cols;
}

template <typename S>
Var<S> conv1d(const Var<S>& x, const Var<S>& w, const Var<S>& bias, int k,
              int stride, int pad) {
  if (k < 1 || stride < 1 || pad < 0)
    throw std::invalid_argument("conv1d: bad kernel/stride/padding");
  if (w.cols() % k != 0 || w.cols() / k != x.rows())
    throw std::invalid_argument("conv1d: weight C_in*k does not match input channels");
  const int l = static_cast<int>(x.cols());
  if (l + 2 * pad < k)
    throw std::invalid_argument("conv1d: input shorter than kernel");
  const int l_out = (l + 2 * pad - k) / stride + 1;

  MatX<S> cols = im2col_1d(x.value(), k, stride, pad, l_out);
  MatX<S> y = w.value() * cols;
  if (bias.defined()) y.colwise() += bias.value().col(0);

  std::vector<Var<S>> parents = {x, w};
  if (bias.defined()) parents.push_back(bias);
  return Var<S>::make(
      std::move(y), std::move(parents),
      [x, w, bias, cols, k, stride, pad, l](typename Var<S>::Node& n) {
        if (w.requires_grad())
          detail::accum(w, MatX<S>(n.grad * cols.transpose()));
        if (bias.defined() && bias.requires_grad())
          detail::accum(bias, MatX<S>(n.grad.rowwise().sum()));
        if (x.requires_grad()) {
          MatX<S> dcols = w.value().transpose() * n.grad;  // (C_in*k) x L_out
          auto xn = x.node();
          xn->ensure_grad();
          const int c_in = static_cast<int>(x.rows());
          for (int t = 0; t < static_cast<int>(dcols.cols()); ++t) {
            for (int j = 0; j < k; ++j) {
              int src = t * stride + j - pad;
              if (src < 0 || src >= l) continue;
              for (int c = 0; c < c_in; ++c)
                xn->grad(c, src) += dcols(c * k + j, t);
            }
          }
        }
      });
}

template <typename S>
Var<S> conv1d(const Var<S>& x, const Var<S>& w, int k, int stride, int pad) {
  return conv1d(x, w, Var<S>(), k, stride, pad);
}

template <typename S>
Var<S> conv_transpose1d(const Var<S>& x, const Var<S>& w, const Var<S>& bias,
                        int k, int stride, int pad) {
  if (k < 1 || stride < 1 || pad < 0)
    throw std::invalid_argument("conv_transpose1d: bad kernel/stride/padding");
  if (w.rows() != x.rows() || w.cols() % k != 0)
    throw std::invalid_argument("conv_transpose1d: weight does not match input channels");
  const int c_out = static_cast<int>(w.cols()) / k;
  const int l = static_cast<int>(x.cols());
  const int l_out = stride * (l - 1) + k - 2 * pad;
  if (l_out < 1) throw std::invalid_argument("conv_transpose1d: empty output");

  MatX<S> y = MatX<S>::Zero(c_out, l_out);
  for (int j = 0; j < k; ++j) {
    MatX<S> pj = w.value().middleCols(static_cast<Eigen::Index>(j) * c_out, c_out)
                     .transpose() *
                 x.value();  // C_out x L
    for (int t = 0; t < l; ++t) {
      int pos = stride * t + j - pad;
      if (pos < 0 || pos >= l_out) continue;
      y.col(pos) += pj.col(t);
    }
  }
  if (bias.defined()) y.colwise() += bias.value().col(0);

  std::vector<Var<S>> parents = {x, w};
  if (bias.defined()) parents.push_back(bias);
  return Var<S>::make(
      std::move(y), std::move(parents),
      [x, w, bias, k, stride, pad, c_out, l, l_out](typename Var<S>::Node& n) {
        if (bias.defined() && bias.requires_grad())
          detail::accum(bias, MatX<S>(n.grad.rowwise().sum()));
        for (int j = 0; j < k; ++j) {
          MatX<S> dpj = MatX<S>::Zero(c_out, l);  // gathered output grads
          for (int t = 0; t < l; ++t) {
            int pos = stride * t + j - pad;
            if (pos < 0 || pos >= l_out) continue;
            dpj.col(t) = n.grad.col(pos);
          }
          if (x.requires_grad())
            detail::accum(
                x, MatX<S>(w.value().middleCols(
                               static_cast<Eigen::Index>(j) * c_out, c_out) *
                           dpj));
          if (w.requires_grad()) {
            auto wn = w.node();
            wn->ensure_grad();
            wn->grad.middleCols(static_cast<Eigen::Index>(j) * c_out, c_out) +=
                x.value() * dpj.transpose();
          }
        }
      });
}

// ---- normalization ----

// Adaptive instance normalization on [L x d] activations: each column
// (channel) is normalized over the L rows to zero mean and unit variance,
// with the variance floored at eps, then scaled/shifted per channel.
// scale/shift are [1 x d].
template <typename S>
Var<S> adain(const Var<S>& x, const Var<S>& scale, const Var<S>& shift,
             S eps) {
  if (!(eps > S(0))) throw std::invalid_argument("adain: eps must be > 0");
  if (scale.rows() != 1 || scale.cols() != x.cols() || shift.rows() != 1 ||
      shift.cols() != x.cols())
    throw std::invalid_argument("adain: scale/shift must be 1 x cols(x)");
  const Eigen::Index m = x.rows(), d = x.cols();
  Eigen::RowVectorX<S> mu = x.value().colwise().mean();
  MatX<S> centered = x.value().rowwise() - mu;
  Eigen::RowVectorX<S> var =
      centered.array().square().colwise().sum().matrix() / static_cast<S>(m);
  Eigen::RowVectorX<S> sd = var.cwiseMax(eps).cwiseSqrt();
  MatX<S> xhat = centered.array().rowwise() / sd.array();
  MatX<S> y = (xhat.array().rowwise() * scale.value().row(0).array())
                  .rowwise() +
              shift.value().row(0).array();
  return Var<S>::make(
      std::move(y), {x, scale, shift},
      [x, scale, shift, xhat, sd, var, eps, m](typename Var<S>::Node& n) {
        if (shift.requires_grad())
          detail::accum(shift, MatX<S>(n.grad.colwise().sum()));
        if (scale.requires_grad())
          detail::accum(scale,
                        MatX<S>(n.grad.cwiseProduct(xhat).colwise().sum()));
        if (!x.requires_grad()) return;
        MatX<S> dxhat =
            n.grad.array().rowwise() * scale.value().row(0).array();
        MatX<S> dx(dxhat.rows(), dxhat.cols());
        for (Eigen::Index c = 0; c < dxhat.cols(); ++c) {
          S inv_sd = S(1) / sd(c);
          S mean_d = dxhat.col(c).mean();
          if (var(c) > eps) {
            S mean_dx = dxhat.col(c).cwiseProduct(xhat.col(c)).mean();
            dx.col(c) = inv_sd * (dxhat.col(c).array() - mean_d -
                                  xhat.col(c).array() * mean_dx)
                                     .matrix();
          } else {
            dx.col(c) = inv_sd * (dxhat.col(c).array() - mean_d).matrix();
          }
        }
        detail::accum(x, dx);
      });
}

// Per-channel normalization of [C x L] conv activations over the time axis,
// using the activation's own statistics; returns the batch stats so the
// caller can maintain running estimates. Affine gamma/beta are [C x 1].
template <typename S>
Var<S> norm_time_train(const Var<S>& x, const Var<S>& gamma, const Var<S>& beta,
                       S eps, VecX<S>* mean_out = nullptr,
                       VecX<S>* var_out = nullptr) {
  const Eigen::Index c = x.rows(), l = x.cols();
  if (gamma.rows() != c || gamma.cols() != 1 || beta.rows() != c ||
      beta.cols() != 1)
    throw std::invalid_argument("norm_time: gamma/beta must be rows(x) x 1");
  VecX<S> mu = x.value().rowwise().mean();
  MatX<S> centered = x.value().colwise() - mu;
  VecX<S> var = centered.array().square().rowwise().sum().matrix() /
                static_cast<S>(l);
  VecX<S> sd = (var.array() + eps).sqrt();
  MatX<S> xhat = centered.array().colwise() / sd.array();
  if (mean_out) *mean_out = mu;
  if (var_out) *var_out = var;
  MatX<S> y = (xhat.array().colwise() * gamma.value().col(0).array())
                  .colwise() +
              beta.value().col(0).array();
  return Var<S>::make(
      std::move(y), {x, gamma, beta},
      [x, gamma, beta, xhat, sd](typename Var<S>::Node& n) {
        if (beta.requires_grad())
          detail::accum(beta, MatX<S>(n.grad.rowwise().sum()));
        if (gamma.requires_grad())
          detail::accum(gamma,
                        MatX<S>(n.grad.cwiseProduct(xhat).rowwise().sum()));
        if (!x.requires_grad()) return;
        MatX<S> dxhat = n.grad.array().colwise() * gamma.value().col(0).array();
        MatX<S> dx(dxhat.rows(), dxhat.cols());
        for (Eigen::Index r = 0; r < dxhat.rows(); ++r) {
          S inv_sd = S(1) / sd(r);
          S mean_d = dxhat.row(r).mean();
          S mean_dx = dxhat.row(r).cwiseProduct(xhat.row(r)).mean();
          dx.row(r) = inv_sd * (dxhat.row(r).array() - mean_d -
                                xhat.row(r).array() * mean_dx)
                                   .matrix();
        }
        detail::accum(x, dx);
      });
}

// Inference-mode variant: normalizes with the provided running statistics.
template <typename S>
Var<S> norm_time_eval(const Var<S>& x, const Var<S>& gamma, const Var<S>& beta,
                      const VecX<S>& running_mean, const VecX<S>& running_var,
                      S eps) {
  const Eigen::Index c = x.rows();
  if (running_mean.size() != c || running_var.size() != c)
    throw std::invalid_argument("norm_time_eval: running stats size mismatch");
  VecX<S> sd = (running_var.array() + eps).sqrt();
  MatX<S> xhat =
      ((x.value().colwise() - running_mean).array().colwise() / sd.array())
          .matrix();
  MatX<S> y = (xhat.array().colwise() * gamma.value().col(0).array())
                  .colwise() +
              beta.value().col(0).array();
  return Var<S>::make(
      std::move(y), {x, gamma, beta},
      [x, gamma, beta, xhat, sd](typename Var<S>::Node& n) {
        if (beta.requires_grad())
          detail::accum(beta, MatX<S>(n.grad.rowwise().sum()));
        if (gamma.requires_grad())
          detail::accum(gamma,
                        MatX<S>(n.grad.cwiseProduct(xhat).rowwise().sum()));
        if (x.requires_grad()) {
          MatX<S> dx =
              (n.grad.array().colwise() *
               (gamma.value().col(0).array() / sd.array()))
                  .matrix();
          detail::accum(x, dx);
        }
      });
}

// Layer-style alternative for [C x L] activations: each time step (column)
// is normalized across channels; affine stays per channel. No running stats.
template <typename S>
Var<S> norm_step(const Var<S>& x, const Var<S>& gamma, const Var<S>& beta,
                 S eps) {
  const Eigen::Index c = x.rows(), l = x.cols();
  if (gamma.rows() != c || gamma.cols() != 1 || beta.rows() != c ||
      beta.cols() != 1)
    throw std::invalid_argument("norm_step: gamma/beta must be rows(x) x 1");
  Eigen::RowVectorX<S> mu = x.value().colwise().mean();
  MatX<S> centered = x.value().rowwise() - mu;
  Eigen::RowVectorX<S> var =
      centered.array().square().colwise().sum().matrix() / static_cast<S>(c);
  Eigen::RowVectorX<S> sd = (var.array() + eps).sqrt();
  MatX<S> xhat = centered.array().rowwise() / sd.array();
  MatX<S> y = (xhat.array().colwise() * gamma.value().col(0).array())
                  .colwise() +
              beta.value().col(0).array();
  return Var<S>::make(
      std::move(y), {x, gamma, beta},
      [x, gamma, beta, xhat, sd](typename Var<S>::Node& n) {
        if (beta.requires_grad())
          detail::accum(beta, MatX<S>(n.grad.rowwise().sum()));
        if (gamma.requires_grad())
          detail::accum(gamma,
                        MatX<S>(n.grad.cwiseProduct(xhat).rowwise().sum()));
        if (!x.requires_grad()) return;
        MatX<S> dxhat = n.grad.array().colwise() * gamma.value().col(0).array();
        MatX<S> dx(dxhat.rows(), dxhat.cols());
        for (Eigen::Index t = 0; t < dxhat.cols(); ++t) {
          S inv_sd = S(1) / sd(t);
          S mean_d = dxhat.col(t).mean();
          S mean_dx = dxhat.col(t).cwiseProduct(xhat.col(t)).mean();
          dx.col(t) = inv_sd * (dxhat.col(t).array() - mean_d -
                                xhat.col(t).array() * mean_dx)
                                   .matrix();
        }
        detail::accum(x, dx);
      });
}

// ---- attention ----

template <typename S>
struct AttentionWeights {
  Var<S> wq, bq, wk, bk, wv, bv, wo, bo;  // w: [d x d], b: [1 x d]
  int heads = 1;
};

// Standard scaled dot-product multi-head attention over [L x d] sequences.
// Self-attention when key_value is query.
template <typename S>
Var<S> multihead_attention(const Var<S>& query, const Var<S>& key_value,
                           const AttentionWeights<S>& w) {
  const Eigen::Index d = query.cols();
  if (key_value.cols() != d)
    throw std::invalid_argument("multihead_attention: model dims disagree");
  if (w.heads < 1 || d % w.heads != 0)
    throw std::invalid_argument(
        "multihead_attention: d_model not divisible by heads");
  const Eigen::Index dh = d / w.heads;
  const S inv_sqrt = S(1) / std::sqrt(static_cast<S>(dh));

  Var<S> q = rowwise_add(query * w.wq, w.bq);
  Var<S> k = rowwise_add(key_value * w.wk, w.bk);
  Var<S> v = rowwise_add(key_value * w.wv, w.bv);

  std::vector<Var<S>> heads_out;
  heads_out.reserve(w.heads);
  for (int h = 0; h < w.heads; ++h) {
    Var<S> qh = slice_cols(q, h * dh, dh);
    Var<S> kh = slice_cols(k, h * dh, dh);
    Var<S> vh = slice_cols(v, h * dh, dh);
    Var<S> attn = softmax_rows((qh * transpose(kh)) * inv_sqrt);
    heads_out.push_back(attn * vh);
  }
  Var<S> cat = w.heads == 1 ? heads_out[0] : concat_cols(heads_out);
  return rowwise_add(cat * w.wo, w.bo);
}

}  // namespace pqmotion
