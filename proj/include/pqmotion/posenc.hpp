#pragma once

#include <cmath>
#include <string>

#include "pqmotion/layers.hpp"
#include "pqmotion/tensor.hpp"

namespace pqmotion {

// Standard interleaved sinusoidal table: row p holds
// [sin(p/10000^(0/d)), cos(p/10000^(0/d)), sin(p/10000^(2/d)), ...].
template <typename S>
MatX<S> sinusoidal_table(int positions, int d_model) {
  if (d_model % 2 != 0)
    throw std::invalid_argument("sinusoidal_table: d_model must be even");
  MatX<S> t(positions, d_model);
  for (int p = 0; p < positions; ++p) {
    for (int i = 0; i < d_model; i += 2) {
      double freq = std::pow(10000.0, static_cast<double>(i) / d_model);
      t(p, i) = static_cast<S>(std::sin(p / freq));
      t(p, i + 1) = static_cast<S>(std::cos(p / freq));
    }
  }
  return t;
}

// e_n^g = alpha_n + beta_g with both tables sinusoidal.
template <typename S>
VecX<S> positional_encoding_2d(int n, int g, int d_model) {
  if (n < 0 || g < 0)
    throw std::invalid_argument("positional_encoding_2d: negative position");
  MatX<S> alpha = sinusoidal_table<S>(n + 1, d_model);
  MatX<S> beta = sinusoidal_table<S>(g + 1, d_model);
  return (alpha.row(n) + beta.row(g)).transpose();
}

enum class PeKind { Sine2D, Sine1D, Train2D, Train1D };

inline PeKind pe_kind_from(const std::string& name) {
  if (name == "2d-sine") return PeKind::Sine2D;
  if (name == "1d-sine") return PeKind::Sine1D;
  if (name == "2d-train") return PeKind::Train2D;
  if (name == "1d-train") return PeKind::Train1D;
  throw std::invalid_argument("unknown positional encoding kind: " + name);
}

// Positional encoding over the (time step, subspace) grid of code tokens,
// flattened time-major. The 2D variants add a temporal and a subspace table;
// the 1D variants address the flattened token index directly. "Train"
// variants learn the tables instead of fixing them to sinusoids.
template <typename S>
struct PositionalEncoder {
  PeKind kind = PeKind::Sine2D;
  int d_model = 64;
  int max_time = 256;
  int max_subspace = 4;

  MatX<S> sine_time;      // max_time x d
  MatX<S> sine_subspace;  // max_subspace x d
  MatX<S> sine_flat;      // (max_time*max_subspace) x d
  Var<S> train_time, train_subspace, train_flat;

  PositionalEncoder() = default;

  PositionalEncoder(PeKind k, int d, int maxt, int maxg, Rng& rng)
      : kind(k), d_model(d), max_time(maxt), max_subspace(maxg) {
    sine_time = sinusoidal_table<S>(maxt, d);
    sine_subspace = sinusoidal_table<S>(maxg, d);
    sine_flat = sinusoidal_table<S>(maxt * maxg, d);
    if (kind == PeKind::Train2D) {
      train_time = uniform_leaf<S>(maxt, d, S(0.1), rng);
      train_subspace = uniform_leaf<S>(maxg, d, S(0.1), rng);
    } else if (kind == PeKind::Train1D) {
      train_flat = uniform_leaf<S>(maxt * maxg, d, S(0.1), rng);
    }
  }

  // Encoding for nd*groups tokens, row (n*groups + g).
  Var<S> token_encoding(int nd, int groups) const {
    if (nd > max_time || groups > max_subspace)
      throw std::invalid_argument("positional encoder: grid exceeds table size");
    const int rows = nd * groups;
    switch (kind) {
      case PeKind::Sine2D: {
        MatX<S> e(rows, d_model);
        for (int n = 0; n < nd; ++n)
          for (int g = 0; g < groups; ++g)
            e.row(n * groups + g) = sine_time.row(n) + sine_subspace.row(g);
        return Var<S>::constant(std::move(e));
      }
      case PeKind::Sine1D:
        return Var<S>::constant(MatX<S>(sine_flat.topRows(rows)));
      case PeKind::Train2D: {
        std::vector<int> t_idx(rows), g_idx(rows);
        for (int n = 0; n < nd; ++n)
          for (int g = 0; g < groups; ++g) {
            t_idx[n * groups + g] = n;
            g_idx[n * groups + g] = g;
          }
        return gather_rows(train_time, t_idx) +
               gather_rows(train_subspace, g_idx);
      }
      case PeKind::Train1D: {
        std::vector<int> idx(rows);
        for (int i = 0; i < rows; ++i) idx[i] = i;
        return gather_rows(train_flat, idx);
      }
    }
    throw std::logic_error("unreachable");
  }

  // Temporal-only encoding for condition memories; always sinusoidal so the
  // PE ablation varies only the code-token encoding.
  Var<S> temporal_encoding(int nd) const {
    if (nd > max_time)
      throw std::invalid_argument("positional encoder: sequence exceeds table");
    return Var<S>::constant(MatX<S>(sine_time.topRows(nd)));
  }

  void collect(const std::string& p, ParamRegistry<S>& reg) {
    if (kind == PeKind::Train2D) {
      reg.add(p + ".time", train_time);
      reg.add(p + ".subspace", train_subspace);
    } else if (kind == PeKind::Train1D) {
      reg.add(p + ".flat", train_flat);
    }
  }
};

}  // namespace pqmotion
