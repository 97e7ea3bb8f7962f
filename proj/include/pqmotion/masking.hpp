#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "pqmotion/rng.hpp"
#include "pqmotion/tensor.hpp"
#include "pqmotion/types.hpp"

namespace pqmotion {

// Cosine mask-count schedule for iterative decoding: after iteration t of T,
// round(gamma(t/T) * L0) positions remain masked.
struct MaskSchedule {
  int iterations = 8;
  double temperature = 1.0;

  static double gamma(double r) { return std::cos(M_PI * r / 2.0); }

  long masked_after(int t, long initially_masked) const {
    return std::llround(gamma(static_cast<double>(t) / iterations) *
                        static_cast<double>(initially_masked));
  }

  // Sampling temperature anneals to zero at the final iteration.
  double temperature_at(int t) const {
    return temperature * (1.0 - static_cast<double>(t) / iterations);
  }
};

// Training-time mask: draws r ~ U(0,1) and masks exactly
// round(cos(pi r / 2) * N_d * G) uniformly chosen positions (keep = 0).
inline CodeGrid sample_training_mask(int nd, int groups, Rng& rng) {
  CodeGrid grid = CodeGrid::all_masked(nd, groups);
  grid.keep.setConstant(1);
  const long total = static_cast<long>(nd) * groups;
  double rho = MaskSchedule::gamma(rng.uniform());
  long n_masked = std::llround(rho * static_cast<double>(total));
  std::vector<long> flat(total);
  for (long i = 0; i < total; ++i) flat[i] = i;
  for (long i = 0; i < n_masked; ++i) {
    long j = i + rng.uniform_int(0, static_cast<int>(total - i));
    std::swap(flat[i], flat[j]);
    grid.keep(flat[i] / groups, flat[i] % groups) = 0;
  }
  return grid;
}

// Refiner-style frame mask: with probability `prob` a contiguous prefix
// and/or suffix of [span_min, span_max] frames is context, otherwise the
// whole sequence is generated.
inline FrameMask sample_frame_mask(int frames, double prob, int span_min,
                                   int span_max, Rng& rng) {
  FrameMask mask = FrameMask::zeros(frames);
  if (rng.uniform() >= prob) return mask;
  int which = rng.uniform_int(0, 3);  // 0 prefix, 1 suffix, 2 both
  auto span = [&] {
    return std::min(frames, rng.uniform_int(span_min, span_max + 1));
  };
  if (which == 0 || which == 2) {
    int s = span();
    for (int i = 0; i < s; ++i) mask.bits(i) = 1;
  }
  if (which == 1 || which == 2) {
    int s = span();
    for (int i = 0; i < s; ++i) mask.bits(frames - 1 - i) = 1;
  }
  return mask;
}

// Produces per-group logits [N_d x K] for the current (partially masked) grid.
template <typename S>
using LogitsProvider = std::function<std::vector<MatX<S>>(const CodeGrid&)>;

namespace detail {

template <typename S>
VecX<S> softmax_vec(const Eigen::Ref<const Eigen::RowVectorX<S>>& logits,
                    double temperature) {
  Eigen::ArrayX<S> a = logits.transpose().array();
  if (temperature > 0) a /= static_cast<S>(temperature);
  a -= a.maxCoeff();
  VecX<S> p = a.exp().matrix();
  p /= p.sum();
  return p;
}

template <typename S>
int sample_or_argmax(const Eigen::Ref<const Eigen::RowVectorX<S>>& logits,
                     double temperature, Rng& rng) {
  if (temperature <= 0) {
    int best = 0;
    for (int k = 1; k < logits.size(); ++k)
      if (logits(k) > logits(best)) best = k;
    return best;
  }
  VecX<S> p = softmax_vec<S>(logits, temperature);
  double u = rng.uniform();
  double acc = 0.0;
  for (int k = 0; k < p.size(); ++k) {
    acc += static_cast<double>(p(k));
    if (u < acc) return k;
  }
  return static_cast<int>(p.size()) - 1;
}

}  // namespace detail

// Confidence-ranked iterative decoding. Starts from `initial_keep`, predicts
// every masked position each iteration, and cumulatively commits the most
// confident predictions so that after iteration t exactly
// round(gamma(t/T) * L0) positions remain masked. Committed codes are never
// re-masked. Confidence is the plain (temperature-1) probability of the
// chosen code; ties break in (time, subspace) order.
template <typename S>
CodeGrid maskgit_decode(const LogitsProvider<S>& logits_for,
                        const MaskSchedule& schedule,
                        const CodeGrid& initial_keep, Rng& rng,
                        std::vector<std::pair<int, int>>* commit_order = nullptr) {
  if (schedule.iterations < 1)
    throw std::invalid_argument("maskgit_decode: T must be >= 1");
  CodeGrid grid = initial_keep;
  const int nd = grid.steps(), groups = grid.groups();
  const long initially_masked = grid.masked_count();

  for (int t = 1; t <= schedule.iterations && grid.masked_count() > 0; ++t) {
    std::vector<MatX<S>> logits = logits_for(grid);
    const double temp = schedule.temperature_at(t);

    struct Candidate {
      double confidence;
      int n, g, code;
    };
    std::vector<Candidate> candidates;
    for (int n = 0; n < nd; ++n) {
      for (int g = 0; g < groups; ++g) {
        if (grid.keep(n, g)) continue;
        Eigen::RowVectorX<S> row = logits[g].row(n);
        int code = detail::sample_or_argmax<S>(row, temp, rng);
        VecX<S> plain = detail::softmax_vec<S>(row, 1.0);
        candidates.push_back({static_cast<double>(plain(code)), n, g, code});
      }
    }
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const Candidate& a, const Candidate& b) {
                       if (a.confidence != b.confidence)
                         return a.confidence > b.confidence;
                       if (a.n != b.n) return a.n < b.n;
                       return a.g < b.g;
                     });
    const long target_masked = schedule.masked_after(t, initially_masked);
    long to_commit =
        static_cast<long>(candidates.size()) - target_masked;
    for (long i = 0; i < to_commit && i < static_cast<long>(candidates.size());
         ++i) {
      const Candidate& c = candidates[i];
      grid.indices(c.n, c.g) = c.code;
      grid.keep(c.n, c.g) = 1;
      if (commit_order) commit_order->emplace_back(c.n, c.g);
    }
  }
  return grid;
}

// Raster-order baseline: time-major, subspace-minor; one forward pass per
// position, each predicted with all later positions masked.
template <typename S>
CodeGrid autoregressive_decode(const LogitsProvider<S>& logits_for, int nd,
                               int groups, double temperature, Rng& rng) {
  CodeGrid grid = CodeGrid::all_masked(nd, groups);
  for (int n = 0; n < nd; ++n) {
    for (int g = 0; g < groups; ++g) {
      std::vector<MatX<S>> logits = logits_for(grid);
      Eigen::RowVectorX<S> row = logits[g].row(n);
      grid.indices(n, g) = detail::sample_or_argmax<S>(row, temperature, rng);
      grid.keep(n, g) = 1;
    }
  }
  return grid;
}

}  // namespace pqmotion
