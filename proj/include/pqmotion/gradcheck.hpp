#pragma once

#include <algorithm>
#include <functional>
#include <vector>

#include "pqmotion/rng.hpp"
#include "pqmotion/tensor.hpp"

namespace pqmotion {

// Compares reverse-mode gradients against central finite differences.
// `build_loss` must rebuild the scalar loss graph from the current values of
// `inputs` on every call. For large tensors at most `max_entries_per_input`
// randomly chosen coordinates are probed. Returns the maximum relative error
// |analytic - numeric| / max(1, |analytic|, |numeric|).
template <typename S>
S gradient_check(const std::function<Var<S>()>& build_loss,
                 std::vector<Var<S>> inputs, S eps = S(1e-5),
                 int max_entries_per_input = 0, uint64_t probe_seed = 17) {
  Var<S> loss = build_loss();
  for (auto& in : inputs) in.zero_grad();
  loss.backward();
  std::vector<MatX<S>> analytic;
  analytic.reserve(inputs.size());
  for (auto& in : inputs) analytic.push_back(in.grad_mut());

  Rng rng(probe_seed);
  S worst = S(0);
  for (size_t i = 0; i < inputs.size(); ++i) {
    Var<S>& in = inputs[i];
    const Eigen::Index total = in.rows() * in.cols();
    std::vector<Eigen::Index> probe;
    if (max_entries_per_input > 0 && total > max_entries_per_input) {
      for (int p = 0; p < max_entries_per_input; ++p)
        probe.push_back(static_cast<Eigen::Index>(
            rng.uniform_int(0, static_cast<int>(total))));
    } else {
      probe.resize(total);
      for (Eigen::Index p = 0; p < total; ++p) probe[p] = p;
    }
    for (Eigen::Index flat : probe) {
      const Eigen::Index r = flat % in.rows();
      const Eigen::Index c = flat / in.rows();
      const S saved = in.value()(r, c);
      in.value_mut()(r, c) = saved + eps;
      const S up = build_loss().item();
      in.value_mut()(r, c) = saved - eps;
      const S dn = build_loss().item();
      in.value_mut()(r, c) = saved;
      const S numeric = (up - dn) / (S(2) * eps);
      const S a = analytic[i](r, c);
      const S denom = std::max({S(1), std::abs(a), std::abs(numeric)});
      worst = std::max(worst, std::abs(a - numeric) / denom);
    }
  }
  return worst;
}

}  // namespace pqmotion
