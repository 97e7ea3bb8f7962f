#pragma once

#include <cstdint>
#include <vector>

#include "pqmotion/tensor.hpp"

namespace pqmotion {

// Decoupled-weight-decay Adam with bias correction. Moments live here, keyed
// by parameter order; the update is p -= lr * (m_hat / (sqrt(v_hat) + eps)
// + weight_decay * p).
template <typename S>
class AdamW {
 public:
  struct Options {
    S lr = S(1e-4);
    S beta1 = S(0.9);
    S beta2 = S(0.99);
    S eps = S(1e-8);
    S weight_decay = S(0.01);
  };

  AdamW(std::vector<Var<S>> params, Options opt)
      : params_(std::move(params)), opt_(opt) {
    slots_.reserve(params_.size());
    for (const auto& p : params_)
      slots_.push_back({MatX<S>::Zero(p.rows(), p.cols()),
                        MatX<S>::Zero(p.rows(), p.cols())});
  }

  void zero_grad() {
    for (auto& p : params_) p.zero_grad();
  }

  void step() {
    ++step_count_;
    const S bc1 = S(1) - std::pow(opt_.beta1, static_cast<S>(step_count_));
    const S bc2 = S(1) - std::pow(opt_.beta2, static_cast<S>(step_count_));
    for (size_t i = 0; i < params_.size(); ++i) {
      Var<S>& p = params_[i];
      MatX<S>& stored = p.node()->grad;
      if (stored.size() == 0)
        stored = MatX<S>::Zero(p.rows(), p.cols());  // never touched: zero grad
      else if (stored.rows() != p.rows() || stored.cols() != p.cols())
        throw std::invalid_argument("AdamW::step: gradient shape mismatch");
      const MatX<S>& g = stored;
      Slot& s = slots_[i];
      s.m = opt_.beta1 * s.m + (S(1) - opt_.beta1) * g;
      s.v = opt_.beta2 * s.v + (S(1) - opt_.beta2) * g.cwiseProduct(g);
      MatX<S> m_hat = s.m / bc1;
      MatX<S> v_hat = s.v / bc2;
      p.value_mut().array() -=
          opt_.lr * (m_hat.array() / (v_hat.array().sqrt() + opt_.eps) +
                     opt_.weight_decay * p.value().array());
    }
  }

  int64_t step_count() const { return step_count_; }
  const Options& options() const { return opt_; }

  // Optimizer state access for checkpoint resume.
  struct Slot {
    MatX<S> m, v;
  };
  std::vector<Slot>& slots() { return slots_; }
  void set_step_count(int64_t t) { step_count_ = t; }

 private:
  std::vector<Var<S>> params_;
  Options opt_;
  std::vector<Slot> slots_;
  int64_t step_count_ = 0;
};

}  // namespace pqmotion
