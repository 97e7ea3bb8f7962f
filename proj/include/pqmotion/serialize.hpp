#pragma once

#include <string>

#include "pqmotion/checkpoint.hpp"
#include "pqmotion/layers.hpp"
#include "pqmotion/tensor.hpp"

namespace pqmotion {

template <typename S>
TensorBlob to_blob(const std::string& name, const MatX<S>& m) {
  TensorBlob t;
  t.name = name;
  t.shape = {m.rows(), m.cols()};
  t.data.reserve(static_cast<size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      t.data.push_back(static_cast<float>(m(r, c)));
  return t;
}

template <typename S>
MatX<S> from_blob(const TensorBlob& t) {
  if (t.shape.size() != 2)
    throw std::runtime_error("tensor '" + t.name + "' is not 2-D");
  MatX<S> m(t.shape[0], t.shape[1]);
  size_t i = 0;
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      m(r, c) = static_cast<S>(t.data[i++]);
  return m;
}

template <typename S>
void registry_to_checkpoint(ParamRegistry<S>& reg, Checkpoint& ck) {
  for (auto& [name, v] : reg.trainable)
    ck.tensors.push_back(to_blob<S>(name, v.value()));
  for (auto& [name, m] : reg.buffers)
    ck.tensors.push_back(to_blob<S>(name, *m));
}

template <typename S>
void registry_from_checkpoint(ParamRegistry<S>& reg, const Checkpoint& ck) {
  for (auto& [name, v] : reg.trainable) {
    MatX<S> m = from_blob<S>(ck.require(name));
    if (m.rows() != v.rows() || m.cols() != v.cols())
      throw std::runtime_error("tensor '" + name + "' shape mismatch on load");
    v.value_mut() = std::move(m);
  }
  for (auto& [name, buf] : reg.buffers) {
    MatX<S> m = from_blob<S>(ck.require(name));
    if (m.rows() != buf->rows() || m.cols() != buf->cols())
      throw std::runtime_error("tensor '" + name + "' shape mismatch on load");
    *buf = std::move(m);
  }
}

}  // namespace pqmotion
