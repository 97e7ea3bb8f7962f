#pragma once

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

#include "pqmotion/types.hpp"

namespace pqmotion {

// One named tensor in a checkpoint. Payloads are little-endian 32-bit floats,
// row-major; shape is [rows, cols] for the dense 2-D tensors used throughout.
struct TensorBlob {
  std::string name;
  std::vector<int64_t> shape;
  std::vector<float> data;

  int64_t element_count() const {
    int64_t n = 1;
    for (int64_t e : shape) n *= e;
    return n;
  }
};

// Shared container for every trainable stage: a JSON manifest (stage tag,
// config snapshot, seed, tensor directory) followed by a raw float payload.
struct Checkpoint {
  int version = 1;
  std::string stage;  // "pqvae" | "predictor" | "refiner"
  nlohmann::json config;
  uint64_t seed = 0;
  std::vector<TensorBlob> tensors;

  const TensorBlob* find(const std::string& name) const {
    for (const auto& t : tensors)
      if (t.name == name) return &t;
    return nullptr;
  }
  const TensorBlob& require(const std::string& name) const {
    const TensorBlob* t = find(name);
    if (!t) throw std::runtime_error("checkpoint missing tensor: " + name);
    return *t;
  }
};

class StageMismatchError : public std::runtime_error {
 public:
  StageMismatchError(const std::string& expected, const std::string& found)
      : std::runtime_error("checkpoint stage mismatch: expected '" + expected +
                           "', found '" + found + "'") {}
};

void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);
Checkpoint load_checkpoint(const std::string& path,
                           const std::string& expected_stage);

}  // namespace pqmotion
