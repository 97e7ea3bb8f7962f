#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace pqmotion {

// Sequences are stored frames x dims in 32-bit floats, matching the on-disk
// corpus payload bit for bit; models convert to their scalar type at the
// batch boundary.
using MotionMat = Eigen::MatrixXf;
using AudioMat = Eigen::MatrixXf;

struct PartRange {
  int lo = 0, hi = 0;  // [lo, hi)
  int size() const { return hi - lo; }
};

struct PartLayout {
  PartRange face{0, 6}, body{6, 12}, hand{12, 16};

  void validate(int motion_dims) const {
    auto ok = [](const PartRange& r) { return r.lo >= 0 && r.lo < r.hi; };
    if (!ok(face) || !ok(body) || !ok(hand))
      throw std::invalid_argument("part layout: ranges must be non-empty");
    if (face.hi != body.lo || body.hi != hand.lo || hand.hi != motion_dims ||
        face.lo != 0)
      throw std::invalid_argument(
          "part layout: face/body/hand must tile [0, motion_dims)");
  }

  PartRange part(const std::string& name) const {
    if (name == "face") return face;
    if (name == "body") return body;
    if (name == "hand") return hand;
    throw std::invalid_argument("unknown part: " + name);
  }
};

struct Event {
  uint32_t frame = 0;
  uint32_t type = 0;
  uint32_t mode = 0;
};

struct SequenceRecord {
  int speaker_id = 0;
  MotionMat motion;  // frames x motion_dims
  AudioMat audio;    // frames x audio_dims
  std::vector<Event> events;
};

struct CorpusConfig {
  int num_sequences = 512;
  int frames = 64;
  int motion_dims = 16;
  PartLayout parts;
  int audio_dims = 8;
  int num_event_types = 4;
  int num_speakers = 4;
  int modes_per_event = 3;
  double noise_std = 0.02;
  double event_rate = 1.0 / 12.0;  // expected events per frame
  uint64_t seed = 0;

  void validate() const {
    if (num_sequences < 1) throw std::invalid_argument("corpus: num_sequences < 1");
    if (frames < 2) throw std::invalid_argument("corpus: frames < 2");
    if (num_event_types < 1)
      throw std::invalid_argument("corpus: zero event types");
    if (num_speakers < 1) throw std::invalid_argument("corpus: zero speakers");
    if (modes_per_event < 2)
      throw std::invalid_argument("corpus: modes_per_event must be >= 2");
    if (noise_std < 0) throw std::invalid_argument("corpus: negative noise_std");
    if (event_rate < 0) throw std::invalid_argument("corpus: negative event_rate");
    if (audio_dims < num_event_types + 1)
      throw std::invalid_argument(
          "corpus: audio_dims must cover event channels plus speaker channel");
    parts.validate(motion_dims);
  }
};

struct Corpus {
  CorpusConfig config;
  std::vector<SequenceRecord> sequences;
};

// 1 = context / known frame, 0 = generated frame.
struct FrameMask {
  Eigen::VectorX<uint8_t> bits;

  static FrameMask zeros(int n) {
    FrameMask m;
    m.bits = Eigen::VectorX<uint8_t>::Zero(n);
    return m;
  }
  static FrameMask ones(int n) {
    FrameMask m;
    m.bits = Eigen::VectorX<uint8_t>::Constant(n, 1);
    return m;
  }
  int size() const { return static_cast<int>(bits.size()); }
  int context_count() const { return static_cast<int>(bits.template cast<int>().sum()); }
};

// Code indices over (time step, subspace) with a keep mask
// (1 = known/kept, 0 = masked).
struct CodeGrid {
  Eigen::MatrixXi indices;                              // N_d x G
  Eigen::Matrix<uint8_t, Eigen::Dynamic, Eigen::Dynamic> keep;  // N_d x G

  static CodeGrid all_masked(int nd, int groups) {
    CodeGrid g;
    g.indices = Eigen::MatrixXi::Zero(nd, groups);
    g.keep = Eigen::Matrix<uint8_t, Eigen::Dynamic, Eigen::Dynamic>::Zero(nd, groups);
    return g;
  }
  int steps() const { return static_cast<int>(indices.rows()); }
  int groups() const { return static_cast<int>(indices.cols()); }
  int masked_count() const {
    int n = 0;
    for (Eigen::Index i = 0; i < keep.rows(); ++i)
      for (Eigen::Index j = 0; j < keep.cols(); ++j)
        if (!keep(i, j)) ++n;
    return n;
  }
  bool fully_kept() const { return masked_count() == 0; }
};

// File-format violations carry the byte offset where parsing failed.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& msg, size_t offset)
      : std::runtime_error(msg + " (at byte offset " + std::to_string(offset) +
                           ")"),
        offset_(offset) {}
  size_t offset() const { return offset_; }

 private:
  size_t offset_;
};

}  // namespace pqmotion
