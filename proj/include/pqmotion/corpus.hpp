#pragma once

#include <array>
#include <string>
#include <vector>

#include "pqmotion/rng.hpp"
#include "pqmotion/types.hpp"

namespace pqmotion {

// Fixed per-(type, mode) motion template. Every part range gets components
// bounded away from zero so event-aligned velocity peaks exist on face and
// body channels alike; the sign and magnitude vary with (type, mode).
Eigen::VectorXd event_template(const CorpusConfig& cfg, uint32_t type,
                               uint32_t mode);

// Gaussian bump width in frames, deterministic in (seed, frame, type) so
// sequences sharing an event placement also share its temporal profile.
double event_width(uint64_t seed, uint32_t frame, uint32_t type);

// Noise-free renderings; the building blocks for both generation and the
// closed-form test oracles.
MotionMat render_motion(const CorpusConfig& cfg, int speaker,
                        const std::vector<Event>& events);
AudioMat render_audio(const CorpusConfig& cfg, int speaker,
                      const std::vector<Event>& events);

std::vector<Event> sample_events(const CorpusConfig& cfg, Rng& rng);

// Builds one full record (noise included) for an explicit event log. Used by
// generate_corpus and directly by tests that pin event placement.
SequenceRecord make_record(const CorpusConfig& cfg, int speaker,
                           std::vector<Event> events, Rng& noise_rng);

// Pure function of the config; per-sequence RNG streams derive from
// (seed, sequence index).
Corpus generate_corpus(const CorpusConfig& cfg);

struct Splits {
  std::vector<SequenceRecord> train, val, test;
};

// Deterministic shuffled partition; ratios must sum to 1 within 1e-9.
Splits split(const Corpus& corpus, std::array<double, 3> ratios,
             uint64_t seed);

void write_corpus(const std::string& path, const Corpus& corpus);
Corpus read_corpus(const std::string& path);

// Single-sequence motion container (magic PQMO1), same header/payload scheme.
void write_motion(const std::string& path, const MotionMat& motion,
                  const PartLayout& parts);
MotionMat read_motion(const std::string& path);

}  // namespace pqmotion
