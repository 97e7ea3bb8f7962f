#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "pqmotion/corpus.hpp"

using namespace pqmotion;

namespace {

CorpusConfig small_config() {
  CorpusConfig c;
  c.num_sequences = 12;
  c.frames = 64;
  c.motion_dims = 16;
  c.audio_dims = 8;
  c.num_event_types = 4;
  c.num_speakers = 4;
  c.modes_per_event = 3;
  c.noise_std = 0.02;
  c.seed = 7;
  return c;
}

bool bit_equal(const Eigen::MatrixXf& a, const Eigen::MatrixXf& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  for (Eigen::Index i = 0; i < a.size(); ++i)
    if (a.data()[i] != b.data()[i]) return false;
  return true;
}

std::string temp_path(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

int peak_velocity_frame(const MotionMat& motion, PartRange part) {
  int best = 0;
  double best_norm = -1.0;
  for (Eigen::Index n = 0; n + 1 < motion.rows(); ++n) {
    double s = 0.0;
    for (int d = part.lo; d < part.hi; ++d) {
      double v = static_cast<double>(motion(n + 1, d)) - motion(n, d);
      s += v * v;
    }
    if (s > best_norm) {
      best_norm = s;
      best = static_cast<int>(n);
    }
  }
  return best;
}

}  // namespace

TEST_CASE("corpus: zero events and zero noise produce silence") {
  CorpusConfig c = small_config();
  c.noise_std = 0.0;
  c.event_rate = 0.0;
  Corpus corpus = generate_corpus(c);
  for (const SequenceRecord& rec : corpus.sequences) {
    CHECK(rec.events.empty());
    CHECK(rec.motion.cwiseAbs().maxCoeff() == 0.0f);
    // audio carries only the speaker-constant channel
    for (int d = 0; d < c.audio_dims; ++d) {
      if (d == c.num_event_types) {
        CHECK(rec.audio.col(d).minCoeff() == rec.audio.col(d).maxCoeff());
        CHECK(rec.audio(0, d) > 0.0f);
      } else {
        CHECK(rec.audio.col(d).cwiseAbs().maxCoeff() == 0.0f);
      }
    }
  }
}

TEST_CASE("corpus: generation is a pure function of the config") {
  CorpusConfig c = small_config();
  Corpus a = generate_corpus(c);
  Corpus b = generate_corpus(c);
  REQUIRE(a.sequences.size() == b.sequences.size());
  for (size_t i = 0; i < a.sequences.size(); ++i) {
    CHECK(a.sequences[i].speaker_id == b.sequences[i].speaker_id);
    CHECK(bit_equal(a.sequences[i].motion, b.sequences[i].motion));
    CHECK(bit_equal(a.sequences[i].audio, b.sequences[i].audio));
  }
}

TEST_CASE("corpus: event logs are strictly increasing and in range") {
  Corpus corpus = generate_corpus(small_config());
  for (const SequenceRecord& rec : corpus.sequences) {
    for (size_t e = 0; e < rec.events.size(); ++e) {
      CHECK(rec.events[e].frame < 64);
      if (e > 0) CHECK(rec.events[e].frame > rec.events[e - 1].frame);
    }
  }
}

TEST_CASE("corpus: modes vary motion but not audio") {
  CorpusConfig c = small_config();
  c.noise_std = 0.0;
  Rng rng(1);
  SequenceRecord a = make_record(c, 1, {{30, 2, 0}}, rng);
  SequenceRecord b = make_record(c, 1, {{30, 2, 1}}, rng);
  CHECK(bit_equal(a.audio, b.audio));
  double gap = (a.motion.cast<double>() - b.motion.cast<double>())
                   .cwiseAbs()
                   .sum();
  CHECK(gap > 0.0);
}

TEST_CASE("corpus: face and body velocity peaks of one event coincide") {
  CorpusConfig c = small_config();
  c.noise_std = 0.0;
  Rng rng(2);
  for (uint32_t type = 0; type < 4; ++type) {
    SequenceRecord rec = make_record(c, 0, {{24, type, 1}}, rng);
    int face_peak = peak_velocity_frame(rec.motion, c.parts.face);
    int body_peak = peak_velocity_frame(rec.motion, c.parts.body);
    CHECK(std::abs(face_peak - body_peak) <= 1);
  }
}

TEST_CASE("corpus: shared event with random modes gives motion variance, same audio") {
  CorpusConfig c = small_config();
  c.noise_std = 0.0;
  Rng rng(3);
  std::vector<SequenceRecord> recs;
  for (int i = 0; i < 8; ++i) {
    uint32_t mode = static_cast<uint32_t>(i % c.modes_per_event);
    recs.push_back(make_record(c, 2, {{20, 1, mode}}, rng));
  }
  for (size_t i = 1; i < recs.size(); ++i)
    CHECK(bit_equal(recs[i].audio, recs[0].audio));

  // event-affected frames must show across-sequence variance in motion
  double max_var = 0.0;
  for (int d = 0; d < c.motion_dims; ++d) {
    double m = 0.0;
    for (const auto& r : recs) m += r.motion(20, d);
    m /= recs.size();
    double v = 0.0;
    for (const auto& r : recs) {
      double diff = r.motion(20, d) - m;
      v += diff * diff;
    }
    max_var = std::max(max_var, v / recs.size());
  }
  CHECK(max_var > 0.0);
}

TEST_CASE("corpus: split sizes, determinism and partition property") {
  CorpusConfig c = small_config();
  c.num_sequences = 10;
  Corpus corpus = generate_corpus(c);

  Splits s = split(corpus, {0.8, 0.1, 0.1}, 5);
  CHECK(s.train.size() == 8);
  CHECK(s.val.size() == 1);
  CHECK(s.test.size() == 1);

  Splits again = split(corpus, {0.8, 0.1, 0.1}, 5);
  CHECK(again.train.size() == s.train.size());
  for (size_t i = 0; i < s.train.size(); ++i)
    CHECK(bit_equal(s.train[i].motion, again.train[i].motion));

  Splits all = split(corpus, {1.0, 0.0, 0.0}, 5);
  CHECK(all.train.size() == 10);
  CHECK(all.val.empty());
  CHECK(all.test.empty());

  // union of splits equals the corpus as a multiset (keyed by motion bytes)
  auto key = [](const SequenceRecord& r) {
    std::string k(reinterpret_cast<const char*>(r.motion.data()),
                  r.motion.size() * sizeof(float));
    return k;
  };
  std::vector<std::string> orig, parts;
  for (const auto& r : corpus.sequences) orig.push_back(key(r));
  for (const auto& r : s.train) parts.push_back(key(r));
  for (const auto& r : s.val) parts.push_back(key(r));
  for (const auto& r : s.test) parts.push_back(key(r));
  std::sort(orig.begin(), orig.end());
  std::sort(parts.begin(), parts.end());
  CHECK(orig == parts);

  CHECK_THROWS_AS(split(Corpus{}, {0.8, 0.1, 0.1}, 5), std::invalid_argument);
  CHECK_THROWS_AS(split(corpus, {0.5, 0.1, 0.1}, 5), std::invalid_argument);
}

TEST_CASE("corpus: invalid configurations are rejected") {
  CorpusConfig c = small_config();
  c.num_event_types = 0;
  CHECK_THROWS_AS(generate_corpus(c), std::invalid_argument);
  c = small_config();
  c.num_speakers = 0;
  CHECK_THROWS_AS(generate_corpus(c), std::invalid_argument);
}

TEST_CASE("corpus: file round-trip is bit-identical") {
  CorpusConfig c = small_config();
  c.num_sequences = 2;
  Corpus corpus = generate_corpus(c);
  std::string path = temp_path("pqmotion_corpus_test.pqmc");
  write_corpus(path, corpus);
  Corpus back = read_corpus(path);
  REQUIRE(back.sequences.size() == 2);
  CHECK(back.config.frames == c.frames);
  CHECK(back.config.motion_dims == c.motion_dims);
  for (size_t i = 0; i < 2; ++i) {
    CHECK(back.sequences[i].speaker_id == corpus.sequences[i].speaker_id);
    CHECK(bit_equal(back.sequences[i].motion, corpus.sequences[i].motion));
    CHECK(bit_equal(back.sequences[i].audio, corpus.sequences[i].audio));
    REQUIRE(back.sequences[i].events.size() ==
            corpus.sequences[i].events.size());
    for (size_t e = 0; e < back.sequences[i].events.size(); ++e) {
      CHECK(back.sequences[i].events[e].frame ==
            corpus.sequences[i].events[e].frame);
      CHECK(back.sequences[i].events[e].mode ==
            corpus.sequences[i].events[e].mode);
    }
  }
  std::remove(path.c_str());
}

TEST_CASE("corpus: corrupted magic fails with a format error") {
  CorpusConfig c = small_config();
  c.num_sequences = 2;
  Corpus corpus = generate_corpus(c);
  std::string path = temp_path("pqmotion_corpus_badmagic.pqmc");
  write_corpus(path, corpus);
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(0);
    f.put('X');
  }
  CHECK_THROWS_AS(read_corpus(path), FormatError);
  std::remove(path.c_str());
}

TEST_CASE("corpus: truncated payload fails with a format error") {
  CorpusConfig c = small_config();
  c.num_sequences = 2;
  Corpus corpus = generate_corpus(c);
  std::string path = temp_path("pqmotion_corpus_trunc.pqmc");
  write_corpus(path, corpus);
  auto size = std::filesystem::file_size(path);
  std::filesystem::resize_file(path, size - 37);
  CHECK_THROWS_AS(read_corpus(path), FormatError);
  std::remove(path.c_str());
}

TEST_CASE("corpus: header frame count inconsistent with payload fails") {
  CorpusConfig c = small_config();
  c.num_sequences = 2;
  c.frames = 64;
  Corpus corpus = generate_corpus(c);
  std::string path = temp_path("pqmotion_corpus_badheader.pqmc");
  write_corpus(path, corpus);

  // shrink the declared frame count; same byte length, inconsistent payload
  std::ifstream in(path, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  in.close();
  size_t pos = bytes.find("\"frames\":64");
  REQUIRE(pos != std::string::npos);
  bytes.replace(pos, 11, "\"frames\":32");
  std::ofstream out(path, std::ios::binary);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.close();

  CHECK_THROWS_AS(read_corpus(path), FormatError);
  std::remove(path.c_str());
}

TEST_CASE("corpus: single-motion container round-trips") {
  CorpusConfig c = small_config();
  Corpus corpus = generate_corpus(c);
  std::string path = temp_path("pqmotion_motion_test.pqmo");
  write_motion(path, corpus.sequences[0].motion, c.parts);
  MotionMat back = read_motion(path);
  CHECK(bit_equal(back, corpus.sequences[0].motion));
  std::remove(path.c_str());
}
