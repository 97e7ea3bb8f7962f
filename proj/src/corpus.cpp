#include "pqmotion/corpus.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

namespace pqmotion {

using nlohmann::json;

namespace {

constexpr uint64_t kSaltSequence = 0x5e71;
constexpr uint64_t kSaltTemplate = 0x7e39;
constexpr uint64_t kSaltWidth = 0x91d1;
constexpr uint64_t kSaltSplit = 0xa03f;

constexpr char kCorpusMagic[] = "PQMC1\n";
constexpr char kMotionMagic[] = "PQMO1\n";
constexpr int kFormatVersion = 1;

double speaker_amp(int speaker, int num_speakers) {
  return 1.0 + 0.25 * static_cast<double>(speaker) / num_speakers;
}

double speaker_channel_level(int speaker, int num_speakers) {
  return static_cast<double>(speaker + 1) / num_speakers;
}

// ---- little-endian stream helpers (offset-tracked for error reporting) ----

void put_u32(std::ostream& os, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

void put_f32(std::ostream& os, float f) {
  uint32_t v;
  std::memcpy(&v, &f, 4);
  put_u32(os, v);
}

struct Reader {
  std::ifstream in;
  size_t offset = 0;

  explicit Reader(const std::string& path) : in(path, std::ios::binary) {
    if (!in) throw FormatError("cannot open file: " + path, 0);
  }

  void read_bytes(void* dst, size_t n, const char* what) {
    in.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (static_cast<size_t>(in.gcount()) != n)
      throw FormatError(std::string("unexpected end of file while reading ") +
                            what,
                        offset);
    offset += n;
  }

  uint32_t read_u32(const char* what) {
    unsigned char b[4];
    read_bytes(b, 4, what);
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) |
           (static_cast<uint32_t>(b[3]) << 24);
  }

  float read_f32(const char* what) {
    uint32_t v = read_u32(what);
    float f;
    std::memcpy(&f, &v, 4);
    return f;
  }

  bool at_eof() { return in.peek() == std::char_traits<char>::eof(); }
};

void write_matrix_f32(std::ostream& os, const Eigen::MatrixXf& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) put_f32(os, m(r, c));
}

Eigen::MatrixXf read_matrix_f32(Reader& rd, int rows, int cols,
                                const char* what) {
  Eigen::MatrixXf m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = rd.read_f32(what);
  return m;
}

json part_layout_to_json(const PartLayout& p) {
  return json{{"face", {p.face.lo, p.face.hi}},
              {"body", {p.body.lo, p.body.hi}},
              {"hand", {p.hand.lo, p.hand.hi}}};
}

PartLayout part_layout_from_json(const json& j) {
  PartLayout p;
  p.face = {j.at("face").at(0).get<int>(), j.at("face").at(1).get<int>()};
  p.body = {j.at("body").at(0).get<int>(), j.at("body").at(1).get<int>()};
  p.hand = {j.at("hand").at(0).get<int>(), j.at("hand").at(1).get<int>()};
  return p;
}

void check_magic(Reader& rd, const char* magic) {
  char buf[6];
  rd.read_bytes(buf, 6, "magic");
  if (std::memcmp(buf, magic, 6) != 0)
    throw FormatError("bad magic", 0);
}

json read_header(Reader& rd) {
  uint32_t len = rd.read_u32("header length");
  if (len == 0 || len > (1u << 24))
    throw FormatError("implausible header length", rd.offset - 4);
  std::string text(len, '\0');
  rd.read_bytes(text.data(), len, "header JSON");
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded())
    throw FormatError("header is not valid JSON", rd.offset - len);
  return j;
}

void write_header(std::ostream& os, const json& j) {
  std::string text = j.dump();
  put_u32(os, static_cast<uint32_t>(text.size()));
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
}

}  // namespace

Eigen::VectorXd event_template(const CorpusConfig& cfg, uint32_t type,
                               uint32_t mode) {
  Rng rng = Rng::stream(cfg.seed, {kSaltTemplate, type, mode});
  Eigen::VectorXd t(cfg.motion_dims);
  for (int d = 0; d < cfg.motion_dims; ++d) {
    double mag = rng.uniform(0.5, 1.5);
    double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
    t(d) = sign * mag;
  }
  // Fix each part's norm so every event drives face and body with the same
  // energy; modes and types only steer the direction. Equal apex heights are
  // what make peak-based oracles (coordination, beat alignment) clean.
  auto renorm = [&t](PartRange r, double target) {
    double norm = t.segment(r.lo, r.size()).norm();
    if (norm > 0) t.segment(r.lo, r.size()) *= target / norm;
  };
  renorm(cfg.parts.face, 2.0);
  renorm(cfg.parts.body, 2.0);
  renorm(cfg.parts.hand, 1.0);
  return t;
}

double event_width(uint64_t seed, uint32_t frame, uint32_t type) {
  Rng rng = Rng::stream(seed, {kSaltWidth, frame, type});
  return rng.uniform(2.0, 6.0);
}

MotionMat render_motion(const CorpusConfig& cfg, int speaker,
                        const std::vector<Event>& events) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(cfg.frames, cfg.motion_dims);
  const double amp = speaker_amp(speaker, cfg.num_speakers);
  for (const Event& ev : events) {
    const Eigen::VectorXd tmpl = event_template(cfg, ev.type, ev.mode);
    const double sigma = event_width(cfg.seed, ev.frame, ev.type);
    for (int n = 0; n < cfg.frames; ++n) {
      double dt = static_cast<double>(n) - static_cast<double>(ev.frame);
      double bump = std::exp(-dt * dt / (2.0 * sigma * sigma));
      m.row(n) += amp * bump * tmpl.transpose();
    }
  }
  return m.cast<float>();
}

AudioMat render_audio(const CorpusConfig& cfg, int speaker,
                      const std::vector<Event>& events) {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(cfg.frames, cfg.audio_dims);
  for (const Event& ev : events) {
    const double sigma = event_width(cfg.seed, ev.frame, ev.type);
    for (int n = 0; n < cfg.frames; ++n) {
      double dt = static_cast<double>(n) - static_cast<double>(ev.frame);
      a(n, ev.type) += std::exp(-dt * dt / (2.0 * sigma * sigma));
    }
  }
  a.col(cfg.num_event_types).setConstant(
      speaker_channel_level(speaker, cfg.num_speakers));
  return a.cast<float>();
}

std::vector<Event> sample_events(const CorpusConfig& cfg, Rng& rng) {
  std::vector<Event> events;
  if (cfg.event_rate <= 0.0) return events;
  const double mean_gap = 1.0 / cfg.event_rate;
  double t = 0.0;
  while (true) {
    double gap = rng.exponential(mean_gap);
    if (!std::isfinite(gap)) break;
    t += std::max(1.0, std::round(gap));
    if (t >= cfg.frames) break;
    Event ev;
    ev.frame = static_cast<uint32_t>(t);
    ev.type = static_cast<uint32_t>(rng.uniform_int(0, cfg.num_event_types));
    ev.mode = static_cast<uint32_t>(rng.uniform_int(0, cfg.modes_per_event));
    events.push_back(ev);
  }
  return events;
}

SequenceRecord make_record(const CorpusConfig& cfg, int speaker,
                           std::vector<Event> events, Rng& noise_rng) {
  for (size_t i = 1; i < events.size(); ++i)
    if (events[i].frame <= events[i - 1].frame)
      throw std::invalid_argument("event log frames must be strictly increasing");
  if (!events.empty() && events.back().frame >= static_cast<uint32_t>(cfg.frames))
    throw std::invalid_argument("event frame beyond sequence length");

  SequenceRecord rec;
  rec.speaker_id = speaker;
  rec.events = std::move(events);

  Eigen::MatrixXd motion =
      render_motion(cfg, speaker, rec.events).cast<double>();
  Eigen::MatrixXd audio = render_audio(cfg, speaker, rec.events).cast<double>();
  if (cfg.noise_std > 0.0) {
    for (int n = 0; n < cfg.frames; ++n)
      for (int d = 0; d < cfg.motion_dims; ++d)
        motion(n, d) += cfg.noise_std * noise_rng.normal();
    for (int n = 0; n < cfg.frames; ++n)
      for (int d = 0; d < cfg.audio_dims; ++d)
        audio(n, d) += cfg.noise_std * noise_rng.normal();
  }
  rec.motion = motion.cast<float>();
  rec.audio = audio.cast<float>();
  return rec;
}

Corpus generate_corpus(const CorpusConfig& cfg) {
  cfg.validate();
  Corpus corpus;
  corpus.config = cfg;
  corpus.sequences.reserve(cfg.num_sequences);
  for (int i = 0; i < cfg.num_sequences; ++i) {
    Rng rng = Rng::stream(cfg.seed, {kSaltSequence, static_cast<uint64_t>(i)});
    int speaker = rng.uniform_int(0, cfg.num_speakers);
    std::vector<Event> events = sample_events(cfg, rng);
    corpus.sequences.push_back(make_record(cfg, speaker, std::move(events), rng));
  }
  return corpus;
}

Splits split(const Corpus& corpus, std::array<double, 3> ratios,
             uint64_t seed) {
  if (corpus.sequences.empty())
    throw std::invalid_argument("split: empty corpus");
  double sum = ratios[0] + ratios[1] + ratios[2];
  if (std::abs(sum - 1.0) > 1e-9)
    throw std::invalid_argument("split: ratios must sum to 1");
  for (double r : ratios)
    if (r < 0) throw std::invalid_argument("split: negative ratio");

  const size_t n = corpus.sequences.size();
  std::vector<size_t> idx(n);
  std::iota(idx.begin(), idx.end(), size_t{0});
  Rng rng = Rng::stream(seed, {kSaltSplit});
  for (size_t i = n; i > 1; --i) {
    size_t j = static_cast<size_t>(rng.uniform_int(0, static_cast<int>(i)));
    std::swap(idx[i - 1], idx[j]);
  }

  size_t n_train = static_cast<size_t>(std::llround(ratios[0] * static_cast<double>(n)));
  size_t n_val = static_cast<size_t>(std::llround(ratios[1] * static_cast<double>(n)));
  n_train = std::min(n_train, n);
  n_val = std::min(n_val, n - n_train);

  Splits s;
  for (size_t i = 0; i < n; ++i) {
    const SequenceRecord& rec = corpus.sequences[idx[i]];
    if (i < n_train)
      s.train.push_back(rec);
    else if (i < n_train + n_val)
      s.val.push_back(rec);
    else
      s.test.push_back(rec);
  }
  return s;
}

void write_corpus(const std::string& path, const Corpus& corpus) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path);
  os.write(kCorpusMagic, 6);
  const CorpusConfig& c = corpus.config;
  json header = {{"version", kFormatVersion},
                 {"num_sequences", corpus.sequences.size()},
                 {"frames", c.frames},
                 {"motion_dims", c.motion_dims},
                 {"audio_dims", c.audio_dims},
                 {"part_layout", part_layout_to_json(c.parts)},
                 {"num_speakers", c.num_speakers},
                 {"seed", c.seed}};
  write_header(os, header);
  for (const SequenceRecord& rec : corpus.sequences) {
    put_u32(os, static_cast<uint32_t>(rec.speaker_id));
    write_matrix_f32(os, rec.motion);
    write_matrix_f32(os, rec.audio);
    put_u32(os, static_cast<uint32_t>(rec.events.size()));
    for (const Event& ev : rec.events) {
      put_u32(os, ev.frame);
      put_u32(os, ev.type);
      put_u32(os, ev.mode);
    }
  }
  if (!os) throw std::runtime_error("write failed: " + path);
}

Corpus read_corpus(const std::string& path) {
  Reader rd(path);
  check_magic(rd, kCorpusMagic);
  json h = read_header(rd);

  Corpus corpus;
  CorpusConfig& c = corpus.config;
  try {
    if (h.at("version").get<int>() != kFormatVersion)
      throw FormatError("unsupported corpus version", 6);
    c.num_sequences = h.at("num_sequences").get<int>();
    c.frames = h.at("frames").get<int>();
    c.motion_dims = h.at("motion_dims").get<int>();
    c.audio_dims = h.at("audio_dims").get<int>();
    c.parts = part_layout_from_json(h.at("part_layout"));
    c.num_speakers = h.at("num_speakers").get<int>();
    c.seed = h.at("seed").get<uint64_t>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("corpus header missing field: ") + e.what(),
                      6);
  }
  if (c.frames < 1 || c.motion_dims < 1 || c.audio_dims < 1 ||
      c.num_sequences < 0)
    throw FormatError("corpus header has implausible dimensions", 6);

  corpus.sequences.reserve(c.num_sequences);
  for (int i = 0; i < c.num_sequences; ++i) {
    SequenceRecord rec;
    rec.speaker_id = static_cast<int>(rd.read_u32("speaker id"));
    if (rec.speaker_id < 0 || rec.speaker_id >= c.num_speakers)
      throw FormatError("speaker id out of range", rd.offset - 4);
    rec.motion = read_matrix_f32(rd, c.frames, c.motion_dims, "motion payload");
    rec.audio = read_matrix_f32(rd, c.frames, c.audio_dims, "audio payload");
    uint32_t n_events = rd.read_u32("event count");
    if (n_events > (1u << 20))
      throw FormatError("implausible event count", rd.offset - 4);
    rec.events.resize(n_events);
    for (uint32_t e = 0; e < n_events; ++e) {
      rec.events[e].frame = rd.read_u32("event frame");
      rec.events[e].type = rd.read_u32("event type");
      rec.events[e].mode = rd.read_u32("event mode");
    }
    corpus.sequences.push_back(std::move(rec));
  }
  if (!rd.at_eof())
    throw FormatError("trailing bytes after last sequence", rd.offset);
  return corpus;
}

void write_motion(const std::string& path, const MotionMat& motion,
                  const PartLayout& parts) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path);
  os.write(kMotionMagic, 6);
  json header = {{"version", kFormatVersion},
                 {"frames", motion.rows()},
                 {"motion_dims", motion.cols()},
                 {"part_layout", part_layout_to_json(parts)}};
  write_header(os, header);
  write_matrix_f32(os, motion);
  if (!os) throw std::runtime_error("write failed: " + path);
}

MotionMat read_motion(const std::string& path) {
  Reader rd(path);
  check_magic(rd, kMotionMagic);
  json h = read_header(rd);
  int frames = 0, dims = 0;
  try {
    frames = h.at("frames").get<int>();
    dims = h.at("motion_dims").get<int>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("motion header missing field: ") + e.what(),
                      6);
  }
  if (frames < 1 || dims < 1)
    throw FormatError("motion header has implausible dimensions", 6);
  MotionMat m = read_matrix_f32(rd, frames, dims, "motion payload");
  if (!rd.at_eof())
    throw FormatError("trailing bytes after motion payload", rd.offset);
  return m;
}

}  // namespace pqmotion
