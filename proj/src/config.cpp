#include "pqmotion/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace pqmotion {

using nlohmann::json;

namespace {

// Tracks which keys of one JSON object were consumed so leftovers can be
// reported as schema violations.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object())
      throw std::invalid_argument("config: " + path_ + " must be an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    auto it = j_.find(key);
    if (it == j_.end()) return;
    seen_.insert(key);
    try {
      out = it->get<T>();
    } catch (const json::exception&) {
      throw std::invalid_argument("config: bad type for " + path_ + "." + key);
    }
  }

  bool has(const char* key) const { return j_.contains(key); }

  const json& raw(const char* key) {
    seen_.insert(key);
    return j_.at(key);
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key()))
        throw std::invalid_argument("config: unknown key " + path_ + "." +
                                    it.key());
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

PartRange parse_range(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 2)
    throw std::invalid_argument("config: " + path + " must be [lo, hi)");
  return {j.at(0).get<int>(), j.at(1).get<int>()};
}

void parse_corpus(const json& j, CorpusConfig& c) {
  Section s(j, "corpus");
  s.get("num_sequences", c.num_sequences);
  s.get("frames", c.frames);
  s.get("motion_dims", c.motion_dims);
  s.get("audio_dims", c.audio_dims);
  s.get("num_event_types", c.num_event_types);
  s.get("num_speakers", c.num_speakers);
  s.get("modes_per_event", c.modes_per_event);
  s.get("noise_std", c.noise_std);
  s.get("event_rate", c.event_rate);
  s.get("seed", c.seed);
  if (s.has("part_layout")) {
    Section p(s.raw("part_layout"), "corpus.part_layout");
    if (p.has("face")) c.parts.face = parse_range(p.raw("face"), "corpus.part_layout.face");
    if (p.has("body")) c.parts.body = parse_range(p.raw("body"), "corpus.part_layout.body");
    if (p.has("hand")) c.parts.hand = parse_range(p.raw("hand"), "corpus.part_layout.hand");
    p.finish();
  }
  s.finish();
  c.validate();
}

void parse_pqvae(const json& j, PqVaeSettings& c) {
  Section s(j, "pqvae");
  s.get("groups", c.groups);
  s.get("codebook_size", c.codebook_size);
  s.get("code_dim", c.code_dim);
  s.get("hidden", c.hidden);
  s.get("window", c.window);
  s.get("commitment_beta", c.commitment_beta);
  s.get("ema_decay", c.ema_decay);
  s.get("ema_eps", c.ema_eps);
  s.get("reset_threshold", c.reset_threshold);
  s.get("norm", c.norm);
  s.get("lrelu_slope", c.lrelu_slope);
  s.finish();
  if (c.groups < 1 || c.codebook_size < 1 || c.code_dim < 1 || c.hidden < 1)
    throw std::invalid_argument("config: pqvae sizes must be positive");
  if (c.window != 8)
    throw std::invalid_argument(
        "config: pqvae.window is fixed at 8 by the encoder architecture");
  if (c.norm != "channel" && c.norm != "stepwise")
    throw std::invalid_argument("config: pqvae.norm must be channel|stepwise");
  if (!(c.ema_decay > 0.0 && c.ema_decay < 1.0))
    throw std::invalid_argument("config: pqvae.ema_decay must be in (0,1)");
  if (!(c.lrelu_slope > 0.0 && c.lrelu_slope < 1.0))
    throw std::invalid_argument("config: pqvae.lrelu_slope must be in (0,1)");
  if (c.commitment_beta < 0.0)
    throw std::invalid_argument("config: pqvae.commitment_beta must be >= 0");
}

void parse_predictor(const json& j, PredictorSettings& c) {
  Section s(j, "predictor");
  s.get("d_model", c.d_model);
  s.get("heads", c.heads);
  s.get("blocks", c.blocks);
  s.get("ffn_hidden", c.ffn_hidden);
  s.get("id_dim", c.id_dim);
  s.get("pe", c.pe);
  s.get("iterations", c.iterations);
  s.get("temperature", c.temperature);
  s.get("use_identity", c.use_identity);
  s.get("use_context", c.use_context);
  s.get("max_time", c.max_time);
  s.finish();
  static const std::set<std::string> kinds = {"2d-sine", "1d-sine", "2d-train",
                                              "1d-train"};
  if (!kinds.count(c.pe))
    throw std::invalid_argument(
        "config: predictor.pe must be one of 2d-sine|1d-sine|2d-train|1d-train");
  if (c.d_model % 2 != 0)
    throw std::invalid_argument("config: predictor.d_model must be even");
  if (c.heads < 1 || c.d_model % c.heads != 0)
    throw std::invalid_argument(
        "config: predictor.d_model must be divisible by heads");
  if (c.iterations < 1)
    throw std::invalid_argument("config: predictor.iterations must be >= 1");
  if (c.temperature < 0.0)
    throw std::invalid_argument("config: predictor.temperature must be >= 0");
}

void parse_refiner(const json& j, RefinerSettings& c) {
  Section s(j, "refiner");
  s.get("d_model", c.d_model);
  s.get("heads", c.heads);
  s.get("blocks", c.blocks);
  s.get("ffn_hidden", c.ffn_hidden);
  s.get("context_prob", c.context_prob);
  s.get("context_min", c.context_min);
  s.get("context_max", c.context_max);
  s.finish();
  if (c.heads < 1 || c.d_model % c.heads != 0)
    throw std::invalid_argument(
        "config: refiner.d_model must be divisible by heads");
  if (c.context_prob < 0.0 || c.context_prob > 1.0)
    throw std::invalid_argument("config: refiner.context_prob must be in [0,1]");
  if (c.context_min < 1 || c.context_max < c.context_min)
    throw std::invalid_argument("config: refiner context span is invalid");
}

void parse_train(const json& j, TrainSettings& c) {
  Section s(j, "train");
  s.get("epochs_pqvae", c.epochs_pqvae);
  s.get("epochs_predictor", c.epochs_predictor);
  s.get("epochs_refiner", c.epochs_refiner);
  s.get("batch_size", c.batch_size);
  s.get("lr", c.lr);
  s.get("beta1", c.beta1);
  s.get("beta2", c.beta2);
  s.get("weight_decay", c.weight_decay);
  if (s.has("split")) {
    const json& sp = s.raw("split");
    if (!sp.is_array() || sp.size() != 3)
      throw std::invalid_argument("config: train.split must have 3 ratios");
    for (int i = 0; i < 3; ++i) c.split[i] = sp.at(i).get<double>();
  }
  s.finish();
  if (c.batch_size < 1)
    throw std::invalid_argument("config: train.batch_size must be >= 1");
  if (!(c.lr > 0.0))
    throw std::invalid_argument("config: train.lr must be > 0");
  if (!(c.beta1 > 0.0 && c.beta1 < 1.0 && c.beta2 > 0.0 && c.beta2 < 1.0))
    throw std::invalid_argument("config: train.beta1/beta2 must be in (0,1)");
  if (c.weight_decay < 0.0)
    throw std::invalid_argument("config: train.weight_decay must be >= 0");
}

void parse_eval(const json& j, EvalSettings& c) {
  Section s(j, "eval");
  s.get("num_samples", c.num_samples);
  s.get("mae_samples", c.mae_samples);
  s.get("bc_sigma", c.bc_sigma);
  s.get("part_encoder_epochs", c.part_encoder_epochs);
  s.get("shrinkage", c.shrinkage);
  s.finish();
  if (c.num_samples < 2)
    throw std::invalid_argument("config: eval.num_samples must be >= 2");
}

void parse_bench(const json& j, BenchSettings& c) {
  Section s(j, "bench");
  s.get("runs", c.runs);
  s.get("frames", c.frames);
  s.finish();
  if (c.runs < 1) throw std::invalid_argument("config: bench.runs must be >= 1");
}

}  // namespace

Config config_from_json(const json& j) {
  if (!j.is_object())
    throw std::invalid_argument("config: top level must be an object");
  static const std::set<std::string> known = {
      "corpus", "pqvae", "predictor", "refiner", "train", "eval", "bench"};
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key()))
      throw std::invalid_argument("config: unknown section " + it.key());

  Config c;
  if (j.contains("corpus")) parse_corpus(j.at("corpus"), c.corpus);
  if (j.contains("pqvae")) parse_pqvae(j.at("pqvae"), c.pqvae);
  if (j.contains("predictor")) parse_predictor(j.at("predictor"), c.predictor);
  if (j.contains("refiner")) parse_refiner(j.at("refiner"), c.refiner);
  if (j.contains("train")) parse_train(j.at("train"), c.train);
  if (j.contains("eval")) parse_eval(j.at("eval"), c.eval);
  if (j.contains("bench")) parse_bench(j.at("bench"), c.bench);
  return c;
}

Config load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::invalid_argument("cannot read config: " + path);
  json j = json::parse(is, nullptr, false);
  if (j.is_discarded())
    throw std::invalid_argument("config is not valid JSON: " + path);
  return config_from_json(j);
}

json config_to_json(const Config& c) {
  return json{
      {"corpus",
       {{"num_sequences", c.corpus.num_sequences},
        {"frames", c.corpus.frames},
        {"motion_dims", c.corpus.motion_dims},
        {"part_layout",
         {{"face", {c.corpus.parts.face.lo, c.corpus.parts.face.hi}},
          {"body", {c.corpus.parts.body.lo, c.corpus.parts.body.hi}},
          {"hand", {c.corpus.parts.hand.lo, c.corpus.parts.hand.hi}}}},
        {"audio_dims", c.corpus.audio_dims},
        {"num_event_types", c.corpus.num_event_types},
        {"num_speakers", c.corpus.num_speakers},
        {"modes_per_event", c.corpus.modes_per_event},
        {"noise_std", c.corpus.noise_std},
        {"event_rate", c.corpus.event_rate},
        {"seed", c.corpus.seed}}},
      {"pqvae",
       {{"groups", c.pqvae.groups},
        {"codebook_size", c.pqvae.codebook_size},
        {"code_dim", c.pqvae.code_dim},
        {"hidden", c.pqvae.hidden},
        {"window", c.pqvae.window},
        {"commitment_beta", c.pqvae.commitment_beta},
        {"ema_decay", c.pqvae.ema_decay},
        {"ema_eps", c.pqvae.ema_eps},
        {"reset_threshold", c.pqvae.reset_threshold},
        {"norm", c.pqvae.norm},
        {"lrelu_slope", c.pqvae.lrelu_slope}}},
      {"predictor",
       {{"d_model", c.predictor.d_model},
        {"heads", c.predictor.heads},
        {"blocks", c.predictor.blocks},
        {"ffn_hidden", c.predictor.ffn_hidden},
        {"id_dim", c.predictor.id_dim},
        {"pe", c.predictor.pe},
        {"iterations", c.predictor.iterations},
        {"temperature", c.predictor.temperature},
        {"use_identity", c.predictor.use_identity},
        {"use_context", c.predictor.use_context},
        {"max_time", c.predictor.max_time}}},
      {"refiner",
       {{"d_model", c.refiner.d_model},
        {"heads", c.refiner.heads},
        {"blocks", c.refiner.blocks},
        {"ffn_hidden", c.refiner.ffn_hidden},
        {"context_prob", c.refiner.context_prob},
        {"context_min", c.refiner.context_min},
        {"context_max", c.refiner.context_max}}},
      {"train",
       {{"epochs_pqvae", c.train.epochs_pqvae},
        {"epochs_predictor", c.train.epochs_predictor},
        {"epochs_refiner", c.train.epochs_refiner},
        {"batch_size", c.train.batch_size},
        {"lr", c.train.lr},
        {"beta1", c.train.beta1},
        {"beta2", c.train.beta2},
        {"weight_decay", c.train.weight_decay},
        {"split", {c.train.split[0], c.train.split[1], c.train.split[2]}}}},
      {"eval",
       {{"num_samples", c.eval.num_samples},
        {"mae_samples", c.eval.mae_samples},
        {"bc_sigma", c.eval.bc_sigma},
        {"part_encoder_epochs", c.eval.part_encoder_epochs},
        {"shrinkage", c.eval.shrinkage}}},
      {"bench", {{"runs", c.bench.runs}, {"frames", c.bench.frames}}}};
}

std::string config_diff(const json& a, const json& b) {
  std::ostringstream out;
  std::function<void(const json&, const json&, const std::string&)> walk =
      [&](const json& x, const json& y, const std::string& path) {
        if (x.is_object() && y.is_object()) {
          std::set<std::string> keys;
          for (auto it = x.begin(); it != x.end(); ++it) keys.insert(it.key());
          for (auto it = y.begin(); it != y.end(); ++it) keys.insert(it.key());
          for (const std::string& k : keys) {
            std::string sub = path.empty() ? k : path + "." + k;
            if (!x.contains(k))
              out << sub << ": <absent> -> " << y.at(k).dump() << "\n";
            else if (!y.contains(k))
              out << sub << ": " << x.at(k).dump() << " -> <absent>\n";
            else
              walk(x.at(k), y.at(k), sub);
          }
        } else if (x != y) {
          out << path << ": " << x.dump() << " -> " << y.dump() << "\n";
        }
      };
  walk(a, b, "");
  return out.str();
}

}  // namespace pqmotion
