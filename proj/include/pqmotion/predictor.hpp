#pragma once

#include <iostream>

#include "pqmotion/masking.hpp"
#include "pqmotion/posenc.hpp"
#include "pqmotion/pqvae.hpp"

namespace pqmotion {

template <typename S>
struct PredictorConfig {
  int groups = 4;
  int codebook_size = 128;
  int d_model = 64;
  int heads = 4;
  int blocks = 6;
  int ffn_hidden = 128;
  int id_dim = 16;
  int motion_dims = 16;
  int audio_dims = 8;
  int num_speakers = 4;
  int window = 8;
  int max_time = 256;
  PeKind pe = PeKind::Sine2D;
  bool use_identity = true;
  bool use_context = true;
  S lrelu_slope = S(0.2);
  NormMode norm_mode = NormMode::PerChannel;
};

template <typename S>
PredictorConfig<S> predictor_config_from(const Config& c) {
  PredictorConfig<S> p;
  p.groups = c.pqvae.groups;
  p.codebook_size = c.pqvae.codebook_size;
  p.d_model = c.predictor.d_model;
  p.heads = c.predictor.heads;
  p.blocks = c.predictor.blocks;
  p.ffn_hidden = c.predictor.ffn_hidden;
  p.id_dim = c.predictor.id_dim;
  p.motion_dims = c.corpus.motion_dims;
  p.audio_dims = c.corpus.audio_dims;
  p.num_speakers = c.corpus.num_speakers;
  p.window = c.pqvae.window;
  p.max_time = c.predictor.max_time;
  p.pe = pe_kind_from(c.predictor.pe);
  p.use_identity = c.predictor.use_identity;
  p.use_context = c.predictor.use_context;
  p.lrelu_slope = static_cast<S>(c.pqvae.lrelu_slope);
  p.norm_mode = c.pqvae.norm == "stepwise" ? NormMode::PerStep
                                            : NormMode::PerChannel;
  return p;
}

// Self-attention, cross-attention and a feed-forward sublayer with residual
// connections, closed by AdaIN whose scale/shift come from the speaker
// embedding through a per-block affine.
template <typename S>
struct TransformerBlock {
  AttentionWeights<S> self_attn, cross_attn;
  Linear<S> ffn1, ffn2;
  Linear<S> style_scale, style_shift;  // id_dim -> d_model
  S slope = S(0.2);
  S adain_eps = S(1e-5);
  int d_model = 0;

  TransformerBlock() = default;

  TransformerBlock(int d, int heads, int ffn_hidden, int id_dim, S lrelu_slope,
                   Rng& rng)
      : slope(lrelu_slope), d_model(d) {
    self_attn = make_attention<S>(d, heads, rng);
    cross_attn = make_attention<S>(d, heads, rng);
    ffn1 = Linear<S>(d, ffn_hidden, rng);
    ffn2 = Linear<S>(ffn_hidden, d, rng);
    style_scale = Linear<S>(id_dim, d, rng);
    style_scale.b.value_mut().setOnes();  // identity style at zero embedding
    style_shift = Linear<S>(id_dim, d, rng);
  }

  Var<S> operator()(const Var<S>& x_in, const Var<S>& memory,
                    const Var<S>& id_embed) const {
    Var<S> x = x_in + multihead_attention(x_in, x_in, self_attn);
    x = x + multihead_attention(x, memory, cross_attn);
    x = x + ffn2(leaky_relu(ffn1(x), slope));
    Var<S> scale, shift;
    if (id_embed.defined()) {
      scale = style_scale(id_embed);
      shift = style_shift(id_embed);
    } else {
      scale = Var<S>::constant(MatX<S>::Ones(1, d_model));
      shift = Var<S>::constant(MatX<S>::Zero(1, d_model));
    }
    return adain(x, scale, shift, adain_eps);
  }

  void collect(const std::string& p, ParamRegistry<S>& reg) {
    collect_attention(self_attn, p + ".self", reg);
    collect_attention(cross_attn, p + ".cross", reg);
    ffn1.collect(p + ".ffn1", reg);
    ffn2.collect(p + ".ffn2", reg);
    style_scale.collect(p + ".style_scale", reg);
    style_shift.collect(p + ".style_shift", reg);
  }
};

// Non-autoregressive transformer over PQ code grids: masked-code embedding
// with 2D positional encoding, audio/context condition encoders feeding
// cross-attention, speaker identity via AdaIN, per-subspace logit heads.
template <typename S>
struct Predictor {
  PredictorConfig<S> cfg;

  Var<S> code_embedding;  // (G*K + 1) x d_model, last row is [MASK]
  Var<S> id_embedding;    // num_speakers x id_dim
  Conv1dLayer<S> audio_convs[3];
  NormLayer<S> audio_norms[3];
  std::vector<GatedConv1d<S>> ctx_convs;
  PositionalEncoder<S> pe;
  std::vector<TransformerBlock<S>> blocks;
  std::vector<Linear<S>> heads;

  Predictor() = default;

  Predictor(PredictorConfig<S> config, uint64_t seed) : cfg(config) {
    Rng rng = Rng::stream(seed, {0x9ced});
    const int d = cfg.d_model;
    code_embedding = uniform_leaf<S>(
        static_cast<Eigen::Index>(cfg.groups) * cfg.codebook_size + 1, d,
        S(1) / std::sqrt(static_cast<S>(d)), rng);
    id_embedding =
        uniform_leaf<S>(cfg.num_speakers, cfg.id_dim, S(0.5), rng);

    int in_ch = cfg.audio_dims;
    for (int i = 0; i < 3; ++i) {
      audio_convs[i] = Conv1dLayer<S>(in_ch, d, ConvGeom{4, 2, 1}, rng);
      audio_norms[i] = NormLayer<S>(d, cfg.norm_mode);
      in_ch = d;
    }
    in_ch = cfg.motion_dims;
    for (int i = 0; i < 10; ++i) {
      bool strided = i == 2 || i == 5 || i == 8;
      ctx_convs.emplace_back(in_ch, d,
                             strided ? ConvGeom{4, 2, 1} : ConvGeom{3, 1, 1},
                             rng);
      in_ch = d;
    }
    pe = PositionalEncoder<S>(cfg.pe, d, cfg.max_time, cfg.groups, rng);
    for (int i = 0; i < cfg.blocks; ++i)
      blocks.emplace_back(d, cfg.heads, cfg.ffn_hidden, cfg.id_dim,
                          cfg.lrelu_slope, rng);
    for (int g = 0; g < cfg.groups; ++g)
      heads.emplace_back(d, cfg.codebook_size, rng);
  }

  int mask_token() const { return cfg.groups * cfg.codebook_size; }

  // Audio (frames x audio_dims) -> [N_d x d_model] memory rows. The three
  // stride-2 convs make the total stride equal the PQ window.
  Var<S> encode_audio(const AudioMat& audio, bool training) {
    MatX<S> x(audio.cols(), audio.rows());
    for (Eigen::Index n = 0; n < audio.rows(); ++n)
      for (Eigen::Index d = 0; d < audio.cols(); ++d)
        x(d, n) = static_cast<S>(audio(n, d));
    Var<S> h = Var<S>::constant(std::move(x));
    for (int i = 0; i < 3; ++i)
      h = leaky_relu(audio_norms[i](audio_convs[i](h), training),
                     cfg.lrelu_slope);
    Var<S> rows = transpose(h);
    return rows + pe.temporal_encoding(static_cast<int>(rows.rows()));
  }

  // Frame-masked motion context -> [N_d x d_model] memory rows.
  Var<S> encode_context(const MotionMat& context, bool training) {
    (void)training;
    MatX<S> x(context.cols(), context.rows());
    for (Eigen::Index n = 0; n < context.rows(); ++n)
      for (Eigen::Index d = 0; d < context.cols(); ++d)
        x(d, n) = static_cast<S>(context(n, d));
    Var<S> h = Var<S>::constant(std::move(x));
    for (auto& layer : ctx_convs) h = layer(h);
    Var<S> rows = transpose(h);
    return rows + pe.temporal_encoding(static_cast<int>(rows.rows()));
  }

  // Logits for every grid position (kept and masked alike), one [N_d x K]
  // matrix per subspace.
  std::vector<Var<S>> predict_logits(const CodeGrid& grid,
                                     const AudioMat& audio,
                                     const MotionMat& context, int speaker,
                                     bool training) {
    const int nd = grid.steps();
    const int groups = grid.groups();
    if (groups != cfg.groups)
      throw std::invalid_argument("predict_logits: group count mismatch");
    if (audio.rows() != static_cast<Eigen::Index>(nd) * cfg.window)
      throw std::invalid_argument(
          "predict_logits: audio length does not align with the code grid");
    if (cfg.use_context && context.rows() != audio.rows())
      throw std::invalid_argument(
          "predict_logits: context length does not match audio");
    if (speaker < 0 || speaker >= cfg.num_speakers)
      throw std::invalid_argument("predict_logits: speaker id out of range");

    std::vector<int> flat(static_cast<size_t>(nd) * groups);
    for (int n = 0; n < nd; ++n)
      for (int g = 0; g < groups; ++g)
        flat[static_cast<size_t>(n) * groups + g] =
            grid.keep(n, g) ? g * cfg.codebook_size + grid.indices(n, g)
                            : mask_token();
    Var<S> x = gather_rows(code_embedding, flat) + pe.token_encoding(nd, groups);

    Var<S> memory = encode_audio(audio, training);
    if (cfg.use_context) {
      Var<S> ctx = encode_context(context, training);
      memory = concat_rows<S>({memory, ctx});
    }
    Var<S> id_embed;
    if (cfg.use_identity) id_embed = gather_rows(id_embedding, {speaker});

    for (auto& block : blocks) x = block(x, memory, id_embed);

    std::vector<Var<S>> logits;
    logits.reserve(groups);
    for (int g = 0; g < groups; ++g) {
      std::vector<int> rows(nd);
      for (int n = 0; n < nd; ++n) rows[n] = n * groups + g;
      logits.push_back(heads[g](gather_rows(x, rows)));
    }
    return logits;
  }

  LogitsProvider<S> provider(const AudioMat& audio, const MotionMat& context,
                             int speaker) {
    return [this, &audio, &context, speaker](const CodeGrid& grid) {
      std::vector<Var<S>> vars =
          predict_logits(grid, audio, context, speaker, false);
      std::vector<MatX<S>> values;
      values.reserve(vars.size());
      for (auto& v : vars) values.push_back(v.value());
      return values;
    };
  }

  CodeGrid generate(const AudioMat& audio, const MotionMat& context,
                    int speaker, const MaskSchedule& schedule,
                    const CodeGrid& initial_keep, Rng& rng) {
    return maskgit_decode<S>(provider(audio, context, speaker), schedule,
                             initial_keep, rng);
  }

  CodeGrid generate_autoregressive(const AudioMat& audio,
                                   const MotionMat& context, int speaker,
                                   double temperature, Rng& rng) {
    const int nd = static_cast<int>(audio.rows()) / cfg.window;
    return autoregressive_decode<S>(provider(audio, context, speaker), nd,
                                    cfg.groups, temperature, rng);
  }

  void collect(ParamRegistry<S>& reg) {
    reg.add("embed.codes", code_embedding);
    reg.add("embed.id", id_embedding);
    for (int i = 0; i < 3; ++i) {
      audio_convs[i].collect("audio.conv" + std::to_string(i), reg);
      audio_norms[i].collect("audio.norm" + std::to_string(i), reg);
    }
    for (size_t i = 0; i < ctx_convs.size(); ++i)
      ctx_convs[i].collect("ctx.gated" + std::to_string(i), reg);
    pe.collect("pe", reg);
    for (size_t i = 0; i < blocks.size(); ++i)
      blocks[i].collect("block" + std::to_string(i), reg);
    for (size_t g = 0; g < heads.size(); ++g)
      heads[g].collect("head.g" + std::to_string(g), reg);
  }

  void set_trainable(bool on) {
    ParamRegistry<S> reg;
    collect(reg);
    reg.set_trainable(on);
  }

  Checkpoint to_checkpoint(const nlohmann::json& config_snapshot,
                           uint64_t seed) {
    Checkpoint ck;
    ck.stage = "predictor";
    ck.seed = seed;
    ck.config = config_snapshot;
    ck.config["model"] = {{"motion_dims", cfg.motion_dims},
                          {"audio_dims", cfg.audio_dims},
                          {"num_speakers", cfg.num_speakers}};
    ParamRegistry<S> reg;
    collect(reg);
    registry_to_checkpoint(reg, ck);
    return ck;
  }

  static Predictor from_checkpoint(const Checkpoint& ck) {
    if (ck.stage != "predictor") throw StageMismatchError("predictor", ck.stage);
    nlohmann::json stripped = ck.config;
    stripped.erase("model");
    Config full = config_from_json(stripped);
    full.corpus.motion_dims = ck.config.at("model").at("motion_dims").get<int>();
    full.corpus.audio_dims = ck.config.at("model").at("audio_dims").get<int>();
    full.corpus.num_speakers =
        ck.config.at("model").at("num_speakers").get<int>();
    Predictor model(predictor_config_from<S>(full), ck.seed);
    ParamRegistry<S> reg;
    model.collect(reg);
    registry_from_checkpoint(reg, ck);
    return model;
  }
};

// Cross entropy over masked positions only. Returns 0 (with a warning) when
// nothing is masked.
template <typename S>
Var<S> predictor_loss(const CodeGrid& target,
                      const std::vector<Var<S>>& logits_per_group) {
  const int nd = target.steps(), groups = target.groups();
  if (static_cast<int>(logits_per_group.size()) != groups)
    throw std::invalid_argument("predictor_loss: group count mismatch");
  long masked = target.masked_count();
  if (masked == 0) {
    std::clog << "[pqmotion] predictor_loss: no masked positions, loss is 0\n";
    return Var<S>::scalar(S(0));
  }
  std::vector<int> targets;
  std::vector<S> weights;
  targets.reserve(static_cast<size_t>(nd) * groups);
  for (int g = 0; g < groups; ++g) {
    if (logits_per_group[g].rows() != nd)
      throw std::invalid_argument("predictor_loss: logits shape mismatch");
    for (int n = 0; n < nd; ++n) {
      targets.push_back(target.indices(n, g));
      weights.push_back(target.keep(n, g) ? S(0) : S(1));
    }
  }
  Var<S> stacked = concat_rows(logits_per_group);
  return softmax_cross_entropy(stacked, targets, weights);
}

template <typename S>
struct PredictorTrainResult {
  Checkpoint best;
  std::vector<EpochStats> curves;
  double best_val = 0.0;
  int best_epoch = 0;
};

// Masked-code training against pseudo-GT codes from the frozen PQ-VAE, with
// per-batch mask sampling and frame-level motion-context masking.
template <typename S>
PredictorTrainResult<S> train_predictor(PqVae<S>& pqvae,
                                        const std::vector<SequenceRecord>& train,
                                        const std::vector<SequenceRecord>& val,
                                        const Config& config, uint64_t seed) {
  if (train.empty())
    throw std::invalid_argument("train_predictor: empty training split");
  pqvae.set_trainable(false);

  Predictor<S> model(predictor_config_from<S>(config), seed);
  ParamRegistry<S> reg;
  model.collect(reg);
  typename AdamW<S>::Options opt;
  opt.lr = static_cast<S>(config.train.lr);
  opt.beta1 = static_cast<S>(config.train.beta1);
  opt.beta2 = static_cast<S>(config.train.beta2);
  opt.weight_decay = static_cast<S>(config.train.weight_decay);
  AdamW<S> adam(reg.trainable_vars(), opt);

  auto codes_of = [&](const std::vector<SequenceRecord>& seqs) {
    std::vector<CodeGrid> grids;
    grids.reserve(seqs.size());
    for (const auto& rec : seqs) grids.push_back(pqvae.codes_for(rec.motion));
    return grids;
  };
  std::vector<CodeGrid> train_codes = codes_of(train);
  std::vector<CodeGrid> val_codes = codes_of(val);

  auto masked_context = [&](const MotionMat& motion, const FrameMask& fm) {
    MotionMat ctx = MotionMat::Zero(motion.rows(), motion.cols());
    for (int n = 0; n < motion.rows(); ++n)
      if (fm.bits(n)) ctx.row(n) = motion.row(n);
    return ctx;
  };

  auto sequence_loss = [&](const SequenceRecord& rec, const CodeGrid& codes,
                           Rng& rng, bool training) {
    CodeGrid masked = codes;
    masked.keep = sample_training_mask(codes.steps(), codes.groups(), rng).keep;
    FrameMask fm = sample_frame_mask(static_cast<int>(rec.motion.rows()),
                                     config.refiner.context_prob,
                                     config.refiner.context_min,
                                     config.refiner.context_max, rng);
    MotionMat ctx = masked_context(rec.motion, fm);
    std::vector<Var<S>> logits =
        model.predict_logits(masked, rec.audio, ctx, rec.speaker_id, training);
    return predictor_loss(masked, logits);
  };

  PredictorTrainResult<S> result;
  result.best_val = std::numeric_limits<double>::infinity();
  const int epochs = config.train.epochs_predictor;
  const int batch = config.train.batch_size;

  auto eval_ce = [&]() {
    if (val.empty()) return 0.0;
    model.set_trainable(false);
    double total = 0.0;
    for (size_t i = 0; i < val.size(); ++i) {
      Rng rng = Rng::stream(seed, {0xa11d, static_cast<uint64_t>(i)});
      total += static_cast<double>(
          sequence_loss(val[i], val_codes[i], rng, false).item());
    }
    model.set_trainable(true);
    return total / static_cast<double>(val.size());
  };

  for (int epoch = 0; epoch < epochs; ++epoch) {
    Rng shuffle_rng = Rng::stream(seed, {0x517, static_cast<uint64_t>(epoch)});
    std::vector<size_t> order(train.size());
    std::iota(order.begin(), order.end(), size_t{0});
    for (size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1],
                order[static_cast<size_t>(
                    shuffle_rng.uniform_int(0, static_cast<int>(i)))]);

    Rng mask_rng = Rng::stream(seed, {0x3a5c, static_cast<uint64_t>(epoch)});
    double epoch_loss = 0.0;
    int steps = 0;
    for (size_t start = 0; start < order.size(); start += batch) {
      size_t stop = std::min(order.size(), start + batch);
      adam.zero_grad();
      Var<S> loss_sum;
      for (size_t bi = start; bi < stop; ++bi) {
        Var<S> l = sequence_loss(train[order[bi]], train_codes[order[bi]],
                                 mask_rng, true);
        loss_sum = loss_sum.defined() ? loss_sum + l : l;
      }
      Var<S> loss = loss_sum * (S(1) / static_cast<S>(stop - start));
      const double loss_value = static_cast<double>(loss.item());
      if (!std::isfinite(loss_value))
        throw std::runtime_error(
            "train_predictor: training diverged (non-finite loss at epoch " +
            std::to_string(epoch) + ")");
      loss.backward();
      adam.step();
      epoch_loss += loss_value;
      ++steps;
    }

    EpochStats st;
    st.epoch = epoch;
    st.train_loss = epoch_loss / std::max(1, steps);
    st.val_loss = eval_ce();
    result.curves.push_back(st);
    const double score = val.empty() ? st.train_loss : st.val_loss;
    if (score < result.best_val) {
      result.best_val = score;
      result.best_epoch = epoch;
      result.best = model.to_checkpoint(config_to_json(config), seed);
    }
  }
  pqvae.set_trainable(true);
  if (result.best.tensors.empty())
    result.best = model.to_checkpoint(config_to_json(config), seed);
  return result;
}

}  // namespace pqmotion
