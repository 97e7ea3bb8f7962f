#pragma once

#include <iostream>
#include <limits>
#include <numeric>
#include <utility>

#include "pqmotion/checkpoint.hpp"
#include "pqmotion/config.hpp"
#include "pqmotion/layers.hpp"
#include "pqmotion/optim.hpp"
#include "pqmotion/serialize.hpp"
#include "pqmotion/types.hpp"

namespace pqmotion {

// Pre-quantization latents, one row per code time step; columns hold the G
// contiguous code_dim sub-features.
template <typename S>
struct LatentGrid {
  MatX<S> values;  // N_d x (G * code_dim)
  int window = 8;
  int valid_frames = 0;
};

// G sub-codebooks of K entries each, re-estimated by exponential moving
// averages of their assigned latents; starved entries are re-seeded from live
// batch latents (code reset). Codebooks receive no loss gradient.
template <typename S>
struct ProductCodebook {
  int groups = 0, size = 0, code_dim = 0;
  S eps = S(1e-5);                 // Laplace smoothing of the count ratio
  std::vector<MatX<S>> codes;      // per group: K x code_dim
  std::vector<MatX<S>> ema_count;  // per group: K x 1
  std::vector<MatX<S>> ema_sum;    // per group: K x code_dim
  std::vector<MatX<S>> usage;      // per group: K x 1, epoch assignment counts

  ProductCodebook() = default;

  ProductCodebook(int g, int k, int dc, Rng& rng, S smoothing_eps = S(1e-5))
      : groups(g), size(k), code_dim(dc), eps(smoothing_eps) {
    const S bound = S(1) / std::sqrt(static_cast<S>(dc));
    for (int gi = 0; gi < g; ++gi) {
      MatX<S> c(k, dc);
      for (int r = 0; r < k; ++r)
        for (int col = 0; col < dc; ++col)
          c(r, col) = static_cast<S>(rng.uniform(-double(bound), double(bound)));
      codes.push_back(c);
      ema_count.push_back(MatX<S>::Ones(k, 1));
      // count 1 and sum = codes*(1+eps) make the stored codes the exact
      // fixed point of the smoothed ratio sum/(count + eps)
      ema_sum.push_back(MatX<S>(c * (S(1) + eps)));
      usage.push_back(MatX<S>::Zero(k, 1));
    }
  }

  // Nearest-neighbor assignment per (time step, group); Euclidean distance,
  // ties resolved toward the smallest index. The grid comes back fully kept.
  std::pair<CodeGrid, MatX<S>> quantize(const MatX<S>& latent) const {
    if (latent.cols() != static_cast<Eigen::Index>(groups) * code_dim)
      throw std::invalid_argument("quantize: latent width does not match G*code_dim");
    const int nd = static_cast<int>(latent.rows());
    CodeGrid grid = CodeGrid::all_masked(nd, groups);
    grid.keep.setConstant(1);
    MatX<S> quantized(nd, latent.cols());
    for (int n = 0; n < nd; ++n) {
      for (int g = 0; g < groups; ++g) {
        auto z = latent.row(n).segment(static_cast<Eigen::Index>(g) * code_dim,
                                       code_dim);
        int best = 0;
        S best_d = (codes[g].row(0) - z).squaredNorm();
        for (int k = 1; k < size; ++k) {
          S d = (codes[g].row(k) - z).squaredNorm();
          if (d < best_d) {
            best_d = d;
            best = k;
          }
        }
        grid.indices(n, g) = best;
        quantized.row(n).segment(static_cast<Eigen::Index>(g) * code_dim,
                                 code_dim) = codes[g].row(best);
      }
    }
    return {grid, quantized};
  }

  MatX<S> lookup(const CodeGrid& grid) const {
    MatX<S> out(grid.steps(), static_cast<Eigen::Index>(groups) * code_dim);
    for (int n = 0; n < grid.steps(); ++n)
      for (int g = 0; g < groups; ++g)
        out.row(n).segment(static_cast<Eigen::Index>(g) * code_dim, code_dim) =
            codes[g].row(grid.indices(n, g));
    return out;
  }

  void ema_update(const MatX<S>& latent, const CodeGrid& assignment, S decay) {
    if (!(decay > S(0) && decay < S(1)))
      throw std::invalid_argument("ema_update: decay must be in (0,1)");
    for (int g = 0; g < groups; ++g) {
      MatX<S> n_k = MatX<S>::Zero(size, 1);
      MatX<S> sum_k = MatX<S>::Zero(size, code_dim);
      for (int n = 0; n < assignment.steps(); ++n) {
        int k = assignment.indices(n, g);
        n_k(k, 0) += S(1);
        sum_k.row(k) += latent.row(n).segment(
            static_cast<Eigen::Index>(g) * code_dim, code_dim);
      }
      ema_count[g] = decay * ema_count[g] + (S(1) - decay) * n_k;
      ema_sum[g] = decay * ema_sum[g] + (S(1) - decay) * sum_k;
      usage[g] += n_k;
      for (int k = 0; k < size; ++k)
        codes[g].row(k) = ema_sum[g].row(k) / (ema_count[g](k, 0) + eps);
    }
  }

  // Re-seeds every code whose EMA count fell below the threshold from a
  // randomly drawn candidate latent row (with replacement). Returns the
  // number of codes reset.
  int code_reset(const MatX<S>& candidate_latents, S threshold, Rng& rng) {
    if (threshold < S(0))
      throw std::invalid_argument("code_reset: threshold must be >= 0");
    if (candidate_latents.rows() == 0) return 0;
    int resets = 0;
    for (int g = 0; g < groups; ++g) {
      for (int k = 0; k < size; ++k) {
        if (ema_count[g](k, 0) >= threshold) continue;
        int pick = rng.uniform_int(0, static_cast<int>(candidate_latents.rows()));
        codes[g].row(k) = candidate_latents.row(pick).segment(
            static_cast<Eigen::Index>(g) * code_dim, code_dim);
        ema_count[g](k, 0) = S(1);
        ema_sum[g].row(k) = codes[g].row(k) * (S(1) + eps);
        ++resets;
      }
    }
    return resets;
  }

  void reset_usage() {
    for (auto& u : usage) u.setZero();
  }

  int unused_code_count() const {
    int n = 0;
    for (const auto& u : usage)
      for (int k = 0; k < u.rows(); ++k)
        if (u(k, 0) == S(0)) ++n;
    return n;
  }

  void collect(ParamRegistry<S>& reg) {
    for (int g = 0; g < groups; ++g) {
      std::string p = "codebook.g" + std::to_string(g);
      reg.add_buffer(p + ".codes", &codes[g]);
      reg.add_buffer(p + ".ema_count", &ema_count[g]);
      reg.add_buffer(p + ".ema_sum", &ema_sum[g]);
      reg.add_buffer(p + ".usage", &usage[g]);
    }
  }
};

template <typename S>
struct PqVaeConfig {
  int motion_dims = 16;
  int hidden = 64;
  int groups = 4;
  int codebook_size = 128;
  int code_dim = 16;
  int window = 8;
  S commitment_beta = S(0.25);
  S ema_decay = S(0.99);
  S ema_eps = S(1e-5);
  S reset_threshold = S(1);
  NormMode norm_mode = NormMode::PerChannel;
  S lrelu_slope = S(0.2);
};

template <typename S>
PqVaeConfig<S> pqvae_config_from(const PqVaeSettings& s, int motion_dims) {
  PqVaeConfig<S> c;
  c.motion_dims = motion_dims;
  c.hidden = s.hidden;
  c.groups = s.groups;
  c.codebook_size = s.codebook_size;
  c.code_dim = s.code_dim;
  c.window = s.window;
  c.commitment_beta = static_cast<S>(s.commitment_beta);
  c.ema_decay = static_cast<S>(s.ema_decay);
  c.ema_eps = static_cast<S>(s.ema_eps);
  c.reset_threshold = static_cast<S>(s.reset_threshold);
  c.norm_mode = s.norm == "stepwise" ? NormMode::PerStep : NormMode::PerChannel;
  c.lrelu_slope = static_cast<S>(s.lrelu_slope);
  return c;
}

template <typename S>
struct PqLossParts {
  Var<S> total;
  S reconstruction = S(0);
  S velocity = S(0);
  S commitment = S(0);
};

// L1 reconstruction + L1 on first differences + beta * mean squared
// commitment against the (stop-gradient) selected codes. Sequences shorter
// than 2 frames contribute no velocity term.
template <typename S>
PqLossParts<S> pq_loss(const Var<S>& gt, const Var<S>& recon, const Var<S>& z,
                       const MatX<S>& quantized, S beta) {
  if (beta < S(0)) throw std::invalid_argument("pq_loss: beta must be >= 0");
  PqLossParts<S> parts;
  Var<S> recon_l1 = mean(abs_elems(gt - recon));
  parts.reconstruction = recon_l1.item();
  parts.total = recon_l1;
  const Eigen::Index n = gt.cols();
  if (n >= 2) {
    Var<S> v_gt = slice_cols(gt, 1, n - 1) - slice_cols(gt, 0, n - 1);
    Var<S> v_rec = slice_cols(recon, 1, n - 1) - slice_cols(recon, 0, n - 1);
    Var<S> vel_l1 = mean(abs_elems(v_gt - v_rec));
    parts.velocity = vel_l1.item();
    parts.total = parts.total + vel_l1;
  }
  if (beta > S(0)) {
    Var<S> commit = mean(square_elems(z - Var<S>::constant(quantized)));
    parts.commitment = commit.item();
    parts.total = parts.total + commit * beta;
  }
  return parts;
}

// Temporal-convolutional autoencoder with product quantization of the latent
// sequence. Four residual blocks interleaved with three stride-2 stages give
// the temporal factor of 8 on each side.
template <typename S>
struct PqVae {
  PqVaeConfig<S> cfg;

  Conv1dLayer<S> stem;
  ResidualBlock<S> enc_blocks[4];
  Conv1dLayer<S> downs[3];
  NormLayer<S> down_norms[3];
  Conv1dLayer<S> to_latent;

  Conv1dLayer<S> from_latent;
  ResidualBlock<S> dec_blocks[4];
  ConvTranspose1dLayer<S> ups[3];
  NormLayer<S> up_norms[3];
  Conv1dLayer<S> head;

  ProductCodebook<S> codebook;

  PqVae() = default;

  PqVae(PqVaeConfig<S> config, uint64_t seed) : cfg(config) {
    if (cfg.window != 8)
      throw std::invalid_argument("PqVae: window is fixed at 8 by the three stride-2 stages");
    Rng rng = Rng::stream(seed, {0x6e3c});
    const int h = cfg.hidden;
    stem = Conv1dLayer<S>(cfg.motion_dims, h, ConvGeom{3, 1, 1}, rng);
    for (int i = 0; i < 4; ++i)
      enc_blocks[i] = ResidualBlock<S>(h, cfg.norm_mode, cfg.lrelu_slope, rng);
    for (int i = 0; i < 3; ++i) {
      downs[i] = Conv1dLayer<S>(h, h, ConvGeom{4, 2, 1}, rng);
      down_norms[i] = NormLayer<S>(h, cfg.norm_mode);
    }
    to_latent = Conv1dLayer<S>(h, cfg.groups * cfg.code_dim, ConvGeom{1, 1, 0}, rng);

    from_latent = Conv1dLayer<S>(cfg.groups * cfg.code_dim, h, ConvGeom{1, 1, 0}, rng);
    for (int i = 0; i < 4; ++i)
      dec_blocks[i] = ResidualBlock<S>(h, cfg.norm_mode, cfg.lrelu_slope, rng);
    for (int i = 0; i < 3; ++i) {
      ups[i] = ConvTranspose1dLayer<S>(h, h, ConvGeom{4, 2, 1}, rng);
      up_norms[i] = NormLayer<S>(h, cfg.norm_mode);
    }
    head = Conv1dLayer<S>(h, cfg.motion_dims, ConvGeom{3, 1, 1}, rng);
    codebook = ProductCodebook<S>(cfg.groups, cfg.codebook_size, cfg.code_dim, rng,
                                  cfg.ema_eps);
  }

  // Motion (frames x dims, float) as a channels x time constant, padded to a
  // multiple of the window by edge replication.
  Var<S> motion_to_input(const MotionMat& motion, int* valid_frames) const {
    if (!motion.allFinite())
      throw std::invalid_argument("encode: motion contains non-finite values");
    if (motion.rows() < 1)
      throw std::invalid_argument("encode: motion must have at least one frame");
    if (motion.cols() != cfg.motion_dims)
      throw std::invalid_argument("encode: motion dims do not match the model");
    const int n = static_cast<int>(motion.rows());
    const int padded = ((n + cfg.window - 1) / cfg.window) * cfg.window;
    MatX<S> x(cfg.motion_dims, padded);
    for (int t = 0; t < padded; ++t) {
      int src = std::min(t, n - 1);
      for (int d = 0; d < cfg.motion_dims; ++d)
        x(d, t) = static_cast<S>(motion(src, d));
    }
    if (valid_frames) *valid_frames = n;
    return Var<S>::constant(std::move(x));
  }

  // Encoder graph; output is (G*code_dim) x N_d in channels x time layout.
  Var<S> encode_var(const Var<S>& input, bool training) {
    Var<S> h = stem(input);
    h = enc_blocks[0](h, training);
    for (int i = 0; i < 3; ++i) {
      h = leaky_relu(down_norms[i](downs[i](h), training), cfg.lrelu_slope);
      h = enc_blocks[i + 1](h, training);
    }
    return to_latent(h);
  }

  Var<S> decode_var(const Var<S>& latent_ct, bool training) {
    Var<S> h = from_latent(latent_ct);
    h = dec_blocks[0](h, training);
    for (int i = 0; i < 3; ++i) {
      h = leaky_relu(up_norms[i](ups[i](h), training), cfg.lrelu_slope);
      h = dec_blocks[i + 1](h, training);
    }
    return head(h);
  }

  LatentGrid<S> encode(const MotionMat& motion) {
    int valid = 0;
    Var<S> input = motion_to_input(motion, &valid);
    Var<S> z = encode_var(input, /*training=*/false);
    LatentGrid<S> grid;
    grid.values = z.value().transpose();
    grid.window = cfg.window;
    grid.valid_frames = valid;
    return grid;
  }

  MotionMat decode(const CodeGrid& grid, int valid_frames) {
    MatX<S> latent = codebook.lookup(grid);
    Var<S> recon =
        decode_var(Var<S>::constant(latent.transpose()), /*training=*/false);
    MotionMat out(valid_frames, cfg.motion_dims);
    for (int n = 0; n < valid_frames; ++n)
      for (int d = 0; d < cfg.motion_dims; ++d)
        out(n, d) = static_cast<float>(recon.value()(d, n));
    return out;
  }

  // encode -> quantize -> decode on values only.
  MotionMat reconstruct(const MotionMat& motion) {
    LatentGrid<S> z = encode(motion);
    auto [grid, quantized] = codebook.quantize(z.values);
    (void)quantized;
    return decode(grid, z.valid_frames);
  }

  CodeGrid codes_for(const MotionMat& motion) {
    LatentGrid<S> z = encode(motion);
    return codebook.quantize(z.values).first;
  }

  void collect(ParamRegistry<S>& reg) {
    stem.collect("enc.stem", reg);
    for (int i = 0; i < 4; ++i)
      enc_blocks[i].collect("enc.block" + std::to_string(i), reg);
    for (int i = 0; i < 3; ++i) {
      downs[i].collect("enc.down" + std::to_string(i), reg);
      down_norms[i].collect("enc.down_norm" + std::to_string(i), reg);
    }
    to_latent.collect("enc.to_latent", reg);
    from_latent.collect("dec.from_latent", reg);
    for (int i = 0; i < 4; ++i)
      dec_blocks[i].collect("dec.block" + std::to_string(i), reg);
    for (int i = 0; i < 3; ++i) {
      ups[i].collect("dec.up" + std::to_string(i), reg);
      up_norms[i].collect("dec.up_norm" + std::to_string(i), reg);
    }
    head.collect("dec.head", reg);
    codebook.collect(reg);
  }

  void set_trainable(bool on) {
    ParamRegistry<S> reg;
    collect(reg);
    reg.set_trainable(on);
  }

  Checkpoint to_checkpoint(const nlohmann::json& config_snapshot,
                           uint64_t seed) {
    Checkpoint ck;
    ck.stage = "pqvae";
    ck.seed = seed;
    ck.config = config_snapshot;
    ck.config["model"] = {{"motion_dims", cfg.motion_dims}};
    ParamRegistry<S> reg;
    collect(reg);
    registry_to_checkpoint(reg, ck);
    return ck;
  }

  static PqVae from_checkpoint(const Checkpoint& ck) {
    if (ck.stage != "pqvae") throw StageMismatchError("pqvae", ck.stage);
    Config full = config_from_json(strip_model_section(ck.config));
    int dims = ck.config.at("model").at("motion_dims").get<int>();
    PqVae model(pqvae_config_from<S>(full.pqvae, dims), ck.seed);
    ParamRegistry<S> reg;
    model.collect(reg);
    registry_from_checkpoint(reg, ck);
    return model;
  }

  static nlohmann::json strip_model_section(nlohmann::json j) {
    j.erase("model");
    return j;
  }
};

// Training curves for reporting and regression checks.
struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double commitment = 0.0;
  int code_resets = 0;
};

template <typename S>
struct PqVaeTrainResult {
  Checkpoint best;
  std::vector<EpochStats> curves;
  double best_val = 0.0;
  int best_epoch = 0;
  int last_epoch_unused_codes = 0;
};

// AdamW on the reconstruction objective with per-step EMA codebook updates
// and a per-epoch code reset. Deterministic under (config, seed); keeps the
// best-on-validation checkpoint.
template <typename S>
PqVaeTrainResult<S> train_pqvae(const std::vector<MotionMat>& train,
                                const std::vector<MotionMat>& val,
                                const Config& config, uint64_t seed) {
  if (train.empty())
    throw std::invalid_argument("train_pqvae: empty training split");
  const int dims = static_cast<int>(train[0].cols());
  PqVae<S> model(pqvae_config_from<S>(config.pqvae, dims), seed);

  ParamRegistry<S> reg;
  model.collect(reg);
  typename AdamW<S>::Options opt;
  opt.lr = static_cast<S>(config.train.lr);
  opt.beta1 = static_cast<S>(config.train.beta1);
  opt.beta2 = static_cast<S>(config.train.beta2);
  opt.weight_decay = static_cast<S>(config.train.weight_decay);
  AdamW<S> adam(reg.trainable_vars(), opt);

  const int epochs = config.train.epochs_pqvae;
  const int batch = config.train.batch_size;
  const S beta = static_cast<S>(config.pqvae.commitment_beta);

  PqVaeTrainResult<S> result;
  result.best_val = std::numeric_limits<double>::infinity();

  // reservoir of latent rows feeding code resets
  const int reservoir_size = 256;
  MatX<S> reservoir(reservoir_size, model.cfg.groups * model.cfg.code_dim);
  int reservoir_fill = 0;
  long reservoir_seen = 0;
  Rng reservoir_rng = Rng::stream(seed, {0xe5e});

  auto eval_loss = [&](const std::vector<MotionMat>& seqs) {
    if (seqs.empty()) return 0.0;
    model.set_trainable(false);
    double total = 0.0;
    for (const MotionMat& m : seqs) {
      int valid = 0;
      Var<S> input = model.motion_to_input(m, &valid);
      Var<S> z = model.encode_var(input, false);
      auto [grid, quantized] = model.codebook.quantize(MatX<S>(z.value().transpose()));
      Var<S> st = straight_through(z, MatX<S>(quantized.transpose()));
      Var<S> recon = model.decode_var(st, false);
      auto parts = pq_loss(input, recon, z, MatX<S>(quantized.transpose()), beta);
      total += static_cast<double>(parts.total.item());
    }
    model.set_trainable(true);
    return total / static_cast<double>(seqs.size());
  };

  for (int epoch = 0; epoch < epochs; ++epoch) {
    model.codebook.reset_usage();
    Rng shuffle_rng = Rng::stream(seed, {0x117, static_cast<uint64_t>(epoch)});
    std::vector<size_t> order(train.size());
    std::iota(order.begin(), order.end(), size_t{0});
    for (size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1],
                order[static_cast<size_t>(shuffle_rng.uniform_int(0, static_cast<int>(i)))]);

    double epoch_loss = 0.0;
    double epoch_commit = 0.0;
    int steps = 0;
    for (size_t start = 0; start < order.size(); start += batch) {
      size_t stop = std::min(order.size(), start + batch);
      adam.zero_grad();
      Var<S> loss_sum;
      std::vector<std::pair<MatX<S>, CodeGrid>> batch_assignments;
      double commit_acc = 0.0;
      for (size_t bi = start; bi < stop; ++bi) {
        const MotionMat& m = train[order[bi]];
        int valid = 0;
        Var<S> input = model.motion_to_input(m, &valid);
        Var<S> z = model.encode_var(input, true);
        MatX<S> latent_rows = z.value().transpose();
        auto [grid, quantized] = model.codebook.quantize(latent_rows);
        Var<S> st = straight_through(z, MatX<S>(quantized.transpose()));
        Var<S> recon = model.decode_var(st, true);
        auto parts = pq_loss(input, recon, z, MatX<S>(quantized.transpose()), beta);
        commit_acc += static_cast<double>(parts.commitment);
        loss_sum = loss_sum.defined() ? loss_sum + parts.total : parts.total;
        batch_assignments.emplace_back(std::move(latent_rows), std::move(grid));
        // reservoir-sample latent rows for the epoch's code reset
        for (Eigen::Index r = 0; r < batch_assignments.back().first.rows(); ++r) {
          ++reservoir_seen;
          if (reservoir_fill < reservoir_size) {
            reservoir.row(reservoir_fill++) = batch_assignments.back().first.row(r);
          } else {
            long j = reservoir_rng.uniform_int(0, static_cast<int>(reservoir_seen));
            if (j < reservoir_size)
              reservoir.row(j) = batch_assignments.back().first.row(r);
          }
        }
      }
      const S inv = S(1) / static_cast<S>(stop - start);
      Var<S> loss = loss_sum * inv;
      const double loss_value = static_cast<double>(loss.item());
      if (!std::isfinite(loss_value))
        throw std::runtime_error(
            "train_pqvae: training diverged (non-finite loss at epoch " +
            std::to_string(epoch) + ")");
      loss.backward();
      adam.step();
      for (auto& [latent_rows, grid] : batch_assignments)
        model.codebook.ema_update(latent_rows, grid, model.cfg.ema_decay);
      epoch_loss += loss_value;
      epoch_commit += commit_acc / static_cast<double>(stop - start);
      ++steps;
    }

    result.last_epoch_unused_codes = model.codebook.unused_code_count();
    Rng reset_rng = Rng::stream(seed, {0x4e5e7, static_cast<uint64_t>(epoch)});
    int resets = model.codebook.code_reset(
        MatX<S>(reservoir.topRows(reservoir_fill)), model.cfg.reset_threshold,
        reset_rng);

    EpochStats st;
    st.epoch = epoch;
    st.train_loss = epoch_loss / std::max(1, steps);
    st.commitment = epoch_commit / std::max(1, steps);
    st.val_loss = eval_loss(val);
    st.code_resets = resets;
    result.curves.push_back(st);

    const double score = val.empty() ? st.train_loss : st.val_loss;
    if (score < result.best_val) {
      result.best_val = score;
      result.best_epoch = epoch;
      result.best = model.to_checkpoint(config_to_json(config), seed);
    }
  }
  if (!result.best.tensors.empty()) return result;
  result.best = model.to_checkpoint(config_to_json(config), seed);
  return result;
}

// Mean L2 errors of first and second temporal differences between ground
// truth and PQ reconstruction. Sequences shorter than 3 frames are excluded.
template <typename S>
std::pair<double, double> reconstruction_errors(
    PqVae<S>& model, const std::vector<MotionMat>& seqs) {
  double e1 = 0.0, e2 = 0.0;
  int counted = 0;
  for (const MotionMat& m : seqs) {
    if (m.rows() < 3) {
      std::clog << "[pqmotion] reconstruction_errors: skipping sequence with "
                << m.rows() << " frames\n";
      continue;
    }
    MotionMat rec = model.reconstruct(m);
    Eigen::MatrixXd gt = m.cast<double>();
    Eigen::MatrixXd rc = rec.cast<double>();
    Eigen::MatrixXd v_gt = gt.bottomRows(gt.rows() - 1) - gt.topRows(gt.rows() - 1);
    Eigen::MatrixXd v_rc = rc.bottomRows(rc.rows() - 1) - rc.topRows(rc.rows() - 1);
    Eigen::MatrixXd a_gt = v_gt.bottomRows(v_gt.rows() - 1) - v_gt.topRows(v_gt.rows() - 1);
    Eigen::MatrixXd a_rc = v_rc.bottomRows(v_rc.rows() - 1) - v_rc.topRows(v_rc.rows() - 1);
    double s1 = 0.0;
    for (Eigen::Index n = 0; n < v_gt.rows(); ++n)
      s1 += (v_gt.row(n) - v_rc.row(n)).norm();
    double s2 = 0.0;
    for (Eigen::Index n = 0; n < a_gt.rows(); ++n)
      s2 += (a_gt.row(n) - a_rc.row(n)).norm();
    e1 += s1 / static_cast<double>(v_gt.rows());
    e2 += s2 / static_cast<double>(a_gt.rows());
    ++counted;
  }
  if (counted == 0) return {0.0, 0.0};
  return {e1 / counted, e2 / counted};
}

}  // namespace pqmotion
