#include "saekit/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "saekit/rng.hpp"

namespace saekit::train {

using sae::SaeParams;
using sae::Variant;

namespace {

constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

// Seed stream for the epoch shuffles, kept apart from the init stream.
constexpr std::uint64_t kShuffleStream = 0x9E3779B97F4A7C15ULL;

struct Sums {
  double recon = 0.0;
  double aux = 0.0;
};

// Adds one row's loss to `sums` and (optionally) its unscaled gradient to `grad`.
void accumulate_row(const SaeParams& params, std::span<const double> x, std::span<const char> dead,
                    const TrainConfig& cfg, SaeParams* grad, std::vector<char>* fired, Sums& sums) {
  const ForwardTrace t = forward(params, x, dead, cfg);
  sums.recon += t.recon;
  sums.aux += t.aux;
  if (fired != nullptr)
    for (std::uint32_t j : t.active) (*fired)[j] = 1;
  if (grad == nullptr) return;

  const std::size_t d = params.d;
  const double c = cfg.aux_coef;
  const bool has_aux = !t.aux_active.empty();

  // g_hat = dL/dx_hat, g_aux = dL/d(aux_hat).
  std::vector<double> g_hat(d), g_aux(d, 0.0);
  for (std::size_t r = 0; r < d; ++r) {
    const double resid = t.x_hat[r] - x[r];
    g_hat[r] = 2.0 * resid;
    if (has_aux) {
      const double q = x[r] - t.x_hat[r] - t.aux_hat[r];
      g_hat[r] -= 2.0 * c * q;
      g_aux[r] = -2.0 * c * q;
    }
  }

  const auto backprop_latent = [&](std::uint32_t j, std::span<const double> g_out) {
    const double z = t.pre[j];
    double dpre = 0.0;
    for (std::size_t r = 0; r < d; ++r) {
      grad->w_dec(r, j) += g_out[r] * z;
      dpre += params.w_dec(r, j) * g_out[r];
    }
    auto g_row = grad->w_enc.row(j);
    const auto w_row = params.w_enc.row(j);
    for (std::size_t r = 0; r < d; ++r) {
      g_row[r] += dpre * t.centered[r];
      grad->b_pre[r] -= dpre * w_row[r];
    }
    if (params.variant == Variant::Relu) grad->b_enc[j] += dpre;
  };

  for (std::uint32_t j : t.active) backprop_latent(j, g_hat);
  for (std::uint32_t j : t.aux_active) backprop_latent(j, g_aux);
  for (std::size_t r = 0; r < d; ++r) grad->b_pre[r] += g_hat[r];
}

void scale(SaeParams& g, double s) {
  for (double& v : g.w_enc.data()) v *= s;
  for (double& v : g.b_enc) v *= s;
  for (double& v : g.w_dec.data()) v *= s;
  for (double& v : g.b_pre) v *= s;
}

void project_decoder_gradient(const SaeParams& params, SaeParams& grad) {
  for (std::size_t j = 0; j < params.n; ++j) {
    double dot = 0.0;
    for (std::size_t r = 0; r < params.d; ++r) dot += grad.w_dec(r, j) * params.w_dec(r, j);
    for (std::size_t r = 0; r < params.d; ++r) grad.w_dec(r, j) -= dot * params.w_dec(r, j);
  }
}

void adam_update(std::vector<double>& param, std::vector<double>& m, std::vector<double>& v,
                 const std::vector<double>& g, double lr, double bias1, double bias2) {
  for (std::size_t i = 0; i < param.size(); ++i) {
    m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * g[i];
    v[i] = kBeta2 * v[i] + (1.0 - kBeta2) * g[i] * g[i];
    const double m_hat = m[i] / bias1;
    const double v_hat = v[i] / bias2;
    param[i] -= lr * m_hat / (std::sqrt(v_hat) + kAdamEps);
  }
}

}  // namespace

std::size_t TrainConfig::effective_k_aux() const { return k_aux == 0 ? 2 * k : k_aux; }

void TrainConfig::validate() const {
  if (n == 0 || d == 0) throw std::invalid_argument("n and d must be positive");
  if (variant == Variant::TopK && (k == 0 || k > n))
    throw std::invalid_argument("k must satisfy 1 <= k <= n (k=" + std::to_string(k) + ", n=" +
                                std::to_string(n) + ")");
  if (effective_k_aux() > n)
    throw std::invalid_argument("k_aux must not exceed n (k_aux=" + std::to_string(effective_k_aux()) + ")");
  if (batch_size == 0) throw std::invalid_argument("batch_size must be positive");
  if (!(lr > 0.0)) throw std::invalid_argument("lr must be positive");
  if (!(warmup_ratio >= 0.0 && warmup_ratio <= 1.0))
    throw std::invalid_argument("warmup_ratio must lie in [0, 1]");
  if (epochs == 0 && max_steps == 0) throw std::invalid_argument("epochs must be positive");
  if (!(aux_coef >= 0.0)) throw std::invalid_argument("aux_coef must be nonnegative");
  if (dead_token_threshold == 0) throw std::invalid_argument("dead_token_threshold must be positive");
  if (grad_acc_steps == 0 || micro_acc_steps == 0)
    throw std::invalid_argument("grad_acc_steps and micro_acc_steps must be positive");
}

void DeadLatentTracker::update(std::span<const char> fired, std::uint64_t tokens) {
  require_dim("fired mask", tokens_since_fire.size(), fired.size());
  for (std::size_t i = 0; i < fired.size(); ++i) {
    if (fired[i])
      tokens_since_fire[i] = 0;
    else
      tokens_since_fire[i] += tokens;
  }
}

std::vector<char> DeadLatentTracker::dead_mask(std::uint64_t threshold) const {
  std::vector<char> mask(tokens_since_fire.size());
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = tokens_since_fire[i] > threshold ? 1 : 0;
  return mask;
}

std::size_t DeadLatentTracker::dead_count(std::uint64_t threshold) const {
  return static_cast<std::size_t>(std::count_if(tokens_since_fire.begin(), tokens_since_fire.end(),
                                                [&](std::uint64_t c) { return c > threshold; }));
}

OptState OptState::for_params(const SaeParams& params) {
  OptState s;
  s.m = SaeParams::zeros(params.variant, params.n, params.d, params.k);
  s.v = s.m;
  return s;
}

SaeParams init_params(const TrainConfig& cfg) {
  cfg.validate();
  SaeParams p = SaeParams::zeros(cfg.variant, cfg.n, cfg.d, cfg.variant == Variant::TopK ? cfg.k : 0);
  Rng rng(cfg.seed);
  const double scale = 1.0 / std::sqrt(static_cast<double>(cfg.d));
  for (double& w : p.w_enc.data()) w = rng.normal() * scale;
  for (std::size_t i = 0; i < cfg.n; ++i)
    for (std::size_t j = 0; j < cfg.d; ++j) p.w_dec(j, i) = p.w_enc(i, j);
  normalize_decoder_columns(p);
  return p;
}

double lr_at(std::size_t step, std::size_t total_steps, const TrainConfig& cfg) {
  if (total_steps == 0) throw std::invalid_argument("total_steps must be positive");
  if (step > total_steps) throw std::invalid_argument("step exceeds total_steps");
  const double warmup = cfg.warmup_ratio * static_cast<double>(total_steps);
  const double s = static_cast<double>(step);
  if (s >= warmup) return cfg.lr;
  return cfg.lr * s / warmup;
}

ForwardTrace forward(const SaeParams& params, std::span<const double> x, std::span<const char> dead,
                     const TrainConfig& cfg) {
  require_dim("dead mask", params.n, dead.size());
  ForwardTrace t;
  t.pre = sae::pre_activations(params, x);
  t.centered.resize(params.d);
  for (std::size_t r = 0; r < params.d; ++r) t.centered[r] = x[r] - params.b_pre[r];

  if (params.variant == Variant::TopK) {
    t.active = sae::topk_indices(t.pre, params.k);
  } else {
    for (std::uint32_t j = 0; j < params.n; ++j)
      if (t.pre[j] > 0.0) t.active.push_back(j);
  }

  t.x_hat = params.b_pre;
  for (std::uint32_t j : t.active)
    for (std::size_t r = 0; r < params.d; ++r) t.x_hat[r] += params.w_dec(r, j) * t.pre[j];
  t.recon = sae::recon_loss(x, t.x_hat);

  std::vector<std::uint32_t> dead_ids;
  std::vector<double> dead_pre;
  for (std::uint32_t j = 0; j < params.n; ++j) {
    if (dead[j]) {
      dead_ids.push_back(j);
      dead_pre.push_back(t.pre[j]);
    }
  }
  t.aux_hat.assign(params.d, 0.0);
  if (!dead_ids.empty()) {
    const std::size_t k_aux = std::min(cfg.effective_k_aux(), dead_ids.size());
    for (std::uint32_t local : sae::topk_indices(dead_pre, k_aux)) t.aux_active.push_back(dead_ids[local]);
    for (std::uint32_t j : t.aux_active)
      for (std::size_t r = 0; r < params.d; ++r) t.aux_hat[r] += params.w_dec(r, j) * t.pre[j];
    double acc = 0.0;
    for (std::size_t r = 0; r < params.d; ++r) {
      const double q = x[r] - t.x_hat[r] - t.aux_hat[r];
      acc += q * q;
    }
    t.aux = acc;
  }
  return t;
}

double aux_loss(const SaeParams& params, std::span<const double> x, std::span<const double> x_hat,
                const DeadLatentTracker& tracker, const TrainConfig& cfg) {
  require_dim("tracker", params.n, tracker.tokens_since_fire.size());
  require_dim("reconstruction", params.d, x_hat.size());
  const auto dead = tracker.dead_mask(cfg.dead_token_threshold);
  const auto pre = sae::pre_activations(params, x);
  std::vector<std::uint32_t> dead_ids;
  std::vector<double> dead_pre;
  for (std::uint32_t j = 0; j < params.n; ++j) {
    if (dead[j]) {
      dead_ids.push_back(j);
      dead_pre.push_back(pre[j]);
    }
  }
  if (dead_ids.empty()) return 0.0;
  const std::size_t k_aux = std::min(cfg.effective_k_aux(), dead_ids.size());
  std::vector<double> residual(params.d);
  for (std::size_t r = 0; r < params.d; ++r) residual[r] = x[r] - x_hat[r];
  for (std::uint32_t local : sae::topk_indices(dead_pre, k_aux)) {
    const std::uint32_t j = dead_ids[local];
    for (std::size_t r = 0; r < params.d; ++r) residual[r] -= params.w_dec(r, j) * pre[j];
  }
  double acc = 0.0;
  for (double e : residual) acc += e * e;
  return acc;
}

LossTerms batch_loss(const SaeParams& params, const MatrixD& batch, std::span<const char> dead,
                     const TrainConfig& cfg, SaeParams* grad, std::vector<char>* fired) {
  if (batch.rows() == 0) throw std::invalid_argument("empty batch");
  require_dim("batch width", params.d, batch.cols());
  if (grad != nullptr) {
    *grad = SaeParams::zeros(params.variant, params.n, params.d, params.k);
  }
  if (fired != nullptr) fired->assign(params.n, 0);
  Sums sums;
  for (std::size_t i = 0; i < batch.rows(); ++i) accumulate_row(params, batch.row(i), dead, cfg, grad, fired, sums);
  const double inv = 1.0 / static_cast<double>(batch.rows());
  if (grad != nullptr) scale(*grad, inv);
  LossTerms out;
  out.recon = sums.recon * inv;
  out.aux = sums.aux * inv;
  out.total = out.recon + cfg.aux_coef * out.aux;
  return out;
}

void normalize_decoder_columns(SaeParams& params) {
  for (std::size_t j = 0; j < params.n; ++j) {
    double sq = 0.0;
    for (std::size_t r = 0; r < params.d; ++r) sq += params.w_dec(r, j) * params.w_dec(r, j);
    if (sq == 0.0) continue;
    const double inv = 1.0 / std::sqrt(sq);
    for (std::size_t r = 0; r < params.d; ++r) params.w_dec(r, j) *= inv;
  }
}

StepResult train_step(SaeParams& params, OptState& opt, const MatrixD& batch, DeadLatentTracker& tracker,
                      const TrainConfig& cfg, std::size_t step, std::size_t total_steps) {
  if (batch.rows() == 0) throw std::invalid_argument("empty batch");
  require_dim("batch width", params.d, batch.cols());
  require_dim("tracker", params.n, tracker.tokens_since_fire.size());

  const auto dead = tracker.dead_mask(cfg.dead_token_threshold);
  SaeParams grad = SaeParams::zeros(params.variant, params.n, params.d, params.k);
  std::vector<char> fired(params.n, 0);
  Sums sums;

  // Gradient accumulation is loop structure only: the batch is walked as
  // grad_acc_steps chunks of micro_acc_steps micro-batches, summing into one
  // gradient, so the update equals a single full-batch step.
  const std::size_t rows = batch.rows();
  const std::size_t pieces = cfg.grad_acc_steps * cfg.micro_acc_steps;
  for (std::size_t piece = 0; piece < pieces; ++piece) {
    const std::size_t begin = rows * piece / pieces;
    const std::size_t end = rows * (piece + 1) / pieces;
    for (std::size_t i = begin; i < end; ++i) accumulate_row(params, batch.row(i), dead, cfg, &grad, &fired, sums);
  }

  const double inv = 1.0 / static_cast<double>(rows);
  StepResult result;
  result.step = step;
  result.loss = sums.recon * inv;
  result.aux_loss = sums.aux * inv;
  result.total = result.loss + cfg.aux_coef * result.aux_loss;
  result.lr = lr_at(step, total_steps, cfg);
  if (!std::isfinite(result.total)) {
    std::ostringstream msg;
    msg << "non-finite loss at step " << step << " (recon=" << result.loss << ", aux=" << result.aux_loss << ")";
    throw TrainingError(msg.str());
  }

  scale(grad, inv);
  project_decoder_gradient(params, grad);

  opt.step += 1;
  const double bias1 = 1.0 - std::pow(kBeta1, static_cast<double>(opt.step));
  const double bias2 = 1.0 - std::pow(kBeta2, static_cast<double>(opt.step));
  adam_update(params.w_enc.data(), opt.m.w_enc.data(), opt.v.w_enc.data(), grad.w_enc.data(), result.lr, bias1, bias2);
  adam_update(params.b_enc, opt.m.b_enc, opt.v.b_enc, grad.b_enc, result.lr, bias1, bias2);
  adam_update(params.w_dec.data(), opt.m.w_dec.data(), opt.v.w_dec.data(), grad.w_dec.data(), result.lr, bias1, bias2);
  if (cfg.learn_pre_bias) adam_update(params.b_pre, opt.m.b_pre, opt.v.b_pre, grad.b_pre, result.lr, bias1, bias2);
  normalize_decoder_columns(params);

  tracker.update(fired, rows);
  return result;
}

MatrixD gather_rows(const std::vector<store::ActivationShard>& shards, const TrainConfig& cfg) {
  std::size_t total = 0;
  for (const auto& shard : shards) {
    if (shard.num_rows() > 0 && shard.d != cfg.d) throw DimensionMismatch("shard d", cfg.d, shard.d);
    total += shard.num_rows();
  }
  MatrixD rows(total, cfg.d);
  std::size_t out = 0;
  for (const auto& shard : shards) {
    for (std::size_t i = 0; i < shard.num_rows(); ++i, ++out) {
      const auto src = shard.rows.row(i);
      auto dst = rows.row(out);
      std::copy(src.begin(), src.end(), dst.begin());
      if (cfg.normalize_inputs) {
        double sq = 0.0;
        for (double v : dst) sq += v * v;
        if (sq > 0.0) {
          const double inv = 1.0 / std::sqrt(sq);
          for (double& v : dst) v *= inv;
        }
      }
    }
  }
  return rows;
}

std::size_t planned_steps(std::size_t num_rows, const TrainConfig& cfg) {
  if (cfg.max_steps > 0) return cfg.max_steps;
  const std::size_t per_epoch = (num_rows + cfg.batch_size - 1) / cfg.batch_size;
  return per_epoch * cfg.epochs;
}

TrainResult train(const std::vector<store::ActivationShard>& shards, const TrainConfig& cfg,
                  const StepCallback& on_step) {
  cfg.validate();
  const MatrixD rows = gather_rows(shards, cfg);
  if (rows.rows() == 0) throw std::invalid_argument("training set is empty");

  TrainResult result{init_params(cfg), {}, DeadLatentTracker(cfg.n)};
  OptState opt = OptState::for_params(result.params);
  const std::size_t total = planned_steps(rows.rows(), cfg);
  result.history.reserve(total);

  Rng shuffle_rng(cfg.seed ^ kShuffleStream);
  std::vector<std::size_t> order(rows.rows());
  std::size_t step = 0;
  while (step < total) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle_rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t begin = 0; begin < order.size() && step < total; begin += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
      MatrixD batch(end - begin, cfg.d);
      for (std::size_t i = begin; i < end; ++i) {
        const auto src = rows.row(order[i]);
        std::copy(src.begin(), src.end(), batch.row(i - begin).begin());
      }
      result.history.push_back(train_step(result.params, opt, batch, result.tracker, cfg, step, total));
      if (on_step) on_step(result.history.back(), total);
      ++step;
    }
  }
  return result;
}

void write_loss_csv(const std::filesystem::path& path, const std::vector<StepResult>& history) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << "step,loss,aux_loss,lr\n";
  out << std::setprecision(17);
  for (const auto& s : history) out << s.step << ',' << s.loss << ',' << s.aux_loss << ',' << s.lr << '\n';
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace saekit::train
