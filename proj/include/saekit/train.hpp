#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "saekit/activation_store.hpp"
#include "saekit/sae.hpp"

namespace saekit::train {

/// Training hyperparameters. lr, warmup, epochs, aux coefficient and the
/// 4096 batch (split 4 × 2) are the large-scale recipe; n and d are sized
/// for a laptop.
struct TrainConfig {
  sae::Variant variant = sae::Variant::TopK;
  std::size_t n = 1024;
  std::size_t d = 64;
  std::size_t k = 128;
  std::size_t batch_size = 4096;
  double lr = 7e-5;
  double warmup_ratio = 0.5;
  std::size_t epochs = 4;
  double aux_coef = 1.0 / 32.0;
  std::uint64_t dead_token_threshold = 10'000'000;
  std::size_t k_aux = 0;  // 0 means 2·k
  std::uint64_t seed = 0;
  std::size_t grad_acc_steps = 4;
  std::size_t micro_acc_steps = 2;
  std::size_t max_steps = 0;  // 0 means epochs × batches
  bool normalize_inputs = false;
  bool learn_pre_bias = true;

  std::size_t effective_k_aux() const;
  void validate() const;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tokens seen since each latent last appeared in a TopK set.
struct DeadLatentTracker {
  std::vector<std::uint64_t> tokens_since_fire;

  explicit DeadLatentTracker(std::size_t n = 0) : tokens_since_fire(n, 0) {}

  /// fired[i] != 0 resets latent i; every other counter grows by `tokens`.
  void update(std::span<const char> fired, std::uint64_t tokens);
  std::vector<char> dead_mask(std::uint64_t threshold) const;
  std::size_t dead_count(std::uint64_t threshold) const;

  bool operator==(const DeadLatentTracker&) const = default;
};

/// Adam moments for every parameter tensor.
struct OptState {
  sae::SaeParams m;
  sae::SaeParams v;
  std::uint64_t step = 0;

  static OptState for_params(const sae::SaeParams& params);
};

sae::SaeParams init_params(const TrainConfig& cfg);

/// Linear ramp from 0 to cfg.lr over warmup_ratio·total_steps, then flat.
double lr_at(std::size_t step, std::size_t total_steps, const TrainConfig& cfg);

/// Everything the loss needs about one input row.
struct ForwardTrace {
  std::vector<double> centered;  // x − b_pre
  std::vector<double> pre;       // pre-activations (incl. b_enc for ReLU)
  std::vector<std::uint32_t> active;     // latents kept by the encoder
  std::vector<std::uint32_t> aux_active; // top-k_aux dead latents
  std::vector<double> x_hat;
  std::vector<double> aux_hat;  // dead-latent reconstruction of the residual
  double recon = 0.0;
  double aux = 0.0;
};

ForwardTrace forward(const sae::SaeParams& params, std::span<const double> x,
                     std::span<const char> dead, const TrainConfig& cfg);

/// Squared error between the residual x − x_hat and its reconstruction from
/// the top k_aux pre-activations among dead latents. Zero when none are dead.
double aux_loss(const sae::SaeParams& params, std::span<const double> x, std::span<const double> x_hat,
                const DeadLatentTracker& tracker, const TrainConfig& cfg);

struct LossTerms {
  double recon = 0.0;  // mean over rows
  double aux = 0.0;    // mean over rows, before aux_coef
  double total = 0.0;  // recon + aux_coef · aux
};

/// Loss of a batch (rows of `batch`). When `grad` is non-null it receives
/// the gradient of `total` (same shapes as params, overwritten). When `fired`
/// is non-null it is OR-ed with the encoder supports.
LossTerms batch_loss(const sae::SaeParams& params, const MatrixD& batch, std::span<const char> dead,
                     const TrainConfig& cfg, sae::SaeParams* grad = nullptr,
                     std::vector<char>* fired = nullptr);

struct StepResult {
  std::size_t step = 0;
  double loss = 0.0;  // mean reconstruction loss
  double aux_loss = 0.0;
  double total = 0.0;
  double lr = 0.0;
};

/// One optimizer update. Throws TrainingError on a non-finite loss.
StepResult train_step(sae::SaeParams& params, OptState& opt, const MatrixD& batch,
                      DeadLatentTracker& tracker, const TrainConfig& cfg, std::size_t step,
                      std::size_t total_steps);

/// Rescales each w_dec column to unit L2 norm (zero columns are left alone).
void normalize_decoder_columns(sae::SaeParams& params);

struct TrainResult {
  sae::SaeParams params;
  std::vector<StepResult> history;
  DeadLatentTracker tracker;
};

using StepCallback = std::function<void(const StepResult&, std::size_t total_steps)>;

/// Rows of all shards as doubles (unit-normalized when cfg asks for it).
MatrixD gather_rows(const std::vector<store::ActivationShard>& shards, const TrainConfig& cfg);

std::size_t planned_steps(std::size_t num_rows, const TrainConfig& cfg);

TrainResult train(const std::vector<store::ActivationShard>& shards, const TrainConfig& cfg,
                  const StepCallback& on_step = {});

void write_loss_csv(const std::filesystem::path& path, const std::vector<StepResult>& history);

}  // namespace saekit::train
