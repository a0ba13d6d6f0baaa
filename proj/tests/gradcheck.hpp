#pragma once

// Central-difference check of the training gradient, restricted to
// coordinates whose perturbation leaves every row's encoder and dead-latent
// supports unchanged (the loss is only piecewise smooth).

#include <algorithm>
#include <cmath>
#include <vector>

#include "saekit/rng.hpp"
#include "saekit/train.hpp"

namespace saekit::testing {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t points = 0;
  std::size_t skipped_unstable = 0;
};

inline double* coordinate(sae::SaeParams& p, std::size_t tensor, std::size_t index) {
  switch (tensor) {
    case 0: return &p.w_enc.data()[index];
    case 1: return &p.w_dec.data()[index];
    case 2: return &p.b_pre[index];
    default: return &p.b_enc[index];
  }
}

inline std::size_t tensor_size(const sae::SaeParams& p, std::size_t tensor) {
  switch (tensor) {
    case 0: return p.w_enc.size();
    case 1: return p.w_dec.size();
    case 2: return p.b_pre.size();
    default: return p.b_enc.size();
  }
}

inline std::vector<std::vector<std::uint32_t>> supports(const sae::SaeParams& p, const MatrixD& batch,
                                                        std::span<const char> dead, const train::TrainConfig& cfg) {
  std::vector<std::vector<std::uint32_t>> out;
  for (std::size_t i = 0; i < batch.rows(); ++i) {
    auto t = train::forward(p, batch.row(i), dead, cfg);
    out.push_back(std::move(t.active));
    out.push_back(std::move(t.aux_active));
  }
  return out;
}

inline GradCheckResult gradient_check(const sae::SaeParams& params, const MatrixD& batch, std::span<const char> dead,
                                      const train::TrainConfig& cfg, std::size_t wanted, double h, Rng& rng) {
  sae::SaeParams grad;
  train::batch_loss(params, batch, dead, cfg, &grad);
  const auto base_support = supports(params, batch, dead, cfg);
  const std::size_t tensors = params.variant == sae::Variant::Relu ? 4 : 3;

  GradCheckResult result;
  std::size_t attempts = 0;
  while (result.points < wanted && attempts < 100 * wanted) {
    ++attempts;
    const std::size_t tensor = rng.below(tensors);
    const std::size_t index = rng.below(tensor_size(params, tensor));

    sae::SaeParams plus = params;
    sae::SaeParams minus = params;
    *coordinate(plus, tensor, index) += h;
    *coordinate(minus, tensor, index) -= h;
    if (supports(plus, batch, dead, cfg) != base_support || supports(minus, batch, dead, cfg) != base_support) {
      ++result.skipped_unstable;
      continue;
    }
    const double f_plus = train::batch_loss(plus, batch, dead, cfg).total;
    const double f_minus = train::batch_loss(minus, batch, dead, cfg).total;
    const double numeric = (f_plus - f_minus) / (2.0 * h);
    const double analytic = *coordinate(grad, tensor, index);
    const double scale = std::max(std::abs(numeric), std::abs(analytic));
    const double rel = scale == 0.0 ? 0.0 : std::abs(numeric - analytic) / scale;
    result.max_rel_error = std::max(result.max_rel_error, rel);
    ++result.points;
  }
  return result;
}

}  // namespace saekit::testing
