#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "saekit/matrix.hpp"

namespace saekit::sae {

enum class Variant : std::uint32_t { Relu = 0, TopK = 1 };

/// Encoder/decoder weights.
///
/// w_enc is (n, d), w_dec is (d, n) so that column j of w_dec is the
/// dictionary direction of latent j. b_enc is empty for the TopK variant.
/// b_pre is subtracted before encoding and added back after decoding.
struct SaeParams {
  Variant variant = Variant::TopK;
  std::size_t n = 0;
  std::size_t d = 0;
  std::size_t k = 0;
  MatrixD w_enc;
  std::vector<double> b_enc;
  MatrixD w_dec;
  std::vector<double> b_pre;

  /// Zero-filled parameters of the right shapes.
  static SaeParams zeros(Variant variant, std::size_t n, std::size_t d, std::size_t k);

  bool operator==(const SaeParams&) const = default;
};

/// Throws std::invalid_argument / DimensionMismatch on inconsistent shapes.
void check_params(const SaeParams& params);

/// Sparse latent code: strictly increasing indices with their values.
struct SparseLatents {
  std::vector<std::uint32_t> indices;
  std::vector<double> values;
  std::size_t n = 0;

  std::size_t nnz() const { return indices.size(); }
  bool operator==(const SparseLatents&) const = default;
};

/// w_enc·(x − b_pre) (+ b_enc for the ReLU variant), before any rectifier.
std::vector<double> pre_activations(const SaeParams& params, std::span<const double> x);

std::vector<double> encode_relu(const SaeParams& params, std::span<const double> x);

/// Keeps the k algebraically largest entries, ties toward the lower index.
/// Kept entries that are exactly zero are dropped from the sparse form.
SparseLatents topk_mask(std::span<const double> v, std::size_t k);

/// Indices (ascending) of the k largest entries, ties toward the lower index.
std::vector<std::uint32_t> topk_indices(std::span<const double> v, std::size_t k);

SparseLatents encode_topk(const SaeParams& params, std::span<const double> x);

/// w_dec·z + b_pre over the nonzero latents only.
std::vector<double> decode(const SaeParams& params, const SparseLatents& z);

/// Keeps entries strictly greater than theta.
SparseLatents jump_relu(const SparseLatents& z, double theta);

double recon_loss(std::span<const double> x, std::span<const double> x_hat);

/// Dense vector to sparse form, dropping exact zeros.
SparseLatents to_sparse(std::span<const double> dense);

std::vector<double> to_double(std::span<const float> row);

}  // namespace saekit::sae
