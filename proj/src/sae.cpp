#include "saekit/sae.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace saekit::sae {

SaeParams SaeParams::zeros(Variant variant, std::size_t n, std::size_t d, std::size_t k) {
  SaeParams p;
  p.variant = variant;
  p.n = n;
  p.d = d;
  p.k = k;
  p.w_enc = MatrixD(n, d);
  if (variant == Variant::Relu) p.b_enc.assign(n, 0.0);
  p.w_dec = MatrixD(d, n);
  p.b_pre.assign(d, 0.0);
  return p;
}

void check_params(const SaeParams& p) {
  if (p.n == 0 || p.d == 0) throw std::invalid_argument("SAE needs n >= 1 and d >= 1");
  require_dim("w_enc rows", p.n, p.w_enc.rows());
  require_dim("w_enc cols", p.d, p.w_enc.cols());
  require_dim("w_dec rows", p.d, p.w_dec.rows());
  require_dim("w_dec cols", p.n, p.w_dec.cols());
  require_dim("b_pre", p.d, p.b_pre.size());
  if (p.variant == Variant::Relu) {
    require_dim("b_enc", p.n, p.b_enc.size());
  } else {
    require_dim("b_enc (TopK carries none)", 0, p.b_enc.size());
    if (p.k == 0 || p.k > p.n)
      throw std::invalid_argument("TopK requires 1 <= k <= n (k=" + std::to_string(p.k) +
                                  ", n=" + std::to_string(p.n) + ")");
  }
}

std::vector<double> pre_activations(const SaeParams& params, std::span<const double> x) {
  require_dim("input vector", params.d, x.size());
  std::vector<double> centered(params.d);
  for (std::size_t j = 0; j < params.d; ++j) centered[j] = x[j] - params.b_pre[j];
  std::vector<double> pre(params.n);
  for (std::size_t i = 0; i < params.n; ++i) {
    const auto w = params.w_enc.row(i);
    double acc = 0.0;
    for (std::size_t j = 0; j < params.d; ++j) acc += w[j] * centered[j];
    pre[i] = acc;
  }
  if (params.variant == Variant::Relu)
    for (std::size_t i = 0; i < params.n; ++i) pre[i] += params.b_enc[i];
  return pre;
}

std::vector<double> encode_relu(const SaeParams& params, std::span<const double> x) {
  if (params.variant != Variant::Relu) throw std::invalid_argument("encode_relu on a TopK SAE");
  auto z = pre_activations(params, x);
  for (double& v : z) v = std::max(v, 0.0);
  return z;
}

std::vector<std::uint32_t> topk_indices(std::span<const double> v, std::size_t k) {
  if (k == 0 || k > v.size())
    throw std::invalid_argument("topk needs 1 <= k <= n (k=" + std::to_string(k) +
                                ", n=" + std::to_string(v.size()) + ")");
  std::vector<std::uint32_t> order(v.size());
  std::iota(order.begin(), order.end(), 0u);
  const auto larger = [&](std::uint32_t a, std::uint32_t b) {
    return v[a] > v[b] || (v[a] == v[b] && a < b);
  };
  std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k - 1), order.end(), larger);
  order.resize(k);
  std::sort(order.begin(), order.end());
  return order;
}

SparseLatents topk_mask(std::span<const double> v, std::size_t k) {
  SparseLatents z;
  z.n = v.size();
  for (std::uint32_t i : topk_indices(v, k)) {
    if (v[i] == 0.0) continue;
    z.indices.push_back(i);
    z.values.push_back(v[i]);
  }
  return z;
}

SparseLatents encode_topk(const SaeParams& params, std::span<const double> x) {
  if (params.variant != Variant::TopK) throw std::invalid_argument("encode_topk on a ReLU SAE");
  return topk_mask(pre_activations(params, x), params.k);
}

std::vector<double> decode(const SaeParams& params, const SparseLatents& z) {
  require_dim("latent count", params.n, z.n);
  std::vector<double> out(params.b_pre);
  for (std::size_t t = 0; t < z.nnz(); ++t) {
    const std::size_t col = z.indices[t];
    const double value = z.values[t];
    for (std::size_t r = 0; r < params.d; ++r) out[r] += params.w_dec(r, col) * value;
  }
  return out;
}

SparseLatents jump_relu(const SparseLatents& z, double theta) {
  if (!(theta >= 0.0)) throw std::invalid_argument("jump threshold must be >= 0");
  SparseLatents out;
  out.n = z.n;
  for (std::size_t t = 0; t < z.nnz(); ++t) {
    if (z.values[t] > theta) {
      out.indices.push_back(z.indices[t]);
      out.values.push_back(z.values[t]);
    }
  }
  return out;
}

double recon_loss(std::span<const double> x, std::span<const double> x_hat) {
  require_dim("reconstruction", x.size(), x_hat.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double diff = x[i] - x_hat[i];
    acc += diff * diff;
  }
  return acc;
}

SparseLatents to_sparse(std::span<const double> dense) {
  SparseLatents z;
  z.n = dense.size();
  for (std::size_t i = 0; i < dense.size(); ++i) {
    if (dense[i] != 0.0) {
      z.indices.push_back(static_cast<std::uint32_t>(i));
      z.values.push_back(dense[i]);
    }
  }
  return z;
}

std::vector<double> to_double(std::span<const float> row) { return {row.begin(), row.end()}; }

}  // namespace saekit::sae
