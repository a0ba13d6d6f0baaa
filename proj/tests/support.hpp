#pragma once

// Test-only helpers: scratch directories, straightforward reference
// implementations, and random generators.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include <unistd.h>

#include "saekit/activation_store.hpp"
#include "saekit/features.hpp"
#include "saekit/rng.hpp"
#include "saekit/sae.hpp"
#include "saekit/selection.hpp"

namespace saekit::testing {

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("saekit_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void spit(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

inline bool bitwise_equal(const store::ActivationShard& a, const store::ActivationShard& b) {
  return a.d == b.d && a.rows.rows() == b.rows.rows() && a.sample_offsets == b.sample_offsets &&
         a.meta == b.meta && a.rows.size() == b.rows.size() &&
         std::memcmp(a.rows.data().data(), b.rows.data().data(), a.rows.size() * sizeof(float)) == 0;
}

inline store::ActivationShard random_shard(Rng& rng, std::size_t d, std::size_t rows, std::size_t samples) {
  store::ActivationShard s;
  s.d = static_cast<std::uint32_t>(d);
  s.rows = MatrixF(rows, d);
  for (float& v : s.rows.data()) v = static_cast<float>(rng.normal() * 3.0);
  // `samples` strictly increasing cut points ending at rows.
  std::vector<std::uint64_t> cuts(rows);
  std::iota(cuts.begin(), cuts.end(), std::uint64_t{1});
  rng.shuffle(std::span<std::uint64_t>(cuts));
  std::vector<std::uint64_t> chosen(cuts.begin(), cuts.begin() + static_cast<std::ptrdiff_t>(samples - 1));
  chosen.push_back(rows);
  std::sort(chosen.begin(), chosen.end());
  chosen.erase(std::unique(chosen.begin(), chosen.end()), chosen.end());
  s.sample_offsets = {0};
  s.sample_offsets.insert(s.sample_offsets.end(), chosen.begin(), chosen.end());
  s.meta = {{"model", "test"}, {"layer", std::to_string(rng.below(32))}};
  return s;
}

inline sae::SaeParams random_params(Rng& rng, sae::Variant variant, std::size_t n, std::size_t d, std::size_t k) {
  auto p = sae::SaeParams::zeros(variant, n, d, k);
  for (double& v : p.w_enc.data()) v = rng.normal() / std::sqrt(static_cast<double>(d));
  for (double& v : p.w_dec.data()) v = rng.normal();
  for (double& v : p.b_enc) v = 0.1 * rng.normal();
  for (double& v : p.b_pre) v = 0.1 * rng.normal();
  return p;
}

inline std::vector<double> random_vector(Rng& rng, std::size_t len) {
  std::vector<double> v(len);
  for (double& x : v) x = rng.normal();
  return v;
}

// w_enc·(x − b_pre) (+ b_enc) in long double.
inline std::vector<long double> reference_pre(const sae::SaeParams& p, const std::vector<double>& x) {
  std::vector<long double> out(p.n);
  for (std::size_t i = 0; i < p.n; ++i) {
    long double acc = p.variant == sae::Variant::Relu ? p.b_enc[i] : 0.0L;
    for (std::size_t j = 0; j < p.d; ++j) acc += static_cast<long double>(p.w_enc(i, j)) * (x[j] - static_cast<long double>(p.b_pre[j]));
    out[i] = acc;
  }
  return out;
}

// Indices of the k largest values via a stable descending sort.
inline std::vector<std::uint32_t> reference_topk(const std::vector<double>& v, std::size_t k) {
  std::vector<std::uint32_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0u);
  std::stable_sort(idx.begin(), idx.end(), [&](std::uint32_t a, std::uint32_t b) { return v[a] > v[b]; });
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

// Replays a selection and checks the acceptance rule held at every
// acceptance. Returns the number of violations.
inline std::size_t count_condition_violations(const selection::SelectionState& state,
                                              const features::FeatureMap& features,
                                              const selection::SelectConfig& cfg) {
  std::size_t violations = 0;
  std::set<std::uint32_t> acc;
  std::set<std::int64_t> seen;
  std::size_t pass = 0;
  for (std::size_t i = 0; i < state.selected_ids.size(); ++i) {
    if (state.accepted_pass[i] != pass) {
      pass = state.accepted_pass[i];
      acc.clear();
    }
    if (!seen.insert(state.selected_ids[i]).second) ++violations;
    const auto& q = features.at(state.selected_ids[i]).indices;
    std::size_t overlap = 0;
    for (auto f : q) overlap += acc.count(f);
    const std::size_t fresh = q.size() - overlap;
    if (cfg.mode == selection::Mode::Greedy) {
      if (fresh == 0) ++violations;
    } else if (!acc.empty()) {
      if (!(static_cast<double>(overlap) / static_cast<double>(acc.size()) < cfg.sim_threshold)) ++violations;
    }
    acc.insert(q.begin(), q.end());
  }
  if (state.selected_ids.size() + state.shortfall != cfg.target_n) ++violations;
  return violations;
}

}  // namespace saekit::testing
