#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "saekit/activation_store.hpp"
#include "saekit/sae.hpp"

namespace saekit::features {

/// Latents that fired anywhere in one sample.
struct FeatureSet {
  std::int64_t sample_id = 0;
  std::vector<std::uint32_t> indices;  // sorted, unique

  bool operator==(const FeatureSet&) const = default;
};

/// Per-token TopK encode, JumpReLU at theta, union over the sample's tokens.
/// One FeatureSet per sample, in sample order, empty sets included.
std::vector<FeatureSet> extract_features(const sae::SaeParams& params, const store::ActivationShard& shard,
                                         double theta);

/// Surviving latent ids of a single activation row.
std::vector<std::uint32_t> token_features(const sae::SaeParams& params, std::span<const float> row, double theta);

inline std::size_t activation_count(const FeatureSet& fs) { return fs.indices.size(); }

using FeatureMap = std::map<std::int64_t, FeatureSet>;

FeatureMap to_map(const std::vector<FeatureSet>& sets);

/// Text format: optional `#`-prefixed header lines, then one
/// `sample_id<TAB>i,j,k` line per sample (empty list allowed).
void write_feature_sets(const std::filesystem::path& path, const std::vector<FeatureSet>& sets,
                        const std::map<std::string, std::string>& header = {});
std::vector<FeatureSet> read_feature_sets(const std::filesystem::path& path,
                                          std::map<std::string, std::string>* header = nullptr);

std::string format_line(const FeatureSet& fs);
FeatureSet parse_line(const std::string& line);

}  // namespace saekit::features
