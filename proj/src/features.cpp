#include "saekit/features.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <stdexcept>

namespace saekit::features {

std::vector<std::uint32_t> token_features(const sae::SaeParams& params, std::span<const float> row, double theta) {
  const auto x = sae::to_double(row);
  return sae::jump_relu(sae::encode_topk(params, x), theta).indices;
}

std::vector<FeatureSet> extract_features(const sae::SaeParams& params, const store::ActivationShard& shard,
                                         double theta) {
  if (params.variant != sae::Variant::TopK) throw std::invalid_argument("feature extraction needs a TopK SAE");
  if (theta < 0.0) throw std::invalid_argument("threshold must be nonnegative");
  require_dim("shard d vs checkpoint d", params.d, shard.d);

  std::vector<FeatureSet> out(shard.num_samples());
  std::vector<char> seen(params.n);
  for (std::size_t s = 0; s < shard.num_samples(); ++s) {
    std::fill(seen.begin(), seen.end(), 0);
    for (std::size_t r = shard.sample_begin(s); r < shard.sample_end(s); ++r)
      for (std::uint32_t j : token_features(params, shard.rows.row(r), theta)) seen[j] = 1;
    out[s].sample_id = static_cast<std::int64_t>(s);
    for (std::uint32_t j = 0; j < params.n; ++j)
      if (seen[j]) out[s].indices.push_back(j);
  }
  return out;
}

FeatureMap to_map(const std::vector<FeatureSet>& sets) {
  FeatureMap map;
  for (const auto& fs : sets) {
    if (!map.emplace(fs.sample_id, fs).second)
      throw std::invalid_argument("duplicate sample id " + std::to_string(fs.sample_id));
  }
  return map;
}

std::string format_line(const FeatureSet& fs) {
  std::string line = std::to_string(fs.sample_id);
  line += '\t';
  for (std::size_t i = 0; i < fs.indices.size(); ++i) {
    if (i > 0) line += ',';
    line += std::to_string(fs.indices[i]);
  }
  return line;
}

FeatureSet parse_line(const std::string& line) {
  const auto tab = line.find('\t');
  if (tab == std::string::npos) throw std::invalid_argument("feature line without TAB: " + line);
  FeatureSet fs;
  const char* first = line.data();
  auto [p, ec] = std::from_chars(first, first + tab, fs.sample_id);
  if (ec != std::errc{} || p != first + tab) throw std::invalid_argument("bad sample id in: " + line);

  const char* cur = line.data() + tab + 1;
  const char* end = line.data() + line.size();
  while (cur < end) {
    std::uint32_t idx = 0;
    auto [next, err] = std::from_chars(cur, end, idx);
    if (err != std::errc{}) throw std::invalid_argument("bad feature index in: " + line);
    if (!fs.indices.empty() && idx <= fs.indices.back())
      throw std::invalid_argument("feature indices not strictly increasing in: " + line);
    fs.indices.push_back(idx);
    cur = next;
    if (cur < end) {
      if (*cur != ',') throw std::invalid_argument("expected ',' in: " + line);
      ++cur;
      if (cur == end) throw std::invalid_argument("trailing ',' in: " + line);
    }
  }
  return fs;
}

void write_feature_sets(const std::filesystem::path& path, const std::vector<FeatureSet>& sets,
                        const std::map<std::string, std::string>& header) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  for (const auto& [key, value] : header) out << "# " << key << '=' << value << '\n';
  for (const auto& fs : sets) out << format_line(fs) << '\n';
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::vector<FeatureSet> read_feature_sets(const std::filesystem::path& path,
                                          std::map<std::string, std::string>* header) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open feature file " + path.string());
  std::vector<FeatureSet> sets;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.front() == '#') {
      if (header != nullptr) {
        const auto start = line.find_first_not_of("# ");
        const auto body = start == std::string::npos ? std::string{} : line.substr(start);
        const auto eq = body.find('=');
        if (eq != std::string::npos) (*header)[body.substr(0, eq)] = body.substr(eq + 1);
      }
      continue;
    }
    sets.push_back(parse_line(line));
  }
  return sets;
}

}  // namespace saekit::features
