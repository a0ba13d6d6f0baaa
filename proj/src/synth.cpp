#include "saekit/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "saekit/rng.hpp"

namespace saekit::synth {

namespace {

constexpr std::size_t kRedrawBudget = 10'000;

// Feature universe of the record generator.
constexpr std::uint32_t kRecordFeatures = 4096;

std::string random_word(Rng& rng) {
  static constexpr char kLetters[] = "abcdefghijklmnopqrstuvwxyz";
  const auto len = static_cast<std::size_t>(rng.between(2, 9));
  std::string w(len, 'a');
  for (char& c : w) c = kLetters[rng.below(26)];
  return w;
}

std::string random_text(Rng& rng, std::size_t words) {
  std::string text;
  for (std::size_t i = 0; i < words; ++i) {
    if (i > 0) text += ' ';
    text += random_word(rng);
  }
  return text;
}

}  // namespace

GroundTruthDictionary gen_dictionary(std::size_t m, std::size_t d, std::uint64_t seed) {
  if (m == 0) throw std::invalid_argument("dictionary needs m >= 1");
  if (d < 2) throw std::invalid_argument("dictionary needs d >= 2");
  Rng rng(seed);
  GroundTruthDictionary dict{MatrixD(m, d)};
  std::vector<double> cand(d);
  for (std::size_t a = 0; a < m; ++a) {
    bool placed = false;
    for (std::size_t attempt = 0; attempt < kRedrawBudget && !placed; ++attempt) {
      double sq = 0.0;
      for (double& v : cand) {
        v = rng.normal();
        sq += v * v;
      }
      if (sq == 0.0) continue;
      const double inv = 1.0 / std::sqrt(sq);
      for (double& v : cand) v *= inv;
      placed = true;
      for (std::size_t b = 0; b < a && placed; ++b) {
        const auto other = dict.atoms.row(b);
        double dot = 0.0;
        for (std::size_t j = 0; j < d; ++j) dot += cand[j] * other[j];
        if (std::abs(dot) >= kMaxAtomCosine) placed = false;
      }
    }
    if (!placed)
      throw std::runtime_error("could not place atom " + std::to_string(a) + " of " + std::to_string(m) +
                               " in dimension " + std::to_string(d) + ": m too large for d");
    std::copy(cand.begin(), cand.end(), dict.atoms.row(a).begin());
  }
  return dict;
}

SyntheticSamples gen_samples(const GroundTruthDictionary& dict, const SampleSpec& spec) {
  const std::size_t m = dict.m();
  const std::size_t d = dict.d();
  if (spec.k_active == 0 || spec.k_active > m) throw std::invalid_argument("k_active must lie in [1, m]");
  if (spec.min_tokens == 0 || spec.min_tokens > spec.max_tokens)
    throw std::invalid_argument("token range must satisfy 1 <= min <= max");
  if (spec.noise_sigma < 0.0) throw std::invalid_argument("noise_sigma must be nonnegative");

  Rng rng(spec.seed);
  SyntheticSamples out;
  out.shard.d = static_cast<std::uint32_t>(d);
  out.shard.rows = MatrixF(0, d);
  out.shard.meta = {{"source", "synth"}, {"seed", std::to_string(spec.seed)}};
  std::vector<std::uint32_t> perm(m);
  std::iota(perm.begin(), perm.end(), 0u);
  std::vector<float> row(d);
  std::vector<double> acc(d);

  for (std::size_t s = 0; s < spec.num_samples; ++s) {
    const auto tokens = static_cast<std::size_t>(
        rng.between(static_cast<std::int64_t>(spec.min_tokens), static_cast<std::int64_t>(spec.max_tokens)));
    std::vector<std::uint32_t> support;
    for (std::size_t t = 0; t < tokens; ++t) {
      for (std::size_t i = 0; i < spec.k_active; ++i) {
        const auto j = i + static_cast<std::size_t>(rng.below(m - i));
        std::swap(perm[i], perm[j]);
      }
      std::vector<std::uint32_t> atoms(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(spec.k_active));
      std::fill(acc.begin(), acc.end(), 0.0);
      for (std::uint32_t a : atoms) {
        const double coef = rng.uniform(spec.coef_lo, spec.coef_hi);
        const auto atom = dict.atoms.row(a);
        for (std::size_t j = 0; j < d; ++j) acc[j] += coef * atom[j];
      }
      if (spec.noise_sigma > 0.0)
        for (double& v : acc) v += spec.noise_sigma * rng.normal();
      for (std::size_t j = 0; j < d; ++j) row[j] = static_cast<float>(acc[j]);
      out.shard.rows.append_row(row);
      std::sort(atoms.begin(), atoms.end());
      support.insert(support.end(), atoms.begin(), atoms.end());
      out.token_atoms.push_back(std::move(atoms));
    }
    std::sort(support.begin(), support.end());
    support.erase(std::unique(support.begin(), support.end()), support.end());
    out.true_supports.push_back(std::move(support));
    out.shard.sample_offsets.push_back(out.shard.num_rows());
  }
  return out;
}

double mmcs(const MatrixD& w_dec, const GroundTruthDictionary& dict) {
  require_dim("decoder rows vs dictionary d", dict.d(), w_dec.rows());
  const std::size_t d = w_dec.rows();
  const std::size_t n = w_dec.cols();
  std::vector<double> col_norm(n, 0.0);
  bool any = false;
  for (std::size_t c = 0; c < n; ++c) {
    double sq = 0.0;
    for (std::size_t r = 0; r < d; ++r) sq += w_dec(r, c) * w_dec(r, c);
    col_norm[c] = std::sqrt(sq);
    any = any || sq > 0.0;
  }
  if (!any) throw std::invalid_argument("decoder has no nonzero columns");

  double total = 0.0;
  for (std::size_t a = 0; a < dict.m(); ++a) {
    const auto atom = dict.atoms.row(a);
    double atom_norm = 0.0;
    for (double v : atom) atom_norm += v * v;
    atom_norm = std::sqrt(atom_norm);
    double best = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
      if (col_norm[c] == 0.0) continue;
      double dot = 0.0;
      for (std::size_t r = 0; r < d; ++r) dot += atom[r] * w_dec(r, c);
      best = std::max(best, std::abs(dot) / (atom_norm * col_norm[c]));
    }
    total += best;
  }
  return total / static_cast<double>(dict.m());
}

SyntheticCorpus gen_records(std::size_t num, std::uint64_t seed) {
  if (num == 0) throw std::invalid_argument("gen_records needs num >= 1");
  Rng rng(seed);
  SyntheticCorpus corpus;
  for (std::size_t i = 0; i < num; ++i) {
    const auto tokens = static_cast<std::size_t>(rng.between(1, 64));
    const auto response_words = static_cast<std::size_t>(rng.between(5, 80));
    std::string instruction = random_text(rng, tokens);
    std::string response = random_text(rng, response_words);

    // Each token lights one or two features, skewed toward low ids so that
    // records overlap; the union therefore grows with length but saturates.
    std::vector<std::uint32_t> feats;
    for (std::size_t t = 0; t < tokens; ++t) {
      const auto per_token = 1 + rng.below(2);
      for (std::uint64_t f = 0; f < per_token; ++f) {
        const double u = rng.uniform();
        feats.push_back(static_cast<std::uint32_t>(u * u * kRecordFeatures));
      }
    }
    std::sort(feats.begin(), feats.end());
    feats.erase(std::unique(feats.begin(), feats.end()), feats.end());

    const auto id = static_cast<std::int64_t>(i);
    corpus.records.push_back(records::DataRecord::make(id, std::move(instruction), std::move(response)));
    corpus.features.emplace(id, features::FeatureSet{id, std::move(feats)});
  }
  return corpus;
}

std::vector<records::DataRecord> records_for_samples(const std::vector<std::size_t>& token_counts,
                                                     std::uint64_t seed) {
  Rng rng(seed);
  std::vector<records::DataRecord> out;
  out.reserve(token_counts.size());
  for (std::size_t i = 0; i < token_counts.size(); ++i) {
    std::string instruction = random_text(rng, token_counts[i]);
    std::string response = random_text(rng, static_cast<std::size_t>(rng.between(5, 40)));
    out.push_back(records::DataRecord::make(static_cast<std::int64_t>(i), std::move(instruction), std::move(response)));
  }
  return out;
}

}  // namespace saekit::synth
