#pragma once

#include <cstdint>
#include <vector>

#include "saekit/activation_store.hpp"
#include "saekit/features.hpp"
#include "saekit/matrix.hpp"
#include "saekit/records.hpp"
#include "saekit/selection.hpp"

namespace saekit::synth {

/// m unit-norm atoms of dimension d (rows of `atoms`).
struct GroundTruthDictionary {
  MatrixD atoms;

  std::size_t m() const { return atoms.rows(); }
  std::size_t d() const { return atoms.cols(); }
};

/// Atoms whose |cosine| with an earlier atom reaches this are redrawn.
inline constexpr double kMaxAtomCosine = 0.95;

/// Random unit atoms, redrawing near-duplicates. Throws std::runtime_error
/// when the redraw budget runs out (m too large for d).
GroundTruthDictionary gen_dictionary(std::size_t m, std::size_t d, std::uint64_t seed);

struct SampleSpec {
  std::size_t k_active = 4;
  std::size_t num_samples = 100;
  std::size_t min_tokens = 1;
  std::size_t max_tokens = 20;
  double noise_sigma = 0.0;
  double coef_lo = 0.5;
  double coef_hi = 1.5;
  std::uint64_t seed = 0;
};

struct SyntheticSamples {
  store::ActivationShard shard;
  std::vector<std::vector<std::uint32_t>> true_supports;  // per sample, sorted union of atom ids
  std::vector<std::vector<std::uint32_t>> token_atoms;    // per token row, sorted atom ids
};

/// Each token is a sum of k_active distinct atoms with coefficients in
/// [coef_lo, coef_hi] plus N(0, noise_sigma²) noise per coordinate.
SyntheticSamples gen_samples(const GroundTruthDictionary& dict, const SampleSpec& spec);

/// Mean over atoms of the best |cosine| against any nonzero column of
/// w_dec (d × n). Throws std::invalid_argument if every column is zero.
double mmcs(const MatrixD& w_dec, const GroundTruthDictionary& dict);

struct SyntheticCorpus {
  std::vector<records::DataRecord> records;
  features::FeatureMap features;
};

/// Records whose feature-set sizes grow with instruction length.
SyntheticCorpus gen_records(std::size_t num, std::uint64_t seed);

/// Records whose instruction word counts equal the given per-sample token
/// counts; record i has id i.
std::vector<records::DataRecord> records_for_samples(const std::vector<std::size_t>& token_counts,
                                                     std::uint64_t seed);

struct OracleRun {
  selection::SelectionState state;
  selection::SelectionReport report;
};

/// Plain std::set simulation of the two-mode selection loop, written
/// independently of saekit::selection. Records must be pre-sorted.
OracleRun oracle_run(const std::vector<records::DataRecord>& sorted, const features::FeatureMap& features,
                     const selection::SelectConfig& cfg);

inline selection::SelectionState oracle_select(const std::vector<records::DataRecord>& sorted,
                                               const features::FeatureMap& features,
                                               const selection::SelectConfig& cfg) {
  return oracle_run(sorted, features, cfg).state;
}

}  // namespace saekit::synth
