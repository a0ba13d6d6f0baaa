#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "saekit/activation_store.hpp"
#include "saekit/features.hpp"
#include "saekit/records.hpp"
#include "saekit/sae.hpp"
#include "saekit/selection.hpp"

namespace saekit::metrics {

class DegenerateInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct CorrelationReport {
  double r = 0.0;
  std::size_t n_points = 0;
  double slope = 0.0;
  double intercept = 0.0;
};

/// Pearson r and the least-squares line ys ≈ slope·xs + intercept.
/// Throws DegenerateInput for fewer than two points or zero variance.
CorrelationReport pearson(std::span<const double> xs, std::span<const double> ys);

struct LengthCountRow {
  std::int64_t id = 0;
  std::size_t length = 0;
  std::size_t count = 0;
};

struct LengthActivationReport {
  CorrelationReport correlation;
  std::vector<LengthCountRow> table;
  records::LengthMetric metric = records::LengthMetric::Chars;
  records::Scope scope = records::Scope::Instruction;
};

/// Text length against activated-feature count, one point per record.
LengthActivationReport length_activation_report(const std::vector<records::DataRecord>& records,
                                                const features::FeatureMap& features,
                                                records::LengthMetric metric = records::LengthMetric::Chars,
                                                records::Scope scope = records::Scope::Instruction);

/// (rank, union size after that acceptance), in acceptance order.
std::vector<std::pair<std::size_t, std::size_t>> coverage_curve(const selection::SelectionReport& report);

struct SweepPoint {
  double theta = 0.0;
  std::size_t total_features = 0;  // summed over samples
  double mean_features = 0.0;
  std::size_t empty_samples = 0;
};

/// Feature-set sizes across inference thresholds.
std::vector<SweepPoint> threshold_sweep(const sae::SaeParams& params, const store::ActivationShard& shard,
                                        const std::vector<double>& thetas);

void write_length_table_csv(const std::filesystem::path& path, const LengthActivationReport& report);
void write_coverage_csv(const std::filesystem::path& path,
                        const std::vector<std::pair<std::size_t, std::size_t>>& curve);
void write_sweep_csv(const std::filesystem::path& path, const std::vector<SweepPoint>& sweep);
/// `key: value` lines.
std::string format_summary(const LengthActivationReport& report);

}  // namespace saekit::metrics
