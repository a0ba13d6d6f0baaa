#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <vector>

#include "saekit/features.hpp"
#include "saekit/records.hpp"

namespace saekit::selection {

enum class Mode { Greedy, SimScale };

const char* to_string(Mode mode);
Mode parse_mode(const std::string& text);

struct SelectConfig {
  Mode mode = Mode::Greedy;
  std::size_t target_n = 1000;
  double sim_threshold = 0.8;
  double jump_threshold = 10.0;
  records::LengthMetric length_metric = records::LengthMetric::Chars;

  void validate() const;
};

/// Result of a selection run. accepted_pass[i] is the (1-based) pass in
/// which selected_ids[i] was taken; `accumulated` is the feature union of the
/// final pass.
struct SelectionState {
  std::vector<std::int64_t> selected_ids;
  std::vector<std::size_t> accepted_pass;
  std::vector<std::uint32_t> accumulated;
  std::size_t pass_count = 0;
  std::size_t shortfall = 0;

  bool operator==(const SelectionState&) const = default;
};

class MissingFeatures : public std::runtime_error {
 public:
  explicit MissingFeatures(std::int64_t id)
      : std::runtime_error("record id " + std::to_string(id) + " has no feature set"), id_(id) {}
  std::int64_t id() const { return id_; }

 private:
  std::int64_t id_;
};

/// Stable sort by instruction length, longest first.
std::vector<records::DataRecord> sort_records(std::vector<records::DataRecord> records,
                                              records::LengthMetric metric = records::LengthMetric::Chars);

/// Multi-pass selection over pre-sorted records. Each pass clears the
/// feature accumulator and scans the remaining pool in order; greedy mode
/// accepts a record that adds a new feature, simscale mode one whose overlap
/// with the accumulator is below sim_threshold (always true for an empty
/// accumulator). Stops at target_n or after a pass that accepts nothing.
SelectionState select(const std::vector<records::DataRecord>& sorted, const features::FeatureMap& features,
                      const SelectConfig& cfg);

struct ReportRow {
  std::size_t rank = 0;  // 1-based acceptance order
  std::int64_t id = 0;
  std::size_t pass = 0;
  std::size_t new_features = 0;      // relative to the pass accumulator
  std::size_t accumulator_size = 0;  // pass accumulator after acceptance
  std::size_t union_size = 0;        // all selected so far, across passes

  bool operator==(const ReportRow&) const = default;
};

struct SelectionReport {
  std::vector<ReportRow> rows;
  std::size_t total_union = 0;

  bool operator==(const SelectionReport&) const = default;
};

SelectionReport selection_report(const SelectionState& state, const features::FeatureMap& features);

void write_report_csv(const std::filesystem::path& path, const SelectionReport& report);
SelectionReport read_report_csv(const std::filesystem::path& path);

void write_selected_ids(const std::filesystem::path& path, const SelectionState& state);

}  // namespace saekit::selection
