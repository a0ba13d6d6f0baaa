#include "saekit/selection.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace saekit::selection {

using records::DataRecord;

namespace {

// Bit-per-latent set that grows on demand.
class LatentSet {
 public:
  void clear() {
    std::fill(bits_.begin(), bits_.end(), 0);
    size_ = 0;
  }

  std::size_t size() const { return size_; }

  bool contains(std::uint32_t i) const { return i < bits_.size() && bits_[i]; }

  std::size_t count_missing(const std::vector<std::uint32_t>& indices) const {
    std::size_t missing = 0;
    for (std::uint32_t i : indices)
      if (!contains(i)) ++missing;
    return missing;
  }

  void insert(const std::vector<std::uint32_t>& indices) {
    for (std::uint32_t i : indices) {
      if (i >= bits_.size()) bits_.resize(static_cast<std::size_t>(i) + 1, 0);
      if (!bits_[i]) {
        bits_[i] = 1;
        ++size_;
      }
    }
  }

  std::vector<std::uint32_t> sorted() const {
    std::vector<std::uint32_t> out;
    for (std::uint32_t i = 0; i < bits_.size(); ++i)
      if (bits_[i]) out.push_back(i);
    return out;
  }

 private:
  std::vector<char> bits_;
  std::size_t size_ = 0;
};

const features::FeatureSet& lookup(const features::FeatureMap& features, std::int64_t id) {
  const auto it = features.find(id);
  if (it == features.end()) throw MissingFeatures(id);
  return it->second;
}

}  // namespace

const char* to_string(Mode mode) { return mode == Mode::Greedy ? "greedy" : "simscale"; }

Mode parse_mode(const std::string& text) {
  if (text == "greedy") return Mode::Greedy;
  if (text == "simscale") return Mode::SimScale;
  throw std::invalid_argument("unknown selection mode '" + text + "' (greedy|simscale)");
}

void SelectConfig::validate() const {
  if (target_n == 0) throw std::invalid_argument("target_n must be at least 1");
  if (!(sim_threshold >= 0.0)) throw std::invalid_argument("sim_threshold must be nonnegative");
  if (!(jump_threshold >= 0.0)) throw std::invalid_argument("jump_threshold must be nonnegative");
}

std::vector<DataRecord> sort_records(std::vector<DataRecord> records, records::LengthMetric metric) {
  std::vector<std::pair<std::size_t, std::size_t>> keyed(records.size());
  for (std::size_t i = 0; i < records.size(); ++i)
    keyed[i] = {metric == records::LengthMetric::Chars
                    ? records[i].instruction_length
                    : records::text_length(records[i], metric, records::Scope::Instruction),
                i};
  std::stable_sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  std::vector<DataRecord> out;
  out.reserve(records.size());
  for (const auto& [len, i] : keyed) out.push_back(std::move(records[i]));
  return out;
}

SelectionState select(const std::vector<DataRecord>& sorted, const features::FeatureMap& features,
                      const SelectConfig& cfg) {
  cfg.validate();
  std::vector<const features::FeatureSet*> sets;
  sets.reserve(sorted.size());
  for (const auto& rec : sorted) sets.push_back(&lookup(features, rec.id));

  SelectionState state;
  std::vector<char> taken(sorted.size(), 0);
  LatentSet acc;
  while (state.selected_ids.size() < cfg.target_n) {
    ++state.pass_count;
    acc.clear();
    std::size_t accepted = 0;
    for (std::size_t i = 0; i < sorted.size() && state.selected_ids.size() < cfg.target_n; ++i) {
      if (taken[i]) continue;
      const auto& indices = sets[i]->indices;
      const std::size_t added = acc.count_missing(indices);
      bool accept = false;
      if (cfg.mode == Mode::Greedy) {
        accept = added > 0;
      } else if (acc.size() == 0) {
        accept = true;
      } else {
        const auto overlap = static_cast<double>(indices.size() - added);
        accept = overlap / static_cast<double>(acc.size()) < cfg.sim_threshold;
      }
      if (!accept) continue;
      taken[i] = 1;
      acc.insert(indices);
      state.selected_ids.push_back(sorted[i].id);
      state.accepted_pass.push_back(state.pass_count);
      ++accepted;
    }
    state.accumulated = acc.sorted();
    if (accepted == 0) break;
  }
  state.shortfall = cfg.target_n - state.selected_ids.size();
  return state;
}

SelectionReport selection_report(const SelectionState& state, const features::FeatureMap& features) {
  SelectionReport report;
  LatentSet pass_acc;
  LatentSet all;
  std::size_t current_pass = 0;
  for (std::size_t i = 0; i < state.selected_ids.size(); ++i) {
    if (state.accepted_pass[i] != current_pass) {
      current_pass = state.accepted_pass[i];
      pass_acc.clear();
    }
    const auto& indices = lookup(features, state.selected_ids[i]).indices;
    ReportRow row;
    row.rank = i + 1;
    row.id = state.selected_ids[i];
    row.pass = current_pass;
    row.new_features = pass_acc.count_missing(indices);
    pass_acc.insert(indices);
    all.insert(indices);
    row.accumulator_size = pass_acc.size();
    row.union_size = all.size();
    report.rows.push_back(row);
  }
  report.total_union = all.size();
  return report;
}

void write_report_csv(const std::filesystem::path& path, const SelectionReport& report) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << "rank,id,pass,new_features,accumulator_size,union_size\n";
  for (const auto& r : report.rows)
    out << r.rank << ',' << r.id << ',' << r.pass << ',' << r.new_features << ',' << r.accumulator_size << ','
        << r.union_size << '\n';
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

SelectionReport read_report_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open report " + path.string());
  SelectionReport report;
  std::string line;
  std::getline(in, line);
  if (line != "rank,id,pass,new_features,accumulator_size,union_size")
    throw std::runtime_error("unexpected report header in " + path.string());
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream fields(line);
    ReportRow r;
    char c1, c2, c3, c4, c5;
    fields >> r.rank >> c1 >> r.id >> c2 >> r.pass >> c3 >> r.new_features >> c4 >> r.accumulator_size >> c5 >>
        r.union_size;
    if (!fields || c1 != ',' || c2 != ',' || c3 != ',' || c4 != ',' || c5 != ',')
      throw std::runtime_error("malformed report row: " + line);
    report.rows.push_back(r);
  }
  report.total_union = report.rows.empty() ? 0 : report.rows.back().union_size;
  return report;
}

void write_selected_ids(const std::filesystem::path& path, const SelectionState& state) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  for (std::int64_t id : state.selected_ids) out << id << '\n';
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace saekit::selection
