// Reference simulation of the selection loop. Shares no code with
// saekit::selection beyond the result structs.

#include <algorithm>
#include <iterator>
#include <list>
#include <set>

#include "saekit/synth.hpp"

namespace saekit::synth {

OracleRun oracle_run(const std::vector<records::DataRecord>& sorted, const features::FeatureMap& features,
                     const selection::SelectConfig& cfg) {
  if (cfg.target_n == 0) throw std::invalid_argument("target_n must be at least 1");

  struct Candidate {
    std::int64_t id;
    std::set<std::uint32_t> feats;
  };
  std::list<Candidate> pool;
  for (const auto& rec : sorted) {
    auto it = features.find(rec.id);
    if (it == features.end()) throw selection::MissingFeatures(rec.id);
    pool.push_back({rec.id, std::set<std::uint32_t>(it->second.indices.begin(), it->second.indices.end())});
  }

  OracleRun run;
  auto& st = run.state;
  std::set<std::uint32_t> everything;
  std::set<std::uint32_t> acc;
  while (st.selected_ids.size() < cfg.target_n) {
    st.pass_count += 1;
    acc.clear();
    bool accepted_any = false;
    for (auto it = pool.begin(); it != pool.end();) {
      std::set<std::uint32_t> uni;
      std::set_union(acc.begin(), acc.end(), it->feats.begin(), it->feats.end(), std::inserter(uni, uni.end()));
      std::set<std::uint32_t> inter;
      std::set_intersection(acc.begin(), acc.end(), it->feats.begin(), it->feats.end(),
                            std::inserter(inter, inter.end()));
      bool take;
      if (cfg.mode == selection::Mode::Greedy) {
        take = uni.size() > acc.size();
      } else if (acc.empty()) {
        take = true;
      } else {
        take = static_cast<double>(inter.size()) / static_cast<double>(acc.size()) < cfg.sim_threshold;
      }
      if (!take) {
        ++it;
        continue;
      }
      selection::ReportRow row;
      row.rank = st.selected_ids.size() + 1;
      row.id = it->id;
      row.pass = st.pass_count;
      row.new_features = uni.size() - acc.size();
      row.accumulator_size = uni.size();
      everything.insert(it->feats.begin(), it->feats.end());
      row.union_size = everything.size();
      run.report.rows.push_back(row);

      st.selected_ids.push_back(it->id);
      st.accepted_pass.push_back(st.pass_count);
      acc = std::move(uni);
      accepted_any = true;
      it = pool.erase(it);
      if (st.selected_ids.size() == cfg.target_n) break;
    }
    st.accumulated.assign(acc.begin(), acc.end());
    if (!accepted_any) break;
  }
  st.shortfall = cfg.target_n - st.selected_ids.size();
  run.report.total_union = everything.size();
  return run;
}

}  // namespace saekit::synth
