#include "saekit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace saekit::metrics {

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  return out;
}

}  // namespace

CorrelationReport pearson(std::span<const double> xs, std::span<const double> ys) {
  require_dim("pearson ys", xs.size(), ys.size());
  if (xs.size() < 2) throw DegenerateInput("pearson needs at least two points");
  const double count = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= count;
  my /= count;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx == 0.0) throw DegenerateInput("xs have zero variance");
  if (syy == 0.0) throw DegenerateInput("ys have zero variance");
  CorrelationReport rep;
  rep.n_points = xs.size();
  rep.r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  rep.slope = sxy / sxx;
  rep.intercept = my - rep.slope * mx;
  return rep;
}

LengthActivationReport length_activation_report(const std::vector<records::DataRecord>& records,
                                                const features::FeatureMap& features, records::LengthMetric metric,
                                                records::Scope scope) {
  LengthActivationReport rep;
  rep.metric = metric;
  rep.scope = scope;
  std::vector<double> xs, ys;
  for (const auto& rec : records) {
    const auto it = features.find(rec.id);
    if (it == features.end()) throw selection::MissingFeatures(rec.id);
    LengthCountRow row{rec.id, records::text_length(rec, metric, scope), features::activation_count(it->second)};
    xs.push_back(static_cast<double>(row.length));
    ys.push_back(static_cast<double>(row.count));
    rep.table.push_back(row);
  }
  rep.correlation = pearson(xs, ys);
  return rep;
}

std::vector<std::pair<std::size_t, std::size_t>> coverage_curve(const selection::SelectionReport& report) {
  std::vector<std::pair<std::size_t, std::size_t>> curve;
  curve.reserve(report.rows.size());
  for (const auto& row : report.rows) curve.emplace_back(row.rank, row.union_size);
  return curve;
}

std::vector<SweepPoint> threshold_sweep(const sae::SaeParams& params, const store::ActivationShard& shard,
                                        const std::vector<double>& thetas) {
  std::vector<SweepPoint> out;
  for (double theta : thetas) {
    SweepPoint p;
    p.theta = theta;
    for (const auto& fs : features::extract_features(params, shard, theta)) {
      p.total_features += fs.indices.size();
      if (fs.indices.empty()) ++p.empty_samples;
    }
    if (shard.num_samples() > 0)
      p.mean_features = static_cast<double>(p.total_features) / static_cast<double>(shard.num_samples());
    out.push_back(p);
  }
  return out;
}

void write_length_table_csv(const std::filesystem::path& path, const LengthActivationReport& report) {
  auto out = open_out(path);
  out << "id,length,count\n";
  for (const auto& row : report.table) out << row.id << ',' << row.length << ',' << row.count << '\n';
}

void write_coverage_csv(const std::filesystem::path& path,
                        const std::vector<std::pair<std::size_t, std::size_t>>& curve) {
  auto out = open_out(path);
  out << "rank,union_size\n";
  for (const auto& [rank, size] : curve) out << rank << ',' << size << '\n';
}

void write_sweep_csv(const std::filesystem::path& path, const std::vector<SweepPoint>& sweep) {
  auto out = open_out(path);
  out << std::setprecision(17) << "theta,total_features,mean_features,empty_samples\n";
  for (const auto& p : sweep)
    out << p.theta << ',' << p.total_features << ',' << p.mean_features << ',' << p.empty_samples << '\n';
}

std::string format_summary(const LengthActivationReport& report) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "r: " << report.correlation.r << '\n';
  out << "n_points: " << report.correlation.n_points << '\n';
  out << "slope: " << report.correlation.slope << '\n';
  out << "intercept: " << report.correlation.intercept << '\n';
  out << "length_metric: " << records::to_string(report.metric) << '\n';
  out << "scope: " << records::to_string(report.scope) << '\n';
  return out.str();
}

}  // namespace saekit::metrics
