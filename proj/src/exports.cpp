#include "trafficnmf/exports.hpp"

#include "trafficnmf/table.hpp"

#include <json.hpp>

#include <iomanip>
#include <ostream>

namespace trafficnmf {

namespace {

using nlohmann::ordered_json;

std::vector<std::string> pattern_header(const char* first, Eigen::Index r) {
  std::vector<std::string> header = {first};
  for (Eigen::Index k = 0; k < r; ++k) header.push_back("pattern_" + std::to_string(k + 1));
  return header;
}

void write_labeled_rows(std::ostream& out, const Eigen::MatrixXd& m, const std::vector<std::string>& labels,
                        const char* first) {
  table::write_row(out, pattern_header(first, m.cols()));
  std::vector<std::string> row;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    row.assign(1, labels[static_cast<std::size_t>(i)]);
    for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(table::format_number(m(i, k)));
    table::write_row(out, row);
  }
}

std::vector<std::string> hour_strings(const MatrixLabels& labels) {
  std::vector<std::string> out;
  for (int h : labels.hours) out.push_back(std::to_string(h));
  return out;
}

std::vector<std::string> location_strings(const MatrixLabels& labels) {
  std::vector<std::string> out;
  for (const auto& r : labels.rows) out.push_back(r.id);
  return out;
}

// JSON cannot carry inf/nan; emit null instead.
ordered_json number_or_null(double v) {
  if (!std::isfinite(v)) return nullptr;
  return v;
}

ordered_json index_list_1based(const std::vector<int>& idx) {
  auto arr = ordered_json::array();
  for (int i : idx) arr.push_back(i + 1);
  return arr;
}

}  // namespace

void write_location_factors(std::ostream& out, const FactorPair& pair, const MatrixLabels& labels) {
  write_labeled_rows(out, pair.w, location_strings(labels), "location_id");
}

void write_time_factors(std::ostream& out, const FactorPair& pair, const MatrixLabels& labels) {
  write_labeled_rows(out, pair.h, hour_strings(labels), "hour");
}

void write_diagnostics(std::ostream& out, const FactorPair& pair, const NmfConfig& cfg) {
  ordered_json j;
  j["rank"] = cfg.rank;
  j["iterations_run"] = pair.iterations_run;
  j["converged"] = pair.converged;
  j["final_loss"] = number_or_null(pair.final_loss());
  auto trace = ordered_json::array();
  for (double v : pair.objective_trace) trace.push_back(number_or_null(v));
  j["objective_trace"] = std::move(trace);
  j["config"] = {{"rank", cfg.rank},
                 {"max_iters", cfg.max_iters},
                 {"restarts", cfg.restarts},
                 {"tol", cfg.tol},
                 {"seed", cfg.seed},
                 {"init", to_string(cfg.init)}};
  out << j.dump(2) << '\n';
}

void write_temporal_patterns(std::ostream& out, const PatternSet& set) {
  write_labeled_rows(out, set.temporal, hour_strings(set.labels), "hour");
}

void write_spatial_geojson(std::ostream& out, const PatternSet& set) {
  ordered_json fc;
  fc["type"] = "FeatureCollection";
  fc["properties"] = {{"period", set.labels.period_label}, {"patterns", set.rank()}};
  auto features = ordered_json::array();
  for (Eigen::Index i = 0; i < set.spatial.rows(); ++i) {
    const auto& loc = set.labels.rows[static_cast<std::size_t>(i)];
    ordered_json props;
    props["location_id"] = loc.id;
    Eigen::Index best = 0;
    for (Eigen::Index k = 0; k < set.spatial.cols(); ++k) {
      props["pattern_" + std::to_string(k + 1)] = set.spatial(i, k);
      if (set.spatial(i, k) > set.spatial(i, best)) best = k;
    }
    props["dominant_pattern"] = set.rank() > 0 ? best + 1 : 0;
    ordered_json feature;
    feature["type"] = "Feature";
    feature["geometry"] = {{"type", "Point"}, {"coordinates", {loc.longitude, loc.latitude}}};
    feature["properties"] = std::move(props);
    features.push_back(std::move(feature));
  }
  fc["features"] = std::move(features);
  out << fc.dump() << '\n';
}

void write_report_json(std::ostream& out, const ComparisonReport& report) {
  ordered_json j;
  j["period_a"] = report.period_a;
  j["period_b"] = report.period_b;
  j["rank_a"] = report.rank_a;
  j["rank_b"] = report.rank_b;
  j["locations_a"] = report.locations_a;
  j["locations_b"] = report.locations_b;
  j["total_a"] = report.total_a;
  j["total_b"] = report.total_b;
  j["total_reduction_pct"] = number_or_null(report.total_reduction_pct);
  j["threshold"] = report.match.threshold;
  auto pairs = ordered_json::array();
  for (const auto& n : report.per_pattern_notes) {
    pairs.push_back({{"pattern_a", n.a + 1},
                     {"pattern_b", n.b + 1},
                     {"similarity", n.similarity},
                     {"peak_hour_a", n.peak_hour_a},
                     {"peak_hour_b", n.peak_hour_b},
                     {"peak_shift", n.peak_shift}});
  }
  j["pairs"] = std::move(pairs);
  j["unmatched_a"] = index_list_1based(report.match.unmatched_a);
  j["unmatched_b"] = index_list_1based(report.match.unmatched_b);
  j["dominant_counts_a"] = report.dominant_counts_a;
  j["dominant_counts_b"] = report.dominant_counts_b;
  out << j.dump(2) << '\n';
}

void write_report_text(std::ostream& out, const ComparisonReport& report) {
  out << "Period comparison: " << report.period_a << " -> " << report.period_b << '\n';
  out << "  " << report.period_a << ": " << report.locations_a << " locations, rank " << report.rank_a << '\n';
  out << "  " << report.period_b << ": " << report.locations_b << " locations, rank " << report.rank_b << '\n';
  out << std::fixed << std::setprecision(2);
  out << "Total count: " << table::format_number(report.total_a) << " -> " << table::format_number(report.total_b)
      << " (" << report.total_reduction_pct << "% reduction)\n";
  out << "Matched patterns (cosine >= " << report.match.threshold << "): " << report.match.pairs.size() << '\n';
  for (const auto& n : report.per_pattern_notes) {
    out << "  p" << n.a + 1 << " <-> p" << n.b + 1 << "  similarity " << std::setprecision(4) << n.similarity
        << "  peak " << n.peak_hour_a << ":00 -> " << n.peak_hour_b << ":00 (shift " << std::showpos << n.peak_shift
        << std::noshowpos << "h)\n";
  }
  out << "Unmatched " << report.period_a << " patterns (disappeared): " << report.match.unmatched_a.size();
  for (int i : report.match.unmatched_a) out << " p" << i + 1;
  out << '\n';
  out << "Unmatched " << report.period_b << " patterns (new): " << report.match.unmatched_b.size();
  for (int i : report.match.unmatched_b) out << " p" << i + 1;
  out << '\n';
  out << "Dominant-pattern location counts " << report.period_a << ":";
  for (auto c : report.dominant_counts_a) out << ' ' << c;
  out << '\n' << "Dominant-pattern location counts " << report.period_b << ":";
  for (auto c : report.dominant_counts_b) out << ' ' << c;
  out << '\n';
}

}  // namespace trafficnmf
