#include "trafficnmf/patterns.hpp"

#include "trafficnmf/error.hpp"

#include <algorithm>
#include <tuple>

namespace trafficnmf {

PatternSet extract_patterns(const FactorPair& pair, const MatrixLabels& labels) {
  if (pair.h.rows() != static_cast<Eigen::Index>(labels.hours.size()) ||
      pair.w.rows() != static_cast<Eigen::Index>(labels.rows.size()) || pair.w.cols() != pair.h.cols()) {
    throw Error(ErrorKind::ShapeMismatch, "factor pair does not match matrix labels");
  }
  PatternSet set;
  set.labels = labels;
  set.temporal = pair.h;
  set.spatial = pair.w;
  set.hour_scales = Eigen::VectorXd::Ones(pair.h.rows());
  set.column_norms.resize(static_cast<std::size_t>(pair.h.cols()));
  for (Eigen::Index k = 0; k < pair.h.cols(); ++k) {
    const double scale = pair.h.col(k).maxCoeff();
    set.column_norms[static_cast<std::size_t>(k)] = scale;
    if (scale > 0.0) {
      set.temporal.col(k) /= scale;
      set.spatial.col(k) *= scale;
    }
  }
  return set;
}

PatternSet extract_patterns(const FactorPair& pair, const NormalizedMatrix& normalized) {
  PatternSet set = extract_patterns(pair, normalized.labels);
  for (std::size_t j = 0; j < normalized.scaling_params.size(); ++j) {
    const auto& s = normalized.scaling_params[j];
    set.hour_scales(static_cast<Eigen::Index>(j)) = s.max - s.min;
  }
  return set;
}

Eigen::MatrixXd PatternSet::count_scale_temporal() const {
  if (hour_scales.size() != temporal.rows()) return temporal;
  return hour_scales.asDiagonal() * temporal;
}

double cosine_similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
}

PatternMatch match_patterns(const PatternSet& a, const PatternSet& b, double threshold) {
  if (a.labels.hours != b.labels.hours) {
    throw Error(ErrorKind::HourBinMismatch, "pattern sets cover different hour bins");
  }
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw Error(ErrorKind::InvalidConfig, "match threshold must lie in [0, 1]");
  }
  const Eigen::MatrixXd ta = a.count_scale_temporal();
  const Eigen::MatrixXd tb = b.count_scale_temporal();
  std::vector<MatchedPair> candidates;
  for (int i = 0; i < a.rank(); ++i) {
    for (int j = 0; j < b.rank(); ++j) {
      candidates.push_back({i, j, cosine_similarity(ta.col(i), tb.col(j))});
    }
  }
  std::sort(candidates.begin(), candidates.end(), [](const MatchedPair& x, const MatchedPair& y) {
    return std::tuple(-x.similarity, x.a, x.b) < std::tuple(-y.similarity, y.a, y.b);
  });

  PatternMatch match;
  match.threshold = threshold;
  std::vector<bool> used_a(static_cast<std::size_t>(a.rank()), false);
  std::vector<bool> used_b(static_cast<std::size_t>(b.rank()), false);
  for (const auto& c : candidates) {
    if (c.similarity < threshold) break;
    if (used_a[static_cast<std::size_t>(c.a)] || used_b[static_cast<std::size_t>(c.b)]) continue;
    used_a[static_cast<std::size_t>(c.a)] = true;
    used_b[static_cast<std::size_t>(c.b)] = true;
    match.pairs.push_back(c);
  }
  for (int i = 0; i < a.rank(); ++i) {
    if (!used_a[static_cast<std::size_t>(i)]) match.unmatched_a.push_back(i);
  }
  for (int j = 0; j < b.rank(); ++j) {
    if (!used_b[static_cast<std::size_t>(j)]) match.unmatched_b.push_back(j);
  }
  return match;
}

int peak_hour(const PatternSet& set, int pattern) {
  Eigen::Index best = 0;
  const Eigen::VectorXd col = set.count_scale_temporal().col(pattern);
  for (Eigen::Index i = 1; i < col.size(); ++i) {
    if (col(i) > col(best)) best = i;
  }
  return set.labels.hours[static_cast<std::size_t>(best)];
}

std::vector<std::size_t> dominant_pattern_counts(const PatternSet& set) {
  std::vector<std::size_t> counts(static_cast<std::size_t>(set.rank()), 0);
  if (set.rank() == 0) return counts;
  for (Eigen::Index i = 0; i < set.spatial.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index k = 1; k < set.spatial.cols(); ++k) {
      if (set.spatial(i, k) > set.spatial(i, best)) best = k;
    }
    ++counts[static_cast<std::size_t>(best)];
  }
  return counts;
}

ComparisonReport compare_periods(const CountMatrix& raw_a, const CountMatrix& raw_b, const PatternMatch& match,
                                 const PatternSet& set_a, const PatternSet& set_b) {
  if (raw_a.rows() != set_a.spatial.rows() || raw_b.rows() != set_b.spatial.rows()) {
    throw Error(ErrorKind::ShapeMismatch, "raw matrices are not the sources of the pattern sets");
  }
  ComparisonReport report;
  report.match = match;
  report.period_a = raw_a.labels.period_label;
  report.period_b = raw_b.labels.period_label;
  report.rank_a = static_cast<int>(set_a.rank());
  report.rank_b = static_cast<int>(set_b.rank());
  report.locations_a = raw_a.rows();
  report.locations_b = raw_b.rows();
  report.total_a = raw_a.total();
  report.total_b = raw_b.total();
  if (report.total_a == 0.0) {
    throw Error(ErrorKind::ZeroTotal, "first period has zero total count");
  }
  report.total_reduction_pct = 100.0 * (report.total_a - report.total_b) / report.total_a;
  for (const auto& p : match.pairs) {
    PairNote note;
    note.a = p.a;
    note.b = p.b;
    note.similarity = p.similarity;
    note.peak_hour_a = peak_hour(set_a, p.a);
    note.peak_hour_b = peak_hour(set_b, p.b);
    note.peak_shift = note.peak_hour_b - note.peak_hour_a;
    report.per_pattern_notes.push_back(note);
  }
  report.dominant_counts_a = dominant_pattern_counts(set_a);
  report.dominant_counts_b = dominant_pattern_counts(set_b);
  return report;
}

}  // namespace trafficnmf
