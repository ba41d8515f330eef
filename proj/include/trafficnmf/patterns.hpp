#pragma once

#include "trafficnmf/ingest.hpp"
#include "trafficnmf/nmf.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace trafficnmf {

struct PatternSet {
  Eigen::MatrixXd temporal;  // hours x r, each nonzero column has unit max
  Eigen::MatrixXd spatial;   // locations x r
  MatrixLabels labels;
  // Original max of each temporal column (0 for an all-zero column).
  std::vector<double> column_norms;
  // Per-hour (max - min) of the count matrix the factors were fitted to after
  // min-max normalization; all ones when the factors were fitted to counts.
  Eigen::VectorXd hour_scales;

  Eigen::Index rank() const { return temporal.cols(); }

  // Temporal curves mapped back to count units (temporal .* hour_scales).
  // Periods normalized with different per-hour ranges are compared here.
  Eigen::MatrixXd count_scale_temporal() const;
};

// Rescales each time-loading column to unit max and moves the scale onto the
// matching location-loading column, so spatial * temporal^T == w * h^T.
PatternSet extract_patterns(const FactorPair& pair, const MatrixLabels& labels);
// Same, recording the per-hour ranges of the normalization.
PatternSet extract_patterns(const FactorPair& pair, const NormalizedMatrix& normalized);

struct MatchedPair {
  int a = 0;
  int b = 0;
  double similarity = 0.0;
};

struct PatternMatch {
  std::vector<MatchedPair> pairs;
  std::vector<int> unmatched_a;
  std::vector<int> unmatched_b;
  double threshold = 0.8;
};

inline constexpr double kDefaultMatchThreshold = 0.80;

// Zero when either vector is all zeros.
double cosine_similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

// Greedy one-to-one matching of count-scale temporal curves by descending cosine
// similarity; ties go to the lowest (a, b) index pair. Pairs below the
// threshold are never formed.
PatternMatch match_patterns(const PatternSet& a, const PatternSet& b, double threshold = kDefaultMatchThreshold);

// Hour label of the largest entry of a count-scale temporal curve (lowest
// hour on ties).
int peak_hour(const PatternSet& set, int pattern);

// Number of locations whose largest spatial loading is each pattern.
std::vector<std::size_t> dominant_pattern_counts(const PatternSet& set);

struct PairNote {
  int a = 0;
  int b = 0;
  double similarity = 0.0;
  int peak_hour_a = 0;
  int peak_hour_b = 0;
  int peak_shift = 0;  // peak_hour_b - peak_hour_a
};

struct ComparisonReport {
  PatternMatch match;
  std::string period_a;
  std::string period_b;
  int rank_a = 0;
  int rank_b = 0;
  Eigen::Index locations_a = 0;
  Eigen::Index locations_b = 0;
  double total_a = 0.0;
  double total_b = 0.0;
  // 100 * (total_a - total_b) / total_a, from raw counts.
  double total_reduction_pct = 0.0;
  std::vector<PairNote> per_pattern_notes;
  std::vector<std::size_t> dominant_counts_a;
  std::vector<std::size_t> dominant_counts_b;
};

ComparisonReport compare_periods(const CountMatrix& raw_a, const CountMatrix& raw_b, const PatternMatch& match,
                                 const PatternSet& set_a, const PatternSet& set_b);

}  // namespace trafficnmf
