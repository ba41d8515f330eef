#pragma once

#include "trafficnmf/ingest.hpp"
#include "trafficnmf/nmf.hpp"

#include <Eigen/Dense>

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace trafficnmf {

enum class FactorSource { Location, Time };

// Which rows the dispersion measures are computed on during a rank scan.
enum class ScanTarget {
  LocationFactor,  // rows of w, clustered by their own argmax
  TimeFactor,      // rows of h, clustered by their own argmax
  RawRows,         // rows of the normalized matrix, clustered by the argmax of w
};

std::string to_string(ScanTarget target);
ScanTarget parse_scan_target(const std::string& text);

struct ClusterAssignment {
  std::vector<int> labels;
  int k = 0;
  FactorSource source = FactorSource::Location;

  // Number of clusters that own at least one row.
  int occupied() const;
};

// Each row goes to the column of its largest loading; ties go to the lowest index.
ClusterAssignment assign_clusters(const Eigen::MatrixXd& factor, FactorSource source = FactorSource::Location);

// Trace of the summed within-cluster scatter matrices.
double within_dispersion(const Eigen::MatrixXd& points, const ClusterAssignment& assignment);

// Trace of the size-weighted between-cluster scatter matrix.
double between_dispersion(const Eigen::MatrixXd& points, const ClusterAssignment& assignment);

// Sum of squared distances to the global centroid.
double total_scatter(const Eigen::MatrixXd& points);

// (B/(k-1)) / (W/(n-k)) with k counting occupied clusters only. Returns
// +infinity when W is zero.
double calinski_harabasz(const Eigen::MatrixXd& points, const ClusterAssignment& assignment);

struct RankScanEntry {
  int rank = 0;
  double within_dispersion = 0.0;
  double between_dispersion = 0.0;
  // Empty when the clustering is degenerate (fewer than two occupied clusters).
  std::optional<double> ch_score;
  double final_loss = 0.0;
  int occupied_clusters = 0;
};

struct RankScanResult {
  std::vector<RankScanEntry> entries;
  // Ranks whose factorization failed; they have no entry.
  std::vector<int> failed_ranks;
  int recommended_rank = 0;
  ScanTarget target = ScanTarget::RawRows;
};

struct RankRange {
  int first = 2;
  int last = 8;

  // Accepts "2..8", "2-8" or a single "4".
  static RankRange parse(const std::string& text);
};

// Seed used for one rank of a scan, derived from the template seed.
std::uint64_t scan_seed(std::uint64_t base_seed, int rank);

// Factorizes at each rank, clusters the chosen rows, and recommends the rank
// with the largest finite Calinski-Harabasz score (first scanned rank when no
// score is finite). With parallel set, ranks run on separate threads; the
// result is identical to the serial scan.
RankScanResult rank_scan(const NormalizedMatrix& x, const RankRange& ranks, const NmfConfig& cfg_template,
                         ScanTarget target = ScanTarget::RawRows, bool parallel = false);
RankScanResult rank_scan(const Eigen::MatrixXd& x, const RankRange& ranks, const NmfConfig& cfg_template,
                         ScanTarget target = ScanTarget::RawRows, bool parallel = false);

// rank,within_dispersion,between_dispersion,ch_score,final_loss,occupied_clusters
void write_rank_scan(std::ostream& out, const RankScanResult& result);

}  // namespace trafficnmf
