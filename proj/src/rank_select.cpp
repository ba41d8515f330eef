#include "trafficnmf/rank_select.hpp"

#include "trafficnmf/error.hpp"
#include "trafficnmf/table.hpp"

#include <cmath>
#include <future>
#include <limits>
#include <ostream>

namespace trafficnmf {

namespace {

constexpr double kScoreTieTolerance = 1e-9;

void check_cover(const Eigen::MatrixXd& points, const ClusterAssignment& assignment) {
  if (static_cast<Eigen::Index>(assignment.labels.size()) != points.rows()) {
    throw Error(ErrorKind::ShapeMismatch, "assignment has " + std::to_string(assignment.labels.size()) +
                                              " labels for " + std::to_string(points.rows()) + " points");
  }
  for (int label : assignment.labels) {
    if (label < 0 || label >= assignment.k) {
      throw Error(ErrorKind::ShapeMismatch, "cluster label " + std::to_string(label) + " outside 0.." +
                                                std::to_string(assignment.k - 1));
    }
  }
}

struct Centroids {
  Eigen::MatrixXd means;  // k x d
  std::vector<Eigen::Index> sizes;
};

Centroids centroids(const Eigen::MatrixXd& points, const ClusterAssignment& assignment) {
  Centroids c;
  c.means = Eigen::MatrixXd::Zero(assignment.k, points.cols());
  c.sizes.assign(static_cast<std::size_t>(assignment.k), 0);
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    const int g = assignment.labels[static_cast<std::size_t>(i)];
    c.means.row(g) += points.row(i);
    ++c.sizes[static_cast<std::size_t>(g)];
  }
  for (int g = 0; g < assignment.k; ++g) {
    if (c.sizes[static_cast<std::size_t>(g)] > 0) {
      c.means.row(g) /= static_cast<double>(c.sizes[static_cast<std::size_t>(g)]);
    }
  }
  return c;
}

std::pair<int, int> parse_int_range(const std::string& text, const char* what) {
  std::string lo = text;
  std::string hi = text;
  if (auto pos = text.find(".."); pos != std::string::npos) {
    lo = text.substr(0, pos);
    hi = text.substr(pos + 2);
  } else if (auto dash = text.find('-'); dash != std::string::npos && dash > 0) {
    lo = text.substr(0, dash);
    hi = text.substr(dash + 1);
  }
  long long a = 0;
  long long b = 0;
  if (!table::parse_int(lo, a) || !table::parse_int(hi, b) || a > b) {
    throw Error(ErrorKind::InvalidConfig, std::string(what) + " '" + text + "' must look like 2..8");
  }
  return {static_cast<int>(a), static_cast<int>(b)};
}

}  // namespace

std::string to_string(ScanTarget target) {
  switch (target) {
    case ScanTarget::LocationFactor: return "location-factor";
    case ScanTarget::TimeFactor: return "time-factor";
    case ScanTarget::RawRows: return "raw-rows";
  }
  return "location-factor";
}

ScanTarget parse_scan_target(const std::string& text) {
  if (text == "location-factor" || text == "location") return ScanTarget::LocationFactor;
  if (text == "time-factor" || text == "time") return ScanTarget::TimeFactor;
  if (text == "raw-rows" || text == "raw") return ScanTarget::RawRows;
  throw Error(ErrorKind::InvalidConfig, "unknown scan target '" + text + "'");
}

int ClusterAssignment::occupied() const {
  std::vector<bool> seen(static_cast<std::size_t>(k), false);
  int n = 0;
  for (int label : labels) {
    if (!seen[static_cast<std::size_t>(label)]) {
      seen[static_cast<std::size_t>(label)] = true;
      ++n;
    }
  }
  return n;
}

ClusterAssignment assign_clusters(const Eigen::MatrixXd& factor, FactorSource source) {
  ClusterAssignment a;
  a.k = static_cast<int>(factor.cols());
  a.source = source;
  a.labels.resize(static_cast<std::size_t>(factor.rows()));
  for (Eigen::Index i = 0; i < factor.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index j = 1; j < factor.cols(); ++j) {
      if (factor(i, j) > factor(i, best)) best = j;
    }
    a.labels[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return a;
}

double within_dispersion(const Eigen::MatrixXd& points, const ClusterAssignment& assignment) {
  check_cover(points, assignment);
  const auto c = centroids(points, assignment);
  double w = 0.0;
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    w += (points.row(i) - c.means.row(assignment.labels[static_cast<std::size_t>(i)])).squaredNorm();
  }
  return w;
}

double between_dispersion(const Eigen::MatrixXd& points, const ClusterAssignment& assignment) {
  check_cover(points, assignment);
  if (points.rows() == 0) return 0.0;
  const auto c = centroids(points, assignment);
  const Eigen::RowVectorXd global = points.colwise().mean();
  double b = 0.0;
  for (int g = 0; g < assignment.k; ++g) {
    const auto n = c.sizes[static_cast<std::size_t>(g)];
    if (n == 0) continue;
    b += static_cast<double>(n) * (c.means.row(g) - global).squaredNorm();
  }
  return b;
}

double total_scatter(const Eigen::MatrixXd& points) {
  if (points.rows() == 0) return 0.0;
  const Eigen::RowVectorXd global = points.colwise().mean();
  return (points.rowwise() - global).squaredNorm();
}

double calinski_harabasz(const Eigen::MatrixXd& points, const ClusterAssignment& assignment) {
  check_cover(points, assignment);
  const int k = assignment.occupied();
  const auto n = points.rows();
  if (k < 2 || n <= k) {
    throw Error(ErrorKind::DegenerateClustering, "Calinski-Harabasz needs k >= 2 and n > k (k=" + std::to_string(k) +
                                                     ", n=" + std::to_string(n) + ")");
  }
  const double w = within_dispersion(points, assignment);
  const double b = between_dispersion(points, assignment);
  if (w == 0.0) return std::numeric_limits<double>::infinity();
  return (b / static_cast<double>(k - 1)) / (w / static_cast<double>(n - k));
}

RankRange RankRange::parse(const std::string& text) {
  auto [a, b] = parse_int_range(text, "rank range");
  if (a < 1) throw Error(ErrorKind::InvalidConfig, "rank range must start at 1 or above");
  return RankRange{a, b};
}

std::uint64_t scan_seed(std::uint64_t base_seed, int rank) {
  return base_seed + 0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(rank);
}

namespace {

std::optional<RankScanEntry> scan_one(const Eigen::MatrixXd& x, int rank, const NmfConfig& cfg_template,
                                      ScanTarget target) {
  NmfConfig cfg = cfg_template;
  cfg.rank = rank;
  cfg.seed = scan_seed(cfg_template.seed, rank);
  FactorPair pair;
  try {
    pair = factorize(x, cfg);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::InvalidRank || e.kind() == ErrorKind::NumericalFailure) return std::nullopt;
    throw;
  }

  const Eigen::MatrixXd* points = nullptr;
  ClusterAssignment assignment;
  switch (target) {
    case ScanTarget::LocationFactor:
      assignment = assign_clusters(pair.w, FactorSource::Location);
      points = &pair.w;
      break;
    case ScanTarget::TimeFactor:
      assignment = assign_clusters(pair.h, FactorSource::Time);
      points = &pair.h;
      break;
    case ScanTarget::RawRows:
      assignment = assign_clusters(pair.w, FactorSource::Location);
      points = &x;
      break;
  }

  RankScanEntry e;
  e.rank = rank;
  e.within_dispersion = within_dispersion(*points, assignment);
  e.between_dispersion = between_dispersion(*points, assignment);
  e.final_loss = pair.final_loss();
  e.occupied_clusters = assignment.occupied();
  try {
    e.ch_score = calinski_harabasz(*points, assignment);
  } catch (const Error& err) {
    if (err.kind() != ErrorKind::DegenerateClustering) throw;
  }
  return e;
}

}  // namespace

RankScanResult rank_scan(const Eigen::MatrixXd& x, const RankRange& ranks, const NmfConfig& cfg_template,
                         ScanTarget target, bool parallel) {
  if (ranks.first < 1 || ranks.first > ranks.last) {
    throw Error(ErrorKind::InvalidConfig, "empty rank range");
  }
  std::vector<std::optional<RankScanEntry>> slots(static_cast<std::size_t>(ranks.last - ranks.first + 1));
  if (parallel) {
    std::vector<std::future<std::optional<RankScanEntry>>> jobs;
    for (int r = ranks.first; r <= ranks.last; ++r) {
      jobs.push_back(std::async(std::launch::async, [&x, r, &cfg_template, target] {
        return scan_one(x, r, cfg_template, target);
      }));
    }
    for (std::size_t i = 0; i < jobs.size(); ++i) slots[i] = jobs[i].get();
  } else {
    for (int r = ranks.first; r <= ranks.last; ++r) {
      slots[static_cast<std::size_t>(r - ranks.first)] = scan_one(x, r, cfg_template, target);
    }
  }

  RankScanResult result;
  result.target = target;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (slots[i]) {
      result.entries.push_back(*slots[i]);
    } else {
      result.failed_ranks.push_back(ranks.first + static_cast<int>(i));
    }
  }
  if (result.entries.empty()) {
    throw Error(ErrorKind::InvalidRank, "no rank in " + std::to_string(ranks.first) + ".." +
                                            std::to_string(ranks.last) + " could be factorized");
  }

  const RankScanEntry* best = nullptr;
  for (const auto& e : result.entries) {
    if (!e.ch_score || !std::isfinite(*e.ch_score)) continue;
    // Ranks that reproduce the same partition score equal up to summation
    // order; the lowest such rank wins.
    if (!best || *e.ch_score > *best->ch_score * (1.0 + kScoreTieTolerance)) best = &e;
  }
  result.recommended_rank = best ? best->rank : result.entries.front().rank;
  return result;
}

RankScanResult rank_scan(const NormalizedMatrix& x, const RankRange& ranks, const NmfConfig& cfg_template,
                         ScanTarget target, bool parallel) {
  return rank_scan(x.values, ranks, cfg_template, target, parallel);
}

void write_rank_scan(std::ostream& out, const RankScanResult& result) {
  table::write_row(out, {"rank", "within_dispersion", "between_dispersion", "ch_score", "final_loss",
                         "occupied_clusters"});
  for (const auto& e : result.entries) {
    table::write_row(out, {std::to_string(e.rank), table::format_number(e.within_dispersion),
                           table::format_number(e.between_dispersion),
                           e.ch_score ? table::format_number(*e.ch_score) : std::string("nan"),
                           table::format_number(e.final_loss), std::to_string(e.occupied_clusters)});
  }
}

}  // namespace trafficnmf
