#include "trafficnmf/synth.hpp"

#include "trafficnmf/error.hpp"
#include "trafficnmf/table.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <random>

namespace trafficnmf {

namespace {

// Hand-rolled draws on top of mt19937_64 so generated files do not depend on
// the standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  int integer(int lo, int hi) {
    return lo + static_cast<int>(engine_() % static_cast<std::uint64_t>(hi - lo + 1));
  }

  double normal() {
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[static_cast<std::size_t>(engine_() % i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

constexpr double kPatternMass = 200.0;
constexpr double kBaseline = 0.03;

Eigen::MatrixXd make_time_patterns(const SyntheticSpec& spec, Rng& rng) {
  const int m = spec.n_hours;
  const int r = spec.planted_rank;
  Eigen::MatrixXd h(m, r);
  for (int k = 0; k < r; ++k) {
    const double peak = (k + 0.5) * m / r - 0.5;
    const double width = 0.8 + 0.4 * rng.uniform();
    Eigen::VectorXd bump(m);
    for (int t = 0; t < m; ++t) {
      const double d = (t - peak) / width;
      bump(t) = std::exp(-0.5 * d * d) + kBaseline;
    }
    bump *= kPatternMass / bump.sum();
    for (int t = 0; t < m; ++t) h(t, k) = std::round(bump(t));
  }
  return h;
}

Eigen::MatrixXd make_location_loadings(const SyntheticSpec& spec, Rng& rng) {
  const int n = spec.n_locations;
  const int r = spec.planted_rank;
  std::vector<int> dominant(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) dominant[static_cast<std::size_t>(i)] = i % r;
  rng.shuffle(dominant);
  Eigen::MatrixXd w(n, r);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < r; ++k) w(i, k) = rng.integer(0, 2);
    w(i, dominant[static_cast<std::size_t>(i)]) = rng.integer(20, 60);
  }
  return w;
}

// Adds noise of the requested relative Frobenius size, rounds to counts and
// clamps at zero.
Eigen::MatrixXd noisy_counts(const Eigen::MatrixXd& product, double noise_level, Rng& rng) {
  if (noise_level <= 0.0) return product.array().round().matrix();
  Eigen::MatrixXd e(product.rows(), product.cols());
  for (Eigen::Index j = 0; j < e.cols(); ++j)
    for (Eigen::Index i = 0; i < e.rows(); ++i) e(i, j) = rng.normal();
  e *= noise_level * product.norm() / e.norm();
  return (product + e).array().round().max(0.0).matrix();
}

void emit_records(PlantedData& data, const SyntheticSpec& spec, const std::string& period, Rng& rng) {
  data.records.clear();
  const int parts = std::max(1, spec.records_per_cell);
  for (Eigen::Index i = 0; i < data.counts.rows(); ++i) {
    const auto& loc = data.labels.rows[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < data.counts.cols(); ++j) {
      const auto total = static_cast<std::int64_t>(data.counts(i, j));
      std::vector<std::int64_t> cuts = {0, total};
      for (int p = 1; p < parts; ++p) {
        cuts.push_back(static_cast<std::int64_t>(std::floor(rng.uniform() * static_cast<double>(total + 1))));
      }
      std::sort(cuts.begin(), cuts.end());
      for (std::size_t p = 1; p < cuts.size(); ++p) {
        data.records.push_back({loc.id, loc.latitude, loc.longitude,
                                data.labels.hours[static_cast<std::size_t>(j)], cuts[p] - cuts[p - 1], period});
      }
    }
  }
}

void finish(PlantedData& data, double noise_level, const SyntheticSpec& spec, const std::string& period, Rng& rng) {
  data.counts = noisy_counts(data.product, noise_level, rng);
  const double base = data.product.norm();
  data.measured_noise = base > 0.0 ? (data.counts - data.product).norm() / base : 0.0;
  data.labels.period_label = period;
  emit_records(data, spec, period, rng);
}

}  // namespace

void SyntheticSpec::validate() const {
  if (n_locations < 1 || n_hours < 1) throw Error(ErrorKind::InvalidConfig, "synthetic shape must be positive");
  if (planted_rank < 1 || planted_rank > std::min(n_locations, n_hours)) {
    throw Error(ErrorKind::InvalidConfig, "planted rank must lie in 1..min(n_locations, n_hours)");
  }
  if (!(noise_level >= 0.0)) throw Error(ErrorKind::InvalidConfig, "noise level must be >= 0");
  if (first_hour < 0 || first_hour + n_hours - 1 > 23) {
    throw Error(ErrorKind::InvalidConfig, "synthetic hour bins must stay within 0..23");
  }
  if (records_per_cell < 1) throw Error(ErrorKind::InvalidConfig, "records_per_cell must be >= 1");
}

PlantedData generate_planted(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  PlantedData data;
  data.h0 = make_time_patterns(spec, rng);
  data.w0 = make_location_loadings(spec, rng);
  data.product = data.w0 * data.h0.transpose();

  for (int i = 0; i < spec.n_locations; ++i) {
    data.labels.rows.push_back({std::to_string(1000 + i), 50.0 + 8.5 * rng.uniform(), -5.5 + 7.0 * rng.uniform()});
  }
  for (int t = 0; t < spec.n_hours; ++t) data.labels.hours.push_back(spec.first_hour + t);
  finish(data, spec.noise_level, spec, spec.period_label, rng);
  return data;
}

PlantedData derive_dropped_period(const PlantedData& a, const SyntheticSpec& spec, const DropScenario& scenario) {
  const auto r = static_cast<int>(a.w0.cols());
  if (scenario.drop < 0 || scenario.drop >= r) {
    throw Error(ErrorKind::InvalidConfig, "drop must leave at least one planted pattern");
  }
  if (!(scenario.scale > 0.0)) throw Error(ErrorKind::InvalidConfig, "period scale must be > 0");
  const int kept = r - scenario.drop;

  Rng rng(spec.seed ^ 0xB5AD4ECEDA1CE2A9ULL);
  PlantedData b;
  b.h0 = a.h0.leftCols(kept);
  b.w0 = a.w0.leftCols(kept);
  for (Eigen::Index i = 0; i < a.w0.rows(); ++i) {
    Eigen::Index dom = 0;
    a.w0.row(i).maxCoeff(&dom);
    if (dom >= kept) b.w0(i, i % kept) += a.w0(i, dom);
  }
  b.product = scenario.scale * (b.w0 * b.h0.transpose());
  b.labels = a.labels;
  finish(b, spec.noise_level, spec, scenario.period_label, rng);
  return b;
}

void write_records(std::ostream& out, const std::vector<TrafficRecord>& records) {
  table::write_row(out, {"count_point_id", "year", "latitude", "longitude", "hour", "all_motor_vehicles"});
  for (const auto& r : records) {
    table::write_row(out, {r.location_id, r.period_label, table::format_number(r.latitude),
                           table::format_number(r.longitude), std::to_string(r.hour), std::to_string(r.count)});
  }
}

void write_planted_factor(std::ostream& out, const Eigen::MatrixXd& factor, const std::vector<std::string>& labels,
                          const char* label_header) {
  std::vector<std::string> header = {label_header};
  for (Eigen::Index k = 0; k < factor.cols(); ++k) header.push_back("pattern_" + std::to_string(k + 1));
  table::write_row(out, header);
  for (Eigen::Index i = 0; i < factor.rows(); ++i) {
    std::vector<std::string> row = {labels[static_cast<std::size_t>(i)]};
    for (Eigen::Index k = 0; k < factor.cols(); ++k) row.push_back(table::format_number(factor(i, k)));
    table::write_row(out, row);
  }
}

}  // namespace trafficnmf
