#include "oracles.hpp"

#include "trafficnmf/error.hpp"
#include "trafficnmf/exports.hpp"
#include "trafficnmf/patterns.hpp"

#include <doctest.h>
#include <json.hpp>

#include <algorithm>
#include <numeric>
#include <random>
#include <sstream>

using namespace trafficnmf;

namespace {

MatrixLabels make_labels(int n, int m) {
  MatrixLabels l;
  for (int i = 0; i < n; ++i) l.rows.push_back({std::to_string(100 + i), 51.0 + 0.01 * i, -1.0 - 0.01 * i});
  for (int j = 0; j < m; ++j) l.hours.push_back(7 + j);
  l.period_label = "P";
  return l;
}

// Distinct bump-shaped time patterns: pattern k peaks at hour k*2.
FactorPair bump_pair(int n, int r, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.1, 1.0);
  FactorPair p;
  p.w.resize(n, r);
  p.h.resize(12, r);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < r; ++k) p.w(i, k) = u(rng);
  for (int k = 0; k < r; ++k)
    for (int t = 0; t < 12; ++t) {
      const double d = t - 2.0 * k;
      p.h(t, k) = (0.5 + k) * std::exp(-0.5 * d * d);
    }
  return p;
}

PatternSet set_from(const FactorPair& p) { return extract_patterns(p, make_labels(static_cast<int>(p.w.rows()), 12)); }

ErrorKind kind_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an Error");
  return ErrorKind::InvalidConfig;
}

CountMatrix raw_with_total(double total, int n) {
  CountMatrix m;
  m.labels = make_labels(n, 12);
  m.values = Eigen::MatrixXd::Zero(n, 12);
  m.values(0, 0) = total;
  return m;
}

}  // namespace

TEST_CASE("temporal columns are rescaled to unit max with the scale recorded") {
  FactorPair p;
  p.h.resize(3, 1);
  p.h << 2, 4, 8;
  p.w.resize(2, 1);
  p.w << 1, 3;
  MatrixLabels l = make_labels(2, 3);
  const auto set = extract_patterns(p, l);
  CHECK(set.temporal(0, 0) == 0.25);
  CHECK(set.temporal(1, 0) == 0.5);
  CHECK(set.temporal(2, 0) == 1.0);
  CHECK(set.column_norms == std::vector<double>{8.0});
  CHECK(set.spatial(1, 0) == 24.0);
}

TEST_CASE("extraction preserves the factor product") {
  for (std::uint64_t s = 0; s < 10; ++s) {
    auto p = bump_pair(30, 1 + static_cast<int>(s % 6), s);
    if (s == 3) p.h.col(0).setZero();
    const auto set = set_from(p);
    const Eigen::MatrixXd before = p.w * p.h.transpose();
    const Eigen::MatrixXd after = set.spatial * set.temporal.transpose();
    CHECK((before - after).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, before.cwiseAbs().maxCoeff()));
    CHECK(set.temporal.minCoeff() >= 0.0);
    CHECK(set.spatial.minCoeff() >= 0.0);
    for (Eigen::Index k = 0; k < set.rank(); ++k) {
      if (set.column_norms[static_cast<std::size_t>(k)] > 0) CHECK(set.temporal.col(k).maxCoeff() == 1.0);
    }
  }
  FactorPair p = bump_pair(5, 2, 1);
  CHECK(kind_of([&] { extract_patterns(p, make_labels(4, 12)); }) == ErrorKind::ShapeMismatch);
}

TEST_CASE("extraction from a normalized matrix records hour ranges") {
  NormalizedMatrix nm;
  nm.labels = make_labels(4, 12);
  nm.values = Eigen::MatrixXd::Zero(4, 12);
  for (int j = 0; j < 12; ++j) nm.scaling_params.push_back({1.0, 1.0 + j});
  const auto set = extract_patterns(bump_pair(4, 3, 2), nm);
  CHECK(set.hour_scales(0) == 0.0);
  CHECK(set.hour_scales(11) == 11.0);
  const Eigen::MatrixXd counts = set.count_scale_temporal();
  CHECK(counts(5, 1) == set.temporal(5, 1) * 5.0);
}

TEST_CASE("self-match pairs every pattern with itself") {
  const auto a = set_from(bump_pair(20, 6, 1));
  const auto m = match_patterns(a, a);
  REQUIRE(m.pairs.size() == 6);
  for (const auto& p : m.pairs) {
    CHECK(p.a == p.b);
    CHECK(p.similarity == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK(m.unmatched_a.empty());
  CHECK(m.unmatched_b.empty());
  CHECK(m.threshold == kDefaultMatchThreshold);
}

TEST_CASE("matching recovers a column permutation") {
  const auto pair = bump_pair(20, 6, 2);
  const auto a = set_from(pair);
  std::vector<int> perm = {3, 0, 5, 1, 4, 2};
  FactorPair permuted = pair;
  for (int k = 0; k < 6; ++k) {
    permuted.h.col(k) = pair.h.col(perm[static_cast<std::size_t>(k)]);
    permuted.w.col(k) = pair.w.col(perm[static_cast<std::size_t>(k)]);
  }
  const auto b = set_from(permuted);
  const auto m = match_patterns(a, b);
  REQUIRE(m.pairs.size() == 6);
  for (const auto& p : m.pairs) CHECK(perm[static_cast<std::size_t>(p.b)] == p.a);

  // Exhaustive check: no other pairing has a larger total similarity.
  std::vector<int> idx(6);
  std::iota(idx.begin(), idx.end(), 0);
  double best = -1;
  std::vector<int> best_perm;
  do {
    double total = 0;
    for (int k = 0; k < 6; ++k) total += oracle::cosine(a.temporal.col(k), b.temporal.col(idx[static_cast<std::size_t>(k)]));
    if (total > best) {
      best = total;
      best_perm = idx;
    }
  } while (std::next_permutation(idx.begin(), idx.end()));
  for (const auto& p : m.pairs) CHECK(best_perm[static_cast<std::size_t>(p.a)] == p.b);
}

TEST_CASE("dropping two patterns leaves them unmatched") {
  const auto pair = bump_pair(20, 6, 3);
  FactorPair four = pair;
  four.h = pair.h.leftCols(4);
  four.w = pair.w.leftCols(4);
  const auto m = match_patterns(set_from(pair), set_from(four), 0.80);
  CHECK(m.pairs.size() == 4);
  CHECK(m.unmatched_a == std::vector<int>{4, 5});
  CHECK(m.unmatched_b.empty());
}

TEST_CASE("matching is symmetric under role swap") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 20; ++t) {
    FactorPair pa, pb;
    const int ra = 1 + static_cast<int>(rng() % 6);
    const int rb = 1 + static_cast<int>(rng() % 6);
    pa.w = Eigen::MatrixXd::Ones(3, ra);
    pb.w = Eigen::MatrixXd::Ones(3, rb);
    pa.h.resize(12, ra);
    pb.h.resize(12, rb);
    for (int i = 0; i < 12; ++i) {
      for (int k = 0; k < ra; ++k) pa.h(i, k) = std::pow(u(rng), 3);
      for (int k = 0; k < rb; ++k) pb.h(i, k) = std::pow(u(rng), 3);
    }
    const auto a = extract_patterns(pa, make_labels(3, 12));
    const auto b = extract_patterns(pb, make_labels(3, 12));
    const double threshold = 0.5 * u(rng) + 0.3;
    const auto ab = match_patterns(a, b, threshold);
    const auto ba = match_patterns(b, a, threshold);
    std::vector<std::pair<int, int>> x, y;
    for (const auto& p : ab.pairs) {
      x.emplace_back(p.a, p.b);
      CHECK(p.similarity >= threshold);
      CHECK(p.similarity >= 0.0);
      CHECK(p.similarity <= 1.0);
    }
    for (const auto& p : ba.pairs) y.emplace_back(p.b, p.a);
    std::sort(x.begin(), x.end());
    std::sort(y.begin(), y.end());
    CHECK(x == y);
    CHECK(ab.unmatched_a == ba.unmatched_b);
  }
}

TEST_CASE("match_patterns errors") {
  const auto a = set_from(bump_pair(5, 2, 1));
  FactorPair shorter = bump_pair(5, 2, 1);
  shorter.h = shorter.h.topRows(11).eval();
  const auto b = extract_patterns(shorter, make_labels(5, 11));
  CHECK(kind_of([&] { match_patterns(a, b); }) == ErrorKind::HourBinMismatch);
  CHECK(kind_of([&] { match_patterns(a, a, 1.5); }) == ErrorKind::InvalidConfig);
}

TEST_CASE("peak hour ignores positive rescaling") {
  auto pair = bump_pair(4, 3, 5);
  const auto set = set_from(pair);
  CHECK(peak_hour(set, 0) == 7);
  CHECK(peak_hour(set, 1) == 9);
  CHECK(peak_hour(set, 2) == 11);
  pair.h *= 37.5;
  const auto scaled = set_from(pair);
  for (int k = 0; k < 3; ++k) CHECK(peak_hour(scaled, k) == peak_hour(set, k));
}

TEST_CASE("compare_periods arithmetic") {
  const auto set = set_from(bump_pair(3, 2, 1));
  const auto m = match_patterns(set, set);
  const auto report = compare_periods(raw_with_total(100, 3), raw_with_total(48, 3), m, set, set);
  CHECK(report.total_reduction_pct == doctest::Approx(52.0).epsilon(1e-12));
  CHECK(report.per_pattern_notes.size() == 2);
  for (const auto& n : report.per_pattern_notes) CHECK(n.peak_shift == 0);

  const auto same = compare_periods(raw_with_total(100, 3), raw_with_total(100, 3), m, set, set);
  CHECK(same.total_reduction_pct == 0.0);
  for (const auto& n : same.per_pattern_notes) CHECK(n.similarity == doctest::Approx(1.0).epsilon(1e-12));

  CHECK(kind_of([&] { compare_periods(raw_with_total(0, 3), raw_with_total(5, 3), m, set, set); }) ==
        ErrorKind::ZeroTotal);
  CHECK(kind_of([&] { compare_periods(raw_with_total(1, 4), raw_with_total(5, 3), m, set, set); }) ==
        ErrorKind::ShapeMismatch);
}

TEST_CASE("peak shifts and dominant counts in the report") {
  auto pa = bump_pair(4, 2, 1);
  auto pb = pa;
  // shift pattern 2 one hour later in period b
  for (int t = 11; t > 0; --t) pb.h(t, 1) = pa.h(t - 1, 1);
  pb.h(0, 1) = 0.0;
  pa.w << 1, 0, 1, 0, 0, 1, 0.5, 0.2;
  const auto a = set_from(pa);
  const auto b = set_from(pb);
  const auto report = compare_periods(raw_with_total(10, 4), raw_with_total(5, 4), match_patterns(a, b, 0.5), a, b);
  REQUIRE(report.per_pattern_notes.size() == 2);
  const auto& shifted = report.per_pattern_notes[1].a == 1 ? report.per_pattern_notes[1] : report.per_pattern_notes[0];
  CHECK(shifted.peak_hour_a == 9);
  CHECK(shifted.peak_hour_b == 10);
  CHECK(shifted.peak_shift == 1);
  CHECK(dominant_pattern_counts(a)[0] + dominant_pattern_counts(a)[1] == 4);
}

TEST_CASE("exports are well-formed") {
  const auto pair = bump_pair(3, 2, 1);
  const auto set = set_from(pair);
  std::ostringstream geo;
  write_spatial_geojson(geo, set);
  const auto j = nlohmann::json::parse(geo.str());
  CHECK(j["type"] == "FeatureCollection");
  REQUIRE(j["features"].size() == 3);
  const auto& f = j["features"][0];
  CHECK(f["geometry"]["type"] == "Point");
  CHECK(f["geometry"]["coordinates"][0].get<double>() == -1.0);
  CHECK(f["geometry"]["coordinates"][1].get<double>() == 51.0);
  CHECK(f["properties"]["location_id"] == "100");
  CHECK(f["properties"].contains("pattern_2"));
  CHECK(f["properties"]["dominant_pattern"].get<int>() >= 1);

  std::ostringstream temporal;
  write_temporal_patterns(temporal, set);
  CHECK(temporal.str().rfind("hour,pattern_1,pattern_2\n7,", 0) == 0);

  const auto report = compare_periods(raw_with_total(100, 3), raw_with_total(48, 3), match_patterns(set, set), set, set);
  std::ostringstream rj, rt;
  write_report_json(rj, report);
  write_report_text(rt, report);
  const auto r = nlohmann::json::parse(rj.str());
  CHECK(r["total_reduction_pct"].get<double>() == doctest::Approx(52.0));
  CHECK(r["pairs"].size() == 2);
  CHECK(r["unmatched_a"].empty());
  CHECK(rt.str().find("52.00% reduction") != std::string::npos);
}
