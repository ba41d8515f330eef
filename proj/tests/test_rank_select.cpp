#include "oracles.hpp"

#include "trafficnmf/error.hpp"
#include "trafficnmf/rank_select.hpp"
#include "trafficnmf/synth.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

using namespace trafficnmf;

namespace {

ClusterAssignment labels(std::vector<int> l, int k) {
  ClusterAssignment a;
  a.labels = std::move(l);
  a.k = k;
  return a;
}

Eigen::MatrixXd four_points() {
  Eigen::MatrixXd p(4, 2);
  p << 0, 0,
       0, 2,
       4, 0,
       4, 2;
  return p;
}

ErrorKind kind_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an Error");
  return ErrorKind::InvalidConfig;
}

NormalizedMatrix planted_normalized(int rank, double noise, std::uint64_t seed) {
  SyntheticSpec spec;
  spec.planted_rank = rank;
  spec.noise_level = noise;
  spec.seed = seed;
  return minmax_normalize(build_matrix(generate_planted(spec).records));
}

}  // namespace

TEST_CASE("assign_clusters takes the row argmax, lowest index on ties") {
  Eigen::MatrixXd f(1, 2);
  f << 0.9, 0.1;
  CHECK(assign_clusters(f).labels == std::vector<int>{0});
  f << 0.5, 0.5;
  CHECK(assign_clusters(f).labels == std::vector<int>{0});
  Eigen::MatrixXd g(3, 2);
  g << 1, 0,
       0, 2,
       3, 1;
  const auto a = assign_clusters(g, FactorSource::Time);
  CHECK(a.labels == std::vector<int>{0, 1, 0});
  CHECK(a.k == 2);
  CHECK(a.source == FactorSource::Time);
}

TEST_CASE("assign_clusters is unchanged by a global positive scale") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 20; ++t) {
    Eigen::MatrixXd f(15, 4);
    for (int i = 0; i < 15; ++i)
      for (int j = 0; j < 4; ++j) f(i, j) = u(rng);
    const double s = 1e-3 + 1e3 * u(rng);
    CHECK(assign_clusters(f).labels == assign_clusters(s * f).labels);
  }
}

TEST_CASE("four-point worked example") {
  const auto p = four_points();
  const auto a = labels({0, 0, 1, 1}, 2);
  CHECK(within_dispersion(p, a) == 4.0);
  CHECK(between_dispersion(p, a) == 16.0);
  CHECK(total_scatter(p) == 20.0);
  CHECK(calinski_harabasz(p, a) == 8.0);
}

TEST_CASE("degenerate dispersion cases") {
  const auto p = four_points();
  CHECK(within_dispersion(p, labels({0, 1, 2, 3}, 4)) == 0.0);
  Eigen::MatrixXd same = Eigen::MatrixXd::Constant(5, 3, 2.5);
  CHECK(within_dispersion(same, labels({0, 0, 0, 0, 0}, 1)) == 0.0);
  CHECK(between_dispersion(p, labels({0, 0, 0, 0}, 1)) == 0.0);
  CHECK(kind_of([&] { calinski_harabasz(p, labels({0, 0, 0, 0}, 1)); }) == ErrorKind::DegenerateClustering);
  // k = 2 declared but one cluster empty: effective k is 1
  CHECK(kind_of([&] { calinski_harabasz(p, labels({1, 1, 1, 1}, 2)); }) == ErrorKind::DegenerateClustering);
  // n == k
  CHECK(kind_of([&] { calinski_harabasz(p, labels({0, 1, 2, 3}, 4)); }) == ErrorKind::DegenerateClustering);
  Eigen::MatrixXd twins(4, 1);
  twins << 0, 0, 5, 5;
  CHECK(std::isinf(calinski_harabasz(twins, labels({0, 0, 1, 1}, 2))));
  CHECK(kind_of([&] { within_dispersion(p, labels({0, 1}, 2)); }) == ErrorKind::ShapeMismatch);
  CHECK(kind_of([&] { within_dispersion(p, labels({0, 1, 2, 0}, 2)); }) == ErrorKind::ShapeMismatch);
}

TEST_CASE("empty clusters reduce the CH degrees of freedom") {
  const auto p = four_points();
  // labels use clusters 0 and 2 of k = 3: identical to the k = 2 example
  CHECK(calinski_harabasz(p, labels({0, 0, 2, 2}, 3)) == 8.0);
}

TEST_CASE("tight separated clusters score above a random split") {
  // 10 fixed points: two tight groups around (0,0) and (10,10)
  Eigen::MatrixXd p(10, 2);
  p << 0.0, 0.1, 0.2, 0.0, -0.1, 0.1, 0.1, -0.2, 0.0, 0.0,
       10.0, 10.1, 9.9, 10.0, 10.2, 9.8, 10.0, 10.2, 9.9, 9.9;
  const auto separated = labels({0, 0, 0, 0, 0, 1, 1, 1, 1, 1}, 2);
  const auto random_split = labels({0, 1, 0, 1, 1, 0, 1, 0, 0, 1}, 2);
  const double ch_sep = calinski_harabasz(p, separated);
  const double ch_rand = calinski_harabasz(p, random_split);
  CHECK(ch_sep > ch_rand);
  CHECK(ch_sep == doctest::Approx(oracle::brute_force_ch(p, separated.labels, 2)).epsilon(1e-9));
}

TEST_CASE("scatter decomposition and brute-force agreement on random instances") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (int t = 0; t < 50; ++t) {
    const int n = 3 + static_cast<int>(rng() % 40);
    const int d = 1 + static_cast<int>(rng() % 6);
    const int k = 1 + static_cast<int>(rng() % 6);
    Eigen::MatrixXd p(n, d);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < d; ++j) p(i, j) = u(rng);
    std::vector<int> l(static_cast<std::size_t>(n));
    for (auto& v : l) v = static_cast<int>(rng() % static_cast<std::uint64_t>(k));
    const auto a = labels(l, k);
    const double w = within_dispersion(p, a);
    const double b = between_dispersion(p, a);
    const double tot = total_scatter(p);
    CHECK(std::fabs(w + b - tot) <= 1e-8 * tot);
    CHECK(w == doctest::Approx(oracle::trace_within_scatter_matrix(p, l, k)).epsilon(1e-10));
    const auto o = oracle::pairwise_scatter(p, l, k);
    CHECK(w == doctest::Approx(o.within).epsilon(1e-9));
    CHECK(b == doctest::Approx(o.between).epsilon(1e-9));
  }
}

TEST_CASE("rank_scan recovers a planted rank-3 matrix") {
  NmfConfig cfg;
  cfg.seed = 42;
  const auto result = rank_scan(planted_normalized(3, 0.0, 1), RankRange{2, 8}, cfg);
  CHECK(result.entries.size() == 7);
  CHECK(result.recommended_rank == 3);
  const double total = result.entries.front().within_dispersion + result.entries.front().between_dispersion;
  for (const auto& e : result.entries) {
    CHECK(e.within_dispersion >= 0.0);
    CHECK(e.between_dispersion >= 0.0);
    // raw-row scans share one point set, so the total scatter is rank-independent
    INFO("rank ", e.rank, " W ", e.within_dispersion, " B ", e.between_dispersion, " total ", total);
    CHECK(std::fabs(e.within_dispersion + e.between_dispersion - total) <= 1e-8 * total);
  }
}

TEST_CASE("rank_scan singleton range") {
  NmfConfig cfg;
  const auto x = planted_normalized(4, 0.02, 3);
  for (auto target : {ScanTarget::RawRows, ScanTarget::LocationFactor, ScanTarget::TimeFactor}) {
    const auto result = rank_scan(x, RankRange{2, 2}, cfg, target);
    REQUIRE(result.entries.size() == 1);
    CHECK(result.entries[0].rank == 2);
    CHECK(result.recommended_rank == 2);
    CHECK(result.target == target);
  }
}

TEST_CASE("rank_scan is deterministic and parallel matches serial") {
  NmfConfig cfg;
  cfg.seed = 8;
  const auto x = planted_normalized(5, 0.05, 4);
  const auto a = rank_scan(x, RankRange{2, 8}, cfg);
  const auto b = rank_scan(x, RankRange{2, 8}, cfg);
  const auto c = rank_scan(x, RankRange{2, 8}, cfg, ScanTarget::RawRows, true);
  std::ostringstream sa, sb, sc;
  write_rank_scan(sa, a);
  write_rank_scan(sb, b);
  write_rank_scan(sc, c);
  CHECK(sa.str() == sb.str());
  CHECK(sa.str() == sc.str());
  CHECK(a.recommended_rank == c.recommended_rank);
}

TEST_CASE("ranks beyond the matrix are recorded as failed") {
  Eigen::MatrixXd x = Eigen::MatrixXd::Random(10, 4).cwiseAbs();
  NmfConfig cfg;
  const auto result = rank_scan(x, RankRange{2, 6}, cfg);
  CHECK(result.entries.size() == 3);
  CHECK(result.failed_ranks == std::vector<int>{5, 6});
  CHECK(kind_of([&] { rank_scan(x, RankRange{5, 6}, cfg); }) == ErrorKind::InvalidRank);
}

TEST_CASE("scan table layout") {
  RankScanResult r;
  RankScanEntry e;
  e.rank = 2;
  e.within_dispersion = 4;
  e.between_dispersion = 16;
  e.ch_score = 8;
  e.final_loss = 0.5;
  e.occupied_clusters = 2;
  r.entries.push_back(e);
  e.rank = 3;
  e.ch_score.reset();
  r.entries.push_back(e);
  std::ostringstream out;
  write_rank_scan(out, r);
  CHECK(out.str() ==
        "rank,within_dispersion,between_dispersion,ch_score,final_loss,occupied_clusters\n"
        "2,4,16,8,0.5,2\n"
        "3,4,16,nan,0.5,2\n");
}

TEST_CASE("range and target parsing") {
  CHECK(RankRange::parse("2..8").first == 2);
  CHECK(RankRange::parse("2..8").last == 8);
  CHECK(RankRange::parse("4").first == 4);
  CHECK(RankRange::parse("4").last == 4);
  CHECK(kind_of([] { RankRange::parse("8..2"); }) == ErrorKind::InvalidConfig);
  CHECK(kind_of([] { RankRange::parse("0..3"); }) == ErrorKind::InvalidConfig);
  CHECK(parse_scan_target("raw-rows") == ScanTarget::RawRows);
  CHECK(parse_scan_target(to_string(ScanTarget::TimeFactor)) == ScanTarget::TimeFactor);
}
