#pragma once

#include "trafficnmf/ingest.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace trafficnmf {

struct SyntheticSpec {
  int n_locations = 60;
  int n_hours = 12;
  int first_hour = 7;
  int planted_rank = 3;
  // Target ||noise||_F / ||W0 H0^T||_F before rounding to integer counts.
  double noise_level = 0.0;
  std::uint64_t seed = 0;
  // Each (location, hour) count is split across this many records.
  int records_per_cell = 1;
  std::string period_label = "A";

  void validate() const;
};

// Second period built from a subset of the first period's patterns.
struct DropScenario {
  int drop = 2;  // the last `drop` planted patterns vanish
  double scale = 0.5;
  std::string period_label = "B";
};

// Integer-valued planted factors: every location is dominated by one temporal
// bump pattern with small integer loadings on the others, and every pattern
// carries the same total mass.
struct PlantedData {
  Eigen::MatrixXd w0;       // locations x rank
  Eigen::MatrixXd h0;       // hours x rank
  Eigen::MatrixXd product;  // w0 * h0^T, times the period scale
  Eigen::MatrixXd counts;   // what the emitted records sum to
  double measured_noise = 0.0;  // ||counts - product||_F / ||product||_F
  MatrixLabels labels;
  std::vector<TrafficRecord> records;
};

PlantedData generate_planted(const SyntheticSpec& spec);

// Same locations and hour bins as `a`; dropped patterns' locations move their
// dominant loading onto a surviving pattern, then counts are scaled.
PlantedData derive_dropped_period(const PlantedData& a, const SyntheticSpec& spec, const DropScenario& scenario);

// count_point_id,year,latitude,longitude,hour,all_motor_vehicles
void write_records(std::ostream& out, const std::vector<TrafficRecord>& records);

// id column + pattern_1..pattern_r
void write_planted_factor(std::ostream& out, const Eigen::MatrixXd& factor, const std::vector<std::string>& labels,
                          const char* label_header);

}  // namespace trafficnmf
