#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace trafficnmf {

struct TrafficRecord {
  std::string location_id;
  double latitude = 0.0;
  double longitude = 0.0;
  int hour = 0;
  std::int64_t count = 0;
  std::string period_label;
};

// Inclusive range of clock-hour bin starts.
struct HourWindow {
  int first = 7;
  int last = 18;

  int size() const { return last - first + 1; }
  bool contains(int hour) const { return hour >= first && hour <= last; }
  std::vector<int> bins() const;

  // Accepts "7..18" or "7-18".
  static HourWindow parse(const std::string& text);
};

// Maps record roles to header names. An empty or absent period column means
// every record takes the caller-provided default label.
struct ColumnMapping {
  std::string location_id = "count_point_id";
  std::string latitude = "latitude";
  std::string longitude = "longitude";
  std::string hour = "hour";
  std::string count = "all_motor_vehicles";
  std::string period = "year";
  char delimiter = ',';
  // When set, rows whose period column holds another value are skipped
  // without counting as rejections. Lets one multi-year file feed both periods.
  std::string keep_period;
};

struct RejectionSummary {
  std::size_t rows_read = 0;
  std::size_t rows_rejected = 0;
  std::size_t rows_other_period = 0;
  std::map<std::string, std::size_t> by_reason;
  // 1-based line numbers of the first few rejected rows, for error context.
  std::vector<std::size_t> sample_lines;
};

struct ParseResult {
  std::vector<TrafficRecord> records;
  RejectionSummary rejections;
};

ParseResult parse_records(std::istream& stream, const ColumnMapping& schema,
                          const std::string& default_period = "");

struct LocationLabel {
  std::string id;
  double latitude = 0.0;
  double longitude = 0.0;

  friend bool operator==(const LocationLabel&, const LocationLabel&) = default;
};

struct MatrixLabels {
  std::vector<LocationLabel> rows;
  std::vector<int> hours;
  std::string period_label;
};

// Location x hour-bin matrix of summed vehicle counts.
struct CountMatrix {
  Eigen::MatrixXd values;
  MatrixLabels labels;

  Eigen::Index rows() const { return values.rows(); }
  Eigen::Index cols() const { return values.cols(); }
  double total() const { return values.sum(); }
};

struct ColumnScale {
  double min = 0.0;
  double max = 0.0;
};

struct NormalizedMatrix {
  Eigen::MatrixXd values;
  std::vector<ColumnScale> scaling_params;
  MatrixLabels labels;

  // Inverse transform. Constant columns come back as their recorded value.
  Eigen::MatrixXd denormalize() const;
};

// Strict weak order used for row labels: all-digit ids compare numerically,
// and sort before any other id, which compare lexicographically.
bool location_id_less(const std::string& a, const std::string& b);

CountMatrix build_matrix(const std::vector<TrafficRecord>& records, const HourWindow& window = {});

NormalizedMatrix minmax_normalize(const CountMatrix& m);

// Table layout: a "# period: <label>" line, then a header
// location_id,latitude,longitude,hour_<h>... and one row per location.
void write_count_matrix(std::ostream& out, const CountMatrix& m);
CountMatrix read_count_matrix(std::istream& in);

}  // namespace trafficnmf
