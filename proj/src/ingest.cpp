#include "trafficnmf/ingest.hpp"

#include "trafficnmf/error.hpp"
#include "trafficnmf/table.hpp"

#include <algorithm>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <unordered_map>

namespace trafficnmf {

namespace {

constexpr std::size_t kMaxSampleLines = 10;

bool all_digits(const std::string& s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) { return c >= '0' && c <= '9'; });
}

// "7", "07", "7.0" or "07:00".
bool parse_hour(const std::string& field, int& hour) {
  std::string text = field;
  if (auto colon = text.find(':'); colon != std::string::npos) {
    long long minutes = 0;
    if (!table::parse_int(text.substr(colon + 1), minutes) || minutes != 0) return false;
    text.resize(colon);
  }
  long long value = 0;
  if (!table::parse_int(text, value) || value < 0 || value > 23) return false;
  hour = static_cast<int>(value);
  return true;
}

std::size_t column_index(const std::vector<std::string>& header, const std::string& name) {
  auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) {
    throw Error(ErrorKind::MissingColumn, "column '" + name + "' not found in header");
  }
  return static_cast<std::size_t>(it - header.begin());
}

void reject(RejectionSummary& summary, const std::string& reason, std::size_t line) {
  ++summary.rows_rejected;
  ++summary.by_reason[reason];
  if (summary.sample_lines.size() < kMaxSampleLines) summary.sample_lines.push_back(line);
}

}  // namespace

std::vector<int> HourWindow::bins() const {
  std::vector<int> out;
  for (int h = first; h <= last; ++h) out.push_back(h);
  return out;
}

HourWindow HourWindow::parse(const std::string& text) {
  std::string lo;
  std::string hi;
  if (auto pos = text.find(".."); pos != std::string::npos) {
    lo = text.substr(0, pos);
    hi = text.substr(pos + 2);
  } else if (auto dash = text.find('-'); dash != std::string::npos) {
    lo = text.substr(0, dash);
    hi = text.substr(dash + 1);
  } else {
    throw Error(ErrorKind::InvalidConfig, "hour window '" + text + "' must look like 7..18");
  }
  long long a = 0;
  long long b = 0;
  if (!table::parse_int(lo, a) || !table::parse_int(hi, b) || a < 0 || b > 23 || a > b) {
    throw Error(ErrorKind::InvalidConfig, "hour window '" + text + "' is not a valid range within 0..23");
  }
  return HourWindow{static_cast<int>(a), static_cast<int>(b)};
}

ParseResult parse_records(std::istream& stream, const ColumnMapping& schema, const std::string& default_period) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(stream, line)) {
    ++line_no;
    if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF &&
        static_cast<unsigned char>(line[1]) == 0xBB && static_cast<unsigned char>(line[2]) == 0xBF) {
      line.erase(0, 3);
    }
    if (line.empty() || line == "\r") continue;
    header = table::split_line(line, schema.delimiter);
    break;
  }
  if (header.empty()) throw Error(ErrorKind::EmptyInput, "no header row");
  for (auto& h : header) {
    while (!h.empty() && (h.back() == ' ' || h.back() == '\t')) h.pop_back();
    while (!h.empty() && (h.front() == ' ' || h.front() == '\t')) h.erase(h.begin());
  }

  const std::size_t id_col = column_index(header, schema.location_id);
  const std::size_t lat_col = column_index(header, schema.latitude);
  const std::size_t lon_col = column_index(header, schema.longitude);
  const std::size_t hour_col = column_index(header, schema.hour);
  const std::size_t count_col = column_index(header, schema.count);
  std::optional<std::size_t> period_col;
  if (!schema.period.empty()) {
    if (auto it = std::find(header.begin(), header.end(), schema.period); it != header.end()) {
      period_col = static_cast<std::size_t>(it - header.begin());
    }
  }
  if (!schema.keep_period.empty() && !period_col) {
    throw Error(ErrorKind::MissingColumn, "period filter needs column '" + schema.period + "'");
  }
  const std::size_t needed =
      std::max({id_col, lat_col, lon_col, hour_col, count_col, period_col.value_or(0)}) + 1;

  ParseResult result;
  auto& summary = result.rejections;
  while (std::getline(stream, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    ++summary.rows_read;
    const auto fields = table::split_line(line, schema.delimiter);
    if (fields.size() < needed) {
      reject(summary, "too few fields", line_no);
      continue;
    }
    if (period_col && !schema.keep_period.empty() && fields[*period_col] != schema.keep_period) {
      ++summary.rows_other_period;
      continue;
    }
    TrafficRecord rec;
    rec.location_id = fields[id_col];
    while (!rec.location_id.empty() && rec.location_id.back() == ' ') rec.location_id.pop_back();
    while (!rec.location_id.empty() && rec.location_id.front() == ' ') rec.location_id.erase(rec.location_id.begin());
    if (rec.location_id.empty()) {
      reject(summary, "empty location id", line_no);
      continue;
    }
    if (!table::parse_double(fields[lat_col], rec.latitude) || !table::parse_double(fields[lon_col], rec.longitude) ||
        !(rec.latitude >= -90.0 && rec.latitude <= 90.0) || !(rec.longitude >= -180.0 && rec.longitude <= 180.0)) {
      reject(summary, "invalid coordinates", line_no);
      continue;
    }
    if (!parse_hour(fields[hour_col], rec.hour)) {
      reject(summary, "unmappable hour", line_no);
      continue;
    }
    long long count = 0;
    if (!table::parse_int(fields[count_col], count)) {
      reject(summary, "malformed count", line_no);
      continue;
    }
    if (count < 0) {
      reject(summary, "negative count", line_no);
      continue;
    }
    rec.count = count;
    rec.period_label = period_col ? fields[*period_col] : default_period;
    result.records.push_back(std::move(rec));
  }
  if (summary.rows_read == 0) throw Error(ErrorKind::EmptyInput, "no data rows after header");
  if (summary.rows_read == summary.rows_other_period) {
    throw Error(ErrorKind::EmptyInput, "no rows for period '" + schema.keep_period + "'");
  }
  return result;
}

bool location_id_less(const std::string& a, const std::string& b) {
  const bool da = all_digits(a);
  const bool db = all_digits(b);
  if (da != db) return da;
  if (da) {
    auto strip = [](const std::string& s) {
      std::size_t p = s.find_first_not_of('0');
      return p == std::string::npos ? std::string_view{} : std::string_view(s).substr(p);
    };
    const auto sa = strip(a);
    const auto sb = strip(b);
    if (sa.size() != sb.size()) return sa.size() < sb.size();
    if (sa != sb) return sa < sb;
  }
  return a < b;
}

CountMatrix build_matrix(const std::vector<TrafficRecord>& records, const HourWindow& window) {
  struct Accum {
    LocationLabel label;
    std::vector<std::int64_t> sums;
  };
  std::unordered_map<std::string, Accum> by_location;
  std::optional<std::string> period;
  const int width = window.size();

  for (const auto& rec : records) {
    if (!window.contains(rec.hour)) continue;
    if (!period) {
      period = rec.period_label;
    } else if (*period != rec.period_label) {
      throw Error(ErrorKind::MixedPeriods,
                  "records span periods '" + *period + "' and '" + rec.period_label + "'");
    }
    auto [it, inserted] = by_location.try_emplace(rec.location_id);
    auto& acc = it->second;
    if (inserted) {
      acc.label = {rec.location_id, rec.latitude, rec.longitude};
      acc.sums.assign(static_cast<std::size_t>(width), 0);
    } else if (std::pair(rec.latitude, rec.longitude) < std::pair(acc.label.latitude, acc.label.longitude)) {
      // Smallest coordinate pair wins so the label does not depend on record order.
      acc.label.latitude = rec.latitude;
      acc.label.longitude = rec.longitude;
    }
    acc.sums[static_cast<std::size_t>(rec.hour - window.first)] += rec.count;
  }
  if (by_location.empty()) {
    throw Error(ErrorKind::EmptyInput, "no records inside hour window " + std::to_string(window.first) + ".." +
                                           std::to_string(window.last));
  }

  std::vector<const Accum*> ordered;
  ordered.reserve(by_location.size());
  for (const auto& [id, acc] : by_location) ordered.push_back(&acc);
  std::sort(ordered.begin(), ordered.end(),
            [](const Accum* a, const Accum* b) { return location_id_less(a->label.id, b->label.id); });

  CountMatrix m;
  m.values.resize(static_cast<Eigen::Index>(ordered.size()), width);
  m.labels.hours = window.bins();
  m.labels.period_label = *period;
  m.labels.rows.reserve(ordered.size());
  for (std::size_t i = 0; i < ordered.size(); ++i) {
    m.labels.rows.push_back(ordered[i]->label);
    for (int j = 0; j < width; ++j) {
      m.values(static_cast<Eigen::Index>(i), j) = static_cast<double>(ordered[i]->sums[static_cast<std::size_t>(j)]);
    }
  }
  return m;
}

NormalizedMatrix minmax_normalize(const CountMatrix& m) {
  if (m.rows() < 1 || m.cols() < 1) throw Error(ErrorKind::EmptyInput, "cannot normalize an empty matrix");
  NormalizedMatrix out;
  out.labels = m.labels;
  out.values.resize(m.rows(), m.cols());
  out.scaling_params.reserve(static_cast<std::size_t>(m.cols()));
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    const double lo = m.values.col(j).minCoeff();
    const double hi = m.values.col(j).maxCoeff();
    out.scaling_params.push_back({lo, hi});
    if (hi > lo) {
      const double range = hi - lo;
      for (Eigen::Index i = 0; i < m.rows(); ++i) {
        out.values(i, j) = std::clamp((m.values(i, j) - lo) / range, 0.0, 1.0);
      }
    } else {
      out.values.col(j).setZero();
    }
  }
  return out;
}

Eigen::MatrixXd NormalizedMatrix::denormalize() const {
  Eigen::MatrixXd out(values.rows(), values.cols());
  for (Eigen::Index j = 0; j < values.cols(); ++j) {
    const auto& s = scaling_params[static_cast<std::size_t>(j)];
    out.col(j) = (values.col(j).array() * (s.max - s.min) + s.min).matrix();
  }
  return out;
}

void write_count_matrix(std::ostream& out, const CountMatrix& m) {
  out << "# period: " << m.labels.period_label << '\n';
  std::vector<std::string> header = {"location_id", "latitude", "longitude"};
  for (int h : m.labels.hours) header.push_back("hour_" + std::to_string(h));
  table::write_row(out, header);
  std::vector<std::string> row;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const auto& label = m.labels.rows[static_cast<std::size_t>(i)];
    row = {label.id, table::format_number(label.latitude), table::format_number(label.longitude)};
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(table::format_number(m.values(i, j)));
    table::write_row(out, row);
  }
}

CountMatrix read_count_matrix(std::istream& in) {
  CountMatrix m;
  std::string line;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    if (line.rfind("# period:", 0) == 0) {
      std::string label = line.substr(9);
      while (!label.empty() && (label.front() == ' ')) label.erase(label.begin());
      while (!label.empty() && (label.back() == '\r' || label.back() == ' ')) label.pop_back();
      m.labels.period_label = label;
      continue;
    }
    if (line.empty() || line[0] == '#') continue;
    header = table::split_line(line);
    break;
  }
  if (header.size() < 4 || header[0] != "location_id" || header[1] != "latitude" || header[2] != "longitude") {
    throw Error(ErrorKind::EmptyInput, "matrix table header must be location_id,latitude,longitude,hour_<h>...");
  }
  for (std::size_t c = 3; c < header.size(); ++c) {
    long long h = 0;
    if (header[c].rfind("hour_", 0) != 0 || !table::parse_int(header[c].substr(5), h)) {
      throw Error(ErrorKind::HourBinMismatch, "bad hour column '" + header[c] + "'");
    }
    if (!m.labels.hours.empty() && h <= m.labels.hours.back()) {
      throw Error(ErrorKind::HourBinMismatch, "hour columns must be strictly increasing");
    }
    m.labels.hours.push_back(static_cast<int>(h));
  }
  std::vector<std::vector<double>> rows;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto fields = table::split_line(line);
    if (fields.size() != header.size()) {
      throw Error(ErrorKind::ShapeMismatch, "matrix row " + std::to_string(line_no) + " has " +
                                                std::to_string(fields.size()) + " fields, expected " +
                                                std::to_string(header.size()));
    }
    LocationLabel label{fields[0], 0.0, 0.0};
    std::vector<double> values(header.size() - 3);
    bool ok = table::parse_double(fields[1], label.latitude) && table::parse_double(fields[2], label.longitude);
    for (std::size_t c = 3; ok && c < fields.size(); ++c) ok = table::parse_double(fields[c], values[c - 3]);
    if (!ok) throw Error(ErrorKind::ShapeMismatch, "unparsable number in matrix row " + std::to_string(line_no));
    for (double v : values) {
      if (!(v >= 0.0)) throw Error(ErrorKind::NonNegativityViolation, "negative count in matrix table");
    }
    m.labels.rows.push_back(std::move(label));
    rows.push_back(std::move(values));
  }
  if (rows.empty()) throw Error(ErrorKind::EmptyInput, "matrix table has no rows");
  m.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(m.labels.hours.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      m.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  return m;
}

}  // namespace trafficnmf
