#include "trafficnmf/pipeline.hpp"

#include "trafficnmf/error.hpp"
#include "trafficnmf/exports.hpp"

#include <json.hpp>

#include <fstream>
#include <functional>
#include <future>
#include <ostream>
#include <sstream>

namespace trafficnmf {

namespace fs = std::filesystem;

namespace {

constexpr const char* kIncompleteMarker = "INCOMPLETE";

void write_file(const fs::path& path, const std::function<void(std::ostream&)>& body) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::MissingInput, "cannot open '" + path.string() + "' for writing");
  body(out);
  out.flush();
  if (!out) throw Error(ErrorKind::MissingInput, "failed writing '" + path.string() + "'");
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::MissingInput, "cannot create output directory '" + dir.string() + "': " + ec.message());
}

template <class T>
void read_key(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key) && !j.at(key).is_null()) out = j.at(key).get<T>();
}

// Runs f, prefixing any library error with the file it concerns.
template <class F>
auto with_context(const std::string& context, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    throw Error(e.kind(), context + ": " + e.detail());
  }
}

std::vector<std::string> location_ids(const MatrixLabels& labels) {
  std::vector<std::string> out;
  for (const auto& r : labels.rows) out.push_back(r.id);
  return out;
}

std::vector<std::string> hour_ids(const MatrixLabels& labels) {
  std::vector<std::string> out;
  for (int h : labels.hours) out.push_back(std::to_string(h));
  return out;
}

}  // namespace

void PipelineConfig::validate() const {
  if (ranks.first < 1 || ranks.first > ranks.last) throw Error(ErrorKind::InvalidConfig, "rank range is empty");
  if (rank_a && *rank_a < 1) throw Error(ErrorKind::InvalidConfig, "rank-a must be >= 1");
  if (rank_b && *rank_b < 1) throw Error(ErrorKind::InvalidConfig, "rank-b must be >= 1");
  if (!(tol > 0.0)) throw Error(ErrorKind::InvalidConfig, "tol must be > 0");
  if (max_iters < 1) throw Error(ErrorKind::InvalidConfig, "max-iters must be >= 1");
  if (restarts < 1) throw Error(ErrorKind::InvalidConfig, "restarts must be >= 1");
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw Error(ErrorKind::InvalidConfig, "threshold must lie in [0, 1]");
  if (hours.first < 0 || hours.last > 23 || hours.first > hours.last) {
    throw Error(ErrorKind::InvalidConfig, "hour window must lie within 0..23");
  }
}

void apply_config_json(PipelineConfig& cfg, const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
    read_key(j, "input_a", cfg.input_a);
    read_key(j, "input_b", cfg.input_b);
    read_key(j, "label_a", cfg.label_a);
    read_key(j, "filter_period", cfg.filter_period);
    read_key(j, "label_b", cfg.label_b);
    if (j.contains("hours")) cfg.hours = HourWindow::parse(j.at("hours").get<std::string>());
    if (j.contains("ranks")) cfg.ranks = RankRange::parse(j.at("ranks").get<std::string>());
    if (j.contains("rank_a") && !j.at("rank_a").is_null()) cfg.rank_a = j.at("rank_a").get<int>();
    if (j.contains("rank_b") && !j.at("rank_b").is_null()) cfg.rank_b = j.at("rank_b").get<int>();
    read_key(j, "seed", cfg.seed);
    read_key(j, "tol", cfg.tol);
    read_key(j, "max_iters", cfg.max_iters);
    read_key(j, "restarts", cfg.restarts);
    if (j.contains("init")) cfg.init = parse_init_method(j.at("init").get<std::string>());
    if (j.contains("scan_target")) cfg.scan_target = parse_scan_target(j.at("scan_target").get<std::string>());
    read_key(j, "threshold", cfg.threshold);
    read_key(j, "parallel", cfg.parallel);
    if (j.contains("out")) cfg.out_dir = j.at("out").get<std::string>();
    if (j.contains("delimiter")) {
      const auto d = j.at("delimiter").get<std::string>();
      if (d.size() != 1) throw Error(ErrorKind::InvalidConfig, "delimiter must be a single character");
      cfg.columns.delimiter = d[0];
    }
    if (j.contains("columns")) {
      const auto& c = j.at("columns");
      read_key(c, "location_id", cfg.columns.location_id);
      read_key(c, "latitude", cfg.columns.latitude);
      read_key(c, "longitude", cfg.columns.longitude);
      read_key(c, "hour", cfg.columns.hour);
      read_key(c, "count", cfg.columns.count);
      read_key(c, "period", cfg.columns.period);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::InvalidConfig, std::string("config: ") + e.what());
  }
}

PipelineConfig load_config(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::InvalidConfig, "cannot read config file '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  PipelineConfig cfg;
  apply_config_json(cfg, buf.str());
  return cfg;
}

std::uint64_t stage_seed(std::uint64_t base, int stage) {
  return base + 1000ULL * static_cast<std::uint64_t>(stage);
}

NmfConfig nmf_template(const PipelineConfig& cfg, int stage) {
  NmfConfig n;
  n.max_iters = cfg.max_iters;
  n.restarts = cfg.restarts;
  n.tol = cfg.tol;
  n.init = cfg.init;
  n.seed = stage_seed(cfg.seed, stage);
  return n;
}

ColumnMapping columns_for(const PipelineConfig& cfg, const std::string& label) {
  ColumnMapping c = cfg.columns;
  if (cfg.filter_period) c.keep_period = label;
  return c;
}

IngestOutcome ingest_file(const fs::path& path, const ColumnMapping& columns, const std::string& default_label,
                          const HourWindow& hours) {
  if (path.empty()) throw Error(ErrorKind::MissingInput, "no input path given");
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::MissingInput, "cannot open input '" + path.string() + "'");
  return with_context(path.string(), [&] {
    auto parsed = parse_records(in, columns, default_label);
    IngestOutcome out{build_matrix(parsed.records, hours), std::move(parsed.rejections)};
    return out;
  });
}

CountMatrix load_matrix(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::MissingInput, "cannot open matrix '" + path.string() + "'");
  return with_context(path.string(), [&] { return read_count_matrix(in); });
}

std::string describe_shape(const CountMatrix& m) {
  return std::to_string(m.rows()) + " locations × " + std::to_string(m.cols()) + " hours";
}

std::string describe_rejections(const RejectionSummary& r) {
  std::string s = std::to_string(r.rows_read) + " rows read, ";
  if (r.rows_other_period > 0) s += std::to_string(r.rows_other_period) + " from other periods, ";
  s += std::to_string(r.rows_rejected) + " rejected";
  if (!r.by_reason.empty()) {
    s += " (";
    bool first = true;
    for (const auto& [reason, n] : r.by_reason) {
      if (!first) s += ", ";
      s += reason + ": " + std::to_string(n);
      first = false;
    }
    s += ")";
  }
  if (!r.sample_lines.empty()) {
    s += "; first rejected lines:";
    for (auto line : r.sample_lines) s += " " + std::to_string(line);
  }
  return s;
}

fs::path matrix_path(const fs::path& dir, const std::string& tag) { return dir / (tag + "_matrix.csv"); }
fs::path scan_path(const fs::path& dir, const std::string& tag) { return dir / (tag + "_rank_scan.csv"); }

void save_matrix(const fs::path& dir, const std::string& tag, const CountMatrix& m) {
  ensure_dir(dir);
  write_file(matrix_path(dir, tag), [&](std::ostream& o) { write_count_matrix(o, m); });
}

RankScanResult scan_matrix(const CountMatrix& m, const PipelineConfig& cfg) {
  const auto normalized = minmax_normalize(m);
  return rank_scan(normalized, cfg.ranks, nmf_template(cfg, kScanStage), cfg.scan_target, cfg.parallel);
}

void save_scan(const fs::path& dir, const std::string& tag, const RankScanResult& scan) {
  ensure_dir(dir);
  write_file(scan_path(dir, tag), [&](std::ostream& o) { write_rank_scan(o, scan); });
}

FactorizeOutcome factorize_matrix(const CountMatrix& m, int rank, const PipelineConfig& cfg) {
  FactorizeOutcome f;
  f.config = nmf_template(cfg, kFactorizeStage);
  f.config.rank = rank;
  const auto normalized = minmax_normalize(m);
  f.pair = factorize(normalized, f.config);
  f.patterns = extract_patterns(f.pair, normalized);
  return f;
}

void save_factorization(const fs::path& dir, const std::string& tag, const FactorizeOutcome& f,
                        const CountMatrix& m) {
  ensure_dir(dir);
  write_file(dir / (tag + "_location_factors.csv"),
             [&](std::ostream& o) { write_location_factors(o, f.pair, m.labels); });
  write_file(dir / (tag + "_time_factors.csv"), [&](std::ostream& o) { write_time_factors(o, f.pair, m.labels); });
  write_file(dir / (tag + "_diagnostics.json"), [&](std::ostream& o) { write_diagnostics(o, f.pair, f.config); });
  write_file(dir / (tag + "_temporal_patterns.csv"), [&](std::ostream& o) { write_temporal_patterns(o, f.patterns); });
  write_file(dir / (tag + "_spatial_patterns.geojson"),
             [&](std::ostream& o) { write_spatial_geojson(o, f.patterns); });
}

RunOutcome run_pipeline(const PipelineConfig& cfg, std::ostream& log) {
  cfg.validate();
  ensure_dir(cfg.out_dir);
  const fs::path marker = cfg.out_dir / kIncompleteMarker;
  std::error_code ec;
  fs::remove(marker, ec);

  try {
    RunOutcome run;
    run.a = ingest_file(cfg.input_a, columns_for(cfg, cfg.label_a), cfg.label_a, cfg.hours);
    run.b = ingest_file(cfg.input_b, columns_for(cfg, cfg.label_b), cfg.label_b, cfg.hours);
    for (auto [tag, ing] : {std::pair{"a", &run.a}, std::pair{"b", &run.b}}) {
      log << tag << " (" << ing->matrix.labels.period_label << "): " << describe_shape(ing->matrix) << "; "
          << describe_rejections(ing->rejections) << '\n';
      save_matrix(cfg.out_dir, tag, ing->matrix);
    }

    auto period = [&](const IngestOutcome& ing, const std::optional<int>& fixed, RankScanResult& scan,
                      FactorizeOutcome& fact) {
      scan = scan_matrix(ing.matrix, cfg);
      const int rank = fixed.value_or(scan.recommended_rank);
      fact = factorize_matrix(ing.matrix, rank, cfg);
    };
    if (cfg.parallel) {
      auto job = std::async(std::launch::async, [&] { period(run.b, cfg.rank_b, run.scan_b, run.fact_b); });
      period(run.a, cfg.rank_a, run.scan_a, run.fact_a);
      job.get();
    } else {
      period(run.a, cfg.rank_a, run.scan_a, run.fact_a);
      period(run.b, cfg.rank_b, run.scan_b, run.fact_b);
    }

    save_scan(cfg.out_dir, "a", run.scan_a);
    save_scan(cfg.out_dir, "b", run.scan_b);
    save_factorization(cfg.out_dir, "a", run.fact_a, run.a.matrix);
    save_factorization(cfg.out_dir, "b", run.fact_b, run.b.matrix);
    log << "a: recommended rank " << run.scan_a.recommended_rank << ", using " << run.fact_a.config.rank << '\n';
    log << "b: recommended rank " << run.scan_b.recommended_rank << ", using " << run.fact_b.config.rank << '\n';

    const auto match = match_patterns(run.fact_a.patterns, run.fact_b.patterns, cfg.threshold);
    run.report = compare_periods(run.a.matrix, run.b.matrix, match, run.fact_a.patterns, run.fact_b.patterns);
    write_file(cfg.out_dir / "comparison_report.json", [&](std::ostream& o) { write_report_json(o, run.report); });
    write_file(cfg.out_dir / "comparison_report.txt", [&](std::ostream& o) { write_report_text(o, run.report); });
    write_report_text(log, run.report);
    return run;
  } catch (const std::exception& e) {
    std::ofstream out(marker, std::ios::binary | std::ios::trunc);
    out << e.what() << '\n';
    throw;
  }
}

SynthOutcome run_synth(const SyntheticSpec& spec, const std::optional<DropScenario>& drop, const fs::path& out_dir) {
  ensure_dir(out_dir);
  SynthOutcome out{generate_planted(spec), std::nullopt};
  if (drop) out.b = derive_dropped_period(out.a, spec, *drop);

  nlohmann::ordered_json summary;
  summary["n_locations"] = spec.n_locations;
  summary["n_hours"] = spec.n_hours;
  summary["first_hour"] = spec.first_hour;
  summary["planted_rank"] = spec.planted_rank;
  summary["noise_level"] = spec.noise_level;
  summary["seed"] = spec.seed;
  summary["records_per_cell"] = spec.records_per_cell;

  auto emit = [&](const std::string& tag, const PlantedData& d) {
    write_file(out_dir / ("records_" + tag + ".csv"), [&](std::ostream& o) { write_records(o, d.records); });
    write_file(out_dir / ("planted_w_" + tag + ".csv"),
               [&](std::ostream& o) { write_planted_factor(o, d.w0, location_ids(d.labels), "location_id"); });
    write_file(out_dir / ("planted_h_" + tag + ".csv"),
               [&](std::ostream& o) { write_planted_factor(o, d.h0, hour_ids(d.labels), "hour"); });
    summary["period_" + tag] = {{"label", d.labels.period_label},
                                {"rank", d.w0.cols()},
                                {"total", d.counts.sum()},
                                {"measured_noise", d.measured_noise}};
  };
  emit("a", out.a);
  if (out.b) {
    emit("b", *out.b);
    summary["drop"] = drop->drop;
    summary["scale_b"] = drop->scale;
  }
  write_file(out_dir / "synth_summary.json", [&](std::ostream& o) { o << summary.dump(2) << '\n'; });
  return out;
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidConfig:
    case ErrorKind::InvalidRank:
      return 1;
    case ErrorKind::NumericalFailure:
      return 3;
    default:
      return 2;
  }
}

}  // namespace trafficnmf
