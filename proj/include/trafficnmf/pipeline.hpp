#pragma once

#include "trafficnmf/error.hpp"
#include "trafficnmf/ingest.hpp"
#include "trafficnmf/nmf.hpp"
#include "trafficnmf/patterns.hpp"
#include "trafficnmf/rank_select.hpp"
#include "trafficnmf/synth.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

namespace trafficnmf {

struct PipelineConfig {
  std::string input_a;
  std::string input_b;
  std::string label_a = "A";  // used when the input has no period column
  std::string label_b = "B";
  ColumnMapping columns;
  // Keep only rows whose period column equals the period's label, so both
  // inputs may point at one multi-year file.
  bool filter_period = false;
  HourWindow hours;
  RankRange ranks{2, 8};
  std::optional<int> rank_a;  // overrides the scan recommendation
  std::optional<int> rank_b;
  std::uint64_t seed = 0;
  double tol = 1e-5;
  int max_iters = 500;
  int restarts = 4;
  InitMethod init = InitMethod::RandomUniform;
  ScanTarget scan_target = ScanTarget::RawRows;
  double threshold = kDefaultMatchThreshold;
  bool parallel = false;
  std::filesystem::path out_dir = "out";

  void validate() const;
};

// Reads a JSON config; keys mirror the CLI flags with '-' replaced by '_'.
PipelineConfig load_config(const std::filesystem::path& path);
void apply_config_json(PipelineConfig& cfg, const std::string& json_text);

// Per-stage seeds, all derived from the single config seed.
std::uint64_t stage_seed(std::uint64_t base, int stage);
inline constexpr int kScanStage = 1;
inline constexpr int kFactorizeStage = 2;

NmfConfig nmf_template(const PipelineConfig& cfg, int stage);

struct IngestOutcome {
  CountMatrix matrix;
  RejectionSummary rejections;
};

// cfg.columns, restricted to `label` when filter_period is set.
ColumnMapping columns_for(const PipelineConfig& cfg, const std::string& label);

IngestOutcome ingest_file(const std::filesystem::path& path, const ColumnMapping& columns,
                          const std::string& default_label, const HourWindow& hours);
CountMatrix load_matrix(const std::filesystem::path& path);

std::string describe_shape(const CountMatrix& m);
std::string describe_rejections(const RejectionSummary& r);

// Output file names; `tag` is the period role ("a" or "b").
std::filesystem::path matrix_path(const std::filesystem::path& dir, const std::string& tag);
std::filesystem::path scan_path(const std::filesystem::path& dir, const std::string& tag);

void save_matrix(const std::filesystem::path& dir, const std::string& tag, const CountMatrix& m);

RankScanResult scan_matrix(const CountMatrix& m, const PipelineConfig& cfg);
void save_scan(const std::filesystem::path& dir, const std::string& tag, const RankScanResult& scan);

struct FactorizeOutcome {
  NmfConfig config;
  FactorPair pair;
  PatternSet patterns;
};

FactorizeOutcome factorize_matrix(const CountMatrix& m, int rank, const PipelineConfig& cfg);
void save_factorization(const std::filesystem::path& dir, const std::string& tag, const FactorizeOutcome& f,
                        const CountMatrix& m);

struct RunOutcome {
  IngestOutcome a;
  IngestOutcome b;
  RankScanResult scan_a;
  RankScanResult scan_b;
  FactorizeOutcome fact_a;
  FactorizeOutcome fact_b;
  ComparisonReport report;
};

// ingest -> normalize -> rank scan -> factorize -> extract -> compare ->
// export. On failure an INCOMPLETE marker naming the error is left in the
// output directory.
RunOutcome run_pipeline(const PipelineConfig& cfg, std::ostream& log);

struct SynthOutcome {
  PlantedData a;
  std::optional<PlantedData> b;
};

// Writes records_a.csv, planted_w_a.csv, planted_h_a.csv (and the _b files
// when a drop scenario is given) plus synth_summary.json.
SynthOutcome run_synth(const SyntheticSpec& spec, const std::optional<DropScenario>& drop,
                       const std::filesystem::path& out_dir);

// Process exit code for an error kind: 1 usage/config, 2 data, 3 numerical.
int exit_code_for(ErrorKind kind);

}  // namespace trafficnmf
