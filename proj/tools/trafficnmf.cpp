// trafficnmf: spatio-temporal traffic pattern mining from vehicle-count tables.
#include "trafficnmf/error.hpp"
#include "trafficnmf/pipeline.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

using namespace trafficnmf;

// Raw flag values; only the flags the user actually passed override the config file.
struct Flags {
  std::string config;
  std::string input_a, input_b, label_a, label_b;
  std::string hours, ranks, init, scan_target, out, delimiter;
  int rank_a = 0, rank_b = 0, max_iters = 0, restarts = 0;
  std::uint64_t seed = 0;
  double tol = 0.0, threshold = 0.0;
  bool parallel = false, filter_period = false;

  std::map<std::string, CLI::Option*> opts;

  bool given(const std::string& name) const {
    auto it = opts.find(name);
    return it != opts.end() && it->second->count() > 0;
  }
};

void add_common(CLI::App* cmd, Flags& f, bool with_inputs, bool with_scan, bool with_ranks) {
  f.opts["config"] = cmd->add_option("--config", f.config, "JSON config file; flags override its values");
  if (with_inputs) {
    f.opts["input-a"] = cmd->add_option("--input-a", f.input_a, "Raw count records for the first period");
    f.opts["input-b"] = cmd->add_option("--input-b", f.input_b, "Raw count records for the second period");
    f.opts["label-a"] = cmd->add_option("--label-a", f.label_a, "Period label when the input has no year column");
    f.opts["label-b"] = cmd->add_option("--label-b", f.label_b, "Period label when the input has no year column");
    f.opts["filter-period"] =
        cmd->add_flag("--filter-period", f.filter_period, "Keep only rows whose year column equals the period label");
    f.opts["delimiter"] = cmd->add_option("--delimiter", f.delimiter, "Field delimiter (default ',')");
  }
  f.opts["hours"] = cmd->add_option("--hours", f.hours, "Inclusive hour-bin window, e.g. 7..18");
  f.opts["out"] = cmd->add_option("--out", f.out, "Output directory");
  if (with_scan) {
    f.opts["seed"] = cmd->add_option("--seed", f.seed, "Base random seed");
    f.opts["tol"] = cmd->add_option("--tol", f.tol, "Relative objective-change stopping threshold");
    f.opts["max-iters"] = cmd->add_option("--max-iters", f.max_iters, "Maximum multiplicative-update sweeps");
    f.opts["restarts"] = cmd->add_option("--restarts", f.restarts, "Random starts per factorization (best loss kept)");
    f.opts["init"] = cmd->add_option("--init", f.init, "Initialization: random-uniform or nndsvd");
  }
  if (with_ranks) {
    f.opts["ranks"] = cmd->add_option("--ranks", f.ranks, "Rank range to scan, e.g. 2..8");
    f.opts["scan-target"] =
        cmd->add_option("--scan-target", f.scan_target, "Dispersion points: raw-rows, location-factor, time-factor");
    f.opts["parallel"] = cmd->add_flag("--parallel", f.parallel, "Scan ranks on separate threads");
  }
}

PipelineConfig build_config(const Flags& f) {
  PipelineConfig cfg = f.given("config") ? load_config(f.config) : PipelineConfig{};
  if (f.given("input-a")) cfg.input_a = f.input_a;
  if (f.given("input-b")) cfg.input_b = f.input_b;
  if (f.given("label-a")) cfg.label_a = f.label_a;
  if (f.given("label-b")) cfg.label_b = f.label_b;
  if (f.given("filter-period")) cfg.filter_period = f.filter_period;
  if (f.given("delimiter")) {
    if (f.delimiter.size() != 1) throw Error(ErrorKind::InvalidConfig, "--delimiter must be one character");
    cfg.columns.delimiter = f.delimiter[0];
  }
  if (f.given("hours")) cfg.hours = HourWindow::parse(f.hours);
  if (f.given("ranks")) cfg.ranks = RankRange::parse(f.ranks);
  if (f.given("rank-a")) cfg.rank_a = f.rank_a;
  if (f.given("rank-b")) cfg.rank_b = f.rank_b;
  if (f.given("seed")) cfg.seed = f.seed;
  if (f.given("tol")) cfg.tol = f.tol;
  if (f.given("max-iters")) cfg.max_iters = f.max_iters;
  if (f.given("restarts")) cfg.restarts = f.restarts;
  if (f.given("init")) cfg.init = parse_init_method(f.init);
  if (f.given("scan-target")) cfg.scan_target = parse_scan_target(f.scan_target);
  if (f.given("threshold")) cfg.threshold = f.threshold;
  if (f.given("parallel")) cfg.parallel = f.parallel;
  if (f.given("out")) cfg.out_dir = f.out;
  cfg.validate();
  return cfg;
}

// A matrix table from `ingest`, or raw records ingested on the fly.
CountMatrix matrix_input(const std::string& matrix, const PipelineConfig& cfg) {
  if (!matrix.empty()) return load_matrix(matrix);
  if (cfg.input_a.empty()) throw Error(ErrorKind::MissingInput, "give --matrix or --input-a");
  auto ing = ingest_file(cfg.input_a, columns_for(cfg, cfg.label_a), cfg.label_a, cfg.hours);
  std::cout << describe_rejections(ing.rejections) << '\n';
  return std::move(ing.matrix);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spatio-temporal traffic pattern mining with nonnegative matrix factorization"};
  app.require_subcommand(1);

  Flags ingest_f, scan_f, fact_f, run_f, synth_f;
  std::string matrix, tag = "a";
  int fixed_rank = 0;

  auto* ingest = app.add_subcommand("ingest", "Build location x hour count matrices from raw records");
  add_common(ingest, ingest_f, true, false, false);

  auto* scan = app.add_subcommand("rank-scan", "Score candidate ranks by cluster dispersion");
  add_common(scan, scan_f, true, true, true);
  scan->add_option("--matrix", matrix, "Matrix table written by ingest");
  scan->add_option("--tag", tag, "Output file prefix")->capture_default_str();

  auto* fact = app.add_subcommand("factorize", "Factorize one period and export its patterns");
  add_common(fact, fact_f, true, true, false);
  fact->add_option("--matrix", matrix, "Matrix table written by ingest");
  fact->add_option("--tag", tag, "Output file prefix")->capture_default_str();
  fact_f.opts["rank-a"] = fact->add_option("--rank,--rank-a", fact_f.rank_a, "Factorization rank")->required();

  auto* run = app.add_subcommand("run", "Full two-period pipeline and comparison report");
  add_common(run, run_f, true, true, true);
  run_f.opts["rank-a"] = run->add_option("--rank-a", run_f.rank_a, "Fixed rank for the first period");
  run_f.opts["rank-b"] = run->add_option("--rank-b", run_f.rank_b, "Fixed rank for the second period");
  run_f.opts["threshold"] = run->add_option("--threshold", run_f.threshold, "Cosine threshold for pattern matching");

  auto* synth = app.add_subcommand("synth", "Generate planted-factor record files");
  SyntheticSpec spec;
  int drop = 0;
  double scale_b = 0.5;
  std::string synth_out = "synth", synth_hours = "7..18";
  synth->add_option("--n-locations", spec.n_locations, "Number of count points")->capture_default_str();
  synth->add_option("--hours", synth_hours, "Hour-bin window")->capture_default_str();
  synth->add_option("--planted-rank", spec.planted_rank, "Number of planted patterns")->capture_default_str();
  synth->add_option("--noise", spec.noise_level, "Relative Frobenius noise")->capture_default_str();
  synth->add_option("--seed", spec.seed, "Random seed")->capture_default_str();
  synth->add_option("--records-per-cell", spec.records_per_cell, "Records per location-hour")->capture_default_str();
  synth->add_option("--label-a", spec.period_label, "Period label of the first file")->capture_default_str();
  DropScenario scenario;
  auto* drop_opt = synth->add_option("--drop", drop, "Also emit a second period without the last N patterns");
  synth->add_option("--scale-b", scale_b, "Count scale of the second period")->capture_default_str();
  synth->add_option("--label-b", scenario.period_label, "Period label of the second file")->capture_default_str();
  synth->add_option("--out", synth_out, "Output directory")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*ingest) {
      auto cfg = build_config(ingest_f);
      if (cfg.input_a.empty()) throw Error(ErrorKind::MissingInput, "ingest needs --input-a");
      for (auto [tag_name, path, label] : {std::tuple{"a", cfg.input_a, cfg.label_a},
                                           std::tuple{"b", cfg.input_b, cfg.label_b}}) {
        if (path.empty()) continue;
        auto ing = ingest_file(path, columns_for(cfg, label), label, cfg.hours);
        save_matrix(cfg.out_dir, tag_name, ing.matrix);
        std::cout << tag_name << " (" << ing.matrix.labels.period_label << "): " << describe_shape(ing.matrix)
                  << '\n'
                  << "  " << describe_rejections(ing.rejections) << '\n';
      }
    } else if (*scan) {
      auto cfg = build_config(scan_f);
      const auto m = matrix_input(matrix, cfg);
      const auto result = scan_matrix(m, cfg);
      save_scan(cfg.out_dir, tag, result);
      std::cout << "rank  W_d  B_d  CH  loss\n";
      for (const auto& e : result.entries) {
        std::cout << e.rank << "  " << e.within_dispersion << "  " << e.between_dispersion << "  "
                  << (e.ch_score ? std::to_string(*e.ch_score) : "n/a") << "  " << e.final_loss << '\n';
      }
      for (int r : result.failed_ranks) std::cout << r << "  (failed)\n";
      std::cout << "recommended rank: " << result.recommended_rank << '\n';
    } else if (*fact) {
      auto cfg = build_config(fact_f);
      const auto m = matrix_input(matrix, cfg);
      const auto f = factorize_matrix(m, fact_f.rank_a, cfg);
      save_factorization(cfg.out_dir, tag, f, m);
      std::cout << describe_shape(m) << ", rank " << f.config.rank << ": " << f.pair.iterations_run
                << " iterations, final loss " << f.pair.final_loss() << (f.pair.converged ? " (converged)" : "")
                << '\n';
    } else if (*run) {
      auto cfg = build_config(run_f);
      run_pipeline(cfg, std::cout);
    } else if (*synth) {
      const auto window = HourWindow::parse(synth_hours);
      spec.first_hour = window.first;
      spec.n_hours = window.size();
      std::optional<DropScenario> second;
      if (drop_opt->count() > 0) {
        scenario.drop = drop;
        scenario.scale = scale_b;
        second = scenario;
      }
      const auto out = run_synth(spec, second, synth_out);
      std::cout << "a: " << out.a.records.size() << " records, measured noise " << out.a.measured_noise << '\n';
      if (out.b) std::cout << "b: " << out.b->records.size() << " records, measured noise " << out.b->measured_noise << '\n';
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
