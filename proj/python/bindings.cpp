#include "trafficnmf/error.hpp"
#include "trafficnmf/exports.hpp"
#include "trafficnmf/ingest.hpp"
#include "trafficnmf/nmf.hpp"
#include "trafficnmf/patterns.hpp"
#include "trafficnmf/pipeline.hpp"
#include "trafficnmf/rank_select.hpp"
#include "trafficnmf/synth.hpp"

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

namespace py = pybind11;
using namespace trafficnmf;

namespace {

template <class T, class F>
std::string to_text(const T& value, F writer) {
  std::ostringstream out;
  writer(out, value);
  return out.str();
}

NmfConfig make_config(int rank, int max_iters, double tol, std::uint64_t seed, const std::string& init,
                      int restarts) {
  NmfConfig c;
  c.rank = rank;
  c.max_iters = max_iters;
  c.tol = tol;
  c.seed = seed;
  c.init = parse_init_method(init);
  c.restarts = restarts;
  return c;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "NMF-based spatio-temporal traffic pattern mining";

  // Raised for every library error; carries .kind (e.g. "MissingInput") and .detail.
  // Kept for the life of the process, like the module itself.
  static py::handle error_type = py::exception<Error>(m, "Error", PyExc_ValueError).release();
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = error_type(e.what());
      exc.attr("kind") = std::string(to_string(e.kind()));
      exc.attr("detail") = e.detail();
      PyErr_SetObject(error_type.ptr(), exc.ptr());
    }
  });

  // ingest
  py::class_<TrafficRecord>(m, "TrafficRecord")
      .def(py::init<>())
      .def_readwrite("location_id", &TrafficRecord::location_id)
      .def_readwrite("latitude", &TrafficRecord::latitude)
      .def_readwrite("longitude", &TrafficRecord::longitude)
      .def_readwrite("hour", &TrafficRecord::hour)
      .def_readwrite("count", &TrafficRecord::count)
      .def_readwrite("period_label", &TrafficRecord::period_label);

  py::class_<HourWindow>(m, "HourWindow")
      .def(py::init([](int first, int last) { return HourWindow{first, last}; }), py::arg("first") = 7,
           py::arg("last") = 18)
      .def_static("parse", &HourWindow::parse)
      .def_readwrite("first", &HourWindow::first)
      .def_readwrite("last", &HourWindow::last)
      .def("bins", &HourWindow::bins);

  py::class_<ColumnMapping>(m, "ColumnMapping")
      .def(py::init<>())
      .def_readwrite("location_id", &ColumnMapping::location_id)
      .def_readwrite("latitude", &ColumnMapping::latitude)
      .def_readwrite("longitude", &ColumnMapping::longitude)
      .def_readwrite("hour", &ColumnMapping::hour)
      .def_readwrite("count", &ColumnMapping::count)
      .def_readwrite("period", &ColumnMapping::period)
      .def_readwrite("delimiter", &ColumnMapping::delimiter)
      .def_readwrite("keep_period", &ColumnMapping::keep_period);

  py::class_<RejectionSummary>(m, "RejectionSummary")
      .def_readonly("rows_read", &RejectionSummary::rows_read)
      .def_readonly("rows_rejected", &RejectionSummary::rows_rejected)
      .def_readonly("rows_other_period", &RejectionSummary::rows_other_period)
      .def_readonly("by_reason", &RejectionSummary::by_reason)
      .def_readonly("sample_lines", &RejectionSummary::sample_lines);

  py::class_<LocationLabel>(m, "LocationLabel")
      .def_readonly("id", &LocationLabel::id)
      .def_readonly("latitude", &LocationLabel::latitude)
      .def_readonly("longitude", &LocationLabel::longitude);

  py::class_<MatrixLabels>(m, "MatrixLabels")
      .def_readonly("rows", &MatrixLabels::rows)
      .def_readonly("hours", &MatrixLabels::hours)
      .def_readonly("period_label", &MatrixLabels::period_label)
      .def_property_readonly("location_ids", [](const MatrixLabels& l) {
        std::vector<std::string> ids;
        for (const auto& r : l.rows) ids.push_back(r.id);
        return ids;
      });

  py::class_<CountMatrix>(m, "CountMatrix")
      .def_readonly("values", &CountMatrix::values)
      .def_readonly("labels", &CountMatrix::labels)
      .def_property_readonly("shape", [](const CountMatrix& c) { return py::make_tuple(c.rows(), c.cols()); })
      .def("total", &CountMatrix::total)
      .def("to_csv", [](const CountMatrix& c) { return to_text(c, write_count_matrix); })
      .def_static("from_csv", [](const std::string& text) {
        std::istringstream in(text);
        return read_count_matrix(in);
      });

  py::class_<NormalizedMatrix>(m, "NormalizedMatrix")
      .def_readonly("values", &NormalizedMatrix::values)
      .def_readonly("labels", &NormalizedMatrix::labels)
      .def_property_readonly("column_min",
                             [](const NormalizedMatrix& n) {
                               std::vector<double> v;
                               for (const auto& s : n.scaling_params) v.push_back(s.min);
                               return v;
                             })
      .def_property_readonly("column_max",
                             [](const NormalizedMatrix& n) {
                               std::vector<double> v;
                               for (const auto& s : n.scaling_params) v.push_back(s.max);
                               return v;
                             })
      .def("denormalize", &NormalizedMatrix::denormalize);

  m.def(
      "parse_records",
      [](const std::string& text, const ColumnMapping& columns, const std::string& default_period) {
        std::istringstream in(text);
        auto r = parse_records(in, columns, default_period);
        return py::make_tuple(std::move(r.records), std::move(r.rejections));
      },
      py::arg("text"), py::arg("columns") = ColumnMapping{}, py::arg("default_period") = "",
      "Parse CSV text into (records, rejection summary).");
  m.def("build_matrix", &build_matrix, py::arg("records"), py::arg("window") = HourWindow{});
  m.def("minmax_normalize", &minmax_normalize);
  m.def(
      "ingest_file",
      [](const std::filesystem::path& path, const ColumnMapping& columns, const std::string& label,
         const HourWindow& hours) {
        auto r = ingest_file(path, columns, label, hours);
        return py::make_tuple(std::move(r.matrix), std::move(r.rejections));
      },
      py::arg("path"), py::arg("columns") = ColumnMapping{}, py::arg("label") = "", py::arg("hours") = HourWindow{},
      "Read a raw-count file into (count matrix, rejection summary).");

  // nmf
  py::class_<NmfConfig>(m, "NmfConfig")
      .def(py::init(&make_config), py::arg("rank") = 1, py::arg("max_iters") = 500, py::arg("tol") = 1e-5,
           py::arg("seed") = 0, py::arg("init") = "random-uniform", py::arg("restarts") = 1)
      .def_readwrite("rank", &NmfConfig::rank)
      .def_readwrite("max_iters", &NmfConfig::max_iters)
      .def_readwrite("tol", &NmfConfig::tol)
      .def_readwrite("seed", &NmfConfig::seed)
      .def_readwrite("restarts", &NmfConfig::restarts)
      .def_property(
          "init", [](const NmfConfig& c) { return to_string(c.init); },
          [](NmfConfig& c, const std::string& s) { c.init = parse_init_method(s); });

  py::class_<FactorPair>(m, "FactorPair")
      .def_readonly("w", &FactorPair::w)
      .def_readonly("h", &FactorPair::h)
      .def_readonly("objective_trace", &FactorPair::objective_trace)
      .def_readonly("converged", &FactorPair::converged)
      .def_readonly("iterations_run", &FactorPair::iterations_run)
      .def_property_readonly("rank", &FactorPair::rank)
      .def_property_readonly("final_loss", &FactorPair::final_loss)
      .def("diagnostics_json",
           [](const FactorPair& p, const NmfConfig& c) {
             std::ostringstream out;
             write_diagnostics(out, p, c);
             return out.str();
           });

  m.def(
      "factorize",
      [](const Eigen::MatrixXd& x, int rank, int max_iters, double tol, std::uint64_t seed, const std::string& init,
         int restarts) {
        py::gil_scoped_release release;
        return factorize(x, make_config(rank, max_iters, tol, seed, init, restarts));
      },
      py::arg("x"), py::arg("rank"), py::arg("max_iters") = 500, py::arg("tol") = 1e-5, py::arg("seed") = 0,
      py::arg("init") = "random-uniform", py::arg("restarts") = 1,
      "Multiplicative-update NMF: x ~ w @ h.T with nonnegative w and h.");
  m.def(
      "factorize_observed",
      [](const Eigen::MatrixXd& x, const NmfConfig& cfg,
         const std::function<void(int, const Eigen::MatrixXd&, const Eigen::MatrixXd&, double)>& observer) {
        return factorize(x, cfg, observer);
      },
      py::arg("x"), py::arg("config"), py::arg("observer"),
      "Single run calling observer(iteration, w, h, loss) after init and every sweep.");
  m.def("reconstruction_error", &reconstruction_error);

  // rank selection
  py::class_<ClusterAssignment>(m, "ClusterAssignment")
      .def(py::init([](std::vector<int> labels, int k) {
             ClusterAssignment a;
             a.labels = std::move(labels);
             a.k = k;
             return a;
           }),
           py::arg("labels"), py::arg("k"))
      .def_readonly("labels", &ClusterAssignment::labels)
      .def_readonly("k", &ClusterAssignment::k)
      .def("occupied", &ClusterAssignment::occupied);

  m.def("assign_clusters",
        [](const Eigen::MatrixXd& factor) { return assign_clusters(factor, FactorSource::Location); });
  m.def("within_dispersion", &within_dispersion);
  m.def("between_dispersion", &between_dispersion);
  m.def("total_scatter", &total_scatter);
  m.def("calinski_harabasz", &calinski_harabasz);

  py::class_<RankScanEntry>(m, "RankScanEntry")
      .def_readonly("rank", &RankScanEntry::rank)
      .def_readonly("within_dispersion", &RankScanEntry::within_dispersion)
      .def_readonly("between_dispersion", &RankScanEntry::between_dispersion)
      .def_readonly("ch_score", &RankScanEntry::ch_score)
      .def_readonly("final_loss", &RankScanEntry::final_loss)
      .def_readonly("occupied_clusters", &RankScanEntry::occupied_clusters);

  py::class_<RankScanResult>(m, "RankScanResult")
      .def_readonly("entries", &RankScanResult::entries)
      .def_readonly("failed_ranks", &RankScanResult::failed_ranks)
      .def_readonly("recommended_rank", &RankScanResult::recommended_rank)
      .def_property_readonly("target", [](const RankScanResult& r) { return to_string(r.target); })
      .def("to_csv", [](const RankScanResult& r) { return to_text(r, write_rank_scan); });

  m.def(
      "rank_scan",
      [](const Eigen::MatrixXd& x, int first, int last, const NmfConfig& cfg, const std::string& target,
         bool parallel) {
        const auto t = parse_scan_target(target);
        py::gil_scoped_release release;
        return rank_scan(x, RankRange{first, last}, cfg, t, parallel);
      },
      py::arg("x"), py::arg("first") = 2, py::arg("last") = 8, py::arg("config") = NmfConfig{},
      py::arg("target") = "raw-rows", py::arg("parallel") = false,
      "Factorize at each rank in [first, last] and recommend the max-CH rank.");

  // patterns
  py::class_<PatternSet>(m, "PatternSet")
      .def_readonly("temporal", &PatternSet::temporal)
      .def_readonly("spatial", &PatternSet::spatial)
      .def_readonly("labels", &PatternSet::labels)
      .def_readonly("column_norms", &PatternSet::column_norms)
      .def_readonly("hour_scales", &PatternSet::hour_scales)
      .def_property_readonly("rank", &PatternSet::rank)
      .def("count_scale_temporal", &PatternSet::count_scale_temporal)
      .def("temporal_csv", [](const PatternSet& s) { return to_text(s, write_temporal_patterns); })
      .def("spatial_geojson", [](const PatternSet& s) { return to_text(s, write_spatial_geojson); });

  m.def("extract_patterns", py::overload_cast<const FactorPair&, const NormalizedMatrix&>(&extract_patterns));
  m.def("extract_patterns", py::overload_cast<const FactorPair&, const MatrixLabels&>(&extract_patterns));

  py::class_<MatchedPair>(m, "MatchedPair")
      .def_readonly("a", &MatchedPair::a)
      .def_readonly("b", &MatchedPair::b)
      .def_readonly("similarity", &MatchedPair::similarity);

  py::class_<PatternMatch>(m, "PatternMatch")
      .def_readonly("pairs", &PatternMatch::pairs)
      .def_readonly("unmatched_a", &PatternMatch::unmatched_a)
      .def_readonly("unmatched_b", &PatternMatch::unmatched_b)
      .def_readonly("threshold", &PatternMatch::threshold);

  m.def("cosine_similarity", &cosine_similarity);
  m.def("match_patterns", &match_patterns, py::arg("a"), py::arg("b"), py::arg("threshold") = kDefaultMatchThreshold);
  m.def("peak_hour", &peak_hour);
  m.def("dominant_pattern_counts", &dominant_pattern_counts);

  py::class_<PairNote>(m, "PairNote")
      .def_readonly("a", &PairNote::a)
      .def_readonly("b", &PairNote::b)
      .def_readonly("similarity", &PairNote::similarity)
      .def_readonly("peak_hour_a", &PairNote::peak_hour_a)
      .def_readonly("peak_hour_b", &PairNote::peak_hour_b)
      .def_readonly("peak_shift", &PairNote::peak_shift);

  py::class_<ComparisonReport>(m, "ComparisonReport")
      .def_readonly("match", &ComparisonReport::match)
      .def_readonly("period_a", &ComparisonReport::period_a)
      .def_readonly("period_b", &ComparisonReport::period_b)
      .def_readonly("rank_a", &ComparisonReport::rank_a)
      .def_readonly("rank_b", &ComparisonReport::rank_b)
      .def_readonly("total_a", &ComparisonReport::total_a)
      .def_readonly("total_b", &ComparisonReport::total_b)
      .def_readonly("total_reduction_pct", &ComparisonReport::total_reduction_pct)
      .def_readonly("per_pattern_notes", &ComparisonReport::per_pattern_notes)
      .def_readonly("dominant_counts_a", &ComparisonReport::dominant_counts_a)
      .def_readonly("dominant_counts_b", &ComparisonReport::dominant_counts_b)
      .def("to_json", [](const ComparisonReport& r) { return to_text(r, write_report_json); })
      .def("to_text", [](const ComparisonReport& r) { return to_text(r, write_report_text); });

  m.def("compare_periods", &compare_periods, py::arg("raw_a"), py::arg("raw_b"), py::arg("match"), py::arg("set_a"),
        py::arg("set_b"));

  // synthetic data
  py::class_<SyntheticSpec>(m, "SyntheticSpec")
      .def(py::init<>())
      .def_readwrite("n_locations", &SyntheticSpec::n_locations)
      .def_readwrite("n_hours", &SyntheticSpec::n_hours)
      .def_readwrite("first_hour", &SyntheticSpec::first_hour)
      .def_readwrite("planted_rank", &SyntheticSpec::planted_rank)
      .def_readwrite("noise_level", &SyntheticSpec::noise_level)
      .def_readwrite("seed", &SyntheticSpec::seed)
      .def_readwrite("records_per_cell", &SyntheticSpec::records_per_cell)
      .def_readwrite("period_label", &SyntheticSpec::period_label);

  py::class_<DropScenario>(m, "DropScenario")
      .def(py::init<>())
      .def_readwrite("drop", &DropScenario::drop)
      .def_readwrite("scale", &DropScenario::scale)
      .def_readwrite("period_label", &DropScenario::period_label);

  py::class_<PlantedData>(m, "PlantedData")
      .def_readonly("w0", &PlantedData::w0)
      .def_readonly("h0", &PlantedData::h0)
      .def_readonly("product", &PlantedData::product)
      .def_readonly("counts", &PlantedData::counts)
      .def_readonly("measured_noise", &PlantedData::measured_noise)
      .def_readonly("labels", &PlantedData::labels)
      .def_readonly("records", &PlantedData::records);

  m.def("generate_planted", &generate_planted);
  m.def("derive_dropped_period", &derive_dropped_period);
  m.def(
      "run_synth",
      [](const SyntheticSpec& spec, std::optional<DropScenario> drop, const std::filesystem::path& out) {
        auto r = run_synth(spec, drop, out);
        return py::make_tuple(std::move(r.a), std::move(r.b));
      },
      py::arg("spec"), py::arg("drop") = py::none(), py::arg("out"));

  // pipeline
  py::class_<PipelineConfig>(m, "PipelineConfig")
      .def(py::init<>())
      .def_static("load", &load_config)
      .def("apply_json", &apply_config_json)
      .def("validate", &PipelineConfig::validate)
      .def_readwrite("input_a", &PipelineConfig::input_a)
      .def_readwrite("input_b", &PipelineConfig::input_b)
      .def_readwrite("label_a", &PipelineConfig::label_a)
      .def_readwrite("label_b", &PipelineConfig::label_b)
      .def_readwrite("columns", &PipelineConfig::columns)
      .def_readwrite("filter_period", &PipelineConfig::filter_period)
      .def_readwrite("hours", &PipelineConfig::hours)
      .def_property(
          "ranks", [](const PipelineConfig& c) { return py::make_tuple(c.ranks.first, c.ranks.last); },
          [](PipelineConfig& c, std::pair<int, int> r) { c.ranks = RankRange{r.first, r.second}; })
      .def_readwrite("rank_a", &PipelineConfig::rank_a)
      .def_readwrite("rank_b", &PipelineConfig::rank_b)
      .def_readwrite("seed", &PipelineConfig::seed)
      .def_readwrite("tol", &PipelineConfig::tol)
      .def_readwrite("max_iters", &PipelineConfig::max_iters)
      .def_readwrite("restarts", &PipelineConfig::restarts)
      .def_property(
          "init", [](const PipelineConfig& c) { return to_string(c.init); },
          [](PipelineConfig& c, const std::string& s) { c.init = parse_init_method(s); })
      .def_property(
          "scan_target", [](const PipelineConfig& c) { return to_string(c.scan_target); },
          [](PipelineConfig& c, const std::string& s) { c.scan_target = parse_scan_target(s); })
      .def_readwrite("threshold", &PipelineConfig::threshold)
      .def_readwrite("parallel", &PipelineConfig::parallel)
      .def_readwrite("out_dir", &PipelineConfig::out_dir);

  py::class_<FactorizeOutcome>(m, "FactorizeOutcome")
      .def_readonly("config", &FactorizeOutcome::config)
      .def_readonly("pair", &FactorizeOutcome::pair)
      .def_readonly("patterns", &FactorizeOutcome::patterns);

  py::class_<RunOutcome>(m, "RunOutcome")
      .def_property_readonly("matrix_a", [](const RunOutcome& r) { return r.a.matrix; })
      .def_property_readonly("matrix_b", [](const RunOutcome& r) { return r.b.matrix; })
      .def_readonly("scan_a", &RunOutcome::scan_a)
      .def_readonly("scan_b", &RunOutcome::scan_b)
      .def_readonly("fact_a", &RunOutcome::fact_a)
      .def_readonly("fact_b", &RunOutcome::fact_b)
      .def_readonly("report", &RunOutcome::report);

  m.def(
      "run_pipeline",
      [](const PipelineConfig& cfg) {
        std::ostringstream log;
        RunOutcome r;
        {
          py::gil_scoped_release release;
          r = run_pipeline(cfg, log);
        }
        return py::make_tuple(std::move(r), log.str());
      },
      py::arg("config"), "Run ingest, scan, factorize and compare; returns (outcome, log text).");
  m.def("exit_code_for", [](const std::string& kind) {
    for (int k = 0; k <= static_cast<int>(ErrorKind::NumericalFailure); ++k) {
      if (to_string(static_cast<ErrorKind>(k)) == kind) return exit_code_for(static_cast<ErrorKind>(k));
    }
    throw py::value_error("unknown error kind '" + kind + "'");
  });
}
