#pragma once

#include "trafficnmf/ingest.hpp"
#include "trafficnmf/nmf.hpp"
#include "trafficnmf/patterns.hpp"

#include <iosfwd>
#include <string>

namespace trafficnmf {

// location_id,pattern_1..pattern_r
void write_location_factors(std::ostream& out, const FactorPair& pair, const MatrixLabels& labels);
// hour,pattern_1..pattern_r
void write_time_factors(std::ostream& out, const FactorPair& pair, const MatrixLabels& labels);
// JSON: loss trace, iteration count, convergence flag and the config used.
void write_diagnostics(std::ostream& out, const FactorPair& pair, const NmfConfig& cfg);

// hour,pattern_1..pattern_r with unit-max columns.
void write_temporal_patterns(std::ostream& out, const PatternSet& set);
// GeoJSON FeatureCollection, one Point per location carrying its per-pattern
// loadings and dominant pattern (1-based, like the column names).
void write_spatial_geojson(std::ostream& out, const PatternSet& set);

void write_report_json(std::ostream& out, const ComparisonReport& report);
void write_report_text(std::ostream& out, const ComparisonReport& report);

}  // namespace trafficnmf
