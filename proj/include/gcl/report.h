#pragma once

// Run reports as one self-describing JSON document plus flat CSV series, and
// per-fold parameter checkpoints.

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "gcl/trainer.h"

namespace gcl {

using Json = nlohmann::ordered_json;

Json metrics_to_json(const TaskMetrics& m);
TaskMetrics metrics_from_json(const Json& j);
Json governance_to_json(const GovernanceDiagnostics& g);
GovernanceDiagnostics governance_from_json(const Json& j);

// Timing fields live under "timing"; everything else is the report body.
Json report_to_json(const RunReport& r, bool include_timing = true);
// Throws FormatError for a missing field or a foreign format tag.
RunReport report_from_json(const Json& j);

// Serialised report without the timing block; identical for identical runs.
std::string report_body(const RunReport& r);

// Writes `<path>.tmp` then renames over `path`. Throws IoError.
void write_atomic(const std::filesystem::path& path, const std::string& text);

// report.json plus losses.csv, folds.csv and governance.csv in `dir`.
void emit_report(const RunReport& r, const std::filesystem::path& dir);
RunReport load_report(const std::filesystem::path& path);

// Parameter values of every trained fold; failed folds are null.
void save_checkpoint(const TrainedRun& run, const std::filesystem::path& path);
std::vector<std::vector<Matrix>> load_checkpoint(const std::filesystem::path& path);

// CSV cell for an optional value: "NA" when missing.
std::string csv_cell(const MaybeReal& v);
std::string csv_cell(double v);
extern const char* const kMetricColumns;  // header fragment matching metric_cells
std::string metric_cells(const TaskMetrics& m, const GovernanceDiagnostics& g);

}  // namespace gcl
