#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "smoe/evaluator.hpp"

namespace smoe {

// Full report: thresholds, aggregate and per-image counts, per-image best
// records and the ODS/OIS/AP summary.
std::string report_to_json(const EvalReport& report);
// Rebuilds a report from its JSON form by re-running summarize() on the
// stored per-image counts.
EvalReport report_from_json(const std::string& text);

void write_report_json(const std::filesystem::path& path, const EvalReport& report);
// Header `threshold,precision,recall,f`, one row per threshold.
void write_report_csv(const std::filesystem::path& path, const EvalReport& report);

// Precision (y) against recall (x) on a white canvas with a 0.1 grid and
// iso-F contours at F = 0.1..0.9. Each report is drawn in the next palette
// colour with a filled dot at its ODS point.
void write_pr_plot(const std::filesystem::path& path, const std::vector<const EvalReport*>& reports,
                   std::size_t size_px = 480);

}  // namespace smoe
