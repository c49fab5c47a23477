#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "lfm/scenario.hpp"

namespace lfm {

struct ReportFormats {
    bool csv = true;
    bool json = true;
};

/// Shortest decimal that round-trips to the same double.
[[nodiscard]] std::string format_double(double v);

[[nodiscard]] std::string trade_log_csv(const RunReport& report);
[[nodiscard]] nlohmann::json trade_log_json(const RunReport& report);
[[nodiscard]] nlohmann::json snapshots_json(const RunReport& report);
[[nodiscard]] nlohmann::json assessments_json(const RunReport& report);
[[nodiscard]] nlohmann::json assessment_json(const PairAssessment& a);
[[nodiscard]] std::string summary_text(const RunReport& report, bool deterministic);

/// Writes the trade log (CSV and/or JSON), snapshots and assessment traces
/// (JSON) and summary.txt. Returns the files written.
std::vector<std::filesystem::path> report_write(const RunReport& report, const std::filesystem::path& out_dir,
                                                ReportFormats formats, bool deterministic);

/// Diagnostic dump: one row per (line end, bus) for k_sp and per (bus, bus) for k_up.
[[nodiscard]] std::string sensitivities_csv(const SensitivityBundle& bundle, std::size_t line_count);

/// Bound table for one assessed pair.
[[nodiscard]] std::string assessment_table(const PairAssessment& a);

}  // namespace lfm
