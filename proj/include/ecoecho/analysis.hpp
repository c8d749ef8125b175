#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ecoecho/assessment.hpp"
#include "ecoecho/session_store.hpp"
#include "ecoecho/stats.hpp"

namespace ecoecho::analysis {

nlohmann::json to_json(const stats::NormalityResult& r);
nlohmann::json to_json(const stats::PairedTestReport& r);
nlohmann::json to_json(const stats::Correlation& c);

struct Report {
    nlohmann::json body;
    assessment::VoteMatrix heatmap;

    std::string to_text() const;
};

/// Reproduces the pre/post procedure: Shapiro-Wilk per scale and phase, the
/// selected paired test per scale, Pearson NEP-pre vs GEB-pre, and the vote
/// heatmap over the given session logs. Sub-analyses that cannot run (too few
/// participants, zero variance) are reported with their error code instead of
/// aborting. Throws BadInput when the survey table has no valid responses.
Report analyze(std::span<const std::vector<store::SessionEvent>> session_logs,
               const assessment::SurveyTable& surveys);

/// Writes `report.json` and `heatmap.csv` into `out_dir`.
void write_report(const Report& report, const std::filesystem::path& out_dir);

} // namespace ecoecho::analysis
