#include "ecoecho/analysis.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "ecoecho/error.hpp"

namespace ecoecho::analysis {

using nlohmann::json;
using assessment::Phase;
using assessment::Scale;

namespace {

template <typename T>
json opt(const std::optional<T>& v) {
    return v ? json(*v) : json(nullptr);
}

json error_json(const Error& e) { return {{"error", to_string(e.code())}, {"message", e.what()}}; }

std::vector<double> phase_scores(std::span<const assessment::SurveyResponse> rs, Scale scale, Phase phase) {
    std::vector<std::pair<std::string, double>> rows;
    for (const auto& r : rs)
        if (r.scale == scale && r.phase == phase) rows.emplace_back(r.participant_id, assessment::score_scale(r));
    std::sort(rows.begin(), rows.end());
    std::vector<double> out;
    for (const auto& [id, v] : rows) out.push_back(v);
    return out;
}

std::string fmt(double v, int prec = 3) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", prec, v);
    return buf;
}

} // namespace

json to_json(const stats::NormalityResult& r) {
    return {{"w", r.w}, {"p", r.p}, {"verdict", r.normal ? "Normal" : "Non-normal"}};
}

json to_json(const stats::Correlation& c) { return {{"r", c.r}, {"p", c.p}, {"n", c.n}}; }

json to_json(const stats::PairedTestReport& r) {
    json j{{"n", r.n},
           {"mean_pre", r.mean_pre},
           {"sd_pre", r.sd_pre},
           {"mean_post", r.mean_post},
           {"sd_post", r.sd_post},
           {"test", stats::to_string(r.test)},
           {"statistic", r.statistic},
           {"p_two_sided", r.p_two_sided},
           {"rationale", r.rationale}};
    if (r.test == stats::PairedTest::PairedT) {
        j["df"] = opt(r.df);
        j["mean_difference"] = opt(r.mean_difference);
        j["ci95"] = {opt(r.ci95_low), opt(r.ci95_high)};
        j["cohen_d"] = opt(r.cohen_d);
    } else {
        if (r.rank_counts)
            j["rank_counts"] = {{"positive", r.rank_counts->positive},
                                {"negative", r.rank_counts->negative},
                                {"ties", r.rank_counts->ties}};
        j["effective_n"] = opt(r.effective_n);
        j["w_plus"] = opt(r.w_plus);
        j["w_minus"] = opt(r.w_minus);
        j["z"] = opt(r.z);
        j["exact"] = r.exact;
    }
    if (r.normality_pre) j["normality_pre"] = to_json(*r.normality_pre);
    if (r.normality_post) j["normality_post"] = to_json(*r.normality_post);
    return j;
}

Report analyze(std::span<const std::vector<store::SessionEvent>> session_logs,
               const assessment::SurveyTable& surveys) {
    if (surveys.responses.empty())
        fail(ErrorCode::BadInput, "survey table has no valid responses (" + std::to_string(surveys.errors.size()) +
                                      " malformed rows)");
    Report report;
    json& body = report.body;

    std::vector<SessionState> states;
    for (const auto& log : session_logs)
        if (!log.empty()) states.push_back(store::replay_events(log));
    // Sessions that never voted have no heatmap row.
    std::vector<SessionState> voted;
    for (const auto& s : states)
        if (!s.votes.empty()) voted.push_back(s);
    report.heatmap = assessment::voting_heatmap(voted);
    body["sessions"] = states.size();
    body["heatmap"] = {{"rows", report.heatmap.rows()}, {"columns", assessment::kRounds}, {"file", "heatmap.csv"}};

    json errors = json::array();
    for (const auto& e : surveys.errors) errors.push_back({{"line", e.line}, {"message", e.message}});
    body["surveys"] = {{"responses", surveys.responses.size()}, {"row_errors", errors}};

    json normality = json::array();
    json tests = json::object();
    for (Scale scale : {Scale::NEP, Scale::GEB}) {
        const std::string name(assessment::to_string(scale));
        for (Phase phase : {Phase::Pre, Phase::Post}) {
            const auto scores = phase_scores(surveys.responses, scale, phase);
            json row{{"scale", name}, {"phase", assessment::to_string(phase)}, {"n", scores.size()}};
            try {
                row.update(to_json(stats::shapiro_wilk(scores)));
            } catch (const Error& e) {
                row.update(error_json(e));
            }
            normality.push_back(std::move(row));
        }
        const auto paired = assessment::paired_scores(surveys.responses, scale);
        json t{{"participants", paired.participants.size()}};
        try {
            t.update(to_json(stats::choose_paired_test(paired.pre, paired.post)));
        } catch (const Error& e) {
            t.update(error_json(e));
        }
        tests[name] = std::move(t);
    }
    body["normality"] = std::move(normality);
    body["paired_tests"] = std::move(tests);

    // Correlation across participants who answered both pre-test scales.
    std::map<std::string, std::pair<std::optional<double>, std::optional<double>>> pre;
    for (const auto& r : surveys.responses) {
        if (r.phase != Phase::Pre) continue;
        auto& slot = pre[r.participant_id];
        (r.scale == Scale::NEP ? slot.first : slot.second) = assessment::score_scale(r);
    }
    std::vector<double> nep, geb;
    for (const auto& [id, p] : pre)
        if (p.first && p.second) {
            nep.push_back(*p.first);
            geb.push_back(*p.second);
        }
    json corr{{"x", "NEP pre"}, {"y", "GEB pre"}};
    try {
        corr.update(to_json(stats::pearson(nep, geb)));
    } catch (const Error& e) {
        corr.update(error_json(e));
        corr["n"] = nep.size();
    }
    body["pearson"] = std::move(corr);
    return report;
}

std::string Report::to_text() const {
    std::ostringstream out;
    out << "Normality (Shapiro-Wilk)\n";
    out << "scale  phase  n    W      p      verdict\n";
    for (const auto& r : body.at("normality")) {
        out << r.at("scale").get<std::string>() << "    " << r.at("phase").get<std::string>()
            << (r.at("phase") == "pre" ? "    " : "   ") << r.at("n").get<int>() << "   ";
        if (r.contains("error")) out << r.at("error").get<std::string>() << "\n";
        else
            out << fmt(r.at("w").get<double>()) << "  " << fmt(r.at("p").get<double>()) << "  "
                << r.at("verdict").get<std::string>() << "\n";
    }
    out << "\nPaired tests\n";
    for (const auto& [scale, t] : body.at("paired_tests").items()) {
        out << scale << ": ";
        if (t.contains("error")) {
            out << t.at("error").get<std::string>() << "\n";
            continue;
        }
        out << t.at("test").get<std::string>() << ", statistic " << fmt(t.at("statistic").get<double>())
            << ", p " << fmt(t.at("p_two_sided").get<double>());
        if (t.contains("rank_counts")) {
            const auto& rc = t.at("rank_counts");
            out << ", ranks +" << rc.at("positive") << " -" << rc.at("negative") << " =" << rc.at("ties");
        }
        if (t.contains("cohen_d") && !t.at("cohen_d").is_null())
            out << ", d " << fmt(t.at("cohen_d").get<double>());
        out << "\n";
    }
    const auto& c = body.at("pearson");
    out << "\nPearson NEP pre vs GEB pre: ";
    if (c.contains("error")) out << c.at("error").get<std::string>() << "\n";
    else out << "r " << fmt(c.at("r").get<double>()) << ", p " << fmt(c.at("p").get<double>()) << "\n";
    out << "\nHeatmap: " << heatmap.rows() << " sessions x 4 rounds\n";
    return out.str();
}

void write_report(const Report& report, const std::filesystem::path& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) fail(ErrorCode::IoError, "cannot create " + out_dir.string() + ": " + ec.message());
    {
        std::ofstream f(out_dir / "report.json", std::ios::binary | std::ios::trunc);
        if (!f) fail(ErrorCode::IoError, "cannot write report.json");
        f << report.body.dump(2) << "\n";
    }
    std::ofstream f(out_dir / "heatmap.csv", std::ios::binary | std::ios::trunc);
    if (!f) fail(ErrorCode::IoError, "cannot write heatmap.csv");
    f << report.heatmap.to_csv();
}

} // namespace ecoecho::analysis
