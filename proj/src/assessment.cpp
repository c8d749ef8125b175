#include "ecoecho/assessment.hpp"

#include <algorithm>
#include <charconv>
#include <istream>
#include <map>
#include <sstream>

#include "ecoecho/error.hpp"
#include "ecoecho/text.hpp"

namespace ecoecho::assessment {

VoteRecord record_vote(SessionState& session, int round, int votes, Timestamp at) {
    if (votes < kMinVotes || votes > kMaxVotes)
        fail(ErrorCode::OutOfRange, "votes must be within 0-5, got " + std::to_string(votes));
    if (!session.pending_vote || *session.pending_vote != round) {
        const std::string pending =
            session.pending_vote ? std::to_string(*session.pending_vote) : std::string("none");
        fail(ErrorCode::WrongRound,
             "round " + std::to_string(round) + " is not open (pending: " + pending + ")");
    }
    VoteRecord rec{round, votes, session.stage, at};
    session.votes.push_back(rec);
    session.pending_vote.reset();
    return rec;
}

std::string VoteMatrix::to_csv() const {
    std::ostringstream out;
    out << "session_id,round1,round2,round3,round4\n";
    for (std::size_t r = 0; r < cells.size(); ++r) {
        out << row_ids[r];
        for (const auto& c : cells[r]) {
            out << ',';
            if (c) out << *c;
        }
        out << '\n';
    }
    return out.str();
}

VoteMatrix voting_heatmap(std::span<const SessionState> sessions) {
    VoteMatrix m;
    for (const auto& s : sessions) {
        std::array<std::optional<int>, kRounds> row{};
        for (const auto& v : s.votes)
            if (v.round >= 1 && v.round <= kRounds) row[v.round - 1] = v.votes;
        m.row_ids.push_back(s.session_id);
        m.cells.push_back(row);
    }
    return m;
}

std::string_view to_string(Phase p) noexcept { return p == Phase::Pre ? "pre" : "post"; }
std::string_view to_string(Scale s) noexcept { return s == Scale::NEP ? "NEP" : "GEB"; }

std::optional<Phase> phase_from_string(std::string_view s) noexcept {
    const std::string n = text::normalize(s);
    if (n == "pre") return Phase::Pre;
    if (n == "post") return Phase::Post;
    return std::nullopt;
}

std::optional<Scale> scale_from_string(std::string_view s) noexcept {
    const std::string n = text::normalize(s);
    if (n == "nep") return Scale::NEP;
    if (n == "geb") return Scale::GEB;
    return std::nullopt;
}

int item_count(Scale s) noexcept { return s == Scale::NEP ? 11 : 6; }

std::vector<bool> default_reverse_mask(Scale s) {
    std::vector<bool> mask(item_count(s), false);
    if (s == Scale::NEP)
        for (std::size_t i = 1; i < mask.size(); i += 2) mask[i] = true;
    return mask;
}

double score_scale(const SurveyResponse& r) {
    const auto n = static_cast<std::size_t>(item_count(r.scale));
    if (r.item_scores.size() != n)
        fail(ErrorCode::BadInput, std::string(to_string(r.scale)) + " expects " + std::to_string(n) +
                                      " items, got " + std::to_string(r.item_scores.size()));
    if (!r.reverse_mask.empty() && r.reverse_mask.size() != n)
        fail(ErrorCode::BadInput, "reverse mask length does not match item count");
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const int s = r.item_scores[i];
        if (s < 1 || s > 5) fail(ErrorCode::OutOfRange, "item score outside 1-5");
        const bool reversed = !r.reverse_mask.empty() && r.reverse_mask[i];
        sum += reversed ? 6 - s : s;
    }
    return sum / static_cast<double>(n);
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(text::trim(cur));
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(text::trim(cur));
    return out;
}

} // namespace

SurveyTable parse_survey_csv(std::istream& in, const std::vector<bool>& nep_mask,
                             const std::vector<bool>& geb_mask) {
    SurveyTable table;
    std::string line;
    std::size_t lineno = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (text::trim(line).empty()) continue;
        auto cols = split_csv_line(line);
        if (!header_seen) {
            header_seen = true;
            if (cols.size() < 3 || cols[0] != "participant_id" || cols[1] != "phase" ||
                cols[2] != "scale") {
                table.errors.push_back({lineno, "expected header participant_id,phase,scale,item1,..."});
                return table;
            }
            continue;
        }
        auto bad = [&](std::string msg) { table.errors.push_back({lineno, std::move(msg)}); };
        if (cols.size() < 3 || cols[0].empty()) {
            bad("missing participant_id, phase or scale");
            continue;
        }
        auto phase = phase_from_string(cols[1]);
        auto scale = scale_from_string(cols[2]);
        if (!phase) {
            bad("unknown phase '" + cols[1] + "'");
            continue;
        }
        if (!scale) {
            bad("unknown scale '" + cols[2] + "'");
            continue;
        }
        SurveyResponse r{cols[0], *phase, *scale, {}, *scale == Scale::NEP ? nep_mask : geb_mask};
        bool ok = true;
        const int want = item_count(*scale);
        for (std::size_t c = 3; c < cols.size(); ++c) {
            if (cols[c].empty()) continue;
            int v = 0;
            auto [ptr, ec] = std::from_chars(cols[c].data(), cols[c].data() + cols[c].size(), v);
            if (ec != std::errc{} || ptr != cols[c].data() + cols[c].size() || v < 1 || v > 5) {
                bad("item " + std::to_string(c - 2) + " is not an integer in 1-5: '" + cols[c] + "'");
                ok = false;
                break;
            }
            r.item_scores.push_back(v);
        }
        if (!ok) continue;
        if (static_cast<int>(r.item_scores.size()) != want) {
            bad(std::string(to_string(*scale)) + " row needs " + std::to_string(want) +
                " items, found " + std::to_string(r.item_scores.size()));
            continue;
        }
        table.responses.push_back(std::move(r));
    }
    if (!header_seen) table.errors.push_back({0, "survey file is empty"});
    return table;
}

PairedScores paired_scores(std::span<const SurveyResponse> responses, Scale scale) {
    std::map<std::string, std::pair<std::optional<double>, std::optional<double>>> by_id;
    for (const auto& r : responses) {
        if (r.scale != scale) continue;
        auto& slot = by_id[r.participant_id];
        (r.phase == Phase::Pre ? slot.first : slot.second) = score_scale(r);
    }
    PairedScores out;
    for (const auto& [id, pp] : by_id) {
        if (!pp.first || !pp.second) continue;
        out.participants.push_back(id);
        out.pre.push_back(*pp.first);
        out.post.push_back(*pp.second);
    }
    return out;
}

} // namespace ecoecho::assessment
