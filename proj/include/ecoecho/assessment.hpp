#pragma once

#include <array>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ecoecho/session.hpp"

namespace ecoecho::assessment {

inline constexpr int kMinVotes = 0;
inline constexpr int kMaxVotes = 5;
inline constexpr int kRounds = 4;

/// Records the pending round's petition vote. Throws OutOfRange for votes
/// outside 0-5 and WrongRound when `round` is not the pending round.
VoteRecord record_vote(SessionState& session, int round, int votes, Timestamp at);

struct VoteMatrix {
    std::vector<std::string> row_ids;
    std::vector<std::array<std::optional<int>, kRounds>> cells;

    std::size_t rows() const { return cells.size(); }
    /// Header `session_id,round1,round2,round3,round4`; absent cells are empty.
    std::string to_csv() const;
};

/// One row per session, in input order.
VoteMatrix voting_heatmap(std::span<const SessionState> sessions);

// --- survey scales ----------------------------------------------------------

enum class Phase { Pre, Post };
enum class Scale { NEP, GEB };

std::string_view to_string(Phase p) noexcept;
std::string_view to_string(Scale s) noexcept;
std::optional<Phase> phase_from_string(std::string_view s) noexcept;
std::optional<Scale> scale_from_string(std::string_view s) noexcept;

/// 11 attitude items for NEP, 6 behaviour items for GEB.
int item_count(Scale s) noexcept;

/// NEP: even-numbered items (2, 4, ..., 10) reverse-coded; GEB: none.
std::vector<bool> default_reverse_mask(Scale s);

struct SurveyResponse {
    std::string participant_id;
    Phase phase = Phase::Pre;
    Scale scale = Scale::NEP;
    std::vector<int> item_scores;  // 1-5 each
    std::vector<bool> reverse_mask;

    bool operator==(const SurveyResponse&) const = default;
};

/// Reverse-masked items map s -> 6 - s, then the arithmetic mean.
double score_scale(const SurveyResponse& r);

struct SurveyRowError {
    std::size_t line = 0;
    std::string message;
};

struct SurveyTable {
    std::vector<SurveyResponse> responses;
    std::vector<SurveyRowError> errors;
};

/// CSV header: `participant_id,phase,scale,item1,...,item11`. GEB rows leave
/// item7..item11 empty. Malformed rows are reported, not fatal.
SurveyTable parse_survey_csv(std::istream& in, const std::vector<bool>& nep_mask,
                             const std::vector<bool>& geb_mask);

struct PairedScores {
    std::vector<std::string> participants;
    std::vector<double> pre;
    std::vector<double> post;
};

/// Pairs each participant's pre and post scores for one scale, sorted by
/// participant id. Participants missing either phase are skipped.
PairedScores paired_scores(std::span<const SurveyResponse> responses, Scale scale);

} // namespace ecoecho::assessment
