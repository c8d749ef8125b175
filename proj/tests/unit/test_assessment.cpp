#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <random>
#include <sstream>

#include "ecoecho/analysis.hpp"
#include "ecoecho/assessment.hpp"
#include "ecoecho/error.hpp"
#include "ecoecho/game_state.hpp"
#include "support.hpp"

using namespace ecoecho;
using namespace ecoecho::assessment;

namespace {

template <typename Fn>
ErrorCode code_of(Fn&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an ecoecho::Error");
    return ErrorCode::BadInput;
}

SurveyTable sample_table() {
    std::ifstream in(testing::data_path("surveys/sample_surveys.csv"));
    return parse_survey_csv(in, default_reverse_mask(Scale::NEP), default_reverse_mask(Scale::GEB));
}

} // namespace

TEST_CASE("record_vote") {
    auto s = new_session(*testing::ecoecho_scenario(), "v1", 0);
    REQUIRE(s.pending_vote == 1);

    SUBCASE("round 1, votes 3 is stored") {
        const auto rec = record_vote(s, 1, 3, 42);
        CHECK(rec.round == 1);
        CHECK(rec.votes == 3);
        CHECK(rec.stage_at_vote == Stage::Opening);
        CHECK(s.votes.size() == 1);
        CHECK_FALSE(s.pending_vote);
    }
    SUBCASE("votes outside 0-5") {
        CHECK(code_of([&] { record_vote(s, 1, 6, 0); }) == ErrorCode::OutOfRange);
        CHECK(code_of([&] { record_vote(s, 1, -1, 0); }) == ErrorCode::OutOfRange);
        CHECK(s.votes.empty());
    }
    SUBCASE("zero and five are accepted") {
        CHECK(record_vote(s, 1, 0, 0).votes == 0);
        auto t = new_session(*testing::ecoecho_scenario(), "v2", 0);
        CHECK(record_vote(t, 1, 5, 0).votes == 5);
    }
    SUBCASE("round 2 before Return1") {
        CHECK(code_of([&] { record_vote(s, 2, 3, 0); }) == ErrorCode::WrongRound);
    }
    SUBCASE("second vote in the same round") {
        record_vote(s, 1, 3, 0);
        CHECK(code_of([&] { record_vote(s, 1, 3, 0); }) == ErrorCode::WrongRound);
    }
}

TEST_CASE("voting_heatmap") {
    SUBCASE("empty input") {
        const auto m = voting_heatmap({});
        CHECK(m.rows() == 0);
        CHECK(m.to_csv() == "session_id,round1,round2,round3,round4\n");
    }
    SUBCASE("partial session has absent cells") {
        SessionState s;
        s.session_id = "p";
        s.votes = {{1, 4, Stage::Opening, 0}, {2, 0, Stage::Return1, 0}};
        const std::vector<SessionState> v{s};
        const auto m = voting_heatmap(v);
        REQUIRE(m.rows() == 1);
        CHECK(m.cells[0][0] == 4);
        CHECK(m.cells[0][1] == 0);
        CHECK_FALSE(m.cells[0][2]);
        CHECK_FALSE(m.cells[0][3]);
        CHECK(m.to_csv() == "session_id,round1,round2,round3,round4\np,4,0,,\n");
    }
    SUBCASE("23 complete sessions") {
        std::mt19937 rng(7);
        std::uniform_int_distribution<int> vote(0, 5);
        std::vector<SessionState> sessions;
        for (int i = 0; i < 23; ++i) {
            SessionState s;
            s.session_id = "s" + std::to_string(i);
            for (int r = 1; r <= 4; ++r) s.votes.push_back({r, vote(rng), stage_for_round(r), 0});
            sessions.push_back(s);
        }
        const auto m = voting_heatmap(sessions);
        CHECK(m.rows() == 23);
        for (std::size_t i = 0; i < m.rows(); ++i) {
            CHECK(m.row_ids[i] == sessions[i].session_id);
            for (const auto& c : m.cells[i]) {
                REQUIRE(c);
                CHECK(*c >= 0);
                CHECK(*c <= 5);
            }
        }
    }
}

TEST_CASE("score_scale") {
    SurveyResponse r{"p", Phase::Pre, Scale::NEP, std::vector<int>(11, 3), default_reverse_mask(Scale::NEP)};
    CHECK(score_scale(r) == 3.0);
    r.reverse_mask.clear();
    CHECK(score_scale(r) == 3.0);

    SurveyResponse geb{"p", Phase::Post, Scale::GEB, std::vector<int>(6, 5), {}};
    CHECK(score_scale(geb) == 5.0);

    std::vector<int> items(11, 5);
    items[1] = 1;
    std::vector<bool> only2(11, false);
    only2[1] = true;
    SurveyResponse reversed{"p", Phase::Pre, Scale::NEP, items, only2};
    SurveyResponse plain{"p", Phase::Pre, Scale::NEP, std::vector<int>(11, 5), {}};
    CHECK(score_scale(reversed) == score_scale(plain));
}

TEST_CASE("score_scale is invariant under flipping a score together with its mask bit") {
    std::mt19937 rng(99);
    std::uniform_int_distribution<int> score(1, 5);
    std::bernoulli_distribution coin(0.5);
    for (int trial = 0; trial < 200; ++trial) {
        const Scale scale = coin(rng) ? Scale::NEP : Scale::GEB;
        const auto n = static_cast<std::size_t>(item_count(scale));
        SurveyResponse r{"p", Phase::Pre, scale, {}, {}};
        for (std::size_t i = 0; i < n; ++i) {
            r.item_scores.push_back(score(rng));
            r.reverse_mask.push_back(coin(rng));
        }
        auto flipped = r;
        const std::size_t k = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
        flipped.item_scores[k] = 6 - flipped.item_scores[k];
        flipped.reverse_mask[k] = !flipped.reverse_mask[k];
        CHECK(score_scale(flipped) == score_scale(r));
    }
}

TEST_CASE("survey CSV parsing reports malformed rows") {
    std::istringstream in(
        "participant_id,phase,scale,item1,item2,item3,item4,item5,item6,item7,item8,item9,item10,item11\n"
        "A,pre,GEB,1,2,3,4,5,5,,,,,\n"
        "A,middle,GEB,1,2,3,4,5,5,,,,,\n"
        "B,post,NEP,1,2,3\n"
        "C,pre,GEB,1,2,3,4,5,9,,,,,\n"
        "D,pre,NEP,3,3,3,3,3,3,3,3,3,3,3\n");
    const auto t = parse_survey_csv(in, default_reverse_mask(Scale::NEP), default_reverse_mask(Scale::GEB));
    CHECK(t.responses.size() == 2);
    REQUIRE(t.errors.size() == 3);
    CHECK(t.errors[0].line == 3);
    CHECK(t.errors[1].line == 4);
    CHECK(t.errors[2].line == 5);

    std::istringstream empty("");
    const auto e = parse_survey_csv(empty, {}, {});
    CHECK(e.responses.empty());
    CHECK(e.errors.size() == 1);
}

TEST_CASE("paired_scores pairs by participant and skips incomplete ones") {
    std::vector<SurveyResponse> rs{
        {"b", Phase::Post, Scale::GEB, std::vector<int>(6, 4), {}},
        {"a", Phase::Pre, Scale::GEB, std::vector<int>(6, 2), {}},
        {"b", Phase::Pre, Scale::GEB, std::vector<int>(6, 3), {}},
        {"a", Phase::Post, Scale::GEB, std::vector<int>(6, 5), {}},
        {"c", Phase::Pre, Scale::GEB, std::vector<int>(6, 5), {}},
    };
    const auto p = paired_scores(rs, Scale::GEB);
    CHECK(p.participants == std::vector<std::string>{"a", "b"});
    CHECK(p.pre == std::vector<double>{2, 3});
    CHECK(p.post == std::vector<double>{5, 4});
}

TEST_CASE("analysis on the sample surveys") {
    const auto table = sample_table();
    REQUIRE(table.errors.empty());
    CHECK(table.responses.size() == 92);

    const auto report = analysis::analyze({}, table);
    const auto& b = report.body;
    CHECK(b["paired_tests"]["NEP"]["test"] == "paired_t");
    CHECK(b["paired_tests"]["GEB"]["test"] == "wilcoxon_signed_rank");
    CHECK(b["paired_tests"]["GEB"]["normality_post"]["verdict"] == "Non-normal");
    const auto& rc = b["paired_tests"]["GEB"]["rank_counts"];
    CHECK(rc["positive"].get<int>() + rc["negative"].get<int>() + rc["ties"].get<int>() == 23);
    CHECK(b["pearson"]["n"] == 23);
    CHECK(b["normality"].size() == 4);
    CHECK(report.heatmap.rows() == 0);

    // Same inputs, same bytes.
    CHECK(analysis::analyze({}, table).body.dump() == b.dump());
    CHECK_FALSE(report.to_text().empty());
}

TEST_CASE("analysis errors") {
    CHECK(code_of([] { analysis::analyze({}, SurveyTable{}); }) == ErrorCode::BadInput);

    // Too few participants is reported inside the report, not thrown.
    std::istringstream in(
        "participant_id,phase,scale,item1,item2,item3,item4,item5,item6\n"
        "A,pre,GEB,1,2,3,4,5,5\n"
        "A,post,GEB,2,2,3,4,5,5\n");
    const auto t = parse_survey_csv(in, default_reverse_mask(Scale::NEP), default_reverse_mask(Scale::GEB));
    const auto r = analysis::analyze({}, t);
    CHECK(r.body["paired_tests"]["GEB"]["error"] == "sample_too_small");
    CHECK(r.body["normality"][2]["error"] == "sample_too_small");
}

TEST_CASE("write_report writes the JSON report and heatmap CSV") {
    testing::TempDir dir;
    const auto report = analysis::analyze({}, sample_table());
    analysis::write_report(report, dir.path() / "out");
    CHECK(std::filesystem::exists(dir.path() / "out/report.json"));
    std::ifstream csv(dir.path() / "out/heatmap.csv");
    std::string header;
    std::getline(csv, header);
    CHECK(header == "session_id,round1,round2,round3,round4");
}
