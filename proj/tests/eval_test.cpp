#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "dyad/eval.hpp"
#include "dyad/rng.hpp"

using namespace dyad;
using namespace dyad::eval;

namespace {

ConfusionMatrix cm_from(const std::array<std::array<long, 3>, 3>& rows) {
    ConfusionMatrix cm;
    cm.m = rows;
    return cm;
}

SessionOutcomes session_of(const std::string& id, const std::vector<BehaviorClass>& truths,
                           const std::vector<BehaviorClass>& preds) {
    SessionOutcomes so;
    so.session_id = id;
    for (size_t i = 0; i < truths.size(); ++i)
        so.turns.push_back({static_cast<int>(i), "spk", truths[i], preds[i]});
    return so;
}

constexpr BehaviorClass H = BehaviorClass::Hostile;
constexpr BehaviorClass C = BehaviorClass::Constructive;
constexpr BehaviorClass P = BehaviorClass::Positive;

// independent window-scan oracle used by the property test
ConfusionMatrix brute_force_windowed(const std::vector<SessionOutcomes>& sessions, int w) {
    int tol = (w - 1) / 2;
    ConfusionMatrix cm;
    for (const auto& s : sessions) {
        for (size_t i = 0; i < s.turns.size(); ++i) {
            const auto& t = s.turns[i];
            bool target = t.truth == H || t.truth == P;
            bool hit = false;
            for (size_t j = 0; j < s.turns.size(); ++j)
                if (std::abs(s.turns[j].turn_index - t.turn_index) <= tol &&
                    s.turns[j].pred == t.truth)
                    hit = true;
            if (target && hit) cm.add(t.truth, t.truth);
            else cm.add(t.truth, t.pred);
        }
    }
    return cm;
}

}  // namespace

TEST_CASE("uar of a diagonal matrix is 1") {
    CHECK(uar(cm_from({{{4, 0, 0}, {0, 9, 0}, {0, 0, 2}}})) == 1.0);
}

TEST_CASE("uar averages per-class recalls") {
    // recalls 0.8, 0.5, 0.75
    auto cm = cm_from({{{8, 1, 1}, {2, 2, 0}, {1, 0, 3}}});
    CHECK(uar(cm) == doctest::Approx((0.8 + 0.5 + 0.75) / 3.0).epsilon(1e-12));
    CHECK(uar(cm) == doctest::Approx(0.6833).epsilon(1e-4));
}

TEST_CASE("absent classes are excluded from the average") {
    // no Hostile truths; recalls (-, 0.9, 0.5)
    ConfusionMatrix cm;
    cm.add(C, C, 9);
    cm.add(C, H, 1);
    cm.add(P, P, 2);
    cm.add(P, C, 2);
    CHECK(uar(cm) == doctest::Approx((0.9 + 0.5) / 2.0).epsilon(1e-12));

    // dropping the absent row/column entirely gives the same value
    double manual = ((9.0 / 10.0) + (2.0 / 4.0)) / 2.0;
    CHECK(uar(cm) == doctest::Approx(manual).epsilon(1e-12));
}

TEST_CASE("uar rejects an all-zero matrix") {
    CHECK_THROWS_AS(uar(ConfusionMatrix()), ValidationError);
}

TEST_CASE("chance uar: balanced classes and uniform priors sit at one third") {
    std::vector<BehaviorClass> fold;
    for (int i = 0; i < 10; ++i) {
        fold.push_back(H);
        fold.push_back(C);
        fold.push_back(P);
    }
    auto result = chance_uar({fold}, {1.0 / 3, 1.0 / 3, 1.0 / 3}, 20000, 42);
    CHECK(std::abs(result.mean - 1.0 / 3.0) <= 0.01);
    CHECK(result.stddev > 0.0);
}

TEST_CASE("chance uar: single-class fold equals that class's prior") {
    std::vector<BehaviorClass> fold(50, C);
    std::array<double, 3> priors;
    priors[static_cast<int>(H)] = 0.01;
    priors[static_cast<int>(C)] = 0.9;
    priors[static_cast<int>(P)] = 0.09;
    auto result = chance_uar({fold}, priors, 5000, 7);
    CHECK(std::abs(result.mean - 0.9) <= 0.01);
}

TEST_CASE("chance uar: degenerate prior on the only present class is exactly 1") {
    std::vector<BehaviorClass> fold(20, C);
    std::array<double, 3> priors = {0, 0, 0};
    priors[static_cast<int>(C)] = 1.0;
    auto result = chance_uar({fold}, priors, 100, 3);
    CHECK(result.mean == 1.0);
    CHECK(result.stddev == 0.0);
}

TEST_CASE("chance uar converges to the analytic expectation") {
    // fold without Hostile: E[UAR] = (p_C + p_P) / 2
    std::vector<BehaviorClass> fold;
    for (int i = 0; i < 30; ++i) fold.push_back(C);
    for (int i = 0; i < 30; ++i) fold.push_back(P);
    std::array<double, 3> priors;
    priors[static_cast<int>(H)] = 0.7;
    priors[static_cast<int>(C)] = 0.2;
    priors[static_cast<int>(P)] = 0.1;
    int reps = 100000;
    auto result = chance_uar({fold}, priors, reps, 11);
    double expect = (0.2 + 0.1) / 2.0;
    double se = result.stddev / std::sqrt(static_cast<double>(reps));
    CHECK(std::abs(result.mean - expect) <= 3.0 * se + 1e-9);
}

TEST_CASE("chance uar input validation") {
    CHECK_THROWS_AS(chance_uar({}, {1, 0, 0}, 10, 1), ValidationError);
    CHECK_THROWS_AS(chance_uar({{}}, {1, 0, 0}, 10, 1), ValidationError);
    CHECK_THROWS_AS(chance_uar({{C}}, {0.5, 0.2, 0.2}, 10, 1), ValidationError);
}

TEST_CASE("a window of 3 recalls a hostile truth from a neighboring prediction") {
    auto so = session_of("s", {C, C, H, C, C}, {C, H, C, C, C});
    auto w3 = windowed_confusion({so}, {3});
    CHECK(w3.recall(static_cast<int>(H)) == 1.0);
    auto w1 = windowed_confusion({so}, {1});
    CHECK(w1.recall(static_cast<int>(H)) == 0.0);
    CHECK(w1 == brute_force_windowed({so}, 1));
}

TEST_CASE("windows never cross session boundaries") {
    // hostile prediction sits in another session
    auto a = session_of("a", {C, C, H}, {C, C, C});
    auto b = session_of("b", {C, C, C}, {H, C, C});
    auto cm = windowed_confusion({a, b}, {7});
    CHECK(cm.recall(static_cast<int>(H)) == 0.0);
}

TEST_CASE("a class never predicted has zero recall at every window") {
    auto so = session_of("s", {C, P, C, C, P}, {C, C, C, C, C});
    for (int w : {1, 3, 5, 9}) {
        auto cm = windowed_confusion({so}, {w});
        CHECK(cm.recall(static_cast<int>(P)) == 0.0);
    }
}

TEST_CASE("even window sizes are rejected") {
    auto so = session_of("s", {C}, {C});
    CHECK_THROWS_AS(windowed_confusion({so}, {2}), ValidationError);
    CHECK_THROWS_AS(windowed_confusion({so}, {0}), ValidationError);
    CHECK_THROWS_AS(fn_correction_rate({so}, {4}), ValidationError);
}

TEST_CASE("windowed confusion matches the brute-force oracle on random sequences") {
    Rng rng(555);
    for (int trial = 0; trial < 300; ++trial) {
        std::vector<SessionOutcomes> sessions;
        int n_sessions = static_cast<int>(rng.uniform_int(1, 3));
        for (int s = 0; s < n_sessions; ++s) {
            int len = static_cast<int>(rng.uniform_int(1, 20));
            std::vector<BehaviorClass> truths(len), preds(len);
            for (int i = 0; i < len; ++i) {
                truths[i] = static_cast<BehaviorClass>(rng.uniform_int(0, 2));
                preds[i] = static_cast<BehaviorClass>(rng.uniform_int(0, 2));
            }
            sessions.push_back(session_of("s" + std::to_string(s), truths, preds));
        }
        for (int w : {1, 3, 5, 7}) {
            auto got = windowed_confusion(sessions, {w});
            auto want = brute_force_windowed(sessions, w);
            CHECK(got == want);
        }
        // monotone recall in w for every class
        std::array<double, 3> prev = {-1, -1, -1};
        for (int w : {1, 3, 5, 7, 9}) {
            auto cm = windowed_confusion(sessions, {w});
            for (int c = 0; c < 3; ++c) {
                auto r = cm.recall(c);
                if (!r) continue;
                CHECK(*r >= prev[c]);
                prev[c] = *r;
            }
        }
    }
}

TEST_CASE("windowed scoring with gaps in retained turn indices") {
    // excluded turns leave index holes; distance uses the original indices
    SessionOutcomes so;
    so.session_id = "s";
    so.turns.push_back({0, "a", H, C});
    so.turns.push_back({4, "b", C, H});  // index distance 4 from the truth
    auto w3 = windowed_confusion({so}, {3});
    CHECK(w3.recall(static_cast<int>(H)) == 0.0);
    auto w9 = windowed_confusion({so}, {9});
    CHECK(w9.recall(static_cast<int>(H)) == 1.0);
}

TEST_CASE("fn correction rate") {
    auto none = session_of("s", {H, C}, {H, C});
    CHECK_FALSE(fn_correction_rate({none}, {5}).has_value());

    // 2 false negatives, 1 recoverable at w=5
    auto so = session_of("s", {H, C, C, C, C, C, H}, {C, C, H, C, C, C, C});
    auto rate = fn_correction_rate({so}, {5});
    REQUIRE(rate.has_value());
    CHECK(*rate == 0.5);

    auto w1 = fn_correction_rate({so}, {1});
    REQUIRE(w1.has_value());
    CHECK(*w1 == 0.0);
}

TEST_CASE("same-speaker windows only accept the truth speaker's turns") {
    SessionOutcomes so;
    so.session_id = "s";
    so.turns.push_back({0, "a", C, C});
    so.turns.push_back({1, "b", H, C});
    so.turns.push_back({2, "a", C, H});  // neighbor carries the hostile prediction
    auto any_speaker = windowed_confusion({so}, {3}, kDefaultTargets, false);
    CHECK(any_speaker.recall(static_cast<int>(H)) == 1.0);
    auto same_speaker = windowed_confusion({so}, {3}, kDefaultTargets, true);
    CHECK(same_speaker.recall(static_cast<int>(H)) == 0.0);
}

TEST_CASE("recall curve shape and perfect predictions") {
    auto so = session_of("s", {H, C, P, C, H}, {H, C, P, C, H});
    auto curve = recall_curve({so}, {1, 3, 5, 7, 9, 11});
    REQUIRE(curve.size() == 6);
    for (const auto& row : curve) {
        CHECK(row.uar == 1.0);
        for (int c = 0; c < 3; ++c) CHECK(*row.recall[c] == 1.0);
    }
    CHECK(curve[0].window_size == 1);
    CHECK(curve[5].window_size == 11);
}
