#include "support/table2_fixture.hpp"

#include <array>
#include <cstdio>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace dyad::testsupport {

namespace {

// counts indexed by BehaviorClass (Hostile, Constructive, Positive)
using Counts = std::array<long, 3>;

// Per (couple type, content): class counts for the patient and caregiver
// side. Derived from the reference table's six 1-D marginals; every row and
// column below is re-asserted in corpus_test.
struct GroupSpec {
    const char* couple_prefix;
    Gender patient_gender;
    Content content;
    Counts patient;    // H, C, P
    Counts caregiver;  // H, C, P
};

// 40 couples per type, one session per (couple, content)
constexpr int kCouplesPerType = 40;

const std::vector<GroupSpec>& groups() {
    static const std::vector<GroupSpec> g = {
        // male-patient couples (female caregiver)
        {"m", Gender::Male, Content::Neutral, {9, 1873, 130}, {18, 1919, 105}},
        {"m", Gender::Male, Content::Stress, {22, 1436, 251}, {41, 1497, 202}},
        // female-patient couples (male caregiver)
        {"f", Gender::Female, Content::Neutral, {14, 1897, 118}, {13, 1895, 114}},
        {"f", Gender::Female, Content::Stress, {31, 1464, 229}, {28, 1469, 220}},
    };
    return g;
}

// Spreads the class counts evenly over a sequence (largest-remainder walk),
// so every session sees a mix of classes.
std::vector<BehaviorClass> interleave(const Counts& counts) {
    long total = counts[0] + counts[1] + counts[2];
    std::vector<BehaviorClass> seq;
    seq.reserve(total);
    std::array<double, 3> err = {0, 0, 0};
    Counts remaining = counts;
    for (long i = 0; i < total; ++i) {
        int best = -1;
        for (int c = 0; c < 3; ++c) {
            if (remaining[c] == 0) continue;
            err[c] += static_cast<double>(counts[c]) / static_cast<double>(total);
            if (best < 0 || err[c] > err[best]) best = c;
        }
        err[best] -= 1.0;
        remaining[best]--;
        seq.push_back(static_cast<BehaviorClass>(best));
    }
    return seq;
}

BehaviorCode code_for(BehaviorClass cls, long ordinal) {
    switch (cls) {
        case BehaviorClass::Hostile:
            return ordinal % 2 ? BehaviorCode::HighHostile : BehaviorCode::LowHostile;
        case BehaviorClass::Constructive: return BehaviorCode::ConstructiveProblemDiscussion;
        case BehaviorClass::Positive:
            return ordinal % 2 ? BehaviorCode::HighPositive : BehaviorCode::LowPositive;
    }
    return BehaviorCode::Other;
}

}  // namespace

Corpus build_table2_corpus() {
    Corpus corpus;

    for (const char* prefix : {"m", "f"}) {
        Gender patient_gender = prefix[0] == 'm' ? Gender::Male : Gender::Female;
        for (int c = 0; c < kCouplesPerType; ++c) {
            char buf[32];
            std::snprintf(buf, sizeof(buf), "%s%03d", prefix, c);
            std::string couple_id = buf;
            Speaker patient{couple_id + "_p", couple_id, patient_gender, Role::Patient};
            Speaker caregiver{couple_id + "_g", couple_id,
                              patient_gender == Gender::Male ? Gender::Female : Gender::Male,
                              Role::Caregiver};
            corpus.speakers[patient.speaker_id] = patient;
            corpus.speakers[caregiver.speaker_id] = caregiver;
        }
    }

    std::array<long, 3> code_ordinals = {0, 0, 0};
    for (const auto& group : groups()) {
        auto patient_seq = interleave(group.patient);
        auto caregiver_seq = interleave(group.caregiver);
        long p_total = static_cast<long>(patient_seq.size());
        long c_total = static_cast<long>(caregiver_seq.size());
        long excess = std::abs(p_total - c_total);
        if (excess > kCouplesPerType)
            throw std::logic_error("table2 fixture: imbalance exceeds session slack");
        bool caregiver_heavy = c_total > p_total;

        long pairs_total = std::min(p_total, c_total);
        long base_pairs = pairs_total / kCouplesPerType;
        long pair_remainder = pairs_total % kCouplesPerType;

        size_t p_at = 0, c_at = 0;
        for (int s = 0; s < kCouplesPerType; ++s) {
            char buf[32];
            std::snprintf(buf, sizeof(buf), "%s%03d", group.couple_prefix, s);
            std::string couple_id = buf;

            long pairs = base_pairs + (s < pair_remainder ? 1 : 0);
            bool extra = s < excess;
            long n_turns = pairs * 2 + (extra ? 1 : 0);

            Session session;
            session.session_id =
                couple_id + (group.content == Content::Neutral ? "_n" : "_s");
            session.couple_id = couple_id;
            session.content = group.content;

            // strict alternation; the heavier side speaks first when odd
            bool caregiver_first = extra && caregiver_heavy;
            for (long t = 0; t < n_turns; ++t) {
                bool caregiver_turn = (t % 2 == 0) == caregiver_first;
                BehaviorClass cls =
                    caregiver_turn ? caregiver_seq.at(c_at++) : patient_seq.at(p_at++);
                Turn turn;
                turn.index = static_cast<int>(t);
                turn.speaker_id = couple_id + (caregiver_turn ? "_g" : "_p");
                turn.start_ms = t * 1000;
                turn.end_ms = (t + 1) * 1000;
                turn.code = code_for(cls, code_ordinals[static_cast<int>(cls)]++);
                turn.text = "turn " + std::to_string(t);
                session.turns.push_back(std::move(turn));
            }
            corpus.sessions.push_back(std::move(session));
        }
        if (p_at != patient_seq.size() || c_at != caregiver_seq.size())
            throw std::logic_error("table2 fixture: pools not fully consumed");
    }
    return corpus;
}

std::filesystem::path write_table2_corpus(const std::filesystem::path& dir) {
    return save_corpus(build_table2_corpus(), dir);
}

}  // namespace dyad::testsupport
