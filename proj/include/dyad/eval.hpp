#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "dyad/corpus.hpp"

namespace dyad::eval {

// rows = truth, columns = prediction
struct ConfusionMatrix {
    std::array<std::array<long, 3>, 3> m = {{{0, 0, 0}, {0, 0, 0}, {0, 0, 0}}};

    void add(BehaviorClass truth, BehaviorClass pred, long count = 1) {
        m[static_cast<int>(truth)][static_cast<int>(pred)] += count;
    }
    long total() const;
    long row_sum(int row) const;
    // nullopt when the class has no true samples
    std::optional<double> recall(int row) const;

    bool operator==(const ConfusionMatrix&) const = default;
};

// Mean of per-class recalls over classes with at least one true sample;
// classes absent from the truth are excluded from the average.
double uar(const ConfusionMatrix& cm);

struct ChanceResult {
    double mean = 0.0;
    double stddev = 0.0;  // over the fold x repetition UAR draws
};

// Monte-Carlo chance level: labels drawn from `priors` (indexed by
// BehaviorClass) independently per turn, UAR per fold, averaged over folds
// and repetitions. Deterministic in `seed`.
ChanceResult chance_uar(const std::vector<std::vector<BehaviorClass>>& per_fold_test_labels,
                        const std::array<double, 3>& priors, int repetitions, uint64_t seed);

// Window of K+1 turns (odd) = tolerance K/2 on each side; W=1 is exact.
struct WindowSpec {
    int window_size = 1;

    int tolerance() const { return (window_size - 1) / 2; }
};

struct TurnOutcome {
    int turn_index = 0;
    std::string speaker_id;
    BehaviorClass truth = BehaviorClass::Constructive;
    BehaviorClass pred = BehaviorClass::Constructive;
};

struct SessionOutcomes {
    std::string session_id;
    std::vector<TurnOutcome> turns;  // session order
};

inline const std::set<BehaviorClass> kDefaultTargets = {BehaviorClass::Hostile,
                                                        BehaviorClass::Positive};

// A target-class truth counts as recalled when any turn within index distance
// tolerance() in the same session carries that prediction; non-target truths
// are scored exactly. Windows never cross session boundaries. With
// same_speaker_only, window candidates are restricted to the truth turn's
// speaker.
ConfusionMatrix windowed_confusion(const std::vector<SessionOutcomes>& sessions,
                                   const WindowSpec& spec,
                                   const std::set<BehaviorClass>& targets = kDefaultTargets,
                                   bool same_speaker_only = false);

// Fraction of exact-miss target-class truths that become correct under
// `spec`; nullopt when there are no false negatives.
std::optional<double> fn_correction_rate(const std::vector<SessionOutcomes>& sessions,
                                         const WindowSpec& spec,
                                         const std::set<BehaviorClass>& targets = kDefaultTargets,
                                         bool same_speaker_only = false);

struct CurveRow {
    int window_size = 0;
    std::array<std::optional<double>, 3> recall;  // per BehaviorClass
    double uar = 0.0;
};

std::vector<CurveRow> recall_curve(const std::vector<SessionOutcomes>& sessions,
                                   const std::vector<int>& window_sizes,
                                   const std::set<BehaviorClass>& targets = kDefaultTargets,
                                   bool same_speaker_only = false);

// plot-data CSV: window_size,hostile_recall,positive_recall,constructive_recall,uar
void write_curve_csv(const std::vector<CurveRow>& rows, const std::filesystem::path& path);

}  // namespace dyad::eval
