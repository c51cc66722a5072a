#include "dyad/eval.hpp"

#include <cmath>

#include "dyad/csv.hpp"
#include "dyad/rng.hpp"

namespace dyad::eval {

long ConfusionMatrix::total() const {
    long t = 0;
    for (const auto& row : m)
        for (long v : row) t += v;
    return t;
}

long ConfusionMatrix::row_sum(int row) const { return m[row][0] + m[row][1] + m[row][2]; }

std::optional<double> ConfusionMatrix::recall(int row) const {
    long n = row_sum(row);
    if (n == 0) return std::nullopt;
    return static_cast<double>(m[row][row]) / static_cast<double>(n);
}

double uar(const ConfusionMatrix& cm) {
    double sum = 0.0;
    int present = 0;
    for (int c = 0; c < kNumClasses; ++c) {
        auto r = cm.recall(c);
        if (r) {
            sum += *r;
            ++present;
        }
    }
    if (present == 0) fail("uar: confusion matrix has no true samples");
    return sum / present;
}

ChanceResult chance_uar(const std::vector<std::vector<BehaviorClass>>& per_fold_test_labels,
                        const std::array<double, 3>& priors, int repetitions, uint64_t seed) {
    if (per_fold_test_labels.empty()) fail("chance_uar: no folds");
    for (const auto& fold : per_fold_test_labels)
        if (fold.empty()) fail("chance_uar: empty fold");
    if (repetitions < 1) fail("chance_uar: repetitions must be >= 1");
    double prior_sum = priors[0] + priors[1] + priors[2];
    if (std::abs(prior_sum - 1.0) > 1e-9) fail("chance_uar: priors must sum to 1");

    std::vector<double> draws;
    draws.reserve(per_fold_test_labels.size() * static_cast<size_t>(repetitions));
    for (size_t f = 0; f < per_fold_test_labels.size(); ++f) {
        const auto& labels = per_fold_test_labels[f];
        for (int rep = 0; rep < repetitions; ++rep) {
            Rng rng(mix_seed(seed, f, static_cast<uint64_t>(rep)));
            ConfusionMatrix cm;
            for (BehaviorClass truth : labels) {
                double u = rng.uniform01();
                int pred = 0;
                double acc = 0.0;
                for (int c = 0; c < kNumClasses; ++c) {
                    acc += priors[c];
                    if (u < acc) {
                        pred = c;
                        break;
                    }
                    pred = c;  // degenerate tail
                }
                cm.add(truth, static_cast<BehaviorClass>(pred));
            }
            draws.push_back(uar(cm));
        }
    }
    ChanceResult out;
    for (double d : draws) out.mean += d;
    out.mean /= static_cast<double>(draws.size());
    double var = 0.0;
    for (double d : draws) var += (d - out.mean) * (d - out.mean);
    out.stddev = draws.size() > 1 ? std::sqrt(var / static_cast<double>(draws.size() - 1)) : 0.0;
    return out;
}

namespace {

bool windowed_hit(const SessionOutcomes& session, size_t pos, int tolerance,
                  bool same_speaker_only) {
    const auto& target = session.turns[pos];
    for (const auto& turn : session.turns) {
        if (std::abs(turn.turn_index - target.turn_index) > tolerance) continue;
        if (same_speaker_only && turn.speaker_id != target.speaker_id) continue;
        if (turn.pred == target.truth) return true;
    }
    return false;
}

}  // namespace

ConfusionMatrix windowed_confusion(const std::vector<SessionOutcomes>& sessions,
                                   const WindowSpec& spec,
                                   const std::set<BehaviorClass>& targets,
                                   bool same_speaker_only) {
    if (spec.window_size < 1 || spec.window_size % 2 == 0)
        fail("windowed_confusion: window size must be odd and positive, got ",
             spec.window_size);
    ConfusionMatrix cm;
    for (const auto& session : sessions) {
        for (size_t i = 0; i < session.turns.size(); ++i) {
            const auto& turn = session.turns[i];
            if (targets.contains(turn.truth) &&
                windowed_hit(session, i, spec.tolerance(), same_speaker_only)) {
                cm.add(turn.truth, turn.truth);
            } else {
                cm.add(turn.truth, turn.pred);
            }
        }
    }
    return cm;
}

std::optional<double> fn_correction_rate(const std::vector<SessionOutcomes>& sessions,
                                         const WindowSpec& spec,
                                         const std::set<BehaviorClass>& targets,
                                         bool same_speaker_only) {
    if (spec.window_size < 1 || spec.window_size % 2 == 0)
        fail("fn_correction_rate: window size must be odd and positive, got ",
             spec.window_size);
    long false_negatives = 0;
    long corrected = 0;
    for (const auto& session : sessions) {
        for (size_t i = 0; i < session.turns.size(); ++i) {
            const auto& turn = session.turns[i];
            if (!targets.contains(turn.truth) || turn.pred == turn.truth) continue;
            ++false_negatives;
            if (windowed_hit(session, i, spec.tolerance(), same_speaker_only)) ++corrected;
        }
    }
    if (false_negatives == 0) return std::nullopt;
    return static_cast<double>(corrected) / static_cast<double>(false_negatives);
}

std::vector<CurveRow> recall_curve(const std::vector<SessionOutcomes>& sessions,
                                   const std::vector<int>& window_sizes,
                                   const std::set<BehaviorClass>& targets,
                                   bool same_speaker_only) {
    std::vector<CurveRow> rows;
    for (int w : window_sizes) {
        ConfusionMatrix cm = windowed_confusion(sessions, {w}, targets, same_speaker_only);
        CurveRow row;
        row.window_size = w;
        for (int c = 0; c < kNumClasses; ++c) row.recall[c] = cm.recall(c);
        row.uar = uar(cm);
        rows.push_back(row);
    }
    return rows;
}

void write_curve_csv(const std::vector<CurveRow>& rows, const std::filesystem::path& path) {
    csv::Writer w(path);
    w.row({"window_size", "hostile_recall", "positive_recall", "constructive_recall", "uar"});
    auto fmt = [](const std::optional<double>& v) {
        return v ? format_double(*v) : std::string("NA");
    };
    for (const auto& row : rows)
        w.row({std::to_string(row.window_size),
               fmt(row.recall[static_cast<int>(BehaviorClass::Hostile)]),
               fmt(row.recall[static_cast<int>(BehaviorClass::Positive)]),
               fmt(row.recall[static_cast<int>(BehaviorClass::Constructive)]),
               format_double(row.uar)});
    w.close();
}

}  // namespace dyad::eval
