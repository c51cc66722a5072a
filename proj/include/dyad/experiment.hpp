#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dyad/corpus.hpp"
#include "dyad/eval.hpp"
#include "dyad/features.hpp"
#include "dyad/model.hpp"

namespace dyad::experiment {

struct Fold {
    std::string test_couple;
    std::vector<std::string> train_couples;
    std::vector<std::string> val_couples;
};

struct FoldPlan {
    std::vector<Fold> folds;  // one per couple, in couple-id order
};

// Leave-one-couple-out plan with a per-fold 80/20 inner split by couple
// (val = max(1, floor(0.2 * remaining)), redrawn until train and val each
// carry all three classes).
FoldPlan make_fold_plan(const LabeledDataset& dataset, uint64_t split_seed,
                        int max_retries = 1000);

struct GridPoint {
    std::vector<int> hidden;
    int batch_size = 32;
    model::WeightMethod weight_method = model::WeightMethod::InverseFreqMax;
    model::OptimizerKind optimizer = model::OptimizerKind::Adam;
    double learning_rate = 1e-3;
    std::optional<double> decay_factor;
};

struct GridSpace {
    features::Modality modality = features::Modality::Acoustic;
    std::vector<std::vector<int>> hidden_configs;
    std::vector<int> batch_sizes;
    std::vector<model::WeightMethod> weight_methods;
    std::vector<model::OptimizerKind> optimizers;
    std::vector<double> learning_rates;
    // one entry per decay choice; nullopt = no decay
    std::vector<std::optional<double>> decay_factors;

    static GridSpace default_acoustic();
    static GridSpace default_lexical();
};

// Cartesian product in fixed order: hidden, batch, weight method, optimizer,
// learning rate, decay (outermost to innermost).
std::vector<GridPoint> grid_enumerate(const GridSpace& space);

// each hidden width -> ceil(width/2), for partition-conditioned runs
GridSpace halve_hidden(const GridSpace& space);
std::vector<int> halve_widths(const std::vector<int>& hidden);

struct TurnPrediction {
    std::string session_id;
    int turn_index = 0;
    std::string speaker_id;
    BehaviorClass truth = BehaviorClass::Constructive;
    BehaviorClass pred = BehaviorClass::Constructive;
};

struct PartOutcome {
    std::string part;
    int config_index = -1;  // enumeration index of the chosen config
    GridPoint chosen;
    double best_val_uar = 0.0;
    int skipped_configs = 0;
};

struct FoldResult {
    std::string test_couple;
    bool skipped = false;
    std::string skip_reason;
    std::vector<PartOutcome> parts;
    eval::ConfusionMatrix test_cm;
    double test_uar = 0.0;
    std::vector<TurnPrediction> predictions;
};

struct RunOptions {
    PartitionScheme scheme = PartitionScheme::None;
    uint64_t seed = 0;
    int jobs = 1;
    model::TrainParams train;
    int chance_repetitions = 1000;
    std::vector<int> windows = {1, 3, 5, 7, 9, 11};
};

struct ParamCountRow {
    std::vector<int> hidden;
    long params = 0;
    std::vector<int> hidden_halved;
    long params_halved = 0;
};

struct ExperimentReport {
    std::string modality;
    std::string scheme;
    uint64_t seed = 0;
    int input_dim = 0;
    std::vector<FoldResult> folds;
    double mean_uar = 0.0;  // over non-skipped folds
    double std_uar = 0.0;   // sample standard deviation
    int n_folds = 0;
    int n_skipped = 0;
    eval::ChanceResult chance;
    int chance_repetitions = 0;
    std::array<double, 3> priors = {0, 0, 0};
    std::vector<eval::CurveRow> curve;  // pooled test predictions
    std::map<int, std::optional<double>> fn_correction;  // per window size
    std::vector<ParamCountRow> param_counts;
};

// Trains every grid config on the fold's train couples, selects the best
// validation UAR (ties to enumeration order), and scores the test couple.
// With a partition scheme, one model per part is trained on the halved space
// and test samples are routed to their part's model.
FoldResult run_fold(const Fold& fold, size_t fold_index, const LabeledDataset& dataset,
                    const GridSpace& space, const RunOptions& opts);

ExperimentReport run_experiment(const LabeledDataset& dataset, const GridSpace& space,
                                const RunOptions& opts);

// Decision-level fusion: argmax of the averaged class posteriors, ties to the
// lowest class index.
std::vector<BehaviorClass> fuse_posterior_mean(const Matrix& probs_a, const Matrix& probs_b);

// Feature-level fusion: per-turn concatenation (a's order, matched by
// session/turn); the result feeds a standard run.
LabeledDataset concat_features(const LabeledDataset& a, const LabeledDataset& b);

nlohmann::json report_to_json(const ExperimentReport& report);

// Table-style rendering over one or more reports: rows = partition scheme,
// columns = modality, cells = "mean (std) UAR %".
std::string render_report_table(const std::vector<nlohmann::json>& reports);

void write_predictions_csv(const ExperimentReport& report, const std::filesystem::path& path);

}  // namespace dyad::experiment
