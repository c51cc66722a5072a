#include "dyad/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "dyad/csv.hpp"
#include "dyad/rng.hpp"

namespace dyad::experiment {

using nlohmann::json;

namespace {

std::vector<std::string> sorted_couples(const LabeledDataset& dataset) {
    std::set<std::string> ids;
    for (const auto& s : dataset.samples) ids.insert(s.couple_id);
    return {ids.begin(), ids.end()};
}

std::map<std::string, std::array<long, 3>> couple_class_counts(const LabeledDataset& dataset) {
    std::map<std::string, std::array<long, 3>> counts;
    for (const auto& s : dataset.samples)
        counts[s.couple_id][static_cast<int>(s.label)]++;
    return counts;
}

bool covers_all_classes(const std::vector<std::string>& couples,
                        const std::map<std::string, std::array<long, 3>>& counts) {
    std::array<long, 3> total = {0, 0, 0};
    for (const auto& c : couples) {
        auto it = counts.find(c);
        if (it == counts.end()) continue;
        for (int k = 0; k < 3; ++k) total[k] += it->second[k];
    }
    return total[0] > 0 && total[1] > 0 && total[2] > 0;
}

}  // namespace

FoldPlan make_fold_plan(const LabeledDataset& dataset, uint64_t split_seed, int max_retries) {
    auto couples = sorted_couples(dataset);
    if (couples.size() < 3)
        fail("fold plan: need at least 3 couples, got ", couples.size());
    auto counts = couple_class_counts(dataset);
    if (!covers_all_classes(couples, counts))
        fail("fold plan: corpus does not contain all 3 classes");

    FoldPlan plan;
    for (size_t i = 0; i < couples.size(); ++i) {
        std::vector<std::string> remaining;
        for (size_t j = 0; j < couples.size(); ++j)
            if (j != i) remaining.push_back(couples[j]);

        // classes carried by fewer than 2 remaining couples can never be in
        // both inner splits
        std::array<int, 3> carriers = {0, 0, 0};
        for (const auto& c : remaining)
            for (int k = 0; k < 3; ++k)
                if (counts[c][k] > 0) carriers[k]++;
        std::vector<std::string> deficient;
        for (int k = 0; k < 3; ++k)
            if (carriers[k] < 2) deficient.push_back(to_string(static_cast<BehaviorClass>(k)));
        if (!deficient.empty()) {
            std::string classes;
            for (const auto& d : deficient) classes += (classes.empty() ? "" : ", ") + d;
            fail("fold plan: fold for couple '", couples[i],
                 "' cannot satisfy class coverage; deficient classes: ", classes);
        }

        size_t val_n = std::max<size_t>(
            1, static_cast<size_t>(0.2 * static_cast<double>(remaining.size())));
        Rng rng(mix_seed(split_seed, i));
        Fold fold;
        fold.test_couple = couples[i];
        bool ok = false;
        for (int attempt = 0; attempt < max_retries; ++attempt) {
            rng.shuffle(remaining);
            std::vector<std::string> val(remaining.begin(), remaining.begin() + val_n);
            std::vector<std::string> train(remaining.begin() + val_n, remaining.end());
            if (covers_all_classes(train, counts) && covers_all_classes(val, counts)) {
                std::sort(train.begin(), train.end());
                std::sort(val.begin(), val.end());
                fold.train_couples = std::move(train);
                fold.val_couples = std::move(val);
                ok = true;
                break;
            }
        }
        if (!ok)
            fail("fold plan: fold for couple '", couples[i], "' found no class-covering ",
                 "80/20 split in ", max_retries, " draws");
        plan.folds.push_back(std::move(fold));
    }
    return plan;
}

GridSpace GridSpace::default_acoustic() {
    GridSpace s;
    s.modality = features::Modality::Acoustic;
    s.hidden_configs = {{64, 32, 16}, {128, 64, 32}, {128, 64, 32, 32}};
    s.batch_sizes = {32, 64, 128, 256};
    // complement weighting underperformed; ratio methods only
    s.weight_methods = {model::WeightMethod::InverseFreqSum, model::WeightMethod::InverseFreqMax};
    s.optimizers = {model::OptimizerKind::Adam, model::OptimizerKind::SGD};
    s.learning_rates = {1e-2, 1e-3, 1e-4};
    s.decay_factors = {std::nullopt};
    return s;
}

GridSpace GridSpace::default_lexical() {
    GridSpace s;
    s.modality = features::Modality::Lexical;
    s.hidden_configs = {{300, 200, 100}, {200, 100, 50}, {300, 200}, {200, 100}, {100, 50},
                        {300},           {200},          {100},      {50}};
    s.batch_sizes = {25};
    s.weight_methods = {model::WeightMethod::InverseFreqMax};
    s.optimizers = {model::OptimizerKind::Adam, model::OptimizerKind::SGD};
    s.learning_rates = {1e-2, 1e-3, 1e-4};
    s.decay_factors = {0.1, 0.5};
    return s;
}

std::vector<GridPoint> grid_enumerate(const GridSpace& space) {
    if (space.hidden_configs.empty() || space.batch_sizes.empty() ||
        space.weight_methods.empty() || space.optimizers.empty() ||
        space.learning_rates.empty() || space.decay_factors.empty())
        fail("grid space: every axis needs at least one value");
    std::vector<GridPoint> out;
    for (const auto& hidden : space.hidden_configs)
        for (int batch : space.batch_sizes)
            for (auto method : space.weight_methods)
                for (auto opt : space.optimizers)
                    for (double lr : space.learning_rates)
                        for (const auto& decay : space.decay_factors)
                            out.push_back({hidden, batch, method, opt, lr, decay});
    return out;
}

std::vector<int> halve_widths(const std::vector<int>& hidden) {
    std::vector<int> out;
    for (int w : hidden) out.push_back((w + 1) / 2);
    return out;
}

GridSpace halve_hidden(const GridSpace& space) {
    GridSpace out = space;
    for (auto& hidden : out.hidden_configs) hidden = halve_widths(hidden);
    return out;
}

namespace {

struct PartData {
    Matrix train_x, val_x, test_x;
    std::vector<BehaviorClass> train_y, val_y, test_y;
    std::vector<const Sample*> test_samples;
};

int feature_dim(const LabeledDataset& dataset) {
    if (dataset.samples.empty()) fail("experiment: empty dataset");
    if (!dataset.samples.front().features)
        fail("experiment: samples carry no feature vectors");
    int dim = static_cast<int>(dataset.samples.front().features->size());
    for (const auto& s : dataset.samples) {
        if (!s.features)
            fail("experiment: sample ", s.session_id, "/", s.turn_index, " has no features");
        if (static_cast<int>(s.features->size()) != dim)
            fail("experiment: inconsistent feature dimension (", s.features->size(), " vs ",
                 dim, ")");
    }
    return dim;
}

Matrix stack_features(const std::vector<const Sample*>& samples, int dim) {
    Matrix out(samples.size(), dim);
    for (size_t r = 0; r < samples.size(); ++r)
        std::copy(samples[r]->features->begin(), samples[r]->features->end(), out.row_ptr(r));
    return out;
}

PartData assemble_part(const Fold& fold, const LabeledDataset& dataset,
                       PartitionScheme scheme, const std::string& part, int dim) {
    std::set<std::string> train_set(fold.train_couples.begin(), fold.train_couples.end());
    std::set<std::string> val_set(fold.val_couples.begin(), fold.val_couples.end());

    std::vector<const Sample*> train, val, test;
    for (const auto& s : dataset.samples) {
        if (partition_key(s, scheme) != part) continue;
        if (s.couple_id == fold.test_couple) test.push_back(&s);
        else if (train_set.contains(s.couple_id)) train.push_back(&s);
        else if (val_set.contains(s.couple_id)) val.push_back(&s);
    }

    PartData data;
    data.train_x = stack_features(train, dim);
    data.val_x = stack_features(val, dim);
    data.test_x = stack_features(test, dim);
    for (auto* s : train) data.train_y.push_back(s->label);
    for (auto* s : val) data.val_y.push_back(s->label);
    for (auto* s : test) data.test_y.push_back(s->label);
    data.test_samples = std::move(test);
    return data;
}

std::array<long, 3> label_counts(const std::vector<BehaviorClass>& labels) {
    std::array<long, 3> counts = {0, 0, 0};
    for (auto l : labels) counts[static_cast<int>(l)]++;
    return counts;
}

}  // namespace

FoldResult run_fold(const Fold& fold, size_t fold_index, const LabeledDataset& dataset,
                    const GridSpace& space, const RunOptions& opts) {
    FoldResult result;
    result.test_couple = fold.test_couple;
    const int dim = feature_dim(dataset);
    const auto configs = grid_enumerate(space);
    const auto parts = partition_keys(opts.scheme);

    // part-level feasibility first so a skip names the reason
    std::vector<PartData> part_data;
    for (const auto& part : parts) {
        PartData data = assemble_part(fold, dataset, opts.scheme, part, dim);
        auto counts = label_counts(data.train_y);
        for (int k = 0; k < 3; ++k) {
            if (counts[k] == 0) {
                result.skipped = true;
                result.skip_reason = "part '" + part + "' lacks " +
                                     to_string(static_cast<BehaviorClass>(k)) +
                                     " in the train split";
            }
        }
        if (data.val_y.empty()) {
            result.skipped = true;
            result.skip_reason = "part '" + part + "' has an empty validation split";
        }
        part_data.push_back(std::move(data));
    }
    if (result.skipped) return result;

    for (size_t p = 0; p < parts.size(); ++p) {
        PartData& data = part_data[p];
        auto train_counts = label_counts(data.train_y);

        PartOutcome outcome;
        outcome.part = parts[p];
        double best_uar = -1.0;
        model::MlpModel best_model;

        for (size_t ci = 0; ci < configs.size(); ++ci) {
            const GridPoint& cfg = configs[ci];
            try {
                model::MlpConfig mc;
                mc.input_dim = dim;
                mc.hidden = cfg.hidden;
                mc.seed = mix_seed(opts.seed, fold_index, p, ci);

                model::OptimizerConfig oc;
                oc.kind = cfg.optimizer;
                oc.learning_rate = cfg.learning_rate;
                oc.decay_factor = cfg.decay_factor;
                oc.batch_size = cfg.batch_size;

                model::TrainParams tp = opts.train;
                tp.shuffle_seed = mix_seed(mc.seed, 1);

                auto weights = model::class_weights(train_counts, cfg.weight_method);
                auto trained = model::train(model::init(mc), data.train_x, data.train_y,
                                            data.val_x, data.val_y, oc, weights, tp);
                if (trained.best_val_uar > best_uar) {
                    best_uar = trained.best_val_uar;
                    best_model = std::move(trained.best);
                    outcome.config_index = static_cast<int>(ci);
                    outcome.chosen = cfg;
                    outcome.best_val_uar = best_uar;
                }
            } catch (const std::exception&) {
                outcome.skipped_configs++;
            }
        }
        if (outcome.config_index < 0) {
            result.skipped = true;
            result.skip_reason = "part '" + parts[p] + "': all grid configs failed";
            return result;
        }

        if (!data.test_samples.empty()) {
            auto preds = model::predict(best_model, data.test_x);
            for (size_t i = 0; i < preds.size(); ++i) {
                result.test_cm.add(data.test_y[i], preds[i]);
                const Sample* s = data.test_samples[i];
                result.predictions.push_back(
                    {s->session_id, s->turn_index, s->speaker_id, s->label, preds[i]});
            }
        }
        result.parts.push_back(std::move(outcome));
    }

    std::sort(result.predictions.begin(), result.predictions.end(),
              [](const TurnPrediction& a, const TurnPrediction& b) {
                  if (a.session_id != b.session_id) return a.session_id < b.session_id;
                  return a.turn_index < b.turn_index;
              });
    result.test_uar = eval::uar(result.test_cm);
    return result;
}

ExperimentReport run_experiment(const LabeledDataset& dataset, const GridSpace& space,
                                const RunOptions& opts) {
    for (size_t i = 0; i < opts.windows.size(); ++i) {
        if (opts.windows[i] < 1 || opts.windows[i] % 2 == 0)
            fail("experiment: window sizes must be odd and positive, got ", opts.windows[i]);
        if (i > 0 && opts.windows[i] <= opts.windows[i - 1])
            fail("experiment: window sizes must be ascending");
    }
    ExperimentReport report;
    report.modality = features::to_string(space.modality);
    report.scheme = to_string(opts.scheme);
    report.seed = opts.seed;
    report.input_dim = feature_dim(dataset);
    report.chance_repetitions = opts.chance_repetitions;

    const GridSpace effective =
        opts.scheme == PartitionScheme::None ? space : halve_hidden(space);

    for (const auto& hidden : space.hidden_configs) {
        ParamCountRow row;
        row.hidden = hidden;
        row.params = model::count_params({report.input_dim, hidden, kNumClasses, 0});
        row.hidden_halved = halve_widths(hidden);
        row.params_halved =
            model::count_params({report.input_dim, row.hidden_halved, kNumClasses, 0});
        report.param_counts.push_back(std::move(row));
    }

    FoldPlan plan = make_fold_plan(dataset, mix_seed(opts.seed, 0x5117));
    report.folds.resize(plan.folds.size());

    const int jobs = std::max(1, opts.jobs);
    const int64_t n_folds = static_cast<int64_t>(plan.folds.size());
    if (jobs > 1) {
        // independent work units; per-fold seeds derive from the fold index,
        // so scheduling cannot change any result
#pragma omp parallel for num_threads(jobs) schedule(dynamic)
        for (int64_t i = 0; i < n_folds; ++i)
            report.folds[i] =
                run_fold(plan.folds[i], static_cast<size_t>(i), dataset, effective, opts);
    } else {
        for (int64_t i = 0; i < n_folds; ++i)
            report.folds[i] =
                run_fold(plan.folds[i], static_cast<size_t>(i), dataset, effective, opts);
    }

    // aggregate in fold order
    std::vector<double> uars;
    for (const auto& fr : report.folds) {
        if (fr.skipped) report.n_skipped++;
        else uars.push_back(fr.test_uar);
    }
    report.n_folds = static_cast<int>(report.folds.size());
    if (!uars.empty()) {
        double sum = 0.0;
        for (double u : uars) sum += u;
        report.mean_uar = sum / static_cast<double>(uars.size());
        double var = 0.0;
        for (double u : uars) var += (u - report.mean_uar) * (u - report.mean_uar);
        report.std_uar =
            uars.size() > 1 ? std::sqrt(var / static_cast<double>(uars.size() - 1)) : 0.0;
    }

    // chance baseline from dataset priors over the scored folds
    auto counts = class_counts(dataset);
    long total = counts[0] + counts[1] + counts[2];
    for (int k = 0; k < 3; ++k)
        report.priors[k] = static_cast<double>(counts[k]) / static_cast<double>(total);
    std::vector<std::vector<BehaviorClass>> fold_labels;
    for (size_t i = 0; i < plan.folds.size(); ++i) {
        if (report.folds[i].skipped) continue;
        std::vector<BehaviorClass> labels;
        for (const auto& s : dataset.samples)
            if (s.couple_id == plan.folds[i].test_couple) labels.push_back(s.label);
        fold_labels.push_back(std::move(labels));
    }
    if (!fold_labels.empty())
        report.chance = eval::chance_uar(fold_labels, report.priors, opts.chance_repetitions,
                                         mix_seed(opts.seed, 0xc4a7ce));

    // pooled windowed curve over all test predictions
    std::map<std::string, eval::SessionOutcomes> sessions;
    for (const auto& fr : report.folds) {
        if (fr.skipped) continue;
        for (const auto& tp : fr.predictions) {
            auto& so = sessions[tp.session_id];
            so.session_id = tp.session_id;
            so.turns.push_back({tp.turn_index, tp.speaker_id, tp.truth, tp.pred});
        }
    }
    std::vector<eval::SessionOutcomes> session_list;
    for (auto& [id, so] : sessions) {
        std::sort(so.turns.begin(), so.turns.end(),
                  [](const eval::TurnOutcome& a, const eval::TurnOutcome& b) {
                      return a.turn_index < b.turn_index;
                  });
        session_list.push_back(std::move(so));
    }
    if (!session_list.empty()) {
        report.curve = eval::recall_curve(session_list, opts.windows);
        for (int w : opts.windows)
            report.fn_correction[w] = eval::fn_correction_rate(session_list, {w});
    }
    return report;
}

std::vector<BehaviorClass> fuse_posterior_mean(const Matrix& probs_a, const Matrix& probs_b) {
    if (!probs_a.same_shape(probs_b))
        fail("fuse: posterior shapes differ (", probs_a.rows, "x", probs_a.cols, " vs ",
             probs_b.rows, "x", probs_b.cols, ")");
    std::vector<BehaviorClass> out(probs_a.rows);
    for (size_t r = 0; r < probs_a.rows; ++r) {
        int best = 0;
        double best_v = -1.0;
        for (size_t c = 0; c < probs_a.cols; ++c) {
            double v = 0.5 * (probs_a(r, c) + probs_b(r, c));
            if (v > best_v) {
                best_v = v;
                best = static_cast<int>(c);
            }
        }
        out[r] = static_cast<BehaviorClass>(best);
    }
    return out;
}

LabeledDataset concat_features(const LabeledDataset& a, const LabeledDataset& b) {
    std::map<std::pair<std::string, int>, const Sample*> index;
    for (const auto& s : b.samples) index[{s.session_id, s.turn_index}] = &s;
    if (index.size() != b.samples.size()) fail("concat_features: duplicate turns in second set");
    if (a.samples.size() != b.samples.size())
        fail("concat_features: turn sets differ in size (", a.samples.size(), " vs ",
             b.samples.size(), ")");
    LabeledDataset out;
    for (const auto& s : a.samples) {
        auto it = index.find({s.session_id, s.turn_index});
        if (it == index.end())
            fail("concat_features: no match for session '", s.session_id, "' turn ",
                 s.turn_index);
        if (!s.features || !it->second->features)
            fail("concat_features: missing feature vectors");
        Sample merged = s;
        merged.features->insert(merged.features->end(), it->second->features->begin(),
                                it->second->features->end());
        out.samples.push_back(std::move(merged));
    }
    return out;
}

namespace {

json grid_point_json(const GridPoint& gp) {
    json j;
    j["hidden"] = gp.hidden;
    j["batch_size"] = gp.batch_size;
    j["weight_method"] = model::to_string(gp.weight_method);
    j["optimizer"] = model::to_string(gp.optimizer);
    j["learning_rate"] = gp.learning_rate;
    if (gp.decay_factor) j["decay_factor"] = *gp.decay_factor;
    else j["decay_factor"] = nullptr;
    return j;
}

}  // namespace

json report_to_json(const ExperimentReport& report) {
    json doc;
    doc["modality"] = report.modality;
    doc["scheme"] = report.scheme;
    doc["seed"] = report.seed;
    doc["input_dim"] = report.input_dim;
    doc["aggregate"] = {{"mean_uar", report.mean_uar},
                        {"std_uar", report.std_uar},
                        {"n_folds", report.n_folds},
                        {"n_skipped", report.n_skipped}};
    doc["chance"] = {{"mean", report.chance.mean},
                     {"stddev", report.chance.stddev},
                     {"repetitions", report.chance_repetitions}};
    doc["priors"] = report.priors;

    doc["param_counts"] = json::array();
    for (const auto& row : report.param_counts) {
        json j;
        j["hidden"] = row.hidden;
        j["params"] = row.params;
        if (report.scheme != "None") {
            j["hidden_halved"] = row.hidden_halved;
            j["params_halved"] = row.params_halved;
        }
        doc["param_counts"].push_back(std::move(j));
    }

    doc["folds"] = json::array();
    for (const auto& fr : report.folds) {
        json j;
        j["test_couple"] = fr.test_couple;
        j["skipped"] = fr.skipped;
        if (fr.skipped) {
            j["skip_reason"] = fr.skip_reason;
        } else {
            j["test_uar"] = fr.test_uar;
            json cm = json::array();
            for (int r = 0; r < 3; ++r) cm.push_back(fr.test_cm.m[r]);
            j["confusion"] = cm;
            j["parts"] = json::array();
            for (const auto& po : fr.parts) {
                json pj;
                pj["part"] = po.part;
                pj["config_index"] = po.config_index;
                pj["config"] = grid_point_json(po.chosen);
                pj["val_uar"] = po.best_val_uar;
                pj["skipped_configs"] = po.skipped_configs;
                j["parts"].push_back(std::move(pj));
            }
        }
        doc["folds"].push_back(std::move(j));
    }

    doc["curve"] = json::array();
    for (const auto& row : report.curve) {
        json j;
        j["window_size"] = row.window_size;
        for (int c = 0; c < 3; ++c) {
            const char* name = to_string(static_cast<BehaviorClass>(c));
            if (row.recall[c]) j[std::string(name) + "_recall"] = *row.recall[c];
            else j[std::string(name) + "_recall"] = nullptr;
        }
        j["uar"] = row.uar;
        doc["curve"].push_back(std::move(j));
    }

    doc["fn_correction"] = json::object();
    for (const auto& [w, rate] : report.fn_correction) {
        if (rate) doc["fn_correction"][std::to_string(w)] = *rate;
        else doc["fn_correction"][std::to_string(w)] = nullptr;
    }
    return doc;
}

std::string render_report_table(const std::vector<json>& reports) {
    // scheme -> modality -> "mean (std)"
    std::map<std::string, std::map<std::string, std::string>> cells;
    std::set<std::string> modalities;
    const std::vector<std::string> scheme_order = {"None", "Gender", "Role", "Content"};

    for (const auto& doc : reports) {
        std::string scheme = doc.at("scheme").get<std::string>();
        std::string modality = doc.at("modality").get<std::string>();
        double mean = doc.at("aggregate").at("mean_uar").get<double>() * 100.0;
        double stddev = doc.at("aggregate").at("std_uar").get<double>() * 100.0;
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.2f (%.2f)", mean, stddev);
        cells[scheme][modality] = buf;
        modalities.insert(modality);
    }

    std::ostringstream os;
    os << "Mean (std. deviation) test-fold UAR %\n\n";
    os << "Partition";
    for (const auto& m : modalities) os << "\t" << m;
    os << "\n";
    for (const auto& scheme : scheme_order) {
        if (!cells.contains(scheme)) continue;
        os << scheme;
        for (const auto& m : modalities) {
            os << "\t";
            auto it = cells[scheme].find(m);
            os << (it != cells[scheme].end() ? it->second : std::string("-"));
        }
        os << "\n";
    }
    for (const auto& [scheme, row] : cells) {
        if (std::find(scheme_order.begin(), scheme_order.end(), scheme) != scheme_order.end())
            continue;
        os << scheme;
        for (const auto& m : modalities) {
            os << "\t";
            auto it = row.find(m);
            os << (it != row.end() ? it->second : std::string("-"));
        }
        os << "\n";
    }
    return os.str();
}

void write_predictions_csv(const ExperimentReport& report, const std::filesystem::path& path) {
    csv::Writer w(path);
    w.row({"session_id", "turn_index", "speaker_id", "truth", "prediction"});
    for (const auto& fr : report.folds) {
        if (fr.skipped) continue;
        for (const auto& tp : fr.predictions)
            w.row({tp.session_id, std::to_string(tp.turn_index), tp.speaker_id,
                   to_string(tp.truth), to_string(tp.pred)});
    }
    w.close();
}

}  // namespace dyad::experiment
