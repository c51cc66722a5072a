#include "dyad/cli.hpp"

#include <iostream>
#include <set>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "dyad/align.hpp"
#include "dyad/corpus.hpp"
#include "dyad/csv.hpp"
#include "dyad/eval.hpp"
#include "dyad/experiment.hpp"
#include "dyad/features.hpp"
#include "dyad/model.hpp"
#include "dyad/synth.hpp"

namespace dyad::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// outputs are write-once per run directory
void require_fresh(const fs::path& primary_output) {
    if (fs::exists(primary_output))
        fail(primary_output.string(), ": already exists; choose a fresh output directory");
}

void write_run_manifest(const fs::path& out_dir, const std::string& subcommand,
                        const json& resolved) {
    json doc;
    doc["subcommand"] = subcommand;
    doc["resolved"] = resolved;
    write_text_file(out_dir / "run_manifest.json", doc.dump(2) + "\n");
}

struct SynthArgs {
    std::string spec_path;
    std::string out_dir;
    int64_t seed = -1;
};

int cmd_synth(const SynthArgs& args) {
    synth::SynthSpec spec;
    if (!args.spec_path.empty()) spec = synth::spec_from_json_file(args.spec_path);
    if (args.seed >= 0) spec.seed = static_cast<uint64_t>(args.seed);

    require_fresh(fs::path(args.out_dir) / "manifest.json");
    auto result = synth::generate(spec, args.out_dir);
    auto report = synth::verify(result.manifest_path, result.sidecar_path);
    for (const auto& v : report.violations) std::cerr << "[synth] violation: " << v << "\n";

    json resolved;
    synth::spec_to_json_file(spec, fs::path(args.out_dir) / "synth_spec_resolved.json");
    resolved["spec_file"] = "synth_spec_resolved.json";
    resolved["seed"] = spec.seed;
    resolved["manifest"] = result.manifest_path.filename().string();
    resolved["sidecar"] = result.sidecar_path.filename().string();
    resolved["verify_violations"] = report.violations.size();
    write_run_manifest(args.out_dir, "synth", resolved);

    std::cerr << "[synth] wrote " << result.manifest_path.string() << " ("
              << report.alignable_turns << " alignable turns, max span error "
              << report.max_span_error_ms << " ms)\n";
    return report.ok() ? 0 : 1;
}

struct AlignArgs {
    std::string manifest;
    std::string out_dir;
};

int cmd_align(const AlignArgs& args) {
    fs::path out(args.out_dir);
    require_fresh(out / "correction_report.csv");
    Corpus corpus = load_corpus(args.manifest);
    auto corrections = align::correct_corpus(corpus);
    fs::create_directories(out);
    align::write_correction_report(corrections, out / "correction_report.csv",
                                   out / "boundary_crossings.csv");

    csv::Writer samples(out / "labeled_samples.csv");
    samples.row({"session_id", "turn_index", "speaker_id", "start_ms", "end_ms", "code",
                 "text"});
    int omitted = 0;
    for (const auto& sc : corrections) {
        auto emitted = align::emit_labeled_samples(sc.result);
        omitted += emitted.omitted;
        for (const auto& row : emitted.rows)
            samples.row({sc.session_id, std::to_string(row.turn_index), row.speaker_id,
                         std::to_string(row.start_ms), std::to_string(row.end_ms),
                         to_string(row.code), row.text});
    }
    samples.close();

    json resolved;
    resolved["manifest"] = args.manifest;
    resolved["sessions_corrected"] = corrections.size();
    resolved["turns_omitted"] = omitted;
    write_run_manifest(out, "align", resolved);
    std::cerr << "[align] corrected " << corrections.size() << " sessions, omitted " << omitted
              << " unalignable turns\n";
    return 0;
}

struct FeaturizeArgs {
    std::string manifest;
    std::string out_dir;
    std::string modality = "acoustic";
    std::string recipe_path;
    std::string dump_recipe;
    bool no_boundary_correction = false;
    bool fallback_embed = false;
    int dim = features::kLexicalDim;
    uint64_t seed = 0;
};

int cmd_featurize(const FeaturizeArgs& args) {
    if (!args.dump_recipe.empty()) {
        features::save_recipe(features::default_recipe(), args.dump_recipe);
        std::cerr << "[featurize] wrote default recipe to " << args.dump_recipe << "\n";
        return 0;
    }
    fs::path out(args.out_dir);
    require_fresh(out / (args.modality + "_features.csv"));
    Corpus corpus = load_corpus(args.manifest);
    if (!args.no_boundary_correction) align::correct_corpus(corpus);
    LabeledDataset dataset = merge_labels(corpus);

    auto modality = features::modality_from_string(args.modality, "featurize");
    int dim = 0;
    if (modality == features::Modality::Acoustic) {
        auto recipe = args.recipe_path.empty() ? features::default_recipe()
                                               : features::load_recipe(args.recipe_path);
        features::featurize_acoustic(corpus, dataset, recipe);
        dim = recipe.output_dim();
    } else if (args.fallback_embed) {
        features::featurize_lexical_fallback(dataset, args.dim, args.seed);
        dim = args.dim;
    } else {
        if (!corpus.embeddings_file)
            fail("featurize: manifest has no embeddings_file; use --fallback-embed");
        features::load_lexical(corpus.base_dir / *corpus.embeddings_file, dataset, args.dim);
        dim = args.dim;
    }

    std::map<features::TurnKey, std::vector<double>> rows;
    for (const auto& s : dataset.samples) rows[{s.session_id, s.turn_index}] = *s.features;
    features::save_turn_features(rows, dim, out / (args.modality + "_features.csv"));

    json resolved;
    resolved["manifest"] = args.manifest;
    resolved["modality"] = args.modality;
    resolved["dim"] = dim;
    resolved["boundary_correction"] = !args.no_boundary_correction;
    resolved["seed"] = args.seed;
    write_run_manifest(out, "featurize", resolved);
    std::cerr << "[featurize] wrote " << rows.size() << " " << args.modality
              << " vectors (dim " << dim << ")\n";
    return 0;
}

struct RunArgs {
    std::string config_path;
    std::string out_dir;  // overrides config
    int jobs = 0;         // overrides config when > 0
    int64_t seed = -1;    // overrides config when >= 0
};

experiment::GridSpace grid_from_config(const json& cfg, features::Modality modality) {
    experiment::GridSpace space = modality == features::Modality::Acoustic
                                      ? experiment::GridSpace::default_acoustic()
                                      : experiment::GridSpace::default_lexical();
    if (!cfg.contains("grid")) return space;
    const json& g = cfg["grid"];
    if (g.contains("hidden_configs"))
        space.hidden_configs = g["hidden_configs"].get<std::vector<std::vector<int>>>();
    if (g.contains("batch_sizes")) space.batch_sizes = g["batch_sizes"].get<std::vector<int>>();
    if (g.contains("weight_methods")) {
        space.weight_methods.clear();
        for (const auto& m : g["weight_methods"])
            space.weight_methods.push_back(
                model::weight_method_from_string(m.get<std::string>(), "grid.weight_methods"));
    }
    if (g.contains("optimizers")) {
        space.optimizers.clear();
        for (const auto& o : g["optimizers"])
            space.optimizers.push_back(
                model::optimizer_from_string(o.get<std::string>(), "grid.optimizers"));
    }
    if (g.contains("learning_rates"))
        space.learning_rates = g["learning_rates"].get<std::vector<double>>();
    if (g.contains("decay_factors")) {
        space.decay_factors.clear();
        for (const auto& d : g["decay_factors"]) {
            if (d.is_null()) space.decay_factors.push_back(std::nullopt);
            else space.decay_factors.push_back(d.get<double>());
        }
    }
    return space;
}

int cmd_run(const RunArgs& args) {
    fs::path config_path(args.config_path);
    json cfg;
    try {
        cfg = json::parse(read_text_file(config_path));
    } catch (const json::exception& e) {
        fail(config_path.string(), ": config parse error: ", e.what());
    }
    fs::path base = config_path.parent_path();

    if (!cfg.contains("manifest")) fail(config_path.string(), ": config missing 'manifest'");
    fs::path manifest = base / cfg["manifest"].get<std::string>();
    auto modality = features::modality_from_string(
        cfg.value("modality", std::string("acoustic")), "config.modality");

    experiment::RunOptions opts;
    opts.scheme = scheme_from_string(cfg.value("scheme", std::string("none")), "config.scheme");
    opts.seed = cfg.value("seed", 1ull);
    opts.jobs = cfg.value("jobs", 1);
    if (cfg.contains("windows")) opts.windows = cfg["windows"].get<std::vector<int>>();
    opts.chance_repetitions = cfg.value("chance_repetitions", 1000);
    if (cfg.contains("train")) {
        const json& t = cfg["train"];
        opts.train.max_epochs = t.value("max_epochs", opts.train.max_epochs);
        opts.train.patience = t.value("patience", opts.train.patience);
        std::string mode = t.value("decay_mode", std::string("plateau"));
        if (mode == "plateau") opts.train.decay_mode = model::DecayMode::Plateau;
        else if (mode == "exponential") opts.train.decay_mode = model::DecayMode::Exponential;
        else fail(config_path.string(), ": unknown decay_mode '", mode, "'");
    }
    if (args.jobs > 0) opts.jobs = args.jobs;
    if (args.seed >= 0) opts.seed = static_cast<uint64_t>(args.seed);

    fs::path out = !args.out_dir.empty()
                       ? fs::path(args.out_dir)
                       : base / cfg.value("out_dir", std::string("run_out"));
    require_fresh(out / "report.json");
    fs::create_directories(out);

    // pipeline: ingest -> boundary correction -> merge -> features
    Corpus corpus = load_corpus(manifest);
    json fcfg = cfg.value("features", json::object());
    bool correct = fcfg.value("apply_boundary_correction", true);
    if (correct) align::correct_corpus(corpus);
    MergeOptions merge_opts;
    merge_opts.reindex_after_exclusion = fcfg.value("reindex_after_exclusion", false);
    LabeledDataset dataset = merge_labels(corpus, merge_opts);

    if (modality == features::Modality::Acoustic) {
        auto recipe = fcfg.contains("recipe") && !fcfg["recipe"].is_null()
                          ? features::load_recipe(base / fcfg["recipe"].get<std::string>())
                          : features::default_recipe();
        features::featurize_acoustic(corpus, dataset, recipe);
    } else {
        std::string source = fcfg.value("lexical_source", std::string("embeddings"));
        if (source == "fallback") {
            features::featurize_lexical_fallback(dataset, fcfg.value("fallback_dim", 600),
                                                 opts.seed);
        } else if (source == "embeddings") {
            if (!corpus.embeddings_file)
                fail(config_path.string(), ": manifest has no embeddings_file");
            features::load_lexical(corpus.base_dir / *corpus.embeddings_file, dataset,
                                   fcfg.value("dim", features::kLexicalDim));
        } else {
            fail(config_path.string(), ": unknown lexical_source '", source, "'");
        }
    }

    auto space = grid_from_config(cfg, modality);
    space.modality = modality;

    auto report = experiment::run_experiment(dataset, space, opts);
    json report_json = experiment::report_to_json(report);
    write_text_file(out / "report.json", report_json.dump(2) + "\n");
    write_text_file(out / "report.txt", experiment::render_report_table({report_json}));
    if (!report.curve.empty()) eval::write_curve_csv(report.curve, out / "recall_curve.csv");
    experiment::write_predictions_csv(report, out / "predictions.csv");

    json resolved = cfg;
    resolved["seed"] = opts.seed;
    resolved["jobs"] = opts.jobs;
    resolved["scheme"] = to_string(opts.scheme);
    resolved["modality"] = features::to_string(modality);
    write_run_manifest(out, "run", resolved);

    std::cerr << "[run] " << report.scheme << "/" << report.modality << ": mean UAR "
              << report.mean_uar << " (std " << report.std_uar << ") over "
              << report.n_folds - report.n_skipped << " folds (" << report.n_skipped
              << " skipped); chance " << report.chance.mean << "\n";
    return 0;
}

struct EvaluateArgs {
    std::string pred_path;
    std::string truth_path;
    std::string out_dir;
    std::string windows = "1,3,5,7,9,11";
    bool same_speaker = false;
};

std::vector<int> parse_windows(const std::string& s) {
    std::vector<int> out;
    std::string cur;
    for (char c : s + ",") {
        if (c == ',') {
            if (!cur.empty()) out.push_back(static_cast<int>(parse_int(cur, "--windows")));
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (out.empty()) fail("--windows: no window sizes given");
    for (size_t i = 0; i < out.size(); ++i) {
        if (out[i] < 1 || out[i] % 2 == 0) fail("--windows: sizes must be odd, got ", out[i]);
        if (i > 0 && out[i] <= out[i - 1]) fail("--windows: sizes must be ascending");
    }
    return out;
}

int cmd_evaluate(const EvaluateArgs& args) {
    auto truth_table = csv::read_file(args.truth_path);
    auto pred_table = csv::read_file(args.pred_path);
    int t_session = truth_table.column("session_id", args.truth_path);
    int t_turn = truth_table.column("turn_index", args.truth_path);
    int t_label = truth_table.column("label", args.truth_path);
    int t_speaker = -1;
    for (size_t i = 0; i < truth_table.header.size(); ++i)
        if (truth_table.header[i] == "speaker_id") t_speaker = static_cast<int>(i);
    if (args.same_speaker && t_speaker < 0)
        fail(args.truth_path, ": --same-speaker needs a speaker_id column");
    int p_session = pred_table.column("session_id", args.pred_path);
    int p_turn = pred_table.column("turn_index", args.pred_path);
    int p_label = pred_table.column("label", args.pred_path);

    std::map<std::pair<std::string, int>, BehaviorClass> preds;
    for (size_t i = 0; i < pred_table.rows.size(); ++i) {
        const auto& row = pred_table.rows[i];
        std::string ctx = args.pred_path + ":" + std::to_string(pred_table.line_numbers[i]);
        preds[{row[p_session], static_cast<int>(parse_int(row[p_turn], ctx))}] =
            class_from_string(row[p_label], ctx);
    }
    if (preds.size() != pred_table.rows.size()) fail(args.pred_path, ": duplicate turn keys");
    if (preds.size() != truth_table.rows.size())
        fail("prediction/truth sets differ in size (", preds.size(), " vs ",
             truth_table.rows.size(), ")");

    std::map<std::string, eval::SessionOutcomes> sessions;
    std::set<std::pair<std::string, int>> truth_keys;
    for (size_t i = 0; i < truth_table.rows.size(); ++i) {
        const auto& row = truth_table.rows[i];
        std::string ctx = args.truth_path + ":" + std::to_string(truth_table.line_numbers[i]);
        std::pair<std::string, int> key = {row[t_session],
                                           static_cast<int>(parse_int(row[t_turn], ctx))};
        if (!truth_keys.insert(key).second)
            fail(ctx, ": duplicate turn key '", key.first, "'/", key.second);
        auto it = preds.find(key);
        if (it == preds.end())
            fail(ctx, ": no prediction for session '", key.first, "' turn ", key.second);
        auto& so = sessions[key.first];
        so.session_id = key.first;
        so.turns.push_back({key.second, t_speaker >= 0 ? row[t_speaker] : "",
                            class_from_string(row[t_label], ctx), it->second});
    }

    std::vector<eval::SessionOutcomes> session_list;
    for (auto& [id, so] : sessions) {
        std::sort(so.turns.begin(), so.turns.end(),
                  [](const eval::TurnOutcome& a, const eval::TurnOutcome& b) {
                      return a.turn_index < b.turn_index;
                  });
        session_list.push_back(std::move(so));
    }

    auto windows = parse_windows(args.windows);
    auto curve = eval::recall_curve(session_list, windows, eval::kDefaultTargets,
                                    args.same_speaker);
    fs::path out(args.out_dir);
    require_fresh(out / "metrics.json");
    fs::create_directories(out);
    eval::write_curve_csv(curve, out / "recall_curve.csv");

    eval::ConfusionMatrix exact = eval::windowed_confusion(session_list, {1});
    json metrics;
    metrics["exact"] = {{"uar", eval::uar(exact)}};
    json cm = json::array();
    for (int r = 0; r < 3; ++r) cm.push_back(exact.m[r]);
    metrics["exact"]["confusion"] = cm;
    metrics["fn_correction"] = json::object();
    for (int w : windows) {
        auto rate = eval::fn_correction_rate(session_list, {w}, eval::kDefaultTargets,
                                             args.same_speaker);
        if (rate) metrics["fn_correction"][std::to_string(w)] = *rate;
        else metrics["fn_correction"][std::to_string(w)] = nullptr;
    }
    write_text_file(out / "metrics.json", metrics.dump(2) + "\n");

    json resolved;
    resolved["pred"] = args.pred_path;
    resolved["truth"] = args.truth_path;
    resolved["windows"] = windows;
    resolved["same_speaker"] = args.same_speaker;
    write_run_manifest(out, "evaluate", resolved);
    std::cerr << "[evaluate] exact UAR " << eval::uar(exact) << " over "
              << truth_table.rows.size() << " turns, " << session_list.size() << " sessions\n";
    return 0;
}

struct ReportArgs {
    std::vector<std::string> inputs;
    std::string out_path;
};

int cmd_report(const ReportArgs& args) {
    std::vector<json> reports;
    for (const auto& path : args.inputs) {
        try {
            reports.push_back(json::parse(read_text_file(path)));
        } catch (const json::exception& e) {
            fail(path, ": report parse error: ", e.what());
        }
    }
    std::string table;
    try {
        table = experiment::render_report_table(reports);
    } catch (const json::exception& e) {
        fail("report input missing required fields: ", e.what());
    }
    std::cout << table;
    if (!args.out_path.empty()) {
        write_text_file(args.out_path, table);
        json resolved;
        resolved["inputs"] = args.inputs;
        resolved["table"] = fs::path(args.out_path).filename().string();
        json doc;
        doc["subcommand"] = "report";
        doc["resolved"] = resolved;
        write_text_file(fs::path(args.out_path).parent_path() / "report_manifest.json",
                        doc.dump(2) + "\n");
    }
    return 0;
}

}  // namespace

int dispatch(const std::vector<std::string>& args) {
    CLI::App app{"turn-level behavior classification workbench", "dyad"};
    app.require_subcommand(1);

    SynthArgs synth_args;
    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic corpus");
    synth_cmd->add_option("--spec", synth_args.spec_path, "synth spec JSON");
    synth_cmd->add_option("--out", synth_args.out_dir, "output directory")->required();
    synth_cmd->add_option("--seed", synth_args.seed, "seed override");

    AlignArgs align_args;
    auto* align_cmd = app.add_subcommand("align", "correct annotated turn boundaries");
    align_cmd->add_option("--manifest", align_args.manifest, "corpus manifest")->required();
    align_cmd->add_option("--out", align_args.out_dir, "output directory")->required();

    FeaturizeArgs feat_args;
    auto* feat_cmd = app.add_subcommand("featurize", "compute turn feature vectors");
    feat_cmd->add_option("--manifest", feat_args.manifest, "corpus manifest");
    feat_cmd->add_option("--out", feat_args.out_dir, "output directory");
    feat_cmd->add_option("--modality", feat_args.modality, "acoustic or lexical");
    feat_cmd->add_option("--recipe", feat_args.recipe_path, "functional recipe JSON");
    feat_cmd->add_option("--dump-recipe", feat_args.dump_recipe,
                         "write the default recipe to this path and exit");
    feat_cmd->add_flag("--no-boundary-correction", feat_args.no_boundary_correction,
                       "use annotated spans as-is");
    feat_cmd->add_flag("--fallback-embed", feat_args.fallback_embed,
                       "hashed bag-of-words instead of an embeddings file");
    feat_cmd->add_option("--dim", feat_args.dim, "lexical dimension");
    feat_cmd->add_option("--seed", feat_args.seed, "fallback embedder seed");

    RunArgs run_args;
    auto* run_cmd = app.add_subcommand("run", "run a cross-validation experiment");
    run_cmd->add_option("--config", run_args.config_path, "experiment config JSON")->required();
    run_cmd->add_option("--out", run_args.out_dir, "output directory override");
    run_cmd->add_option("--jobs", run_args.jobs, "parallel fold workers");
    run_cmd->add_option("--seed", run_args.seed, "seed override");

    EvaluateArgs eval_args;
    auto* eval_cmd = app.add_subcommand("evaluate", "score predictions against truth");
    eval_cmd->add_option("--pred", eval_args.pred_path, "predictions CSV")->required();
    eval_cmd->add_option("--truth", eval_args.truth_path, "truth CSV")->required();
    eval_cmd->add_option("--out", eval_args.out_dir, "output directory")->required();
    eval_cmd->add_option("--windows", eval_args.windows, "comma-separated odd window sizes");
    eval_cmd->add_flag("--same-speaker", eval_args.same_speaker,
                       "restrict windows to the truth turn's speaker");

    ReportArgs report_args;
    auto* report_cmd = app.add_subcommand("report", "render a results table from report JSONs");
    report_cmd->add_option("--inputs", report_args.inputs, "report.json files")->required();
    report_cmd->add_option("--out", report_args.out_path, "also write the table here");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        std::ostringstream os;
        int code = app.exit(e, os, os);
        std::cerr << os.str();
        return code == 0 ? 0 : 1;
    }

    try {
        if (synth_cmd->parsed()) return cmd_synth(synth_args);
        if (align_cmd->parsed()) return cmd_align(align_args);
        if (feat_cmd->parsed()) {
            if (feat_args.dump_recipe.empty() &&
                (feat_args.manifest.empty() || feat_args.out_dir.empty()))
                fail("featurize: --manifest and --out are required");
            return cmd_featurize(feat_args);
        }
        if (run_cmd->parsed()) return cmd_run(run_args);
        if (eval_cmd->parsed()) return cmd_evaluate(eval_args);
        if (report_cmd->parsed()) return cmd_report(report_args);
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}

}  // namespace dyad::cli
