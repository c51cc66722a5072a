#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <nlohmann/json.hpp>

#include "dyad/cli.hpp"
#include "dyad/common.hpp"
#include "dyad/features.hpp"
#include "support/temp_dir.hpp"

using namespace dyad;
using testsupport::TempDir;
using nlohmann::json;

namespace {

std::string p(const std::filesystem::path& path) { return path.string(); }

// small corpus with lexical embeddings and clear class signal
void synth_corpus(const std::filesystem::path& dir, uint64_t seed = 5) {
    json spec;
    spec["n_couples"] = 5;
    spec["turns_per_session"] = 16;
    spec["neutral_priors"] = {0.25, 0.5, 0.25};
    spec["stress_priors"] = {0.25, 0.5, 0.25};
    spec["mean_shift"] = 6.0;
    spec["lexical_dim"] = 12;
    spec["emit_embeddings"] = true;
    spec["lag_max_ms"] = 300;
    spec["seed"] = seed;
    write_text_file(dir / "spec.json", spec.dump());
    REQUIRE(cli::dispatch({"synth", "--spec", p(dir / "spec.json"), "--out",
                           p(dir / "corpus")}) == 0);
}

void write_exp_config(const std::filesystem::path& dir, int jobs = 1) {
    json cfg;
    cfg["manifest"] = "corpus/manifest.json";
    cfg["modality"] = "lexical";
    cfg["scheme"] = "none";
    cfg["seed"] = 9;
    cfg["jobs"] = jobs;
    cfg["out_dir"] = "run_out";
    cfg["features"] = {{"lexical_source", "embeddings"}, {"dim", 12}};
    cfg["grid"] = {{"hidden_configs", json::array({json::array({8, 4})})},
                   {"batch_sizes", {16}},
                   {"weight_methods", {"inverse_freq_max"}},
                   {"optimizers", {"adam"}},
                   {"learning_rates", {1e-2}},
                   {"decay_factors", json::array({nullptr})}};
    cfg["train"] = {{"max_epochs", 25}, {"patience", 8}};
    cfg["chance_repetitions"] = 200;
    write_text_file(dir / "exp.json", cfg.dump(2));
}

}  // namespace

namespace {

uint64_t hash_dir(const std::filesystem::path& dir) {
    uint64_t h = 14695981039346656037ull;
    for (const auto& entry : std::filesystem::recursive_directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        h ^= fnv1a64(entry.path().filename().string());
        h ^= fnv1a64(read_text_file(entry.path()));
    }
    return h;
}

}  // namespace

TEST_CASE("synth then run produces the full report file set") {
    TempDir dir("cli_smoke");
    synth_corpus(dir.path());
    write_exp_config(dir.path());

    uint64_t corpus_before = hash_dir(dir / "corpus");
    REQUIRE(cli::dispatch({"run", "--config", p(dir / "exp.json")}) == 0);
    CHECK(hash_dir(dir / "corpus") == corpus_before);  // inputs never mutate
    auto out = dir / "run_out";
    for (const char* name : {"report.json", "report.txt", "recall_curve.csv",
                             "predictions.csv", "run_manifest.json"})
        CHECK(std::filesystem::exists(out / name));

    auto report = json::parse(read_text_file(out / "report.json"));
    CHECK(report["aggregate"]["n_folds"] == 5);
    CHECK(report["modality"] == "lexical");
    CHECK(report["aggregate"]["mean_uar"].get<double>() > 0.8);  // 5-sigma signal

    // corpus side outputs
    CHECK(std::filesystem::exists(dir / "corpus" / "run_manifest.json"));
    CHECK(std::filesystem::exists(dir / "corpus" / "sidecar.json"));
}

TEST_CASE("identical seeds give byte-identical reports, independent of --jobs") {
    TempDir dir("cli_det");
    synth_corpus(dir.path());
    write_exp_config(dir.path());

    REQUIRE(cli::dispatch({"run", "--config", p(dir / "exp.json"), "--out",
                           p(dir / "out_a"), "--jobs", "1"}) == 0);
    REQUIRE(cli::dispatch({"run", "--config", p(dir / "exp.json"), "--out",
                           p(dir / "out_b"), "--jobs", "1"}) == 0);
    REQUIRE(cli::dispatch({"run", "--config", p(dir / "exp.json"), "--out",
                           p(dir / "out_c"), "--jobs", "8"}) == 0);

    for (const char* name : {"report.json", "report.txt", "recall_curve.csv",
                             "predictions.csv"}) {
        auto a = read_text_file(dir / "out_a" / name);
        CHECK(a == read_text_file(dir / "out_b" / name));
        CHECK(a == read_text_file(dir / "out_c" / name));
    }
}

TEST_CASE("align subcommand writes the correction reports") {
    TempDir dir("cli_align");
    synth_corpus(dir.path());
    REQUIRE(cli::dispatch({"align", "--manifest", p(dir / "corpus" / "manifest.json"),
                           "--out", p(dir / "aligned")}) == 0);
    auto report = read_text_file(dir / "aligned" / "correction_report.csv");
    CHECK(report.rfind("session_id,turn_index,direction,shift_ms\n", 0) == 0);
    CHECK(std::count(report.begin(), report.end(), '\n') == 1 + 5 * 2 * 16);
    CHECK(std::filesystem::exists(dir / "aligned" / "boundary_crossings.csv"));
    CHECK(std::filesystem::exists(dir / "aligned" / "labeled_samples.csv"));
}

TEST_CASE("featurize lexical with the fallback embedder") {
    TempDir dir("cli_feat");
    synth_corpus(dir.path());
    REQUIRE(cli::dispatch({"featurize", "--manifest", p(dir / "corpus" / "manifest.json"),
                           "--out", p(dir / "feats"), "--modality", "lexical",
                           "--fallback-embed", "--dim", "32", "--seed", "3"}) == 0);
    auto features = features::load_turn_features(dir / "feats" / "lexical_features.csv", 32);
    CHECK(features.size() == 5 * 2 * 16);
}

TEST_CASE("evaluate scores external predictions and emits the curve") {
    TempDir dir("cli_eval");
    write_text_file(dir / "truth.csv",
                    "session_id,turn_index,label\n"
                    "s1,0,Constructive\n"
                    "s1,1,Hostile\n"
                    "s1,2,Constructive\n"
                    "s1,3,Positive\n"
                    "s1,4,Constructive\n");
    write_text_file(dir / "pred.csv",
                    "session_id,turn_index,label\n"
                    "s1,0,Hostile\n"
                    "s1,1,Constructive\n"
                    "s1,2,Constructive\n"
                    "s1,3,Constructive\n"
                    "s1,4,Positive\n");
    REQUIRE(cli::dispatch({"evaluate", "--pred", p(dir / "pred.csv"), "--truth",
                           p(dir / "truth.csv"), "--windows", "1,3,5,7,9,11", "--out",
                           p(dir / "eval_out")}) == 0);
    auto curve = read_text_file(dir / "eval_out" / "recall_curve.csv");
    // header + 6 rows
    CHECK(std::count(curve.begin(), curve.end(), '\n') == 7);
    CHECK(curve.rfind("window_size,hostile_recall,positive_recall,constructive_recall,uar\n",
                      0) == 0);

    auto metrics = json::parse(read_text_file(dir / "eval_out" / "metrics.json"));
    // Hostile truth at 1 has a hostile pred at 0 (distance 1): corrected at w=3;
    // Positive truth at 3 has a positive pred at 4: corrected at w=3
    CHECK(metrics["fn_correction"]["3"].get<double>() == 1.0);
    CHECK(metrics["fn_correction"]["1"].get<double>() == 0.0);
}

TEST_CASE("report subcommand renders a partition-by-modality table") {
    TempDir dir("cli_report");
    json a = {{"scheme", "None"},
              {"modality", "acoustic"},
              {"aggregate", {{"mean_uar", 0.4536}, {"std_uar", 0.1285}}}};
    json b = {{"scheme", "None"},
              {"modality", "lexical"},
              {"aggregate", {{"mean_uar", 0.5742}, {"std_uar", 0.1445}}}};
    write_text_file(dir / "a.json", a.dump());
    write_text_file(dir / "b.json", b.dump());
    REQUIRE(cli::dispatch({"report", "--inputs", p(dir / "a.json"), p(dir / "b.json"),
                           "--out", p(dir / "table.txt")}) == 0);
    auto table = read_text_file(dir / "table.txt");
    CHECK(table.find("45.36 (12.85)") != std::string::npos);
    CHECK(table.find("57.42 (14.45)") != std::string::npos);
    CHECK(table.find("None") != std::string::npos);
}

TEST_CASE("outputs are write-once per run directory") {
    TempDir dir("cli_once");
    synth_corpus(dir.path());
    CHECK(cli::dispatch({"synth", "--spec", p(dir / "spec.json"), "--out",
                         p(dir / "corpus")}) == 1);  // corpus dir already populated
    write_exp_config(dir.path());
    REQUIRE(cli::dispatch({"run", "--config", p(dir / "exp.json"), "--out",
                           p(dir / "once")}) == 0);
    CHECK(cli::dispatch({"run", "--config", p(dir / "exp.json"), "--out",
                         p(dir / "once")}) == 1);
}

TEST_CASE("usage errors exit with status 1") {
    CHECK(cli::dispatch({"run"}) == 1);                       // missing --config
    CHECK(cli::dispatch({"frobnicate"}) == 1);                // unknown subcommand
    CHECK(cli::dispatch({"synth", "--what", "x"}) == 1);      // unknown flag
    CHECK(cli::dispatch({}) == 1);                            // no subcommand
    TempDir dir("cli_badcfg");
    write_text_file(dir / "bad.json", "{not json");
    CHECK(cli::dispatch({"run", "--config", p(dir / "bad.json")}) == 1);
}

TEST_CASE("dump-recipe emits the default 88-dim recipe") {
    TempDir dir("cli_recipe");
    REQUIRE(cli::dispatch({"featurize", "--dump-recipe", p(dir / "recipe.json")}) == 0);
    auto recipe = features::load_recipe(dir / "recipe.json");
    CHECK(recipe.output_dim() == 88);
}
