#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dyad/corpus.hpp"

namespace dyad::synth {

// Class priors in BehaviorClass order (Hostile, Constructive, Positive).
// Defaults are the per-content proportions of the reference sample-count
// table the tests pin down.
struct SynthSpec {
    int n_couples = 10;
    int neutral_sessions = 1;
    int stress_sessions = 1;
    int turns_per_session = 30;
    std::array<double, 3> neutral_priors = {54.0 / 8105.0, 7584.0 / 8105.0, 467.0 / 8105.0};
    std::array<double, 3> stress_priors = {122.0 / 6890.0, 5866.0 / 6890.0, 902.0 / 6890.0};
    double excluded_rate = 0.0;  // chance a turn is coded DysphoricAffect/Other

    // label clustering: next label repeats with p_stay, else redrawn from the
    // priors (stationary distribution stays at the priors)
    double p_stay = 0.0;

    // turn-level class separation in units of the within-class std (class
    // means sit on an equilateral simplex with side mean_shift)
    double mean_shift = 2.0;
    int lexical_dim = 600;
    double channel_baseline = 10.0;  // keeps acoustic channel means away from 0
    double frame_noise = 0.25;

    // word timing layout (ms); inter-turn gaps are even so the true boundary
    // midpoint is integral
    int words_per_turn_min = 4;
    int words_per_turn_max = 9;
    int word_dur_min_ms = 180;
    int word_dur_max_ms = 420;
    int intra_gap_max_ms = 120;
    int inter_gap_min_ms = 100;
    int inter_gap_max_ms = 600;

    // annotated boundaries = true boundaries + uniform(-lag, +lag), clamped
    // to keep spans ordered
    int lag_max_ms = 0;

    bool emit_words = true;
    bool emit_frames = false;
    bool emit_embeddings = false;

    uint64_t seed = 1;
};

SynthSpec spec_from_json_file(const std::filesystem::path& path);
void spec_to_json_file(const SynthSpec& spec, const std::filesystem::path& path);

struct GenerateResult {
    std::filesystem::path manifest_path;
    std::filesystem::path sidecar_path;
};

// Writes the full interchange file tree (manifest, speakers, turns,
// transcripts, optional words/frames/embeddings) plus a ground-truth sidecar
// with the pre-lag spans. Deterministic in spec.seed.
GenerateResult generate(const SynthSpec& spec, const std::filesystem::path& out_dir);

struct VerifyReport {
    std::vector<std::string> violations;
    double max_span_error_ms = 0.0;  // corrected vs sidecar truth
    int alignable_turns = 0;

    bool ok() const { return violations.empty(); }
};

// Re-validates the corpus invariants and, where word files exist, checks that
// boundary correction recovers the sidecar's true spans within 1 ms.
VerifyReport verify(const std::filesystem::path& manifest_path,
                    const std::filesystem::path& sidecar_path);

}  // namespace dyad::synth
