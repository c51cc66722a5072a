#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dyad/corpus.hpp"

namespace dyad::align {

struct WordTiming {
    std::string word;
    int64_t start_ms = 0;
    int64_t end_ms = 0;
    int turn_index = -1;  // -1 = not yet assigned
};

enum class ShiftDirection { Forward, Backward, None };

const char* to_string(ShiftDirection d);

// Per-turn record of the start-boundary move (the floor-taking boundary,
// shared with the previous turn's end). shift_ms = new_start - old_start.
struct BoundaryCorrection {
    int turn_index = 0;
    int64_t old_start_ms = 0;
    int64_t old_end_ms = 0;
    int64_t new_start_ms = 0;
    int64_t new_end_ms = 0;
    ShiftDirection direction = ShiftDirection::None;
    int64_t shift_ms = 0;
};

// A word whose span straddles the turn's original annotated start boundary.
// Words are never split; these are surfaced for inspection.
struct BoundaryCrossing {
    int turn_index = 0;
    std::string word;
    int64_t word_start_ms = 0;
    int64_t word_end_ms = 0;
    int64_t old_boundary_ms = 0;
};

// Lowercase, strip ASCII punctuation, collapse whitespace.
std::vector<std::string> normalize_tokens(const std::string& text);

struct AssignResult {
    std::vector<WordTiming> words;       // turn_index filled in
    std::vector<int> unalignable_turns;  // turns with no tokens, excluded downstream
};

// Assigns words to transcript turns in order. The concatenated normalized
// transcript tokens must equal the word sequence; the first divergence
// position is reported otherwise.
AssignResult assign_words_to_turns(const std::vector<WordTiming>& words,
                                   const std::vector<std::string>& transcript_texts);

struct CorrectionResult {
    std::vector<Turn> corrected;  // spans replaced; flagged turns keep their annotation
    std::vector<BoundaryCorrection> corrections;
    std::vector<int> skipped_turns;  // zero assigned words
    std::vector<BoundaryCrossing> crossings;
};

// Snaps each turn's span to its assigned words, then places each shared
// boundary between adjacent corrected turns at the midpoint of the inter-word
// gap (floor on odd gaps).
CorrectionResult correct_boundaries(const std::vector<Turn>& turns,
                                    const std::vector<WordTiming>& assigned_words);

struct LabeledSampleRow {
    int turn_index = 0;
    std::string speaker_id;
    int64_t start_ms = 0;
    int64_t end_ms = 0;
    BehaviorCode code = BehaviorCode::Other;
    std::string text;
};

struct EmitResult {
    std::vector<LabeledSampleRow> rows;
    int omitted = 0;
};

EmitResult emit_labeled_samples(const CorrectionResult& correction);

std::vector<WordTiming> load_words_file(const std::filesystem::path& path);

struct SessionCorrection {
    std::string session_id;
    CorrectionResult result;
};

// Runs assignment + correction for every session that has a words file and
// replaces the turn spans in place. Sessions without words are left alone.
std::vector<SessionCorrection> correct_corpus(Corpus& corpus);

void write_correction_report(const std::vector<SessionCorrection>& corrections,
                             const std::filesystem::path& report_path,
                             const std::filesystem::path& crossings_path);

}  // namespace dyad::align
