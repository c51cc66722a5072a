#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "dyad/corpus.hpp"

namespace dyad::features {

enum class Modality { Acoustic, Lexical };

const char* to_string(Modality m);
Modality modality_from_string(const std::string& s, const std::string& context);

inline constexpr int kAcousticDim = 88;
inline constexpr int kLexicalDim = 600;

// Frame-level descriptors for one turn: T rows (10 ms frames) x D channels.
struct FrameMatrix {
    std::vector<std::string> channel_names;
    size_t rows = 0;
    std::vector<double> data;  // row-major

    double at(size_t r, size_t c) const { return data[r * channel_names.size() + c]; }
};

enum class Functional {
    Mean,
    Cv,
    P20,
    P50,
    P80,
    RangeP20P80,
    RisingSlopeMean,
    RisingSlopeStd,
    FallingSlopeMean,
    FallingSlopeStd,
};

const char* to_string(Functional f);
Functional functional_from_string(const std::string& s, const std::string& context);

// Ordered channel -> functional selection; the output vector is laid out in
// this order. The default acoustic recipe totals 88 dimensions.
struct FunctionalRecipe {
    std::vector<std::pair<std::string, std::vector<Functional>>> channels;

    int output_dim() const;
};

FunctionalRecipe default_recipe();
FunctionalRecipe load_recipe(const std::filesystem::path& path);
void save_recipe(const FunctionalRecipe& recipe, const std::filesystem::path& path);

// Percentiles interpolate linearly at rank p*(n-1)/100 over sorted values;
// cv is population std over mean (0 when |mean| < 1e-8); slope functionals
// summarize the positive/negative first differences, 0 when the set is empty.
std::vector<double> functionals(const FrameMatrix& frames, const FunctionalRecipe& recipe);

// Whole-session frame file: first column frame_ms, remaining columns named
// channels. Turns slice rows by [start_ms, end_ms).
struct SessionFrames {
    std::vector<std::string> channel_names;
    std::vector<int64_t> frame_ms;
    std::vector<double> data;  // row-major, frames x channels
};

SessionFrames load_frames(const std::filesystem::path& path);
FrameMatrix slice_frames(const SessionFrames& frames, int64_t start_ms, int64_t end_ms);

// Turn-feature CSV: session_id,turn_index,v0..v{dim-1}
using TurnKey = std::pair<std::string, int>;

std::map<TurnKey, std::vector<double>> load_turn_features(const std::filesystem::path& path,
                                                          int expected_dim);
void save_turn_features(const std::map<TurnKey, std::vector<double>>& rows, int dim,
                        const std::filesystem::path& path);

// Assigns a 600-dim embedding to every sample; errors name the first
// session/turn without a row.
void load_lexical(const std::filesystem::path& path, LabeledDataset& dataset,
                  int expected_dim = kLexicalDim);

// Deterministic hashed bag-of-words stand-in for an external sentence
// embedder: each normalized token hashes (with seed) to an index and a sign,
// counts accumulate, and the vector is scaled by 1/sqrt(token count).
std::vector<double> fallback_embed(const std::string& text, int dim, uint64_t seed);

// Computes acoustic functionals for every sample from the sessions' frame
// files, using the turn spans recorded on the samples.
void featurize_acoustic(const Corpus& corpus, LabeledDataset& dataset,
                        const FunctionalRecipe& recipe);

void featurize_lexical_fallback(LabeledDataset& dataset, int dim, uint64_t seed);

}  // namespace dyad::features
