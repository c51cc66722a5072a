#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dyad/common.hpp"

namespace dyad {

// Per-turn annotation codes. The first five are the ordinal subset, in order;
// DysphoricAffect and Other stay in the raw corpus and drop out at merge time.
enum class BehaviorCode {
    HighHostile,
    LowHostile,
    ConstructiveProblemDiscussion,
    LowPositive,
    HighPositive,
    DysphoricAffect,
    Other,
};

// Merged 3-class target space. Index order is the tie-break order (argmax
// ties resolve to the lowest index, i.e. Hostile first).
enum class BehaviorClass { Hostile = 0, Constructive = 1, Positive = 2 };

inline constexpr int kNumClasses = 3;
inline constexpr std::array<BehaviorClass, 3> kAllClasses = {
    BehaviorClass::Hostile, BehaviorClass::Constructive, BehaviorClass::Positive};

const char* to_string(BehaviorCode code);
const char* to_string(BehaviorClass cls);
BehaviorCode code_from_string(const std::string& s, const std::string& context);
BehaviorClass class_from_string(const std::string& s, const std::string& context);

bool is_ordinal(BehaviorCode code);
// Hostile for the two hostile codes, Constructive for problem discussion,
// Positive for the two positive codes; nullopt for the excluded codes.
std::optional<BehaviorClass> merge_code(BehaviorCode code);

enum class Gender { Male, Female };
enum class Role { Patient, Caregiver };
enum class Content { Neutral, Stress };

const char* to_string(Gender g);
const char* to_string(Role r);
const char* to_string(Content c);

struct Speaker {
    std::string speaker_id;
    std::string couple_id;
    Gender gender = Gender::Male;
    Role role = Role::Patient;
};

struct Turn {
    int index = 0;
    std::string speaker_id;
    int64_t start_ms = 0;
    int64_t end_ms = 0;
    std::string text;
    BehaviorCode code = BehaviorCode::Other;
};

struct Session {
    std::string session_id;
    std::string couple_id;
    Content content = Content::Neutral;
    std::vector<Turn> turns;
    // file references from the manifest, relative to its directory
    std::string turns_file;
    std::string transcript_file;
    std::optional<std::string> words_file;
    std::optional<std::string> frames_file;
};

struct Corpus {
    std::map<std::string, Speaker> speakers;
    std::vector<Session> sessions;
    std::optional<std::string> embeddings_file;
    std::filesystem::path base_dir;

    const Speaker& speaker(const std::string& id) const;
    // couple id -> speaker ids in (Patient, Caregiver) order
    std::map<std::string, std::array<std::string, 2>> couples() const;
};

// One merged-label sample per retained turn. Feature vectors are attached by
// the features stage.
struct Sample {
    std::string couple_id;
    std::string session_id;
    int turn_index = 0;
    std::string speaker_id;
    Gender gender = Gender::Male;
    Role role = Role::Patient;
    Content content = Content::Neutral;
    int64_t start_ms = 0;
    int64_t end_ms = 0;
    std::string text;
    BehaviorCode code = BehaviorCode::Other;
    BehaviorClass label = BehaviorClass::Constructive;
    std::optional<std::vector<double>> features;
};

struct LabeledDataset {
    std::vector<Sample> samples;
};

struct MergeOptions {
    // default keeps the original session turn indices after exclusion, so
    // windowed evaluation can reason over the full conversation order
    bool reindex_after_exclusion = false;
};

enum class PartitionScheme { None, Gender, Role, Content };

const char* to_string(PartitionScheme s);
PartitionScheme scheme_from_string(const std::string& s, const std::string& context);

Corpus load_corpus(const std::filesystem::path& manifest_path);
// Writes manifest + speakers/turns/transcript CSVs under dir; returns the
// manifest path. Word/frame/embedding files are copied through when present.
std::filesystem::path save_corpus(const Corpus& corpus, const std::filesystem::path& dir);

LabeledDataset merge_labels(const Corpus& corpus, const MergeOptions& opts = {});
// Merging an already merged dataset is the identity.
LabeledDataset merge_labels(const LabeledDataset& dataset);

std::string partition_key(const Sample& sample, PartitionScheme scheme);
std::vector<std::string> partition_keys(PartitionScheme scheme);

// Disjoint cover of the input; parts with a missing class are permitted but
// reported through `warnings` when given.
std::map<std::string, LabeledDataset> partition(const LabeledDataset& dataset,
                                                PartitionScheme scheme,
                                                std::vector<std::string>* warnings = nullptr);

// counts indexed by BehaviorClass
std::array<long, 3> class_counts(const LabeledDataset& dataset);

}  // namespace dyad
