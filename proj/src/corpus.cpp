#include "dyad/corpus.hpp"

#include <algorithm>
#include <set>

#include <nlohmann/json.hpp>

#include "dyad/csv.hpp"

namespace dyad {

using nlohmann::json;

const char* to_string(BehaviorCode code) {
    switch (code) {
        case BehaviorCode::HighHostile: return "High_Hostile";
        case BehaviorCode::LowHostile: return "Low_Hostile";
        case BehaviorCode::ConstructiveProblemDiscussion: return "Constructive_Problem_Discussion";
        case BehaviorCode::LowPositive: return "Low_Positive";
        case BehaviorCode::HighPositive: return "High_Positive";
        case BehaviorCode::DysphoricAffect: return "Dysphoric_Affect";
        case BehaviorCode::Other: return "Other";
    }
    return "?";
}

const char* to_string(BehaviorClass cls) {
    switch (cls) {
        case BehaviorClass::Hostile: return "Hostile";
        case BehaviorClass::Constructive: return "Constructive";
        case BehaviorClass::Positive: return "Positive";
    }
    return "?";
}

BehaviorCode code_from_string(const std::string& s, const std::string& context) {
    static const std::map<std::string, BehaviorCode> table = {
        {"High_Hostile", BehaviorCode::HighHostile},
        {"Low_Hostile", BehaviorCode::LowHostile},
        {"Constructive_Problem_Discussion", BehaviorCode::ConstructiveProblemDiscussion},
        {"Low_Positive", BehaviorCode::LowPositive},
        {"High_Positive", BehaviorCode::HighPositive},
        {"Dysphoric_Affect", BehaviorCode::DysphoricAffect},
        {"Other", BehaviorCode::Other},
    };
    auto it = table.find(s);
    if (it == table.end()) fail(context, ": unknown behavior code '", s, "'");
    return it->second;
}

BehaviorClass class_from_string(const std::string& s, const std::string& context) {
    if (s == "Hostile") return BehaviorClass::Hostile;
    if (s == "Constructive") return BehaviorClass::Constructive;
    if (s == "Positive") return BehaviorClass::Positive;
    fail(context, ": unknown behavior class '", s, "'");
}

bool is_ordinal(BehaviorCode code) {
    return code != BehaviorCode::DysphoricAffect && code != BehaviorCode::Other;
}

std::optional<BehaviorClass> merge_code(BehaviorCode code) {
    switch (code) {
        case BehaviorCode::HighHostile:
        case BehaviorCode::LowHostile: return BehaviorClass::Hostile;
        case BehaviorCode::ConstructiveProblemDiscussion: return BehaviorClass::Constructive;
        case BehaviorCode::LowPositive:
        case BehaviorCode::HighPositive: return BehaviorClass::Positive;
        case BehaviorCode::DysphoricAffect:
        case BehaviorCode::Other: return std::nullopt;
    }
    return std::nullopt;
}

const char* to_string(Gender g) { return g == Gender::Male ? "Male" : "Female"; }
const char* to_string(Role r) { return r == Role::Patient ? "Patient" : "Caregiver"; }
const char* to_string(Content c) { return c == Content::Neutral ? "Neutral" : "Stress"; }

const char* to_string(PartitionScheme s) {
    switch (s) {
        case PartitionScheme::None: return "None";
        case PartitionScheme::Gender: return "Gender";
        case PartitionScheme::Role: return "Role";
        case PartitionScheme::Content: return "Content";
    }
    return "?";
}

PartitionScheme scheme_from_string(const std::string& s, const std::string& context) {
    std::string lower;
    for (char c : s) lower += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (lower == "none") return PartitionScheme::None;
    if (lower == "gender") return PartitionScheme::Gender;
    if (lower == "role") return PartitionScheme::Role;
    if (lower == "content") return PartitionScheme::Content;
    fail(context, ": unknown partition scheme '", s, "'");
}

const Speaker& Corpus::speaker(const std::string& id) const {
    auto it = speakers.find(id);
    if (it == speakers.end()) fail("unknown speaker_id '", id, "'");
    return it->second;
}

std::map<std::string, std::array<std::string, 2>> Corpus::couples() const {
    std::map<std::string, std::array<std::string, 2>> out;
    for (const auto& [id, sp] : speakers) {
        auto& pair = out[sp.couple_id];
        pair[sp.role == Role::Patient ? 0 : 1] = id;
    }
    return out;
}

namespace {

Gender gender_from_string(const std::string& s, const std::string& context) {
    if (s == "Male") return Gender::Male;
    if (s == "Female") return Gender::Female;
    fail(context, ": unknown gender '", s, "'");
}

Role role_from_string(const std::string& s, const std::string& context) {
    if (s == "Patient") return Role::Patient;
    if (s == "Caregiver") return Role::Caregiver;
    fail(context, ": unknown role '", s, "'");
}

Content content_from_string(const std::string& s, const std::string& context) {
    if (s == "Neutral") return Content::Neutral;
    if (s == "Stress") return Content::Stress;
    fail(context, ": unknown content '", s, "'");
}

std::map<std::string, Speaker> load_speakers(const std::filesystem::path& path) {
    auto table = csv::read_file(path);
    const std::string file = path.string();
    int c_id = table.column("speaker_id", file);
    int c_couple = table.column("couple_id", file);
    int c_gender = table.column("gender", file);
    int c_role = table.column("role", file);

    std::map<std::string, Speaker> speakers;
    for (size_t i = 0; i < table.rows.size(); ++i) {
        const auto& row = table.rows[i];
        std::string ctx = file + ":" + std::to_string(table.line_numbers[i]);
        Speaker sp;
        sp.speaker_id = row[c_id];
        sp.couple_id = row[c_couple];
        sp.gender = gender_from_string(row[c_gender], ctx);
        sp.role = role_from_string(row[c_role], ctx);
        if (sp.speaker_id.empty()) fail(ctx, ": empty speaker_id");
        if (!speakers.emplace(sp.speaker_id, sp).second)
            fail(ctx, ": duplicate speaker_id '", sp.speaker_id, "'");
    }

    std::map<std::string, std::vector<const Speaker*>> by_couple;
    for (const auto& [id, sp] : speakers) by_couple[sp.couple_id].push_back(&sp);
    for (const auto& [couple, members] : by_couple) {
        if (members.size() != 2)
            fail(file, ": couple '", couple, "' has ", members.size(), " speakers, expected 2");
        if (members[0]->role == members[1]->role)
            fail(file, ": couple '", couple, "' speakers share the role ",
                 to_string(members[0]->role));
    }
    return speakers;
}

void load_session_turns(Session& session, const Corpus& corpus,
                        const std::filesystem::path& turns_path,
                        const std::filesystem::path& transcript_path) {
    auto turns_table = csv::read_file(turns_path);
    const std::string tf = turns_path.string();
    int c_index = turns_table.column("index", tf);
    int c_speaker = turns_table.column("speaker_id", tf);
    int c_start = turns_table.column("start_ms", tf);
    int c_end = turns_table.column("end_ms", tf);
    int c_code = turns_table.column("code", tf);

    for (size_t i = 0; i < turns_table.rows.size(); ++i) {
        const auto& row = turns_table.rows[i];
        std::string ctx = tf + ":" + std::to_string(turns_table.line_numbers[i]);
        Turn turn;
        turn.index = static_cast<int>(parse_int(row[c_index], ctx));
        turn.speaker_id = row[c_speaker];
        turn.start_ms = parse_int(row[c_start], ctx);
        turn.end_ms = parse_int(row[c_end], ctx);
        turn.code = code_from_string(row[c_code], ctx);

        if (turn.index != static_cast<int>(i))
            fail(ctx, ": turn index ", turn.index, " not contiguous (expected ", i, ")");
        if (turn.end_ms <= turn.start_ms)
            fail(ctx, ": turn ", turn.index, " has end_ms ", turn.end_ms, " <= start_ms ",
                 turn.start_ms);
        const Speaker& sp = corpus.speaker(turn.speaker_id);
        if (sp.couple_id != session.couple_id)
            fail(ctx, ": speaker '", turn.speaker_id, "' does not belong to couple '",
                 session.couple_id, "'");
        if (!session.turns.empty()) {
            const Turn& prev = session.turns.back();
            if (turn.start_ms < prev.start_ms)
                fail(ctx, ": turn ", turn.index, " starts before turn ", prev.index);
            if (turn.start_ms < prev.end_ms)
                fail(ctx, ": turn ", turn.index, " overlaps turn ", prev.index);
            if (turn.speaker_id == prev.speaker_id)
                fail(ctx, ": turn ", turn.index, " repeats speaker '", turn.speaker_id,
                     "' of turn ", prev.index);
        }
        session.turns.push_back(std::move(turn));
    }

    auto tr_table = csv::read_file(transcript_path);
    const std::string rf = transcript_path.string();
    int t_index = tr_table.column("index", rf);
    int t_speaker = tr_table.column("speaker_id", rf);
    int t_text = tr_table.column("text", rf);
    if (tr_table.rows.size() != session.turns.size())
        fail(rf, ": transcript has ", tr_table.rows.size(), " rows, turns file has ",
             session.turns.size());
    for (size_t i = 0; i < tr_table.rows.size(); ++i) {
        const auto& row = tr_table.rows[i];
        std::string ctx = rf + ":" + std::to_string(tr_table.line_numbers[i]);
        int idx = static_cast<int>(parse_int(row[t_index], ctx));
        if (idx != static_cast<int>(i)) fail(ctx, ": transcript index ", idx, " out of order");
        if (row[t_speaker] != session.turns[i].speaker_id)
            fail(ctx, ": transcript speaker '", row[t_speaker], "' differs from turns file '",
                 session.turns[i].speaker_id, "'");
        session.turns[i].text = row[t_text];
    }
}

}  // namespace

Corpus load_corpus(const std::filesystem::path& manifest_path) {
    json manifest;
    try {
        manifest = json::parse(read_text_file(manifest_path));
    } catch (const json::exception& e) {
        fail(manifest_path.string(), ": manifest parse error: ", e.what());
    }

    Corpus corpus;
    corpus.base_dir = manifest_path.parent_path();
    const std::string mf = manifest_path.string();

    if (!manifest.contains("speakers_file")) fail(mf, ": manifest missing 'speakers_file'");
    corpus.speakers = load_speakers(corpus.base_dir / manifest["speakers_file"].get<std::string>());
    if (manifest.contains("embeddings_file"))
        corpus.embeddings_file = manifest["embeddings_file"].get<std::string>();

    if (!manifest.contains("sessions") || !manifest["sessions"].is_array())
        fail(mf, ": manifest missing 'sessions' array");

    std::set<std::string> session_ids;
    for (const auto& js : manifest["sessions"]) {
        Session session;
        try {
            session.session_id = js.at("session_id").get<std::string>();
            session.couple_id = js.at("couple_id").get<std::string>();
            session.content = content_from_string(js.at("content").get<std::string>(), mf);
            session.turns_file = js.at("turns_file").get<std::string>();
            session.transcript_file = js.at("transcript_file").get<std::string>();
        } catch (const json::exception& e) {
            fail(mf, ": malformed session entry: ", e.what());
        }
        if (js.contains("words_file")) session.words_file = js["words_file"].get<std::string>();
        if (js.contains("frames_file")) session.frames_file = js["frames_file"].get<std::string>();
        if (!session_ids.insert(session.session_id).second)
            fail(mf, ": duplicate session_id '", session.session_id, "'");

        load_session_turns(session, corpus, corpus.base_dir / session.turns_file,
                           corpus.base_dir / session.transcript_file);
        corpus.sessions.push_back(std::move(session));
    }
    return corpus;
}

std::filesystem::path save_corpus(const Corpus& corpus, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);

    {
        csv::Writer w(dir / "speakers.csv");
        w.row({"speaker_id", "couple_id", "gender", "role"});
        for (const auto& [id, sp] : corpus.speakers)
            w.row({sp.speaker_id, sp.couple_id, to_string(sp.gender), to_string(sp.role)});
        w.close();
    }

    json manifest;
    manifest["speakers_file"] = "speakers.csv";
    if (corpus.embeddings_file) {
        manifest["embeddings_file"] = *corpus.embeddings_file;
        auto src = corpus.base_dir / *corpus.embeddings_file;
        if (std::filesystem::exists(src) && src != dir / *corpus.embeddings_file)
            std::filesystem::copy_file(src, dir / *corpus.embeddings_file,
                                       std::filesystem::copy_options::overwrite_existing);
    }
    manifest["sessions"] = json::array();

    for (const auto& session : corpus.sessions) {
        std::string stem = session.session_id;
        std::string turns_name = stem + "_turns.csv";
        std::string transcript_name = stem + "_transcript.csv";

        csv::Writer tw(dir / turns_name);
        tw.row({"index", "speaker_id", "start_ms", "end_ms", "code"});
        for (const auto& t : session.turns)
            tw.row({std::to_string(t.index), t.speaker_id, std::to_string(t.start_ms),
                    std::to_string(t.end_ms), to_string(t.code)});
        tw.close();

        csv::Writer rw(dir / transcript_name);
        rw.row({"index", "speaker_id", "text"});
        for (const auto& t : session.turns)
            rw.row({std::to_string(t.index), t.speaker_id, t.text});
        rw.close();

        json js;
        js["session_id"] = session.session_id;
        js["couple_id"] = session.couple_id;
        js["content"] = to_string(session.content);
        js["turns_file"] = turns_name;
        js["transcript_file"] = transcript_name;
        for (const auto& [ref, name] : {std::pair{session.words_file, "words_file"},
                                        std::pair{session.frames_file, "frames_file"}}) {
            if (!ref) continue;
            js[name] = *ref;
            auto src = corpus.base_dir / *ref;
            if (std::filesystem::exists(src) && src != dir / *ref)
                std::filesystem::copy_file(src, dir / *ref,
                                           std::filesystem::copy_options::overwrite_existing);
        }
        manifest["sessions"].push_back(js);
    }

    auto manifest_path = dir / "manifest.json";
    write_text_file(manifest_path, manifest.dump(2) + "\n");
    return manifest_path;
}

LabeledDataset merge_labels(const Corpus& corpus, const MergeOptions& opts) {
    LabeledDataset out;
    for (const auto& session : corpus.sessions) {
        int next_index = 0;
        for (const auto& turn : session.turns) {
            auto cls = merge_code(turn.code);
            if (!cls) continue;
            const Speaker& sp = corpus.speaker(turn.speaker_id);
            Sample s;
            s.couple_id = session.couple_id;
            s.session_id = session.session_id;
            s.turn_index = opts.reindex_after_exclusion ? next_index++ : turn.index;
            s.speaker_id = turn.speaker_id;
            s.gender = sp.gender;
            s.role = sp.role;
            s.content = session.content;
            s.start_ms = turn.start_ms;
            s.end_ms = turn.end_ms;
            s.text = turn.text;
            s.code = turn.code;
            s.label = *cls;
            out.samples.push_back(std::move(s));
        }
    }
    return out;
}

LabeledDataset merge_labels(const LabeledDataset& dataset) { return dataset; }

std::string partition_key(const Sample& sample, PartitionScheme scheme) {
    switch (scheme) {
        case PartitionScheme::None: return "all";
        case PartitionScheme::Gender: return to_string(sample.gender);
        case PartitionScheme::Role: return to_string(sample.role);
        case PartitionScheme::Content: return to_string(sample.content);
    }
    return "all";
}

std::vector<std::string> partition_keys(PartitionScheme scheme) {
    switch (scheme) {
        case PartitionScheme::None: return {"all"};
        case PartitionScheme::Gender: return {"Female", "Male"};
        case PartitionScheme::Role: return {"Caregiver", "Patient"};
        case PartitionScheme::Content: return {"Neutral", "Stress"};
    }
    return {"all"};
}

std::map<std::string, LabeledDataset> partition(const LabeledDataset& dataset,
                                                PartitionScheme scheme,
                                                std::vector<std::string>* warnings) {
    std::map<std::string, LabeledDataset> parts;
    for (const auto& key : partition_keys(scheme)) parts[key];
    for (const auto& s : dataset.samples) parts[partition_key(s, scheme)].samples.push_back(s);
    if (warnings) {
        for (const auto& [key, part] : parts) {
            auto counts = class_counts(part);
            for (int c = 0; c < kNumClasses; ++c)
                if (counts[c] == 0)
                    warnings->push_back("partition '" + key + "' has no " +
                                        to_string(static_cast<BehaviorClass>(c)) + " samples");
        }
    }
    return parts;
}

std::array<long, 3> class_counts(const LabeledDataset& dataset) {
    std::array<long, 3> counts = {0, 0, 0};
    for (const auto& s : dataset.samples) counts[static_cast<int>(s.label)]++;
    return counts;
}

}  // namespace dyad
