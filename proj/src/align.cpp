#include "dyad/align.hpp"

#include <cctype>

#include <nlohmann/json.hpp>

#include "dyad/csv.hpp"

namespace dyad::align {

using nlohmann::json;

const char* to_string(ShiftDirection d) {
    switch (d) {
        case ShiftDirection::Forward: return "Forward";
        case ShiftDirection::Backward: return "Backward";
        case ShiftDirection::None: return "None";
    }
    return "?";
}

std::vector<std::string> normalize_tokens(const std::string& text) {
    std::vector<std::string> tokens;
    std::string cur;
    for (unsigned char c : text) {
        if (std::isspace(c)) {
            if (!cur.empty()) {
                tokens.push_back(cur);
                cur.clear();
            }
        } else if (std::ispunct(c)) {
            // stripped, not a separator: "don't" -> "dont"
        } else {
            cur += static_cast<char>(std::tolower(c));
        }
    }
    if (!cur.empty()) tokens.push_back(cur);
    return tokens;
}

AssignResult assign_words_to_turns(const std::vector<WordTiming>& words,
                                   const std::vector<std::string>& transcript_texts) {
    AssignResult out;
    out.words = words;
    size_t pos = 0;  // position in the word stream
    for (size_t t = 0; t < transcript_texts.size(); ++t) {
        auto tokens = normalize_tokens(transcript_texts[t]);
        if (tokens.empty()) {
            out.unalignable_turns.push_back(static_cast<int>(t));
            continue;
        }
        for (const auto& token : tokens) {
            if (pos >= out.words.size())
                fail("word/transcript mismatch at position ", pos, ": transcript has '", token,
                     "', word list is exhausted");
            auto norm = normalize_tokens(out.words[pos].word);
            std::string word_norm = norm.empty() ? "" : norm[0];
            if (word_norm != token)
                fail("word/transcript mismatch at position ", pos, ": transcript has '", token,
                     "', aligned word is '", out.words[pos].word, "'");
            out.words[pos].turn_index = static_cast<int>(t);
            ++pos;
        }
    }
    if (pos != out.words.size())
        fail("word/transcript mismatch at position ", pos, ": ", out.words.size() - pos,
             " aligned words remain after the last transcript turn");
    return out;
}

namespace {

struct TurnWords {
    int64_t first_start = 0;
    int64_t last_end = 0;
    bool present = false;
};

ShiftDirection direction_of(int64_t shift) {
    if (shift > 0) return ShiftDirection::Forward;
    if (shift < 0) return ShiftDirection::Backward;
    return ShiftDirection::None;
}

}  // namespace

CorrectionResult correct_boundaries(const std::vector<Turn>& turns,
                                    const std::vector<WordTiming>& assigned_words) {
    CorrectionResult out;
    out.corrected = turns;

    std::vector<TurnWords> tw(turns.size());
    for (const auto& w : assigned_words) {
        if (w.turn_index < 0 || w.turn_index >= static_cast<int>(turns.size()))
            fail("word '", w.word, "' has turn index ", w.turn_index, " outside the session");
        auto& entry = tw[w.turn_index];
        if (!entry.present) {
            entry.first_start = w.start_ms;
            entry.last_end = w.end_ms;
            entry.present = true;
        } else {
            entry.last_end = w.end_ms;  // words arrive in order
        }
        const auto& turn = turns[w.turn_index];
        if (w.start_ms < turn.start_ms && w.end_ms > turn.start_ms)
            out.crossings.push_back(
                {turn.index, w.word, w.start_ms, w.end_ms, turn.start_ms});
    }

    // corrected spans over the subsequence of turns that have words
    std::vector<int> with_words;
    for (size_t i = 0; i < turns.size(); ++i) {
        if (tw[i].present) with_words.push_back(static_cast<int>(i));
        else out.skipped_turns.push_back(turns[i].index);
    }

    std::vector<int64_t> new_start(turns.size()), new_end(turns.size());
    for (size_t k = 0; k < with_words.size(); ++k) {
        int i = with_words[k];
        new_start[i] = tw[i].first_start;
        new_end[i] = tw[i].last_end;
    }
    for (size_t k = 0; k + 1 < with_words.size(); ++k) {
        int i = with_words[k];
        int j = with_words[k + 1];
        int64_t boundary = (tw[i].last_end + tw[j].first_start) / 2;
        new_end[i] = boundary;
        new_start[j] = boundary;
    }

    for (int i : with_words) {
        auto& turn = out.corrected[i];
        BoundaryCorrection bc;
        bc.turn_index = turn.index;
        bc.old_start_ms = turn.start_ms;
        bc.old_end_ms = turn.end_ms;
        bc.new_start_ms = new_start[i];
        bc.new_end_ms = new_end[i];
        bc.shift_ms = bc.new_start_ms - bc.old_start_ms;
        bc.direction = direction_of(bc.shift_ms);
        out.corrections.push_back(bc);
        turn.start_ms = new_start[i];
        turn.end_ms = new_end[i];
    }
    return out;
}

EmitResult emit_labeled_samples(const CorrectionResult& correction) {
    EmitResult out;
    std::vector<bool> skipped(correction.corrected.size(), false);
    for (int idx : correction.skipped_turns)
        for (size_t i = 0; i < correction.corrected.size(); ++i)
            if (correction.corrected[i].index == idx) skipped[i] = true;
    for (size_t i = 0; i < correction.corrected.size(); ++i) {
        const auto& t = correction.corrected[i];
        if (skipped[i] || t.text.empty()) {
            out.omitted++;
            continue;
        }
        out.rows.push_back({t.index, t.speaker_id, t.start_ms, t.end_ms, t.code, t.text});
    }
    return out;
}

std::vector<WordTiming> load_words_file(const std::filesystem::path& path) {
    json doc;
    try {
        doc = json::parse(read_text_file(path));
    } catch (const json::exception& e) {
        fail(path.string(), ": words file parse error: ", e.what());
    }
    if (!doc.is_array()) fail(path.string(), ": words file must be a JSON array");
    std::vector<WordTiming> words;
    for (const auto& jw : doc) {
        WordTiming w;
        try {
            w.word = jw.at("word").get<std::string>();
            w.start_ms = jw.at("start_ms").get<int64_t>();
            w.end_ms = jw.at("end_ms").get<int64_t>();
        } catch (const json::exception& e) {
            fail(path.string(), ": malformed word entry: ", e.what());
        }
        if (jw.contains("turn_index")) w.turn_index = jw["turn_index"].get<int>();
        if (!words.empty() && w.start_ms < words.back().start_ms)
            fail(path.string(), ": word '", w.word, "' starts before its predecessor");
        words.push_back(std::move(w));
    }
    return words;
}

std::vector<SessionCorrection> correct_corpus(Corpus& corpus) {
    std::vector<SessionCorrection> out;
    for (auto& session : corpus.sessions) {
        if (!session.words_file) continue;
        auto words = load_words_file(corpus.base_dir / *session.words_file);

        bool indexed = !words.empty() && words.front().turn_index >= 0;
        AssignResult assigned;
        if (indexed) {
            assigned.words = std::move(words);
        } else {
            std::vector<std::string> texts;
            texts.reserve(session.turns.size());
            for (const auto& t : session.turns) texts.push_back(t.text);
            try {
                assigned = assign_words_to_turns(words, texts);
            } catch (const ValidationError& e) {
                fail("session '", session.session_id, "': ", e.what());
            }
        }

        SessionCorrection sc;
        sc.session_id = session.session_id;
        sc.result = correct_boundaries(session.turns, assigned.words);
        session.turns = sc.result.corrected;
        out.push_back(std::move(sc));
    }
    return out;
}

void write_correction_report(const std::vector<SessionCorrection>& corrections,
                             const std::filesystem::path& report_path,
                             const std::filesystem::path& crossings_path) {
    csv::Writer w(report_path);
    w.row({"session_id", "turn_index", "direction", "shift_ms"});
    for (const auto& sc : corrections)
        for (const auto& bc : sc.result.corrections)
            w.row({sc.session_id, std::to_string(bc.turn_index), to_string(bc.direction),
                   std::to_string(bc.shift_ms)});
    w.close();

    csv::Writer x(crossings_path);
    x.row({"session_id", "turn_index", "word", "word_start_ms", "word_end_ms",
           "old_boundary_ms"});
    for (const auto& sc : corrections)
        for (const auto& cr : sc.result.crossings)
            x.row({sc.session_id, std::to_string(cr.turn_index), cr.word,
                   std::to_string(cr.word_start_ms), std::to_string(cr.word_end_ms),
                   std::to_string(cr.old_boundary_ms)});
    x.close();
}

}  // namespace dyad::align
