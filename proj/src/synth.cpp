#include "dyad/synth.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "dyad/align.hpp"
#include "dyad/csv.hpp"
#include "dyad/features.hpp"
#include "dyad/rng.hpp"

namespace dyad::synth {

using nlohmann::json;

namespace {

const std::vector<std::string>& vocabulary() {
    static const std::vector<std::string> words = {
        "well",  "i",       "think",  "we",      "should", "talk",   "about", "that",
        "today", "you",     "know",   "it",      "feels",  "hard",   "when",  "things",
        "get",   "busy",    "maybe",  "later",   "sure",   "okay",   "right", "really",
        "time",  "doctor",  "visit",  "plan",    "home",   "week",   "good",  "better",
        "tired", "worried", "thanks", "helping", "always", "never",  "again", "together"};
    return words;
}

// class means on an equilateral simplex of side 1 in the first two dims
constexpr std::array<std::array<double, 2>, 3> kSimplex = {{
    {0.0, 0.0},                    // Hostile
    {1.0, 0.0},                    // Constructive
    {0.5, 0.86602540378443864676}  // Positive
}};

struct TurnTruth {
    int index = 0;
    std::string speaker_id;
    int64_t true_start = 0;
    int64_t true_end = 0;
    BehaviorClass label = BehaviorClass::Constructive;
    BehaviorCode code = BehaviorCode::ConstructiveProblemDiscussion;
    std::string text;
    std::vector<align::WordTiming> words;
};

BehaviorClass draw_class(Rng& rng, const std::array<double, 3>& priors) {
    return static_cast<BehaviorClass>(rng.pick_weighted(priors));
}

// frame and embedding values are quantized so the CSVs stay compact
double quantize(double v) { return std::round(v * 1e6) / 1e6; }

BehaviorCode code_for(Rng& rng, BehaviorClass cls) {
    switch (cls) {
        case BehaviorClass::Hostile:
            return rng.uniform01() < 0.3 ? BehaviorCode::HighHostile : BehaviorCode::LowHostile;
        case BehaviorClass::Constructive: return BehaviorCode::ConstructiveProblemDiscussion;
        case BehaviorClass::Positive:
            return rng.uniform01() < 0.3 ? BehaviorCode::HighPositive : BehaviorCode::LowPositive;
    }
    return BehaviorCode::ConstructiveProblemDiscussion;
}

void check_feasible(const SynthSpec& spec) {
    if (spec.n_couples < 1) fail("synth spec: n_couples must be >= 1");
    if (spec.turns_per_session < 2) fail("synth spec: turns_per_session must be >= 2");
    if (spec.p_stay < 0.0 || spec.p_stay >= 1.0) fail("synth spec: p_stay must be in [0, 1)");
    if (spec.mean_shift < 0.0) fail("synth spec: mean_shift must be >= 0");
    for (const auto& [name, priors] :
         {std::pair{"neutral_priors", spec.neutral_priors},
          std::pair{"stress_priors", spec.stress_priors}}) {
        double sum = priors[0] + priors[1] + priors[2];
        if (std::abs(sum - 1.0) > 1e-9) fail("synth spec: ", name, " must sum to 1");
        for (double p : priors)
            if (p < 0.0) fail("synth spec: ", name, " must be non-negative");
    }
    // expected minority count across the whole corpus must reach 1
    long neutral_turns =
        static_cast<long>(spec.n_couples) * spec.neutral_sessions * spec.turns_per_session;
    long stress_turns =
        static_cast<long>(spec.n_couples) * spec.stress_sessions * spec.turns_per_session;
    for (int k = 0; k < 3; ++k) {
        double expected = spec.neutral_priors[k] * static_cast<double>(neutral_turns) +
                          spec.stress_priors[k] * static_cast<double>(stress_turns);
        if (expected < 1.0)
            fail("synth spec: expected count for class ",
                 to_string(static_cast<BehaviorClass>(k)), " is ", expected,
                 " (< 1); increase turns or priors");
    }
}

}  // namespace

SynthSpec spec_from_json_file(const std::filesystem::path& path) {
    json doc;
    try {
        doc = json::parse(read_text_file(path));
    } catch (const json::exception& e) {
        fail(path.string(), ": synth spec parse error: ", e.what());
    }
    SynthSpec spec;
    auto get_int = [&](const char* key, int& out) {
        if (doc.contains(key)) out = doc[key].get<int>();
    };
    auto get_double = [&](const char* key, double& out) {
        if (doc.contains(key)) out = doc[key].get<double>();
    };
    auto get_bool = [&](const char* key, bool& out) {
        if (doc.contains(key)) out = doc[key].get<bool>();
    };
    auto get_priors = [&](const char* key, std::array<double, 3>& out) {
        if (!doc.contains(key)) return;
        auto v = doc[key].get<std::vector<double>>();
        if (v.size() != 3) fail(path.string(), ": ", key, " must have 3 entries");
        out = {v[0], v[1], v[2]};
    };
    get_int("n_couples", spec.n_couples);
    get_int("neutral_sessions", spec.neutral_sessions);
    get_int("stress_sessions", spec.stress_sessions);
    get_int("turns_per_session", spec.turns_per_session);
    get_priors("neutral_priors", spec.neutral_priors);
    get_priors("stress_priors", spec.stress_priors);
    get_double("excluded_rate", spec.excluded_rate);
    get_double("p_stay", spec.p_stay);
    get_double("mean_shift", spec.mean_shift);
    get_int("lexical_dim", spec.lexical_dim);
    get_double("channel_baseline", spec.channel_baseline);
    get_double("frame_noise", spec.frame_noise);
    get_int("words_per_turn_min", spec.words_per_turn_min);
    get_int("words_per_turn_max", spec.words_per_turn_max);
    get_int("word_dur_min_ms", spec.word_dur_min_ms);
    get_int("word_dur_max_ms", spec.word_dur_max_ms);
    get_int("intra_gap_max_ms", spec.intra_gap_max_ms);
    get_int("inter_gap_min_ms", spec.inter_gap_min_ms);
    get_int("inter_gap_max_ms", spec.inter_gap_max_ms);
    get_int("lag_max_ms", spec.lag_max_ms);
    get_bool("emit_words", spec.emit_words);
    get_bool("emit_frames", spec.emit_frames);
    get_bool("emit_embeddings", spec.emit_embeddings);
    if (doc.contains("seed")) spec.seed = doc["seed"].get<uint64_t>();
    return spec;
}

void spec_to_json_file(const SynthSpec& spec, const std::filesystem::path& path) {
    json doc;
    doc["n_couples"] = spec.n_couples;
    doc["neutral_sessions"] = spec.neutral_sessions;
    doc["stress_sessions"] = spec.stress_sessions;
    doc["turns_per_session"] = spec.turns_per_session;
    doc["neutral_priors"] = spec.neutral_priors;
    doc["stress_priors"] = spec.stress_priors;
    doc["excluded_rate"] = spec.excluded_rate;
    doc["p_stay"] = spec.p_stay;
    doc["mean_shift"] = spec.mean_shift;
    doc["lexical_dim"] = spec.lexical_dim;
    doc["channel_baseline"] = spec.channel_baseline;
    doc["frame_noise"] = spec.frame_noise;
    doc["words_per_turn_min"] = spec.words_per_turn_min;
    doc["words_per_turn_max"] = spec.words_per_turn_max;
    doc["word_dur_min_ms"] = spec.word_dur_min_ms;
    doc["word_dur_max_ms"] = spec.word_dur_max_ms;
    doc["intra_gap_max_ms"] = spec.intra_gap_max_ms;
    doc["inter_gap_min_ms"] = spec.inter_gap_min_ms;
    doc["inter_gap_max_ms"] = spec.inter_gap_max_ms;
    doc["lag_max_ms"] = spec.lag_max_ms;
    doc["emit_words"] = spec.emit_words;
    doc["emit_frames"] = spec.emit_frames;
    doc["emit_embeddings"] = spec.emit_embeddings;
    doc["seed"] = spec.seed;
    write_text_file(path, doc.dump(2) + "\n");
}

GenerateResult generate(const SynthSpec& spec, const std::filesystem::path& out_dir) {
    check_feasible(spec);
    std::filesystem::create_directories(out_dir);
    Rng rng(spec.seed);

    auto recipe = features::default_recipe();
    std::vector<std::string> channels;
    for (const auto& [name, fns] : recipe.channels) channels.push_back(name);

    json manifest;
    manifest["speakers_file"] = "speakers.csv";
    if (spec.emit_embeddings) manifest["embeddings_file"] = "embeddings.csv";
    manifest["sessions"] = json::array();

    json sidecar;
    sidecar["spec_echo"] = {{"seed", spec.seed},
                            {"mean_shift", spec.mean_shift},
                            {"p_stay", spec.p_stay},
                            {"lag_max_ms", spec.lag_max_ms}};
    sidecar["sessions"] = json::array();

    csv::Writer speakers(out_dir / "speakers.csv");
    speakers.row({"speaker_id", "couple_id", "gender", "role"});

    std::optional<csv::Writer> embeddings;
    if (spec.emit_embeddings) {
        embeddings.emplace(out_dir / "embeddings.csv");
        std::vector<std::string> header = {"session_id", "turn_index"};
        for (int v = 0; v < spec.lexical_dim; ++v) header.push_back("v" + std::to_string(v));
        embeddings->row(header);
    }

    char idbuf[64];
    for (int c = 0; c < spec.n_couples; ++c) {
        std::snprintf(idbuf, sizeof(idbuf), "c%03d", c);
        std::string couple_id = idbuf;
        std::string patient_id = couple_id + "_p";
        std::string caregiver_id = couple_id + "_g";
        Gender patient_gender = rng.uniform01() < 0.5 ? Gender::Male : Gender::Female;
        Gender caregiver_gender =
            patient_gender == Gender::Male ? Gender::Female : Gender::Male;
        speakers.row({patient_id, couple_id, to_string(patient_gender), "Patient"});
        speakers.row({caregiver_id, couple_id, to_string(caregiver_gender), "Caregiver"});

        int session_no = 0;
        for (int s = 0; s < spec.neutral_sessions + spec.stress_sessions; ++s, ++session_no) {
            bool neutral = s < spec.neutral_sessions;
            Content content = neutral ? Content::Neutral : Content::Stress;
            const auto& priors = neutral ? spec.neutral_priors : spec.stress_priors;
            std::string session_id = couple_id + "_s" + std::to_string(session_no);

            // labels: sticky chain with prior restarts
            std::vector<TurnTruth> turns(spec.turns_per_session);
            BehaviorClass state = draw_class(rng, priors);
            bool patient_first = rng.uniform01() < 0.5;
            for (int t = 0; t < spec.turns_per_session; ++t) {
                if (t > 0 && rng.uniform01() >= spec.p_stay) state = draw_class(rng, priors);
                turns[t].index = t;
                turns[t].label = state;
                bool patient_turn = (t % 2 == 0) == patient_first;
                turns[t].speaker_id = patient_turn ? patient_id : caregiver_id;
                if (spec.excluded_rate > 0.0 && rng.uniform01() < spec.excluded_rate)
                    turns[t].code = rng.uniform01() < 0.5 ? BehaviorCode::DysphoricAffect
                                                          : BehaviorCode::Other;
                else
                    turns[t].code = code_for(rng, turns[t].label);
            }

            // words and true boundaries; inter-turn gaps are even so the
            // midpoint boundary is exact in integer ms
            int64_t cursor = rng.uniform_int(0, 400);
            const auto& vocab = vocabulary();
            for (auto& turn : turns) {
                int n_words =
                    static_cast<int>(rng.uniform_int(spec.words_per_turn_min,
                                                     spec.words_per_turn_max));
                std::string text;
                for (int w = 0; w < n_words; ++w) {
                    if (w > 0 && spec.intra_gap_max_ms > 0)
                        cursor += rng.uniform_int(0, spec.intra_gap_max_ms);
                    int64_t dur = rng.uniform_int(spec.word_dur_min_ms, spec.word_dur_max_ms);
                    const std::string& word =
                        vocab[static_cast<size_t>(rng.uniform_int(0, vocab.size() - 1))];
                    turn.words.push_back({word, cursor, cursor + dur, turn.index});
                    if (w > 0) text += ' ';
                    text += word;
                    cursor += dur;
                }
                turn.text = text;
                int64_t gap = 2 * rng.uniform_int(spec.inter_gap_min_ms / 2,
                                                  spec.inter_gap_max_ms / 2);
                cursor += gap;
            }
            for (size_t t = 0; t < turns.size(); ++t) {
                turns[t].true_start =
                    t == 0 ? turns[t].words.front().start_ms
                           : (turns[t - 1].words.back().end_ms +
                              turns[t].words.front().start_ms) / 2;
                turns[t].true_end =
                    t + 1 == turns.size()
                        ? turns[t].words.back().end_ms
                        : (turns[t].words.back().end_ms + turns[t + 1].words.front().start_ms) /
                              2;
            }

            // annotated spans: lag each boundary, clamp to keep spans ordered
            std::vector<int64_t> boundaries;  // n+1 annotated boundaries
            boundaries.push_back(
                std::max<int64_t>(0, turns.front().true_start +
                                         (spec.lag_max_ms > 0
                                              ? rng.uniform_int(-spec.lag_max_ms,
                                                                spec.lag_max_ms)
                                              : 0)));
            for (size_t t = 0; t < turns.size(); ++t) {
                int64_t truth = turns[t].true_end;
                int64_t lag = spec.lag_max_ms > 0
                                  ? rng.uniform_int(-spec.lag_max_ms, spec.lag_max_ms)
                                  : 0;
                boundaries.push_back(std::max(truth + lag, boundaries.back() + 10));
            }

            csv::Writer tw(out_dir / (session_id + "_turns.csv"));
            tw.row({"index", "speaker_id", "start_ms", "end_ms", "code"});
            csv::Writer rw(out_dir / (session_id + "_transcript.csv"));
            rw.row({"index", "speaker_id", "text"});
            for (size_t t = 0; t < turns.size(); ++t) {
                tw.row({std::to_string(turns[t].index), turns[t].speaker_id,
                        std::to_string(boundaries[t]), std::to_string(boundaries[t + 1]),
                        to_string(turns[t].code)});
                rw.row({std::to_string(turns[t].index), turns[t].speaker_id, turns[t].text});
            }
            tw.close();
            rw.close();

            json js;
            js["session_id"] = session_id;
            js["couple_id"] = couple_id;
            js["content"] = to_string(content);
            js["turns_file"] = session_id + "_turns.csv";
            js["transcript_file"] = session_id + "_transcript.csv";

            if (spec.emit_words) {
                json words = json::array();
                for (const auto& turn : turns)
                    for (const auto& w : turn.words)
                        words.push_back(
                            {{"word", w.word}, {"start_ms", w.start_ms}, {"end_ms", w.end_ms}});
                write_text_file(out_dir / (session_id + "_words.json"), words.dump() + "\n");
                js["words_file"] = session_id + "_words.json";
            }

            // per-turn feature centers; channels 0 and 1 carry the simplex
            std::vector<std::array<double, 2>> centers(turns.size());
            for (size_t t = 0; t < turns.size(); ++t) {
                int cls = static_cast<int>(turns[t].label);
                centers[t] = {spec.channel_baseline + spec.mean_shift * kSimplex[cls][0] +
                                  rng.gaussian(),
                              spec.channel_baseline + spec.mean_shift * kSimplex[cls][1] +
                                  rng.gaussian()};
            }

            if (spec.emit_frames) {
                csv::Writer fw(out_dir / (session_id + "_frames.csv"));
                std::vector<std::string> header = {"frame_ms"};
                header.insert(header.end(), channels.begin(), channels.end());
                fw.row(header);
                // per-turn centers for the no-signal channels
                std::vector<std::vector<double>> plain(turns.size());
                for (auto& p : plain) {
                    p.resize(channels.size());
                    for (auto& v : p) v = spec.channel_baseline + rng.gaussian();
                }
                int64_t session_end = turns.back().true_end + 200;
                size_t t_at = 0;
                std::vector<std::string> row(channels.size() + 1);
                for (int64_t ms = 0; ms <= session_end; ms += 10) {
                    while (t_at < turns.size() && ms >= turns[t_at].true_end) ++t_at;
                    bool inside = t_at < turns.size() && ms >= turns[t_at].true_start;
                    row[0] = std::to_string(ms);
                    for (size_t ch = 0; ch < channels.size(); ++ch) {
                        double center;
                        if (inside)
                            center = ch < 2 ? centers[t_at][ch] : plain[t_at][ch];
                        else
                            center = spec.channel_baseline;
                        row[ch + 1] =
                            format_double(quantize(center + spec.frame_noise * rng.gaussian()));
                    }
                    fw.row(row);
                }
                fw.close();
                js["frames_file"] = session_id + "_frames.csv";
            }

            if (embeddings) {
                std::vector<std::string> row(2 + spec.lexical_dim);
                for (const auto& turn : turns) {
                    int cls = static_cast<int>(turn.label);
                    row[0] = session_id;
                    row[1] = std::to_string(turn.index);
                    for (int v = 0; v < spec.lexical_dim; ++v) {
                        double mean =
                            v < 2 ? spec.mean_shift * kSimplex[cls][static_cast<size_t>(v)]
                                  : 0.0;
                        row[2 + v] = format_double(quantize(mean + rng.gaussian()));
                    }
                    embeddings->row(row);
                }
            }

            manifest["sessions"].push_back(js);

            json jt = json::array();
            for (const auto& turn : turns)
                jt.push_back({{"index", turn.index},
                              {"true_start_ms", turn.true_start},
                              {"true_end_ms", turn.true_end},
                              {"code", to_string(turn.code)}});
            sidecar["sessions"].push_back(
                {{"session_id", session_id}, {"turns", std::move(jt)}});
        }
    }
    speakers.close();
    if (embeddings) embeddings->close();

    GenerateResult result;
    result.manifest_path = out_dir / "manifest.json";
    result.sidecar_path = out_dir / "sidecar.json";
    write_text_file(result.manifest_path, manifest.dump(2) + "\n");
    write_text_file(result.sidecar_path, sidecar.dump(2) + "\n");
    return result;
}

VerifyReport verify(const std::filesystem::path& manifest_path,
                    const std::filesystem::path& sidecar_path) {
    VerifyReport report;
    Corpus corpus;
    try {
        corpus = load_corpus(manifest_path);
    } catch (const std::exception& e) {
        report.violations.push_back(e.what());
        return report;
    }

    json sidecar;
    try {
        sidecar = json::parse(read_text_file(sidecar_path));
    } catch (const json::exception& e) {
        report.violations.push_back(sidecar_path.string() + ": parse error: " + e.what());
        return report;
    }

    std::map<std::string, const json*> truth_sessions;
    for (const auto& js : sidecar["sessions"])
        truth_sessions[js["session_id"].get<std::string>()] = &js;

    for (auto& session : corpus.sessions) {
        auto it = truth_sessions.find(session.session_id);
        if (it == truth_sessions.end()) {
            report.violations.push_back("session '" + session.session_id +
                                        "' missing from sidecar");
            continue;
        }
        const json& truth = (*it->second)["turns"];
        if (truth.size() != session.turns.size()) {
            report.violations.push_back("session '" + session.session_id + "' has " +
                                        std::to_string(session.turns.size()) +
                                        " turns, sidecar has " + std::to_string(truth.size()));
            continue;
        }
        for (size_t t = 0; t < session.turns.size(); ++t) {
            std::string want = truth[t]["code"].get<std::string>();
            if (want != to_string(session.turns[t].code))
                report.violations.push_back("session '" + session.session_id + "' turn " +
                                            std::to_string(t) + " code mismatch");
        }

        if (!session.words_file) continue;
        try {
            auto words = align::load_words_file(corpus.base_dir / *session.words_file);
            std::vector<std::string> texts;
            for (const auto& turn : session.turns) texts.push_back(turn.text);
            auto assigned = align::assign_words_to_turns(words, texts);
            auto corrected = align::correct_boundaries(session.turns, assigned.words);
            for (const auto& bc : corrected.corrections) {
                const json& jt = truth[static_cast<size_t>(bc.turn_index)];
                double err = std::max(
                    std::abs(static_cast<double>(bc.new_start_ms -
                                                 jt["true_start_ms"].get<int64_t>())),
                    std::abs(static_cast<double>(bc.new_end_ms -
                                                 jt["true_end_ms"].get<int64_t>())));
                report.alignable_turns++;
                report.max_span_error_ms = std::max(report.max_span_error_ms, err);
                if (err > 1.0)
                    report.violations.push_back(
                        "session '" + session.session_id + "' turn " +
                        std::to_string(bc.turn_index) + " corrected span off by " +
                        format_double(err) + " ms");
            }
        } catch (const std::exception& e) {
            report.violations.push_back(e.what());
        }
    }
    return report;
}

}  // namespace dyad::synth
