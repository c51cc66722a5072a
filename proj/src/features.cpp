#include "dyad/features.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "dyad/align.hpp"
#include "dyad/csv.hpp"

namespace dyad::features {

using ordered_json = nlohmann::ordered_json;

const char* to_string(Modality m) { return m == Modality::Acoustic ? "acoustic" : "lexical"; }

Modality modality_from_string(const std::string& s, const std::string& context) {
    if (s == "acoustic") return Modality::Acoustic;
    if (s == "lexical") return Modality::Lexical;
    fail(context, ": unknown modality '", s, "'");
}

const char* to_string(Functional f) {
    switch (f) {
        case Functional::Mean: return "mean";
        case Functional::Cv: return "cv";
        case Functional::P20: return "p20";
        case Functional::P50: return "p50";
        case Functional::P80: return "p80";
        case Functional::RangeP20P80: return "range_p20_p80";
        case Functional::RisingSlopeMean: return "rising_slope_mean";
        case Functional::RisingSlopeStd: return "rising_slope_std";
        case Functional::FallingSlopeMean: return "falling_slope_mean";
        case Functional::FallingSlopeStd: return "falling_slope_std";
    }
    return "?";
}

Functional functional_from_string(const std::string& s, const std::string& context) {
    static const std::map<std::string, Functional> table = {
        {"mean", Functional::Mean},
        {"cv", Functional::Cv},
        {"p20", Functional::P20},
        {"p50", Functional::P50},
        {"p80", Functional::P80},
        {"range_p20_p80", Functional::RangeP20P80},
        {"rising_slope_mean", Functional::RisingSlopeMean},
        {"rising_slope_std", Functional::RisingSlopeStd},
        {"falling_slope_mean", Functional::FallingSlopeMean},
        {"falling_slope_std", Functional::FallingSlopeStd},
    };
    auto it = table.find(s);
    if (it == table.end()) fail(context, ": unknown functional '", s, "'");
    return it->second;
}

int FunctionalRecipe::output_dim() const {
    int dim = 0;
    for (const auto& [name, fns] : channels) dim += static_cast<int>(fns.size());
    return dim;
}

FunctionalRecipe default_recipe() {
    using F = Functional;
    const std::vector<F> full = {F::Mean, F::Cv,  F::P20, F::P50, F::P80, F::RangeP20P80,
                                 F::RisingSlopeMean, F::RisingSlopeStd, F::FallingSlopeMean,
                                 F::FallingSlopeStd};
    const std::vector<F> dist = {F::Mean, F::Cv, F::P20, F::P50, F::P80, F::RangeP20P80};
    const std::vector<F> mean_cv = {F::Mean, F::Cv};
    const std::vector<F> mean_only = {F::Mean};

    FunctionalRecipe r;
    // 2 x 10
    r.channels.push_back({"F0_semitone", full});
    r.channels.push_back({"loudness", full});
    // 5 x 6
    for (const char* name : {"spectral_flux", "mfcc1", "mfcc2", "mfcc3", "mfcc4"})
        r.channels.push_back({name, dist});
    // 16 x 2
    for (const char* name :
         {"jitter", "shimmer", "hnr", "f1_frequency", "f1_bandwidth", "f1_amplitude",
          "f2_frequency", "f2_bandwidth", "f2_amplitude", "f3_frequency", "f3_bandwidth",
          "f3_amplitude", "alpha_ratio_v", "hammarberg_index_v", "slope_0_500_v",
          "slope_500_1500_v"})
        r.channels.push_back({name, mean_cv});
    // 6 x 1: unvoiced spectral quantities and rate statistics enter as means
    for (const char* name : {"alpha_ratio_uv", "hammarberg_index_uv", "slope_0_500_uv",
                             "slope_500_1500_uv", "loudness_peaks_per_sec",
                             "voiced_segments_per_sec"})
        r.channels.push_back({name, mean_only});
    return r;  // 20 + 30 + 32 + 6 = 88
}

FunctionalRecipe load_recipe(const std::filesystem::path& path) {
    ordered_json doc;
    try {
        doc = ordered_json::parse(read_text_file(path));
    } catch (const ordered_json::exception& e) {
        fail(path.string(), ": recipe parse error: ", e.what());
    }
    if (!doc.is_object()) fail(path.string(), ": recipe must be a JSON object");
    FunctionalRecipe r;
    for (auto it = doc.begin(); it != doc.end(); ++it) {
        std::vector<Functional> fns;
        if (!it.value().is_array()) fail(path.string(), ": channel '", it.key(), "' must map to a list");
        for (const auto& f : it.value())
            fns.push_back(functional_from_string(f.get<std::string>(), path.string()));
        if (fns.empty()) fail(path.string(), ": channel '", it.key(), "' has no functionals");
        r.channels.push_back({it.key(), std::move(fns)});
    }
    if (r.channels.empty()) fail(path.string(), ": recipe has no channels");
    return r;
}

void save_recipe(const FunctionalRecipe& recipe, const std::filesystem::path& path) {
    ordered_json doc = ordered_json::object();
    for (const auto& [name, fns] : recipe.channels) {
        ordered_json list = ordered_json::array();
        for (auto f : fns) list.push_back(to_string(f));
        doc[name] = list;
    }
    write_text_file(path, doc.dump(2) + "\n");
}

namespace {

double percentile(const std::vector<double>& sorted, double p) {
    size_t n = sorted.size();
    if (n == 1) return sorted[0];
    double rank = p * static_cast<double>(n - 1) / 100.0;
    size_t lo = static_cast<size_t>(rank);
    if (lo >= n - 1) return sorted[n - 1];
    double frac = rank - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

struct SlopeStats {
    double rise_mean = 0, rise_std = 0, fall_mean = 0, fall_std = 0;
};

double population_std(const std::vector<double>& v, double mean) {
    if (v.empty()) return 0.0;
    double acc = 0.0;
    for (double x : v) acc += (x - mean) * (x - mean);
    return std::sqrt(acc / static_cast<double>(v.size()));
}

SlopeStats slope_stats(const std::vector<double>& values) {
    std::vector<double> rising, falling;
    for (size_t i = 0; i + 1 < values.size(); ++i) {
        double d = values[i + 1] - values[i];
        if (d > 0) rising.push_back(d);
        else if (d < 0) falling.push_back(d);
    }
    SlopeStats s;
    if (!rising.empty()) {
        double m = 0;
        for (double d : rising) m += d;
        m /= static_cast<double>(rising.size());
        s.rise_mean = m;
        s.rise_std = population_std(rising, m);
    }
    if (!falling.empty()) {
        double m = 0;
        for (double d : falling) m += d;
        m /= static_cast<double>(falling.size());
        s.fall_mean = m;
        s.fall_std = population_std(falling, m);
    }
    return s;
}

}  // namespace

std::vector<double> functionals(const FrameMatrix& frames, const FunctionalRecipe& recipe) {
    if (frames.rows == 0) fail("functionals: empty frame matrix");
    const size_t d = frames.channel_names.size();
    for (size_t i = 0; i < frames.rows * d; ++i)
        if (!std::isfinite(frames.data[i])) fail("functionals: non-finite frame value");

    std::map<std::string, size_t> channel_index;
    for (size_t c = 0; c < d; ++c) channel_index[frames.channel_names[c]] = c;

    std::vector<double> out;
    out.reserve(recipe.output_dim());
    std::vector<double> values(frames.rows), sorted;
    for (const auto& [name, fns] : recipe.channels) {
        auto it = channel_index.find(name);
        if (it == channel_index.end()) fail("functionals: unknown channel '", name, "'");
        size_t c = it->second;
        for (size_t r = 0; r < frames.rows; ++r) values[r] = frames.at(r, c);

        double mean = 0;
        for (double v : values) mean += v;
        mean /= static_cast<double>(values.size());
        double stddev = population_std(values, mean);

        sorted = values;
        std::sort(sorted.begin(), sorted.end());
        SlopeStats slopes = slope_stats(values);

        for (Functional f : fns) {
            switch (f) {
                case Functional::Mean: out.push_back(mean); break;
                case Functional::Cv:
                    out.push_back(std::abs(mean) < 1e-8 ? 0.0 : stddev / mean);
                    break;
                case Functional::P20: out.push_back(percentile(sorted, 20)); break;
                case Functional::P50: out.push_back(percentile(sorted, 50)); break;
                case Functional::P80: out.push_back(percentile(sorted, 80)); break;
                case Functional::RangeP20P80:
                    out.push_back(percentile(sorted, 80) - percentile(sorted, 20));
                    break;
                case Functional::RisingSlopeMean: out.push_back(slopes.rise_mean); break;
                case Functional::RisingSlopeStd: out.push_back(slopes.rise_std); break;
                case Functional::FallingSlopeMean: out.push_back(slopes.fall_mean); break;
                case Functional::FallingSlopeStd: out.push_back(slopes.fall_std); break;
            }
        }
    }
    return out;
}

SessionFrames load_frames(const std::filesystem::path& path) {
    auto table = csv::read_file(path);
    const std::string file = path.string();
    if (table.header.empty() || table.header[0] != "frame_ms")
        fail(file, ": first column must be 'frame_ms'");
    SessionFrames out;
    out.channel_names.assign(table.header.begin() + 1, table.header.end());
    const size_t d = out.channel_names.size();
    if (d == 0) fail(file, ": no channel columns");
    out.frame_ms.reserve(table.rows.size());
    out.data.reserve(table.rows.size() * d);
    for (size_t i = 0; i < table.rows.size(); ++i) {
        const auto& row = table.rows[i];
        std::string ctx = file + ":" + std::to_string(table.line_numbers[i]);
        out.frame_ms.push_back(parse_int(row[0], ctx));
        for (size_t c = 0; c < d; ++c) out.data.push_back(parse_double(row[c + 1], ctx));
        if (i > 0 && out.frame_ms[i] <= out.frame_ms[i - 1])
            fail(ctx, ": frame_ms not strictly increasing");
    }
    return out;
}

FrameMatrix slice_frames(const SessionFrames& frames, int64_t start_ms, int64_t end_ms) {
    FrameMatrix out;
    out.channel_names = frames.channel_names;
    const size_t d = frames.channel_names.size();
    auto lo = std::lower_bound(frames.frame_ms.begin(), frames.frame_ms.end(), start_ms);
    auto hi = std::lower_bound(frames.frame_ms.begin(), frames.frame_ms.end(), end_ms);
    size_t first = static_cast<size_t>(lo - frames.frame_ms.begin());
    size_t last = static_cast<size_t>(hi - frames.frame_ms.begin());
    out.rows = last - first;
    out.data.assign(frames.data.begin() + first * d, frames.data.begin() + last * d);
    return out;
}

std::map<TurnKey, std::vector<double>> load_turn_features(const std::filesystem::path& path,
                                                          int expected_dim) {
    auto table = csv::read_file(path);
    const std::string file = path.string();
    int c_session = table.column("session_id", file);
    int c_turn = table.column("turn_index", file);
    int dim = static_cast<int>(table.header.size()) - 2;
    if (dim != expected_dim)
        fail(file, ": feature dimension ", dim, " differs from expected ", expected_dim);
    for (int v = 0; v < dim; ++v) {
        std::string want = "v" + std::to_string(v);
        if (table.header[v + 2] != want)
            fail(file, ": column ", v + 2, " is '", table.header[v + 2], "', expected '", want, "'");
    }

    std::map<TurnKey, std::vector<double>> out;
    for (size_t i = 0; i < table.rows.size(); ++i) {
        const auto& row = table.rows[i];
        std::string ctx = file + ":" + std::to_string(table.line_numbers[i]);
        TurnKey key = {row[c_session], static_cast<int>(parse_int(row[c_turn], ctx))};
        std::vector<double> vec(dim);
        for (int v = 0; v < dim; ++v) vec[v] = parse_double(row[v + 2], ctx);
        if (!out.emplace(key, std::move(vec)).second)
            fail(ctx, ": duplicate row for session '", key.first, "' turn ", key.second);
    }
    return out;
}

void save_turn_features(const std::map<TurnKey, std::vector<double>>& rows, int dim,
                        const std::filesystem::path& path) {
    csv::Writer w(path);
    std::vector<std::string> header = {"session_id", "turn_index"};
    for (int v = 0; v < dim; ++v) header.push_back("v" + std::to_string(v));
    w.row(header);
    for (const auto& [key, vec] : rows) {
        if (static_cast<int>(vec.size()) != dim)
            fail(path.string(), ": row for '", key.first, "' turn ", key.second, " has dim ",
                 vec.size(), ", expected ", dim);
        std::vector<std::string> fields = {key.first, std::to_string(key.second)};
        for (double v : vec) fields.push_back(format_double(v));
        w.row(fields);
    }
    w.close();
}

void load_lexical(const std::filesystem::path& path, LabeledDataset& dataset, int expected_dim) {
    auto rows = load_turn_features(path, expected_dim);
    for (auto& s : dataset.samples) {
        auto it = rows.find({s.session_id, s.turn_index});
        if (it == rows.end())
            fail(path.string(), ": no embedding for session '", s.session_id, "' turn ",
                 s.turn_index);
        s.features = it->second;
    }
}

std::vector<double> fallback_embed(const std::string& text, int dim, uint64_t seed) {
    if (dim < 1) fail("fallback_embed: dim must be >= 1");
    std::vector<double> vec(dim, 0.0);
    auto tokens = align::normalize_tokens(text);
    if (tokens.empty()) return vec;
    for (const auto& token : tokens) {
        uint64_t h = fnv1a64(token, 1469598103934665603ull ^ seed);
        size_t idx = static_cast<size_t>(h % static_cast<uint64_t>(dim));
        double sign = (h >> 63) ? -1.0 : 1.0;
        vec[idx] += sign;
    }
    double scale = 1.0 / std::sqrt(static_cast<double>(tokens.size()));
    for (double& v : vec) v *= scale;
    return vec;
}

void featurize_acoustic(const Corpus& corpus, LabeledDataset& dataset,
                        const FunctionalRecipe& recipe) {
    std::map<std::string, const Session*> sessions;
    for (const auto& s : corpus.sessions) sessions[s.session_id] = &s;

    std::map<std::string, SessionFrames> cache;
    for (auto& sample : dataset.samples) {
        auto sit = sessions.find(sample.session_id);
        if (sit == sessions.end()) fail("featurize: unknown session '", sample.session_id, "'");
        const Session* session = sit->second;
        if (!session->frames_file)
            fail("featurize: session '", sample.session_id, "' has no frames file");
        auto cit = cache.find(sample.session_id);
        if (cit == cache.end())
            cit = cache.emplace(sample.session_id,
                                load_frames(corpus.base_dir / *session->frames_file)).first;
        FrameMatrix frames = slice_frames(cit->second, sample.start_ms, sample.end_ms);
        if (frames.rows == 0)
            fail("featurize: session '", sample.session_id, "' turn ", sample.turn_index,
                 " has no frames in [", sample.start_ms, ", ", sample.end_ms, ")");
        sample.features = functionals(frames, recipe);
    }
}

void featurize_lexical_fallback(LabeledDataset& dataset, int dim, uint64_t seed) {
    for (auto& s : dataset.samples) s.features = fallback_embed(s.text, dim, seed);
}

}  // namespace dyad::features
