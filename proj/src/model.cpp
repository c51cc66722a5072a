#include "dyad/model.hpp"

#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

#include "dyad/eval.hpp"
#include "dyad/kernels.hpp"
#include "dyad/rng.hpp"

namespace dyad::model {

using nlohmann::json;

const char* to_string(WeightMethod m) {
    switch (m) {
        case WeightMethod::Complement: return "complement";
        case WeightMethod::InverseFreqSum: return "inverse_freq_sum";
        case WeightMethod::InverseFreqMax: return "inverse_freq_max";
    }
    return "?";
}

WeightMethod weight_method_from_string(const std::string& s, const std::string& context) {
    if (s == "complement") return WeightMethod::Complement;
    if (s == "inverse_freq_sum") return WeightMethod::InverseFreqSum;
    if (s == "inverse_freq_max") return WeightMethod::InverseFreqMax;
    fail(context, ": unknown class-weight method '", s, "'");
}

ClassWeights ClassWeights::unit() {
    ClassWeights cw;
    cw.w = {1.0, 1.0, 1.0};
    return cw;
}

ClassWeights class_weights(const std::array<long, 3>& counts, WeightMethod method) {
    long total = counts[0] + counts[1] + counts[2];
    long max_count = std::max({counts[0], counts[1], counts[2]});
    ClassWeights cw;
    cw.method = method;
    for (int i = 0; i < 3; ++i) {
        switch (method) {
            case WeightMethod::Complement:
                if (total <= 0) fail("class_weights: empty dataset");
                cw.w[i] = 1.0 - static_cast<double>(counts[i]) / static_cast<double>(total);
                break;
            case WeightMethod::InverseFreqSum:
                if (counts[i] < 1)
                    fail("class_weights: class ", to_string(static_cast<BehaviorClass>(i)),
                         " has no samples");
                cw.w[i] = static_cast<double>(total) / static_cast<double>(counts[i]);
                break;
            case WeightMethod::InverseFreqMax:
                if (counts[i] < 1)
                    fail("class_weights: class ", to_string(static_cast<BehaviorClass>(i)),
                         " has no samples");
                cw.w[i] = static_cast<double>(max_count) / static_cast<double>(counts[i]);
                break;
        }
    }
    return cw;
}

const char* to_string(OptimizerKind k) { return k == OptimizerKind::SGD ? "sgd" : "adam"; }

OptimizerKind optimizer_from_string(const std::string& s, const std::string& context) {
    if (s == "sgd") return OptimizerKind::SGD;
    if (s == "adam") return OptimizerKind::Adam;
    fail(context, ": unknown optimizer '", s, "'");
}

namespace {

void validate_config(const MlpConfig& config) {
    if (config.input_dim < 1) fail("mlp config: input_dim must be >= 1");
    if (config.hidden.empty() || config.hidden.size() > 4)
        fail("mlp config: hidden layer count must be 1 to 4, got ", config.hidden.size());
    for (int w : config.hidden)
        if (w < 1) fail("mlp config: hidden width must be >= 1, got ", w);
    if (config.num_classes < 2) fail("mlp config: num_classes must be >= 2");
}

std::vector<int> layer_dims(const MlpConfig& config) {
    std::vector<int> dims;
    dims.push_back(config.input_dim);
    for (int w : config.hidden) dims.push_back(w);
    dims.push_back(config.num_classes);
    return dims;
}

}  // namespace

MlpModel init(const MlpConfig& config) {
    validate_config(config);
    MlpModel m;
    m.config = config;
    Rng rng(config.seed);
    auto dims = layer_dims(config);
    for (size_t l = 0; l + 1 < dims.size(); ++l) {
        size_t fan_in = static_cast<size_t>(dims[l]);
        size_t fan_out = static_cast<size_t>(dims[l + 1]);
        double scale = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        Matrix w(fan_in, fan_out);
        for (double& v : w.data) v = rng.uniform(-scale, scale);
        m.weights.push_back(std::move(w));
        m.biases.emplace_back(fan_out, 0.0);
    }
    return m;
}

long count_params(const MlpConfig& config) {
    validate_config(config);
    auto dims = layer_dims(config);
    long total = 0;
    for (size_t l = 0; l + 1 < dims.size(); ++l)
        total += static_cast<long>(dims[l]) * dims[l + 1] + dims[l + 1];
    return total;
}

ForwardCache forward_cached(const MlpModel& model, const Matrix& batch) {
    if (batch.cols != static_cast<size_t>(model.config.input_dim))
        fail("forward: batch has ", batch.cols, " columns, model expects ",
             model.config.input_dim);
    ForwardCache cache;
    const Matrix* current = &batch;
    Matrix z;
    for (size_t l = 0; l + 1 < model.num_layers(); ++l) {
        kernels::matmul_nn(*current, model.weights[l], z);
        kernels::add_bias_rows(z, model.biases[l]);
        kernels::relu_inplace(z);
        cache.activations.push_back(std::move(z));
        z = Matrix();
        current = &cache.activations.back();
    }
    kernels::matmul_nn(*current, model.weights.back(), cache.probs);
    kernels::add_bias_rows(cache.probs, model.biases.back());
    kernels::softmax_rows(cache.probs);
    return cache;
}

Matrix forward(const MlpModel& model, const Matrix& batch) {
    return forward_cached(model, batch).probs;
}

double weighted_ce_loss(const Matrix& probs, const std::vector<BehaviorClass>& labels,
                        const ClassWeights& weights, int* clamped) {
    if (probs.rows != labels.size())
        fail("weighted_ce_loss: ", probs.rows, " probability rows for ", labels.size(),
             " labels");
    if (probs.rows == 0) fail("weighted_ce_loss: empty batch");
    int clamp_count = 0;
    double total = 0.0;
    for (size_t n = 0; n < probs.rows; ++n) {
        int y = static_cast<int>(labels[n]);
        double p = probs(n, y);
        if (p < 1e-12) {
            p = 1e-12;
            ++clamp_count;
        }
        total += weights.w[y] * (-std::log(p));
    }
    if (clamped) *clamped = clamp_count;
    return total / static_cast<double>(probs.rows);
}

Gradients backward(const MlpModel& model, const Matrix& batch,
                   const std::vector<BehaviorClass>& labels, const ClassWeights& weights) {
    ForwardCache cache = forward_cached(model, batch);
    const size_t n = batch.rows;
    if (labels.size() != n) fail("backward: label count mismatch");

    Gradients grads;
    grads.weights.resize(model.num_layers());
    grads.biases.resize(model.num_layers());

    // softmax + weighted CE: dL/dz = w_y/N * (p - onehot(y))
    Matrix delta = cache.probs;
    for (size_t r = 0; r < n; ++r) {
        int y = static_cast<int>(labels[r]);
        double scale = weights.w[y] / static_cast<double>(n);
        double* row = delta.row_ptr(r);
        for (size_t c = 0; c < delta.cols; ++c) {
            double target = (static_cast<int>(c) == y) ? 1.0 : 0.0;
            row[c] = scale * (row[c] - target);
        }
    }

    for (size_t l = model.num_layers(); l-- > 0;) {
        const Matrix& input = (l == 0) ? batch : cache.activations[l - 1];
        kernels::matmul_tn(input, delta, grads.weights[l]);
        kernels::col_sums(delta, grads.biases[l]);
        if (l > 0) {
            Matrix prev_delta;
            kernels::matmul_nt(delta, model.weights[l], prev_delta);
            kernels::relu_backward(cache.activations[l - 1], prev_delta);
            delta = std::move(prev_delta);
        }
    }
    return grads;
}

std::vector<BehaviorClass> predict(const MlpModel& model, const Matrix& batch) {
    Matrix probs = forward(model, batch);
    std::vector<BehaviorClass> out(probs.rows);
    for (size_t r = 0; r < probs.rows; ++r) {
        const double* row = probs.row_ptr(r);
        int best = 0;
        for (size_t c = 1; c < probs.cols; ++c)
            if (row[c] > row[best]) best = static_cast<int>(c);
        out[r] = static_cast<BehaviorClass>(best);
    }
    return out;
}

std::vector<std::vector<size_t>> epoch_batches(size_t n, int batch_size, uint64_t shuffle_seed,
                                               int epoch) {
    if (batch_size < 1) fail("epoch_batches: batch_size must be >= 1");
    std::vector<size_t> perm(n);
    for (size_t i = 0; i < n; ++i) perm[i] = i;
    Rng rng(mix_seed(shuffle_seed, static_cast<uint64_t>(epoch)));
    rng.shuffle(perm);
    std::vector<std::vector<size_t>> batches;
    for (size_t start = 0; start < n; start += batch_size) {
        size_t end = std::min(n, start + batch_size);
        batches.emplace_back(perm.begin() + start, perm.begin() + end);
    }
    return batches;
}

namespace {

struct AdamState {
    std::vector<Matrix> m_w, v_w;
    std::vector<std::vector<double>> m_b, v_b;
    long step = 0;

    explicit AdamState(const MlpModel& model) {
        for (size_t l = 0; l < model.num_layers(); ++l) {
            m_w.emplace_back(model.weights[l].rows, model.weights[l].cols);
            v_w.emplace_back(model.weights[l].rows, model.weights[l].cols);
            m_b.emplace_back(model.biases[l].size(), 0.0);
            v_b.emplace_back(model.biases[l].size(), 0.0);
        }
    }
};

constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kEpsilon = 1e-8;

void adam_update(double& param, double grad, double& m, double& v, double lr, double bc1,
                 double bc2) {
    m = kBeta1 * m + (1.0 - kBeta1) * grad;
    v = kBeta2 * v + (1.0 - kBeta2) * grad * grad;
    double m_hat = m / bc1;
    double v_hat = v / bc2;
    param -= lr * m_hat / (std::sqrt(v_hat) + kEpsilon);
}

void apply_gradients(MlpModel& model, const Gradients& grads, const OptimizerConfig& opt,
                     double lr, AdamState* adam) {
    if (opt.kind == OptimizerKind::SGD) {
        for (size_t l = 0; l < model.num_layers(); ++l) {
            for (size_t i = 0; i < model.weights[l].data.size(); ++i)
                model.weights[l].data[i] -= lr * grads.weights[l].data[i];
            for (size_t i = 0; i < model.biases[l].size(); ++i)
                model.biases[l][i] -= lr * grads.biases[l][i];
        }
        return;
    }
    adam->step++;
    double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(adam->step));
    double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(adam->step));
    for (size_t l = 0; l < model.num_layers(); ++l) {
        for (size_t i = 0; i < model.weights[l].data.size(); ++i)
            adam_update(model.weights[l].data[i], grads.weights[l].data[i],
                        adam->m_w[l].data[i], adam->v_w[l].data[i], lr, bc1, bc2);
        for (size_t i = 0; i < model.biases[l].size(); ++i)
            adam_update(model.biases[l][i], grads.biases[l][i], adam->m_b[l][i],
                        adam->v_b[l][i], lr, bc1, bc2);
    }
}

Matrix gather_rows(const Matrix& src, const std::vector<size_t>& rows) {
    Matrix out(rows.size(), src.cols);
    for (size_t r = 0; r < rows.size(); ++r)
        std::copy(src.row_ptr(rows[r]), src.row_ptr(rows[r]) + src.cols, out.row_ptr(r));
    return out;
}

double validation_uar(const MlpModel& model, const Matrix& val_x,
                      const std::vector<BehaviorClass>& val_y) {
    auto preds = predict(model, val_x);
    eval::ConfusionMatrix cm;
    for (size_t i = 0; i < preds.size(); ++i) cm.add(val_y[i], preds[i]);
    return eval::uar(cm);
}

}  // namespace

TrainResult train(const MlpModel& model, const Matrix& train_x,
                  const std::vector<BehaviorClass>& train_y, const Matrix& val_x,
                  const std::vector<BehaviorClass>& val_y, const OptimizerConfig& optimizer,
                  const ClassWeights& weights, const TrainParams& params) {
    if (train_x.rows == 0) fail("train: empty training set");
    if (val_x.rows == 0) fail("train: empty validation set");
    if (train_x.rows != train_y.size() || val_x.rows != val_y.size())
        fail("train: feature/label count mismatch");

    MlpModel current = model;
    AdamState adam(current);
    double lr = optimizer.learning_rate;

    TrainResult result;
    result.best_val_uar = -std::numeric_limits<double>::infinity();
    int no_improve_streak = 0;
    int decay_interval = std::max(1, params.patience / 2);

    for (int epoch = 1; epoch <= params.max_epochs; ++epoch) {
        auto batches = epoch_batches(train_x.rows, optimizer.batch_size, params.shuffle_seed,
                                     epoch);
        for (const auto& batch_rows : batches) {
            Matrix bx = gather_rows(train_x, batch_rows);
            std::vector<BehaviorClass> by(batch_rows.size());
            for (size_t i = 0; i < batch_rows.size(); ++i) by[i] = train_y[batch_rows[i]];
            Gradients grads = backward(current, bx, by, weights);
            apply_gradients(current, grads, optimizer, lr, &adam);
        }
        result.epochs_run = epoch;

        double val_uar = validation_uar(current, val_x, val_y);
        if (val_uar > result.best_val_uar) {
            result.best_val_uar = val_uar;
            result.best = current;
            result.best_epoch = epoch;
            no_improve_streak = 0;
        } else {
            ++no_improve_streak;
            if (optimizer.decay_factor && params.decay_mode == DecayMode::Plateau &&
                no_improve_streak % decay_interval == 0)
                lr *= *optimizer.decay_factor;
            if (no_improve_streak >= params.patience) break;
        }
        if (optimizer.decay_factor && params.decay_mode == DecayMode::Exponential)
            lr *= *optimizer.decay_factor;
    }
    return result;
}

void save_checkpoint(const MlpModel& model, const std::filesystem::path& path) {
    json doc;
    doc["format_version"] = 1;
    doc["config"] = {{"input_dim", model.config.input_dim},
                     {"hidden", model.config.hidden},
                     {"num_classes", model.config.num_classes},
                     {"seed", model.config.seed}};
    doc["layers"] = json::array();
    for (size_t l = 0; l < model.num_layers(); ++l) {
        json layer;
        layer["rows"] = model.weights[l].rows;
        layer["cols"] = model.weights[l].cols;
        layer["weights"] = model.weights[l].data;  // row-major
        layer["bias"] = model.biases[l];
        doc["layers"].push_back(std::move(layer));
    }
    write_text_file(path, doc.dump() + "\n");
}

MlpModel load_checkpoint(const std::filesystem::path& path) {
    json doc;
    try {
        doc = json::parse(read_text_file(path));
    } catch (const json::exception& e) {
        fail(path.string(), ": checkpoint parse error: ", e.what());
    }
    if (!doc.contains("format_version") || doc["format_version"].get<int>() != 1)
        fail(path.string(), ": unsupported checkpoint format");
    MlpModel m;
    try {
        m.config.input_dim = doc["config"]["input_dim"].get<int>();
        m.config.hidden = doc["config"]["hidden"].get<std::vector<int>>();
        m.config.num_classes = doc["config"]["num_classes"].get<int>();
        m.config.seed = doc["config"]["seed"].get<uint64_t>();
        for (const auto& layer : doc["layers"]) {
            Matrix w(layer["rows"].get<size_t>(), layer["cols"].get<size_t>());
            w.data = layer["weights"].get<std::vector<double>>();
            if (w.data.size() != w.rows * w.cols)
                fail(path.string(), ": weight block size mismatch");
            m.weights.push_back(std::move(w));
            m.biases.push_back(layer["bias"].get<std::vector<double>>());
        }
    } catch (const json::exception& e) {
        fail(path.string(), ": malformed checkpoint: ", e.what());
    }
    return m;
}

}  // namespace dyad::model
