#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dyad/corpus.hpp"
#include "dyad/matrix.hpp"

namespace dyad::model {

struct MlpConfig {
    int input_dim = 0;
    std::vector<int> hidden;  // 1 to 4 layers
    int num_classes = kNumClasses;
    uint64_t seed = 0;
};

enum class WeightMethod { Complement, InverseFreqSum, InverseFreqMax };

const char* to_string(WeightMethod m);
WeightMethod weight_method_from_string(const std::string& s, const std::string& context);

struct ClassWeights {
    std::array<double, 3> w = {1.0, 1.0, 1.0};
    WeightMethod method = WeightMethod::InverseFreqMax;

    static ClassWeights unit();
};

// Complement: 1 - x_i/sum; InverseFreqSum: sum/x_i; InverseFreqMax: max/x_i.
// The inverse-frequency methods require every count >= 1.
ClassWeights class_weights(const std::array<long, 3>& counts, WeightMethod method);

enum class OptimizerKind { SGD, Adam };

const char* to_string(OptimizerKind k);
OptimizerKind optimizer_from_string(const std::string& s, const std::string& context);

enum class DecayMode { Plateau, Exponential };

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::Adam;
    double learning_rate = 1e-3;
    std::optional<double> decay_factor;
    int batch_size = 32;
};

struct MlpModel {
    MlpConfig config;
    std::vector<Matrix> weights;            // per layer, input_dim x output_dim
    std::vector<std::vector<double>> biases;

    size_t num_layers() const { return weights.size(); }
};

// Glorot-uniform weights (scale sqrt(6/(fan_in+fan_out))), zero biases,
// deterministic in config.seed.
MlpModel init(const MlpConfig& config);

long count_params(const MlpConfig& config);

// batch is N x input_dim; returns N x num_classes softmax rows.
Matrix forward(const MlpModel& model, const Matrix& batch);

// Activations kept for backprop: inputs[l] feeds layer l.
struct ForwardCache {
    std::vector<Matrix> activations;  // post-ReLU hidden outputs
    Matrix probs;
};

ForwardCache forward_cached(const MlpModel& model, const Matrix& batch);

// mean over samples of w[label] * (-log p[label]); probabilities below 1e-12
// are clamped and counted through `clamped`.
double weighted_ce_loss(const Matrix& probs, const std::vector<BehaviorClass>& labels,
                        const ClassWeights& weights, int* clamped = nullptr);

struct Gradients {
    std::vector<Matrix> weights;
    std::vector<std::vector<double>> biases;
};

Gradients backward(const MlpModel& model, const Matrix& batch,
                   const std::vector<BehaviorClass>& labels, const ClassWeights& weights);

// argmax with ties to the lowest class index (Hostile first)
std::vector<BehaviorClass> predict(const MlpModel& model, const Matrix& batch);

struct TrainParams {
    int max_epochs = 100;
    int patience = 10;
    DecayMode decay_mode = DecayMode::Plateau;
    uint64_t shuffle_seed = 0;
};

struct TrainResult {
    MlpModel best;        // checkpoint with the highest validation UAR
    double best_val_uar = 0.0;
    int best_epoch = 0;   // 1-based
    int epochs_run = 0;
};

TrainResult train(const MlpModel& model, const Matrix& train_x,
                  const std::vector<BehaviorClass>& train_y, const Matrix& val_x,
                  const std::vector<BehaviorClass>& val_y, const OptimizerConfig& optimizer,
                  const ClassWeights& weights, const TrainParams& params = {});

// Batch membership is a pure function of (epoch, shuffle seed): row indices
// of each mini-batch for one epoch, in update order.
std::vector<std::vector<size_t>> epoch_batches(size_t n, int batch_size, uint64_t shuffle_seed,
                                               int epoch);

void save_checkpoint(const MlpModel& model, const std::filesystem::path& path);
MlpModel load_checkpoint(const std::filesystem::path& path);

}  // namespace dyad::model
