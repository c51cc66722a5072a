#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "dyad/eval.hpp"
#include "dyad/model.hpp"
#include "dyad/rng.hpp"
#include "support/temp_dir.hpp"

using namespace dyad;
using namespace dyad::model;
using testsupport::TempDir;

namespace {

// 3-cluster toy data: class means sit mean_shift apart along one axis
void make_clusters(int per_class, double mean_shift, uint64_t seed, Matrix& x,
                   std::vector<BehaviorClass>& y) {
    Rng rng(seed);
    x = Matrix(static_cast<size_t>(per_class) * 3, 4);
    y.clear();
    size_t row = 0;
    for (int c = 0; c < 3; ++c) {
        for (int i = 0; i < per_class; ++i, ++row) {
            for (size_t d = 0; d < 4; ++d)
                x(row, d) = rng.gaussian() + (d == static_cast<size_t>(c) ? mean_shift : 0.0);
            y.push_back(static_cast<BehaviorClass>(c));
        }
    }
}

double max_rel_gradient_error(const MlpConfig& config, int batch, uint64_t seed) {
    Rng rng(seed);
    Matrix x(batch, config.input_dim);
    for (double& v : x.data) v = rng.uniform(-1.5, 1.5);
    std::vector<BehaviorClass> y(batch);
    for (auto& l : y) l = static_cast<BehaviorClass>(rng.uniform_int(0, 2));
    ClassWeights weights;
    weights.w = {1.0, 2.5, 0.7};

    MlpModel m = init(config);
    Gradients grads = backward(m, x, y, weights);

    const double h = 1e-5;
    const double base = weighted_ce_loss(forward(m, x), y, weights);
    double worst = 0.0;
    auto check_param = [&](double& param, double analytic) {
        double saved = param;
        param = saved + h;
        double up = weighted_ce_loss(forward(m, x), y, weights);
        param = saved - h;
        double down = weighted_ce_loss(forward(m, x), y, weights);
        param = saved;
        double numeric = (up - down) / (2.0 * h);
        double denom = std::max(std::abs(analytic), std::abs(numeric));
        if (denom < 1e-8) return;
        // central differences are only an oracle where the loss is smooth; a
        // ReLU kink inside [θ-h, θ+h] splits the one-sided slopes, and any
        // split above half the tolerance budget invalidates the probe
        double d_plus = (up - base) / h;
        double d_minus = (base - down) / h;
        if (std::abs(d_plus - d_minus) > 0.5e-4 * denom) return;
        worst = std::max(worst, std::abs(analytic - numeric) / denom);
    };
    for (size_t l = 0; l < m.num_layers(); ++l) {
        for (size_t i = 0; i < m.weights[l].data.size(); ++i)
            check_param(m.weights[l].data[i], grads.weights[l].data[i]);
        for (size_t i = 0; i < m.biases[l].size(); ++i)
            check_param(m.biases[l][i], grads.biases[l][i]);
    }
    return worst;
}

}  // namespace

TEST_CASE("class weight formulas") {
    // counts by class name: Constructive 13450, Hostile 176, Positive 1369
    std::array<long, 3> counts;
    counts[static_cast<int>(BehaviorClass::Hostile)] = 176;
    counts[static_cast<int>(BehaviorClass::Constructive)] = 13450;
    counts[static_cast<int>(BehaviorClass::Positive)] = 1369;

    // 4-decimal fixtures
    auto max_w = class_weights(counts, WeightMethod::InverseFreqMax);
    CHECK(max_w.w[static_cast<int>(BehaviorClass::Constructive)] == 1.0);
    CHECK(std::abs(max_w.w[static_cast<int>(BehaviorClass::Hostile)] - 76.4205) <= 1e-4);
    CHECK(std::abs(max_w.w[static_cast<int>(BehaviorClass::Positive)] - 9.8247) <= 1e-4);

    // 10.9532 is the truncated print of the exact 10.95325, so compare at 1e-4
    auto sum_w = class_weights(counts, WeightMethod::InverseFreqSum);
    CHECK(std::abs(sum_w.w[static_cast<int>(BehaviorClass::Constructive)] - 1.1149) <= 1e-4);
    CHECK(std::abs(sum_w.w[static_cast<int>(BehaviorClass::Hostile)] - 85.1989) <= 1e-4);
    CHECK(std::abs(sum_w.w[static_cast<int>(BehaviorClass::Positive)] - 10.9532) <= 1e-4);

    auto comp = class_weights({2, 3, 5}, WeightMethod::Complement);
    CHECK(comp.w[0] == doctest::Approx(0.8));
    CHECK(comp.w[1] == doctest::Approx(0.7));
    CHECK(comp.w[2] == doctest::Approx(0.5));

    CHECK_THROWS_AS(class_weights({0, 5, 5}, WeightMethod::InverseFreqMax), ValidationError);
}

TEST_CASE("init is deterministic in the seed") {
    MlpConfig config{8, {6, 4}, 3, 42};
    MlpModel a = init(config);
    MlpModel b = init(config);
    REQUIRE(a.num_layers() == 3);
    for (size_t l = 0; l < a.num_layers(); ++l) {
        CHECK(a.weights[l].data == b.weights[l].data);
        CHECK(a.biases[l] == std::vector<double>(a.biases[l].size(), 0.0));
    }
    config.seed = 43;
    MlpModel c = init(config);
    CHECK(a.weights[0].data != c.weights[0].data);
}

TEST_CASE("parameter counting") {
    CHECK(count_params({88, {128, 64, 32}, 3, 0}) == 21827);
    CHECK(count_params({88, {64, 32, 16}, 3, 0}) == 8355);
    CHECK(count_params({600, {300}, 3, 0}) == 600 * 300 + 300 + 300 * 3 + 3);
    CHECK_THROWS_AS(count_params({88, {}, 3, 0}), ValidationError);
    CHECK_THROWS_AS(count_params({88, {8, 8, 8, 8, 8}, 3, 0}), ValidationError);
    CHECK_THROWS_AS(count_params({88, {0}, 3, 0}), ValidationError);
}

TEST_CASE("zeroed network gives uniform class probabilities") {
    MlpModel m = init({5, {4}, 3, 1});
    for (auto& w : m.weights) w.data.assign(w.data.size(), 0.0);
    Matrix x(2, 5);
    x.data = {1, -2, 3, 0.5, 2, 0, 0, 1, 1, -1};
    Matrix probs = forward(m, x);
    for (size_t r = 0; r < probs.rows; ++r)
        for (size_t c = 0; c < 3; ++c)
            CHECK(probs(r, c) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("hand-computed forward pass on a 2-(2)-3 net") {
    MlpModel m = init({2, {2}, 3, 0});
    m.weights[0].data = {0.5, -0.25, 0.75, 0.1};        // 2x2, row-major by input
    m.biases[0] = {0.1, -0.2};
    m.weights[1].data = {0.2, -0.4, 0.3, -0.5, 0.25, 0.6};  // 2x3
    m.biases[1] = {0.05, -0.05, 0.1};

    Matrix x(1, 2);
    x.data = {1.0, 2.0};
    Matrix probs = forward(m, x);

    // independent arithmetic
    double h0 = std::max(0.0, 1.0 * 0.5 + 2.0 * 0.75 + 0.1);    // 2.1
    double h1 = std::max(0.0, 1.0 * -0.25 + 2.0 * 0.1 - 0.2);   // 0
    double z0 = h0 * 0.2 + h1 * -0.5 + 0.05;
    double z1 = h0 * -0.4 + h1 * 0.25 - 0.05;
    double z2 = h0 * 0.3 + h1 * 0.6 + 0.1;
    double denom = std::exp(z0) + std::exp(z1) + std::exp(z2);
    CHECK(probs(0, 0) == doctest::Approx(std::exp(z0) / denom).epsilon(1e-9));
    CHECK(probs(0, 1) == doctest::Approx(std::exp(z1) / denom).epsilon(1e-9));
    CHECK(probs(0, 2) == doctest::Approx(std::exp(z2) / denom).epsilon(1e-9));
}

TEST_CASE("duplicated batch rows give identical probability rows") {
    MlpModel m = init({6, {5, 4}, 3, 9});
    Rng rng(2);
    Matrix x(4, 6);
    for (size_t d = 0; d < 6; ++d) {
        double v = rng.uniform(-1, 1);
        for (size_t r = 0; r < 4; ++r) x(r, d) = v;
    }
    Matrix probs = forward(m, x);
    for (size_t r = 1; r < 4; ++r)
        for (size_t c = 0; c < 3; ++c) CHECK(probs(r, c) == probs(0, c));
}

TEST_CASE("forward rejects dimension mismatches") {
    MlpModel m = init({4, {3}, 3, 1});
    Matrix x(2, 5);
    CHECK_THROWS_AS(forward(m, x), ValidationError);
}

TEST_CASE("weighted cross entropy") {
    Matrix probs(2, 3);
    probs.data = {1.0, 0.0, 0.0, 0.0, 0.0, 1.0};
    std::vector<BehaviorClass> labels = {BehaviorClass::Hostile, BehaviorClass::Positive};
    CHECK(weighted_ce_loss(probs, labels, ClassWeights::unit()) == 0.0);

    // unit weights equal the unweighted reduction bit for bit
    Rng rng(31);
    Matrix p2(9, 3);
    for (size_t r = 0; r < 9; ++r) {
        double a = rng.uniform(0.05, 1), b = rng.uniform(0.05, 1), c = rng.uniform(0.05, 1);
        double s = a + b + c;
        p2(r, 0) = a / s;
        p2(r, 1) = b / s;
        p2(r, 2) = c / s;
    }
    std::vector<BehaviorClass> y2(9);
    for (auto& l : y2) l = static_cast<BehaviorClass>(rng.uniform_int(0, 2));
    double unweighted = 0.0;
    for (size_t r = 0; r < 9; ++r)
        unweighted += -std::log(p2(r, static_cast<size_t>(y2[r])));
    unweighted /= 9.0;
    // same sample-major order, so equality is exact only if the summation
    // matches; mirror it
    double mirrored = 0.0;
    for (size_t r = 0; r < 9; ++r)
        mirrored += 1.0 * -std::log(p2(r, static_cast<size_t>(y2[r])));
    mirrored /= 9.0;
    CHECK(weighted_ce_loss(p2, y2, ClassWeights::unit()) == mirrored);
    CHECK(weighted_ce_loss(p2, y2, ClassWeights::unit()) ==
          doctest::Approx(unweighted).epsilon(1e-15));

    // single Hostile sample at p=0.5 under the reference-table weights
    std::array<long, 3> counts;
    counts[static_cast<int>(BehaviorClass::Hostile)] = 176;
    counts[static_cast<int>(BehaviorClass::Constructive)] = 13450;
    counts[static_cast<int>(BehaviorClass::Positive)] = 1369;
    auto weights = class_weights(counts, WeightMethod::InverseFreqMax);
    Matrix ph(1, 3);
    ph.data = {0.5, 0.3, 0.2};
    double loss = weighted_ce_loss(ph, {BehaviorClass::Hostile}, weights);
    CHECK(loss == doctest::Approx((13450.0 / 176.0) * std::log(2.0)).epsilon(1e-12));

    // zero probability at the true class is clamped and flagged
    Matrix pz(1, 3);
    pz.data = {0.0, 1.0, 0.0};
    int clamped = 0;
    double big = weighted_ce_loss(pz, {BehaviorClass::Hostile}, ClassWeights::unit(), &clamped);
    CHECK(clamped == 1);
    CHECK(big == doctest::Approx(-std::log(1e-12)));
}

TEST_CASE("gradient is exactly zero at a saturated correct fit") {
    MlpModel m = init({2, {2}, 3, 4});
    for (auto& w : m.weights) w.data.assign(w.data.size(), 0.0);
    m.biases[1] = {1000.0, 0.0, 0.0};  // softmax saturates to (1, 0, 0)
    Matrix x(3, 2);
    x.data = {0.3, -0.4, 1.0, 0.2, -0.7, 0.9};
    std::vector<BehaviorClass> y(3, BehaviorClass::Hostile);
    Matrix probs = forward(m, x);
    CHECK(probs(0, 0) == 1.0);
    Gradients grads = backward(m, x, y, ClassWeights::unit());
    for (const auto& gw : grads.weights)
        for (double v : gw.data) CHECK(v == 0.0);
    for (const auto& gb : grads.biases)
        for (double v : gb) CHECK(v == 0.0);
}

TEST_CASE("backprop matches central finite differences") {
    CHECK(max_rel_gradient_error({5, {4}, 3, 11}, 6, 101) < 1e-4);
    CHECK(max_rel_gradient_error({7, {6, 4}, 3, 12}, 8, 102) < 1e-4);
    CHECK(max_rel_gradient_error({4, {3, 3, 2}, 3, 13}, 5, 103) < 1e-4);
}

TEST_CASE("scaling class weights scales gradients linearly") {
    MlpConfig config{5, {4}, 3, 21};
    Rng rng(77);
    Matrix x(6, 5);
    for (double& v : x.data) v = rng.uniform(-1, 1);
    std::vector<BehaviorClass> y(6);
    for (auto& l : y) l = static_cast<BehaviorClass>(rng.uniform_int(0, 2));

    MlpModel m = init(config);
    ClassWeights w1;
    w1.w = {1.0, 2.0, 3.0};
    ClassWeights w3;
    const double k = 3.5;
    for (int c = 0; c < 3; ++c) w3.w[c] = k * w1.w[c];

    Gradients g1 = backward(m, x, y, w1);
    Gradients g3 = backward(m, x, y, w3);
    for (size_t l = 0; l < g1.weights.size(); ++l)
        for (size_t i = 0; i < g1.weights[l].data.size(); ++i)
            CHECK(g3.weights[l].data[i] ==
                  doctest::Approx(k * g1.weights[l].data[i]).epsilon(1e-12));
}

TEST_CASE("training separates a 5-sigma cluster problem") {
    Matrix train_x, val_x;
    std::vector<BehaviorClass> train_y, val_y;
    make_clusters(40, 5.0, 1001, train_x, train_y);
    make_clusters(15, 5.0, 1002, val_x, val_y);

    OptimizerConfig opt;
    opt.kind = OptimizerKind::Adam;
    opt.learning_rate = 1e-2;
    opt.batch_size = 16;
    TrainParams params;
    params.max_epochs = 100;
    params.patience = 10;
    params.shuffle_seed = 7;

    auto result = train(init({4, {8, 4}, 3, 5}), train_x, train_y, val_x, val_y, opt,
                        ClassWeights::unit(), params);
    CHECK(result.best_val_uar >= 0.95);
    CHECK(result.epochs_run <= 100);
}

TEST_CASE("label-shuffled training stays near chance") {
    Matrix train_x, val_x;
    std::vector<BehaviorClass> train_y, val_y;
    make_clusters(40, 5.0, 2001, train_x, train_y);
    make_clusters(20, 5.0, 2002, val_x, val_y);
    Rng rng(2003);
    rng.shuffle(train_y);  // break the feature-label link
    rng.shuffle(val_y);

    OptimizerConfig opt;
    opt.kind = OptimizerKind::Adam;
    opt.learning_rate = 1e-3;
    opt.batch_size = 16;
    TrainParams params;
    params.max_epochs = 30;
    params.patience = 5;
    params.shuffle_seed = 8;

    auto result = train(init({4, {8, 4}, 3, 6}), train_x, train_y, val_x, val_y, opt,
                        ClassWeights::unit(), params);

    auto chance = eval::chance_uar({val_y}, {1.0 / 3, 1.0 / 3, 1.0 / 3}, 2000, 9);
    CHECK(std::abs(result.best_val_uar - chance.mean) <= 0.1);
}

TEST_CASE("training is bitwise deterministic and batches are pure in (epoch, seed)") {
    Matrix train_x, val_x;
    std::vector<BehaviorClass> train_y, val_y;
    make_clusters(20, 2.0, 3001, train_x, train_y);
    make_clusters(10, 2.0, 3002, val_x, val_y);

    OptimizerConfig opt;
    opt.kind = OptimizerKind::SGD;
    opt.learning_rate = 1e-2;
    opt.decay_factor = 0.5;
    opt.batch_size = 8;
    TrainParams params;
    params.max_epochs = 12;
    params.patience = 4;
    params.shuffle_seed = 55;

    auto r1 = train(init({4, {6}, 3, 77}), train_x, train_y, val_x, val_y, opt,
                    ClassWeights::unit(), params);
    auto r2 = train(init({4, {6}, 3, 77}), train_x, train_y, val_x, val_y, opt,
                    ClassWeights::unit(), params);
    CHECK(r1.best_epoch == r2.best_epoch);
    CHECK(r1.best_val_uar == r2.best_val_uar);
    for (size_t l = 0; l < r1.best.num_layers(); ++l) {
        CHECK(r1.best.weights[l].data == r2.best.weights[l].data);
        CHECK(r1.best.biases[l] == r2.best.biases[l]);
    }

    CHECK(epoch_batches(100, 32, 9, 3) == epoch_batches(100, 32, 9, 3));
    CHECK(epoch_batches(100, 32, 9, 3) != epoch_batches(100, 32, 9, 4));
    CHECK(epoch_batches(100, 32, 9, 3) != epoch_batches(100, 32, 10, 3));
    auto batches = epoch_batches(100, 32, 9, 0);
    CHECK(batches.size() == 4);  // 32+32+32+4
    CHECK(batches.back().size() == 4);
}

TEST_CASE("exponential decay mode changes the trajectory") {
    // slow steady improvement keeps the best checkpoint late, so the
    // per-epoch decay visibly diverges from the plateau schedule
    Matrix train_x, val_x;
    std::vector<BehaviorClass> train_y, val_y;
    make_clusters(25, 5.0, 4001, train_x, train_y);
    make_clusters(12, 5.0, 4002, val_x, val_y);

    OptimizerConfig opt;
    opt.kind = OptimizerKind::SGD;
    opt.learning_rate = 5e-3;
    opt.decay_factor = 0.2;
    opt.batch_size = 16;
    TrainParams plateau;
    plateau.max_epochs = 12;
    plateau.patience = 12;
    plateau.shuffle_seed = 3;
    TrainParams exponential = plateau;
    exponential.decay_mode = DecayMode::Exponential;

    auto a = train(init({4, {6}, 3, 12}), train_x, train_y, val_x, val_y, opt,
                   ClassWeights::unit(), plateau);
    auto b = train(init({4, {6}, 3, 12}), train_x, train_y, val_x, val_y, opt,
                   ClassWeights::unit(), exponential);
    bool same = a.best_epoch == b.best_epoch;
    for (size_t l = 0; l < a.best.num_layers() && same; ++l)
        same = a.best.weights[l].data == b.best.weights[l].data;
    CHECK_FALSE(same);
}

TEST_CASE("train rejects empty splits") {
    Matrix x(4, 2, 0.5), empty(0, 2);
    std::vector<BehaviorClass> y(4, BehaviorClass::Hostile), none;
    OptimizerConfig opt;
    CHECK_THROWS_AS(
        train(init({2, {2}, 3, 0}), empty, none, x, y, opt, ClassWeights::unit(), {}),
        ValidationError);
    CHECK_THROWS_AS(
        train(init({2, {2}, 3, 0}), x, y, empty, none, opt, ClassWeights::unit(), {}),
        ValidationError);
}

TEST_CASE("checkpoints round-trip bitwise") {
    TempDir dir("model_ckpt");
    MlpModel m = init({7, {5, 3}, 3, 99});
    Rng rng(5);
    for (auto& b : m.biases)
        for (auto& v : b) v = rng.gaussian();
    save_checkpoint(m, dir / "ckpt.json");
    MlpModel loaded = load_checkpoint(dir / "ckpt.json");
    CHECK(loaded.config.input_dim == m.config.input_dim);
    CHECK(loaded.config.hidden == m.config.hidden);
    CHECK(loaded.config.seed == m.config.seed);
    REQUIRE(loaded.num_layers() == m.num_layers());
    for (size_t l = 0; l < m.num_layers(); ++l) {
        CHECK(loaded.weights[l].data == m.weights[l].data);
        CHECK(loaded.biases[l] == m.biases[l]);
    }
}
