#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "pfedlia/model.hpp"
#include "test_util.hpp"

using namespace pfedlia;
using test_util::finite_difference_gradient;
using test_util::max_relative_error;
using test_util::random_batch;
using test_util::random_params;

namespace {

// Straight-line reimplementation of mean softmax cross-entropy, kept free of
// the production forward path (no logsumexp trick, long double accumulation).
double reference_loss(const ModelSpec& spec, const ParamVector& theta, const Dataset& batch) {
    long double total = 0.0L;
    for (const auto& ex : batch) {
        std::vector<long double> logits(spec.num_classes, 0.0L);
        if (spec.kind == ModelKind::softmax_regression) {
            for (int c = 0; c < spec.num_classes; ++c) {
                long double z = theta[spec.num_classes * spec.input_dim + c];
                for (int d = 0; d < spec.input_dim; ++d)
                    z += theta[c * spec.input_dim + d] * ex.features[d];
                logits[c] = z;
            }
        } else {
            const int h = spec.hidden_dim, d = spec.input_dim, c = spec.num_classes;
            std::vector<long double> hidden(h);
            for (int i = 0; i < h; ++i) {
                long double z = theta[h * d + i];
                for (int j = 0; j < d; ++j) z += theta[i * d + j] * ex.features[j];
                hidden[i] = std::tanh(static_cast<double>(z));
            }
            const int w2 = h * d + h;
            for (int k = 0; k < c; ++k) {
                long double z = theta[w2 + c * h + k];
                for (int i = 0; i < h; ++i) z += theta[w2 + k * h + i] * hidden[i];
                logits[k] = z;
            }
        }
        long double denom = 0.0L;
        for (long double z : logits) denom += std::exp(static_cast<double>(z));
        const long double p = std::exp(static_cast<double>(logits[ex.label])) / denom;
        total += -std::log(static_cast<double>(p));
    }
    return static_cast<double>(total / batch.size());
}

const ModelSpec kSoftmax{ModelKind::softmax_regression, 2, 2, 0};
const ModelSpec kMlp{ModelKind::mlp, 4, 3, 8};

}  // namespace

TEST_CASE("parameter counts follow the spec layout") {
    CHECK(param_count(kSoftmax) == 6);  // 2*2 weights + 2 biases
    CHECK(param_count(kMlp) == 67);     // 4*8 + 8 + 8*3 + 3
    CHECK(param_count({ModelKind::softmax_regression, 784, 10, 0}) == 7850);
}

TEST_CASE("spec validation rejects bad dimensions") {
    CHECK_THROWS_AS(param_count({ModelKind::softmax_regression, 0, 2, 0}), ConfigError);
    CHECK_THROWS_AS(param_count({ModelKind::softmax_regression, 2, 1, 0}), ConfigError);
    CHECK_THROWS_AS(param_count({ModelKind::mlp, 2, 2, 0}), ConfigError);
}

TEST_CASE("init_params is deterministic with zero biases in range") {
    const ParamVector a = init_params(kMlp, 7);
    const ParamVector b = init_params(kMlp, 7);
    CHECK(a == b);  // bit-identical
    CHECK(a != init_params(kMlp, 8));
    for (double v : a) {
        CHECK(v >= -0.05);
        CHECK(v <= 0.05);
    }
    // biases of the softmax model are the trailing entries
    const ParamVector s = init_params(kSoftmax, 3);
    CHECK(s[4] == 0.0);
    CHECK(s[5] == 0.0);
}

TEST_CASE("uniform-logit loss is ln(num_classes)") {
    const ParamVector zero(param_count(kSoftmax), 0.0);
    const Dataset batch = random_batch(kSoftmax, 10, 1);
    CHECK(forward_loss(kSoftmax, zero, batch) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

    const ModelSpec ten{ModelKind::softmax_regression, 3, 10, 0};
    const ParamVector zero10(param_count(ten), 0.0);
    const Dataset batch10 = random_batch(ten, 5, 2);
    CHECK(forward_loss(ten, zero10, batch10) == doctest::Approx(std::log(10.0)).epsilon(1e-12));
}

TEST_CASE("a confident correct model drives the loss toward zero") {
    // bias of the true class cranked up, weights zero
    ParamVector theta(param_count(kSoftmax), 0.0);
    theta[4] = 30.0;  // bias of class 0
    Dataset one{{{0.0, 0.0}, 0}};
    CHECK(forward_loss(kSoftmax, theta, one) < 1e-12);
}

TEST_CASE("forward_loss matches the slow reference implementation") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        for (const ModelSpec& spec : {kSoftmax, kMlp}) {
            const ParamVector theta = random_params(spec, seed + 10);
            const Dataset batch = random_batch(spec, 12, seed + 20);
            CHECK(forward_loss(spec, theta, batch) ==
                  doctest::Approx(reference_loss(spec, theta, batch)).epsilon(1e-10));
        }
    }
}

TEST_CASE("forward_loss rejects dimension mismatches") {
    const ParamVector theta = init_params(kSoftmax, 0);
    CHECK_THROWS_AS(forward_loss(kSoftmax, theta, Dataset{{{1.0, 2.0, 3.0}, 0}}), DimensionError);
    CHECK_THROWS_AS(forward_loss(kSoftmax, theta, Dataset{{{1.0, 2.0}, 5}}), DimensionError);
    CHECK_THROWS_AS(forward_loss(kSoftmax, theta, Dataset{}), DimensionError);
    CHECK_THROWS_AS(forward_loss(kSoftmax, ParamVector(3, 0.0), Dataset{{{1.0, 2.0}, 0}}),
                    DimensionError);
}

TEST_CASE("softmax probabilities sum to one") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const ModelSpec& spec = seed % 2 ? kMlp : kSoftmax;
        const ParamVector theta = random_params(spec, seed, 3.0);
        const Dataset batch = random_batch(spec, 1, seed + 100);
        const auto probs = predict_probs(spec, theta, batch[0].features);
        double sum = 0.0;
        for (double p : probs) {
            CHECK(p >= 0.0);
            sum += p;
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("gradient matches central finite differences") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        for (const ModelSpec& spec : {kSoftmax, kMlp}) {
            const ParamVector theta = random_params(spec, seed + 5);
            const Dataset batch = random_batch(spec, 6, seed + 55);
            const ParamVector g = gradient(spec, theta, batch);
            const ParamVector fd = finite_difference_gradient(spec, theta, batch);
            CHECK(max_relative_error(g, fd) < 1e-4);
        }
    }
}

TEST_CASE("zero-parameter bias gradients sum to zero across classes") {
    const ParamVector zero(param_count(kSoftmax), 0.0);
    const Dataset batch = random_batch(kSoftmax, 8, 3);
    const ParamVector g = gradient(kSoftmax, zero, batch);
    CHECK(g[4] + g[5] == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("gradient is a mean: duplicating the batch changes nothing") {
    const ParamVector theta = random_params(kMlp, 17);
    Dataset batch = random_batch(kMlp, 5, 18);
    Dataset doubled = batch;
    doubled.insert(doubled.end(), batch.begin(), batch.end());
    const ParamVector g1 = gradient(kMlp, theta, batch);
    const ParamVector g2 = gradient(kMlp, theta, doubled);
    for (std::size_t i = 0; i < g1.size(); ++i)
        CHECK(g1[i] == doctest::Approx(g2[i]).epsilon(1e-12));
}

TEST_CASE("local_train with zero learning rate is the identity") {
    const ParamVector theta = random_params(kSoftmax, 4);
    const Dataset data = random_batch(kSoftmax, 20, 5);
    TrainConfig cfg{3, 0.0, 4, 9};
    CHECK(local_train(kSoftmax, theta, data, cfg) == theta);
}

TEST_CASE("one full-batch epoch equals a single gradient step") {
    const ParamVector theta = random_params(kSoftmax, 6);
    const Dataset data = random_batch(kSoftmax, 10, 7);
    TrainConfig cfg{1, 0.3, 1000, 42};
    const ParamVector trained = local_train(kSoftmax, theta, data, cfg);
    const ParamVector g = gradient(kSoftmax, theta, data);
    for (std::size_t i = 0; i < theta.size(); ++i)
        CHECK(trained[i] == doctest::Approx(theta[i] - 0.3 * g[i]).epsilon(1e-12));
}

TEST_CASE("training a separable problem lowers the loss") {
    SyntheticSpec syn;
    syn.num_classes = 2;
    syn.input_dim = 2;
    syn.examples_per_class = 50;
    syn.class_separation = 6.0;
    syn.noise_sigma = 0.5;
    syn.seed = 11;
    const Dataset data = generate_synthetic(syn);
    const ModelSpec spec{ModelKind::softmax_regression, 2, 2, 0};
    const ParamVector theta0 = init_params(spec, 1);
    TrainConfig cfg{20, 0.1, 16, 2};
    const ParamVector theta = local_train(spec, theta0, data, cfg);
    CHECK(forward_loss(spec, theta, data) < forward_loss(spec, theta0, data));
}

TEST_CASE("local_train is deterministic and leaves theta0 untouched") {
    const ParamVector theta0 = random_params(kMlp, 9);
    const ParamVector copy = theta0;
    const Dataset data = random_batch(kMlp, 30, 10);
    TrainConfig cfg{5, 0.05, 8, 77};
    const ParamVector a = local_train(kMlp, theta0, data, cfg);
    const ParamVector b = local_train(kMlp, theta0, data, cfg);
    CHECK(a == b);
    CHECK(theta0 == copy);
    cfg.shuffle_seed = 78;
    CHECK(a != local_train(kMlp, theta0, data, cfg));
}

TEST_CASE("divergent training raises TrainingDivergenceError") {
    // step 1 pushes a weight to ~1e308; step 2 overflows the logits
    const ParamVector theta0(param_count(kSoftmax), 0.0);
    const Dataset data{{{2.0, 0.0}, 0}};
    TrainConfig cfg{5, 1e308, 1, 1};
    try {
        local_train(kSoftmax, theta0, data, cfg);
        FAIL("expected TrainingDivergenceError");
    } catch (const TrainingDivergenceError& e) {
        CHECK(e.epoch >= 0);
        CHECK(e.epoch < 5);
    }
}

TEST_CASE("evaluate breaks argmax ties toward the lowest class") {
    const ParamVector zero(param_count(kSoftmax), 0.0);
    Dataset data;
    for (int i = 0; i < 10; ++i) data.push_back({{0.5, -0.5}, i < 3 ? 0 : 1});
    const EvalResult r = evaluate(kSoftmax, zero, data);
    CHECK(r.accuracy == doctest::Approx(0.3));  // ties all predict class 0
}

TEST_CASE("evaluate is perfect on a perfectly fit problem") {
    ParamVector theta(param_count(kSoftmax), 0.0);
    theta[0] = 10.0;   // class 0 weight on feature 0
    theta[2] = -10.0;  // class 1 weight on feature 0
    Dataset data{{{1.0, 0.0}, 0}, {{-1.0, 0.0}, 1}, {{2.0, 1.0}, 0}};
    const EvalResult r = evaluate(kSoftmax, theta, data);
    CHECK(r.accuracy == 1.0);
    CHECK(r.loss >= 0.0);
}

TEST_CASE("near-random parameters score near chance on balanced 10-class data") {
    const ModelSpec spec{ModelKind::softmax_regression, 8, 10, 0};
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const ParamVector theta = init_params(spec, seed + 30);
        Dataset data;
        Rng rng(seed + 40);
        for (int i = 0; i < 1000; ++i) {
            LabeledExample ex;
            ex.features.resize(8);
            for (double& v : ex.features) v = rng.normal();
            ex.label = i % 10;
            data.push_back(std::move(ex));
        }
        const EvalResult r = evaluate(spec, theta, data);
        CHECK(r.accuracy >= 0.05);
        CHECK(r.accuracy <= 0.20);
    }
}
