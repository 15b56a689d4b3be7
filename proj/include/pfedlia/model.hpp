#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pfedlia/errors.hpp"

namespace pfedlia {

enum class ModelKind { softmax_regression, mlp };

// Small differentiable classifiers: multinomial logistic regression and a
// one-hidden-layer tanh MLP. Parameters live in a flat vector:
//   softmax-regression: [W (C x D) row-major][b (C)]
//   mlp:                [W1 (H x D)][b1 (H)][W2 (C x H)][b2 (C)]
struct ModelSpec {
    ModelKind kind = ModelKind::softmax_regression;
    int input_dim = 1;
    int num_classes = 2;
    int hidden_dim = 0;  // mlp only

    friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

using ParamVector = std::vector<double>;

struct LabeledExample {
    std::vector<double> features;
    int label = 0;

    friend bool operator==(const LabeledExample&, const LabeledExample&) = default;
};

using Dataset = std::vector<LabeledExample>;

struct TrainConfig {
    int epochs = 1;
    double learning_rate = 0.1;
    int batch_size = 32;  // clamped to the dataset size
    std::uint64_t shuffle_seed = 0;
};

struct EvalResult {
    double loss = 0.0;
    double accuracy = 0.0;
};

void validate_spec(const ModelSpec& spec);
std::size_t param_count(const ModelSpec& spec);

// Weights uniform in [-0.05, 0.05], biases zero; deterministic in (spec, seed).
ParamVector init_params(const ModelSpec& spec, std::uint64_t seed);

// Softmax class probabilities for a single input.
std::vector<double> predict_probs(const ModelSpec& spec, const ParamVector& theta,
                                  const std::vector<double>& features);

// Argmax prediction, ties broken toward the lowest class index.
int predict_class(const ModelSpec& spec, const ParamVector& theta,
                  const std::vector<double>& features);

// Mean cross-entropy over the batch.
double forward_loss(const ModelSpec& spec, const ParamVector& theta, const Dataset& batch);

// Analytic gradient of the mean cross-entropy, same length as theta.
ParamVector gradient(const ModelSpec& spec, const ParamVector& theta, const Dataset& batch);

// Mini-batch SGD for cfg.epochs epochs from theta0 (theta0 untouched).
// Deterministic given cfg.shuffle_seed. Throws TrainingDivergenceError if the
// parameters stop being finite.
ParamVector local_train(const ModelSpec& spec, const ParamVector& theta0, const Dataset& data,
                        const TrainConfig& cfg);

// Mean loss and argmax accuracy over `data`.
EvalResult evaluate(const ModelSpec& spec, const ParamVector& theta, const Dataset& data);

}  // namespace pfedlia
