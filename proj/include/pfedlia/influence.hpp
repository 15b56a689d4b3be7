#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "pfedlia/data.hpp"
#include "pfedlia/model.hpp"

namespace pfedlia {

// Hyperparameters for computing lazy influence scores. epochs_k is the small
// number of local epochs that produce a partial model (deliberately far from
// convergence; useful values are roughly 5-20).
struct LiaConfig {
    int epochs_k = 20;
    double learning_rate = 0.1;
    int batch_size = 32;
    double train_batch_fraction = 1.0;  // fraction of a client's train set used as its batch
    std::uint64_t seed = 0;

    friend bool operator==(const LiaConfig&, const LiaConfig&) = default;
};

// N x N lazy influence scores; entry (i, j) is the influence of client j's
// partial model on client i's validation set. Row i is computed exclusively
// against client i's validation data.
struct InfluenceMatrix {
    int n = 0;
    std::vector<double> scores;  // row-major

    double at(int i, int j) const { return scores[static_cast<std::size_t>(i) * n + j]; }
    double& at(int i, int j) { return scores[static_cast<std::size_t>(i) * n + j]; }
    std::vector<double> row(int i) const {
        return {scores.begin() + static_cast<std::size_t>(i) * n,
                scores.begin() + static_cast<std::size_t>(i + 1) * n};
    }
};

// The deterministic seeded subset of client j's train set used for its
// partial model (the first ceil(fraction * n) entries of a seeded shuffle).
Dataset lia_train_subset(const ClientShard& client, const LiaConfig& cfg);

// Client j's partial model: epochs_k epochs of SGD from theta0 on its batch.
ParamVector partial_model(const ModelSpec& spec, const ParamVector& theta0,
                          const ClientShard& client, const LiaConfig& cfg);

// Sum over the validation set of [loss under theta0 minus loss under theta_j];
// positive when the partial update lowered the evaluator's validation loss.
double lazy_influence(const ModelSpec& spec, const ParamVector& theta0,
                      const ParamVector& theta_j, const Dataset& validation);

// Builds the full matrix with exactly N partial trainings (one per client,
// reused for every evaluator). on_partial, when set, is invoked once per
// partial model with the client id.
InfluenceMatrix build_influence_matrix(const ModelSpec& spec, const ParamVector& theta0,
                                       const std::vector<ClientShard>& shards,
                                       const LiaConfig& cfg,
                                       const std::function<void(int)>& on_partial = {});

// Training-to-convergence setup for the exact retraining influence.
struct ExactTrainConfig {
    double learning_rate = 0.1;
    int batch_size = 32;
    std::uint64_t init_seed = 0;
    std::uint64_t shuffle_seed = 0;
    double convergence_epsilon = 1e-4;  // stop when |loss delta per epoch| < epsilon
    int max_epochs = 1000;
};

struct ConvergedModel {
    ParamVector theta;
    int epochs = 0;
    bool hit_epoch_cap = false;
};

ConvergedModel train_to_convergence(const ModelSpec& spec, const Dataset& data,
                                    const ExactTrainConfig& cfg);

// Exact retraining influence of `batch` on `base_train`: train one model on
// the base set and one on base + batch from the same initialization, both to
// the convergence threshold; return the validation-loss difference (positive
// when the batch helped). Test/benchmark oracle only.
struct ExactInfluenceResult {
    double influence = 0.0;
    int epochs_base = 0;
    int epochs_augmented = 0;
    bool base_hit_cap = false;
    bool augmented_hit_cap = false;
};

ExactInfluenceResult exact_influence(const ModelSpec& spec, const Dataset& base_train,
                                     const Dataset& batch, const Dataset& validation,
                                     const ExactTrainConfig& cfg);

// Wall-clock comparison of lazy influence vs exact retraining influence.
struct BenchScenario {
    ModelSpec spec;
    Dataset d0;
    Dataset batch;
    Dataset validation;
    LiaConfig lia;
    ExactTrainConfig exact;          // epsilon is replaced per threshold
    std::vector<double> thresholds;  // >= 2 entries
};

struct BenchRow {
    double threshold = 0.0;
    double lia_seconds = 0.0;
    double exact_seconds = 0.0;
    double ratio = 0.0;
    int exact_epochs = 0;
    bool hit_epoch_cap = false;
};

// One row per threshold, loosest first. The lazy influence is measured once
// (its cost does not depend on the threshold).
std::vector<BenchRow> speedup_benchmark(const BenchScenario& scenario);

}  // namespace pfedlia
