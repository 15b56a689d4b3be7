#include "pfedlia/influence.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "pfedlia/rng.hpp"

namespace pfedlia {
namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

Dataset lia_train_subset(const ClientShard& client, const LiaConfig& cfg) {
    if (client.train.empty())
        throw ConfigError("client " + std::to_string(client.client_id) + " has no training data");
    if (!(cfg.train_batch_fraction > 0.0) || cfg.train_batch_fraction > 1.0)
        throw ConfigError("train_batch_fraction must be in (0, 1]");
    const int n = static_cast<int>(client.train.size());
    const int m = std::clamp(static_cast<int>(std::ceil(cfg.train_batch_fraction * n)), 1, n);
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    Rng(mix_seed(cfg.seed, seed_tag::lia_subset, client.client_id)).shuffle(idx);
    Dataset subset;
    subset.reserve(m);
    for (int i = 0; i < m; ++i) subset.push_back(client.train[idx[i]]);
    return subset;
}

ParamVector partial_model(const ModelSpec& spec, const ParamVector& theta0,
                          const ClientShard& client, const LiaConfig& cfg) {
    if (cfg.epochs_k < 1) throw ConfigError("epochs_k must be >= 1");
    const Dataset subset = lia_train_subset(client, cfg);
    TrainConfig tc;
    tc.epochs = cfg.epochs_k;
    tc.learning_rate = cfg.learning_rate;
    tc.batch_size = cfg.batch_size;
    tc.shuffle_seed = mix_seed(cfg.seed, seed_tag::lia_shuffle, client.client_id);
    return local_train(spec, theta0, subset, tc);
}

double lazy_influence(const ModelSpec& spec, const ParamVector& theta0,
                      const ParamVector& theta_j, const Dataset& validation) {
    // |V| * (mean loss delta) equals the per-example sum of loss deltas.
    const double base = forward_loss(spec, theta0, validation);
    const double after = forward_loss(spec, theta_j, validation);
    return static_cast<double>(validation.size()) * (base - after);
}

InfluenceMatrix build_influence_matrix(const ModelSpec& spec, const ParamVector& theta0,
                                       const std::vector<ClientShard>& shards,
                                       const LiaConfig& cfg,
                                       const std::function<void(int)>& on_partial) {
    const int n = static_cast<int>(shards.size());
    if (n < 2) throw ConfigError("influence matrix needs >= 2 clients");

    std::vector<ParamVector> partials(n);
    for (int j = 0; j < n; ++j) {
        partials[j] = partial_model(spec, theta0, shards[j], cfg);
        if (on_partial) on_partial(shards[j].client_id);
    }

    InfluenceMatrix m;
    m.n = n;
    m.scores.resize(static_cast<std::size_t>(n) * n);
    for (int i = 0; i < n; ++i) {
        const Dataset& val = shards[i].validation;
        const double base = forward_loss(spec, theta0, val);
        const double nv = static_cast<double>(val.size());
        for (int j = 0; j < n; ++j)
            m.at(i, j) = nv * (base - forward_loss(spec, partials[j], val));
    }
    return m;
}

ConvergedModel train_to_convergence(const ModelSpec& spec, const Dataset& data,
                                    const ExactTrainConfig& cfg) {
    if (data.empty()) throw ConfigError("cannot train on an empty dataset");
    if (cfg.max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
    if (!(cfg.convergence_epsilon > 0.0)) throw ConfigError("convergence_epsilon must be > 0");

    ParamVector theta = init_params(spec, cfg.init_seed);
    double prev = forward_loss(spec, theta, data);
    TrainConfig tc;
    tc.epochs = 1;
    tc.learning_rate = cfg.learning_rate;
    tc.batch_size = cfg.batch_size;
    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        tc.shuffle_seed = mix_seed(cfg.shuffle_seed, epoch);
        theta = local_train(spec, theta, data, tc);
        const double cur = forward_loss(spec, theta, data);
        if (std::abs(prev - cur) < cfg.convergence_epsilon) return {std::move(theta), epoch, false};
        prev = cur;
    }
    return {std::move(theta), cfg.max_epochs, true};
}

ExactInfluenceResult exact_influence(const ModelSpec& spec, const Dataset& base_train,
                                     const Dataset& batch, const Dataset& validation,
                                     const ExactTrainConfig& cfg) {
    const ConvergedModel base = train_to_convergence(spec, base_train, cfg);
    Dataset augmented = base_train;
    augmented.insert(augmented.end(), batch.begin(), batch.end());
    const ConvergedModel with = train_to_convergence(spec, augmented, cfg);

    ExactInfluenceResult r;
    r.influence = forward_loss(spec, base.theta, validation) -
                  forward_loss(spec, with.theta, validation);
    r.epochs_base = base.epochs;
    r.epochs_augmented = with.epochs;
    r.base_hit_cap = base.hit_epoch_cap;
    r.augmented_hit_cap = with.hit_epoch_cap;
    return r;
}

std::vector<BenchRow> speedup_benchmark(const BenchScenario& scenario) {
    if (scenario.thresholds.size() < 2)
        throw ConfigError("speedup benchmark needs >= 2 convergence thresholds");
    for (double t : scenario.thresholds)
        if (!(t > 0.0)) throw ConfigError("convergence thresholds must be > 0");

    std::vector<double> thresholds = scenario.thresholds;
    std::sort(thresholds.begin(), thresholds.end(), std::greater<>());  // loosest first

    // The base model is shared by every threshold and by the lazy influence;
    // its training time is not measured (mirrors measuring only the augmented
    // model's training and evaluation).
    ExactTrainConfig base_cfg = scenario.exact;
    base_cfg.convergence_epsilon = thresholds.back();
    const ConvergedModel m0 = train_to_convergence(scenario.spec, scenario.d0, base_cfg);

    ClientShard pseudo;
    pseudo.client_id = 0;
    pseudo.train = scenario.batch;

    const auto lia_start = std::chrono::steady_clock::now();
    const ParamVector tilde = partial_model(scenario.spec, m0.theta, pseudo, scenario.lia);
    volatile double lia_score =
        lazy_influence(scenario.spec, m0.theta, tilde, scenario.validation);
    (void)lia_score;
    const double lia_seconds = seconds_since(lia_start);

    Dataset d1 = scenario.d0;
    d1.insert(d1.end(), scenario.batch.begin(), scenario.batch.end());
    const double val_base = forward_loss(scenario.spec, m0.theta, scenario.validation);

    std::vector<BenchRow> rows;
    for (double threshold : thresholds) {
        ExactTrainConfig cfg_t = scenario.exact;
        cfg_t.convergence_epsilon = threshold;
        const auto t0 = std::chrono::steady_clock::now();
        const ConvergedModel m1 = train_to_convergence(scenario.spec, d1, cfg_t);
        volatile double exact_score =
            val_base - forward_loss(scenario.spec, m1.theta, scenario.validation);
        (void)exact_score;
        const double exact_seconds = seconds_since(t0);

        BenchRow row;
        row.threshold = threshold;
        row.lia_seconds = lia_seconds;
        // Guard against degenerate scenarios (e.g. zero learning rates): the
        // ratio is never a division by zero.
        row.exact_seconds = exact_seconds;
        row.ratio = exact_seconds / std::max(lia_seconds, 1e-9);
        row.exact_epochs = m1.epochs;
        row.hit_epoch_cap = m1.hit_epoch_cap;
        rows.push_back(row);
    }
    return rows;
}

}  // namespace pfedlia
