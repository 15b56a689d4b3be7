#include "pfedlia/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pfedlia/rng.hpp"

namespace pfedlia {
namespace {

struct Layout {
    std::size_t w1 = 0, b1 = 0, w2 = 0, b2 = 0;  // offsets
    std::size_t total = 0;
};

Layout layout_of(const ModelSpec& s) {
    Layout l;
    if (s.kind == ModelKind::softmax_regression) {
        const std::size_t d = s.input_dim, c = s.num_classes;
        l.w2 = 0;
        l.b2 = c * d;
        l.total = c * d + c;
    } else {
        const std::size_t d = s.input_dim, h = s.hidden_dim, c = s.num_classes;
        l.w1 = 0;
        l.b1 = h * d;
        l.w2 = h * d + h;
        l.b2 = l.w2 + c * h;
        l.total = l.b2 + c;
    }
    return l;
}

void check_example(const ModelSpec& spec, const LabeledExample& ex) {
    if (static_cast<int>(ex.features.size()) != spec.input_dim)
        throw DimensionError("feature vector has length " + std::to_string(ex.features.size()) +
                             ", expected " + std::to_string(spec.input_dim));
    if (ex.label < 0 || ex.label >= spec.num_classes)
        throw DimensionError("label " + std::to_string(ex.label) + " outside [0, " +
                             std::to_string(spec.num_classes) + ")");
}

void check_batch(const ModelSpec& spec, const ParamVector& theta, const Dataset& batch) {
    validate_spec(spec);
    if (theta.size() != param_count(spec))
        throw DimensionError("parameter vector has length " + std::to_string(theta.size()) +
                             ", expected " + std::to_string(param_count(spec)));
    if (batch.empty()) throw DimensionError("empty batch");
    for (const auto& ex : batch) check_example(spec, ex);
}

struct Scratch {
    std::vector<double> hidden;  // tanh activations (mlp)
    std::vector<double> logits;
    std::vector<double> probs;
    std::vector<double> delta1;  // hidden-layer error (mlp)

    explicit Scratch(const ModelSpec& s)
        : hidden(std::max(s.hidden_dim, 0)),
          logits(s.num_classes),
          probs(s.num_classes),
          delta1(std::max(s.hidden_dim, 0)) {}
};

void forward(const ModelSpec& spec, const ParamVector& theta, const std::vector<double>& x,
             Scratch& s) {
    const Layout l = layout_of(spec);
    const int d = spec.input_dim, c = spec.num_classes;
    if (spec.kind == ModelKind::softmax_regression) {
        for (int k = 0; k < c; ++k) {
            double z = theta[l.b2 + k];
            const double* w = &theta[l.w2 + static_cast<std::size_t>(k) * d];
            for (int j = 0; j < d; ++j) z += w[j] * x[j];
            s.logits[k] = z;
        }
    } else {
        const int h = spec.hidden_dim;
        for (int i = 0; i < h; ++i) {
            double z = theta[l.b1 + i];
            const double* w = &theta[l.w1 + static_cast<std::size_t>(i) * d];
            for (int j = 0; j < d; ++j) z += w[j] * x[j];
            s.hidden[i] = std::tanh(z);
        }
        for (int k = 0; k < c; ++k) {
            double z = theta[l.b2 + k];
            const double* w = &theta[l.w2 + static_cast<std::size_t>(k) * h];
            for (int i = 0; i < h; ++i) z += w[i] * s.hidden[i];
            s.logits[k] = z;
        }
    }
}

// log(sum exp(logits)) with the max subtracted for stability.
double logsumexp(const std::vector<double>& v) {
    const double m = *std::max_element(v.begin(), v.end());
    double sum = 0.0;
    for (double x : v) sum += std::exp(x - m);
    return m + std::log(sum);
}

void softmax_into(const std::vector<double>& logits, std::vector<double>& probs) {
    const double lse = logsumexp(logits);
    for (std::size_t k = 0; k < logits.size(); ++k) probs[k] = std::exp(logits[k] - lse);
}

// Adds the gradient of the mean loss over data[idx[0..count)] into grad.
void accumulate_gradient(const ModelSpec& spec, const ParamVector& theta, const Dataset& data,
                         const int* idx, int count, ParamVector& grad, Scratch& s) {
    const Layout l = layout_of(spec);
    const int d = spec.input_dim, c = spec.num_classes;
    const double inv = 1.0 / count;
    for (int n = 0; n < count; ++n) {
        const LabeledExample& ex = data[idx[n]];
        forward(spec, theta, ex.features, s);
        softmax_into(s.logits, s.probs);
        if (spec.kind == ModelKind::softmax_regression) {
            for (int k = 0; k < c; ++k) {
                const double dz = (s.probs[k] - (k == ex.label ? 1.0 : 0.0)) * inv;
                double* gw = &grad[l.w2 + static_cast<std::size_t>(k) * d];
                for (int j = 0; j < d; ++j) gw[j] += dz * ex.features[j];
                grad[l.b2 + k] += dz;
            }
        } else {
            const int h = spec.hidden_dim;
            std::fill(s.delta1.begin(), s.delta1.end(), 0.0);
            for (int k = 0; k < c; ++k) {
                const double dz = (s.probs[k] - (k == ex.label ? 1.0 : 0.0)) * inv;
                double* gw = &grad[l.w2 + static_cast<std::size_t>(k) * h];
                const double* w = &theta[l.w2 + static_cast<std::size_t>(k) * h];
                for (int i = 0; i < h; ++i) {
                    gw[i] += dz * s.hidden[i];
                    s.delta1[i] += dz * w[i];
                }
                grad[l.b2 + k] += dz;
            }
            for (int i = 0; i < h; ++i) {
                const double dz = s.delta1[i] * (1.0 - s.hidden[i] * s.hidden[i]);
                double* gw = &grad[l.w1 + static_cast<std::size_t>(i) * d];
                for (int j = 0; j < d; ++j) gw[j] += dz * ex.features[j];
                grad[l.b1 + i] += dz;
            }
        }
    }
}

bool all_finite(const ParamVector& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

}  // namespace

void validate_spec(const ModelSpec& spec) {
    if (spec.input_dim < 1) throw ConfigError("model input_dim must be >= 1");
    if (spec.num_classes < 2) throw ConfigError("model num_classes must be >= 2");
    if (spec.kind == ModelKind::mlp && spec.hidden_dim < 1)
        throw ConfigError("mlp hidden_dim must be >= 1");
}

std::size_t param_count(const ModelSpec& spec) {
    validate_spec(spec);
    return layout_of(spec).total;
}

ParamVector init_params(const ModelSpec& spec, std::uint64_t seed) {
    const Layout l = layout_of(spec);
    ParamVector theta(param_count(spec), 0.0);
    Rng rng(seed);
    if (spec.kind == ModelKind::softmax_regression) {
        const std::size_t nw = static_cast<std::size_t>(spec.num_classes) * spec.input_dim;
        for (std::size_t i = 0; i < nw; ++i) theta[l.w2 + i] = rng.uniform(-0.05, 0.05);
    } else {
        const std::size_t nw1 = static_cast<std::size_t>(spec.hidden_dim) * spec.input_dim;
        const std::size_t nw2 = static_cast<std::size_t>(spec.num_classes) * spec.hidden_dim;
        for (std::size_t i = 0; i < nw1; ++i) theta[l.w1 + i] = rng.uniform(-0.05, 0.05);
        for (std::size_t i = 0; i < nw2; ++i) theta[l.w2 + i] = rng.uniform(-0.05, 0.05);
    }
    return theta;
}

std::vector<double> predict_probs(const ModelSpec& spec, const ParamVector& theta,
                                  const std::vector<double>& features) {
    check_batch(spec, theta, Dataset{LabeledExample{features, 0}});
    Scratch s(spec);
    forward(spec, theta, features, s);
    softmax_into(s.logits, s.probs);
    return s.probs;
}

int predict_class(const ModelSpec& spec, const ParamVector& theta,
                  const std::vector<double>& features) {
    Scratch s(spec);
    forward(spec, theta, features, s);
    int best = 0;
    for (int k = 1; k < spec.num_classes; ++k)
        if (s.logits[k] > s.logits[best]) best = k;  // strict: ties keep the lowest index
    return best;
}

double forward_loss(const ModelSpec& spec, const ParamVector& theta, const Dataset& batch) {
    check_batch(spec, theta, batch);
    Scratch s(spec);
    double sum = 0.0;
    for (const auto& ex : batch) {
        forward(spec, theta, ex.features, s);
        sum += logsumexp(s.logits) - s.logits[ex.label];
    }
    return sum / batch.size();
}

ParamVector gradient(const ModelSpec& spec, const ParamVector& theta, const Dataset& batch) {
    check_batch(spec, theta, batch);
    std::vector<int> idx(batch.size());
    std::iota(idx.begin(), idx.end(), 0);
    ParamVector grad(theta.size(), 0.0);
    Scratch s(spec);
    accumulate_gradient(spec, theta, batch, idx.data(), static_cast<int>(idx.size()), grad, s);
    return grad;
}

ParamVector local_train(const ModelSpec& spec, const ParamVector& theta0, const Dataset& data,
                        const TrainConfig& cfg) {
    check_batch(spec, theta0, data);
    if (cfg.epochs < 1) throw ConfigError("epochs must be >= 1");
    if (cfg.batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (cfg.learning_rate < 0.0) throw ConfigError("learning_rate must be >= 0");

    const int n = static_cast<int>(data.size());
    const int bs = std::min(cfg.batch_size, n);
    ParamVector theta = theta0;
    ParamVector grad(theta.size());
    Scratch s(spec);
    Rng rng(cfg.shuffle_seed);
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(idx);
        for (int start = 0; start < n; start += bs) {
            const int count = std::min(bs, n - start);
            std::fill(grad.begin(), grad.end(), 0.0);
            accumulate_gradient(spec, theta, data, idx.data() + start, count, grad, s);
            for (std::size_t i = 0; i < theta.size(); ++i)
                theta[i] -= cfg.learning_rate * grad[i];
        }
        if (!all_finite(theta))
            throw TrainingDivergenceError(
                "training diverged (non-finite parameters) at epoch " + std::to_string(epoch),
                epoch);
    }
    return theta;
}

EvalResult evaluate(const ModelSpec& spec, const ParamVector& theta, const Dataset& data) {
    check_batch(spec, theta, data);
    Scratch s(spec);
    double loss_sum = 0.0;
    int correct = 0;
    for (const auto& ex : data) {
        forward(spec, theta, ex.features, s);
        loss_sum += logsumexp(s.logits) - s.logits[ex.label];
        int best = 0;
        for (int k = 1; k < spec.num_classes; ++k)
            if (s.logits[k] > s.logits[best]) best = k;
        if (best == ex.label) ++correct;
    }
    return {loss_sum / data.size(), static_cast<double>(correct) / data.size()};
}

}  // namespace pfedlia
