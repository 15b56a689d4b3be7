#include "pfedlia/orchestrator.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "pfedlia/rng.hpp"

namespace pfedlia {
namespace {

struct Group {
    std::vector<int> members;  // ascending client ids
    ParamVector model;
};

std::vector<int> all_clients(int n) {
    std::vector<int> v(n);
    std::iota(v.begin(), v.end(), 0);
    return v;
}

// One communication round: per group, sample participants, run local SGD from
// the group model, and aggregate weighted by train-set size. Group ids feed
// the sampling seed, so two methods with identical group structure draw
// identical participants.
void train_round(const ExperimentConfig& cfg, const std::vector<ClientShard>& shards,
                 std::vector<Group>& groups, int round, std::uint64_t exp_seed) {
    for (std::size_t g = 0; g < groups.size(); ++g) {
        Group& group = groups[g];
        const std::vector<int> participants = sample_clients(
            group.members, cfg.participation_fraction, mix_seed(exp_seed, seed_tag::sample, round, g));
        std::vector<ParamVector> models;
        std::vector<double> weights;
        models.reserve(participants.size());
        weights.reserve(participants.size());
        for (int p : participants) {
            TrainConfig tc;
            tc.epochs = cfg.local_epochs_per_round;
            tc.learning_rate = cfg.learning_rate;
            tc.batch_size = cfg.batch_size;
            tc.shuffle_seed = mix_seed(exp_seed, seed_tag::local_train, round, p);
            models.push_back(local_train(cfg.model, group.model, shards[p].train, tc));
            weights.push_back(static_cast<double>(shards[p].train.size()));
        }
        group.model = fedavg_aggregate(models, weights);
    }
}

RoundLog log_round(const ExperimentConfig& cfg, const std::vector<ClientShard>& shards,
                   const std::vector<Group>& groups, const std::vector<ClientState>& clients,
                   int round, Phase phase) {
    RoundLog log;
    log.round = round;
    log.phase = phase;
    log.per_client_accuracy.resize(shards.size());
    for (std::size_t i = 0; i < shards.size(); ++i) {
        const Group& g = groups[clients[i].model_ref];
        log.per_client_accuracy[i] =
            evaluate(cfg.model, g.model, shards[i].validation).accuracy;
    }
    const int n = static_cast<int>(log.per_client_accuracy.size());
    double mean = 0.0;
    for (double a : log.per_client_accuracy) mean += a;
    mean /= n;
    double var = 0.0;
    if (n > 1) {
        for (double a : log.per_client_accuracy) var += (a - mean) * (a - mean);
        var /= (n - 1);
    }
    log.mean_accuracy = mean;
    log.std_accuracy = std::sqrt(var);
    for (const Group& g : groups) log.per_cluster_sizes.push_back(static_cast<int>(g.members.size()));
    return log;
}

std::vector<ClientState> deploy_by_membership(const std::vector<Group>& groups, int n_clients) {
    std::vector<ClientState> clients(n_clients);
    for (int i = 0; i < n_clients; ++i) clients[i].client_id = i;
    for (std::size_t g = 0; g < groups.size(); ++g)
        for (int m : groups[g].members) clients[m].model_ref = static_cast<int>(g);
    return clients;
}

std::vector<Group> groups_from_assignment(const ClusterAssignment& assignment,
                                          const ParamVector& theta) {
    std::vector<Group> groups(assignment.num_clusters);
    for (Group& g : groups) g.model = theta;
    for (std::size_t i = 0; i < assignment.labels.size(); ++i)
        groups[assignment.labels[i]].members.push_back(static_cast<int>(i));
    return groups;
}

// Noise clients become singleton clusters with fresh contiguous ids.
ClusterAssignment resolve_noise(const ClusterAssignment& raw) {
    ClusterAssignment out = raw;
    for (int& label : out.labels)
        if (label == ClusterAssignment::kNoise) label = out.num_clusters++;
    return out;
}

// When every beneficial set is exactly the set of clients that chose it, the
// sets form a partition and the run collapses to per-cluster training.
std::optional<ClusterAssignment> consistent_blocks(
    const std::vector<std::vector<int>>& beneficial) {
    std::map<std::vector<int>, std::vector<int>> by_set;
    for (std::size_t i = 0; i < beneficial.size(); ++i)
        by_set[beneficial[i]].push_back(static_cast<int>(i));
    for (const auto& [set, holders] : by_set)
        if (set != holders) return std::nullopt;
    ClusterAssignment assignment;
    assignment.labels.assign(beneficial.size(), 0);
    for (const auto& [set, holders] : by_set) {
        for (int i : holders) assignment.labels[i] = assignment.num_clusters;
        ++assignment.num_clusters;
    }
    return assignment;
}

Phase schedule_phase(const ExperimentConfig& cfg, int round) {
    if (round <= cfg.warmup_rounds) return Phase::warmup;
    if (round == cfg.warmup_rounds + 1) return Phase::clustering;
    return Phase::clustered;
}

}  // namespace

std::string method_name(Method m) {
    switch (m) {
        case Method::fedavg: return "fedavg";
        case Method::local_only: return "local_only";
        case Method::oracle: return "oracle";
        case Method::pfedlia_central: return "pfedlia_central";
        case Method::pfedlia_p2p: return "pfedlia_p2p";
    }
    return "?";
}

Method method_from_name(const std::string& name) {
    if (name == "fedavg") return Method::fedavg;
    if (name == "local_only") return Method::local_only;
    if (name == "oracle") return Method::oracle;
    if (name == "pfedlia_central") return Method::pfedlia_central;
    if (name == "pfedlia_p2p") return Method::pfedlia_p2p;
    throw ConfigError("unknown method \"" + name + "\"");
}

std::string phase_name(Phase p) {
    switch (p) {
        case Phase::warmup: return "warmup";
        case Phase::clustering: return "clustering";
        case Phase::clustered: return "clustered";
    }
    return "?";
}

ParamVector fedavg_aggregate(const std::vector<ParamVector>& models,
                             const std::vector<double>& weights) {
    if (models.empty()) throw ConfigError("fedavg_aggregate: no models");
    if (models.size() != weights.size())
        throw ConfigError("fedavg_aggregate: models/weights length mismatch");
    const std::size_t len = models[0].size();
    double total = 0.0;
    for (double w : weights) {
        if (w < 0.0) throw ConfigError("fedavg_aggregate: negative weight");
        total += w;
    }
    if (total == 0.0) throw ConfigError("fedavg_aggregate: all weights are zero");
    ParamVector out(len, 0.0);
    for (std::size_t i = 0; i < models.size(); ++i) {
        if (models[i].size() != len)
            throw DimensionError("fedavg_aggregate: models of differing length");
        for (std::size_t k = 0; k < len; ++k) out[k] += weights[i] * models[i][k];
    }
    for (double& v : out) v /= total;
    return out;
}

std::vector<int> sample_clients(const std::vector<int>& pool, double fraction,
                                std::uint64_t round_seed) {
    if (pool.empty()) throw ConfigError("sample_clients: empty pool");
    if (!(fraction > 0.0) || fraction > 1.0)
        throw ConfigError("participation fraction must be in (0, 1]");
    const int n = static_cast<int>(pool.size());
    const int k = std::min(n, static_cast<int>(std::ceil(fraction * n)));
    std::vector<int> pick = pool;
    Rng rng(round_seed);
    for (int i = 0; i < k; ++i) {
        const std::size_t j = i + rng.next_index(pick.size() - i);
        std::swap(pick[i], pick[j]);
    }
    pick.resize(k);
    std::sort(pick.begin(), pick.end());
    return pick;
}

void validate_config(const ExperimentConfig& cfg) {
    validate_spec(cfg.model);
    if (cfg.num_clients < 1) throw ConfigError("num_clients must be >= 1");
    if (!(cfg.participation_fraction > 0.0) || cfg.participation_fraction > 1.0)
        throw ConfigError("participation_fraction must be in (0, 1]");
    if (cfg.participation_fraction * cfg.num_clients < 1.0)
        throw ConfigError("participation_fraction * num_clients must be >= 1");
    if (cfg.total_rounds < 1) throw ConfigError("total_rounds must be >= 1");
    if (cfg.warmup_rounds < 0) throw ConfigError("warmup_rounds must be >= 0");
    if ((cfg.method == Method::pfedlia_central || cfg.method == Method::pfedlia_p2p) &&
        cfg.warmup_rounds >= cfg.total_rounds)
        throw ConfigError("warmup_rounds must be < total_rounds for pfedlia methods");
    if (cfg.local_epochs_per_round < 1) throw ConfigError("local_epochs_per_round must be >= 1");
    if (!(cfg.learning_rate > 0.0)) throw ConfigError("train.learning_rate must be > 0");
    if (cfg.batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
    if (cfg.lia.epochs_k < 1) throw ConfigError("lia.epochs_k must be >= 1");
    if (!(cfg.lia.learning_rate > 0.0)) throw ConfigError("lia.learning_rate must be > 0");
    if (cfg.lia.batch_size < 1) throw ConfigError("lia.batch_size must be >= 1");
    if (!(cfg.lia.train_batch_fraction > 0.0) || cfg.lia.train_batch_fraction > 1.0)
        throw ConfigError("lia.train_batch_fraction must be in (0, 1]");
    if (cfg.optics.min_pts < 2) throw ConfigError("optics.min_pts must be >= 2");
    if (!(cfg.optics.max_eps > 0.0)) throw ConfigError("optics.max_eps must be > 0");
    if (cfg.optics.extraction_eps && !(*cfg.optics.extraction_eps > 0.0))
        throw ConfigError("optics.extraction_eps must be > 0");
    if (cfg.partition.num_clusters < 1) throw ConfigError("partition.num_clusters must be >= 1");
    if (cfg.partition.scheme == PartitionScheme::noisy) {
        if (cfg.partition.noisy_extra_labels < 1)
            throw ConfigError("partition.noisy_extra_labels must be >= 1");
        if (cfg.partition.noisy_probability < 0.0 || cfg.partition.noisy_probability > 1.0)
            throw ConfigError("partition.noisy_probability must be in [0, 1]");
        if (cfg.partition.num_clusters < 2)
            throw ConfigError("noisy scheme needs >= 2 clusters");
    }
    if (cfg.seeds.empty()) throw ConfigError("seeds must not be empty");
    if (cfg.data.source == DataConfig::Source::synthetic) {
        if (cfg.data.synthetic.input_dim != cfg.model.input_dim)
            throw ConfigError("data.synthetic.input_dim must equal model.input_dim");
        if (cfg.data.synthetic.num_classes != cfg.model.num_classes)
            throw ConfigError("data.synthetic.num_classes must equal model.num_classes");
    } else {
        if (cfg.data.idx_images.empty() || cfg.data.idx_labels.empty())
            throw ConfigError("data.idx requires both images and labels paths");
    }
    if (cfg.bench.present) {
        if (cfg.bench.thresholds.size() < 2)
            throw ConfigError("bench.thresholds needs >= 2 entries");
        for (double t : cfg.bench.thresholds)
            if (!(t > 0.0)) throw ConfigError("bench.thresholds must be > 0");
        if (cfg.bench.d0_size < 1 || cfg.bench.batch_count < 1 || cfg.bench.validation_size < 1)
            throw ConfigError("bench sizes must be >= 1");
        if (!(cfg.bench.exact_learning_rate > 0.0))
            throw ConfigError("bench.exact.learning_rate must be > 0");
        if (cfg.bench.exact_batch_size < 1) throw ConfigError("bench.exact.batch_size must be >= 1");
        if (cfg.bench.exact_max_epochs < 1) throw ConfigError("bench.exact.max_epochs must be >= 1");
    }
}

PartitionResult build_client_data(const ExperimentConfig& cfg, std::uint64_t exp_seed) {
    Dataset data;
    if (cfg.data.source == DataConfig::Source::synthetic) {
        SyntheticSpec s = cfg.data.synthetic;
        s.seed = mix_seed(s.seed, exp_seed, seed_tag::data);
        data = generate_synthetic(s);
    } else {
        data = load_idx(cfg.data.idx_images, cfg.data.idx_labels);
        for (const auto& ex : data) {
            if (static_cast<int>(ex.features.size()) != cfg.model.input_dim)
                throw ConfigError("IDX feature dimension " + std::to_string(ex.features.size()) +
                                  " does not match model.input_dim");
            if (ex.label >= cfg.model.num_classes)
                throw ConfigError("IDX label " + std::to_string(ex.label) +
                                  " outside model.num_classes");
        }
    }
    PartitionSpec p = cfg.partition;
    p.num_clients = cfg.num_clients;
    p.seed = mix_seed(p.seed, exp_seed, seed_tag::partition);
    return partition(data, p);
}

ParamVector run_warmup(const ExperimentConfig& cfg, const std::vector<ClientShard>& shards,
                       std::uint64_t exp_seed) {
    std::vector<Group> groups(1);
    groups[0].members = all_clients(static_cast<int>(shards.size()));
    groups[0].model = init_params(cfg.model, mix_seed(exp_seed, seed_tag::init));
    for (int round = 1; round <= cfg.warmup_rounds; ++round)
        train_round(cfg, shards, groups, round, exp_seed);
    return groups[0].model;
}

ClusteringOutcome clustering_phase(const ExperimentConfig& cfg, const ParamVector& theta0,
                                   const std::vector<ClientShard>& shards,
                                   std::uint64_t exp_seed) {
    LiaConfig lia = cfg.lia;
    lia.seed = mix_seed(lia.seed, exp_seed, seed_tag::lia_subset);

    ClusteringOutcome out;
    out.matrix = build_influence_matrix(cfg.model, theta0, shards, lia);
    out.optics = cluster_centralized_detailed(out.matrix, cfg.optics);
    out.resolved = resolve_noise(out.optics.assignment);
    if (cfg.method == Method::pfedlia_p2p) {
        out.peer.resize(out.matrix.n);
        out.beneficial.resize(out.matrix.n);
        for (int i = 0; i < out.matrix.n; ++i) {
            const std::vector<double> row = out.matrix.row(i);
            out.peer[i] = kmeans_two(row, mix_seed(exp_seed, seed_tag::kmeans, i));
            out.beneficial[i] = cluster_peer(row, i, mix_seed(exp_seed, seed_tag::kmeans, i));
        }
    }
    return out;
}

std::vector<RoundLog> run_experiment(const ExperimentConfig& cfg, std::uint64_t exp_seed,
                                     RunArtifacts* artifacts) {
    validate_config(cfg);
    const PartitionResult part = build_client_data(cfg, exp_seed);
    const std::vector<ClientShard>& shards = part.shards;
    const int n = static_cast<int>(shards.size());
    const ParamVector theta_init = init_params(cfg.model, mix_seed(exp_seed, seed_tag::init));

    std::vector<RoundLog> logs;
    logs.reserve(cfg.total_rounds);

    auto run_rounds = [&](std::vector<Group>& groups, const std::vector<ClientState>& clients,
                          int first, int last, auto phase_of) {
        for (int round = first; round <= last; ++round) {
            train_round(cfg, shards, groups, round, exp_seed);
            logs.push_back(log_round(cfg, shards, groups, clients, round, phase_of(round)));
        }
    };

    switch (cfg.method) {
        case Method::fedavg: {
            std::vector<Group> groups(1);
            groups[0].members = all_clients(n);
            groups[0].model = theta_init;
            const auto clients = deploy_by_membership(groups, n);
            run_rounds(groups, clients, 1, cfg.total_rounds, [](int) { return Phase::warmup; });
            break;
        }
        case Method::local_only: {
            std::vector<Group> groups(n);
            for (int i = 0; i < n; ++i) {
                groups[i].members = {i};
                groups[i].model = theta_init;
            }
            const auto clients = deploy_by_membership(groups, n);
            run_rounds(groups, clients, 1, cfg.total_rounds, [](int) { return Phase::clustered; });
            break;
        }
        case Method::oracle: {
            std::vector<Group> global(1);
            global[0].members = all_clients(n);
            global[0].model = theta_init;
            const auto gclients = deploy_by_membership(global, n);
            run_rounds(global, gclients, 1, std::min(cfg.warmup_rounds, cfg.total_rounds),
                       [](int) { return Phase::warmup; });
            if (cfg.warmup_rounds >= cfg.total_rounds) break;

            ClusterAssignment truth;
            truth.labels.resize(n);
            for (int i = 0; i < n; ++i) {
                truth.labels[i] = shards[i].true_cluster;
                truth.num_clusters = std::max(truth.num_clusters, shards[i].true_cluster + 1);
            }
            std::vector<Group> groups = groups_from_assignment(truth, global[0].model);
            const auto clients = deploy_by_membership(groups, n);
            run_rounds(groups, clients, cfg.warmup_rounds + 1, cfg.total_rounds,
                       [](int) { return Phase::clustered; });
            break;
        }
        case Method::pfedlia_central:
        case Method::pfedlia_p2p: {
            std::vector<Group> global(1);
            global[0].members = all_clients(n);
            global[0].model = theta_init;
            const auto gclients = deploy_by_membership(global, n);
            run_rounds(global, gclients, 1, cfg.warmup_rounds, [](int) { return Phase::warmup; });

            // the one-shot clustering round: every client participates once
            ClusteringOutcome outcome = clustering_phase(cfg, global[0].model, shards, exp_seed);
            if (artifacts) ++artifacts->influence_matrices_built;

            bool personal = false;
            ClusterAssignment assignment;
            if (cfg.method == Method::pfedlia_central) {
                assignment = outcome.resolved;
            } else {
                const auto blocks = consistent_blocks(outcome.beneficial);
                if (blocks) {
                    assignment = *blocks;
                } else {
                    personal = true;
                }
            }

            if (!personal) {
                std::vector<Group> groups = groups_from_assignment(assignment, global[0].model);
                const auto clients = deploy_by_membership(groups, n);
                run_rounds(groups, clients, cfg.warmup_rounds + 1, cfg.total_rounds,
                           [&](int round) { return schedule_phase(cfg, round); });
            } else {
                // Inconsistent beneficial sets: every client keeps a personal
                // model and aggregates updates computed by sampled beneficial
                // peers starting from that model.
                std::vector<Group> groups(n);
                std::vector<ClientState> clients(n);
                for (int i = 0; i < n; ++i) {
                    groups[i].members = outcome.beneficial[i];
                    groups[i].model = global[0].model;
                    clients[i] = {i, i};
                }
                run_rounds(groups, clients, cfg.warmup_rounds + 1, cfg.total_rounds,
                           [&](int round) { return schedule_phase(cfg, round); });
            }
            if (artifacts) artifacts->clustering = std::move(outcome);
            break;
        }
    }
    return logs;
}

}  // namespace pfedlia
