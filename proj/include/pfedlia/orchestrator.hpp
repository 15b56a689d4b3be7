#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pfedlia/clustering.hpp"
#include "pfedlia/data.hpp"
#include "pfedlia/influence.hpp"
#include "pfedlia/model.hpp"

namespace pfedlia {

enum class Method { fedavg, local_only, oracle, pfedlia_central, pfedlia_p2p };
enum class Phase { warmup, clustering, clustered };

std::string method_name(Method m);
Method method_from_name(const std::string& name);
std::string phase_name(Phase p);

struct DataConfig {
    enum class Source { synthetic, idx };
    Source source = Source::synthetic;
    SyntheticSpec synthetic;
    std::string idx_images;
    std::string idx_labels;

    friend bool operator==(const DataConfig&, const DataConfig&) = default;
};

struct BenchConfig {
    bool present = false;
    int d0_size = 990;
    int batch_count = 10;
    int validation_size = 100;
    std::vector<double> thresholds{1e-2, 1e-3, 1e-4};
    double exact_learning_rate = 0.1;
    int exact_batch_size = 32;
    int exact_max_epochs = 5000;

    friend bool operator==(const BenchConfig&, const BenchConfig&) = default;
};

// Full declarative description of one experiment.
struct ExperimentConfig {
    Method method = Method::fedavg;
    int num_clients = 100;
    double participation_fraction = 0.1;
    int total_rounds = 40;
    int warmup_rounds = 20;
    int local_epochs_per_round = 1;
    double learning_rate = 0.1;  // per-round local SGD
    int batch_size = 32;
    LiaConfig lia;
    OpticsParams optics;
    ModelSpec model;
    PartitionSpec partition;
    DataConfig data;
    std::vector<std::uint64_t> seeds{0, 1, 2, 3};
    BenchConfig bench;

    friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

// Which model a client deploys (index into the current group list).
struct ClientState {
    int client_id = 0;
    int model_ref = 0;
};

struct RoundLog {
    int round = 0;
    Phase phase = Phase::warmup;
    std::vector<double> per_client_accuracy;
    double mean_accuracy = 0.0;
    double std_accuracy = 0.0;  // sample std (n-1), 0 for a single client
    std::vector<int> per_cluster_sizes;
};

// Everything the one-shot clustering phase produced. The OPTICS view is
// computed for both pfedlia variants (for the p2p method it is a diagnostic
// dump of the same matrix); `beneficial` is only filled for the p2p method.
struct ClusteringOutcome {
    InfluenceMatrix matrix;
    OpticsResult optics;
    ClusterAssignment resolved;  // OPTICS noise turned into singleton clusters
    std::vector<TwoMeansResult> peer;
    std::vector<std::vector<int>> beneficial;
};

struct RunArtifacts {
    std::optional<ClusteringOutcome> clustering;
    int influence_matrices_built = 0;
};

// Weighted mean of parameter vectors, accumulated in the order given (callers
// pass ascending client order so results are reproducible).
ParamVector fedavg_aggregate(const std::vector<ParamVector>& models,
                             const std::vector<double>& weights);

// ceil(fraction * |pool|) members, uniform without replacement, ascending.
std::vector<int> sample_clients(const std::vector<int>& pool, double fraction,
                                std::uint64_t round_seed);

void validate_config(const ExperimentConfig& cfg);

// Dataset generation/loading plus partitioning; all randomness derived from
// (config seeds, experiment seed).
PartitionResult build_client_data(const ExperimentConfig& cfg, std::uint64_t exp_seed);

// Plain FedAvg for cfg.warmup_rounds rounds from init_params.
ParamVector run_warmup(const ExperimentConfig& cfg, const std::vector<ClientShard>& shards,
                       std::uint64_t exp_seed);

// One-shot clustering: all clients compute partial models once, then either
// OPTICS over the matrix rows (central) or per-client 2-means (p2p).
ClusteringOutcome clustering_phase(const ExperimentConfig& cfg, const ParamVector& theta0,
                                   const std::vector<ClientShard>& shards,
                                   std::uint64_t exp_seed);

// Runs one experiment for one seed; one RoundLog per communication round.
std::vector<RoundLog> run_experiment(const ExperimentConfig& cfg, std::uint64_t exp_seed,
                                     RunArtifacts* artifacts = nullptr);

}  // namespace pfedlia
