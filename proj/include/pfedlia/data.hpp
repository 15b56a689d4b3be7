#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "pfedlia/model.hpp"

namespace pfedlia {

// Gaussian blobs, one per class. Class means are placed deterministically from
// the seed with pairwise distance >= class_separation.
struct SyntheticSpec {
    int num_classes = 2;
    int input_dim = 2;
    int examples_per_class = 100;
    double class_separation = 5.0;
    double noise_sigma = 1.0;
    std::uint64_t seed = 0;

    friend bool operator==(const SyntheticSpec&, const SyntheticSpec&) = default;
};

enum class PartitionScheme { pathological, noisy, iid };

struct PartitionSpec {
    PartitionScheme scheme = PartitionScheme::pathological;
    int num_clusters = 1;
    int num_clients = 100;
    int noisy_extra_labels = 1;
    double noisy_probability = 0.5;
    std::uint64_t seed = 0;

    friend bool operator==(const PartitionSpec&, const PartitionSpec&) = default;
};

struct ClientShard {
    int client_id = 0;
    Dataset train;
    Dataset validation;
    int true_cluster = 0;  // ground truth, for the Oracle baseline and evaluation only

    friend bool operator==(const ClientShard&, const ClientShard&) = default;
};

struct PartitionResult {
    std::vector<ClientShard> shards;
    std::map<int, int> label_to_cluster;

    friend bool operator==(const PartitionResult&, const PartitionResult&) = default;
};

// Deterministic class means used by generate_synthetic (exposed for tests).
std::vector<std::vector<double>> synthetic_class_means(const SyntheticSpec& spec);

Dataset generate_synthetic(const SyntheticSpec& spec);

// Each label assigned exclusively to one cluster; labels and clients split
// evenly across clusters (round-robin remainders); each cluster's per-label
// pool sharded equally among its clients; 3:1 train/validation per client.
PartitionResult partition_pathological(const Dataset& data, const PartitionSpec& spec);

// Pathological plus, per client with probability noisy_probability, examples
// of noisy_extra_labels out-of-cluster labels carved from a reserved slice of
// those labels' pools (no example ever appears on two clients).
PartitionResult partition_noisy(const Dataset& data, const PartitionSpec& spec);

// Dispatch on spec.scheme; iid = pathological with a single cluster.
PartitionResult partition(const Dataset& data, const PartitionSpec& spec);

// Seeded permutation, first 75% train, rest validation. Needs >= 4 examples.
std::pair<Dataset, Dataset> split_train_val(const Dataset& examples, std::uint64_t seed);

// Standard big-endian IDX image/label pair (magic 0x803 / 0x801), pixels
// scaled to [0,1].
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

}  // namespace pfedlia
