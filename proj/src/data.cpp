#include "pfedlia/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>

#include "pfedlia/rng.hpp"

namespace pfedlia {
namespace {

void validate_synthetic(const SyntheticSpec& s) {
    if (s.num_classes < 1) throw ConfigError("synthetic num_classes must be >= 1");
    if (s.input_dim < 1) throw ConfigError("synthetic input_dim must be >= 1");
    if (s.examples_per_class < 1) throw ConfigError("synthetic examples_per_class must be >= 1");
    if (!(s.class_separation > 0.0)) throw ConfigError("class_separation must be > 0");
    if (!(s.noise_sigma > 0.0)) throw ConfigError("noise_sigma must be > 0");
}

// sizes of `parts` near-equal chunks of `total`, remainders to the first ones
std::vector<int> chunk_sizes(int total, int parts) {
    std::vector<int> sizes(parts, total / parts);
    for (int i = 0; i < total % parts; ++i) ++sizes[i];
    return sizes;
}

struct Layout {
    std::vector<int> labels;                         // sorted distinct labels
    std::map<int, int> label_to_cluster;
    std::vector<std::vector<int>> cluster_labels;    // label positions per cluster
    std::vector<int> client_cluster;                 // per client
    std::vector<std::vector<int>> cluster_clients;   // ascending client ids
    std::vector<std::vector<int>> label_pool;        // data indices per label position
};

Layout make_layout(const Dataset& data, const PartitionSpec& spec) {
    if (data.empty()) throw ConfigError("cannot partition an empty dataset");
    if (spec.num_clusters < 1) throw ConfigError("num_clusters must be >= 1");
    if (spec.num_clients < 1) throw ConfigError("num_clients must be >= 1");

    Layout lay;
    std::set<int> label_set;
    for (const auto& ex : data) label_set.insert(ex.label);
    lay.labels.assign(label_set.begin(), label_set.end());
    const int num_labels = static_cast<int>(lay.labels.size());
    const int k = spec.num_clusters;
    if (num_labels < k)
        throw ConfigError("num_clusters (" + std::to_string(k) + ") exceeds the number of labels (" +
                          std::to_string(num_labels) + ")");

    lay.cluster_labels.resize(k);
    const std::vector<int> label_counts = chunk_sizes(num_labels, k);
    int pos = 0;
    for (int c = 0; c < k; ++c) {
        for (int i = 0; i < label_counts[c]; ++i, ++pos) {
            lay.cluster_labels[c].push_back(pos);
            lay.label_to_cluster[lay.labels[pos]] = c;
        }
    }

    lay.cluster_clients.resize(k);
    lay.client_cluster.resize(spec.num_clients);
    const std::vector<int> client_counts = chunk_sizes(spec.num_clients, k);
    int client = 0;
    for (int c = 0; c < k; ++c) {
        for (int i = 0; i < client_counts[c]; ++i, ++client) {
            lay.cluster_clients[c].push_back(client);
            lay.client_cluster[client] = c;
        }
    }

    lay.label_pool.resize(num_labels);
    std::map<int, int> label_pos;
    for (int i = 0; i < num_labels; ++i) label_pos[lay.labels[i]] = i;
    for (int i = 0; i < static_cast<int>(data.size()); ++i)
        lay.label_pool[label_pos[data[i].label]].push_back(i);
    return lay;
}

// Shared body for the pathological and noisy schemes. extra_labels == 0 means
// plain pathological; the noisy draws and the per-label reserve slices only
// exist for labels at least one client actually drew, so noisy_probability = 0
// reproduces the pathological shards exactly.
PartitionResult partition_impl(const Dataset& data, const PartitionSpec& spec,
                               double noisy_probability, int extra_labels) {
    const Layout lay = make_layout(data, spec);
    const int n_clients = spec.num_clients;
    const int num_labels = static_cast<int>(lay.labels.size());

    std::vector<std::vector<int>> drew(n_clients);  // label positions per client
    if (extra_labels > 0) {
        if (spec.num_clusters < 2)
            throw ConfigError("noisy scheme needs >= 2 clusters (no out-of-cluster label exists)");
        Rng rng(mix_seed(spec.seed, seed_tag::noisy));
        for (int i = 0; i < n_clients; ++i) {
            if (rng.next_double() >= noisy_probability) continue;
            std::vector<int> out;
            for (int lp = 0; lp < num_labels; ++lp)
                if (lay.label_to_cluster.at(lay.labels[lp]) != lay.client_cluster[i])
                    out.push_back(lp);
            const int want = std::min<int>(extra_labels, static_cast<int>(out.size()));
            for (int d = 0; d < want; ++d) {
                const std::size_t j = d + rng.next_index(out.size() - d);
                std::swap(out[d], out[j]);
            }
            drew[i].assign(out.begin(), out.begin() + want);
            std::sort(drew[i].begin(), drew[i].end());
        }
    }

    std::vector<std::vector<int>> drawers(num_labels);  // ascending by client id
    for (int i = 0; i < n_clients; ++i)
        for (int lp : drew[i]) drawers[lp].push_back(i);

    std::vector<std::vector<int>> client_examples(n_clients);  // data indices
    std::vector<int> reserve(num_labels, 0);
    for (int c = 0; c < spec.num_clusters; ++c) {
        const auto& members = lay.cluster_clients[c];
        for (int lp : lay.cluster_labels[c]) {
            const auto& pool = lay.label_pool[lp];
            if (!drawers[lp].empty()) reserve[lp] = static_cast<int>(pool.size()) / 5;
            const int core = static_cast<int>(pool.size()) - reserve[lp];
            const std::vector<int> sizes = chunk_sizes(core, static_cast<int>(members.size()));
            int off = 0;
            for (std::size_t q = 0; q < members.size(); ++q) {
                auto& dst = client_examples[members[q]];
                dst.insert(dst.end(), pool.begin() + off, pool.begin() + off + sizes[q]);
                off += sizes[q];
            }
        }
    }
    for (int lp = 0; lp < num_labels; ++lp) {
        if (drawers[lp].empty()) continue;
        const auto& pool = lay.label_pool[lp];
        const int core = static_cast<int>(pool.size()) - reserve[lp];
        const std::vector<int> sizes = chunk_sizes(reserve[lp], static_cast<int>(drawers[lp].size()));
        int off = core;
        for (std::size_t q = 0; q < drawers[lp].size(); ++q) {
            auto& dst = client_examples[drawers[lp][q]];
            dst.insert(dst.end(), pool.begin() + off, pool.begin() + off + sizes[q]);
            off += sizes[q];
        }
    }

    PartitionResult result;
    result.label_to_cluster = lay.label_to_cluster;
    result.shards.resize(n_clients);
    for (int i = 0; i < n_clients; ++i) {
        if (client_examples[i].size() < 4)
            throw ConfigError("client " + std::to_string(i) + " received only " +
                              std::to_string(client_examples[i].size()) +
                              " examples; need >= 4 for a 3:1 split");
        Dataset mine;
        mine.reserve(client_examples[i].size());
        for (int idx : client_examples[i]) mine.push_back(data[idx]);
        auto [train, val] = split_train_val(mine, mix_seed(spec.seed, seed_tag::split, i));
        result.shards[i] = ClientShard{i, std::move(train), std::move(val), lay.client_cluster[i]};
    }
    return result;
}

std::uint32_t read_u32_be(std::ifstream& in, const std::string& path) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4))
        throw IdxError(IdxError::Kind::Truncated, "truncated IDX file: " + path);
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) | (std::uint32_t(b[2]) << 8) |
           std::uint32_t(b[3]);
}

}  // namespace

std::vector<std::vector<double>> synthetic_class_means(const SyntheticSpec& spec) {
    validate_synthetic(spec);
    Rng rng(mix_seed(spec.seed, seed_tag::means));
    std::vector<std::vector<double>> means;
    double radius = spec.class_separation;
    while (static_cast<int>(means.size()) < spec.num_classes) {
        bool placed = false;
        for (int attempt = 0; attempt < 200 && !placed; ++attempt) {
            // uniform in the ball of the current radius
            std::vector<double> cand(spec.input_dim);
            double norm2 = 0.0;
            for (double& v : cand) {
                v = rng.normal();
                norm2 += v * v;
            }
            const double norm = std::sqrt(std::max(norm2, 1e-300));
            const double r = radius * std::pow(rng.next_double(), 1.0 / spec.input_dim);
            for (double& v : cand) v *= r / norm;
            bool ok = true;
            for (const auto& m : means) {
                double d2 = 0.0;
                for (int j = 0; j < spec.input_dim; ++j) d2 += (cand[j] - m[j]) * (cand[j] - m[j]);
                if (d2 < spec.class_separation * spec.class_separation) {
                    ok = false;
                    break;
                }
            }
            if (ok) {
                means.push_back(std::move(cand));
                placed = true;
            }
        }
        if (!placed) radius *= 1.25;  // ball too tight for the remaining classes
    }
    return means;
}

Dataset generate_synthetic(const SyntheticSpec& spec) {
    const auto means = synthetic_class_means(spec);
    Rng rng(mix_seed(spec.seed, seed_tag::data));
    Dataset out;
    out.reserve(static_cast<std::size_t>(spec.num_classes) * spec.examples_per_class);
    for (int c = 0; c < spec.num_classes; ++c) {
        for (int n = 0; n < spec.examples_per_class; ++n) {
            LabeledExample ex;
            ex.label = c;
            ex.features.resize(spec.input_dim);
            for (int j = 0; j < spec.input_dim; ++j)
                ex.features[j] = means[c][j] + spec.noise_sigma * rng.normal();
            out.push_back(std::move(ex));
        }
    }
    return out;
}

PartitionResult partition_pathological(const Dataset& data, const PartitionSpec& spec) {
    if (spec.scheme != PartitionScheme::pathological)
        throw ConfigError("partition_pathological called with a non-pathological scheme");
    return partition_impl(data, spec, 0.0, 0);
}

PartitionResult partition_noisy(const Dataset& data, const PartitionSpec& spec) {
    if (spec.scheme != PartitionScheme::noisy)
        throw ConfigError("partition_noisy called with a non-noisy scheme");
    if (spec.noisy_extra_labels < 1) throw ConfigError("noisy_extra_labels must be >= 1");
    if (spec.noisy_probability < 0.0 || spec.noisy_probability > 1.0)
        throw ConfigError("noisy_probability must be in [0, 1]");
    return partition_impl(data, spec, spec.noisy_probability, spec.noisy_extra_labels);
}

PartitionResult partition(const Dataset& data, const PartitionSpec& spec) {
    switch (spec.scheme) {
        case PartitionScheme::pathological:
            return partition_pathological(data, spec);
        case PartitionScheme::noisy:
            return partition_noisy(data, spec);
        case PartitionScheme::iid: {
            PartitionSpec flat = spec;
            flat.scheme = PartitionScheme::pathological;
            flat.num_clusters = 1;
            return partition_impl(data, flat, 0.0, 0);
        }
    }
    throw ConfigError("unknown partition scheme");
}

std::pair<Dataset, Dataset> split_train_val(const Dataset& examples, std::uint64_t seed) {
    const int n = static_cast<int>(examples.size());
    if (n < 4) throw ConfigError("need >= 4 examples for a 3:1 train/validation split, got " +
                                 std::to_string(n));
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    Rng(seed).shuffle(idx);
    const int n_train = 3 * n / 4;
    Dataset train, val;
    train.reserve(n_train);
    val.reserve(n - n_train);
    for (int i = 0; i < n_train; ++i) train.push_back(examples[idx[i]]);
    for (int i = n_train; i < n; ++i) val.push_back(examples[idx[i]]);
    return {std::move(train), std::move(val)};
}

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream img(images_path, std::ios::binary);
    if (!img) throw IdxError(IdxError::Kind::Truncated, "cannot open " + images_path);
    const std::uint32_t img_magic = read_u32_be(img, images_path);
    if (img_magic != 0x00000803u) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "bad image magic 0x%08x (want 0x00000803)", img_magic);
        throw IdxError(IdxError::Kind::BadMagic, std::string(buf) + " in " + images_path);
    }
    const std::uint32_t n_images = read_u32_be(img, images_path);
    const std::uint32_t rows = read_u32_be(img, images_path);
    const std::uint32_t cols = read_u32_be(img, images_path);

    std::ifstream lab(labels_path, std::ios::binary);
    if (!lab) throw IdxError(IdxError::Kind::Truncated, "cannot open " + labels_path);
    const std::uint32_t lab_magic = read_u32_be(lab, labels_path);
    if (lab_magic != 0x00000801u) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "bad label magic 0x%08x (want 0x00000801)", lab_magic);
        throw IdxError(IdxError::Kind::BadMagic, std::string(buf) + " in " + labels_path);
    }
    const std::uint32_t n_labels = read_u32_be(lab, labels_path);
    if (n_images != n_labels)
        throw IdxError(IdxError::Kind::CountMismatch,
                       "image/label count mismatch: " + std::to_string(n_images) + " vs " +
                           std::to_string(n_labels));

    const std::size_t dim = static_cast<std::size_t>(rows) * cols;
    Dataset out;
    out.reserve(n_images);
    std::vector<unsigned char> pixels(dim);
    for (std::uint32_t i = 0; i < n_images; ++i) {
        if (!img.read(reinterpret_cast<char*>(pixels.data()), dim))
            throw IdxError(IdxError::Kind::Truncated, "truncated IDX file: " + images_path);
        unsigned char label;
        if (!lab.read(reinterpret_cast<char*>(&label), 1))
            throw IdxError(IdxError::Kind::Truncated, "truncated IDX file: " + labels_path);
        LabeledExample ex;
        ex.label = label;
        ex.features.resize(dim);
        for (std::size_t j = 0; j < dim; ++j) ex.features[j] = pixels[j] / 255.0;
        out.push_back(std::move(ex));
    }
    return out;
}

}  // namespace pfedlia
