#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "pfedlia/influence.hpp"

namespace pfedlia {

struct OpticsParams {
    int min_pts = 4;
    double max_eps = std::numeric_limits<double>::infinity();
    std::optional<double> extraction_eps;  // absent: auto-select (largest reachability gap)

    friend bool operator==(const OpticsParams&, const OpticsParams&) = default;
};

// Cluster ids are contiguous 0..num_clusters-1 in order of first appearance in
// the OPTICS ordering; -1 marks noise.
struct ClusterAssignment {
    static constexpr int kNoise = -1;
    std::vector<int> labels;
    int num_clusters = 0;

    friend bool operator==(const ClusterAssignment&, const ClusterAssignment&) = default;
};

// OPTICS ordering with reachability distances. The first element of each
// expansion (in particular position 0) carries the undefined sentinel.
struct ReachabilityProfile {
    static constexpr double kUndefined = std::numeric_limits<double>::infinity();
    std::vector<int> ordering;         // permutation of point indices
    std::vector<double> reachability;  // aligned with ordering
};

struct OpticsResult {
    ReachabilityProfile profile;
    ClusterAssignment assignment;
    std::vector<double> core_distance;  // indexed by point, kUndefined when not core
    double extraction_eps_used = 0.0;
};

// Per-client feature vectors: matrix rows, each divided by max(|entry|, 1e-12)
// so an evaluator's validation-loss scale does not dominate the metric.
std::vector<std::vector<double>> row_features(const InfluenceMatrix& matrix);

// Standard OPTICS under the Euclidean metric, deterministic (expansion starts
// at the lowest unprocessed index; seed-queue ties broken by lowest index).
// Extraction is the DBSCAN-equivalent eps cut over the reachability profile;
// without an explicit extraction_eps the cut is the midpoint of the largest
// gap in the sorted finite reachability values.
OpticsResult optics(const std::vector<std::vector<double>>& points, const OpticsParams& params);

ClusterAssignment cluster_centralized(const InfluenceMatrix& matrix, const OpticsParams& params);
OpticsResult cluster_centralized_detailed(const InfluenceMatrix& matrix,
                                          const OpticsParams& params);

// 1-D k-means with k = 2 (k-means++ seeding). The beneficial cluster is the
// one with the larger centroid; the frontier is the midpoint between the two
// final centroids. All-identical input degenerates to everything beneficial.
struct TwoMeansResult {
    std::vector<int> beneficial;  // ascending indices
    double frontier = 0.0;
    bool degenerate = false;
};

TwoMeansResult kmeans_two(const std::vector<double>& values, std::uint64_t seed);

// Peer-side clustering of one influence row; the evaluator always includes
// itself.
std::vector<int> cluster_peer(const std::vector<double>& matrix_row, int self_index,
                              std::uint64_t seed);

// Standard adjusted Rand index in [-1, 1]; noise entries (-1) count as
// singleton clusters. 1.0 iff the partitions are identical up to relabeling.
double adjusted_rand_index(const ClusterAssignment& a, const ClusterAssignment& b);

}  // namespace pfedlia
