#include "pfedlia/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "pfedlia/rng.hpp"

namespace pfedlia {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double euclidean(const std::vector<double>& a, const std::vector<double>& b) {
    double d2 = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d2 += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(d2);
}

// The automatic eps separates the dense in-cluster reachability band from the
// few large inter-cluster jumps. A single-gap rule is too brittle for that
// (the largest additive gap can fall between two jumps, the largest relative
// gap inside a near-zero band), so the cut is the 2-means frontier over the
// finite reachability values. The jumps are at most (clusters - 1) of the
// n - 1 finite values; when the high side of the split is not a small
// minority there is no jump structure and everything is one cluster.
double auto_extraction_eps(const std::vector<double>& reachability) {
    std::vector<double> finite;
    for (double r : reachability)
        if (std::isfinite(r)) finite.push_back(r);
    if (finite.empty()) return 0.0;
    std::sort(finite.begin(), finite.end());
    if (finite.size() < 2) return finite.back();
    const TwoMeansResult split = kmeans_two(finite, 0);
    if (split.degenerate) return finite.back();
    if (split.beneficial.size() * 4 >= finite.size()) return finite.back();
    return split.frontier;
}

}  // namespace

std::vector<std::vector<double>> row_features(const InfluenceMatrix& matrix) {
    std::vector<std::vector<double>> features(matrix.n);
    for (int i = 0; i < matrix.n; ++i) {
        std::vector<double> row = matrix.row(i);
        double scale = 0.0;
        for (double v : row) scale = std::max(scale, std::abs(v));
        scale = std::max(scale, 1e-12);
        for (double& v : row) v /= scale;
        features[i] = std::move(row);
    }
    return features;
}

OpticsResult optics(const std::vector<std::vector<double>>& points, const OpticsParams& params) {
    const int n = static_cast<int>(points.size());
    if (params.min_pts < 2) throw ConfigError("min_pts must be >= 2");
    if (n < params.min_pts)
        throw ConfigError("OPTICS needs at least min_pts (" + std::to_string(params.min_pts) +
                          ") points, got " + std::to_string(n));
    for (const auto& p : points)
        if (p.size() != points[0].size()) throw DimensionError("points of differing dimension");

    std::vector<double> dist(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            dist[static_cast<std::size_t>(i) * n + j] = dist[static_cast<std::size_t>(j) * n + i] =
                euclidean(points[i], points[j]);
    auto d = [&](int i, int j) { return dist[static_cast<std::size_t>(i) * n + j]; };

    // Core distance: distance to the min_pts-th nearest neighbour (counting the
    // point itself), undefined when it lies beyond max_eps.
    std::vector<double> core(n, kInf);
    {
        std::vector<double> nd(n);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) nd[j] = d(i, j);
            std::nth_element(nd.begin(), nd.begin() + (params.min_pts - 1), nd.end());
            const double cd = nd[params.min_pts - 1];
            if (cd <= params.max_eps) core[i] = cd;
        }
    }

    ReachabilityProfile profile;
    profile.ordering.reserve(n);
    profile.reachability.reserve(n);
    std::vector<bool> processed(n, false);
    std::vector<double> reach(n, kInf);
    std::set<std::pair<double, int>> seeds;  // (reachability, index), lowest first

    auto update_from = [&](int p) {
        if (!std::isfinite(core[p])) return;
        for (int q = 0; q < n; ++q) {
            if (processed[q] || q == p) continue;
            const double dq = d(p, q);
            if (dq > params.max_eps) continue;
            const double nr = std::max(core[p], dq);
            if (nr < reach[q]) {
                if (std::isfinite(reach[q])) seeds.erase({reach[q], q});
                reach[q] = nr;
                seeds.insert({nr, q});
            }
        }
    };

    for (int start = 0; start < n; ++start) {
        if (processed[start]) continue;
        processed[start] = true;
        profile.ordering.push_back(start);
        profile.reachability.push_back(ReachabilityProfile::kUndefined);
        update_from(start);
        while (!seeds.empty()) {
            const auto [r, q] = *seeds.begin();
            seeds.erase(seeds.begin());
            processed[q] = true;
            profile.ordering.push_back(q);
            profile.reachability.push_back(r);
            update_from(q);
        }
    }

    const double eps = params.extraction_eps ? *params.extraction_eps
                                             : auto_extraction_eps(profile.reachability);

    ClusterAssignment assignment;
    assignment.labels.assign(n, ClusterAssignment::kNoise);
    int current = -1;
    for (int k = 0; k < n; ++k) {
        const int p = profile.ordering[k];
        const double r = profile.reachability[k];
        if (r > eps) {
            if (core[p] <= eps) {
                current = assignment.num_clusters++;
                assignment.labels[p] = current;
            } else {
                assignment.labels[p] = ClusterAssignment::kNoise;
            }
        } else {
            if (current < 0) current = assignment.num_clusters++;  // defensive; r<=eps implies a predecessor
            assignment.labels[p] = current;
        }
    }

    OpticsResult result;
    result.profile = std::move(profile);
    result.assignment = std::move(assignment);
    result.core_distance = std::move(core);
    result.extraction_eps_used = eps;
    return result;
}

OpticsResult cluster_centralized_detailed(const InfluenceMatrix& matrix,
                                          const OpticsParams& params) {
    return optics(row_features(matrix), params);
}

ClusterAssignment cluster_centralized(const InfluenceMatrix& matrix, const OpticsParams& params) {
    return cluster_centralized_detailed(matrix, params).assignment;
}

TwoMeansResult kmeans_two(const std::vector<double>& values, std::uint64_t seed) {
    (void)seed;  // the 1-D optimum is exact, so no seeding is involved
    const int n = static_cast<int>(values.size());
    if (n < 2) throw ConfigError("kmeans_two needs >= 2 values");

    const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
    // identical values (up to float noise): no frontier exists, everyone is in
    const double spread_tol = 1e-12 * std::max({1.0, std::abs(*lo_it), std::abs(*hi_it)});
    if (*hi_it - *lo_it <= spread_tol) {
        TwoMeansResult r;
        r.degenerate = true;
        r.frontier = *lo_it;
        r.beneficial.resize(n);
        for (int i = 0; i < n; ++i) r.beneficial[i] = i;
        return r;
    }

    // In one dimension the k=2 optimum is a split of the sorted values; scan
    // every split with prefix sums instead of running Lloyd iterations, which
    // can stall in a local optimum when one value is extreme.
    std::vector<double> sorted = values;
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> prefix(n + 1, 0.0), prefix_sq(n + 1, 0.0);
    for (int i = 0; i < n; ++i) {
        prefix[i + 1] = prefix[i] + sorted[i];
        prefix_sq[i + 1] = prefix_sq[i] + sorted[i] * sorted[i];
    }
    int best_split = 1;
    double best_ss = std::numeric_limits<double>::infinity();
    for (int s = 1; s < n; ++s) {
        const double sum_lo = prefix[s], sum_hi = prefix[n] - prefix[s];
        const double ss = (prefix_sq[s] - sum_lo * sum_lo / s) +
                          (prefix_sq[n] - prefix_sq[s] - sum_hi * sum_hi / (n - s));
        if (ss < best_ss) {
            best_ss = ss;
            best_split = s;
        }
    }
    const double c_lo = prefix[best_split] / best_split;
    const double c_hi = (prefix[n] - prefix[best_split]) / (n - best_split);

    TwoMeansResult r;
    r.frontier = 0.5 * (c_lo + c_hi);
    for (int i = 0; i < n; ++i) {
        // nearest centroid; ties go to the beneficial (larger-centroid) side
        if (std::abs(values[i] - c_hi) <= std::abs(values[i] - c_lo)) r.beneficial.push_back(i);
    }
    return r;
}

std::vector<int> cluster_peer(const std::vector<double>& matrix_row, int self_index,
                              std::uint64_t seed) {
    if (self_index < 0 || self_index >= static_cast<int>(matrix_row.size()))
        throw DimensionError("self_index outside the row");
    TwoMeansResult r = kmeans_two(matrix_row, seed);
    if (!std::binary_search(r.beneficial.begin(), r.beneficial.end(), self_index)) {
        r.beneficial.insert(
            std::lower_bound(r.beneficial.begin(), r.beneficial.end(), self_index), self_index);
    }
    return r.beneficial;
}

double adjusted_rand_index(const ClusterAssignment& a, const ClusterAssignment& b) {
    if (a.labels.size() != b.labels.size())
        throw DimensionError("partitions of different length");
    const int n = static_cast<int>(a.labels.size());
    if (n == 0) throw DimensionError("empty partitions");

    // Noise points become singletons so that "unclustered" never accidentally
    // forms one big cluster.
    auto resolve = [n](const ClusterAssignment& c) {
        std::vector<int> out(c.labels);
        int next = c.num_clusters;
        for (int i = 0; i < n; ++i)
            if (out[i] == ClusterAssignment::kNoise) out[i] = next++;
        return out;
    };
    const std::vector<int> la = resolve(a), lb = resolve(b);

    std::map<std::pair<int, int>, long long> cont;
    std::map<int, long long> ra, rb;
    for (int i = 0; i < n; ++i) {
        ++cont[{la[i], lb[i]}];
        ++ra[la[i]];
        ++rb[lb[i]];
    }
    auto c2 = [](long long x) { return 0.5 * x * (x - 1); };
    double sum_ij = 0.0, sum_a = 0.0, sum_b = 0.0;
    for (const auto& [key, cnt] : cont) sum_ij += c2(cnt);
    for (const auto& [key, cnt] : ra) sum_a += c2(cnt);
    for (const auto& [key, cnt] : rb) sum_b += c2(cnt);
    const double total = c2(n);
    const double expected = total > 0 ? sum_a * sum_b / total : 0.0;
    const double max_index = 0.5 * (sum_a + sum_b);
    const double denom = max_index - expected;
    if (denom == 0.0) return 1.0;  // both all-singletons or both one cluster
    return (sum_ij - expected) / denom;
}

}  // namespace pfedlia
