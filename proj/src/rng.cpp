#include "pfedlia/rng.hpp"

#include <algorithm>

namespace pfedlia {

std::vector<int> Rng::sample_without_replacement(int n, int k) {
    std::vector<int> idx(n);
    for (int i = 0; i < n; ++i) idx[i] = i;
    k = std::min(k, n);
    for (int i = 0; i < k; ++i) {
        const std::size_t j = i + next_index(idx.size() - i);
        std::swap(idx[i], idx[j]);
    }
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    return idx;
}

}  // namespace pfedlia
