#include "mvmt/rng.hpp"

#include <algorithm>

namespace mvmt {

std::vector<std::size_t> Rng::sample_without_replacement(std::size_t n, std::size_t k) {
    k = std::min(k, n);
    // partial Fisher-Yates over an index pool
    std::vector<std::size_t> pool(n);
    for (std::size_t i = 0; i < n; ++i) pool[i] = i;
    std::vector<std::size_t> out;
    out.reserve(k);
    for (std::size_t i = 0; i < k; ++i) {
        std::size_t j = i + uniform_index(n - i);
        std::swap(pool[i], pool[j]);
        out.push_back(pool[i]);
    }
    std::sort(out.begin(), out.end());
    return out;
}

} // namespace mvmt
