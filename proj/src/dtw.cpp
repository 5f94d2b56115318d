#include "tsgap/dtw.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace tsgap {

double dtw_distance(std::span<const double> a, std::span<const double> b,
                    std::optional<std::size_t> band) {
    if (a.empty() || b.empty()) throw DataError("dtw_distance: empty series");
    const std::size_t n = a.size(), m = b.size();
    const std::size_t diff = n > m ? n - m : m - n;
    if (band && *band < diff) throw UsageError("dtw_distance: band too narrow for length difference");

    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<double> prev(m + 1, inf), cur(m + 1, inf);
    prev[0] = 0.0;
    for (std::size_t i = 1; i <= n; ++i) {
        std::fill(cur.begin(), cur.end(), inf);
        std::size_t jlo = 1, jhi = m;
        if (band) {
            jlo = i > *band ? i - *band : 1;
            jhi = std::min(m, i + *band);
        }
        for (std::size_t j = jlo; j <= jhi; ++j) {
            const double cost = std::abs(a[i - 1] - b[j - 1]);
            cur[j] = cost + std::min({prev[j - 1], prev[j], cur[j - 1]});
        }
        std::swap(prev, cur);
    }
    return prev[m];
}

}  // namespace tsgap
