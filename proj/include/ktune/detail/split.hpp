#pragma once

#include <algorithm>
#include <cstddef>
#include <utility>
#include <vector>

namespace ktune::detail {

struct NumericSplit {
    bool valid = false;
    double threshold = 0.0; // midpoint between consecutive distinct values
    double gain = 0.0;      // sum-of-squares reduction, > 0 when valid
    std::size_t left_count = 0;
};

// Best variance-reduction split over (value, target) pairs. Sorts the pairs
// by (value, target) so the scan order, and therefore every floating-point
// sum, is independent of the caller's row order. min_leaf applies to both
// sides.
inline NumericSplit best_numeric_split(std::vector<std::pair<double, double>>& pairs,
                                       std::size_t min_leaf) {
    NumericSplit best;
    const std::size_t n = pairs.size();
    if (n < 2 * min_leaf || n < 2) return best;
    std::sort(pairs.begin(), pairs.end());

    double total = 0.0;
    for (const auto& p : pairs) total += p.second;

    double left_sum = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        left_sum += pairs[i].second;
        if (pairs[i].first == pairs[i + 1].first) continue;
        const std::size_t nl = i + 1, nr = n - nl;
        if (nl < min_leaf || nr < min_leaf) continue;
        const double right_sum = total - left_sum;
        const double gain = left_sum * left_sum / static_cast<double>(nl) +
                            right_sum * right_sum / static_cast<double>(nr) -
                            total * total / static_cast<double>(n);
        if (gain > best.gain) {
            best.valid = true;
            best.gain = gain;
            best.threshold = pairs[i].first + 0.5 * (pairs[i + 1].first - pairs[i].first);
            best.left_count = nl;
        }
    }
    return best;
}

// Mean over a canonical (sorted) order so the result does not depend on the
// original row order.
inline double canonical_mean(std::vector<double> values) {
    if (values.empty()) return 0.0;
    std::sort(values.begin(), values.end());
    double s = 0.0;
    for (double v : values) s += v;
    return s / static_cast<double>(values.size());
}

inline double median(std::vector<double> values) {
    if (values.empty()) return 0.0;
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return (n % 2) ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

} // namespace ktune::detail
