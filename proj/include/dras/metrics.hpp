#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "dras/error.hpp"
#include "dras/tensor.hpp"

namespace dras {

/// Square root of the summed squared elementwise difference, all axes
/// flattened.
template <class P, class Q>
double frobenius_distance(const BasicTensor<P>& x, const BasicTensor<Q>& y) {
    if (!x.same_shape(y))
        throw ShapeMismatch("frobenius_distance: shapes " + detail::to_string(x.shape()) + " and " +
                            detail::to_string(y.shape()) + " differ");
    double acc = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double diff = x.values()[k] - y.values()[k];
        acc += diff * diff;
    }
    return std::sqrt(acc);
}

/// Sum of the slices along axis d, e.g. regional tables summed to a
/// national table.
inline Tensor aggregate_slices(const Tensor& x, std::size_t d) { return x.margin(d); }

/// How to treat cells whose reference value is zero.
enum class ZeroPolicy {
    /// 0 when the estimate is also 0, flagged otherwise.
    ZeroIfBothZero,
    /// Always flagged.
    FlagAll,
};

struct ThresholdCount {
    double threshold = 0.0;
    std::size_t cells = 0;
};

struct DeviationSummary {
    /// Over unflagged cells.
    double max_abs_relative = 0.0;
    double mean_abs_relative = 0.0;
    double frobenius_of_difference = 0.0;
    /// Cells with a zero reference that carry NaN in the grid.
    std::size_t flagged_cells = 0;
    /// Unflagged cells with |deviation| above each threshold.
    std::vector<ThresholdCount> exceeding;
};

struct DeviationReport {
    std::string reference_name;
    std::string estimate_name;
    /// (estimate - reference) / reference per cell; NaN marks flagged cells.
    SignedTensor relative_deviation;
    DeviationSummary summary;
};

inline const std::vector<double>& default_deviation_thresholds() {
    static const std::vector<double> thresholds{0.01, 0.1, 1.0};
    return thresholds;
}

/// Recomputes the summary from a deviation grid. The Frobenius distance
/// needs the raw tables and is passed through.
inline DeviationSummary summarize_deviations(const SignedTensor& grid, double frobenius_of_difference,
                                             const std::vector<double>& thresholds) {
    DeviationSummary summary;
    summary.frobenius_of_difference = frobenius_of_difference;
    for (const double t : thresholds) summary.exceeding.push_back({t, 0});
    double total = 0.0;
    std::size_t counted = 0;
    for (const double v : grid.values()) {
        if (std::isnan(v)) {
            ++summary.flagged_cells;
            continue;
        }
        const double magnitude = std::abs(v);
        summary.max_abs_relative = std::max(summary.max_abs_relative, magnitude);
        total += magnitude;
        ++counted;
        for (auto& bucket : summary.exceeding)
            if (magnitude > bucket.threshold) ++bucket.cells;
    }
    summary.mean_abs_relative = counted == 0 ? 0.0 : total / static_cast<double>(counted);
    return summary;
}

/// Elementwise (estimate - reference) / reference, so overestimates are
/// positive.
inline DeviationReport relative_deviation(const Tensor& reference, const Tensor& estimate,
                                          ZeroPolicy zero_policy = ZeroPolicy::ZeroIfBothZero,
                                          const std::vector<double>& thresholds =
                                              default_deviation_thresholds(),
                                          std::string reference_name = "reference",
                                          std::string estimate_name = "estimate") {
    if (!reference.same_shape(estimate))
        throw ShapeMismatch("relative_deviation: shapes " + detail::to_string(reference.shape()) +
                            " and " + detail::to_string(estimate.shape()) + " differ");
    constexpr double flagged = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> grid(reference.size());
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const double ref = reference.values()[k];
        const double est = estimate.values()[k];
        if (ref != 0.0)
            grid[k] = (est - ref) / ref;
        else if (zero_policy == ZeroPolicy::ZeroIfBothZero && est == 0.0)
            grid[k] = 0.0;
        else
            grid[k] = flagged;
    }
    SignedTensor deviations(reference.dims(), std::move(grid));
    DeviationSummary summary =
        summarize_deviations(deviations, frobenius_distance(reference, estimate), thresholds);
    return {std::move(reference_name), std::move(estimate_name), std::move(deviations),
            std::move(summary)};
}

/// Symmetric table of pairwise Frobenius distances with a zero diagonal.
struct DistanceMatrix {
    std::vector<std::string> names;
    std::vector<double> distances;  // row-major, names.size() squared

    double at(std::size_t i, std::size_t j) const { return distances.at(i * names.size() + j); }
};

inline DistanceMatrix distance_matrix(const std::vector<std::pair<std::string, Tensor>>& tables) {
    DistanceMatrix out;
    const std::size_t n = tables.size();
    out.distances.assign(n * n, 0.0);
    for (const auto& [name, table] : tables) {
        if (!table.same_shape(tables.front().second))
            throw ShapeMismatch("table '" + name + "' has shape " + detail::to_string(table.shape()) +
                                ", expected " + detail::to_string(tables.front().second.shape()));
        out.names.push_back(name);
    }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double d = frobenius_distance(tables[i].second, tables[j].second);
            out.distances[i * n + j] = d;
            out.distances[j * n + i] = d;
        }
    return out;
}

}  // namespace dras
