#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "dras/error.hpp"
#include "dras/tensor.hpp"

namespace dras {

/// Adjust dimensions 0, 1, ..., D-1 in every sweep.
struct FixedAscending {};

/// Adjust dimensions in a caller-given order; must be a permutation of 0..D-1.
struct FixedCustom {
    std::vector<std::size_t> order;
};

/// Draw a fresh uniformly random order before every sweep.
struct RandomPerIteration {
    std::uint64_t seed = 0;
};

using OrderPolicy = std::variant<FixedAscending, FixedCustom, RandomPerIteration>;

/// Which stopping rules are active. The iteration cap is always active.
enum class TerminationMode { Iterations, Delta, MarginResidual, Any };

enum class TerminationReason { MaxIterations, DeltaBelowThreshold, MarginResidualBelowThreshold };

inline const char* to_string(TerminationReason reason) {
    switch (reason) {
        case TerminationReason::MaxIterations: return "max_iterations";
        case TerminationReason::DeltaBelowThreshold: return "delta_below_threshold";
        case TerminationReason::MarginResidualBelowThreshold: return "margin_residual_below_threshold";
    }
    return "unknown";
}

struct BalanceConfig {
    std::size_t max_iterations = 10'000;
    /// Stop when the Frobenius distance between consecutive sweeps drops
    /// below this value. 0 disables the rule.
    double delta_threshold = 0.0;
    /// Stop when the quadratic margin mismatch drops below this value.
    double margin_threshold = 1e-8;
    OrderPolicy order = FixedAscending{};
    TerminationMode termination = TerminationMode::Any;
    /// Margins must agree pairwise within this fraction of the grand total.
    double compatibility_tolerance = 1e-6;
    /// Keep per-sweep delta and residual in BalanceResult::history.
    bool record_history = false;
};

struct SweepStats {
    double delta = 0.0;
    double margin_residual = 0.0;
};

struct BalanceResult {
    Tensor solution;
    std::size_t iterations_run = 0;
    double final_delta = 0.0;
    double final_margin_residual = 0.0;
    TerminationReason termination_reason = TerminationReason::MaxIterations;
    bool converged = false;
    std::vector<SweepStats> history;
};

/// A pairwise disagreement between margins d < e on the cell `index` of
/// their common (D-2)-dimensional sub-sum.
struct MarginViolation {
    std::size_t d = 0;
    std::size_t e = 0;
    Index index;
    double lhs = 0.0;  // margin e summed over axis d
    double rhs = 0.0;  // margin d summed over axis e
};

inline std::string describe(const MarginViolation& v) {
    return "margins " + std::to_string(v.d) + " and " + std::to_string(v.e) + " disagree at " +
           detail::to_string(v.index) + ": " + std::to_string(v.lhs) + " vs " +
           std::to_string(v.rhs);
}

/// Checks that every pair of margins agrees on the sums they share.
inline std::vector<MarginViolation> check_margin_compatibility(const MarginSet& margins,
                                                               double tolerance) {
    std::vector<MarginViolation> violations;
    const std::size_t rank = margins.rank();
    for (std::size_t e = 1; e < rank; ++e) {
        for (std::size_t d = 0; d < e; ++d) {
            // Axis d sits at position d inside margin e; axis e sits at e-1 inside margin d.
            const Tensor lhs = margins[e].margin(d);
            const Tensor rhs = margins[d].margin(e - 1);
            for (std::size_t k = 0; k < lhs.size(); ++k) {
                const double a = lhs.values()[k];
                const double b = rhs.values()[k];
                if (!(std::abs(a - b) <= tolerance))
                    violations.push_back({d, e, lhs.unravel(k), a, b});
            }
        }
    }
    return violations;
}

namespace detail {

/// Scales every fiber along axis d so it sums to its entry in `target`.
/// `sums` is scratch space sized like the margin.
inline void scale_axis(std::span<double> x, const Shape& shape, std::size_t d,
                       std::span<const double> target, std::span<double> sums) {
    sum_along(x, shape, d, sums);
    for (std::size_t f = 0; f < sums.size(); ++f) {
        const double current = sums[f];
        const double wanted = target[f];
        if (current > 0.0) {
            sums[f] = wanted / current;
        } else if (wanted == 0.0) {
            sums[f] = 1.0;
        } else {
            throw ZeroFiberPositiveMargin(
                d, f, wanted,
                "fiber " + std::to_string(f) + " along dimension " + std::to_string(d) +
                    " sums to zero but its target margin is " + std::to_string(wanted));
        }
    }
    const AxisSplit s(shape, d);
    for (std::size_t o = 0; o < s.outer; ++o) {
        const double* scale = sums.data() + o * s.inner;
        double* dst = x.data() + o * s.size * s.inner;
        for (std::size_t k = 0; k < s.size; ++k, dst += s.inner)
            for (std::size_t i = 0; i < s.inner; ++i) dst[i] *= scale[i];
    }
}

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double diff = a[k] - b[k];
        acc += diff * diff;
    }
    return acc;
}

inline double margin_residual(std::span<const double> x, const Shape& shape,
                              const MarginSet& margins, std::vector<double>& scratch) {
    double acc = 0.0;
    for (std::size_t d = 0; d < shape.size(); ++d) {
        const auto target = margins[d].values();
        scratch.resize(target.size());
        sum_along(x, shape, d, scratch);
        acc += squared_distance(scratch, target);
    }
    return std::sqrt(acc);
}

inline void validate(const BalanceConfig& config, std::size_t rank) {
    if (config.max_iterations == 0) throw InvalidArgument("max_iterations must be positive");
    auto check_threshold = [](double v, const char* name) {
        if (!(v >= 0.0) || !std::isfinite(v))
            throw InvalidArgument(std::string(name) + " must be finite and nonnegative");
    };
    check_threshold(config.delta_threshold, "delta_threshold");
    check_threshold(config.margin_threshold, "margin_threshold");
    check_threshold(config.compatibility_tolerance, "compatibility_tolerance");
    if (const auto* custom = std::get_if<FixedCustom>(&config.order)) {
        std::vector<std::size_t> sorted = custom->order;
        std::sort(sorted.begin(), sorted.end());
        std::vector<std::size_t> expected(rank);
        std::iota(expected.begin(), expected.end(), std::size_t{0});
        if (sorted != expected)
            throw InvalidArgument("custom dimension order is not a permutation of 0.." +
                                  std::to_string(rank == 0 ? 0 : rank - 1));
    }
}

}  // namespace detail

/// One proportional adjustment: every fiber along axis d is rescaled so
/// that margin(result, d) equals `target`. Zero fibers with a zero target
/// stay zero; a zero fiber with a positive target throws.
inline Tensor adjust_dimension(const Tensor& x, const Tensor& target, std::size_t d) {
    if (d >= x.rank())
        throw IndexOutOfRange("dimension " + std::to_string(d) + " out of range for rank " +
                              std::to_string(x.rank()));
    const Shape expected = detail::drop_axis(x.shape(), d);
    if (target.shape() != expected)
        throw ShapeMismatch("target margin has shape " + detail::to_string(target.shape()) +
                            ", expected " + detail::to_string(expected));
    std::vector<double> values(x.values().begin(), x.values().end());
    std::vector<double> sums(target.size());
    detail::scale_axis(values, x.shape(), d, target.values(), sums);
    return Tensor(x.dims(), std::move(values));
}

/// Frobenius distance between consecutive iterates.
inline double delta_metric(const Tensor& current, const Tensor& previous) {
    if (!current.same_shape(previous))
        throw ShapeMismatch("delta_metric: shapes " + detail::to_string(current.shape()) + " and " +
                            detail::to_string(previous.shape()) + " differ");
    return std::sqrt(detail::squared_distance(current.values(), previous.values()));
}

/// Square root of the summed squared mismatch between every margin of x
/// and its target.
inline double margin_residual(const Tensor& x, const MarginSet& margins) {
    if (x.shape() != margins.parent_shape())
        throw ShapeMismatch("margin_residual: tensor shape " + detail::to_string(x.shape()) +
                            " does not match margin set parent shape " +
                            detail::to_string(margins.parent_shape()));
    std::vector<double> scratch;
    return detail::margin_residual(x.values(), x.shape(), margins, scratch);
}

/// Multidimensional RAS. Starting from `m`, every sweep rescales the
/// iterate to each margin in turn until a stopping rule fires.
///
/// Throws IncompatibleMargins before doing any work if the margins
/// disagree beyond `compatibility_tolerance * grand_total`, and
/// ZeroFiberPositiveMargin if the zero pattern of `m` makes a target
/// unreachable. Hitting the iteration cap is not an error: the result is
/// returned with `converged == false`.
inline BalanceResult balance(const Tensor& m, const MarginSet& margins,
                             const BalanceConfig& config = {}) {
    const std::size_t rank = m.rank();
    detail::validate(config, rank);
    if (m.shape() != margins.parent_shape())
        throw ShapeMismatch("tensor shape " + detail::to_string(m.shape()) +
                            " does not match margin set parent shape " +
                            detail::to_string(margins.parent_shape()));

    if (rank > 0) {
        const double grand_total = margins[0].sum();
        const auto violations =
            check_margin_compatibility(margins, config.compatibility_tolerance * grand_total);
        if (!violations.empty())
            throw IncompatibleMargins(describe(violations.front()) + " (" +
                                      std::to_string(violations.size()) + " violation(s))");
    }

    const bool use_delta = config.termination == TerminationMode::Delta ||
                           config.termination == TerminationMode::Any;
    const bool use_residual = config.termination == TerminationMode::MarginResidual ||
                              config.termination == TerminationMode::Any;

    std::vector<std::size_t> order(rank);
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (const auto* custom = std::get_if<FixedCustom>(&config.order)) order = custom->order;
    std::mt19937_64 rng;
    const auto* random = std::get_if<RandomPerIteration>(&config.order);
    if (random) rng.seed(random->seed);

    const Shape& shape = m.shape();
    std::vector<double> x(m.values().begin(), m.values().end());
    std::vector<double> previous(x.size());
    std::vector<double> scratch;

    BalanceResult result;
    for (std::size_t t = 1; t <= config.max_iterations; ++t) {
        if (random) std::shuffle(order.begin(), order.end(), rng);
        std::copy(x.begin(), x.end(), previous.begin());
        for (const std::size_t d : order) {
            scratch.resize(margins[d].size());
            detail::scale_axis(x, shape, d, margins[d].values(), scratch);
        }

        result.iterations_run = t;
        result.final_delta = std::sqrt(detail::squared_distance(x, previous));
        result.final_margin_residual = detail::margin_residual(x, shape, margins, scratch);
        if (config.record_history)
            result.history.push_back({result.final_delta, result.final_margin_residual});

        if (use_residual && result.final_margin_residual < config.margin_threshold) {
            result.termination_reason = TerminationReason::MarginResidualBelowThreshold;
            break;
        }
        if (use_delta && result.final_delta < config.delta_threshold) {
            result.termination_reason = TerminationReason::DeltaBelowThreshold;
            break;
        }
        result.termination_reason = TerminationReason::MaxIterations;
    }

    result.converged = result.termination_reason != TerminationReason::MaxIterations ||
                       result.final_margin_residual < config.margin_threshold;
    result.solution = Tensor(m.dims(), std::move(x));
    return result;
}

/// Classical two-dimensional RAS: `row_totals[i]` is the target sum of row
/// i, `col_totals[j]` of column j. Runs the same engine as balance().
inline BalanceResult classical_ras(const Tensor& m, std::span<const double> row_totals,
                                   std::span<const double> col_totals,
                                   const BalanceConfig& config = {}) {
    if (m.rank() != 2)
        throw ShapeMismatch("classical RAS needs a 2-D matrix, got rank " + std::to_string(m.rank()));
    if (row_totals.size() != m.shape()[0] || col_totals.size() != m.shape()[1])
        throw ShapeMismatch("row/column totals do not match a " + std::to_string(m.shape()[0]) +
                            "x" + std::to_string(m.shape()[1]) + " matrix");
    std::vector<Tensor> margins;
    margins.emplace_back(std::vector<Dim>{m.dim(1)},
                         std::vector<double>(col_totals.begin(), col_totals.end()));
    margins.emplace_back(std::vector<Dim>{m.dim(0)},
                         std::vector<double>(row_totals.begin(), row_totals.end()));
    return balance(m, MarginSet(m.dims(), std::move(margins)), config);
}

/// A product-ratio test: prod(cells in numerator) / prod(cells in
/// denominator) must be the same in the initial and the balanced tensor.
struct CrossRatioFamily {
    std::vector<Index> numerator;
    std::vector<Index> denominator;
};

struct StructureViolation {
    std::size_t family = 0;
    double initial_ratio = 0.0;
    double balanced_ratio = 0.0;
};

/// Families over the 2^D corners of the box spanned by `low` and `high`
/// (low[k] != high[k]): corners with an even number of `high` coordinates
/// go to the numerator, odd ones to the denominator. Every factor that does
/// not depend on all D indices cancels, so these ratios survive balancing.
/// At D = 2 this is the classical cross-product ratio.
inline CrossRatioFamily interaction_box(const Index& low, const Index& high) {
    const std::size_t rank = low.size();
    CrossRatioFamily family;
    for (std::size_t mask = 0; mask < (std::size_t{1} << rank); ++mask) {
        Index corner(rank);
        std::size_t parity = 0;
        for (std::size_t k = 0; k < rank; ++k) {
            const bool hi = (mask >> k) & 1U;
            corner[k] = hi ? high[k] : low[k];
            parity += hi;
        }
        (parity % 2 == 0 ? family.numerator : family.denominator).push_back(std::move(corner));
    }
    return family;
}

/// Every box with low[k] < high[k] on every axis. The count is the product
/// of size*(size-1)/2 over axes; intended for small shapes.
inline std::vector<CrossRatioFamily> all_interaction_boxes(const Shape& shape) {
    std::vector<CrossRatioFamily> families;
    for (const std::size_t n : shape)
        if (n < 2) return families;
    const std::size_t rank = shape.size();
    Index low(rank, 0), high(rank, 1);
    while (true) {
        families.push_back(interaction_box(low, high));
        std::size_t k = rank;
        while (k-- > 0) {
            if (++high[k] < shape[k]) break;
            if (++low[k] + 1 < shape[k]) {
                high[k] = low[k] + 1;
                break;
            }
            low[k] = 0;
            high[k] = 1;
            if (k == 0) return families;
        }
        if (rank == 0) return families;
    }
}

/// `count` boxes drawn uniformly from all_interaction_boxes(shape).
inline std::vector<CrossRatioFamily> sample_interaction_boxes(const Shape& shape, std::size_t count,
                                                              std::uint64_t seed) {
    std::vector<CrossRatioFamily> families;
    for (const std::size_t n : shape)
        if (n < 2) return families;
    std::mt19937_64 rng(seed);
    families.reserve(count);
    for (std::size_t c = 0; c < count; ++c) {
        Index low(shape.size()), high(shape.size());
        for (std::size_t k = 0; k < shape.size(); ++k) {
            std::uniform_int_distribution<std::size_t> pick(0, shape[k] - 1);
            low[k] = pick(rng);
            do high[k] = pick(rng);
            while (high[k] == low[k]);
        }
        families.push_back(interaction_box(low, high));
    }
    return families;
}

/// Compares each family's product ratio in `m` and `x`; a family is
/// violated when the ratios differ by more than `tolerance` relative to
/// the initial ratio.
inline std::vector<StructureViolation> structure_conservation_check(
    const Tensor& m, const Tensor& x, std::span<const CrossRatioFamily> families, double tolerance) {
    if (!m.same_shape(x))
        throw ShapeMismatch("structure check: shapes " + detail::to_string(m.shape()) + " and " +
                            detail::to_string(x.shape()) + " differ");
    auto log_value = [](const Tensor& t, const Index& index, const char* which) {
        const double v = t.get(index);
        if (!(v > 0.0))
            throw InvalidArgument(std::string("structure check needs positive cells; ") + which +
                                  detail::to_string(index) + " = " + std::to_string(v));
        return std::log(v);
    };
    std::vector<StructureViolation> violations;
    for (std::size_t f = 0; f < families.size(); ++f) {
        double log_m = 0.0;
        double log_x = 0.0;
        for (const auto& cell : families[f].numerator) {
            log_m += log_value(m, cell, "m");
            log_x += log_value(x, cell, "x");
        }
        for (const auto& cell : families[f].denominator) {
            log_m -= log_value(m, cell, "m");
            log_x -= log_value(x, cell, "x");
        }
        if (std::abs(std::expm1(log_x - log_m)) > tolerance)
            violations.push_back({f, std::exp(log_m), std::exp(log_x)});
    }
    return violations;
}

}  // namespace dras
