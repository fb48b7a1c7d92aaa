#include <gtest/gtest.h>

#include <random>

#include "dras/balance.hpp"
#include "dras/metrics.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace dras;
using support::max_abs_diff;

TEST(Frobenius, Examples) {
    const Tensor x = Tensor::matrix({{0, 3}, {4, 0}});
    EXPECT_EQ(frobenius_distance(x, x), 0.0);
    EXPECT_EQ(frobenius_distance(x, Tensor::filled({2, 2}, 0.0)), 5.0);
    EXPECT_THROW(frobenius_distance(x, Tensor::filled({2, 3}, 0.0)), ShapeMismatch);
}

TEST(Frobenius, RelativeGapOfTotals) {
    // Classical vs multidimensional distances from the regional comparison.
    EXPECT_NEAR((53696.0 - 50346.0) / 50346.0, 0.0665, 5e-5);
}

TEST(FrobeniusProperty, IsAMetric) {
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 100; ++trial) {
        const Tensor a = support::random_positive({3, 4, 2}, rng);
        const Tensor b = support::random_positive({3, 4, 2}, rng);
        const Tensor c = support::random_positive({3, 4, 2}, rng);
        EXPECT_EQ(frobenius_distance(a, b), frobenius_distance(b, a));
        EXPECT_EQ(frobenius_distance(a, a), 0.0);
        EXPECT_GT(frobenius_distance(a, b), 0.0);
        EXPECT_LE(frobenius_distance(a, c), frobenius_distance(a, b) + frobenius_distance(b, c) + 1e-9);
    }
}

TEST(AggregateSlices, QuartersSumToFourTimes) {
    const std::vector<double> quarter{1, 2, 3, 4};
    std::vector<double> values;
    for (double v : quarter)
        for (int q = 0; q < 4; ++q) values.push_back(v);
    const Tensor t = Tensor::from_shape({2, 2, 4}, values);
    const Tensor total = aggregate_slices(t, 2);
    EXPECT_EQ(std::vector<double>(total.values().begin(), total.values().end()), (std::vector<double>{4, 8, 12, 16}));
}

TEST(AggregateSlices, MultidimensionalSolutionReproducesNationalTable) {
    std::mt19937_64 rng(2);
    const Tensor truth = support::random_positive({6, 6, 3}, rng, 1.0);
    const Tensor national = truth.margin(2);
    const Tensor m = support::random_positive({6, 6, 3}, rng);
    const auto r = balance(m, MarginSet::of(truth));
    EXPECT_LT(max_abs_diff(aggregate_slices(r.solution, 2).values(), national.values()), 1e-8);
}

TEST(AggregateSlices, IndependentSliceBalancingMissesNationalTable) {
    // Two regions with opposite structure. Each region's 2-D margins are
    // met exactly, but the initial national structure cannot reproduce
    // the national table once the slices are balanced separately.
    const Tensor truth = Tensor::from_shape({2, 2, 2}, {4, 1, 1, 1, 1, 1, 1, 4});
    const Tensor national = truth.margin(2);
    std::vector<double> summed(4, 0.0);
    for (std::size_t r = 0; r < 2; ++r) {
        std::vector<double> rows(2), cols(2);
        for (std::size_t i = 0; i < 2; ++i)
            for (std::size_t j = 0; j < 2; ++j) {
                rows[i] += truth.get({i, j, r});
                cols[j] += truth.get({i, j, r});
            }
        const auto solution = classical_ras(national, rows, cols).solution;
        for (std::size_t k = 0; k < 4; ++k) summed[k] += solution.values()[k];
    }
    const auto report = relative_deviation(national, Tensor::from_shape({2, 2}, summed));
    EXPECT_GT(report.summary.max_abs_relative, 0.01);
}

TEST(RelativeDeviation, Examples) {
    const Tensor x = Tensor::matrix({{1, 2}, {3, 4}});
    const auto same = relative_deviation(x, x);
    for (double v : same.relative_deviation.values()) EXPECT_EQ(v, 0.0);
    EXPECT_EQ(same.summary.max_abs_relative, 0.0);

    const auto over = relative_deviation(Tensor::vector({2}), Tensor::vector({4.2}));
    EXPECT_NEAR(over.relative_deviation.values()[0], 1.10, 1e-12);
    EXPECT_EQ(over.summary.exceeding.back().cells, 1u);  // above 100 %

    const auto under = relative_deviation(Tensor::vector({4}), Tensor::vector({3}));
    EXPECT_EQ(under.relative_deviation.values()[0], -0.25);
}

TEST(RelativeDeviation, ZeroReferencePolicies) {
    const Tensor reference = Tensor::vector({0, 0, 2});
    const Tensor estimate = Tensor::vector({0, 1, 3});

    const auto both = relative_deviation(reference, estimate, ZeroPolicy::ZeroIfBothZero);
    EXPECT_EQ(both.relative_deviation.values()[0], 0.0);
    EXPECT_TRUE(std::isnan(both.relative_deviation.values()[1]));
    EXPECT_EQ(both.summary.flagged_cells, 1u);
    EXPECT_DOUBLE_EQ(both.summary.mean_abs_relative, 0.25);  // (0 + 0.5) / 2
    EXPECT_EQ(both.summary.max_abs_relative, 0.5);

    const auto flag = relative_deviation(reference, estimate, ZeroPolicy::FlagAll);
    EXPECT_TRUE(std::isnan(flag.relative_deviation.values()[0]));
    EXPECT_EQ(flag.summary.flagged_cells, 2u);
    EXPECT_EQ(flag.summary.mean_abs_relative, 0.5);
    EXPECT_EQ(flag.summary.frobenius_of_difference, std::sqrt(2.0));
}

TEST(RelativeDeviation, SummaryRecomputesFromGrid) {
    std::mt19937_64 rng(3);
    const Tensor reference = support::with_zeros(support::random_positive({5, 5}, rng), 0.2, rng);
    const Tensor estimate = support::random_positive({5, 5}, rng);
    const auto report = relative_deviation(reference, estimate);
    const auto again = summarize_deviations(report.relative_deviation, report.summary.frobenius_of_difference,
                                            default_deviation_thresholds());
    EXPECT_EQ(again.max_abs_relative, report.summary.max_abs_relative);
    EXPECT_EQ(again.mean_abs_relative, report.summary.mean_abs_relative);
    EXPECT_EQ(again.flagged_cells, report.summary.flagged_cells);
    EXPECT_EQ(report.relative_deviation.shape(), reference.shape());
    EXPECT_THROW(relative_deviation(reference, Tensor::filled({25}, 1.0)), ShapeMismatch);
}

TEST(RelativeDeviationProperty, IdenticalPositiveTablesGiveZero) {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 20; ++trial) {
        const Tensor x = support::random_positive({4, 3, 2}, rng);
        const auto report = relative_deviation(x, x);
        for (double v : report.relative_deviation.values()) EXPECT_EQ(v, 0.0);
        EXPECT_EQ(report.summary.flagged_cells, 0u);
    }
}

TEST(DistanceMatrix, Examples) {
    const Tensor a = Tensor::matrix({{0, 3}, {4, 0}});
    const Tensor b = Tensor::filled({2, 2}, 0.0);
    const auto single = distance_matrix({{"a", a}});
    EXPECT_EQ(single.names.size(), 1u);
    EXPECT_EQ(single.at(0, 0), 0.0);

    const auto pair = distance_matrix({{"a", a}, {"b", b}});
    EXPECT_EQ(pair.at(0, 1), 5.0);
    EXPECT_EQ(pair.at(1, 0), 5.0);
    EXPECT_THROW(distance_matrix({{"a", a}, {"c", Tensor::filled({4}, 0.0)}}), ShapeMismatch);
}

TEST(DistanceMatrix, MatchesBruteForcePairs) {
    std::mt19937_64 rng(5);
    std::vector<std::pair<std::string, Tensor>> tables;
    for (const char* name : {"real", "ras", "dras"}) tables.emplace_back(name, support::random_positive({5, 5}, rng));
    const auto dm = distance_matrix(tables);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) {
            EXPECT_NEAR(dm.at(i, j), oracle::frobenius_by_loops(tables[i].second.values(), tables[j].second.values()),
                        1e-12);
            EXPECT_EQ(dm.at(i, j), dm.at(j, i));
        }
    for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(dm.at(i, i), 0.0);
}
