#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dras/error.hpp"
#include "dras/tensor.hpp"

namespace dras {

/// Square input-output table: intermediate flows x[i][j] from industry i
/// to industry j, closed by the output identities p = u1 + v1, u1 = row
/// sums, and the input identities p = u2 + v2, u2 = column sums.
class IOTable {
public:
    static constexpr double kIdentityTolerance = 1e-9;

    IOTable(Tensor flows, std::vector<double> u1, std::vector<double> u2, std::vector<double> p,
            std::vector<double> v1, std::vector<double> v2)
        : flows_(std::move(flows)), u1_(std::move(u1)), u2_(std::move(u2)), p_(std::move(p)),
          v1_(std::move(v1)), v2_(std::move(v2)) {
        validate();
    }

    /// Derives u1 and u2 from the flows.
    static IOTable from_flows(Tensor flows, std::vector<double> p, std::vector<double> v1,
                              std::vector<double> v2) {
        if (flows.rank() != 2) throw ShapeMismatch("flows must be a 2-D matrix");
        const Tensor u1 = flows.margin(1);
        const Tensor u2 = flows.margin(0);
        return IOTable(std::move(flows), {u1.values().begin(), u1.values().end()},
                       {u2.values().begin(), u2.values().end()}, std::move(p), std::move(v1),
                       std::move(v2));
    }

    std::size_t industries() const noexcept { return flows_.shape()[0]; }
    const Tensor& flows() const noexcept { return flows_; }
    std::span<const double> u1() const noexcept { return u1_; }
    std::span<const double> u2() const noexcept { return u2_; }
    std::span<const double> p() const noexcept { return p_; }
    std::span<const double> v1() const noexcept { return v1_; }
    std::span<const double> v2() const noexcept { return v2_; }

    /// Same borders, new flows (e.g. a balanced estimate). Identities are
    /// rechecked.
    IOTable with_flows(Tensor flows) const { return IOTable(std::move(flows), u1_, u2_, p_, v1_, v2_); }

private:
    void validate() const {
        if (flows_.rank() != 2 || flows_.shape()[0] != flows_.shape()[1])
            throw ShapeMismatch("flows must be a square matrix, got shape " +
                                detail::to_string(flows_.shape()));
        const std::size_t n = flows_.shape()[0];
        for (const auto* v : {&u1_, &u2_, &p_, &v1_, &v2_})
            if (v->size() != n)
                throw ShapeMismatch("border vector of length " + std::to_string(v->size()) +
                                    " for " + std::to_string(n) + " industries");
        const Tensor row_sums = flows_.margin(1);
        const Tensor col_sums = flows_.margin(0);
        for (std::size_t i = 0; i < n; ++i) {
            check(i, "u1 = row sum", u1_[i], row_sums.values()[i]);
            check(i, "p = u1 + v1", p_[i], u1_[i] + v1_[i]);
            check(i, "u2 = column sum", u2_[i], col_sums.values()[i]);
            check(i, "p = u2 + v2", p_[i], u2_[i] + v2_[i]);
        }
    }

    void check(std::size_t i, const char* identity, double lhs, double rhs) const {
        const double scale = std::max({std::abs(lhs), std::abs(rhs), 1.0});
        if (!(std::abs(lhs - rhs) <= kIdentityTolerance * scale))
            throw IdentityViolation(i, lhs, rhs,
                                    std::string("identity ") + identity + " violated for industry " +
                                        flows_.dim(0).labels[i] + ": " + std::to_string(lhs) +
                                        " vs " + std::to_string(rhs));
    }

    Tensor flows_;
    std::vector<double> u1_, u2_, p_, v1_, v2_;
};

/// Denominator used for technical coefficients.
enum class CoefficientConvention {
    /// a[i][j] = x[i][j] / p[j]; consistent with p = L v1.
    TotalResources,
    /// a[i][j] = x[i][j] / u1[j], the receiving industry's row total.
    RowTotal,
};

struct CoefficientMatrix {
    Tensor a;
};

/// Flows per unit of the receiving industry's denominator. A zero
/// denominator is allowed only when the whole column of flows is zero,
/// in which case the coefficient column is zero.
inline CoefficientMatrix technical_coefficients(
    const IOTable& table, CoefficientConvention convention = CoefficientConvention::TotalResources) {
    const std::size_t n = table.industries();
    const auto denominators = convention == CoefficientConvention::TotalResources ? table.p() : table.u1();
    const auto flows = table.flows().values();
    std::vector<double> a(n * n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        const double denom = denominators[j];
        for (std::size_t i = 0; i < n; ++i) {
            const double x = flows[i * n + j];
            if (denom > 0.0) {
                a[i * n + j] = x / denom;
            } else if (x != 0.0) {
                throw ZeroDenominator("industry " + table.flows().dim(1).labels[j] +
                                      " has a zero denominator but receives flow " +
                                      std::to_string(x) + " from industry " +
                                      table.flows().dim(0).labels[i]);
            }
        }
    }
    return {Tensor(table.flows().dims(), std::move(a))};
}

/// Rows or columns of A whose sum reaches 1; with any of these the
/// Neumann series of (I - A)^-1 is not guaranteed to converge.
inline std::vector<std::string> spectral_warnings(const CoefficientMatrix& coefficients) {
    std::vector<std::string> warnings;
    const Tensor& a = coefficients.a;
    const Tensor row_sums = a.margin(1);
    const Tensor col_sums = a.margin(0);
    for (std::size_t i = 0; i < row_sums.size(); ++i)
        if (row_sums.values()[i] >= 1.0)
            warnings.push_back("row " + a.dim(0).labels[i] + " of A sums to " +
                               std::to_string(row_sums.values()[i]) + " >= 1");
    for (std::size_t j = 0; j < col_sums.size(); ++j)
        if (col_sums.values()[j] >= 1.0)
            warnings.push_back("column " + a.dim(1).labels[j] + " of A sums to " +
                               std::to_string(col_sums.values()[j]) + " >= 1");
    return warnings;
}

namespace detail {

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline Eigen::Map<const RowMajorMatrix> as_matrix(std::span<const double> values, std::size_t n) {
    return {values.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)};
}

}  // namespace detail

/// Reciprocal condition estimate below which I - A counts as singular.
inline constexpr double kSingularityThreshold = 1e-12;

/// Total requirements matrix L = (I - A)^-1, computed by an LU solve
/// with partial pivoting.
inline SignedTensor leontief_inverse(const CoefficientMatrix& coefficients) {
    const Tensor& a = coefficients.a;
    if (a.rank() != 2 || a.shape()[0] != a.shape()[1])
        throw ShapeMismatch("coefficient matrix must be square, got shape " +
                            detail::to_string(a.shape()));
    const std::size_t n = a.shape()[0];
    const detail::RowMajorMatrix system =
        detail::RowMajorMatrix::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)) -
        detail::as_matrix(a.values(), n);
    const Eigen::PartialPivLU<detail::RowMajorMatrix> lu(system);
    const double rcond = lu.rcond();
    if (!(rcond >= kSingularityThreshold))
        throw SingularMatrix("I - A is singular (reciprocal condition estimate " +
                             std::to_string(rcond) + ")");
    const detail::RowMajorMatrix inverse = lu.solve(
        detail::RowMajorMatrix::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)));
    if (!inverse.allFinite()) throw SingularMatrix("I - A inverse has non-finite entries");
    return SignedTensor(a.dims(), std::vector<double>(inverse.data(), inverse.data() + n * n));
}

/// Total resources implied by final demand: p = L v1.
inline std::vector<double> predict_resources(const SignedTensor& leontief,
                                             std::span<const double> final_demand) {
    if (leontief.rank() != 2 || leontief.shape()[1] != final_demand.size())
        throw ShapeMismatch("cannot multiply a " + detail::to_string(leontief.shape()) +
                            " matrix by a vector of length " + std::to_string(final_demand.size()));
    const std::size_t rows = leontief.shape()[0];
    const std::size_t cols = leontief.shape()[1];
    const auto l = leontief.values();
    std::vector<double> p(rows, 0.0);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) p[i] += l[i * cols + j] * final_demand[j];
    return p;
}

}  // namespace dras
