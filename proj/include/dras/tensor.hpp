#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "dras/error.hpp"

namespace dras {

using Index = std::vector<std::size_t>;
using Shape = std::vector<std::size_t>;

/// A named tensor axis. Labels are report/file metadata only; identity is
/// by position.
struct Dim {
    std::string name;
    std::size_t size = 0;
    std::vector<std::string> labels;
};

/// Value domain of a tensor.
struct NonNegative {
    static constexpr const char* description = "finite and nonnegative";
    static bool admits(double v) noexcept { return v >= 0.0 && std::isfinite(v); }
};

struct AnySign {
    static constexpr const char* description = "any";
    static bool admits(double) noexcept { return true; }
};

namespace detail {

inline std::size_t product(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

inline std::string to_string(const Index& index) {
    std::string out = "(";
    for (std::size_t k = 0; k < index.size(); ++k) {
        if (k > 0) out += ",";
        out += std::to_string(index[k]);
    }
    return out + ")";
}

/// Row-major view of one axis: the tensor factors as outer x size x inner,
/// and the flat offset of element (o, k, i) is (o * size + k) * inner + i.
/// Fiber (o, i) maps to flat offset o * inner + i of the margin over the axis.
struct AxisSplit {
    std::size_t outer = 1;
    std::size_t size = 1;
    std::size_t inner = 1;

    AxisSplit(const Shape& shape, std::size_t d) {
        for (std::size_t k = 0; k < d; ++k) outer *= shape[k];
        size = shape[d];
        for (std::size_t k = d + 1; k < shape.size(); ++k) inner *= shape[k];
    }
};

/// Sums `values` (row-major over `shape`) along axis d into `out`.
inline void sum_along(std::span<const double> values, const Shape& shape, std::size_t d,
                      std::span<double> out) {
    const AxisSplit s(shape, d);
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t o = 0; o < s.outer; ++o) {
        double* dst = out.data() + o * s.inner;
        const double* src = values.data() + o * s.size * s.inner;
        for (std::size_t k = 0; k < s.size; ++k, src += s.inner)
            for (std::size_t i = 0; i < s.inner; ++i) dst[i] += src[i];
    }
}

inline Shape drop_axis(const Shape& shape, std::size_t d) {
    Shape out;
    out.reserve(shape.size() - 1);
    for (std::size_t k = 0; k < shape.size(); ++k)
        if (k != d) out.push_back(shape[k]);
    return out;
}

}  // namespace detail

/// Dense D-dimensional array in row-major order with named axes.
///
/// The `Policy` fixes the admissible value domain; `Tensor` is the
/// nonnegative instantiation used for flows, margins and balancing, and
/// `SignedTensor` carries differences, deviations and inverses.
template <class Policy>
class BasicTensor {
public:
    BasicTensor() : BasicTensor(std::vector<Dim>{}, std::vector<double>{0.0}) {}

    BasicTensor(std::vector<Dim> dims, std::vector<double> values)
        : dims_(std::move(dims)), values_(std::move(values)) {
        normalize_dims();
        if (values_.size() != detail::product(shape_))
            throw ShapeMismatch("tensor has " + std::to_string(values_.size()) +
                                " values but its dimensions hold " +
                                std::to_string(detail::product(shape_)));
        for (std::size_t k = 0; k < values_.size(); ++k)
            if (!Policy::admits(values_[k]))
                throw NegativeValue("value " + std::to_string(values_[k]) + " at flat offset " +
                                    std::to_string(k) + " is not " + Policy::description);
    }

    /// Unnamed axes get the names d0, d1, ...
    static BasicTensor from_shape(const Shape& shape, std::vector<double> values) {
        std::vector<Dim> dims;
        dims.reserve(shape.size());
        for (std::size_t k = 0; k < shape.size(); ++k)
            dims.push_back(Dim{"d" + std::to_string(k), shape[k], {}});
        return BasicTensor(std::move(dims), std::move(values));
    }

    static BasicTensor filled(const Shape& shape, double value) {
        return from_shape(shape, std::vector<double>(detail::product(shape), value));
    }

    /// 2-D convenience constructor from nested rows.
    static BasicTensor matrix(std::initializer_list<std::initializer_list<double>> rows) {
        const std::size_t n_rows = rows.size();
        const std::size_t n_cols = n_rows == 0 ? 0 : rows.begin()->size();
        std::vector<double> values;
        values.reserve(n_rows * n_cols);
        for (const auto& row : rows) {
            if (row.size() != n_cols) throw ShapeMismatch("ragged matrix rows");
            values.insert(values.end(), row.begin(), row.end());
        }
        return from_shape({n_rows, n_cols}, std::move(values));
    }

    static BasicTensor vector(std::vector<double> values) {
        const std::size_t n = values.size();
        return from_shape({n}, std::move(values));
    }

    std::size_t rank() const noexcept { return dims_.size(); }
    std::size_t size() const noexcept { return values_.size(); }
    const Shape& shape() const noexcept { return shape_; }
    const std::vector<Dim>& dims() const noexcept { return dims_; }
    const Dim& dim(std::size_t d) const { return dims_.at(d); }
    std::span<const double> values() const noexcept { return values_; }

    std::size_t offset(const Index& index) const {
        if (index.size() != rank())
            throw IndexOutOfRange("index " + detail::to_string(index) + " has " +
                                  std::to_string(index.size()) + " components, tensor rank is " +
                                  std::to_string(rank()));
        std::size_t flat = 0;
        for (std::size_t k = 0; k < rank(); ++k) {
            if (index[k] >= shape_[k])
                throw IndexOutOfRange("index " + detail::to_string(index) + " out of bounds in dimension " +
                                      std::to_string(k) + " of size " + std::to_string(shape_[k]));
            flat = flat * shape_[k] + index[k];
        }
        return flat;
    }

    Index unravel(std::size_t flat) const {
        Index index(rank());
        for (std::size_t k = rank(); k-- > 0;) {
            index[k] = flat % shape_[k];
            flat /= shape_[k];
        }
        return index;
    }

    double get(const Index& index) const { return values_[offset(index)]; }

    void set(const Index& index, double value) {
        const std::size_t flat = offset(index);
        if (!Policy::admits(value))
            throw NegativeValue("cannot store value " + std::to_string(value) + " at " +
                                detail::to_string(index) + ": not " + Policy::description);
        values_[flat] = value;
    }

    double sum() const { return std::accumulate(values_.begin(), values_.end(), 0.0); }

    /// Sum over axis d. The result keeps the other axes in order.
    BasicTensor margin(std::size_t d) const {
        if (d >= rank())
            throw IndexOutOfRange("dimension " + std::to_string(d) + " out of range for rank " +
                                  std::to_string(rank()));
        std::vector<Dim> dims;
        for (std::size_t k = 0; k < rank(); ++k)
            if (k != d) dims.push_back(dims_[k]);
        std::vector<double> out(detail::product(detail::drop_axis(shape_, d)));
        detail::sum_along(values_, shape_, d, out);
        return BasicTensor(std::move(dims), std::move(out), Unchecked{});
    }

    bool same_shape(const Shape& other) const noexcept { return shape_ == other; }

    template <class OtherPolicy>
    bool same_shape(const BasicTensor<OtherPolicy>& other) const noexcept {
        return shape_ == other.shape();
    }

    /// Converts to another value domain, validating the values.
    template <class OtherPolicy>
    BasicTensor<OtherPolicy> as() const {
        return BasicTensor<OtherPolicy>(dims_, values_);
    }

    friend bool operator==(const BasicTensor& a, const BasicTensor& b) {
        return a.shape_ == b.shape_ && a.values_ == b.values_;
    }

private:
    template <class>
    friend class BasicTensor;
    struct Unchecked {};

    BasicTensor(std::vector<Dim> dims, std::vector<double> values, Unchecked)
        : dims_(std::move(dims)), values_(std::move(values)) {
        normalize_dims();
    }

    void normalize_dims() {
        shape_.clear();
        std::unordered_set<std::string> names;
        for (auto& dim : dims_) {
            if (dim.size == 0 && !dim.labels.empty()) dim.size = dim.labels.size();
            if (dim.size == 0) throw InvalidArgument("dimension '" + dim.name + "' has size 0");
            if (!names.insert(dim.name).second)
                throw InvalidArgument("duplicate dimension name '" + dim.name + "'");
            if (dim.labels.empty()) {
                dim.labels.reserve(dim.size);
                for (std::size_t k = 0; k < dim.size; ++k) dim.labels.push_back(std::to_string(k));
            } else if (dim.labels.size() != dim.size) {
                throw InvalidArgument("dimension '" + dim.name + "' has " +
                                      std::to_string(dim.labels.size()) + " labels for size " +
                                      std::to_string(dim.size));
            }
            shape_.push_back(dim.size);
        }
    }

    std::vector<Dim> dims_;
    Shape shape_;
    std::vector<double> values_;
};

using Tensor = BasicTensor<NonNegative>;
using SignedTensor = BasicTensor<AnySign>;

template <class Policy>
BasicTensor<Policy> margin(const BasicTensor<Policy>& t, std::size_t d) {
    return t.margin(d);
}

template <class Policy>
double element_get(const BasicTensor<Policy>& t, const Index& index) {
    return t.get(index);
}

template <class Policy>
void element_set(BasicTensor<Policy>& t, const Index& index, double value) {
    t.set(index, value);
}

/// One target margin per dimension of a parent tensor; entry d is the sum
/// over axis d and has the parent's axes with d removed.
class MarginSet {
public:
    MarginSet(std::vector<Dim> parent_dims, std::vector<Tensor> margins)
        : parent_dims_(std::move(parent_dims)), margins_(std::move(margins)) {
        for (auto& dim : parent_dims_)
            if (dim.size == 0) dim.size = dim.labels.size();
        if (margins_.size() != parent_dims_.size())
            throw ShapeMismatch("expected " + std::to_string(parent_dims_.size()) +
                                " margins, got " + std::to_string(margins_.size()));
        for (std::size_t d = 0; d < margins_.size(); ++d) {
            const Shape expected = detail::drop_axis(parent_shape(), d);
            if (margins_[d].shape() != expected)
                throw ShapeMismatch("margin " + std::to_string(d) + " has shape " +
                                    detail::to_string(margins_[d].shape()) + ", expected " +
                                    detail::to_string(expected));
        }
    }

    /// Margins of an existing tensor; always compatible.
    static MarginSet of(const Tensor& t) {
        std::vector<Tensor> margins;
        margins.reserve(t.rank());
        for (std::size_t d = 0; d < t.rank(); ++d) margins.push_back(t.margin(d));
        return MarginSet(t.dims(), std::move(margins));
    }

    std::size_t rank() const noexcept { return margins_.size(); }
    const Tensor& operator[](std::size_t d) const { return margins_.at(d); }
    const std::vector<Tensor>& margins() const noexcept { return margins_; }
    const std::vector<Dim>& parent_dims() const noexcept { return parent_dims_; }

    Shape parent_shape() const {
        Shape shape;
        for (const auto& dim : parent_dims_) shape.push_back(dim.size);
        return shape;
    }

private:
    std::vector<Dim> parent_dims_;
    std::vector<Tensor> margins_;
};

}  // namespace dras
