#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <span>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "dras/dras.hpp"

namespace dras::support {

/// Independent lognormal entries; sigma controls heterogeneity.
inline Tensor random_positive(const Shape& shape, std::mt19937_64& rng, double sigma = 0.5,
                              double scale = 1.0) {
    std::lognormal_distribution<double> draw(0.0, sigma);
    std::vector<double> values(detail::product(shape));
    for (auto& v : values) v = scale * draw(rng);
    return Tensor::from_shape(shape, std::move(values));
}

inline Tensor with_zeros(const Tensor& t, double zero_fraction, std::mt19937_64& rng) {
    std::bernoulli_distribution zero(zero_fraction);
    std::vector<double> values(t.values().begin(), t.values().end());
    for (auto& v : values)
        if (zero(rng)) v = 0.0;
    return Tensor(t.dims(), std::move(values));
}

/// Multiplies every entry by the matching entry of `other` (same shape).
inline Tensor hadamard(const Tensor& a, const Tensor& b) {
    std::vector<double> values(a.size());
    for (std::size_t k = 0; k < a.size(); ++k) values[k] = a.values()[k] * b.values()[k];
    return Tensor(a.dims(), std::move(values));
}

inline Tensor scaled(const Tensor& t, double c) {
    std::vector<double> values(t.values().begin(), t.values().end());
    for (auto& v : values) v *= c;
    return Tensor(t.dims(), std::move(values));
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
    double worst = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) worst = std::max(worst, std::abs(a[k] - b[k]));
    return worst;
}

/// Largest per-cell mismatch between the margins of x and their targets.
inline double max_margin_error(const Tensor& x, const MarginSet& margins) {
    double worst = 0.0;
    for (std::size_t d = 0; d < x.rank(); ++d)
        worst = std::max(worst, max_abs_diff(x.margin(d).values(), margins[d].values()));
    return worst;
}

class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                ("dras_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace dras::support
