#include "emq/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "emq/errors.hpp"
#include "emq/rng.hpp"

namespace emq {

std::int64_t shape_numel(const std::vector<std::int64_t>& shape) {
    std::int64_t n = 1;
    for (std::int64_t d : shape) n *= d;
    return n;
}

Tensor::Tensor(std::vector<std::int64_t> shp, std::vector<double> values)
    : shape(std::move(shp)), data(std::move(values)) {
    for (std::int64_t d : shape) {
        if (d <= 0) throw ShapeError("tensor: non-positive extent in shape");
    }
    if (shape_numel(shape) != static_cast<std::int64_t>(data.size())) {
        throw ShapeError("tensor: shape/data size mismatch");
    }
}

Tensor Tensor::scalar(double v) { return Tensor({}, {v}); }

Tensor Tensor::zeros(std::vector<std::int64_t> shp) {
    auto n = shape_numel(shp);
    return Tensor(std::move(shp), std::vector<double>(static_cast<std::size_t>(n), 0.0));
}

Tensor Tensor::full(std::vector<std::int64_t> shp, double v) {
    auto n = shape_numel(shp);
    return Tensor(std::move(shp), std::vector<double>(static_cast<std::size_t>(n), v));
}

Tensor Tensor::vec(std::vector<double> values) {
    auto n = static_cast<std::int64_t>(values.size());
    return Tensor({n}, std::move(values));
}

double Tensor::scalar_value() const {
    if (data.size() != 1) throw ShapeError("tensor: scalar_value on non-scalar");
    return data[0];
}

bool Tensor::all_finite() const {
    return std::all_of(data.begin(), data.end(), [](double v) { return std::isfinite(v); });
}

Tensor Tensor::flattened() const { return Tensor({numel()}, data); }

double Tensor::min_value() const { return *std::min_element(data.begin(), data.end()); }
double Tensor::max_value() const { return *std::max_element(data.begin(), data.end()); }

double Tensor::max_abs() const {
    double m = 0.0;
    for (double v : data) m = std::max(m, std::fabs(v));
    return m;
}

std::vector<std::size_t> Rng::sample_without_replacement(std::size_t n, std::size_t k) {
    if (k > n) throw std::invalid_argument("sample_without_replacement: k > n");
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    // Partial Fisher-Yates: only the first k slots are needed.
    for (std::size_t i = 0; i < k; ++i) {
        std::size_t j = i + next_below(n - i);
        std::swap(idx[i], idx[j]);
    }
    idx.resize(k);
    return idx;
}

}  // namespace emq
