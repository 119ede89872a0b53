#pragma once

#include <cstdint>
#include <vector>

namespace emq {

/// Dense row-major tensor of doubles. Rank 0 (empty shape) is a scalar.
/// Values may be non-finite; producers let NaN/Inf propagate so downstream
/// validity checks can observe them.
struct Tensor {
    std::vector<std::int64_t> shape;
    std::vector<double> data;

    Tensor() = default;
    Tensor(std::vector<std::int64_t> shp, std::vector<double> values);

    static Tensor scalar(double v);
    static Tensor zeros(std::vector<std::int64_t> shp);
    static Tensor full(std::vector<std::int64_t> shp, double v);
    /// 1-D tensor from values.
    static Tensor vec(std::vector<double> values);

    std::int64_t numel() const { return static_cast<std::int64_t>(data.size()); }
    bool is_scalar() const { return data.size() == 1; }
    double scalar_value() const;

    bool all_finite() const;

    /// Same data viewed as 1-D.
    Tensor flattened() const;

    double min_value() const;
    double max_value() const;
    double max_abs() const;

    bool operator==(const Tensor& other) const = default;
};

std::int64_t shape_numel(const std::vector<std::int64_t>& shape);

}  // namespace emq
