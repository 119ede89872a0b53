#pragma once

#include <cstdint>
#include <vector>

#include "emq/tensor.hpp"

namespace emq {

enum class Split { Train, Calib, Eval };

/// Class-balanced synthetic classification set. Each class occupies an
/// antipodal pair of clusters along a smooth direction pattern, so no linear
/// classifier separates it but a small nonlinear net does.
struct SyntheticDataset {
    std::int64_t n_classes = 0;
    std::int64_t feature_dim = 0;
    std::vector<Tensor> inputs;        // one [feature_dim] tensor per sample
    std::vector<std::int64_t> labels;  // class ids
    std::vector<Split> split;

    std::vector<std::size_t> indices_of(Split s) const;
    /// Stacks the given samples into a [n, feature_dim] batch.
    Tensor batch_inputs(const std::vector<std::size_t>& idx) const;
    Tensor batch_labels(const std::vector<std::size_t>& idx) const;
};

struct DatasetConfig {
    std::int64_t n_classes = 4;
    std::int64_t n_per_class = 256;
    std::int64_t feature_dim = 36;
    double noise_sigma = 0.25;
    std::int64_t calib_total = 64;  // split evenly over classes
    double train_fraction = 0.60;
};

/// Deterministic in `seed`; calib and eval are disjoint and class-balanced.
SyntheticDataset make_dataset(std::uint64_t seed, const DatasetConfig& cfg = {});
SyntheticDataset make_dataset(std::uint64_t seed, std::int64_t n_classes, std::int64_t n_per_class);

}  // namespace emq
