#pragma once

#include <cstdint>
#include <vector>

#include "emq/autodiff.hpp"
#include "emq/dataset.hpp"
#include "emq/net.hpp"
#include "emq/tensor.hpp"

namespace emq {

/// Per-layer statistics bundle consumed by proxies: weights W, task-loss
/// gradient G, calibration activations A (one row per sample), Hutchinson
/// Hessian-diagonal estimate H (flat, same length as W), and the virtual
/// gradient V of the synaptic-flow loss (all-ones input, absolute-valued
/// parameters).
struct LayerStats {
    Tensor W;
    Tensor G;
    Tensor A;
    Tensor H;
    Tensor V;
};

/// Elementwise Hessian-diagonal estimator: mean over probes of v .* (H v)
/// with Rademacher v and central-difference HVPs.
Tensor hutchinson_diag(const ad::GradFn& grad_at, const Tensor& theta, int probes,
                       std::uint64_t seed, double step_base = 1e-3);

inline constexpr int kSearchProbes = 8;  // default for search-time statistics
inline constexpr int kOracleProbes = 64;

/// Statistics for every quantizable layer on the calibration split.
/// Deterministic given (net, dataset, seed, probes); the input net is not
/// modified. Throws if any statistic comes out non-finite.
std::vector<LayerStats> extract_stats(const ReferenceNet& net, const SyntheticDataset& ds,
                                      std::uint64_t seed, int n_hutchinson_probes = kSearchProbes);

}  // namespace emq
