#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string_view>
#include <vector>

#include "emq/dataset.hpp"
#include "emq/net.hpp"
#include "emq/quant.hpp"
#include "emq/stats.hpp"

namespace emq {

enum class BaselineId {
    BParams,
    Hawq,
    HawqV2,
    Ompq,
    Qe,
    Snip,
    Synflow,
    Plain,
    Fisher,
    Emq,
};

std::string_view baseline_name(BaselineId id);
std::optional<BaselineId> baseline_from_name(std::string_view name);
const std::vector<BaselineId>& all_baselines();

using HvpFn = std::function<Tensor(const Tensor&)>;

struct PowerIterationResult {
    double eigenvalue = 0.0;
    bool converged = false;
    int iterations = 0;
};

/// Dominant eigenvalue via power iteration with Rayleigh-quotient estimates.
/// Non-convergence returns the last iterate with converged = false.
PowerIterationResult top_eigenvalue(const HvpFn& hvp_fn, std::int64_t dim, int max_iters = 20,
                                    double tol = 1e-4, std::uint64_t seed = 0);

/// Extra per-layer oracles some baselines need beyond LayerStats.
struct BaselineContext {
    std::vector<HvpFn> layer_hvp;      // layer-restricted task-loss HVP
    std::vector<Tensor> act_grad;      // dL/dz on the calib batch, [B, F] per layer
    std::vector<double> qnoise_var;    // scale^2/12 of the 8-bit weight scheme
    std::vector<double> c_in;          // kernel_size * in_channels
    std::uint64_t seed = 0;
};

BaselineContext make_baseline_context(const ReferenceNet& net, const SyntheticDataset& ds,
                                      std::uint64_t seed);

double baseline_layer_score(BaselineId id, std::size_t layer, const std::vector<LayerStats>& stats,
                            const BaselineContext& ctx);
std::vector<double> baseline_layer_scores(BaselineId id, const std::vector<LayerStats>& stats,
                                          const BaselineContext& ctx);

/// Same bit-weighted sum as the DSL config score.
double baseline_config_score(BaselineId id, const std::vector<LayerStats>& stats,
                             const BaselineContext& ctx, const BitConfig& cfg);

}  // namespace emq
