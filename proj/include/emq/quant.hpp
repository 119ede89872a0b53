#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "emq/dataset.hpp"
#include "emq/net.hpp"
#include "emq/tensor.hpp"

namespace emq {

/// Asymmetric uniform quantizer parameters. 32 bits means identity.
struct QuantScheme {
    int bits = 32;
    double scale = 1.0;
    double zero_point = 0.0;

    double qmax() const { return static_cast<double>((std::int64_t{1} << bits) - 1); }
};

/// Per-layer weight bit-widths plus a fixed activation bit-width.
struct BitConfig {
    std::vector<int> weight_bits;
    int activation_bits = 8;

    bool operator==(const BitConfig&) const = default;
};

/// MSE-calibrated scheme: scale candidates are k/100-spaced multipliers of
/// the min-max step over [0.2, 1.2), window centered on the data range.
/// Constant tensors get a 1e-8 scale floor anchored at the constant.
QuantScheme calibrate(const Tensor& t, int bits);

/// clamp(round((x - zp)/scale), 0, 2^bits - 1) * scale + zp, round half to
/// even. 32-bit schemes return the input unchanged.
Tensor quantize_dequantize(const Tensor& t, const QuantScheme& s);

double mse(const Tensor& a, const Tensor& b);

/// Fresh copy of `net` with weights replaced by their calibrated fake-quant
/// reconstruction and activation fake-quant enabled at cfg.activation_bits
/// (calibrated on the calib split of `ds`). Biases and the head stay float.
ReferenceNet apply_bit_config(const ReferenceNet& net, const SyntheticDataset& ds,
                              const BitConfig& cfg);

/// Weight-only size: sum numel_i * bits_i / 8 / 1e6.
double model_size_mb(const std::vector<LayerGeom>& geoms, const std::vector<int>& weight_bits);
double model_size_mb(const ReferenceNet& net, const BitConfig& cfg);

/// Giga bit-operations: sum MACs_i * weight_bits_i * activation_bits / 1e9
/// over quantizable layers.
double compute_bops_g(const std::vector<LayerGeom>& geoms, const BitConfig& cfg);
double compute_bops_g(const ReferenceNet& net, const BitConfig& cfg);

using ConfigScorer = std::function<double(const BitConfig&)>;

struct AssignOptions {
    std::vector<int> palette = {2, 3, 4};
    int activation_bits = 8;
    /// Pins the first and last quantizable layers to 8-bit weights.
    bool pin_first_last_8bit = false;
    /// Enumerate the whole space when it has at most this many configs.
    std::uint64_t exhaustive_limit = 10000;
};

/// Highest-scoring feasible config among candidates (exhaustive enumeration
/// for small spaces, otherwise n_samples deduplicated random draws). Ties
/// prefer smaller model size, then lexicographically smaller config.
/// Throws InfeasibleError when no candidate fits the budget.
BitConfig assign_bits(const ConfigScorer& scorer, const std::vector<LayerGeom>& geoms,
                      double size_budget_mb, int n_samples, std::uint64_t seed,
                      const AssignOptions& opts = {});

}  // namespace emq
