#pragma once

#include <optional>
#include <vector>

#include "emq/genome.hpp"
#include "emq/quant.hpp"
#include "emq/stats.hpp"

namespace emq::dsl {

const Tensor& stat_tensor(const LayerStats& stats, StatKind k);

/// Executes the proxy graph against one layer's statistics and reduces to a
/// scalar. Structurally impossible evaluations (binary shape mismatch)
/// return nullopt; domain violations surface as non-finite values in the
/// returned score.
std::optional<double> evaluate_layer(const ProxyGenome& g, const LayerStats& stats);

/// Config score sum_i bits_i * layer_score_i from precomputed layer scores.
double config_score_from_layers(const std::vector<double>& layer_scores, const BitConfig& cfg);

/// Per-layer scores computed once and reused across configs.
class ScoredProxy {
public:
    ScoredProxy(const ProxyGenome& g, const std::vector<LayerStats>& stats);

    /// All layers evaluated to a (possibly non-finite) score.
    bool valid() const { return valid_; }
    const std::vector<double>& layer_scores() const { return scores_; }
    std::optional<double> config_score(const BitConfig& cfg) const;

private:
    std::vector<double> scores_;
    bool valid_ = true;
};

/// One-shot convenience around ScoredProxy.
std::optional<double> score_config(const ProxyGenome& g, const std::vector<LayerStats>& stats,
                                   const BitConfig& cfg);

}  // namespace emq::dsl
