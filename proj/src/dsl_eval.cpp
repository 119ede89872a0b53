#include "emq/dsl_eval.hpp"

#include <stdexcept>

namespace emq::dsl {

const Tensor& stat_tensor(const LayerStats& stats, StatKind k) {
    switch (k) {
        case StatKind::W: return stats.W;
        case StatKind::G: return stats.G;
        case StatKind::A: return stats.A;
        case StatKind::H: return stats.H;
        case StatKind::V: return stats.V;
    }
    throw std::invalid_argument("stat_tensor: bad kind");
}

namespace {

Tensor run_chain(Tensor v, const UnaryOp* ops, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) v = apply_unary(ops[i], v);
    return v;
}

}  // namespace

std::optional<double> evaluate_layer(const ProxyGenome& g, const LayerStats& stats) {
    return std::visit(
        [&](const auto& v) -> std::optional<double> {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, SequentialGenome>) {
                Tensor x = stat_tensor(stats, v.input).flattened();
                x = run_chain(std::move(x), v.ops.data(), v.ops.size());
                return apply_unary(v.aggregate, x).scalar_value();
            } else if constexpr (std::is_same_v<T, BranchedGenome>) {
                Tensor a = run_chain(stat_tensor(stats, v.input_a).flattened(), v.ops_a.data(),
                                     v.ops_a.size());
                Tensor b = run_chain(stat_tensor(stats, v.input_b).flattened(), v.ops_b.data(),
                                     v.ops_b.size());
                std::optional<Tensor> merged = apply_binary(v.binary, a, b);
                if (!merged) return std::nullopt;
                return apply_unary(v.aggregate, *merged).scalar_value();
            } else {
                std::vector<Tensor> values;
                values.reserve(5);
                values.push_back(stat_tensor(stats, v.inputs[0]).flattened());
                values.push_back(stat_tensor(stats, v.inputs[1]).flattened());
                for (const auto& m : v.middle) {
                    Tensor folded = values[0];
                    for (std::size_t p = 1; p < values.size(); ++p) {
                        std::optional<Tensor> next = apply_binary(m.binary, folded, values[p]);
                        if (!next) return std::nullopt;
                        folded = std::move(*next);
                    }
                    values.push_back(apply_unary(m.unary, folded));
                }
                // Aggregate over the concatenated middle-node outputs.
                std::vector<double> cat;
                for (std::size_t k = 2; k < values.size(); ++k) {
                    const Tensor flat = values[k].flattened();
                    cat.insert(cat.end(), flat.data.begin(), flat.data.end());
                }
                return apply_unary(v.aggregate, Tensor::vec(std::move(cat))).scalar_value();
            }
        },
        g);
}

double config_score_from_layers(const std::vector<double>& layer_scores, const BitConfig& cfg) {
    if (layer_scores.size() != cfg.weight_bits.size()) {
        throw std::invalid_argument("config score: layer count mismatch");
    }
    double s = 0.0;
    for (std::size_t i = 0; i < layer_scores.size(); ++i) {
        s += static_cast<double>(cfg.weight_bits[i]) * layer_scores[i];
    }
    return s;
}

ScoredProxy::ScoredProxy(const ProxyGenome& g, const std::vector<LayerStats>& stats) {
    scores_.reserve(stats.size());
    for (const LayerStats& ls : stats) {
        const std::optional<double> s = evaluate_layer(g, ls);
        if (!s) {
            valid_ = false;
            scores_.clear();
            return;
        }
        scores_.push_back(*s);
    }
}

std::optional<double> ScoredProxy::config_score(const BitConfig& cfg) const {
    if (!valid_) return std::nullopt;
    return config_score_from_layers(scores_, cfg);
}

std::optional<double> score_config(const ProxyGenome& g, const std::vector<LayerStats>& stats,
                                   const BitConfig& cfg) {
    return ScoredProxy(g, stats).config_score(cfg);
}

}  // namespace emq::dsl
