#include "emq/screen.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "emq/rng.hpp"

namespace emq::dsl {

namespace {

std::uint64_t mix(std::uint64_t h, std::uint64_t v) {
    h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    h *= 0xff51afd7ed558ccdULL;
    return h ^ (h >> 33);
}

std::uint64_t label_of(std::string_view s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (char c : s) {
        h ^= static_cast<std::uint8_t>(c);
        h *= 1099511628211ULL;
    }
    return h;
}

struct HashGraph {
    struct Node {
        std::uint64_t label;
        std::vector<int> children;
        bool sorted_children = false;  // order-insensitive combination
    };
    std::vector<Node> nodes;
    int root = -1;

    int add(std::uint64_t label, std::vector<int> children = {}, bool sorted = false) {
        nodes.push_back(Node{label, std::move(children), sorted});
        return static_cast<int>(nodes.size()) - 1;
    }
};

int add_stat_node(HashGraph& g, StatKind k) {
    return g.add(label_of(stat_name(k)));
}

int add_chain(HashGraph& g, int below, const UnaryOp* ops, std::size_t n) {
    int cur = below;
    for (std::size_t i = 0; i < n; ++i) {
        if (ops[i] == UnaryOp::NoOp) continue;  // deleted before hashing
        cur = g.add(label_of(unary_name(ops[i])), {cur});
    }
    return cur;
}

HashGraph build_hash_graph(const ProxyGenome& genome) {
    HashGraph g;
    std::visit(
        [&](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, SequentialGenome>) {
                int cur = add_stat_node(g, v.input);
                cur = add_chain(g, cur, v.ops.data(), v.ops.size());
                g.root = g.add(label_of(unary_name(v.aggregate)), {cur});
            } else if constexpr (std::is_same_v<T, BranchedGenome>) {
                int a = add_chain(g, add_stat_node(g, v.input_a), v.ops_a.data(), v.ops_a.size());
                int b = add_chain(g, add_stat_node(g, v.input_b), v.ops_b.data(), v.ops_b.size());
                const int merged =
                    g.add(label_of(binary_name(v.binary)), {a, b}, is_commutative(v.binary));
                g.root = g.add(label_of(unary_name(v.aggregate)), {merged});
            } else {
                std::vector<int> values = {add_stat_node(g, v.inputs[0]),
                                           add_stat_node(g, v.inputs[1])};
                std::vector<int> middles;
                for (const auto& m : v.middle) {
                    int folded = g.add(label_of(binary_name(m.binary)), values,
                                       is_commutative(m.binary));
                    if (m.unary != UnaryOp::NoOp) {
                        folded = g.add(label_of(unary_name(m.unary)), {folded});
                    }
                    middles.push_back(folded);
                    values.push_back(folded);
                }
                // Concatenation order does not affect the aggregation.
                g.root = g.add(label_of(unary_name(v.aggregate)), middles, true);
            }
        },
        genome);
    return g;
}

// Unordered conflict pair over unary op ids; self-pairs allowed.
struct ConflictPair {
    int lo, hi;
    ConflictPair(UnaryOp a, UnaryOp b)
        : lo(std::min(static_cast<int>(a), static_cast<int>(b))),
          hi(std::max(static_cast<int>(a), static_cast<int>(b))) {}
    bool operator<(const ConflictPair& o) const { return lo != o.lo ? lo < o.lo : hi < o.hi; }
};

const std::set<ConflictPair>& conflict_pairs() {
    static const std::set<ConflictPair> pairs = [] {
        std::set<ConflictPair> p;
        p.emplace(UnaryOp::Log, UnaryOp::Exp);
        p.emplace(UnaryOp::Normalize, UnaryOp::MinMaxNormalize);
        p.emplace(UnaryOp::Relu, UnaryOp::Sigmoid);
        p.emplace(UnaryOp::Log, UnaryOp::Softmax);
        p.emplace(UnaryOp::Pow, UnaryOp::Sqrt);
        p.emplace(UnaryOp::Sigmoid, UnaryOp::Softmax);
        p.emplace(UnaryOp::FrobeniusNorm, UnaryOp::Revert);
        p.emplace(UnaryOp::Invert, UnaryOp::Invert);
        p.emplace(UnaryOp::Revert, UnaryOp::Revert);
        p.emplace(UnaryOp::Abs, UnaryOp::Relu);
        const UnaryOp acts[] = {UnaryOp::Relu, UnaryOp::LeakyRelu, UnaryOp::Swish, UnaryOp::Mish,
                                UnaryOp::Tanh};
        for (UnaryOp a : acts) {
            for (UnaryOp b : acts) p.emplace(a, b);
        }
        return p;
    }();
    return pairs;
}

bool chain_has_conflict(const std::vector<UnaryOp>& chain) {
    std::vector<UnaryOp> effective;
    for (UnaryOp op : chain) {
        if (op != UnaryOp::NoOp) effective.push_back(op);
    }
    for (std::size_t i = 0; i + 1 < effective.size(); ++i) {
        if (conflict_pairs().count(ConflictPair(effective[i], effective[i + 1]))) return true;
    }
    return false;
}

}  // namespace

std::string_view reason_name(ScreenReason r) {
    switch (r) {
        case ScreenReason::Ok: return "ok";
        case ScreenReason::Conflict: return "conflict";
        case ScreenReason::InvalidScore: return "invalid_score";
        case ScreenReason::Insensitive: return "insensitive";
        case ScreenReason::Duplicate: return "duplicate";
    }
    return "?";
}

std::uint64_t canonical_hash(const ProxyGenome& genome) {
    HashGraph g = build_hash_graph(genome);
    const std::size_t n = g.nodes.size();
    std::vector<std::uint64_t> labels(n), next(n);
    for (std::size_t i = 0; i < n; ++i) labels[i] = g.nodes[i].label;
    for (int iter = 0; iter < 3; ++iter) {
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<std::uint64_t> kids;
            kids.reserve(g.nodes[i].children.size());
            for (int c : g.nodes[i].children) kids.push_back(labels[static_cast<std::size_t>(c)]);
            if (g.nodes[i].sorted_children) std::sort(kids.begin(), kids.end());
            std::uint64_t h = mix(0x5bd1e995u, labels[i]);
            for (std::uint64_t k : kids) h = mix(h, k);
            next[i] = h;
        }
        labels.swap(next);
    }
    std::vector<std::uint64_t> all = labels;
    std::sort(all.begin(), all.end());
    std::uint64_t h = mix(0xc2b2ae3d27d4eb4fULL, labels[static_cast<std::size_t>(g.root)]);
    for (std::uint64_t v : all) h = mix(h, v);
    return h;
}

ScreenReport check_conflicts(const ProxyGenome& genome) {
    const bool bad = std::visit(
        [&](const auto& v) -> bool {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, SequentialGenome>) {
                // Searched unary slots only; the fixed aggregation node is a
                // graph role, not part of the operation chain.
                return chain_has_conflict({v.ops.begin(), v.ops.end()});
            } else if constexpr (std::is_same_v<T, BranchedGenome>) {
                // The binary node breaks adjacency, so the aggregate never
                // pairs with a branch op.
                return chain_has_conflict({v.ops_a[0], v.ops_a[1]}) ||
                       chain_has_conflict({v.ops_b[0], v.ops_b[1]});
            } else {
                (void)v;  // middle nodes hold single unary ops; no chains form
                return false;
            }
        },
        genome);
    if (bad) return ScreenReport{false, ScreenReason::Conflict};
    return ScreenReport{true, ScreenReason::Ok};
}

bool naive_invalid_check(double score) {
    if (!std::isfinite(score)) return true;
    constexpr double tol = 1e-12;
    return std::fabs(score) <= tol || std::fabs(score - 1.0) <= tol || std::fabs(score + 1.0) <= tol;
}

Screener::Screener(std::vector<LayerStats> stats, std::vector<BitConfig> probe_cfgs)
    : stats_(std::move(stats)), probe_cfgs_(std::move(probe_cfgs)) {
    if (probe_cfgs_.size() < 5) throw std::invalid_argument("screener: need at least 5 probe configs");
    const bool all_equal = std::all_of(probe_cfgs_.begin(), probe_cfgs_.end(),
                                       [&](const BitConfig& c) { return c == probe_cfgs_[0]; });
    if (all_equal) throw std::invalid_argument("screener: probe configs are all identical");
}

Screener Screener::make(std::vector<LayerStats> stats, const std::vector<int>& palette,
                        int activation_bits, std::uint64_t seed) {
    if (palette.size() < 2) throw std::invalid_argument("screener: palette too small for probes");
    Rng rng = Rng::stream(seed, "probe-configs");
    std::set<std::vector<int>> distinct;
    const std::size_t layers = stats.size();
    while (distinct.size() < 5) {
        std::vector<int> bits(layers);
        for (auto& b : bits) b = palette[rng.next_below(palette.size())];
        distinct.insert(std::move(bits));
    }
    std::vector<BitConfig> probes;
    for (const auto& bits : distinct) probes.push_back(BitConfig{bits, activation_bits});
    return Screener(std::move(stats), std::move(probes));
}

ScreenReport Screener::sensitivity_of_scores(const std::vector<double>& layer_scores) const {
    std::vector<double> cfg_scores;
    cfg_scores.reserve(probe_cfgs_.size());
    for (const BitConfig& cfg : probe_cfgs_) {
        const double s = config_score_from_layers(layer_scores, cfg);
        if (!std::isfinite(s)) return ScreenReport{false, ScreenReason::InvalidScore};
        cfg_scores.push_back(s);
    }
    double mean = 0.0;
    for (double s : cfg_scores) mean += s;
    mean /= static_cast<double>(cfg_scores.size());
    double var = 0.0;
    for (double s : cfg_scores) var += (s - mean) * (s - mean);
    const double sd = std::sqrt(var / static_cast<double>(cfg_scores.size()));
    if (sd < 1e-12 * std::max(1.0, std::fabs(mean))) {
        return ScreenReport{false, ScreenReason::Insensitive};
    }
    return ScreenReport{true, ScreenReason::Ok};
}

Screener::Outcome Screener::screen(const ProxyGenome& g) {
    ++counters_.sampled;
    Outcome out;
    out.hash = canonical_hash(g);

    if (enabled_) {
        const ScreenReport conflict = check_conflicts(g);
        if (!conflict.passed) {
            ++counters_.conflict;
            out.report = conflict;
            return out;
        }
    }

    const ScoredProxy scored(g, stats_);
    if (scored.valid()) out.layer_scores = scored.layer_scores();

    if (!enabled_) {
        out.report = ScreenReport{true, ScreenReason::Ok};
        ++counters_.passed;
        return out;
    }

    if (!scored.valid() ||
        std::any_of(out.layer_scores.begin(), out.layer_scores.end(), naive_invalid_check)) {
        ++counters_.invalid;
        out.report = ScreenReport{false, ScreenReason::InvalidScore};
        return out;
    }

    const ScreenReport sens = sensitivity_of_scores(out.layer_scores);
    if (!sens.passed) {
        if (sens.reason == ScreenReason::Insensitive) ++counters_.insensitive;
        else ++counters_.invalid;
        out.report = sens;
        return out;
    }

    if (seen_.count(out.hash)) {
        ++counters_.duplicate;
        out.report = ScreenReport{false, ScreenReason::Duplicate};
        return out;
    }

    ++counters_.passed;
    out.report = ScreenReport{true, ScreenReason::Ok};
    return out;
}

ScreenReport Screener::sensitivity_check(const ProxyGenome& g) const {
    const ScoredProxy scored(g, stats_);
    if (!scored.valid()) return ScreenReport{false, ScreenReason::InvalidScore};
    return sensitivity_of_scores(scored.layer_scores());
}

ScreenReport sensitivity_check(const ProxyGenome& g, const std::vector<LayerStats>& stats,
                               const std::vector<BitConfig>& probe_cfgs) {
    Screener s(stats, probe_cfgs);
    return s.sensitivity_check(g);
}

ValidityResult validity_rate(Structure s, bool use_osp, int n_samples,
                             const std::vector<LayerStats>& stats,
                             const std::vector<BitConfig>& probe_cfgs, std::uint64_t seed) {
    Screener screener(stats, probe_cfgs);  // fresh seen-set; duplicates cannot trigger
    Rng rng = Rng::stream(seed, "validity-samples");
    ValidityResult out;
    out.total = n_samples;
    for (int i = 0; i < n_samples; ++i) {
        const ProxyGenome g = sample_genome(s, rng, use_osp);
        if (screener.screen(g).report.passed) ++out.valid;
    }
    return out;
}

}  // namespace emq::dsl
