#pragma once

#include <cstdint>
#include <optional>
#include <unordered_set>
#include <vector>

#include "emq/dsl_eval.hpp"
#include "emq/genome.hpp"

namespace emq::dsl {

enum class ScreenReason { Ok, Conflict, InvalidScore, Insensitive, Duplicate };

struct ScreenReport {
    bool passed = false;
    ScreenReason reason = ScreenReason::Ok;
};

std::string_view reason_name(ScreenReason r);

/// Canonical hash of the proxy graph: no_op nodes are deleted, then a
/// Weisfeiler-Lehman relabeling runs for 3 iterations with child labels
/// sorted under commutative binary ops. Equal hashes identify genomes that
/// evaluate identically.
std::uint64_t canonical_hash(const ProxyGenome& g);

/// Static rejection of consecutive unary ops that cancel or clash
/// (no_op nodes are skipped when forming pairs; binary nodes break chains).
ScreenReport check_conflicts(const ProxyGenome& g);

/// Rejects scores that carry no ranking signal: non-finite or in {-1, 0, 1}
/// within 1e-12.
bool naive_invalid_check(double score);

struct ScreenCounters {
    long sampled = 0;
    long conflict = 0;
    long invalid = 0;
    long insensitive = 0;
    long duplicate = 0;
    long passed = 0;

    long rejected() const { return conflict + invalid + insensitive + duplicate; }
};

/// CSP pipeline over fixed per-layer statistics and probe configs, in order:
/// conflicts -> layer evaluation -> invalid-score check -> bit-sensitivity
/// check -> duplicate check against previously evaluated hashes.
class Screener {
public:
    Screener(std::vector<LayerStats> stats, std::vector<BitConfig> probe_cfgs);

    /// Probe configs are 5 distinct configs sampled from the palette space.
    static Screener make(std::vector<LayerStats> stats, const std::vector<int>& palette,
                         int activation_bits, std::uint64_t seed);

    struct Outcome {
        ScreenReport report;
        std::vector<double> layer_scores;  // populated when evaluation ran
        std::uint64_t hash = 0;
    };

    Outcome screen(const ProxyGenome& g);

    /// Bit-sensitivity check on this screener's probe configs.
    ScreenReport sensitivity_check(const ProxyGenome& g) const;

    /// Marks a hash as fully evaluated; later identical hashes are rejected
    /// as duplicates.
    void remember(std::uint64_t hash) { seen_.insert(hash); }
    bool seen(std::uint64_t hash) const { return seen_.count(hash) > 0; }

    /// Ablation switch; with screening off every genome passes (scores are
    /// still computed when possible).
    void set_enabled(bool enabled) { enabled_ = enabled; }
    bool enabled() const { return enabled_; }

    const ScreenCounters& counters() const { return counters_; }
    const std::vector<LayerStats>& stats() const { return stats_; }
    const std::vector<BitConfig>& probe_configs() const { return probe_cfgs_; }

private:
    ScreenReport sensitivity_of_scores(const std::vector<double>& layer_scores) const;

    std::vector<LayerStats> stats_;
    std::vector<BitConfig> probe_cfgs_;
    std::unordered_set<std::uint64_t> seen_;
    ScreenCounters counters_;
    bool enabled_ = true;
};

/// Standalone form of the bit-sensitivity check. Throws when fewer than 5
/// probe configs are given or they are all identical.
ScreenReport sensitivity_check(const ProxyGenome& g, const std::vector<LayerStats>& stats,
                               const std::vector<BitConfig>& probe_cfgs);

struct ValidityResult {
    int total = 0;
    int valid = 0;
    double rate() const { return total ? static_cast<double>(valid) / total : 0.0; }
};

/// Fraction of random genomes that survive the content checks (conflicts,
/// invalid score, sensitivity; duplicates are not counted against a genome).
ValidityResult validity_rate(Structure s, bool use_osp, int n_samples,
                             const std::vector<LayerStats>& stats,
                             const std::vector<BitConfig>& probe_cfgs, std::uint64_t seed);

}  // namespace emq::dsl
