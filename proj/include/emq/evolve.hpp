#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

#include "emq/bench.hpp"
#include "emq/genome.hpp"
#include "emq/screen.hpp"
#include "emq/stats.hpp"

namespace emq {

struct SearchConfig {
    int population_size = 20;
    int iterations = 1000;
    double selection_ratio = 0.25;
    double p_crossover = 0.5;
    double p_mutation = 0.5;
    int n_eval_cfgs = 50;
    std::array<double, 3> topk_fractions = {0.2, 0.5, 1.0};
    dsl::Structure structure = dsl::Structure::Branched;
    std::uint64_t seed = 0;
    /// Stop once this many fitness evaluations have happened (0 = no cap).
    long max_evaluations = 0;
    bool use_osp = true;
    bool enable_screening = true;
};

struct Individual {
    dsl::ProxyGenome genome;
    double fitness = -std::numeric_limits<double>::infinity();
    std::uint64_t hash = 0;
    long birth = 0;
};

inline constexpr double kInvalidFitness = -std::numeric_limits<double>::infinity();

/// Mean Spearman@topk over the fixed config sample drawn once from the
/// validation split.
class FitnessEvaluator {
public:
    FitnessEvaluator(const Benchmark& bench, const std::vector<std::int64_t>& entry_indices,
                     int n_cfgs, std::uint64_t seed, std::vector<LayerStats> stats,
                     std::array<double, 3> topk_fractions = {0.2, 0.5, 1.0});

    /// -inf when the genome cannot score every sampled config.
    double operator()(const dsl::ProxyGenome& g) const;
    double fitness_of_scores(const std::vector<double>& config_scores) const;

    const std::vector<BitConfig>& sampled_configs() const { return cfgs_; }
    const std::vector<double>& ground_truth() const { return gt_; }
    const std::vector<LayerStats>& stats() const { return stats_; }

private:
    std::vector<BitConfig> cfgs_;
    std::vector<double> gt_;
    std::vector<LayerStats> stats_;
    std::array<double, 3> fractions_;
};

/// Pool of ceil(r * |population|) random individuals; parents are two
/// distinct uniform picks from it. Throws when the population is smaller
/// than 2.
std::pair<std::size_t, std::size_t> tournament_select(const std::vector<Individual>& population,
                                                      double selection_ratio, Rng& rng);

/// With probability p_c recombines a and b (one-point for sequential, branch
/// exchange for branched, per-slot mixing for dag); otherwise returns a.
/// Parents must share a structure.
dsl::ProxyGenome crossover(const dsl::ProxyGenome& a, const dsl::ProxyGenome& b, double p_c,
                           Rng& rng);

/// With probability p_m resamples one slot (input kind, unary or binary op)
/// using the OSP weights.
dsl::ProxyGenome mutate(const dsl::ProxyGenome& g, double p_m, Rng& rng, bool use_osp = true);

struct GenerationLog {
    int generation = 0;
    double best_fitness = 0.0;
    double mean_fitness = 0.0;
    long evaluated_count = 0;
    dsl::ScreenCounters rejected;
};

struct SearchResult {
    Individual best;
    std::vector<GenerationLog> history;
    dsl::ScreenCounters counters;
    long sampled = 0;
    long evaluated = 0;
    long duplicate_hits = 0;
};

/// Evolution loop: tournament -> crossover -> mutate -> diversity-prompting
/// selection -> screening -> replace-worst. Deterministic given seeds.
SearchResult evolve(const SearchConfig& cfg, const Benchmark& bench,
                    const std::vector<LayerStats>& stats);

/// Best-of-N random valid genomes under the same evaluation accounting.
SearchResult random_search(long budget, const SearchConfig& cfg, const Benchmark& bench,
                           const std::vector<LayerStats>& stats);

}  // namespace emq
