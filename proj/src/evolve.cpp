#include "emq/evolve.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "emq/metrics.hpp"

namespace emq {

namespace {

using dsl::ProxyGenome;
using dsl::ScreenReason;
using dsl::Screener;
using dsl::Structure;

}  // namespace

FitnessEvaluator::FitnessEvaluator(const Benchmark& bench,
                                   const std::vector<std::int64_t>& entry_indices, int n_cfgs,
                                   std::uint64_t seed, std::vector<LayerStats> stats,
                                   std::array<double, 3> topk_fractions)
    : stats_(std::move(stats)), fractions_(topk_fractions) {
    if (entry_indices.size() < 2) throw std::invalid_argument("fitness: split too small");
    const auto n = std::min<std::size_t>(static_cast<std::size_t>(n_cfgs), entry_indices.size());
    if (n < 2) throw std::invalid_argument("fitness: need at least 2 configs");
    Rng rng = Rng::stream(seed, "fitness-sample");
    const std::vector<std::size_t> picks = rng.sample_without_replacement(entry_indices.size(), n);
    for (std::size_t p : picks) {
        const BenchmarkEntry& e = bench.query_by_index(entry_indices[p]);
        cfgs_.push_back(BitConfig{e.bit_cfg, bench.activation_bits});
        gt_.push_back(e.accuracy);
    }
}

double FitnessEvaluator::fitness_of_scores(const std::vector<double>& config_scores) const {
    if (config_scores.size() != gt_.size()) throw std::invalid_argument("fitness: score count mismatch");
    for (double s : config_scores) {
        if (!std::isfinite(s)) return kInvalidFitness;
    }
    double acc = 0.0;
    for (double f : fractions_) acc += spearman_at_topk(gt_, config_scores, f);
    return acc / static_cast<double>(fractions_.size());
}

double FitnessEvaluator::operator()(const ProxyGenome& g) const {
    const dsl::ScoredProxy scored(g, stats_);
    if (!scored.valid()) return kInvalidFitness;
    std::vector<double> est;
    est.reserve(cfgs_.size());
    for (const BitConfig& cfg : cfgs_) {
        const auto s = scored.config_score(cfg);
        if (!s || !std::isfinite(*s)) return kInvalidFitness;
        est.push_back(*s);
    }
    return fitness_of_scores(est);
}

std::pair<std::size_t, std::size_t> tournament_select(const std::vector<Individual>& population,
                                                      double selection_ratio, Rng& rng) {
    const std::size_t n = population.size();
    if (n < 2) throw std::invalid_argument("tournament_select: population must have >= 2");
    auto pool_size = static_cast<std::size_t>(
        std::ceil(selection_ratio * static_cast<double>(n)));
    pool_size = std::clamp<std::size_t>(pool_size, 2, n);
    std::vector<std::size_t> pool = rng.sample_without_replacement(n, pool_size);
    // GetTopk with k = pool size keeps the whole pool ranked by fitness.
    std::sort(pool.begin(), pool.end(), [&](std::size_t a, std::size_t b) {
        if (population[a].fitness != population[b].fitness) {
            return population[a].fitness > population[b].fitness;
        }
        return a < b;
    });
    const std::size_t first = pool[rng.next_below(pool.size())];
    std::size_t second = pool[rng.next_below(pool.size())];
    while (second == first && pool.size() > 1) second = pool[rng.next_below(pool.size())];
    return {first, second};
}

namespace {

template <typename T>
T pick(Rng& rng, const T& a, const T& b) {
    return rng.bernoulli(0.5) ? a : b;
}

ProxyGenome crossover_impl(const ProxyGenome& ga, const ProxyGenome& gb, Rng& rng) {
    if (const auto* a = std::get_if<dsl::SequentialGenome>(&ga)) {
        const auto& b = std::get<dsl::SequentialGenome>(gb);
        // One-point exchange over the slot list [input, op0..op3, aggregate].
        dsl::SequentialGenome child = *a;
        const int point = rng.next_int(1, 5);
        for (int s = point; s < 6; ++s) {
            if (s >= 1 && s <= 4) child.ops[static_cast<std::size_t>(s - 1)] = b.ops[static_cast<std::size_t>(s - 1)];
            if (s == 5) child.aggregate = b.aggregate;
        }
        return child;
    }
    if (const auto* a = std::get_if<dsl::BranchedGenome>(&ga)) {
        const auto& b = std::get<dsl::BranchedGenome>(gb);
        // One branch from each parent, merge op from either.
        dsl::BranchedGenome child;
        const bool a_first = rng.bernoulli(0.5);
        if (a_first) {
            child.input_a = a->input_a;
            child.ops_a = a->ops_a;
        } else {
            child.input_a = a->input_b;
            child.ops_a = a->ops_b;
        }
        if (rng.bernoulli(0.5)) {
            child.input_b = b.input_a;
            child.ops_b = b.ops_a;
        } else {
            child.input_b = b.input_b;
            child.ops_b = b.ops_b;
        }
        child.binary = pick(rng, a->binary, b.binary);
        child.aggregate = pick(rng, a->aggregate, b.aggregate);
        return child;
    }
    const auto& a = std::get<dsl::DagGenome>(ga);
    const auto& b = std::get<dsl::DagGenome>(gb);
    // Random subset of node slots comes from each parent.
    dsl::DagGenome child = a;
    for (std::size_t i = 0; i < child.inputs.size(); ++i) {
        if (rng.bernoulli(0.5)) child.inputs[i] = b.inputs[i];
    }
    for (std::size_t i = 0; i < child.middle.size(); ++i) {
        if (rng.bernoulli(0.5)) child.middle[i] = b.middle[i];
    }
    return child;
}

}  // namespace

ProxyGenome crossover(const ProxyGenome& a, const ProxyGenome& b, double p_c, Rng& rng) {
    if (structure_of(a) != structure_of(b)) {
        throw std::invalid_argument("crossover: parents have different structures");
    }
    if (!rng.bernoulli(p_c)) return a;
    return crossover_impl(a, b, rng);
}

ProxyGenome mutate(const ProxyGenome& g, double p_m, Rng& rng, bool use_osp) {
    if (!rng.bernoulli(p_m)) return g;
    ProxyGenome out = g;
    if (auto* s = std::get_if<dsl::SequentialGenome>(&out)) {
        const int slot = rng.next_int(0, 4);  // input + 4 ops
        if (slot == 0) s->input = dsl::sample_stat(rng);
        else s->ops[static_cast<std::size_t>(slot - 1)] = dsl::sample_unary(rng, use_osp);
    } else if (auto* br = std::get_if<dsl::BranchedGenome>(&out)) {
        const int slot = rng.next_int(0, 6);  // 2 inputs + 4 ops + binary
        switch (slot) {
            case 0: br->input_a = dsl::sample_stat(rng); break;
            case 1: br->input_b = dsl::sample_stat(rng); break;
            case 2: br->ops_a[0] = dsl::sample_unary(rng, use_osp); break;
            case 3: br->ops_a[1] = dsl::sample_unary(rng, use_osp); break;
            case 4: br->ops_b[0] = dsl::sample_unary(rng, use_osp); break;
            case 5: br->ops_b[1] = dsl::sample_unary(rng, use_osp); break;
            case 6: br->binary = dsl::sample_binary(rng, use_osp); break;
        }
    } else {
        auto& d = std::get<dsl::DagGenome>(out);
        const int slot = rng.next_int(0, 7);  // 2 inputs + 3 x (binary, unary)
        if (slot < 2) {
            d.inputs[static_cast<std::size_t>(slot)] = dsl::sample_stat(rng);
        } else {
            const auto node = static_cast<std::size_t>((slot - 2) / 2);
            if ((slot - 2) % 2 == 0) d.middle[node].binary = dsl::sample_binary(rng, use_osp);
            else d.middle[node].unary = dsl::sample_unary(rng, use_osp);
        }
    }
    return out;
}

namespace {

struct EvalBookkeeping {
    long evaluated = 0;
    long duplicate_hits = 0;
};

// Screens and, on success, evaluates; remembers evaluated hashes so equal
// canonical forms are never fitness-evaluated twice.
std::optional<Individual> screen_and_evaluate(const ProxyGenome& g, Screener& screener,
                                              const FitnessEvaluator& fitness,
                                              EvalBookkeeping& book, long birth) {
    const Screener::Outcome outcome = screener.screen(g);
    if (!outcome.report.passed) {
        if (outcome.report.reason == ScreenReason::Duplicate) ++book.duplicate_hits;
        return std::nullopt;
    }
    ++book.evaluated;
    const double f = fitness(g);
    screener.remember(outcome.hash);
    if (f == kInvalidFitness && screener.enabled()) return std::nullopt;
    return Individual{g, f, outcome.hash, birth};
}

GenerationLog make_log(int generation, const std::vector<Individual>& pop, long evaluated,
                       const dsl::ScreenCounters& counters) {
    GenerationLog log;
    log.generation = generation;
    log.evaluated_count = evaluated;
    log.rejected = counters;
    double best = kInvalidFitness, sum = 0.0;
    for (const Individual& ind : pop) {
        best = std::max(best, ind.fitness);
        sum += ind.fitness;
    }
    log.best_fitness = best;
    log.mean_fitness = pop.empty() ? 0.0 : sum / static_cast<double>(pop.size());
    return log;
}

}  // namespace

SearchResult evolve(const SearchConfig& cfg, const Benchmark& bench,
                    const std::vector<LayerStats>& stats) {
    if (cfg.population_size < 2) throw std::invalid_argument("evolve: population too small");
    auto [val_idx, test_idx] = split_validation_test(bench, bench.split_seed);
    (void)test_idx;
    const FitnessEvaluator fitness(bench, val_idx, cfg.n_eval_cfgs, cfg.seed, stats,
                                   cfg.topk_fractions);
    Screener screener = Screener::make(stats, bench.palette, bench.activation_bits, cfg.seed);
    screener.set_enabled(cfg.enable_screening);

    Rng init_rng = Rng::stream(cfg.seed, "init");
    Rng select_rng = Rng::stream(cfg.seed, "selection");
    Rng cross_rng = Rng::stream(cfg.seed, "crossover");
    Rng mut_rng = Rng::stream(cfg.seed, "mutation");
    Rng dps_rng = Rng::stream(cfg.seed, "dps");

    SearchResult res;
    EvalBookkeeping book;
    std::vector<Individual> pop;
    long birth = 0;

    const long init_cap = 100000;
    long attempts = 0;
    while (static_cast<int>(pop.size()) < cfg.population_size) {
        if (++attempts > init_cap) {
            throw std::runtime_error("evolve: could not assemble initial population");
        }
        const ProxyGenome g = dsl::sample_genome(cfg.structure, init_rng, cfg.use_osp);
        auto ind = screen_and_evaluate(g, screener, fitness, book, birth);
        if (ind) {
            ++birth;
            pop.push_back(std::move(*ind));
        }
    }
    res.history.push_back(make_log(0, pop, book.evaluated, screener.counters()));

    for (int gen = 1; gen <= cfg.iterations; ++gen) {
        if (cfg.max_evaluations > 0 && book.evaluated >= cfg.max_evaluations) break;

        std::optional<Individual> offspring;
        const int retry_cap = 500;
        for (int retry = 0; retry < retry_cap && !offspring; ++retry) {
            const auto [pa, pb] = tournament_select(pop, cfg.selection_ratio, select_rng);
            const ProxyGenome child = crossover(pop[pa].genome, pop[pb].genome, cfg.p_crossover,
                                                cross_rng);
            const ProxyGenome mutant = mutate(child, cfg.p_mutation, mut_rng, cfg.use_osp);
            auto m = screen_and_evaluate(mutant, screener, fitness, book, birth);

            // Diversity-prompting selection: a fresh random genome competes
            // with the mutant; the fitter valid one becomes the offspring.
            const ProxyGenome rand_g = dsl::sample_genome(cfg.structure, dps_rng, cfg.use_osp);
            auto r = screen_and_evaluate(rand_g, screener, fitness, book, birth);

            if (m && r) offspring = r->fitness > m->fitness ? std::move(r) : std::move(m);
            else if (m) offspring = std::move(m);
            else if (r) offspring = std::move(r);
        }
        if (!offspring) {
            throw std::runtime_error("evolve: offspring generation stalled at generation " +
                                     std::to_string(gen));
        }
        offspring->birth = birth++;
        pop.push_back(std::move(*offspring));

        // Remove the worst; ties evict the older individual.
        std::size_t worst = 0;
        for (std::size_t i = 1; i < pop.size(); ++i) {
            if (pop[i].fitness < pop[worst].fitness ||
                (pop[i].fitness == pop[worst].fitness && pop[i].birth < pop[worst].birth)) {
                worst = i;
            }
        }
        pop.erase(pop.begin() + static_cast<std::ptrdiff_t>(worst));

        res.history.push_back(make_log(gen, pop, book.evaluated, screener.counters()));
    }

    std::size_t best = 0;
    for (std::size_t i = 1; i < pop.size(); ++i) {
        if (pop[i].fitness > pop[best].fitness) best = i;
    }
    res.best = pop[best];
    res.counters = screener.counters();
    res.sampled = screener.counters().sampled;
    res.evaluated = book.evaluated;
    res.duplicate_hits = book.duplicate_hits;
    return res;
}

SearchResult random_search(long budget, const SearchConfig& cfg, const Benchmark& bench,
                           const std::vector<LayerStats>& stats) {
    if (budget < 1) throw std::invalid_argument("random_search: budget must be >= 1");
    auto [val_idx, test_idx] = split_validation_test(bench, bench.split_seed);
    (void)test_idx;
    const FitnessEvaluator fitness(bench, val_idx, cfg.n_eval_cfgs, cfg.seed, stats,
                                   cfg.topk_fractions);
    Screener screener = Screener::make(stats, bench.palette, bench.activation_bits, cfg.seed);
    screener.set_enabled(cfg.enable_screening);
    Rng rng = Rng::stream(cfg.seed, "random-search");

    SearchResult res;
    EvalBookkeeping book;
    std::optional<Individual> best;
    long birth = 0;
    const long attempt_cap = 1000 * budget + 100000;
    for (long attempt = 0; attempt < attempt_cap && book.evaluated < budget; ++attempt) {
        const ProxyGenome g = dsl::sample_genome(cfg.structure, rng, cfg.use_osp);
        auto ind = screen_and_evaluate(g, screener, fitness, book, birth);
        if (!ind) continue;
        ++birth;
        if (!best || ind->fitness > best->fitness) best = std::move(*ind);
        res.history.push_back(make_log(static_cast<int>(book.evaluated), {*best}, book.evaluated,
                                       screener.counters()));
    }
    if (!best) throw std::runtime_error("random_search: no valid genome found within budget");
    res.best = *best;
    res.counters = screener.counters();
    res.sampled = screener.counters().sampled;
    res.evaluated = book.evaluated;
    res.duplicate_hits = book.duplicate_hits;
    return res;
}

}  // namespace emq
