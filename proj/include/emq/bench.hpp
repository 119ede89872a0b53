#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "emq/dataset.hpp"
#include "emq/net.hpp"
#include "emq/quant.hpp"
#include "emq/rng.hpp"

namespace emq {

struct BenchmarkEntry {
    std::int64_t index = 0;
    std::vector<int> bit_cfg;
    double accuracy = 0.0;
    double model_size_mb = 0.0;
};

/// Ground-truth table of (bit config, quantized accuracy, size) records with
/// a query API. Entries are unique by bit_cfg; construction is deterministic
/// given the seeds.
struct Benchmark {
    int version = 1;
    std::string net_spec;
    std::uint64_t net_seed = 0;
    int activation_bits = 8;
    std::vector<int> palette;
    std::vector<BenchmarkEntry> entries;
    std::uint64_t split_seed = 0;

    const BenchmarkEntry& query_by_index(std::int64_t idx) const;
    double query_by_config(const std::vector<int>& bit_cfg) const;
    std::int64_t get_index_by_config(const std::vector<int>& bit_cfg) const;
    const std::vector<int>& random_config(Rng& rng) const;
    const std::vector<int>& random_config(std::uint64_t seed) const;
};

struct BuildBenchmarkOptions {
    std::vector<int> palette = {2, 3, 4};
    int activation_bits = 8;
    int jobs = 1;
};

/// Samples n_configs distinct bit configs uniformly without replacement
/// (exhaustive when the space is no larger), quantizes and evaluates each.
Benchmark build_benchmark(const ReferenceNet& net, const SyntheticDataset& ds, int n_configs,
                          std::uint64_t seed, const BuildBenchmarkOptions& opts = {});

void persist(const Benchmark& b, const std::string& path);
Benchmark load_benchmark(const std::string& path);

/// Deterministic disjoint 70/30 partition of entry indices.
std::pair<std::vector<std::int64_t>, std::vector<std::int64_t>> split_validation_test(
    const Benchmark& b, std::uint64_t seed);

}  // namespace emq
