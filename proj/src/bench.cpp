#include "emq/bench.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <thread>

#include "json.hpp"

#include "emq/errors.hpp"

namespace emq {

namespace {

std::string cfg_to_string(const std::vector<int>& bits) {
    std::string s;
    for (std::size_t i = 0; i < bits.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(bits[i]);
    }
    return s;
}

}  // namespace

const BenchmarkEntry& Benchmark::query_by_index(std::int64_t idx) const {
    for (const auto& e : entries) {
        if (e.index == idx) return e;
    }
    throw std::out_of_range("benchmark: no entry with index " + std::to_string(idx));
}

double Benchmark::query_by_config(const std::vector<int>& bit_cfg) const {
    return query_by_index(get_index_by_config(bit_cfg)).accuracy;
}

std::int64_t Benchmark::get_index_by_config(const std::vector<int>& bit_cfg) const {
    for (const auto& e : entries) {
        if (e.bit_cfg == bit_cfg) return e.index;
    }
    throw std::out_of_range("benchmark: no entry with config [" + cfg_to_string(bit_cfg) + "]");
}

const std::vector<int>& Benchmark::random_config(Rng& rng) const {
    if (entries.empty()) throw std::invalid_argument("benchmark: empty");
    return entries[rng.next_below(entries.size())].bit_cfg;
}

const std::vector<int>& Benchmark::random_config(std::uint64_t seed) const {
    Rng rng = Rng::stream(seed, "bench-random-config");
    return random_config(rng);
}

Benchmark build_benchmark(const ReferenceNet& net, const SyntheticDataset& ds, int n_configs,
                          std::uint64_t seed, const BuildBenchmarkOptions& opts) {
    const std::size_t L = net.num_quant_layers();
    if (opts.palette.empty()) throw std::invalid_argument("build_benchmark: empty palette");
    std::vector<int> palette = opts.palette;
    std::sort(palette.begin(), palette.end());

    double space_d = 1.0;
    for (std::size_t j = 0; j < L; ++j) space_d *= static_cast<double>(palette.size());
    if (space_d > 1e12) throw std::invalid_argument("build_benchmark: config space too large");
    const auto space = static_cast<std::uint64_t>(space_d);
    if (n_configs < 1 || static_cast<std::uint64_t>(n_configs) > space) {
        throw std::invalid_argument("build_benchmark: n_configs " + std::to_string(n_configs) +
                                    " exceeds config space " + std::to_string(space));
    }

    Rng rng = Rng::stream(seed, "bench-sample");
    std::vector<std::size_t> codes =
        rng.sample_without_replacement(static_cast<std::size_t>(space), static_cast<std::size_t>(n_configs));

    auto decode = [&](std::size_t code) {
        std::vector<int> bits(L);
        for (std::size_t j = L; j > 0; --j) {
            bits[j - 1] = palette[code % palette.size()];
            code /= palette.size();
        }
        return bits;
    };

    Benchmark b;
    b.net_spec = net.arch;
    b.net_seed = net.seed;
    b.activation_bits = opts.activation_bits;
    b.palette = palette;
    b.split_seed = seed;
    b.entries.resize(static_cast<std::size_t>(n_configs));

    auto eval_range = [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            BitConfig cfg{decode(codes[i]), opts.activation_bits};
            ReferenceNet q = apply_bit_config(net, ds, cfg);
            BenchmarkEntry e;
            e.index = static_cast<std::int64_t>(i);
            e.bit_cfg = cfg.weight_bits;
            e.accuracy = evaluate_accuracy(q, ds, Split::Eval);
            e.model_size_mb = model_size_mb(net, cfg);
            b.entries[i] = std::move(e);
        }
    };

    const int jobs = std::max(1, opts.jobs);
    if (jobs == 1) {
        eval_range(0, b.entries.size());
    } else {
        std::vector<std::thread> workers;
        const std::size_t chunk = (b.entries.size() + static_cast<std::size_t>(jobs) - 1) /
                                  static_cast<std::size_t>(jobs);
        for (int t = 0; t < jobs; ++t) {
            const std::size_t lo = static_cast<std::size_t>(t) * chunk;
            const std::size_t hi = std::min(b.entries.size(), lo + chunk);
            if (lo >= hi) break;
            workers.emplace_back(eval_range, lo, hi);
        }
        for (auto& w : workers) w.join();
    }
    return b;
}

void persist(const Benchmark& b, const std::string& path) {
    nlohmann::ordered_json j;
    j["version"] = b.version;
    j["net"] = {{"spec", b.net_spec}, {"seed", b.net_seed}};
    j["activation_bits"] = b.activation_bits;
    j["palette"] = b.palette;
    j["entries"] = nlohmann::ordered_json::array();
    for (const auto& e : b.entries) {
        j["entries"].push_back({{"index", e.index},
                                {"bit_cfg", e.bit_cfg},
                                {"accuracy", e.accuracy},
                                {"model_size_mb", e.model_size_mb}});
    }
    j["split_seed"] = b.split_seed;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("persist: cannot open " + path);
    out << j.dump(2) << "\n";
}

Benchmark load_benchmark(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_benchmark: cannot open " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError("load_benchmark: " + std::string(e.what()));
    }
    try {
        const int version = j.at("version").get<int>();
        if (version != 1) {
            throw VersionError("load_benchmark: unsupported version " + std::to_string(version));
        }
        Benchmark b;
        b.version = version;
        b.net_spec = j.at("net").at("spec").get<std::string>();
        b.net_seed = j.at("net").at("seed").get<std::uint64_t>();
        b.activation_bits = j.at("activation_bits").get<int>();
        b.palette = j.at("palette").get<std::vector<int>>();
        for (const auto& je : j.at("entries")) {
            BenchmarkEntry e;
            e.index = je.at("index").get<std::int64_t>();
            e.bit_cfg = je.at("bit_cfg").get<std::vector<int>>();
            e.accuracy = je.at("accuracy").get<double>();
            e.model_size_mb = je.at("model_size_mb").get<double>();
            b.entries.push_back(std::move(e));
        }
        b.split_seed = j.at("split_seed").get<std::uint64_t>();
        return b;
    } catch (const VersionError&) {
        throw;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("load_benchmark: malformed benchmark file: " + std::string(e.what()));
    }
}

std::pair<std::vector<std::int64_t>, std::vector<std::int64_t>> split_validation_test(
    const Benchmark& b, std::uint64_t seed) {
    const std::size_t n = b.entries.size();
    if (n < 10) throw std::invalid_argument("split_validation_test: need at least 10 entries");
    std::vector<std::int64_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = b.entries[i].index;
    Rng rng = Rng::stream(seed, "bench-split");
    rng.shuffle(idx);
    const auto n_val = static_cast<std::size_t>(std::llround(0.7 * static_cast<double>(n)));
    std::vector<std::int64_t> val(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_val));
    std::vector<std::int64_t> test(idx.begin() + static_cast<std::ptrdiff_t>(n_val), idx.end());
    std::sort(val.begin(), val.end());
    std::sort(test.begin(), test.end());
    return {val, test};
}

}  // namespace emq
