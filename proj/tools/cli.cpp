#include "cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "emq/baselines.hpp"
#include "emq/bench.hpp"
#include "emq/dsl_eval.hpp"
#include "emq/errors.hpp"
#include "emq/evolve.hpp"
#include "emq/genome.hpp"
#include "emq/metrics.hpp"
#include "emq/net.hpp"
#include "emq/quant.hpp"
#include "emq/screen.hpp"
#include "emq/stats.hpp"

namespace emq::cli {

namespace {

namespace fs = std::filesystem;

constexpr const char* kToolVersion = "0.1.0";

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

std::uint64_t default_seed() {
    if (const char* env = std::getenv("EMQ_SEED")) {
        return std::strtoull(env, nullptr, 10);
    }
    return 0;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
    if (const fs::path parent = fs::path(path).parent_path(); !parent.empty()) {
        fs::create_directories(parent);
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << content;
}

/// Run provenance written next to each output artifact.
struct Manifest {
    std::string command;
    std::map<std::string, std::string> settings;
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    long long wall_clock_ms = 0;

    void write(const std::string& primary_output) const {
        nlohmann::ordered_json j;
        j["command"] = command;
        j["tool_version"] = kToolVersion;
        j["settings"] = settings;
        std::uint64_t h = 1469598103934665603ULL;
        for (const auto& [k, v] : settings) {
            for (char c : k + "=" + v + ";") {
                h ^= static_cast<std::uint8_t>(c);
                h *= 1099511628211ULL;
            }
        }
        j["config_hash"] = h;
        j["inputs"] = inputs;
        j["outputs"] = outputs;
        j["wall_clock_ms"] = wall_clock_ms;
        write_file(primary_output + ".manifest.json", j.dump(2) + "\n");
    }
};

struct Timer {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    long long ms() const {
        return std::chrono::duration_cast<std::chrono::milliseconds>(
                   std::chrono::steady_clock::now() - start)
            .count();
    }
};

/// Everything the proxy pipeline needs, rebuilt deterministically from a
/// benchmark file: dataset and net share the benchmark's net seed.
struct Workbench {
    SyntheticDataset ds;
    ReferenceNet net;
    double float_accuracy = 0.0;
    std::vector<LayerStats> stats;
};

Workbench make_workbench(const std::string& net_spec, std::uint64_t net_seed,
                         std::uint64_t stats_seed, int probes, int epochs, double lr) {
    Workbench w{make_dataset(net_seed, DatasetConfig{}), build_net(net_spec, net_seed), 0.0, {}};
    TrainConfig tc = default_train_config(net_spec);
    if (epochs > 0) tc.epochs = epochs;
    if (lr > 0) tc.lr = lr;
    w.float_accuracy = train(w.net, w.ds, tc, net_seed);
    w.stats = extract_stats(w.net, w.ds, stats_seed, probes);
    return w;
}

/// Closure over per-layer scores; holds whichever proxy kind was requested.
struct ProxyHandle {
    std::string label;
    std::vector<double> layer_scores;

    double config_score(const BitConfig& cfg) const {
        return dsl::config_score_from_layers(layer_scores, cfg);
    }
};

ProxyHandle resolve_proxy(const std::string& proxy_id, const std::string& genome_path,
                          const Workbench& w, std::uint64_t seed) {
    if (!genome_path.empty()) {
        const dsl::ProxyGenome g = dsl::deserialize(read_file(genome_path));
        const dsl::ScoredProxy scored(g, w.stats);
        if (!scored.valid()) {
            throw std::runtime_error("genome at " + genome_path +
                                     " does not evaluate on these statistics");
        }
        return ProxyHandle{fs::path(genome_path).stem().string(), scored.layer_scores()};
    }
    const auto id = baseline_from_name(proxy_id);
    if (!id) throw std::runtime_error("unknown proxy id '" + proxy_id + "'");
    const BaselineContext ctx = make_baseline_context(w.net, w.ds, seed);
    return ProxyHandle{proxy_id, baseline_layer_scores(*id, w.stats, ctx)};
}

std::string settings_seed_block(const std::map<std::string, std::string>& extra,
                                std::uint64_t seed) {
    (void)extra;
    return std::to_string(seed);
}

// ---------------------------------------------------------------- bench ---

int cmd_bench_build(const std::string& net_spec, int configs, std::uint64_t seed,
                    const std::vector<int>& palette, int act_bits, int epochs, double lr,
                    int jobs, const std::string& out) {
    Timer timer;
    Workbench w = make_workbench(net_spec, seed, seed, kSearchProbes, epochs, lr);
    BuildBenchmarkOptions opts;
    opts.palette = palette;
    opts.activation_bits = act_bits;
    opts.jobs = jobs;
    const Benchmark b = build_benchmark(w.net, w.ds, configs, seed, opts);
    persist(b, out);

    Manifest m;
    m.command = "bench build";
    m.settings = {{"net", net_spec},
                  {"configs", std::to_string(configs)},
                  {"seed", settings_seed_block({}, seed)},
                  {"activation_bits", std::to_string(act_bits)},
                  {"epochs", std::to_string(epochs)},
                  {"lr", fmt(lr)},
                  {"float_accuracy", fmt(w.float_accuracy)}};
    m.outputs = {out};
    m.wall_clock_ms = timer.ms();
    m.write(out);
    std::cout << "built benchmark with " << b.entries.size() << " entries (float accuracy "
              << fmt(w.float_accuracy) << ") -> " << out << "\n";
    return 0;
}

int cmd_bench_query(const std::string& bench_path, std::int64_t idx,
                    const std::vector<int>& cfg_bits) {
    const Benchmark b = load_benchmark(bench_path);
    nlohmann::ordered_json j;
    if (!cfg_bits.empty()) {
        const std::int64_t found = b.get_index_by_config(cfg_bits);
        const BenchmarkEntry& e = b.query_by_index(found);
        j = {{"index", e.index},
             {"bit_cfg", e.bit_cfg},
             {"accuracy", e.accuracy},
             {"model_size_mb", e.model_size_mb}};
    } else {
        const BenchmarkEntry& e = b.query_by_index(idx);
        j = {{"index", e.index},
             {"bit_cfg", e.bit_cfg},
             {"accuracy", e.accuracy},
             {"model_size_mb", e.model_size_mb}};
    }
    std::cout << j.dump(2) << "\n";
    return 0;
}

// --------------------------------------------------------------- evolve ---

std::string history_csv(const SearchResult& res) {
    std::string csv =
        "generation,best_fitness,mean_fitness,evaluated_count,"
        "rejected_conflict,rejected_invalid,rejected_insensitive,rejected_duplicate\n";
    for (const GenerationLog& log : res.history) {
        csv += std::to_string(log.generation) + "," + fmt(log.best_fitness) + "," +
               fmt(log.mean_fitness) + "," + std::to_string(log.evaluated_count) + "," +
               std::to_string(log.rejected.conflict) + "," + std::to_string(log.rejected.invalid) +
               "," + std::to_string(log.rejected.insensitive) + "," +
               std::to_string(log.rejected.duplicate) + "\n";
    }
    return csv;
}

int cmd_evolve(const std::string& bench_path, const std::string& out_dir, int iterations,
               int population, const std::string& structure, std::uint64_t seed, long max_evals,
               int probes, bool no_osp, bool no_screening, int epochs, double lr) {
    Timer timer;
    const Benchmark b = load_benchmark(bench_path);
    Workbench w = make_workbench(b.net_spec, b.net_seed, seed, probes, epochs, lr);

    SearchConfig cfg;
    cfg.iterations = iterations;
    cfg.population_size = population;
    cfg.seed = seed;
    cfg.max_evaluations = max_evals;
    cfg.use_osp = !no_osp;
    cfg.enable_screening = !no_screening;
    const auto s = dsl::structure_from_name(structure);
    if (!s) throw std::runtime_error("unknown structure '" + structure + "'");
    cfg.structure = *s;

    const SearchResult res = evolve(cfg, b, w.stats);

    const std::string best_path = (fs::path(out_dir) / "best.json").string();
    const std::string hist_path = (fs::path(out_dir) / "history.csv").string();
    write_file(best_path, dsl::serialize(res.best.genome));
    write_file(hist_path, history_csv(res));

    Manifest m;
    m.command = "evolve";
    m.settings = {{"bench", bench_path},
                  {"iterations", std::to_string(iterations)},
                  {"population", std::to_string(population)},
                  {"structure", structure},
                  {"seed", std::to_string(seed)},
                  {"max_evals", std::to_string(max_evals)},
                  {"probes", std::to_string(probes)},
                  {"osp", no_osp ? "off" : "on"},
                  {"screening", no_screening ? "off" : "on"},
                  {"best_fitness", fmt(res.best.fitness)},
                  {"sampled", std::to_string(res.sampled)},
                  {"evaluated", std::to_string(res.evaluated)}};
    m.inputs = {bench_path};
    m.outputs = {best_path, hist_path};
    m.wall_clock_ms = timer.ms();
    m.write(best_path);

    std::cout << "evolve: best fitness " << fmt(res.best.fitness) << " after " << res.evaluated
              << " evaluations (" << res.sampled << " sampled) -> " << best_path << "\n";
    return 0;
}

// ----------------------------------------------------------------- eval ---

int cmd_eval(const std::string& bench_path, const std::string& proxy_id,
             const std::string& genome_path, int runs, int n_cfgs, std::uint64_t seed, int probes,
             const std::string& out) {
    Timer timer;
    const Benchmark b = load_benchmark(bench_path);
    Workbench w = make_workbench(b.net_spec, b.net_seed, seed, probes, 0, 0);
    const ProxyHandle proxy = resolve_proxy(proxy_id, genome_path, w, seed);

    auto [val_idx, test_idx] = split_validation_test(b, b.split_seed);
    (void)val_idx;

    std::string csv =
        "proxy,run,rho_s_at_20,rho_s_at_50,rho_s_at_100,kendall,pearson,score_time_us_per_cfg\n";
    std::vector<std::array<double, 6>> rows;
    for (int r = 0; r < runs; ++r) {
        Rng rng = Rng::stream(seed + static_cast<std::uint64_t>(r), "eval-run");
        const auto n = std::min<std::size_t>(static_cast<std::size_t>(n_cfgs), test_idx.size());
        const auto picks = rng.sample_without_replacement(test_idx.size(), n);
        std::vector<double> gt, est;
        const auto t0 = std::chrono::steady_clock::now();
        for (const std::size_t p : picks) {
            const BenchmarkEntry& e = b.query_by_index(test_idx[p]);
            gt.push_back(e.accuracy);
            est.push_back(proxy.config_score(BitConfig{e.bit_cfg, b.activation_bits}));
        }
        const double us_per_cfg =
            std::chrono::duration_cast<std::chrono::duration<double, std::micro>>(
                std::chrono::steady_clock::now() - t0)
                .count() /
            static_cast<double>(picks.size());
        const std::array<double, 6> row = {spearman_at_topk(gt, est, 0.2),
                                           spearman_at_topk(gt, est, 0.5),
                                           spearman_at_topk(gt, est, 1.0),
                                           kendall(gt, est),
                                           pearson(gt, est),
                                           us_per_cfg};
        rows.push_back(row);
        csv += proxy.label + "," + std::to_string(r);
        for (const double v : row) csv += "," + fmt(v);
        csv += "\n";
    }
    for (const char* stat : {"mean", "std"}) {
        csv += proxy.label + ",";
        csv += stat;
        for (std::size_t c = 0; c < 6; ++c) {
            double mean = 0.0;
            for (const auto& row : rows) mean += row[c];
            mean /= static_cast<double>(rows.size());
            double var = 0.0;
            for (const auto& row : rows) var += (row[c] - mean) * (row[c] - mean);
            var /= static_cast<double>(rows.size());
            csv += "," + fmt(std::string(stat) == "mean" ? mean : std::sqrt(var));
        }
        csv += "\n";
    }
    write_file(out, csv);

    Manifest m;
    m.command = "eval";
    m.settings = {{"bench", bench_path}, {"proxy", proxy.label},
                  {"runs", std::to_string(runs)}, {"configs", std::to_string(n_cfgs)},
                  {"seed", std::to_string(seed)}, {"probes", std::to_string(probes)}};
    m.inputs = {bench_path};
    if (!genome_path.empty()) m.inputs.push_back(genome_path);
    m.outputs = {out};
    m.wall_clock_ms = timer.ms();
    m.write(out);
    std::cout << "eval: wrote " << out << "\n";
    return 0;
}

// --------------------------------------------------------------- assign ---

int cmd_assign(const std::string& bench_path, const std::string& proxy_id,
               const std::string& genome_path, double budget_mb, int samples, std::uint64_t seed,
               bool pin_8bit, const std::vector<double>& sweep, int probes,
               const std::string& out, const std::string& sweep_out) {
    Timer timer;
    const Benchmark b = load_benchmark(bench_path);
    Workbench w = make_workbench(b.net_spec, b.net_seed, seed, probes, 0, 0);
    const ProxyHandle proxy = resolve_proxy(proxy_id, genome_path, w, seed);

    AssignOptions opts;
    opts.palette = b.palette;
    opts.activation_bits = b.activation_bits;
    opts.pin_first_last_8bit = pin_8bit;
    const ConfigScorer scorer = [&](const BitConfig& c) { return proxy.config_score(c); };

    const BitConfig best = assign_bits(scorer, w.net.geoms, budget_mb, samples, seed, opts);
    ReferenceNet q = apply_bit_config(w.net, w.ds, best);
    const double acc = evaluate_accuracy(q, w.ds, Split::Eval);

    nlohmann::ordered_json j;
    j["proxy"] = proxy.label;
    j["budget_mb"] = budget_mb;
    j["bit_cfg"] = best.weight_bits;
    j["activation_bits"] = best.activation_bits;
    j["model_size_mb"] = model_size_mb(w.net, best);
    j["bops_g"] = compute_bops_g(w.net, best);
    j["accuracy"] = acc;
    j["float_accuracy"] = w.float_accuracy;
    write_file(out, j.dump(2) + "\n");

    if (!sweep.empty()) {
        std::string csv = "budget_mb,model_size_mb,accuracy\n";
        double prev_size = -1.0;
        std::vector<double> budgets = sweep;
        std::sort(budgets.begin(), budgets.end());
        for (const double budget : budgets) {
            BitConfig cfg;
            try {
                cfg = assign_bits(scorer, w.net.geoms, budget, samples, seed, opts);
            } catch (const InfeasibleError&) {
                continue;
            }
            const double size = model_size_mb(w.net, cfg);
            if (size <= prev_size) continue;  // keep sizes strictly increasing
            prev_size = size;
            ReferenceNet qq = apply_bit_config(w.net, w.ds, cfg);
            csv += fmt(budget) + "," + fmt(size) + "," +
                   fmt(evaluate_accuracy(qq, w.ds, Split::Eval)) + "\n";
        }
        write_file(sweep_out.empty() ? out + ".sweep.csv" : sweep_out, csv);
    }

    Manifest m;
    m.command = "assign";
    m.settings = {{"bench", bench_path},   {"proxy", proxy.label},
                  {"budget_mb", fmt(budget_mb)}, {"samples", std::to_string(samples)},
                  {"seed", std::to_string(seed)}, {"pin_8bit", pin_8bit ? "on" : "off"}};
    m.inputs = {bench_path};
    if (!genome_path.empty()) m.inputs.push_back(genome_path);
    m.outputs = {out};
    m.wall_clock_ms = timer.ms();
    m.write(out);
    std::cout << "assign: " << j.dump() << "\n";
    return 0;
}

// --------------------------------------------------------------- report ---

int cmd_report(const std::string& dir, const std::string& out_path) {
    std::vector<std::string> eval_files;
    std::string history_file;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const std::string name = entry.path().filename().string();
        if (name.size() >= 4 && name.substr(name.size() - 4) == ".csv") {
            if (name == "history.csv") history_file = entry.path().string();
            else if (name.rfind("eval", 0) == 0) eval_files.push_back(entry.path().string());
        }
    }
    std::sort(eval_files.begin(), eval_files.end());
    if (eval_files.empty() && history_file.empty()) {
        throw std::runtime_error("report: no eval*.csv or history.csv found in " + dir);
    }

    std::string md = "# Run report\n";
    std::string merged = "proxy,run,rho_s_at_20,rho_s_at_50,rho_s_at_100,kendall,pearson,"
                         "score_time_us_per_cfg\n";

    if (!eval_files.empty()) {
        md += "\n## Proxy correlation (test split)\n\n";
        md += "| proxy | rho_s@20% | rho_s@50% | rho_s@100% | kendall | pearson |\n";
        md += "|---|---|---|---|---|---|\n";
        for (const std::string& f : eval_files) {
            std::ifstream in(f);
            std::string line;
            std::getline(in, line);  // header
            std::string mean_row, std_row;
            while (std::getline(in, line)) {
                if (line.empty()) continue;
                merged += line + "\n";
                if (line.find(",mean,") != std::string::npos) mean_row = line;
                if (line.find(",std,") != std::string::npos) std_row = line;
            }
            if (mean_row.empty()) continue;
            std::vector<std::string> mc, sc;
            for (std::string* row : {&mean_row, &std_row}) {
                std::stringstream ss(*row);
                std::string cell;
                std::vector<std::string> cells;
                while (std::getline(ss, cell, ',')) cells.push_back(cell);
                (row == &mean_row ? mc : sc) = cells;
            }
            if (mc.size() < 7) continue;
            md += "| " + mc[0];
            for (std::size_t c = 2; c < 7; ++c) {
                md += " | " + mc[c];
                if (sc.size() > c) md += " ± " + sc[c];
            }
            md += " |\n";
        }
    }

    if (!history_file.empty()) {
        std::ifstream in(history_file);
        std::string line, last;
        std::getline(in, line);
        while (std::getline(in, line)) {
            if (!line.empty()) last = line;
        }
        if (!last.empty()) {
            std::stringstream ss(last);
            std::string cell;
            std::vector<std::string> cells;
            while (std::getline(ss, cell, ',')) cells.push_back(cell);
            if (cells.size() >= 8) {
                md += "\n## Evolution screening counters\n\n";
                md += "| evaluated | conflict | invalid | insensitive | duplicate |\n";
                md += "|---|---|---|---|---|\n";
                md += "| " + cells[3] + " | " + cells[4] + " | " + cells[5] + " | " + cells[6] +
                      " | " + cells[7] + " |\n";
                md += "\nFinal best fitness: " + cells[1] + " (generation " + cells[0] + ")\n";
            }
        }
    }

    const std::string report_md = out_path.empty() ? (fs::path(dir) / "report.md").string() : out_path;
    write_file(report_md, md);
    if (!eval_files.empty()) {
        write_file((fs::path(report_md).parent_path() / "merged_eval.csv").string(), merged);
    }
    std::cout << "report: wrote " << report_md << "\n";
    return 0;
}

}  // namespace

int run(int argc, char** argv) {
    CLI::App app{"Training-free mixed-precision quantization proxy toolkit"};
    app.require_subcommand(1);

    std::uint64_t seed = default_seed();
    app.add_option("--seed", seed, "Global seed (env EMQ_SEED, default 0)")->capture_default_str();

    // bench
    auto* bench = app.add_subcommand("bench", "Build or query a quantization benchmark");
    bench->require_subcommand(1);
    auto* build = bench->add_subcommand("build", "Train a net and evaluate sampled bit configs");
    std::string net_spec = "cnn-s";
    int configs = 425;
    std::vector<int> palette = {2, 3, 4};
    int act_bits = 8;
    int epochs = 0;
    double lr = 0.0;
    int jobs = 1;
    std::string out_path = "benchmark.json";
    build->add_option("--net", net_spec, "Architecture (mlp-s | cnn-s)")->capture_default_str();
    build->add_option("--configs", configs, "Number of bit configs")->capture_default_str();
    build->add_option("--palette", palette, "Weight bit palette")->capture_default_str();
    build->add_option("--act-bits", act_bits, "Activation bits")->capture_default_str();
    build->add_option("--epochs", epochs, "Override training epochs (0 = default)");
    build->add_option("--lr", lr, "Override training lr (0 = default)");
    build->add_option("--jobs", jobs, "Parallel workers for entry evaluation")->capture_default_str();
    build->add_option("--out", out_path, "Output benchmark path")->capture_default_str();

    auto* query = bench->add_subcommand("query", "Query a stored benchmark");
    std::string bench_path;
    std::int64_t idx = -1;
    std::vector<int> cfg_bits;
    query->add_option("--bench", bench_path, "Benchmark file")->required();
    auto* idx_opt = query->add_option("--idx", idx, "Entry index");
    auto* cfg_opt = query->add_option("--cfg", cfg_bits, "Bit config, e.g. 2,3,4,...")->delimiter(',');
    idx_opt->excludes(cfg_opt);

    // evolve
    auto* ev = app.add_subcommand("evolve", "Search proxies with the evolutionary loop");
    std::string ev_bench, out_dir = "evolve-out", structure = "branched";
    int iterations = 200;
    int population = 20;
    long max_evals = 0;
    int probes = kSearchProbes;
    bool no_osp = false, no_screening = false;
    int ev_epochs = 0;
    double ev_lr = 0.0;
    ev->add_option("--bench", ev_bench, "Benchmark file")->required();
    ev->add_option("--out-dir", out_dir, "Output directory")->capture_default_str();
    ev->add_option("--iterations", iterations, "Generations (paper default 1000)")
        ->capture_default_str();
    ev->add_option("--population", population, "Population size")->capture_default_str();
    ev->add_option("--structure", structure, "sequential | branched | dag")->capture_default_str();
    ev->add_option("--max-evals", max_evals, "Stop after this many fitness evaluations (0 = off)");
    ev->add_option("--probes", probes, "Hutchinson probes for stats")->capture_default_str();
    ev->add_flag("--no-osp", no_osp, "Disable operation sampling prioritization");
    ev->add_flag("--no-screening", no_screening, "Disable the screening protocol");
    ev->add_option("--epochs", ev_epochs, "Override training epochs (0 = default)");
    ev->add_option("--lr", ev_lr, "Override training lr (0 = default)");

    // eval
    auto* evl = app.add_subcommand("eval", "Correlation report for a proxy on the test split");
    std::string eval_bench, proxy_id, genome_path, eval_out = "eval.csv";
    int runs = 5;
    int eval_cfgs = 50;
    int eval_probes = kSearchProbes;
    evl->add_option("--bench", eval_bench, "Benchmark file")->required();
    auto* pid = evl->add_option("--proxy", proxy_id, "Baseline id (bparams, hawq, ..., emq)");
    auto* gpath = evl->add_option("--genome", genome_path, "Genome JSON file");
    pid->excludes(gpath);
    evl->add_option("--runs", runs, "Seed repetitions")->capture_default_str();
    evl->add_option("--configs", eval_cfgs, "Configs sampled per run")->capture_default_str();
    evl->add_option("--probes", eval_probes, "Hutchinson probes for stats")->capture_default_str();
    evl->add_option("--out", eval_out, "Output CSV")->capture_default_str();

    // assign
    auto* as = app.add_subcommand("assign", "Pick the best bit config under a size budget");
    std::string as_bench, as_proxy, as_genome, as_out = "assign.json", sweep_out;
    double budget_mb = 0.0;
    int samples = 5000;
    bool pin_8bit = false;
    std::vector<double> sweep;
    int as_probes = kSearchProbes;
    as->add_option("--bench", as_bench, "Benchmark file")->required();
    auto* apid = as->add_option("--proxy", as_proxy, "Baseline id");
    auto* agpath = as->add_option("--genome", as_genome, "Genome JSON file");
    apid->excludes(agpath);
    as->add_option("--budget-mb", budget_mb, "Model size budget in MB")->required();
    as->add_option("--samples", samples, "Random candidates when space is large")
        ->capture_default_str();
    as->add_flag("--pin-8bit", pin_8bit, "Pin first and last layers to 8-bit weights");
    as->add_option("--sweep", sweep, "Budget sweep list for the Pareto CSV")->delimiter(',');
    as->add_option("--probes", as_probes, "Hutchinson probes for stats")->capture_default_str();
    as->add_option("--out", as_out, "Output JSON")->capture_default_str();
    as->add_option("--sweep-out", sweep_out, "Pareto CSV path");

    // report
    auto* rep = app.add_subcommand("report", "Merge eval CSVs and evolve history");
    std::string rep_dir, rep_out;
    rep->add_option("--dir", rep_dir, "Directory with eval*.csv / history.csv")->required();
    rep->add_option("--out", rep_out, "Report markdown path (default <dir>/report.md)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (build->parsed()) {
            return cmd_bench_build(net_spec, configs, seed, palette, act_bits, epochs, lr, jobs,
                                   out_path);
        }
        if (query->parsed()) return cmd_bench_query(bench_path, idx, cfg_bits);
        if (ev->parsed()) {
            return cmd_evolve(ev_bench, out_dir, iterations, population, structure, seed,
                              max_evals, probes, no_osp, no_screening, ev_epochs, ev_lr);
        }
        if (evl->parsed()) {
            if (proxy_id.empty() && genome_path.empty()) {
                throw std::runtime_error("eval: pass --proxy or --genome");
            }
            return cmd_eval(eval_bench, proxy_id, genome_path, runs, eval_cfgs, seed, eval_probes,
                            eval_out);
        }
        if (as->parsed()) {
            if (as_proxy.empty() && as_genome.empty()) {
                throw std::runtime_error("assign: pass --proxy or --genome");
            }
            return cmd_assign(as_bench, as_proxy, as_genome, budget_mb, samples, seed, pin_8bit,
                              sweep, as_probes, as_out, sweep_out);
        }
        if (rep->parsed()) return cmd_report(rep_dir, rep_out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

}  // namespace emq::cli
