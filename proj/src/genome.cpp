#include "emq/genome.hpp"

#include <stdexcept>

#include "json.hpp"

#include "emq/errors.hpp"

namespace emq::dsl {

namespace {

constexpr std::array<std::string_view, kNumStatKinds> kStatNames = {"W", "G", "A", "H", "V"};

UnaryOp parse_unary(const std::string& name) {
    const auto op = unary_from_name(name);
    if (!op) throw ParseError("genome: unknown op '" + name + "'");
    return *op;
}

BinaryOp parse_binary(const std::string& name) {
    const auto op = binary_from_name(name);
    if (!op) throw ParseError("genome: unknown op '" + name + "'");
    return *op;
}

StatKind parse_stat(const std::string& name) {
    const auto k = stat_from_name(name);
    if (!k) throw ParseError("genome: unknown input kind '" + name + "'");
    return *k;
}

UnaryOp parse_aggregate(const std::string& name) {
    const UnaryOp op = parse_unary(name);
    if (!is_aggregating(op)) throw ParseError("genome: aggregate op '" + name + "' is not aggregating");
    return op;
}

}  // namespace

std::string_view stat_name(StatKind k) { return kStatNames[static_cast<std::size_t>(k)]; }

std::optional<StatKind> stat_from_name(std::string_view name) {
    for (int i = 0; i < kNumStatKinds; ++i) {
        if (kStatNames[static_cast<std::size_t>(i)] == name) return static_cast<StatKind>(i);
    }
    return std::nullopt;
}

std::string_view structure_name(Structure s) {
    switch (s) {
        case Structure::Sequential: return "sequential";
        case Structure::Branched: return "branched";
        case Structure::Dag: return "dag";
    }
    return "?";
}

std::optional<Structure> structure_from_name(std::string_view name) {
    if (name == "sequential") return Structure::Sequential;
    if (name == "branched") return Structure::Branched;
    if (name == "dag") return Structure::Dag;
    return std::nullopt;
}

Structure structure_of(const ProxyGenome& g) {
    if (std::holds_alternative<SequentialGenome>(g)) return Structure::Sequential;
    if (std::holds_alternative<BranchedGenome>(g)) return Structure::Branched;
    return Structure::Dag;
}

bool validate(const ProxyGenome& g) {
    auto op_ok = [](UnaryOp op) {
        return static_cast<int>(op) >= 0 && static_cast<int>(op) < kNumUnaryOps;
    };
    auto bin_ok = [](BinaryOp op) {
        return static_cast<int>(op) >= 0 && static_cast<int>(op) < kNumBinaryOps;
    };
    auto stat_ok = [](StatKind k) {
        return static_cast<int>(k) >= 0 && static_cast<int>(k) < kNumStatKinds;
    };
    return std::visit(
        [&](const auto& v) -> bool {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, SequentialGenome>) {
                for (UnaryOp op : v.ops) {
                    if (!op_ok(op)) return false;
                }
                return stat_ok(v.input) && op_ok(v.aggregate) && is_aggregating(v.aggregate);
            } else if constexpr (std::is_same_v<T, BranchedGenome>) {
                for (UnaryOp op : v.ops_a) {
                    if (!op_ok(op)) return false;
                }
                for (UnaryOp op : v.ops_b) {
                    if (!op_ok(op)) return false;
                }
                return stat_ok(v.input_a) && stat_ok(v.input_b) && bin_ok(v.binary) &&
                       op_ok(v.aggregate) && is_aggregating(v.aggregate);
            } else {
                for (const auto& m : v.middle) {
                    if (!bin_ok(m.binary) || !op_ok(m.unary)) return false;
                }
                return stat_ok(v.inputs[0]) && stat_ok(v.inputs[1]) && op_ok(v.aggregate) &&
                       is_aggregating(v.aggregate);
            }
        },
        g);
}

UnaryOp sample_unary(Rng& rng, bool use_osp) {
    if (!use_osp) return static_cast<UnaryOp>(rng.next_below(kNumUnaryOps));
    // no_op 0.2; otherwise uniform over the remaining 23.
    if (rng.next_double() < 0.2) return UnaryOp::NoOp;
    const auto k = rng.next_below(kNumUnaryOps - 1);
    return static_cast<UnaryOp>(k + 1);
}

BinaryOp sample_binary(Rng& rng, bool use_osp) {
    if (!use_osp) return static_cast<BinaryOp>(rng.next_below(kNumBinaryOps));
    const double r = rng.next_double();
    if (r < 0.6) return BinaryOp::Sum;
    if (r < 0.9) return BinaryOp::Difference;
    if (r < 0.95) return BinaryOp::Product;
    return BinaryOp::MatMul;
}

StatKind sample_stat(Rng& rng) { return static_cast<StatKind>(rng.next_below(kNumStatKinds)); }

ProxyGenome sample_genome(Structure s, Rng& rng, bool use_osp) {
    switch (s) {
        case Structure::Sequential: {
            SequentialGenome g;
            g.input = sample_stat(rng);
            for (auto& op : g.ops) op = sample_unary(rng, use_osp);
            return g;
        }
        case Structure::Branched: {
            BranchedGenome g;
            g.input_a = sample_stat(rng);
            g.input_b = sample_stat(rng);
            for (auto& op : g.ops_a) op = sample_unary(rng, use_osp);
            for (auto& op : g.ops_b) op = sample_unary(rng, use_osp);
            g.binary = sample_binary(rng, use_osp);
            return g;
        }
        case Structure::Dag: {
            DagGenome g;
            g.inputs = {sample_stat(rng), sample_stat(rng)};
            for (auto& m : g.middle) {
                m.binary = sample_binary(rng, use_osp);
                m.unary = sample_unary(rng, use_osp);
            }
            return g;
        }
    }
    throw std::invalid_argument("sample_genome: bad structure");
}

std::string serialize(const ProxyGenome& g) {
    nlohmann::ordered_json j;
    j["structure"] = std::string(structure_name(structure_of(g)));
    std::visit(
        [&](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, SequentialGenome>) {
                j["inputs"] = {std::string(stat_name(v.input))};
                auto ops = nlohmann::ordered_json::array();
                for (UnaryOp op : v.ops) ops.push_back(std::string(unary_name(op)));
                j["ops"] = ops;
            } else if constexpr (std::is_same_v<T, BranchedGenome>) {
                j["inputs"] = {std::string(stat_name(v.input_a)), std::string(stat_name(v.input_b))};
                j["branch_a"] = {std::string(unary_name(v.ops_a[0])), std::string(unary_name(v.ops_a[1]))};
                j["branch_b"] = {std::string(unary_name(v.ops_b[0])), std::string(unary_name(v.ops_b[1]))};
                j["binary"] = std::string(binary_name(v.binary));
            } else {
                j["inputs"] = {std::string(stat_name(v.inputs[0])), std::string(stat_name(v.inputs[1]))};
                auto mids = nlohmann::ordered_json::array();
                for (const auto& m : v.middle) {
                    mids.push_back({{"binary", std::string(binary_name(m.binary))},
                                    {"unary", std::string(unary_name(m.unary))}});
                }
                j["middle"] = mids;
            }
            j["aggregate"] = std::string(unary_name(std::visit([](const auto& x) { return x.aggregate; }, g)));
        },
        g);
    return j.dump(2) + "\n";
}

ProxyGenome deserialize(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError("genome: " + std::string(e.what()));
    }
    try {
        const auto s = structure_from_name(j.at("structure").get<std::string>());
        if (!s) throw ParseError("genome: unknown structure '" + j.at("structure").get<std::string>() + "'");
        const auto inputs = j.at("inputs").get<std::vector<std::string>>();
        const std::string agg = j.value("aggregate", std::string(unary_name(UnaryOp::ToMeanScalar)));
        switch (*s) {
            case Structure::Sequential: {
                if (inputs.size() != 1) throw ParseError("genome: sequential needs 1 input");
                SequentialGenome g;
                g.input = parse_stat(inputs[0]);
                const auto ops = j.at("ops").get<std::vector<std::string>>();
                if (ops.size() != g.ops.size()) throw ParseError("genome: sequential needs 4 ops");
                for (std::size_t i = 0; i < ops.size(); ++i) g.ops[i] = parse_unary(ops[i]);
                g.aggregate = parse_aggregate(agg);
                return g;
            }
            case Structure::Branched: {
                if (inputs.size() != 2) throw ParseError("genome: branched needs 2 inputs");
                BranchedGenome g;
                g.input_a = parse_stat(inputs[0]);
                g.input_b = parse_stat(inputs[1]);
                const auto a = j.at("branch_a").get<std::vector<std::string>>();
                const auto b = j.at("branch_b").get<std::vector<std::string>>();
                if (a.size() != 2 || b.size() != 2) throw ParseError("genome: branches need 2 ops each");
                g.ops_a = {parse_unary(a[0]), parse_unary(a[1])};
                g.ops_b = {parse_unary(b[0]), parse_unary(b[1])};
                g.binary = parse_binary(j.at("binary").get<std::string>());
                g.aggregate = parse_aggregate(agg);
                return g;
            }
            case Structure::Dag: {
                if (inputs.size() != 2) throw ParseError("genome: dag needs 2 inputs");
                DagGenome g;
                g.inputs = {parse_stat(inputs[0]), parse_stat(inputs[1])};
                const auto& mids = j.at("middle");
                if (mids.size() != g.middle.size()) throw ParseError("genome: dag needs 3 middle nodes");
                for (std::size_t i = 0; i < g.middle.size(); ++i) {
                    g.middle[i].binary = parse_binary(mids[i].at("binary").get<std::string>());
                    g.middle[i].unary = parse_unary(mids[i].at("unary").get<std::string>());
                }
                g.aggregate = parse_aggregate(agg);
                return g;
            }
        }
        throw ParseError("genome: bad structure");
    } catch (const ParseError&) {
        throw;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("genome: malformed document: " + std::string(e.what()));
    }
}

ProxyGenome emq_genome() {
    BranchedGenome g;
    g.input_a = StatKind::V;
    g.input_b = StatKind::W;
    g.ops_a = {UnaryOp::Abs, UnaryOp::Log};
    g.ops_b = {UnaryOp::L1Norm, UnaryOp::Sqrt};
    g.binary = BinaryOp::Product;
    g.aggregate = UnaryOp::ToMeanScalar;
    return g;
}

}  // namespace emq::dsl
