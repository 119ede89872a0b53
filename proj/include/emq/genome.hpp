#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

#include "emq/dsl_ops.hpp"
#include "emq/rng.hpp"

namespace emq::dsl {

/// Network statistic fed into a proxy graph.
enum class StatKind : int { W = 0, G, A, H, V };
inline constexpr int kNumStatKinds = 5;

std::string_view stat_name(StatKind k);
std::optional<StatKind> stat_from_name(std::string_view name);

enum class Structure { Sequential, Branched, Dag };

std::string_view structure_name(Structure s);
std::optional<Structure> structure_from_name(std::string_view name);

/// One input, four unary ops in order, then an aggregation.
struct SequentialGenome {
    StatKind input = StatKind::W;
    std::array<UnaryOp, 4> ops{};
    UnaryOp aggregate = UnaryOp::ToMeanScalar;

    bool operator==(const SequentialGenome&) const = default;
};

/// Two branches of two unary ops each, merged by a binary op and aggregated.
struct BranchedGenome {
    StatKind input_a = StatKind::W;
    StatKind input_b = StatKind::W;
    std::array<UnaryOp, 2> ops_a{};
    std::array<UnaryOp, 2> ops_b{};
    BinaryOp binary = BinaryOp::Sum;
    UnaryOp aggregate = UnaryOp::ToMeanScalar;

    bool operator==(const BranchedGenome&) const = default;
};

/// Two inputs and three middle nodes. Middle node k folds all of its
/// predecessors (inputs plus earlier middle nodes, in order) with its binary
/// op, then applies its unary op. The final aggregation reduces the
/// concatenated middle-node outputs to a scalar.
struct DagGenome {
    std::array<StatKind, 2> inputs{StatKind::W, StatKind::W};
    struct MiddleNode {
        BinaryOp binary = BinaryOp::Sum;
        UnaryOp unary = UnaryOp::NoOp;
        bool operator==(const MiddleNode&) const = default;
    };
    std::array<MiddleNode, 3> middle{};
    UnaryOp aggregate = UnaryOp::ToMeanScalar;

    bool operator==(const DagGenome&) const = default;
};

using ProxyGenome = std::variant<SequentialGenome, BranchedGenome, DagGenome>;

Structure structure_of(const ProxyGenome& g);

/// Structural sanity: valid op ids and an aggregating final op.
bool validate(const ProxyGenome& g);

/// Random genome of the given structure. Unary slots use the OSP weights
/// (no_op 0.2, rest uniform) and binary slots the OSP binary weights when
/// use_osp is set; otherwise both are uniform. Inputs are always uniform.
/// The aggregation op is fixed to to_mean_scalar.
ProxyGenome sample_genome(Structure s, Rng& rng, bool use_osp = true);

UnaryOp sample_unary(Rng& rng, bool use_osp);
BinaryOp sample_binary(Rng& rng, bool use_osp);
StatKind sample_stat(Rng& rng);

std::string serialize(const ProxyGenome& g);
/// Throws ParseError on malformed JSON or unknown op names.
ProxyGenome deserialize(const std::string& text);

/// The shipped searched proxy: branch V -> abs -> log, branch W -> l1_norm
/// -> sqrt, product, mean.
ProxyGenome emq_genome();

}  // namespace emq::dsl
