#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "emq/tensor.hpp"

namespace emq::dsl {

/// Unary primitives UOP00..UOP23. Order is part of the stable op id.
enum class UnaryOp : int {
    NoOp = 0,
    Abs,
    Tanh,
    Pow,   // x^2
    Exp,
    Log,
    Relu,
    LeakyRelu,  // max(0.1 x, x)
    Swish,
    Mish,
    Invert,         // 1/x
    NormalizedSum,  // sum(x) / (numel + eps), scalar
    Normalize,      // (x - mean) / std
    Sigmoid,
    LogSoftmax,
    Softmax,
    Sqrt,
    Revert,         // -x
    FrobeniusNorm,  // scalar
    AbsLog,         // |ln x|
    L1Norm,         // sum |x| / (numel + eps), scalar
    MinMaxNormalize,
    ToMeanScalar,
    ToStdScalar,
};

/// Binary primitives BOP01..BOP04.
enum class BinaryOp : int {
    Sum = 0,
    Difference,
    Product,
    MatMul,
};

inline constexpr int kNumUnaryOps = 24;
inline constexpr int kNumBinaryOps = 4;

/// Denominator guard shared by normalized_sum, l1_norm and proxy formulas.
inline constexpr double kDenomEps = 1e-9;

/// Applies a unary primitive. Shape is preserved except for aggregating ops,
/// which always return a scalar. Domain violations produce non-finite values
/// rather than throwing.
Tensor apply_unary(UnaryOp op, const Tensor& t);

/// Elementwise binaries operate on flattened operands of equal length; a
/// scalar operand broadcasts. MatMul of two equal-length 1-D operands is the
/// inner product. Any other shape combination is invalid -> nullopt.
std::optional<Tensor> apply_binary(BinaryOp op, const Tensor& a, const Tensor& b);

/// True for ops that reduce any input to a scalar.
bool is_aggregating(UnaryOp op);

/// True when operand order does not affect the result.
bool is_commutative(BinaryOp op);

std::string_view unary_name(UnaryOp op);
std::string_view binary_name(BinaryOp op);
std::optional<UnaryOp> unary_from_name(std::string_view name);
std::optional<BinaryOp> binary_from_name(std::string_view name);

/// Sampling weight under operation sampling prioritization.
double unary_osp_weight(UnaryOp op);
double binary_osp_weight(BinaryOp op);

}  // namespace emq::dsl
