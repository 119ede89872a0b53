#include "emq/dsl_ops.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>

namespace emq::dsl {

namespace {

Tensor map(const Tensor& t, const std::function<double(double)>& f) {
    Tensor out = t;
    for (double& v : out.data) v = f(v);
    return out;
}

double stable_sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double softplus(double x) {
    if (x > 30.0) return x;
    return std::log1p(std::exp(x));
}

double mean_of(const Tensor& t) {
    double s = 0.0;
    for (double v : t.data) s += v;
    return s / static_cast<double>(t.numel());
}

double pop_std_of(const Tensor& t) {
    const double m = mean_of(t);
    double s = 0.0;
    for (double v : t.data) s += (v - m) * (v - m);
    return std::sqrt(s / static_cast<double>(t.numel()));
}

Tensor softmax_impl(const Tensor& t, bool log_space) {
    const double hi = t.max_value();
    double denom = 0.0;
    for (double v : t.data) denom += std::exp(v - hi);
    Tensor out = t;
    if (log_space) {
        const double lse = hi + std::log(denom);
        for (double& v : out.data) v = v - lse;
    } else {
        for (double& v : out.data) v = std::exp(v - hi) / denom;
    }
    return out;
}

struct UnaryMeta {
    UnaryOp op;
    std::string_view name;
    bool aggregating;
};

constexpr std::array<UnaryMeta, kNumUnaryOps> kUnaryMeta = {{
    {UnaryOp::NoOp, "no_op", false},
    {UnaryOp::Abs, "element_wise_abs", false},
    {UnaryOp::Tanh, "element_wise_tanh", false},
    {UnaryOp::Pow, "element_wise_pow", false},
    {UnaryOp::Exp, "element_wise_exp", false},
    {UnaryOp::Log, "element_wise_log", false},
    {UnaryOp::Relu, "element_wise_relu", false},
    {UnaryOp::LeakyRelu, "element_wise_leaky_relu", false},
    {UnaryOp::Swish, "element_wise_swish", false},
    {UnaryOp::Mish, "element_wise_mish", false},
    {UnaryOp::Invert, "element_wise_invert", false},
    {UnaryOp::NormalizedSum, "element_wise_normalized_sum", true},
    {UnaryOp::Normalize, "normalize", false},
    {UnaryOp::Sigmoid, "sigmoid", false},
    {UnaryOp::LogSoftmax, "logsoftmax", false},
    {UnaryOp::Softmax, "softmax", false},
    {UnaryOp::Sqrt, "element_wise_sqrt", false},
    {UnaryOp::Revert, "element_wise_revert", false},
    {UnaryOp::FrobeniusNorm, "frobenius_norm", true},
    {UnaryOp::AbsLog, "element_wise_abslog", false},
    {UnaryOp::L1Norm, "l1_norm", true},
    {UnaryOp::MinMaxNormalize, "min_max_normalize", false},
    {UnaryOp::ToMeanScalar, "to_mean_scalar", true},
    {UnaryOp::ToStdScalar, "to_std_scalar", true},
}};

constexpr std::array<std::string_view, kNumBinaryOps> kBinaryNames = {
    "element_wise_sum",
    "element_wise_difference",
    "element_wise_product",
    "matrix_multiplication",
};

}  // namespace

Tensor apply_unary(UnaryOp op, const Tensor& t) {
    switch (op) {
        case UnaryOp::NoOp:
            return t;
        case UnaryOp::Abs:
            return map(t, [](double x) { return std::fabs(x); });
        case UnaryOp::Tanh:
            return map(t, [](double x) { return std::tanh(x); });
        case UnaryOp::Pow:
            return map(t, [](double x) { return x * x; });
        case UnaryOp::Exp:
            return map(t, [](double x) { return std::exp(x); });
        case UnaryOp::Log:
            return map(t, [](double x) { return std::log(x); });
        case UnaryOp::Relu:
            return map(t, [](double x) { return x > 0.0 ? x : 0.0; });
        case UnaryOp::LeakyRelu:
            return map(t, [](double x) { return std::max(0.1 * x, x); });
        case UnaryOp::Swish:
            return map(t, [](double x) { return x * stable_sigmoid(x); });
        case UnaryOp::Mish:
            return map(t, [](double x) { return x * std::tanh(softplus(x)); });
        case UnaryOp::Invert:
            return map(t, [](double x) { return 1.0 / x; });
        case UnaryOp::NormalizedSum: {
            double s = 0.0;
            for (double v : t.data) s += v;
            return Tensor::scalar(s / (static_cast<double>(t.numel()) + kDenomEps));
        }
        case UnaryOp::Normalize: {
            const double m = mean_of(t);
            const double sd = pop_std_of(t);
            return map(t, [m, sd](double x) { return (x - m) / sd; });
        }
        case UnaryOp::Sigmoid:
            return map(t, stable_sigmoid);
        case UnaryOp::LogSoftmax:
            return softmax_impl(t, true);
        case UnaryOp::Softmax:
            return softmax_impl(t, false);
        case UnaryOp::Sqrt:
            return map(t, [](double x) { return std::sqrt(x); });
        case UnaryOp::Revert:
            return map(t, [](double x) { return -x; });
        case UnaryOp::FrobeniusNorm: {
            double s = 0.0;
            for (double v : t.data) s += v * v;
            return Tensor::scalar(std::sqrt(s));
        }
        case UnaryOp::AbsLog:
            return map(t, [](double x) { return std::fabs(std::log(x)); });
        case UnaryOp::L1Norm: {
            double s = 0.0;
            for (double v : t.data) s += std::fabs(v);
            return Tensor::scalar(s / (static_cast<double>(t.numel()) + kDenomEps));
        }
        case UnaryOp::MinMaxNormalize: {
            const double lo = t.min_value();
            const double hi = t.max_value();
            return map(t, [lo, hi](double x) { return (x - lo) / (hi - lo); });
        }
        case UnaryOp::ToMeanScalar:
            return Tensor::scalar(mean_of(t));
        case UnaryOp::ToStdScalar:
            return Tensor::scalar(pop_std_of(t));
    }
    return t;
}

std::optional<Tensor> apply_binary(BinaryOp op, const Tensor& a, const Tensor& b) {
    const Tensor fa = a.flattened();
    const Tensor fb = b.flattened();
    const auto na = fa.numel();
    const auto nb = fb.numel();

    if (op == BinaryOp::MatMul) {
        if (na == 1 && nb == 1) return Tensor::scalar(fa.data[0] * fb.data[0]);
        if (na == nb) {
            double s = 0.0;
            for (std::int64_t i = 0; i < na; ++i) s += fa.data[i] * fb.data[i];
            return Tensor::scalar(s);
        }
        return std::nullopt;
    }

    // No broadcasting between tensors of different lengths. A scalar operand
    // is legal only where a canonical scalar action exists, i.e. for the
    // commutative ops (scalar shift for sum, scalar scaling for product).
    const bool scalar_action = is_commutative(op) && (na == 1 || nb == 1);
    if (na != nb && !scalar_action) return std::nullopt;
    const auto n = std::max(na, nb);
    Tensor out = na >= nb ? fa : fb;
    for (std::int64_t i = 0; i < n; ++i) {
        const double x = fa.data[na == 1 ? 0 : i];
        const double y = fb.data[nb == 1 ? 0 : i];
        switch (op) {
            case BinaryOp::Sum: out.data[i] = x + y; break;
            case BinaryOp::Difference: out.data[i] = x - y; break;
            case BinaryOp::Product: out.data[i] = x * y; break;
            case BinaryOp::MatMul: break;  // handled above
        }
    }
    return out;
}

bool is_aggregating(UnaryOp op) { return kUnaryMeta[static_cast<std::size_t>(op)].aggregating; }

bool is_commutative(BinaryOp op) { return op == BinaryOp::Sum || op == BinaryOp::Product; }

std::string_view unary_name(UnaryOp op) { return kUnaryMeta[static_cast<std::size_t>(op)].name; }

std::string_view binary_name(BinaryOp op) { return kBinaryNames[static_cast<std::size_t>(op)]; }

std::optional<UnaryOp> unary_from_name(std::string_view name) {
    for (const auto& m : kUnaryMeta) {
        if (m.name == name) return m.op;
    }
    return std::nullopt;
}

std::optional<BinaryOp> binary_from_name(std::string_view name) {
    for (int i = 0; i < kNumBinaryOps; ++i) {
        if (kBinaryNames[static_cast<std::size_t>(i)] == name) return static_cast<BinaryOp>(i);
    }
    return std::nullopt;
}

double unary_osp_weight(UnaryOp op) {
    // no_op gets 0.2; the remaining 23 ops share the rest equally.
    return op == UnaryOp::NoOp ? 0.2 : 0.8 / 23.0;
}

double binary_osp_weight(BinaryOp op) {
    switch (op) {
        case BinaryOp::Sum: return 0.6;
        case BinaryOp::Difference: return 0.3;
        case BinaryOp::Product: return 0.05;
        case BinaryOp::MatMul: return 0.05;
    }
    return 0.0;
}

}  // namespace emq::dsl
