#include "emq/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "emq/errors.hpp"

namespace emq::ad {

namespace {

std::string node_tag(OpKind kind, int id) {
    const char* name = "?";
    switch (kind) {
        case OpKind::Input: name = "input"; break;
        case OpKind::Param: name = "param"; break;
        case OpKind::Const: name = "const"; break;
        case OpKind::Add: name = "add"; break;
        case OpKind::Sub: name = "sub"; break;
        case OpKind::Mul: name = "mul"; break;
        case OpKind::Square: name = "square"; break;
        case OpKind::Abs: name = "abs"; break;
        case OpKind::Sum: name = "sum"; break;
        case OpKind::Mean: name = "mean"; break;
        case OpKind::Relu: name = "relu"; break;
        case OpKind::Linear: name = "linear"; break;
        case OpKind::Conv3x3: name = "conv3x3"; break;
        case OpKind::BiasAdd: name = "bias_add"; break;
        case OpKind::AvgPool2x2: name = "avgpool2x2"; break;
        case OpKind::Flatten: name = "flatten"; break;
        case OpKind::FakeQuant: name = "fake_quant"; break;
        case OpKind::SoftmaxCrossEntropy: name = "softmax_cross_entropy"; break;
    }
    return std::string(name) + "#" + std::to_string(id);
}

double fq_apply(const FakeQuantParams& p, double x) {
    if (!p.enabled) return x;
    double q = std::nearbyint((x - p.zero_point) / p.scale);
    q = std::clamp(q, 0.0, p.qmax);
    return q * p.scale + p.zero_point;
}

}  // namespace

int Tape::push(OpKind kind, std::vector<int> args) {
    for (int a : args) {
        if (a < 0 || a >= node_count()) throw std::invalid_argument("tape: bad node ref");
    }
    nodes_.push_back(Node{kind, std::move(args), {}, {}, {}});
    return node_count() - 1;
}

int Tape::input() {
    const int id = push(OpKind::Input, {});
    inputs_.push_back(id);
    return id;
}

int Tape::param(Tensor init) {
    const int id = push(OpKind::Param, {});
    nodes_.back().value = std::move(init);
    params_.push_back(id);
    return id;
}

int Tape::constant(Tensor v) {
    const int id = push(OpKind::Const, {});
    nodes_.back().value = std::move(v);
    return id;
}

int Tape::add(int a, int b) { return push(OpKind::Add, {a, b}); }
int Tape::sub(int a, int b) { return push(OpKind::Sub, {a, b}); }
int Tape::mul(int a, int b) { return push(OpKind::Mul, {a, b}); }
int Tape::square(int a) { return push(OpKind::Square, {a}); }
int Tape::abs(int a) { return push(OpKind::Abs, {a}); }
int Tape::sum(int a) { return push(OpKind::Sum, {a}); }
int Tape::mean(int a) { return push(OpKind::Mean, {a}); }
int Tape::relu(int a) { return push(OpKind::Relu, {a}); }
int Tape::linear(int x, int w) { return push(OpKind::Linear, {x, w}); }
int Tape::conv3x3(int x, int w) { return push(OpKind::Conv3x3, {x, w}); }
int Tape::bias_add(int x, int b) { return push(OpKind::BiasAdd, {x, b}); }
int Tape::avgpool2x2(int x) { return push(OpKind::AvgPool2x2, {x}); }
int Tape::flatten(int x) { return push(OpKind::Flatten, {x}); }
int Tape::fake_quant(int x) { return push(OpKind::FakeQuant, {x}); }
int Tape::softmax_cross_entropy(int logits, int labels) {
    return push(OpKind::SoftmaxCrossEntropy, {logits, labels});
}

Tensor& Tape::param_value(int node) {
    Node& n = nodes_.at(static_cast<std::size_t>(node));
    if (n.kind != OpKind::Param) throw std::invalid_argument("tape: not a param node");
    return n.value;
}

void Tape::set_fake_quant(int node, FakeQuantParams p) {
    Node& n = nodes_.at(static_cast<std::size_t>(node));
    if (n.kind != OpKind::FakeQuant) throw std::invalid_argument("tape: not a fake_quant node");
    n.fq = p;
}

void Tape::exec(int id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    auto in = [&](int k) -> Tensor& { return nodes_[static_cast<std::size_t>(n.args[static_cast<std::size_t>(k)])].value; };
    switch (n.kind) {
        case OpKind::Input:
        case OpKind::Param:
        case OpKind::Const:
            return;
        case OpKind::Add:
        case OpKind::Sub:
        case OpKind::Mul: {
            const Tensor& a = in(0);
            const Tensor& b = in(1);
            if (a.shape != b.shape) {
                throw ShapeError("forward: operand shape mismatch at " + node_tag(n.kind, id));
            }
            n.value = a;
            for (std::int64_t i = 0; i < a.numel(); ++i) {
                const double x = a.data[i];
                const double y = b.data[i];
                n.value.data[i] = n.kind == OpKind::Add ? x + y : (n.kind == OpKind::Sub ? x - y : x * y);
            }
            return;
        }
        case OpKind::Square: {
            n.value = in(0);
            for (double& v : n.value.data) v = v * v;
            return;
        }
        case OpKind::Abs: {
            n.value = in(0);
            for (double& v : n.value.data) v = std::fabs(v);
            return;
        }
        case OpKind::Sum: {
            double s = 0.0;
            for (double v : in(0).data) s += v;
            n.value = Tensor::scalar(s);
            return;
        }
        case OpKind::Mean: {
            double s = 0.0;
            for (double v : in(0).data) s += v;
            n.value = Tensor::scalar(s / static_cast<double>(in(0).numel()));
            return;
        }
        case OpKind::Relu: {
            n.value = in(0);
            for (double& v : n.value.data) v = v > 0.0 ? v : 0.0;
            return;
        }
        case OpKind::Linear: {
            const Tensor& x = in(0);
            const Tensor& w = in(1);
            if (x.shape.size() != 2 || w.shape.size() != 2 || x.shape[1] != w.shape[1]) {
                throw ShapeError("forward: linear shape mismatch at " + node_tag(n.kind, id));
            }
            const auto B = x.shape[0], I = x.shape[1], O = w.shape[0];
            n.value = Tensor::zeros({B, O});
            for (std::int64_t b = 0; b < B; ++b) {
                for (std::int64_t o = 0; o < O; ++o) {
                    double s = 0.0;
                    for (std::int64_t i = 0; i < I; ++i) s += x.data[b * I + i] * w.data[o * I + i];
                    n.value.data[b * O + o] = s;
                }
            }
            return;
        }
        case OpKind::Conv3x3: {
            const Tensor& x = in(0);
            const Tensor& w = in(1);
            if (x.shape.size() != 4 || w.shape.size() != 4 || x.shape[1] != w.shape[1] ||
                w.shape[2] != 3 || w.shape[3] != 3) {
                throw ShapeError("forward: conv3x3 shape mismatch at " + node_tag(n.kind, id));
            }
            const auto B = x.shape[0], C = x.shape[1], H = x.shape[2], W = x.shape[3];
            const auto O = w.shape[0];
            n.value = Tensor::zeros({B, O, H, W});
            for (std::int64_t b = 0; b < B; ++b)
                for (std::int64_t o = 0; o < O; ++o)
                    for (std::int64_t i = 0; i < H; ++i)
                        for (std::int64_t j = 0; j < W; ++j) {
                            double s = 0.0;
                            for (std::int64_t c = 0; c < C; ++c)
                                for (std::int64_t u = 0; u < 3; ++u) {
                                    const std::int64_t ii = i + u - 1;
                                    if (ii < 0 || ii >= H) continue;
                                    for (std::int64_t v = 0; v < 3; ++v) {
                                        const std::int64_t jj = j + v - 1;
                                        if (jj < 0 || jj >= W) continue;
                                        s += x.data[((b * C + c) * H + ii) * W + jj] *
                                             w.data[((o * C + c) * 3 + u) * 3 + v];
                                    }
                                }
                            n.value.data[((b * O + o) * H + i) * W + j] = s;
                        }
            return;
        }
        case OpKind::BiasAdd: {
            const Tensor& x = in(0);
            const Tensor& bias = in(1);
            const bool ok = bias.shape.size() == 1 &&
                            ((x.shape.size() == 2 && x.shape[1] == bias.shape[0]) ||
                             (x.shape.size() == 4 && x.shape[1] == bias.shape[0]));
            if (!ok) throw ShapeError("forward: bias shape mismatch at " + node_tag(n.kind, id));
            n.value = x;
            const auto O = bias.shape[0];
            const auto inner = x.shape.size() == 4 ? x.shape[2] * x.shape[3] : 1;
            const auto B = x.shape[0];
            for (std::int64_t b = 0; b < B; ++b)
                for (std::int64_t o = 0; o < O; ++o)
                    for (std::int64_t k = 0; k < inner; ++k)
                        n.value.data[(b * O + o) * inner + k] += bias.data[o];
            return;
        }
        case OpKind::AvgPool2x2: {
            const Tensor& x = in(0);
            if (x.shape.size() != 4 || x.shape[2] % 2 != 0 || x.shape[3] % 2 != 0) {
                throw ShapeError("forward: avgpool2x2 needs even [B,C,H,W] at " + node_tag(n.kind, id));
            }
            const auto B = x.shape[0], C = x.shape[1], H = x.shape[2], W = x.shape[3];
            n.value = Tensor::zeros({B, C, H / 2, W / 2});
            for (std::int64_t b = 0; b < B; ++b)
                for (std::int64_t c = 0; c < C; ++c)
                    for (std::int64_t i = 0; i < H / 2; ++i)
                        for (std::int64_t j = 0; j < W / 2; ++j) {
                            double s = 0.0;
                            for (int u = 0; u < 2; ++u)
                                for (int v = 0; v < 2; ++v)
                                    s += x.data[((b * C + c) * H + 2 * i + u) * W + 2 * j + v];
                            n.value.data[((b * C + c) * (H / 2) + i) * (W / 2) + j] = s / 4.0;
                        }
            return;
        }
        case OpKind::Flatten: {
            const Tensor& x = in(0);
            if (x.shape.empty()) throw ShapeError("forward: flatten needs rank >= 1 at " + node_tag(n.kind, id));
            const auto B = x.shape[0];
            n.value = Tensor({B, x.numel() / B}, x.data);
            return;
        }
        case OpKind::FakeQuant: {
            n.value = in(0);
            if (n.fq.enabled) {
                for (double& v : n.value.data) v = fq_apply(n.fq, v);
            }
            return;
        }
        case OpKind::SoftmaxCrossEntropy: {
            const Tensor& logits = in(0);
            const Tensor& labels = in(1);
            if (logits.shape.size() != 2 || labels.shape.size() != 1 ||
                logits.shape[0] != labels.shape[0]) {
                throw ShapeError("forward: cross-entropy shape mismatch at " + node_tag(n.kind, id));
            }
            const auto B = logits.shape[0], K = logits.shape[1];
            double total = 0.0;
            for (std::int64_t b = 0; b < B; ++b) {
                double hi = logits.data[b * K];
                for (std::int64_t k = 1; k < K; ++k) hi = std::max(hi, logits.data[b * K + k]);
                double denom = 0.0;
                for (std::int64_t k = 0; k < K; ++k) denom += std::exp(logits.data[b * K + k] - hi);
                const auto y = static_cast<std::int64_t>(labels.data[b]);
                if (y < 0 || y >= K) throw std::invalid_argument("forward: label out of range");
                total += hi + std::log(denom) - logits.data[b * K + y];
            }
            n.value = Tensor::scalar(total / static_cast<double>(B));
            return;
        }
    }
}

Tensor Tape::forward_eval(const std::vector<Tensor>& inputs, int out_node) {
    if (inputs.size() != inputs_.size()) {
        throw std::invalid_argument("forward: expected " + std::to_string(inputs_.size()) +
                                    " inputs, got " + std::to_string(inputs.size()));
    }
    if (out_node < 0 || out_node >= node_count()) throw std::invalid_argument("forward: bad out node");
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        nodes_[static_cast<std::size_t>(inputs_[i])].value = inputs[i];
    }
    // Creation order is topological; nodes past out_node cannot feed it.
    for (int id = 0; id <= out_node; ++id) exec(id);
    return nodes_[static_cast<std::size_t>(out_node)].value;
}

void Tape::backprop(int id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.grad.data.empty()) return;  // no downstream use
    auto arg = [&](int k) -> Node& { return nodes_[static_cast<std::size_t>(n.args[static_cast<std::size_t>(k)])]; };
    auto accum = [&](Node& target, std::int64_t i, double g) {
        if (target.grad.data.empty()) target.grad = Tensor::zeros(target.value.shape);
        target.grad.data[i] += g;
    };
    switch (n.kind) {
        case OpKind::Input:
        case OpKind::Param:
        case OpKind::Const:
            return;
        case OpKind::Add:
            for (std::int64_t i = 0; i < n.value.numel(); ++i) {
                accum(arg(0), i, n.grad.data[i]);
                accum(arg(1), i, n.grad.data[i]);
            }
            return;
        case OpKind::Sub:
            for (std::int64_t i = 0; i < n.value.numel(); ++i) {
                accum(arg(0), i, n.grad.data[i]);
                accum(arg(1), i, -n.grad.data[i]);
            }
            return;
        case OpKind::Mul:
            for (std::int64_t i = 0; i < n.value.numel(); ++i) {
                accum(arg(0), i, n.grad.data[i] * arg(1).value.data[i]);
                accum(arg(1), i, n.grad.data[i] * arg(0).value.data[i]);
            }
            return;
        case OpKind::Square:
            for (std::int64_t i = 0; i < n.value.numel(); ++i) {
                accum(arg(0), i, 2.0 * arg(0).value.data[i] * n.grad.data[i]);
            }
            return;
        case OpKind::Abs:
            for (std::int64_t i = 0; i < n.value.numel(); ++i) {
                const double x = arg(0).value.data[i];
                accum(arg(0), i, (x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0)) * n.grad.data[i]);
            }
            return;
        case OpKind::Sum: {
            const double g = n.grad.data[0];
            for (std::int64_t i = 0; i < arg(0).value.numel(); ++i) accum(arg(0), i, g);
            return;
        }
        case OpKind::Mean: {
            const double g = n.grad.data[0] / static_cast<double>(arg(0).value.numel());
            for (std::int64_t i = 0; i < arg(0).value.numel(); ++i) accum(arg(0), i, g);
            return;
        }
        case OpKind::Relu:
            for (std::int64_t i = 0; i < n.value.numel(); ++i) {
                if (arg(0).value.data[i] > 0.0) accum(arg(0), i, n.grad.data[i]);
                else accum(arg(0), i, 0.0);
            }
            return;
        case OpKind::Linear: {
            const Tensor& x = arg(0).value;
            const Tensor& w = arg(1).value;
            const auto B = x.shape[0], I = x.shape[1], O = w.shape[0];
            if (arg(0).grad.data.empty()) arg(0).grad = Tensor::zeros(x.shape);
            if (arg(1).grad.data.empty()) arg(1).grad = Tensor::zeros(w.shape);
            for (std::int64_t b = 0; b < B; ++b)
                for (std::int64_t o = 0; o < O; ++o) {
                    const double g = n.grad.data[b * O + o];
                    if (g == 0.0) continue;
                    for (std::int64_t i = 0; i < I; ++i) {
                        arg(0).grad.data[b * I + i] += g * w.data[o * I + i];
                        arg(1).grad.data[o * I + i] += g * x.data[b * I + i];
                    }
                }
            return;
        }
        case OpKind::Conv3x3: {
            const Tensor& x = arg(0).value;
            const Tensor& w = arg(1).value;
            const auto B = x.shape[0], C = x.shape[1], H = x.shape[2], W = x.shape[3];
            const auto O = w.shape[0];
            if (arg(0).grad.data.empty()) arg(0).grad = Tensor::zeros(x.shape);
            if (arg(1).grad.data.empty()) arg(1).grad = Tensor::zeros(w.shape);
            for (std::int64_t b = 0; b < B; ++b)
                for (std::int64_t o = 0; o < O; ++o)
                    for (std::int64_t i = 0; i < H; ++i)
                        for (std::int64_t j = 0; j < W; ++j) {
                            const double g = n.grad.data[((b * O + o) * H + i) * W + j];
                            if (g == 0.0) continue;
                            for (std::int64_t c = 0; c < C; ++c)
                                for (std::int64_t u = 0; u < 3; ++u) {
                                    const std::int64_t ii = i + u - 1;
                                    if (ii < 0 || ii >= H) continue;
                                    for (std::int64_t v = 0; v < 3; ++v) {
                                        const std::int64_t jj = j + v - 1;
                                        if (jj < 0 || jj >= W) continue;
                                        arg(0).grad.data[((b * C + c) * H + ii) * W + jj] +=
                                            g * w.data[((o * C + c) * 3 + u) * 3 + v];
                                        arg(1).grad.data[((o * C + c) * 3 + u) * 3 + v] +=
                                            g * x.data[((b * C + c) * H + ii) * W + jj];
                                    }
                                }
                        }
            return;
        }
        case OpKind::BiasAdd: {
            const Tensor& x = arg(0).value;
            const auto O = arg(1).value.shape[0];
            const auto inner = x.shape.size() == 4 ? x.shape[2] * x.shape[3] : 1;
            const auto B = x.shape[0];
            for (std::int64_t b = 0; b < B; ++b)
                for (std::int64_t o = 0; o < O; ++o)
                    for (std::int64_t k = 0; k < inner; ++k) {
                        const double g = n.grad.data[(b * O + o) * inner + k];
                        accum(arg(0), (b * O + o) * inner + k, g);
                        accum(arg(1), o, g);
                    }
            return;
        }
        case OpKind::AvgPool2x2: {
            const Tensor& x = arg(0).value;
            const auto B = x.shape[0], C = x.shape[1], H = x.shape[2], W = x.shape[3];
            if (arg(0).grad.data.empty()) arg(0).grad = Tensor::zeros(x.shape);
            for (std::int64_t b = 0; b < B; ++b)
                for (std::int64_t c = 0; c < C; ++c)
                    for (std::int64_t i = 0; i < H / 2; ++i)
                        for (std::int64_t j = 0; j < W / 2; ++j) {
                            const double g = n.grad.data[((b * C + c) * (H / 2) + i) * (W / 2) + j] / 4.0;
                            for (int u = 0; u < 2; ++u)
                                for (int v = 0; v < 2; ++v)
                                    arg(0).grad.data[((b * C + c) * H + 2 * i + u) * W + 2 * j + v] += g;
                        }
            return;
        }
        case OpKind::Flatten: {
            if (arg(0).grad.data.empty()) arg(0).grad = Tensor::zeros(arg(0).value.shape);
            for (std::int64_t i = 0; i < n.value.numel(); ++i) arg(0).grad.data[i] += n.grad.data[i];
            return;
        }
        case OpKind::FakeQuant: {
            // Straight-through inside the clip range.
            for (std::int64_t i = 0; i < n.value.numel(); ++i) {
                double pass = 1.0;
                if (n.fq.enabled) {
                    const double q = (arg(0).value.data[i] - n.fq.zero_point) / n.fq.scale;
                    pass = (q >= 0.0 && q <= n.fq.qmax) ? 1.0 : 0.0;
                }
                accum(arg(0), i, pass * n.grad.data[i]);
            }
            return;
        }
        case OpKind::SoftmaxCrossEntropy: {
            const Tensor& logits = arg(0).value;
            const Tensor& labels = arg(1).value;
            const auto B = logits.shape[0], K = logits.shape[1];
            const double g = n.grad.data[0] / static_cast<double>(B);
            if (arg(0).grad.data.empty()) arg(0).grad = Tensor::zeros(logits.shape);
            for (std::int64_t b = 0; b < B; ++b) {
                double hi = logits.data[b * K];
                for (std::int64_t k = 1; k < K; ++k) hi = std::max(hi, logits.data[b * K + k]);
                double denom = 0.0;
                for (std::int64_t k = 0; k < K; ++k) denom += std::exp(logits.data[b * K + k] - hi);
                const auto y = static_cast<std::int64_t>(labels.data[b]);
                for (std::int64_t k = 0; k < K; ++k) {
                    const double p = std::exp(logits.data[b * K + k] - hi) / denom;
                    arg(0).grad.data[b * K + k] += g * (p - (k == y ? 1.0 : 0.0));
                }
            }
            return;
        }
    }
}

std::vector<Tensor> Tape::backward_grad(int loss_node) {
    Node& loss = nodes_.at(static_cast<std::size_t>(loss_node));
    if (!loss.value.is_scalar()) throw std::invalid_argument("backward: loss node is not scalar");
    for (Node& n : nodes_) n.grad = Tensor{};
    loss.grad = Tensor(loss.value.shape, {1.0});
    for (int id = loss_node; id >= 0; --id) backprop(id);
    std::vector<Tensor> out;
    out.reserve(params_.size());
    for (int p : params_) {
        Node& n = nodes_[static_cast<std::size_t>(p)];
        out.push_back(n.grad.data.empty() ? Tensor::zeros(n.value.shape) : n.grad);
    }
    return out;
}

Tensor hvp(const GradFn& grad_at, const Tensor& theta, const Tensor& v, double step_base) {
    if (theta.shape != v.shape) throw ShapeError("hvp: v shape differs from theta");
    if (step_base <= 0.0) throw std::invalid_argument("hvp: step must be positive");
    const double eps = step_base * std::max(theta.max_abs(), 1e-6);
    Tensor plus = theta;
    Tensor minus = theta;
    for (std::int64_t i = 0; i < theta.numel(); ++i) {
        plus.data[i] += eps * v.data[i];
        minus.data[i] -= eps * v.data[i];
    }
    const Tensor gp = grad_at(plus);
    const Tensor gm = grad_at(minus);
    if (!gp.all_finite() || !gm.all_finite()) {
        throw std::runtime_error("hvp: non-finite gradient at perturbed point");
    }
    Tensor out = gp;
    for (std::int64_t i = 0; i < out.numel(); ++i) {
        out.data[i] = (gp.data[i] - gm.data[i]) / (2.0 * eps);
    }
    return out;
}

}  // namespace emq::ad
