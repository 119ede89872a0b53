#pragma once

#include <functional>
#include <string>
#include <vector>

#include "emq/tensor.hpp"

namespace emq::ad {

enum class OpKind {
    Input,
    Param,
    Const,
    Add,
    Sub,
    Mul,
    Square,
    Abs,
    Sum,
    Mean,
    Relu,
    Linear,
    Conv3x3,
    BiasAdd,
    AvgPool2x2,
    Flatten,
    FakeQuant,
    SoftmaxCrossEntropy,
};

/// Uniform affine quantize-dequantize applied by FakeQuant nodes. Disabled
/// nodes are exact identities.
struct FakeQuantParams {
    bool enabled = false;
    double scale = 1.0;
    double zero_point = 0.0;
    double qmax = 0.0;  // number of levels - 1
};

struct Node {
    OpKind kind;
    std::vector<int> args;
    Tensor value;
    Tensor grad;
    FakeQuantParams fq;
};

/// Computation graph with cached forward values and reverse-mode gradients.
/// Nodes are created in topological order; forward_eval re-executes the same
/// graph against fresh inputs, backward_grad visits each node exactly once.
class Tape {
public:
    int input();
    int param(Tensor init);
    int constant(Tensor v);

    int add(int a, int b);
    int sub(int a, int b);
    int mul(int a, int b);
    int square(int a);
    int abs(int a);
    int sum(int a);
    int mean(int a);
    int relu(int a);
    /// x [B,I] times w [O,I] transposed -> [B,O].
    int linear(int x, int w);
    /// x [B,C,H,W], w [O,C,3,3], stride 1, zero padding 1 -> [B,O,H,W].
    int conv3x3(int x, int w);
    /// Adds a per-channel bias [O] to [B,O] or [B,O,H,W].
    int bias_add(int x, int b);
    int avgpool2x2(int x);
    int flatten(int x);
    int fake_quant(int x);
    /// logits [B,K], labels [B] of integral class ids -> scalar mean loss.
    int softmax_cross_entropy(int logits, int labels);

    /// Assigns `inputs` to the Input nodes in creation order, executes every
    /// node, and returns the value of `out_node`. Deterministic and pure.
    Tensor forward_eval(const std::vector<Tensor>& inputs, int out_node);

    /// Gradient of a scalar loss w.r.t. every registered parameter, in
    /// registration order. Requires a prior forward_eval over the graph.
    std::vector<Tensor> backward_grad(int loss_node);

    const Tensor& value(int node) const { return nodes_[static_cast<std::size_t>(node)].value; }
    const Tensor& grad(int node) const { return nodes_[static_cast<std::size_t>(node)].grad; }
    Tensor& param_value(int node);
    const std::vector<int>& param_nodes() const { return params_; }
    void set_fake_quant(int node, FakeQuantParams p);
    int node_count() const { return static_cast<int>(nodes_.size()); }

private:
    int push(OpKind kind, std::vector<int> args);
    void exec(int id);
    void backprop(int id);

    std::vector<Node> nodes_;
    std::vector<int> inputs_;
    std::vector<int> params_;
};

using GradFn = std::function<Tensor(const Tensor&)>;

/// Central-difference Hessian-vector product built from a gradient oracle:
/// (g(theta + eps v) - g(theta - eps v)) / (2 eps) with
/// eps = step_base * max(max_abs(theta), 1e-6). Throws if either perturbed
/// gradient is non-finite.
Tensor hvp(const GradFn& grad_at, const Tensor& theta, const Tensor& v, double step_base = 1e-3);

}  // namespace emq::ad
