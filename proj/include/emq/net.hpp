#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "emq/autodiff.hpp"
#include "emq/dataset.hpp"
#include "emq/tensor.hpp"

namespace emq {

enum class LayerKind { Linear, Conv3x3 };

struct LayerGeom {
    LayerKind kind;
    std::int64_t in_ch = 0;
    std::int64_t out_ch = 0;
    std::int64_t out_h = 1;  // output spatial size (conv only)
    std::int64_t out_w = 1;
    std::int64_t weight_numel = 0;
    std::int64_t macs = 0;
};

/// Small feed-forward classifier built on a Tape. Quantizable layers are the
/// conv/linear weight tensors in order; the classifier head stays in float.
struct ReferenceNet {
    std::string arch;
    std::uint64_t seed = 0;
    std::int64_t n_classes = 0;
    std::int64_t feature_dim = 0;
    std::vector<std::int64_t> input_shape;  // per-sample shape fed to the tape

    ad::Tape tape;
    int input_node = -1;
    int label_node = -1;
    int logits_node = -1;
    int output_sum_node = -1;  // scalar sum of logits
    int loss_node = -1;

    std::vector<int> weight_nodes;
    std::vector<int> bias_nodes;
    std::vector<int> act_nodes;     // post-activation value per quantizable layer
    std::vector<int> act_fq_nodes;  // fake-quant applied to each activation
    int head_weight_node = -1;
    int head_bias_node = -1;
    std::vector<LayerGeom> geoms;

    std::size_t num_quant_layers() const { return weight_nodes.size(); }
    const Tensor& weights(std::size_t layer) const;
    void set_weights(std::size_t layer, Tensor w);

    /// Reshapes a flat [B, feature_dim] batch to the tape's input layout.
    Tensor shape_input(const Tensor& flat_batch) const;
    /// Logits for a flat batch; does not touch loss or labels.
    Tensor logits(const Tensor& flat_batch);
    /// Mean cross-entropy over a flat batch with labels.
    double loss(const Tensor& flat_batch, const Tensor& labels);
};

/// Registered architectures: "mlp-s" (4 linear layers) and "cnn-s"
/// (4 conv + 2 linear layers). Unknown names throw.
ReferenceNet build_net(const std::string& spec, std::uint64_t seed, std::int64_t n_classes = 4,
                       std::int64_t feature_dim = 36);

struct TrainConfig {
    int epochs = 60;
    double lr = 0.10;
    double momentum = 0.9;
    int batch_size = 64;
};

TrainConfig default_train_config(const std::string& arch);

/// SGD with momentum on the train split; deterministic given seeds. Returns
/// final accuracy on the eval split. Throws on divergence, naming the epoch.
double train(ReferenceNet& net, const SyntheticDataset& ds, int epochs, double lr,
             std::uint64_t seed);
double train(ReferenceNet& net, const SyntheticDataset& ds, const TrainConfig& cfg,
             std::uint64_t seed);

/// Top-1 accuracy over a split.
double evaluate_accuracy(ReferenceNet& net, const SyntheticDataset& ds, Split split = Split::Eval);

}  // namespace emq
