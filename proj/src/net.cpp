#include "emq/net.hpp"

#include <cmath>
#include <stdexcept>

#include "emq/errors.hpp"
#include "emq/rng.hpp"

namespace emq {

namespace {

Tensor glorot_uniform(Rng& rng, std::vector<std::int64_t> shape, std::int64_t fan_in,
                      std::int64_t fan_out) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Tensor t = Tensor::zeros(std::move(shape));
    for (double& v : t.data) v = rng.uniform(-bound, bound);
    return t;
}

struct Builder {
    ReferenceNet& net;
    Rng& rng;
    int cur;                      // current tape node
    std::int64_t ch, h, w;        // current feature map (h=w=0 for flat)

    void conv(std::int64_t out_ch) {
        auto& tape = net.tape;
        const std::int64_t fan_in = ch * 9;
        const int wnode = tape.param(glorot_uniform(rng, {out_ch, ch, 3, 3}, fan_in, out_ch * 9));
        const int bnode = tape.param(Tensor::zeros({out_ch}));
        cur = tape.relu(tape.bias_add(tape.conv3x3(cur, wnode), bnode));
        const int fq = tape.fake_quant(cur);
        net.weight_nodes.push_back(wnode);
        net.bias_nodes.push_back(bnode);
        net.act_nodes.push_back(cur);
        net.act_fq_nodes.push_back(fq);
        net.geoms.push_back(LayerGeom{LayerKind::Conv3x3, ch, out_ch, h, w, out_ch * ch * 9,
                                      h * w * out_ch * ch * 9});
        cur = fq;
        ch = out_ch;
    }

    void pool() {
        cur = net.tape.avgpool2x2(cur);
        h /= 2;
        w /= 2;
    }

    void to_flat() {
        cur = net.tape.flatten(cur);
        ch = ch * h * w;
        h = w = 0;
    }

    void fc(std::int64_t out_dim) {
        auto& tape = net.tape;
        const int wnode = tape.param(glorot_uniform(rng, {out_dim, ch}, ch, out_dim));
        const int bnode = tape.param(Tensor::zeros({out_dim}));
        cur = tape.relu(tape.bias_add(tape.linear(cur, wnode), bnode));
        const int fq = tape.fake_quant(cur);
        net.weight_nodes.push_back(wnode);
        net.bias_nodes.push_back(bnode);
        net.act_nodes.push_back(cur);
        net.act_fq_nodes.push_back(fq);
        net.geoms.push_back(LayerGeom{LayerKind::Linear, ch, out_dim, 1, 1, out_dim * ch,
                                      out_dim * ch});
        cur = fq;
        ch = out_dim;
    }

    void head(std::int64_t n_classes) {
        auto& tape = net.tape;
        net.head_weight_node = tape.param(glorot_uniform(rng, {n_classes, ch}, ch, n_classes));
        net.head_bias_node = tape.param(Tensor::zeros({n_classes}));
        net.logits_node = tape.bias_add(tape.linear(cur, net.head_weight_node), net.head_bias_node);
    }
};

}  // namespace

const Tensor& ReferenceNet::weights(std::size_t layer) const {
    return tape.value(weight_nodes.at(layer));
}

void ReferenceNet::set_weights(std::size_t layer, Tensor w) {
    tape.param_value(weight_nodes.at(layer)) = std::move(w);
}

Tensor ReferenceNet::shape_input(const Tensor& flat_batch) const {
    if (flat_batch.shape.size() != 2 || flat_batch.shape[1] != feature_dim) {
        throw ShapeError("net: input batch must be [B, " + std::to_string(feature_dim) + "]");
    }
    std::vector<std::int64_t> shp = {flat_batch.shape[0]};
    shp.insert(shp.end(), input_shape.begin(), input_shape.end());
    return Tensor(shp, flat_batch.data);
}

Tensor ReferenceNet::logits(const Tensor& flat_batch) {
    const Tensor dummy_labels = Tensor::zeros({flat_batch.shape[0]});
    return tape.forward_eval({shape_input(flat_batch), dummy_labels}, logits_node);
}

double ReferenceNet::loss(const Tensor& flat_batch, const Tensor& labels) {
    return tape.forward_eval({shape_input(flat_batch), labels}, loss_node).scalar_value();
}

ReferenceNet build_net(const std::string& spec, std::uint64_t seed, std::int64_t n_classes,
                       std::int64_t feature_dim) {
    if (spec != "mlp-s" && spec != "cnn-s") {
        throw std::invalid_argument("build_net: unknown architecture '" + spec + "'");
    }
    ReferenceNet net;
    net.arch = spec;
    net.seed = seed;
    net.n_classes = n_classes;
    net.feature_dim = feature_dim;

    Rng rng = Rng::stream(seed, "net-init-" + spec);
    auto& tape = net.tape;
    net.input_node = tape.input();
    net.label_node = tape.input();

    if (spec == "mlp-s") {
        net.input_shape = {feature_dim};
        Builder b{net, rng, net.input_node, feature_dim, 0, 0};
        b.fc(24);
        b.fc(16);
        b.fc(12);
        b.fc(8);
        b.head(n_classes);
    } else {
        const auto side = static_cast<std::int64_t>(std::llround(std::sqrt(static_cast<double>(feature_dim))));
        if (side * side != feature_dim || side % 2 != 0) {
            throw std::invalid_argument("build_net: cnn-s needs a square, even-sided input");
        }
        net.input_shape = {1, side, side};
        Builder b{net, rng, net.input_node, 1, side, side};
        b.conv(4);
        b.conv(6);
        b.pool();
        b.conv(8);
        b.conv(8);
        b.to_flat();
        b.fc(32);
        b.fc(16);
        b.head(n_classes);
    }
    net.output_sum_node = tape.sum(net.logits_node);
    net.loss_node = tape.softmax_cross_entropy(net.logits_node, net.label_node);
    return net;
}

TrainConfig default_train_config(const std::string& arch) {
    TrainConfig cfg;
    if (arch == "cnn-s") {
        cfg.epochs = 60;
        cfg.lr = 0.02;  // deeper stack; 0.05+ collapses into dead ReLUs
    }
    return cfg;
}

double train(ReferenceNet& net, const SyntheticDataset& ds, int epochs, double lr,
             std::uint64_t seed) {
    TrainConfig cfg = default_train_config(net.arch);
    cfg.epochs = epochs;
    cfg.lr = lr;
    return train(net, ds, cfg, seed);
}

double train(ReferenceNet& net, const SyntheticDataset& ds, const TrainConfig& cfg,
             std::uint64_t seed) {
    if (cfg.epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
    Rng shuffle_rng = Rng::stream(seed, "train-shuffle");

    std::vector<int> params = net.tape.param_nodes();
    std::vector<Tensor> momentum;
    momentum.reserve(params.size());
    for (int p : params) momentum.push_back(Tensor::zeros(net.tape.value(p).shape));

    std::vector<std::size_t> train_idx = ds.indices_of(Split::Train);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle_rng.shuffle(train_idx);
        for (std::size_t start = 0; start < train_idx.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t stop = std::min(train_idx.size(), start + static_cast<std::size_t>(cfg.batch_size));
            std::vector<std::size_t> batch(train_idx.begin() + static_cast<std::ptrdiff_t>(start),
                                           train_idx.begin() + static_cast<std::ptrdiff_t>(stop));
            const double loss = net.loss(ds.batch_inputs(batch), ds.batch_labels(batch));
            if (!std::isfinite(loss)) {
                throw std::runtime_error("train: non-finite loss at epoch " + std::to_string(epoch));
            }
            std::vector<Tensor> grads = net.tape.backward_grad(net.loss_node);
            for (std::size_t p = 0; p < params.size(); ++p) {
                Tensor& value = net.tape.param_value(params[p]);
                Tensor& mom = momentum[p];
                for (std::int64_t i = 0; i < value.numel(); ++i) {
                    mom.data[i] = cfg.momentum * mom.data[i] + grads[p].data[i];
                    value.data[i] -= cfg.lr * mom.data[i];
                }
            }
        }
    }
    return evaluate_accuracy(net, ds, Split::Eval);
}

double evaluate_accuracy(ReferenceNet& net, const SyntheticDataset& ds, Split split) {
    const std::vector<std::size_t> idx = ds.indices_of(split);
    if (idx.empty()) throw std::invalid_argument("evaluate_accuracy: empty split");
    std::size_t correct = 0;
    const std::size_t chunk = 256;
    for (std::size_t start = 0; start < idx.size(); start += chunk) {
        const std::size_t stop = std::min(idx.size(), start + chunk);
        std::vector<std::size_t> batch(idx.begin() + static_cast<std::ptrdiff_t>(start),
                                       idx.begin() + static_cast<std::ptrdiff_t>(stop));
        const Tensor logits = net.logits(ds.batch_inputs(batch));
        const auto K = logits.shape[1];
        for (std::size_t r = 0; r < batch.size(); ++r) {
            std::int64_t best = 0;
            for (std::int64_t k = 1; k < K; ++k) {
                if (logits.data[static_cast<std::int64_t>(r) * K + k] >
                    logits.data[static_cast<std::int64_t>(r) * K + best]) {
                    best = k;
                }
            }
            if (best == ds.labels[batch[r]]) ++correct;
        }
    }
    return static_cast<double>(correct) / static_cast<double>(idx.size());
}

}  // namespace emq
