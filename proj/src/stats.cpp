#include "emq/stats.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "emq/rng.hpp"

namespace emq {

namespace {

void check_finite(const Tensor& t, const char* kind, std::size_t layer) {
    if (!t.all_finite()) {
        throw std::runtime_error("extract_stats: non-finite " + std::string(kind) + " at layer " +
                                 std::to_string(layer));
    }
}

Tensor concat_weights(const ReferenceNet& net) {
    std::vector<double> all;
    for (std::size_t j = 0; j < net.num_quant_layers(); ++j) {
        const Tensor& w = net.weights(j);
        all.insert(all.end(), w.data.begin(), w.data.end());
    }
    return Tensor::vec(std::move(all));
}

void scatter_weights(ReferenceNet& net, const Tensor& flat) {
    std::size_t off = 0;
    for (std::size_t j = 0; j < net.num_quant_layers(); ++j) {
        Tensor w = net.weights(j);
        for (double& v : w.data) v = flat.data[off++];
        net.set_weights(j, std::move(w));
    }
}

}  // namespace

Tensor hutchinson_diag(const ad::GradFn& grad_at, const Tensor& theta, int probes,
                       std::uint64_t seed, double step_base) {
    if (probes < 1) throw std::invalid_argument("hutchinson_diag: probes must be >= 1");
    Rng rng = Rng::stream(seed, "hutchinson");
    Tensor acc = Tensor::zeros(theta.shape);
    Tensor v = acc;
    for (int p = 0; p < probes; ++p) {
        for (double& x : v.data) x = rng.rademacher();
        const Tensor hv = ad::hvp(grad_at, theta, v, step_base);
        for (std::int64_t i = 0; i < acc.numel(); ++i) acc.data[i] += v.data[i] * hv.data[i];
    }
    for (double& x : acc.data) x /= static_cast<double>(probes);
    return acc;
}

std::vector<LayerStats> extract_stats(const ReferenceNet& net, const SyntheticDataset& ds,
                                      std::uint64_t seed, int n_hutchinson_probes) {
    if (n_hutchinson_probes < 1) throw std::invalid_argument("extract_stats: probes must be >= 1");
    ReferenceNet work = net;  // keep the caller's net untouched
    const std::vector<std::size_t> calib = ds.indices_of(Split::Calib);
    if (calib.empty()) throw std::invalid_argument("extract_stats: empty calibration split");
    const Tensor x = ds.batch_inputs(calib);
    const Tensor y = ds.batch_labels(calib);

    const std::size_t L = work.num_quant_layers();
    std::vector<LayerStats> stats(L);

    // W, G, A from one forward/backward over the calibration batch.
    work.loss(x, y);
    std::vector<Tensor> grads = work.tape.backward_grad(work.loss_node);
    const std::vector<int>& params = work.tape.param_nodes();
    for (std::size_t j = 0; j < L; ++j) {
        stats[j].W = work.weights(j);
        for (std::size_t p = 0; p < params.size(); ++p) {
            if (params[p] == work.weight_nodes[j]) stats[j].G = grads[p];
        }
        const Tensor& act = work.tape.value(work.act_nodes[j]);
        stats[j].A = Tensor({act.shape[0], act.numel() / act.shape[0]}, act.data);
        check_finite(stats[j].W, "W", j);
        check_finite(stats[j].G, "G", j);
        check_finite(stats[j].A, "A", j);
    }

    // H: Hutchinson diagonal of the task-loss Hessian w.r.t. all quantizable
    // weights jointly, split back per layer.
    const Tensor theta0 = concat_weights(work);
    ad::GradFn grad_at = [&](const Tensor& theta) {
        scatter_weights(work, theta);
        work.loss(x, y);
        std::vector<Tensor> g = work.tape.backward_grad(work.loss_node);
        std::vector<double> flat;
        for (std::size_t j = 0; j < L; ++j) {
            for (std::size_t p = 0; p < params.size(); ++p) {
                if (params[p] == work.weight_nodes[j]) {
                    flat.insert(flat.end(), g[p].data.begin(), g[p].data.end());
                }
            }
        }
        return Tensor::vec(std::move(flat));
    };
    const Tensor hdiag = hutchinson_diag(grad_at, theta0, n_hutchinson_probes, seed);
    scatter_weights(work, theta0);
    std::size_t off = 0;
    for (std::size_t j = 0; j < L; ++j) {
        const auto n = stats[j].W.numel();
        std::vector<double> part(hdiag.data.begin() + static_cast<std::ptrdiff_t>(off),
                                 hdiag.data.begin() + static_cast<std::ptrdiff_t>(off + static_cast<std::size_t>(n)));
        stats[j].H = Tensor::vec(std::move(part));
        off += static_cast<std::size_t>(n);
        check_finite(stats[j].H, "H", j);
    }

    // V: gradient of the synaptic-flow loss. All parameters (including the
    // head) are replaced by their absolute values and the input is all ones.
    std::vector<Tensor> saved;
    for (int p : params) saved.push_back(work.tape.value(p));
    for (int p : params) {
        Tensor& v = work.tape.param_value(p);
        for (double& e : v.data) e = std::fabs(e);
    }
    const Tensor ones = Tensor::full({1, work.feature_dim}, 1.0);
    const Tensor dummy = Tensor::zeros({1});
    work.tape.forward_eval({work.shape_input(ones), dummy}, work.output_sum_node);
    std::vector<Tensor> vgrads = work.tape.backward_grad(work.output_sum_node);
    for (std::size_t j = 0; j < L; ++j) {
        for (std::size_t p = 0; p < params.size(); ++p) {
            if (params[p] == work.weight_nodes[j]) stats[j].V = vgrads[p];
        }
        check_finite(stats[j].V, "V", j);
    }
    for (std::size_t p = 0; p < params.size(); ++p) {
        work.tape.param_value(params[p]) = saved[p];
    }
    return stats;
}

}  // namespace emq
