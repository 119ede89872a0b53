#include "emq/baselines.hpp"

#include <cmath>
#include <memory>
#include <stdexcept>

#include "emq/dsl_eval.hpp"
#include "emq/dsl_ops.hpp"
#include "emq/rng.hpp"

namespace emq {

namespace {

struct BaselineName {
    BaselineId id;
    std::string_view name;
};

constexpr BaselineName kNames[] = {
    {BaselineId::BParams, "bparams"}, {BaselineId::Hawq, "hawq"},
    {BaselineId::HawqV2, "hawq_v2"},  {BaselineId::Ompq, "ompq"},
    {BaselineId::Qe, "qe"},           {BaselineId::Snip, "snip"},
    {BaselineId::Synflow, "synflow"}, {BaselineId::Plain, "plain"},
    {BaselineId::Fisher, "fisher"},   {BaselineId::Emq, "emq"},
};

double mean_product(const Tensor& a, const Tensor& b, bool abs_product, bool abs_b) {
    double s = 0.0;
    for (std::int64_t i = 0; i < a.numel(); ++i) {
        const double bb = abs_b ? std::fabs(b.data[i]) : b.data[i];
        const double p = a.data[i] * bb;
        s += abs_product ? std::fabs(p) : p;
    }
    return s / static_cast<double>(a.numel());
}

// Batch gram matrix z z^T of a [B, F] activation.
std::vector<double> gram(const Tensor& a) {
    const auto B = a.shape[0], F = a.shape[1];
    std::vector<double> g(static_cast<std::size_t>(B * B));
    for (std::int64_t p = 0; p < B; ++p) {
        for (std::int64_t q = p; q < B; ++q) {
            double s = 0.0;
            for (std::int64_t f = 0; f < F; ++f) s += a.data[p * F + f] * a.data[q * F + f];
            g[static_cast<std::size_t>(p * B + q)] = s;
            g[static_cast<std::size_t>(q * B + p)] = s;
        }
    }
    return g;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

// ||z_j^T z_i||_F^2 equals <G_i, G_j> over the batch grams.
double ompq_orm(const std::vector<double>& gram_i, const std::vector<double>& gram_j) {
    return dot(gram_i, gram_j) / (dot(gram_i, gram_i) * dot(gram_j, gram_j));
}

double variance_of(const Tensor& t) {
    double m = 0.0;
    for (double v : t.data) m += v;
    m /= static_cast<double>(t.numel());
    double s = 0.0;
    for (double v : t.data) s += (v - m) * (v - m);
    return s / static_cast<double>(t.numel());
}

}  // namespace

std::string_view baseline_name(BaselineId id) {
    for (const auto& n : kNames) {
        if (n.id == id) return n.name;
    }
    return "?";
}

std::optional<BaselineId> baseline_from_name(std::string_view name) {
    for (const auto& n : kNames) {
        if (n.name == name) return n.id;
    }
    return std::nullopt;
}

const std::vector<BaselineId>& all_baselines() {
    static const std::vector<BaselineId> ids = [] {
        std::vector<BaselineId> v;
        for (const auto& n : kNames) v.push_back(n.id);
        return v;
    }();
    return ids;
}

PowerIterationResult top_eigenvalue(const HvpFn& hvp_fn, std::int64_t dim, int max_iters,
                                    double tol, std::uint64_t seed) {
    if (dim < 1) throw std::invalid_argument("top_eigenvalue: dim must be >= 1");
    Rng rng = Rng::stream(seed, "power-iteration");
    Tensor b = Tensor::zeros({dim});
    double norm = 0.0;
    for (double& v : b.data) {
        v = rng.normal();
        norm += v * v;
    }
    norm = std::sqrt(norm);
    for (double& v : b.data) v /= norm;

    PowerIterationResult res;
    double prev = 0.0;
    for (int it = 1; it <= max_iters; ++it) {
        const Tensor w = hvp_fn(b);
        double lambda = 0.0, wn = 0.0;
        for (std::int64_t i = 0; i < dim; ++i) {
            lambda += b.data[i] * w.data[i];
            wn += w.data[i] * w.data[i];
        }
        wn = std::sqrt(wn);
        res.eigenvalue = lambda;
        res.iterations = it;
        if (wn == 0.0) {  // zero operator
            res.eigenvalue = 0.0;
            res.converged = true;
            return res;
        }
        for (std::int64_t i = 0; i < dim; ++i) b.data[i] = w.data[i] / wn;
        if (it > 1 && std::fabs(lambda - prev) <= tol * std::max(1.0, std::fabs(lambda))) {
            res.converged = true;
            return res;
        }
        prev = lambda;
    }
    return res;  // last iterate, converged = false
}

BaselineContext make_baseline_context(const ReferenceNet& net, const SyntheticDataset& ds,
                                      std::uint64_t seed) {
    BaselineContext ctx;
    ctx.seed = seed;
    const std::vector<std::size_t> calib = ds.indices_of(Split::Calib);
    if (calib.empty()) throw std::invalid_argument("make_baseline_context: empty calib split");
    const Tensor x = ds.batch_inputs(calib);
    const Tensor y = ds.batch_labels(calib);

    // Activation gradients from one backward pass.
    auto work = std::make_shared<ReferenceNet>(net);
    work->loss(x, y);
    work->tape.backward_grad(work->loss_node);
    for (std::size_t j = 0; j < work->num_quant_layers(); ++j) {
        const Tensor& g = work->tape.grad(work->act_nodes[j]);
        ctx.act_grad.push_back(Tensor({g.shape[0], g.numel() / g.shape[0]}, g.data));
    }

    for (std::size_t j = 0; j < net.num_quant_layers(); ++j) {
        const QuantScheme s8 = calibrate(net.weights(j), 8);
        ctx.qnoise_var.push_back(s8.scale * s8.scale / 12.0);
        const LayerGeom& geom = net.geoms[j];
        ctx.c_in.push_back(static_cast<double>(geom.in_ch) *
                           (geom.kind == LayerKind::Conv3x3 ? 9.0 : 1.0));
        ctx.layer_hvp.push_back([work, x, y, j](const Tensor& v) {
            const Tensor saved = work->weights(j);
            ad::GradFn grad_at = [&](const Tensor& theta) {
                work->set_weights(j, Tensor(saved.shape, theta.data));
                work->loss(x, y);
                const std::vector<Tensor> grads = work->tape.backward_grad(work->loss_node);
                const std::vector<int>& params = work->tape.param_nodes();
                for (std::size_t p = 0; p < params.size(); ++p) {
                    if (params[p] == work->weight_nodes[j]) return grads[p].flattened();
                }
                throw std::logic_error("layer_hvp: weight node not found");
            };
            const Tensor hv = ad::hvp(grad_at, saved.flattened(), v.flattened());
            work->set_weights(j, saved);
            return hv;
        });
    }
    return ctx;
}

double baseline_layer_score(BaselineId id, std::size_t layer, const std::vector<LayerStats>& stats,
                            const BaselineContext& ctx) {
    const LayerStats& ls = stats.at(layer);
    switch (id) {
        case BaselineId::BParams:
            return static_cast<double>(ls.W.numel());
        case BaselineId::Hawq: {
            if (layer >= ctx.layer_hvp.size() || !ctx.layer_hvp[layer]) {
                throw std::invalid_argument("baseline hawq: missing layer HVP oracle");
            }
            return top_eigenvalue(ctx.layer_hvp[layer], ls.W.numel(), 20, 1e-4,
                                  ctx.seed + static_cast<std::uint64_t>(layer))
                .eigenvalue;
        }
        case BaselineId::HawqV2: {
            double s = 0.0;
            for (double v : ls.H.data) s += v;
            return s / static_cast<double>(ls.H.numel());
        }
        case BaselineId::Ompq: {
            const std::size_t other = layer + 1 < stats.size() ? layer + 1 : layer - 1;
            return 1.0 - ompq_orm(gram(stats[layer].A), gram(stats[other].A));
        }
        case BaselineId::Qe:
            return std::log(ctx.c_in.at(layer) * ctx.qnoise_var.at(layer)) +
                   std::log(variance_of(ls.A));
        case BaselineId::Snip:
            return mean_product(ls.G, ls.W, /*abs_product=*/true, /*abs_b=*/false);
        case BaselineId::Synflow:
            return mean_product(ls.V, ls.W, /*abs_product=*/false, /*abs_b=*/true);
        case BaselineId::Plain:
            return mean_product(ls.G, ls.W, /*abs_product=*/false, /*abs_b=*/false);
        case BaselineId::Fisher: {
            const Tensor& g = ctx.act_grad.at(layer);
            const Tensor& z = ls.A;
            if (g.shape != z.shape) throw std::invalid_argument("baseline fisher: grad/act mismatch");
            const auto B = z.shape[0], F = z.shape[1];
            double total = 0.0;
            for (std::int64_t b = 0; b < B; ++b) {
                double s = 0.0;
                for (std::int64_t f = 0; f < F; ++f) {
                    const double p = g.data[b * F + f] * z.data[b * F + f];
                    s += p * p;
                }
                total += s;
            }
            return total / static_cast<double>(B);
        }
        case BaselineId::Emq: {
            double logsum = 0.0;
            for (double v : ls.V.data) logsum += std::log(std::fabs(v));
            const double mean_log = logsum / static_cast<double>(ls.V.numel());
            double l1 = 0.0;
            for (double v : ls.W.data) l1 += std::fabs(v);
            const double normed = l1 / (static_cast<double>(ls.W.numel()) + dsl::kDenomEps);
            return mean_log * std::sqrt(normed);
        }
    }
    throw std::invalid_argument("baseline_layer_score: bad id");
}

std::vector<double> baseline_layer_scores(BaselineId id, const std::vector<LayerStats>& stats,
                                          const BaselineContext& ctx) {
    std::vector<double> out;
    out.reserve(stats.size());
    for (std::size_t j = 0; j < stats.size(); ++j) {
        out.push_back(baseline_layer_score(id, j, stats, ctx));
    }
    return out;
}

double baseline_config_score(BaselineId id, const std::vector<LayerStats>& stats,
                             const BaselineContext& ctx, const BitConfig& cfg) {
    return dsl::config_score_from_layers(baseline_layer_scores(id, stats, ctx), cfg);
}

}  // namespace emq
