#include "emq/quant.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "emq/errors.hpp"
#include "emq/rng.hpp"

namespace emq {

namespace {

constexpr double kScaleFloor = 1e-8;

double qdq_value(double x, double scale, double zp, double qmax) {
    double q = std::nearbyint((x - zp) / scale);
    q = std::clamp(q, 0.0, qmax);
    return q * scale + zp;
}

}  // namespace

QuantScheme calibrate(const Tensor& t, int bits) {
    if (t.numel() == 0) throw std::invalid_argument("calibrate: empty tensor");
    if (bits == 32) return QuantScheme{32, 1.0, 0.0};
    if (bits < 2 || bits > 8) throw std::invalid_argument("calibrate: bits must be in {2..8, 32}");

    const double lo = t.min_value();
    const double hi = t.max_value();
    const double qmax = QuantScheme{bits}.qmax();
    if (hi - lo < kScaleFloor) {
        // Degenerate constant tensor: one level reproduces it exactly.
        return QuantScheme{bits, kScaleFloor, lo};
    }

    const double base = (hi - lo) / qmax;
    const double center = 0.5 * (lo + hi);
    QuantScheme best{bits, base, lo};
    double best_mse = -1.0;
    for (int k = 0; k < 100; ++k) {
        const double mult = 0.2 + 0.01 * k;
        const double scale = std::max(mult * base, kScaleFloor);
        const double zp = center - scale * qmax / 2.0;
        double err = 0.0;
        for (double x : t.data) {
            const double d = x - qdq_value(x, scale, zp, qmax);
            err += d * d;
        }
        if (best_mse < 0.0 || err < best_mse) {
            best_mse = err;
            best = QuantScheme{bits, scale, zp};
        }
    }
    return best;
}

Tensor quantize_dequantize(const Tensor& t, const QuantScheme& s) {
    if (s.bits == 32) return t;
    Tensor out = t;
    const double qmax = s.qmax();
    for (double& v : out.data) v = qdq_value(v, s.scale, s.zero_point, qmax);
    return out;
}

double mse(const Tensor& a, const Tensor& b) {
    if (a.shape != b.shape) throw ShapeError("mse: shape mismatch");
    double s = 0.0;
    for (std::int64_t i = 0; i < a.numel(); ++i) {
        const double d = a.data[i] - b.data[i];
        s += d * d;
    }
    return s / static_cast<double>(a.numel());
}

ReferenceNet apply_bit_config(const ReferenceNet& net, const SyntheticDataset& ds,
                              const BitConfig& cfg) {
    if (cfg.weight_bits.size() != net.num_quant_layers()) {
        throw std::invalid_argument("apply_bit_config: config has " +
                                    std::to_string(cfg.weight_bits.size()) + " layers, net has " +
                                    std::to_string(net.num_quant_layers()));
    }
    ReferenceNet q = net;
    for (std::size_t j = 0; j < q.num_quant_layers(); ++j) {
        const QuantScheme s = calibrate(q.weights(j), cfg.weight_bits[j]);
        q.set_weights(j, quantize_dequantize(q.weights(j), s));
    }
    if (cfg.activation_bits != 32) {
        // One-shot activation calibration on the weight-quantized net.
        const std::vector<std::size_t> calib = ds.indices_of(Split::Calib);
        if (calib.empty()) throw std::invalid_argument("apply_bit_config: empty calibration split");
        q.logits(ds.batch_inputs(calib));
        for (std::size_t j = 0; j < q.num_quant_layers(); ++j) {
            const QuantScheme s = calibrate(q.tape.value(q.act_nodes[j]), cfg.activation_bits);
            q.tape.set_fake_quant(q.act_fq_nodes[j],
                                  ad::FakeQuantParams{true, s.scale, s.zero_point, s.qmax()});
        }
    }
    return q;
}

double model_size_mb(const std::vector<LayerGeom>& geoms, const std::vector<int>& weight_bits) {
    if (geoms.size() != weight_bits.size()) {
        throw std::invalid_argument("model_size_mb: bit list does not match layer count");
    }
    double bits_total = 0.0;
    for (std::size_t j = 0; j < geoms.size(); ++j) {
        bits_total += static_cast<double>(geoms[j].weight_numel) * weight_bits[j];
    }
    return bits_total / 8.0 / 1e6;
}

double model_size_mb(const ReferenceNet& net, const BitConfig& cfg) {
    return model_size_mb(net.geoms, cfg.weight_bits);
}

double compute_bops_g(const std::vector<LayerGeom>& geoms, const BitConfig& cfg) {
    if (geoms.size() != cfg.weight_bits.size()) {
        throw std::invalid_argument("compute_bops_g: bit list does not match layer count");
    }
    double ops = 0.0;
    for (std::size_t j = 0; j < geoms.size(); ++j) {
        ops += static_cast<double>(geoms[j].macs) * cfg.weight_bits[j] * cfg.activation_bits;
    }
    return ops / 1e9;
}

double compute_bops_g(const ReferenceNet& net, const BitConfig& cfg) {
    return compute_bops_g(net.geoms, cfg);
}

BitConfig assign_bits(const ConfigScorer& scorer, const std::vector<LayerGeom>& geoms,
                      double size_budget_mb, int n_samples, std::uint64_t seed,
                      const AssignOptions& opts) {
    if (geoms.empty()) throw std::invalid_argument("assign_bits: no layers");
    if (opts.palette.empty()) throw std::invalid_argument("assign_bits: empty palette");
    std::vector<int> palette = opts.palette;
    std::sort(palette.begin(), palette.end());

    const std::size_t L = geoms.size();
    auto layer_choices = [&](std::size_t j) -> std::vector<int> {
        if (opts.pin_first_last_8bit && (j == 0 || j + 1 == L)) return {8};
        return palette;
    };

    double space = 1.0;
    for (std::size_t j = 0; j < L; ++j) space *= static_cast<double>(layer_choices(j).size());

    std::vector<std::vector<int>> candidates;
    if (space <= static_cast<double>(opts.exhaustive_limit)) {
        // Mixed-radix enumeration over per-layer choices.
        std::vector<std::size_t> digit(L, 0);
        while (true) {
            std::vector<int> bits(L);
            for (std::size_t j = 0; j < L; ++j) bits[j] = layer_choices(j)[digit[j]];
            candidates.push_back(std::move(bits));
            std::size_t j = L;
            while (j > 0) {
                --j;
                if (++digit[j] < layer_choices(j).size()) break;
                digit[j] = 0;
                if (j == 0) goto done;
            }
        }
    done:;
    } else {
        Rng rng = Rng::stream(seed, "assign-sample");
        std::set<std::vector<int>> dedup;
        const long max_attempts = 50L * std::max(1, n_samples);
        for (long attempt = 0; attempt < max_attempts &&
                               static_cast<int>(dedup.size()) < n_samples; ++attempt) {
            std::vector<int> bits(L);
            for (std::size_t j = 0; j < L; ++j) {
                const auto& choices = layer_choices(j);
                bits[j] = choices[rng.next_below(choices.size())];
            }
            if (model_size_mb(geoms, bits) <= size_budget_mb) dedup.insert(std::move(bits));
        }
        candidates.assign(dedup.begin(), dedup.end());
    }

    bool found = false;
    BitConfig best;
    double best_score = 0.0, best_size = 0.0;
    for (auto& bits : candidates) {
        const double size = model_size_mb(geoms, bits);
        if (size > size_budget_mb) continue;
        BitConfig cfg{bits, opts.activation_bits};
        double score = scorer(cfg);
        if (!std::isfinite(score)) score = -HUGE_VAL;  // invalid scores never win
        const bool better =
            !found || score > best_score ||
            (score == best_score && (size < best_size || (size == best_size && bits < best.weight_bits)));
        if (better) {
            found = true;
            best = std::move(cfg);
            best_score = score;
            best_size = size;
        }
    }
    if (!found) {
        throw InfeasibleError("assign_bits: no config satisfies budget of " +
                              std::to_string(size_budget_mb) + " MB");
    }
    return best;
}

}  // namespace emq
