#include "emq/dataset.hpp"

#include <cmath>
#include <stdexcept>

#include "emq/rng.hpp"

namespace emq {

namespace {

// Smooth per-class direction: low-res random grid bilinearly upsampled to the
// feature dim (viewed as a square image when possible), then normalized.
std::vector<double> class_direction(Rng& rng, std::int64_t dim) {
    auto side = static_cast<std::int64_t>(std::llround(std::sqrt(static_cast<double>(dim))));
    std::vector<double> dir(static_cast<std::size_t>(dim));
    if (side * side == dim && side >= 3) {
        const std::int64_t low = 3;
        std::vector<double> coarse(static_cast<std::size_t>(low * low));
        for (double& v : coarse) v = rng.normal();
        for (std::int64_t i = 0; i < side; ++i) {
            for (std::int64_t j = 0; j < side; ++j) {
                const double fi = static_cast<double>(i) / static_cast<double>(side - 1) * (low - 1);
                const double fj = static_cast<double>(j) / static_cast<double>(side - 1) * (low - 1);
                const auto i0 = static_cast<std::int64_t>(fi);
                const auto j0 = static_cast<std::int64_t>(fj);
                const auto i1 = std::min(i0 + 1, low - 1);
                const auto j1 = std::min(j0 + 1, low - 1);
                const double ai = fi - static_cast<double>(i0);
                const double aj = fj - static_cast<double>(j0);
                const double v = coarse[i0 * low + j0] * (1 - ai) * (1 - aj) +
                                 coarse[i1 * low + j0] * ai * (1 - aj) +
                                 coarse[i0 * low + j1] * (1 - ai) * aj +
                                 coarse[i1 * low + j1] * ai * aj;
                dir[static_cast<std::size_t>(i * side + j)] = v;
            }
        }
    } else {
        for (double& v : dir) v = rng.normal();
    }
    double norm = 0.0;
    for (double v : dir) norm += v * v;
    norm = std::sqrt(norm);
    for (double& v : dir) v /= norm;
    return dir;
}

}  // namespace

std::vector<std::size_t> SyntheticDataset::indices_of(Split s) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < split.size(); ++i) {
        if (split[i] == s) out.push_back(i);
    }
    return out;
}

Tensor SyntheticDataset::batch_inputs(const std::vector<std::size_t>& idx) const {
    Tensor out = Tensor::zeros({static_cast<std::int64_t>(idx.size()), feature_dim});
    for (std::size_t r = 0; r < idx.size(); ++r) {
        const Tensor& src = inputs[idx[r]];
        for (std::int64_t c = 0; c < feature_dim; ++c) {
            out.data[static_cast<std::int64_t>(r) * feature_dim + c] = src.data[c];
        }
    }
    return out;
}

Tensor SyntheticDataset::batch_labels(const std::vector<std::size_t>& idx) const {
    Tensor out = Tensor::zeros({static_cast<std::int64_t>(idx.size())});
    for (std::size_t r = 0; r < idx.size(); ++r) {
        out.data[r] = static_cast<double>(labels[idx[r]]);
    }
    return out;
}

SyntheticDataset make_dataset(std::uint64_t seed, const DatasetConfig& cfg) {
    if (cfg.n_classes < 2) throw std::invalid_argument("make_dataset: n_classes must be >= 2");
    if (cfg.n_per_class < 4) throw std::invalid_argument("make_dataset: n_per_class too small");

    Rng dir_rng = Rng::stream(seed, "dataset-directions");
    Rng sample_rng = Rng::stream(seed, "dataset-samples");

    SyntheticDataset ds;
    ds.n_classes = cfg.n_classes;
    ds.feature_dim = cfg.feature_dim;

    std::vector<std::vector<double>> dirs;
    dirs.reserve(static_cast<std::size_t>(cfg.n_classes));
    for (std::int64_t k = 0; k < cfg.n_classes; ++k) dirs.push_back(class_direction(dir_rng, cfg.feature_dim));
    // Gram-Schmidt keeps the class signals from bleeding into each other.
    for (std::size_t k = 0; k < dirs.size() && k < static_cast<std::size_t>(cfg.feature_dim); ++k) {
        for (std::size_t p = 0; p < k; ++p) {
            double proj = 0.0;
            for (std::int64_t d = 0; d < cfg.feature_dim; ++d) proj += dirs[k][d] * dirs[p][d];
            for (std::int64_t d = 0; d < cfg.feature_dim; ++d) dirs[k][d] -= proj * dirs[p][d];
        }
        double norm = 0.0;
        for (double v : dirs[k]) norm += v * v;
        norm = std::sqrt(norm);
        for (double& v : dirs[k]) v /= norm;
    }

    const auto calib_per_class = std::max<std::int64_t>(1, cfg.calib_total / cfg.n_classes);
    const auto train_per_class =
        static_cast<std::int64_t>(std::llround(cfg.train_fraction * static_cast<double>(cfg.n_per_class)));
    if (train_per_class + calib_per_class >= cfg.n_per_class) {
        throw std::invalid_argument("make_dataset: splits exceed samples per class");
    }

    for (std::int64_t k = 0; k < cfg.n_classes; ++k) {
        for (std::int64_t s = 0; s < cfg.n_per_class; ++s) {
            const double sign = (s % 2 == 0) ? 1.0 : -1.0;  // antipodal cluster pair
            const double radius = sample_rng.uniform(0.8, 1.2);
            Tensor x = Tensor::zeros({cfg.feature_dim});
            for (std::int64_t d = 0; d < cfg.feature_dim; ++d) {
                x.data[d] = sign * radius * dirs[static_cast<std::size_t>(k)][static_cast<std::size_t>(d)] +
                            cfg.noise_sigma * sample_rng.normal();
            }
            ds.inputs.push_back(std::move(x));
            ds.labels.push_back(k);
            if (s < train_per_class) ds.split.push_back(Split::Train);
            else if (s < train_per_class + calib_per_class) ds.split.push_back(Split::Calib);
            else ds.split.push_back(Split::Eval);
        }
    }
    return ds;
}

SyntheticDataset make_dataset(std::uint64_t seed, std::int64_t n_classes, std::int64_t n_per_class) {
    DatasetConfig cfg;
    cfg.n_classes = n_classes;
    cfg.n_per_class = n_per_class;
    return make_dataset(seed, cfg);
}

}  // namespace emq
