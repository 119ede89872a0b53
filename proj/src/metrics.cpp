#include "emq/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace emq {

namespace {

void check_pair(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw std::invalid_argument("rank metric: length mismatch");
    if (x.size() < 2) throw std::invalid_argument("rank metric: need at least 2 values");
}

}  // namespace

std::vector<double> average_ranks(std::span<const double> x) {
    const std::size_t n = x.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && x[order[j + 1]] == x[order[i]]) ++j;
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
        i = j + 1;
    }
    return ranks;
}

double pearson(std::span<const double> x, std::span<const double> y) {
    check_pair(x, y);
    const auto n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) return 0.0;  // degenerate
    return sxy / std::sqrt(sxx * syy);
}

double spearman(std::span<const double> x, std::span<const double> y) {
    check_pair(x, y);
    const std::vector<double> rx = average_ranks(x);
    const std::vector<double> ry = average_ranks(y);
    return pearson(rx, ry);
}

double kendall(std::span<const double> x, std::span<const double> y) {
    check_pair(x, y);
    const std::size_t n = x.size();
    long long concordant = 0, discordant = 0, ties_x = 0, ties_y = 0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double dx = x[i] - x[j];
            const double dy = y[i] - y[j];
            if (dx == 0.0 && dy == 0.0) {
                ++ties_x;
                ++ties_y;
            } else if (dx == 0.0) {
                ++ties_x;
            } else if (dy == 0.0) {
                ++ties_y;
            } else if ((dx > 0.0) == (dy > 0.0)) {
                ++concordant;
            } else {
                ++discordant;
            }
        }
    }
    const auto n0 = static_cast<long long>(n) * (static_cast<long long>(n) - 1) / 2;
    const double denom = std::sqrt(static_cast<double>(n0 - ties_x)) *
                         std::sqrt(static_cast<double>(n0 - ties_y));
    if (denom == 0.0) return 0.0;  // degenerate
    return static_cast<double>(concordant - discordant) / denom;
}

double spearman_at_topk(std::span<const double> gt, std::span<const double> est, double fraction) {
    check_pair(gt, est);
    if (fraction <= 0.0 || fraction > 1.0) {
        throw std::invalid_argument("spearman_at_topk: fraction must be in (0, 1]");
    }
    const std::size_t n = gt.size();
    const auto m = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n)));
    if (m < 2) throw std::invalid_argument("spearman_at_topk: top-k subset smaller than 2");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return gt[a] > gt[b]; });
    std::vector<double> sub_gt(m), sub_est(m);
    for (std::size_t i = 0; i < m; ++i) {
        sub_gt[i] = gt[order[i]];
        sub_est[i] = est[order[i]];
    }
    return spearman(sub_gt, sub_est);
}

}  // namespace emq
