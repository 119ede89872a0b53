#pragma once

#include <span>
#include <vector>

namespace emq {

/// 1-based ranks with ties assigned their average rank.
std::vector<double> average_ranks(std::span<const double> x);

/// Degenerate (constant) inputs return 0 for all three coefficients.
double pearson(std::span<const double> x, std::span<const double> y);
double spearman(std::span<const double> x, std::span<const double> y);
/// Kendall tau-b.
double kendall(std::span<const double> x, std::span<const double> y);

/// Spearman restricted to the ceil(fraction * M) entries with the highest
/// ground truth; both lists are re-ranked inside the subset. fraction 1.0 is
/// exactly `spearman`. Throws when the subset has fewer than 2 entries.
double spearman_at_topk(std::span<const double> gt, std::span<const double> est, double fraction);

}  // namespace emq
