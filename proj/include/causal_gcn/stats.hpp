#pragma once

#include <span>
#include <vector>

namespace causal_gcn::stats {

// Quantile with linear interpolation between order statistics: position
// (n - 1) * q in the sorted sample.
double quantile(std::span<const double> values, double q);
double quantile_sorted(std::span<const double> sorted, double q);

// Ranks starting at 1; tied values share their average rank.
std::vector<double> average_ranks(std::span<const double> values);

double mean(std::span<const double> values);
// Denominator n - 1; 0 for fewer than two values.
double sample_variance(std::span<const double> values);
double pearson(std::span<const double> a, std::span<const double> b);
double spearman(std::span<const double> a, std::span<const double> b);

}  // namespace causal_gcn::stats
