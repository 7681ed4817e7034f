#pragma once

#include <vector>

#include <Eigen/Dense>

namespace test_ref {

// All-pairs count: wins + ties / 2 over positive-negative pairs, averaged
// over classes that have both.
inline double pair_count_macro_auc(const std::vector<int>& labels, const Eigen::MatrixXd& scores) {
  double total = 0.0;
  int used = 0;
  for (int c = 0; c < scores.cols(); ++c) {
    double wins = 0.0, pairs = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] != c) continue;
      for (std::size_t k = 0; k < labels.size(); ++k) {
        if (labels[k] == c) continue;
        const double a = scores(static_cast<Eigen::Index>(i), c), b = scores(static_cast<Eigen::Index>(k), c);
        wins += a > b ? 1.0 : (a == b ? 0.5 : 0.0);
        pairs += 1.0;
      }
    }
    if (pairs > 0) {
      total += wins / pairs;
      ++used;
    }
  }
  return total / used;
}

}  // namespace test_ref
