#pragma once

#include <algorithm>
#include <cmath>
#include <random>

#include "causal_gcn/gcn_model.hpp"
#include "gcn_reference.hpp"
#include "test_util.hpp"

namespace test_ref {

struct GradientCheckCase {
  int p = 4;
  int d = 4;
  int batch = 5;
  bool per_node = true;
  bool batchnorm = false;
  double ridge = 1e-3;
  double dropout = 0.0;
  std::uint64_t seed = 0;
};

// Largest |analytic - numeric| / max(|analytic|, |numeric|, 1e-5) over every
// parameter coordinate, with central differences of step h.
inline double max_gradient_error(const GradientCheckCase& tc, double h = 1e-5) {
  using namespace causal_gcn;
  std::mt19937_64 rng(tc.seed);
  const int q = 3;
  GcnParams params = random_params(tc.p, q, tc.d, tc.per_node, tc.batchnorm, rng);
  const Matrix prop = normalize_adjacency(test_util::random_symmetric_adjacency(tc.p, rng, 0.6));
  std::normal_distribution<double> g;
  Batch batch;
  batch.features.resize(tc.batch, tc.p);
  batch.covariates.resize(tc.batch, q);
  for (Eigen::Index i = 0; i < batch.features.size(); ++i) batch.features.data()[i] = g(rng);
  for (Eigen::Index i = 0; i < batch.covariates.size(); ++i) batch.covariates.data()[i] = g(rng);
  std::uniform_int_distribution<int> label(0, 2);
  for (int i = 0; i < tc.batch; ++i) batch.labels.push_back(label(rng));

  const std::uint64_t mask_seed = tc.seed ^ 0xabcdefULL;
  auto loss_at = [&](const GcnParams& p) {
    Rng mask_rng(mask_seed);
    return loss_and_gradients(p, prop, batch, tc.ridge, tc.dropout, &mask_rng).loss;
  };
  Rng mask_rng(mask_seed);
  const auto analytic = loss_and_gradients(params, prop, batch, tc.ridge, tc.dropout, &mask_rng).gradients;

  double worst = 0.0;
  auto p_refs = params.refs();
  const auto g_refs = analytic.refs();
  for (std::size_t b = 0; b < p_refs.size(); ++b) {
    for (Eigen::Index i = 0; i < p_refs[b].size(); ++i) {
      double& w = p_refs[b].data[i];
      const double saved = w;
      w = saved + h;
      const double up = loss_at(params);
      w = saved - h;
      const double down = loss_at(params);
      w = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double a = g_refs[b].data[i];
      const double err = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-5});
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace test_ref
