#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "causal_gcn/common.hpp"
#include "causal_gcn/graph_data.hpp"

namespace causal_gcn {

// Ground-truth generative model for synthetic cohorts:
//   C      : age ~ N(0,1), sex = +/-1 w.p. 1/2, apoe4 = +1 w.p. 0.3 else -1
//   X      = C L + P eps + noise_sd * eta,  P = normalize_adjacency(adjacency)
//   logits = (0, a/2, a) for (CN, MCI, AD) with a = X w + C v
// Nodes have no structural edges between each other, so forcing X_j leaves
// every other node's distribution unchanged.
struct ScmSpec {
  std::size_t p = 0;
  Matrix adjacency;                // p x p
  Matrix confounder_loadings;      // q x p
  std::vector<int> causal_nodes;
  Vector outcome_weights;          // p
  Vector confounder_outcome_weights;  // q
  double noise_sd = 0.5;
  std::uint64_t seed = 0;

  std::size_t q() const { return static_cast<std::size_t>(confounder_loadings.rows()); }
  void validate() const;
};

struct GroundTruth {
  Vector true_delta;     // class AD, per node
  Vector true_delta_se;  // Monte Carlo standard error
  Vector x_lo;           // raw-scale levels used for true_delta
  Vector x_hi;
  std::size_t n_mc = 0;
};

struct OracleResult {
  double delta = 0.0;
  double se = 0.0;
};

inline constexpr std::size_t kMinOracleDraws = 10000;
inline constexpr std::size_t kGroundTruthDraws = 100000;

inline const std::vector<std::string> kScmCovariateNames = {"age", "sex", "apoe4"};

// One causal node plus four non-causal nodes that share strong covariate
// confounding with the outcome. Node roles are drawn from `seed`.
ScmSpec single_cause_preset(std::size_t p, std::uint64_t seed);

// Same confounding structure, all outcome weights zero.
ScmSpec null_preset(std::size_t p, std::uint64_t seed);

ScmSpec preset_by_name(const std::string& name, std::size_t p, std::uint64_t seed);

// Ground truth uses the 10th/90th percentile of each node's raw column as
// intervention levels.
std::pair<CohortDataset, GroundTruth> generate_cohort(const ScmSpec& spec, std::size_t n_subjects);

// Pr(Y=AD | do(X_j = x_hi)) - Pr(Y=AD | do(X_j = x_lo)), estimated with
// common random numbers over n_mc draws of the remaining structural equations.
OracleResult oracle_delta(const ScmSpec& spec, std::size_t node_id, double x_lo, double x_hi,
                          std::size_t n_mc);

// Class probabilities (CN, MCI, AD) implied by the outcome equation.
Eigen::Vector3d scm_class_probs(const ScmSpec& spec, const RowVector& x, const RowVector& c);

nlohmann::json scm_to_json(const ScmSpec& spec);
ScmSpec scm_from_json(const nlohmann::json& j);

}  // namespace causal_gcn
