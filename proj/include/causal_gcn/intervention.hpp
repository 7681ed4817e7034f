#pragma once

#include <optional>
#include <span>

#include "causal_gcn/backdoor.hpp"
#include "causal_gcn/gcn_model.hpp"
#include "causal_gcn/graph_data.hpp"

namespace causal_gcn {

struct InterventionLevels {
  std::size_t node_id = 0;
  double x_lo = 0.0;
  double x_hi = 0.0;
  double pct_lo = 10.0;
  double pct_hi = 90.0;
  double clip_lo = 0.0;  // truncation bounds applied before taking percentiles
  double clip_hi = 0.0;
};

struct InterventionalDistribution {
  std::size_t node_id = 0;
  double level = 0.0;
  Eigen::RowVector3d mean_probs = Eigen::RowVector3d::Zero();
  Matrix per_subject_probs;  // N_eval x 3
};

struct SeverOptions {
  // Recompute degrees after cutting the node's edges. When false, the
  // original propagation entries are kept, with row/column j zeroed and the
  // diagonal entry reset to 1.
  bool renormalize = true;
};

inline constexpr double kClipLower = 0.01;
inline constexpr double kClipUpper = 0.99;
inline constexpr std::size_t kMinReferenceSubjects = 10;

// Propagation matrix with every edge of `node_id` removed.
Matrix sever_node(const Matrix& adjacency, std::size_t node_id, SeverOptions options = {});

// Clips the column to its (1%, 99%) empirical range, then takes the
// requested percentiles by linear interpolation.
InterventionLevels compute_levels(std::span<const double> column, std::size_t node_id, double pct_lo = 10.0,
                                  double pct_hi = 90.0, double clip_lower = kClipLower,
                                  double clip_upper = kClipUpper);

// Evaluates do(X_j = x) for every subject in `eval_idx`: the node's feature
// is clamped, its edges are severed, and the model runs in eval mode. With an
// adjustment basis the covariate input is [C_i ; t_{i,-j}].
InterventionalDistribution do_forward(const TrainedModel& model, const CohortDataset& dataset,
                                      const IndexList& eval_idx, std::size_t node_id, double level,
                                      const AdjustmentBasis* adjustment = nullptr, SeverOptions options = {});

// Per-class contrast p(x_hi) - p(x_lo), with the two underlying distributions.
struct Contrast {
  Eigen::RowVector3d delta = Eigen::RowVector3d::Zero();
  InterventionalDistribution hi;
  InterventionalDistribution lo;
};

Contrast intervention_contrast(const TrainedModel& model, const CohortDataset& dataset, const IndexList& eval_idx,
                               std::size_t node_id, const InterventionLevels& levels,
                               const AdjustmentBasis* adjustment = nullptr, SeverOptions options = {});

Eigen::RowVector3d delta(const TrainedModel& model, const CohortDataset& dataset, const IndexList& eval_idx,
                         std::size_t node_id, const InterventionLevels& levels,
                         const AdjustmentBasis* adjustment = nullptr, SeverOptions options = {});

}  // namespace causal_gcn
