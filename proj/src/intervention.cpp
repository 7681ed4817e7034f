#include "causal_gcn/intervention.hpp"

#include <algorithm>
#include <string>
#include <vector>

#include "causal_gcn/stats.hpp"

namespace causal_gcn {

Matrix sever_node(const Matrix& adjacency, std::size_t node_id, SeverOptions options) {
  const auto j = static_cast<Eigen::Index>(node_id);
  if (j >= adjacency.rows()) throw DataError("sever_node: node " + std::to_string(node_id) + " out of range");
  if (options.renormalize) {
    Matrix cut = adjacency;
    cut.row(j).setZero();
    cut.col(j).setZero();
    return normalize_adjacency(cut);
  }
  Matrix prop = normalize_adjacency(adjacency);
  prop.row(j).setZero();
  prop.col(j).setZero();
  prop(j, j) = 1.0;
  return prop;
}

InterventionLevels compute_levels(std::span<const double> column, std::size_t node_id, double pct_lo,
                                  double pct_hi, double clip_lower, double clip_upper) {
  if (column.size() < kMinReferenceSubjects) {
    throw DataError("intervention levels need at least 10 reference subjects, got " + std::to_string(column.size()));
  }
  if (!(pct_lo >= 0.0 && pct_lo < pct_hi && pct_hi <= 100.0)) {
    throw DataError("percentiles must satisfy 0 <= lo < hi <= 100");
  }
  std::vector<double> sorted(column.begin(), column.end());
  std::sort(sorted.begin(), sorted.end());
  InterventionLevels levels;
  levels.node_id = node_id;
  levels.pct_lo = pct_lo;
  levels.pct_hi = pct_hi;
  levels.clip_lo = stats::quantile_sorted(sorted, clip_lower);
  levels.clip_hi = stats::quantile_sorted(sorted, clip_upper);
  for (double& v : sorted) v = std::clamp(v, levels.clip_lo, levels.clip_hi);
  levels.x_lo = stats::quantile_sorted(sorted, pct_lo / 100.0);
  levels.x_hi = stats::quantile_sorted(sorted, pct_hi / 100.0);
  if (!(levels.x_lo < levels.x_hi)) {
    throw DataError("no interventional contrast possible for node " + std::to_string(node_id));
  }
  return levels;
}

namespace {

InterventionalDistribution evaluate(const TrainedModel& model, const Matrix& propagation, const Matrix& features,
                                    const Matrix& covariates, std::size_t node_id, double level) {
  Matrix clamped = features;
  clamped.col(static_cast<Eigen::Index>(node_id)).setConstant(level);
  InterventionalDistribution out;
  out.node_id = node_id;
  out.level = level;
  out.per_subject_probs = predict_batch(model.params, propagation, clamped, covariates);
  out.mean_probs = out.per_subject_probs.colwise().mean();
  return out;
}

struct EvalInputs {
  Matrix features;
  Matrix covariates;
};

EvalInputs gather(const TrainedModel& model, const CohortDataset& dataset, const IndexList& eval_idx,
                  std::size_t node_id, const AdjustmentBasis* adjustment) {
  if (node_id >= dataset.num_nodes()) throw DataError("node " + std::to_string(node_id) + " out of range");
  if (eval_idx.empty()) throw DataError("evaluation set is empty");
  for (auto i : eval_idx) {
    if (i >= dataset.num_subjects()) throw DataError("evaluation index out of range");
  }
  EvalInputs in;
  in.features = select_rows(dataset.features, eval_idx);
  in.covariates = select_rows(dataset.covariates, eval_idx);
  if (adjustment != nullptr) {
    if (adjustment->node_id != node_id) throw DataError("adjustment basis belongs to a different node");
    in.covariates = adjustment_inputs(*adjustment, in.features, in.covariates);
  }
  if (in.covariates.cols() != model.params.covariate_inputs()) {
    throw DataError("model expects " + std::to_string(model.params.covariate_inputs()) +
                    " covariate inputs, got " + std::to_string(in.covariates.cols()));
  }
  return in;
}

}  // namespace

InterventionalDistribution do_forward(const TrainedModel& model, const CohortDataset& dataset,
                                      const IndexList& eval_idx, std::size_t node_id, double level,
                                      const AdjustmentBasis* adjustment, SeverOptions options) {
  const auto in = gather(model, dataset, eval_idx, node_id, adjustment);
  return evaluate(model, sever_node(dataset.adjacency, node_id, options), in.features, in.covariates, node_id,
                  level);
}

Contrast intervention_contrast(const TrainedModel& model, const CohortDataset& dataset, const IndexList& eval_idx,
                               std::size_t node_id, const InterventionLevels& levels,
                               const AdjustmentBasis* adjustment, SeverOptions options) {
  const auto in = gather(model, dataset, eval_idx, node_id, adjustment);
  const Matrix propagation = sever_node(dataset.adjacency, node_id, options);
  Contrast c;
  c.hi = evaluate(model, propagation, in.features, in.covariates, node_id, levels.x_hi);
  c.lo = evaluate(model, propagation, in.features, in.covariates, node_id, levels.x_lo);
  c.delta = c.hi.mean_probs - c.lo.mean_probs;
  return c;
}

Eigen::RowVector3d delta(const TrainedModel& model, const CohortDataset& dataset, const IndexList& eval_idx,
                         std::size_t node_id, const InterventionLevels& levels,
                         const AdjustmentBasis* adjustment, SeverOptions options) {
  return intervention_contrast(model, dataset, eval_idx, node_id, levels, adjustment, options).delta;
}

}  // namespace causal_gcn
