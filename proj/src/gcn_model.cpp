#include "causal_gcn/gcn_model.hpp"

#include <cmath>

#include "causal_gcn/training.hpp"

namespace causal_gcn {
namespace {

using RowMatrix = ForwardCache::RowMatrix;

constexpr double kBatchNormEpsilon = 1e-5;
constexpr double kBatchNormMomentum = 0.1;

void check_finite(const auto& m, const char* where) {
  if (!m.allFinite()) throw NumericError(std::string("non-finite activation in ") + where);
}

RowMatrix draw_mask(Eigen::Index rows, Eigen::Index cols, double rate, Rng& rng) {
  std::bernoulli_distribution keep(1.0 - rate);
  const double scale = 1.0 / (1.0 - rate);
  RowMatrix mask(rows, cols);
  for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = keep(rng) ? scale : 0.0;
  return mask;
}

// out[b] = P * in[b] for each subject block of p rows.
RowMatrix propagate(const Matrix& propagation, const RowMatrix& in, Eigen::Index p, bool transpose = false) {
  RowMatrix out(in.rows(), in.cols());
  const Eigen::Index subjects = in.rows() / p;
  for (Eigen::Index b = 0; b < subjects; ++b) {
    if (transpose) {
      out.middleRows(b * p, p).noalias() = propagation.transpose() * in.middleRows(b * p, p);
    } else {
      out.middleRows(b * p, p).noalias() = propagation * in.middleRows(b * p, p);
    }
  }
  return out;
}

void check_shapes(const GcnParams& params, const Matrix& propagation, const Batch& batch) {
  const auto p = batch.features.cols();
  if (propagation.rows() != p || propagation.cols() != p) {
    throw DataError("propagation matrix does not match node count");
  }
  if (params.W0.rows() != 1 && params.W0.rows() != p) {
    throw DataError("input projection has " + std::to_string(params.W0.rows()) + " rows for " +
                    std::to_string(p) + " nodes");
  }
  if (batch.covariates.cols() != params.Wc.rows() || batch.covariates.rows() != batch.features.rows()) {
    throw DataError("covariate input does not match the covariate branch");
  }
}

}  // namespace

void TrainConfig::validate() const {
  if (hidden < 1) throw DataError("hidden width must be positive");
  if (covariate_width < 1) throw DataError("covariate width must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw DataError("dropout rate must lie in [0, 1)");
  if (!(learning_rate > 0.0)) throw DataError("learning rate must be positive");
  if (!(ridge > 0.0)) throw DataError("ridge penalty must be positive");
  if (epochs < 0) throw DataError("epochs must be nonnegative");
  if (batch_size < 0) throw DataError("batch size must be nonnegative");
}

std::string to_string(InputProjection projection) {
  return projection == InputProjection::kPerNode ? "per_node" : "shared";
}

InputProjection input_projection_from_string(const std::string& name) {
  if (name == "per_node") return InputProjection::kPerNode;
  if (name == "shared") return InputProjection::kShared;
  throw DataError("input projection must be per_node or shared, got '" + name + "'");
}

std::vector<ParamRef> GcnParams::refs() {
  return {make_ref("W0", W0, true), make_ref("b0", b0, false), make_ref("W1", W1, true),
          make_ref("b1", b1, false), make_ref("Wc", Wc, true), make_ref("bc", bc, false),
          make_ref("Wo", Wo, true),  make_ref("bo", bo, false)};
}

GcnParams init_gcn_params(Eigen::Index p, Eigen::Index covariate_inputs, const TrainConfig& config, Rng& rng) {
  const Eigen::Index d = config.hidden;
  const Eigen::Index dc = config.covariate_width;
  GcnParams params;
  params.W0 = glorot(1, d, rng, config.input_projection == InputProjection::kPerNode ? p : 1);
  params.b0 = RowVector::Zero(d);
  params.W1 = glorot(d, d, rng);
  params.b1 = RowVector::Zero(d);
  params.Wc = glorot(covariate_inputs, dc, rng);
  params.bc = RowVector::Zero(dc);
  params.Wo = glorot(d + dc, kNumClasses, rng);
  params.bo = RowVector::Zero(kNumClasses);
  params.batchnorm = config.batchnorm;
  params.bn_mean = RowVector::Zero(d);
  params.bn_var = RowVector::Ones(d);
  return params;
}

GcnParams zeros_like(const GcnParams& params) {
  GcnParams z = params;
  for (auto& r : z.refs()) std::fill(r.data, r.data + r.size(), 0.0);
  return z;
}

Batch make_batch(const Matrix& features, const Matrix& covariates, const std::vector<int>& labels,
                 const IndexList& idx) {
  Batch batch;
  batch.features = select_rows(features, idx);
  batch.covariates = select_rows(covariates, idx);
  if (!labels.empty()) {
    for (auto i : idx) batch.labels.push_back(labels[i]);
  }
  return batch;
}

ForwardPass forward(const GcnParams& params, const Matrix& propagation, const Batch& batch, Mode mode,
                    double dropout_rate, Rng* rng) {
  check_shapes(params, propagation, batch);
  const Eigen::Index n = batch.features.rows();
  const Eigen::Index p = batch.features.cols();
  const Eigen::Index d = params.hidden();
  const bool drop = mode == Mode::kTrain && dropout_rate > 0.0;
  if (drop && rng == nullptr) throw DataError("train-mode dropout needs a random generator");

  ForwardPass out;
  auto& cache = out.cache;

  RowMatrix projected(n * p, d);
  for (Eigen::Index b = 0; b < n; ++b)
    for (Eigen::Index k = 0; k < p; ++k)
      projected.row(b * p + k) = batch.features(b, k) * params.W0.row(params.per_node_input() ? k : 0);

  cache.pre1 = propagate(propagation, projected, p);
  cache.pre1.rowwise() += params.b0;
  check_finite(cache.pre1, "graph layer 1");
  cache.drop1 = cache.pre1.cwiseMax(0.0);
  if (drop) {
    cache.mask1 = draw_mask(n * p, d, dropout_rate, *rng);
    cache.drop1.array() *= cache.mask1.array();
  }

  const RowMatrix mixed = cache.drop1 * params.W1;
  cache.pre2 = propagate(propagation, mixed, p);
  cache.pre2.rowwise() += params.b1;
  check_finite(cache.pre2, "graph layer 2");
  RowMatrix h2 = cache.pre2.cwiseMax(0.0);
  if (drop) {
    cache.mask2 = draw_mask(n * p, d, dropout_rate, *rng);
    h2.array() *= cache.mask2.array();
  }

  cache.pooled.resize(n, d);
  for (Eigen::Index b = 0; b < n; ++b) cache.pooled.row(b) = h2.middleRows(b * p, p).colwise().mean();

  if (params.batchnorm) {
    if (mode == Mode::kTrain) {
      cache.bn_mean = cache.pooled.colwise().mean();
      const RowVector var = (cache.pooled.rowwise() - cache.bn_mean).array().square().colwise().mean();
      cache.bn_inv_std = (var.array() + kBatchNormEpsilon).rsqrt();
    } else {
      cache.bn_mean = params.bn_mean;
      cache.bn_inv_std = (params.bn_var.array() + kBatchNormEpsilon).rsqrt();
    }
    cache.normalized = (cache.pooled.rowwise() - cache.bn_mean).array().rowwise() * cache.bn_inv_std.array();
  } else {
    cache.normalized = cache.pooled;
  }

  cache.cov_pre = batch.covariates * params.Wc;
  cache.cov_pre.rowwise() += params.bc;
  check_finite(cache.cov_pre, "covariate branch");

  cache.head_input.resize(n, d + params.covariate_width());
  cache.head_input << cache.normalized, cache.cov_pre.cwiseMax(0.0);
  Matrix logits = cache.head_input * params.Wo;
  logits.rowwise() += params.bo;
  check_finite(logits, "output layer");

  out.probs.resize(n, kNumClasses);
  for (Eigen::Index b = 0; b < n; ++b) {
    const double m = logits.row(b).maxCoeff();
    const RowVector e = (logits.row(b).array() - m).exp();
    out.probs.row(b) = e / e.sum();
  }
  return out;
}

Matrix predict_batch(const GcnParams& params, const Matrix& propagation, const Matrix& features,
                     const Matrix& covariates) {
  Batch batch{features, covariates, {}};
  return forward(params, propagation, batch, Mode::kEval).probs;
}

Eigen::Vector3d predict(const GcnParams& params, const Matrix& propagation, const RowVector& features,
                        const RowVector& covariates) {
  return predict_batch(params, propagation, features, covariates).row(0).transpose();
}

double cross_entropy(const Matrix& probs, const std::vector<int>& labels) {
  if (labels.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    total -= std::log(probs(static_cast<Eigen::Index>(i), labels[i]));
  }
  return total / static_cast<double>(labels.size());
}

LossAndGradients loss_and_gradients(const GcnParams& params, const Matrix& propagation, const Batch& batch,
                                    double ridge, double dropout_rate, Rng* rng) {
  if (batch.labels.empty() || static_cast<Eigen::Index>(batch.labels.size()) != batch.features.rows()) {
    throw DataError("loss needs one label per subject in a nonempty batch");
  }
  const auto fp = forward(params, propagation, batch, Mode::kTrain, dropout_rate, rng);
  const auto& cache = fp.cache;
  const Eigen::Index n = batch.features.rows();
  const Eigen::Index p = batch.features.cols();
  const Eigen::Index d = params.hidden();
  const Eigen::Index dc = params.covariate_width();

  LossAndGradients out;
  out.loss = cross_entropy(fp.probs, batch.labels) + ridge * ridge_penalty(params);
  auto& g = out.gradients;
  g = zeros_like(params);

  Matrix dlogits = fp.probs;
  for (Eigen::Index b = 0; b < n; ++b) dlogits(b, batch.labels[b]) -= 1.0;
  dlogits /= static_cast<double>(n);

  g.Wo = cache.head_input.transpose() * dlogits + 2.0 * ridge * params.Wo;
  g.bo = dlogits.colwise().sum();
  const Matrix dhead = dlogits * params.Wo.transpose();

  const Matrix dcov = dhead.rightCols(dc).array() * (cache.cov_pre.array() > 0.0).cast<double>();
  g.Wc = batch.covariates.transpose() * dcov + 2.0 * ridge * params.Wc;
  g.bc = dcov.colwise().sum();

  Matrix dpooled = dhead.leftCols(d);
  if (params.batchnorm) {
    const RowVector mean_d = dpooled.colwise().mean();
    const RowVector mean_dx = (dpooled.array() * cache.normalized.array()).colwise().mean();
    const Matrix centered = (dpooled.rowwise() - mean_d) -
                            (cache.normalized.array().rowwise() * mean_dx.array()).matrix();
    dpooled = centered.array().rowwise() * cache.bn_inv_std.array();
    out.batch_mean = cache.bn_mean;
    out.batch_var = (cache.bn_inv_std.array().square().inverse() - kBatchNormEpsilon).matrix();
  }

  RowMatrix dpre2(n * p, d);
  for (Eigen::Index b = 0; b < n; ++b) {
    dpre2.middleRows(b * p, p).rowwise() = dpooled.row(b) / static_cast<double>(p);
  }
  if (cache.mask2.size()) dpre2.array() *= cache.mask2.array();
  dpre2.array() *= (cache.pre2.array() > 0.0).cast<double>();
  g.b1 = dpre2.colwise().sum();

  const RowMatrix dmixed = propagate(propagation, dpre2, p, true);
  g.W1 = cache.drop1.transpose() * dmixed + 2.0 * ridge * params.W1;

  RowMatrix dpre1 = dmixed * params.W1.transpose();
  if (cache.mask1.size()) dpre1.array() *= cache.mask1.array();
  dpre1.array() *= (cache.pre1.array() > 0.0).cast<double>();
  g.b0 = dpre1.colwise().sum();

  const RowMatrix dprojected = propagate(propagation, dpre1, p, true);
  g.W0.setZero();
  for (Eigen::Index b = 0; b < n; ++b)
    for (Eigen::Index k = 0; k < p; ++k)
      g.W0.row(params.per_node_input() ? k : 0) += batch.features(b, k) * dprojected.row(b * p + k);
  g.W0 += 2.0 * ridge * params.W0;
  return out;
}

TrainedModel train_with_propagation(const Matrix& propagation, const Matrix& features,
                                    const Matrix& covariates, const std::vector<int>& labels,
                                    const FoldSplit& split, const TrainConfig& config) {
  config.validate();
  if (split.train_idx.empty()) throw DataError("training split is empty");
  for (const auto* idx : {&split.train_idx, &split.val_idx}) {
    for (auto i : *idx) {
      if (i >= labels.size()) throw DataError("split index out of range");
    }
  }
  Rng rng(derive_seed(config.seed, 0x7a1));
  TrainedModel model;
  model.config = config;
  model.propagation = propagation;
  GcnParams init = init_gcn_params(features.cols(), covariates.cols(), config, rng);

  auto step = [&](GcnParams& params, const IndexList& idx, Rng& r) {
    auto result = loss_and_gradients(params, propagation, make_batch(features, covariates, labels, idx),
                                      config.ridge, config.dropout, &r);
    if (params.batchnorm) {
      params.bn_mean = (1.0 - kBatchNormMomentum) * params.bn_mean + kBatchNormMomentum * result.batch_mean;
      params.bn_var = (1.0 - kBatchNormMomentum) * params.bn_var + kBatchNormMomentum * result.batch_var;
    }
    return result;
  };
  auto eval = [&](const GcnParams& params, const IndexList& idx) {
    const auto batch = make_batch(features, covariates, labels, idx);
    return cross_entropy(forward(params, propagation, batch, Mode::kEval).probs, batch.labels);
  };
  TrainingRecord record;
  AdamSettings adam{config.learning_rate, config.adam_beta1, config.adam_beta2, config.adam_epsilon};
  model.params = adam_train(std::move(init), split.train_idx, split.val_idx, config.epochs, config.batch_size,
                            adam, rng, step, eval, record);
  model.train_loss_history = std::move(record.train_loss);
  model.val_loss_history = std::move(record.val_loss);
  model.best_epoch = record.best_epoch;
  return model;
}

TrainedModel train(const CohortDataset& dataset, const FoldSplit& split, const TrainConfig& config,
                   const std::optional<Matrix>& covariate_inputs) {
  const Matrix& cov = covariate_inputs ? *covariate_inputs : dataset.covariates;
  if (cov.rows() != dataset.features.rows()) throw DataError("covariate inputs must have one row per subject");
  auto model = train_with_propagation(normalize_adjacency(dataset.adjacency), dataset.features, cov,
                                      dataset.labels, split, config);
  model.conditioning = covariate_inputs ? "explicit" : "implicit";
  return model;
}

}  // namespace causal_gcn
