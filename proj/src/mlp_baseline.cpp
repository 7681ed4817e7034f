#include "causal_gcn/mlp_baseline.hpp"

#include "causal_gcn/training.hpp"

namespace causal_gcn {
namespace {

struct MlpCache {
  Matrix pre1, mask1, drop1, pre2, mask2, drop2;
  Matrix probs;
};

MlpCache run(const MlpParams& params, const Matrix& inputs, Mode mode, double rate, Rng* rng) {
  const bool drop = mode == Mode::kTrain && rate > 0.0;
  if (drop && rng == nullptr) throw DataError("train-mode dropout needs a random generator");
  if (inputs.cols() != params.W1.rows()) throw DataError("MLP input width mismatch");
  auto mask = [&](Eigen::Index rows, Eigen::Index cols) {
    std::bernoulli_distribution keep(1.0 - rate);
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = keep(*rng) ? 1.0 / (1.0 - rate) : 0.0;
    return m;
  };
  MlpCache c;
  c.pre1 = inputs * params.W1;
  c.pre1.rowwise() += params.b1;
  c.drop1 = c.pre1.cwiseMax(0.0);
  if (drop) {
    c.mask1 = mask(c.drop1.rows(), c.drop1.cols());
    c.drop1.array() *= c.mask1.array();
  }
  c.pre2 = c.drop1 * params.W2;
  c.pre2.rowwise() += params.b2;
  c.drop2 = c.pre2.cwiseMax(0.0);
  if (drop) {
    c.mask2 = mask(c.drop2.rows(), c.drop2.cols());
    c.drop2.array() *= c.mask2.array();
  }
  Matrix logits = c.drop2 * params.Wo;
  logits.rowwise() += params.bo;
  if (!logits.allFinite()) throw NumericError("non-finite activation in MLP output layer");
  c.probs.resize(logits.rows(), kNumClasses);
  for (Eigen::Index b = 0; b < logits.rows(); ++b) {
    const RowVector e = (logits.row(b).array() - logits.row(b).maxCoeff()).exp();
    c.probs.row(b) = e / e.sum();
  }
  return c;
}

Matrix flatten_inputs(const Matrix& features, const Matrix& covariates) {
  Matrix in(features.rows(), features.cols() + covariates.cols());
  in << features, covariates;
  return in;
}

}  // namespace

std::vector<ParamRef> MlpParams::refs() {
  return {make_ref("W1", W1, true), make_ref("b1", b1, false), make_ref("W2", W2, true),
          make_ref("b2", b2, false), make_ref("Wo", Wo, true), make_ref("bo", bo, false)};
}

MlpParams init_mlp_params(Eigen::Index inputs, const TrainConfig& config, Rng& rng) {
  const Eigen::Index d = config.hidden;
  MlpParams params;
  params.W1 = glorot(inputs, d, rng);
  params.b1 = RowVector::Zero(d);
  params.W2 = glorot(d, d, rng);
  params.b2 = RowVector::Zero(d);
  params.Wo = glorot(d, kNumClasses, rng);
  params.bo = RowVector::Zero(kNumClasses);
  return params;
}

Matrix mlp_forward(const MlpParams& params, const Matrix& inputs, Mode mode, double dropout_rate, Rng* rng) {
  return run(params, inputs, mode, dropout_rate, rng).probs;
}

MlpLossAndGradients mlp_loss_and_gradients(const MlpParams& params, const Matrix& inputs,
                                           const std::vector<int>& labels, double ridge,
                                           double dropout_rate, Rng* rng) {
  if (labels.empty() || static_cast<Eigen::Index>(labels.size()) != inputs.rows()) {
    throw DataError("loss needs one label per subject in a nonempty batch");
  }
  const auto c = run(params, inputs, Mode::kTrain, dropout_rate, rng);
  const auto n = static_cast<double>(labels.size());
  MlpLossAndGradients out;
  out.loss = cross_entropy(c.probs, labels) + ridge * ridge_penalty(params);

  Matrix dlogits = c.probs;
  for (std::size_t b = 0; b < labels.size(); ++b) dlogits(static_cast<Eigen::Index>(b), labels[b]) -= 1.0;
  dlogits /= n;
  auto& g = out.gradients;
  g.Wo = c.drop2.transpose() * dlogits + 2.0 * ridge * params.Wo;
  g.bo = dlogits.colwise().sum();
  Matrix d2 = dlogits * params.Wo.transpose();
  if (c.mask2.size()) d2.array() *= c.mask2.array();
  d2.array() *= (c.pre2.array() > 0.0).cast<double>();
  g.W2 = c.drop1.transpose() * d2 + 2.0 * ridge * params.W2;
  g.b2 = d2.colwise().sum();
  Matrix d1 = d2 * params.W2.transpose();
  if (c.mask1.size()) d1.array() *= c.mask1.array();
  d1.array() *= (c.pre1.array() > 0.0).cast<double>();
  g.W1 = inputs.transpose() * d1 + 2.0 * ridge * params.W1;
  g.b1 = d1.colwise().sum();
  return out;
}

Matrix MlpModel::predict(const Matrix& features, const Matrix& covariates) const {
  return mlp_forward(params, flatten_inputs(features, covariates), Mode::kEval);
}

MlpModel train_mlp(const CohortDataset& dataset, const FoldSplit& split, const TrainConfig& config) {
  config.validate();
  if (split.train_idx.empty()) throw DataError("training split is empty");
  const Matrix inputs = flatten_inputs(dataset.features, dataset.covariates);
  Rng rng(derive_seed(config.seed, 0x3119));
  MlpModel model;
  model.config = config;
  auto step = [&](MlpParams& params, const IndexList& idx, Rng& r) {
    std::vector<int> y;
    for (auto i : idx) y.push_back(dataset.labels[i]);
    return mlp_loss_and_gradients(params, select_rows(inputs, idx), y, config.ridge, config.dropout, &r);
  };
  auto eval = [&](const MlpParams& params, const IndexList& idx) {
    std::vector<int> y;
    for (auto i : idx) y.push_back(dataset.labels[i]);
    return cross_entropy(mlp_forward(params, select_rows(inputs, idx), Mode::kEval), y);
  };
  TrainingRecord record;
  AdamSettings adam{config.learning_rate, config.adam_beta1, config.adam_beta2, config.adam_epsilon};
  model.params = adam_train(init_mlp_params(inputs.cols(), config, rng), split.train_idx, split.val_idx,
                            config.epochs, config.batch_size, adam, rng, step, eval, record);
  model.val_loss_history = std::move(record.val_loss);
  model.best_epoch = record.best_epoch;
  return model;
}

TrainedModel train_vanilla_gcn(const CohortDataset& dataset, const FoldSplit& split, TrainConfig config) {
  config.input_projection = InputProjection::kShared;
  return train(dataset, split, config);
}

}  // namespace causal_gcn
