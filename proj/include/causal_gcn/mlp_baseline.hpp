#pragma once

#include "causal_gcn/gcn_model.hpp"

namespace causal_gcn {

// Associational baseline: node features and covariates flattened into one
// input vector, two ReLU layers with dropout, softmax head.
struct MlpParams {
  Matrix W1;  // (p + q) x d
  RowVector b1;
  Matrix W2;  // d x d
  RowVector b2;
  Matrix Wo;  // d x 3
  RowVector bo;

  std::vector<ParamRef> refs();
  std::vector<ParamRef> refs() const { return const_cast<MlpParams*>(this)->refs(); }
};

struct MlpModel {
  MlpParams params;
  TrainConfig config;
  std::vector<double> val_loss_history;
  int best_epoch = -1;

  Matrix predict(const Matrix& features, const Matrix& covariates) const;
};

MlpParams init_mlp_params(Eigen::Index inputs, const TrainConfig& config, Rng& rng);

Matrix mlp_forward(const MlpParams& params, const Matrix& inputs, Mode mode, double dropout_rate = 0.0,
                   Rng* rng = nullptr);

struct MlpLossAndGradients {
  double loss = 0.0;
  MlpParams gradients;
};

MlpLossAndGradients mlp_loss_and_gradients(const MlpParams& params, const Matrix& inputs,
                                           const std::vector<int>& labels, double ridge,
                                           double dropout_rate = 0.0, Rng* rng = nullptr);

MlpModel train_mlp(const CohortDataset& dataset, const FoldSplit& split, const TrainConfig& config);

// Graph-aware baseline without the intervention machinery: the same network
// and training loop, with the node projection shared across nodes.
TrainedModel train_vanilla_gcn(const CohortDataset& dataset, const FoldSplit& split, TrainConfig config);

}  // namespace causal_gcn
