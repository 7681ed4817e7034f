#pragma once

#include <optional>
#include <string>
#include <vector>

#include "causal_gcn/common.hpp"
#include "causal_gcn/graph_data.hpp"
#include "causal_gcn/params.hpp"

namespace causal_gcn {

// How the scalar node feature enters the first graph convolution.
//   kPerNode: node k uses its own projection row W0[k] (W0 is p x d).
//   kShared : every node uses the same 1 x d projection.
enum class InputProjection { kPerNode, kShared };

enum class Mode { kTrain, kEval };

struct TrainConfig {
  int hidden = 64;
  int covariate_width = 16;
  double dropout = 0.5;
  double learning_rate = 1e-3;
  double ridge = 1e-4;
  int epochs = 200;
  int batch_size = 0;  // 0 = full batch
  bool batchnorm = false;
  InputProjection input_projection = InputProjection::kPerNode;
  std::uint64_t seed = 0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;

  void validate() const;
};

// Two graph convolutions, mean pooling, a covariate branch and a softmax
// head. Batch-norm statistics are buffers, not learnable.
struct GcnParams {
  Matrix W0;     // 1 x d or p x d
  RowVector b0;  // d
  Matrix W1;     // d x d
  RowVector b1;  // d
  Matrix Wc;     // q' x d_c
  RowVector bc;  // d_c
  Matrix Wo;     // (d + d_c) x 3
  RowVector bo;  // 3
  bool batchnorm = false;
  RowVector bn_mean;  // running statistics of the pooled embedding
  RowVector bn_var;

  Eigen::Index hidden() const { return W1.rows(); }
  Eigen::Index covariate_inputs() const { return Wc.rows(); }
  Eigen::Index covariate_width() const { return Wc.cols(); }
  bool per_node_input() const { return W0.rows() > 1; }

  std::vector<ParamRef> refs();
  std::vector<ParamRef> refs() const { return const_cast<GcnParams*>(this)->refs(); }
};

GcnParams init_gcn_params(Eigen::Index p, Eigen::Index covariate_inputs, const TrainConfig& config, Rng& rng);
GcnParams zeros_like(const GcnParams& params);

// Subjects in rows. `labels` may be empty for pure prediction.
struct Batch {
  Matrix features;    // B x p
  Matrix covariates;  // B x q'
  std::vector<int> labels;
};

Batch make_batch(const Matrix& features, const Matrix& covariates, const std::vector<int>& labels,
                 const IndexList& idx);

// Intermediate activations of one forward pass, kept for the backward pass.
struct ForwardCache {
  using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  // Node-level activations stacked per subject: row b * p + k.
  RowMatrix pre1, mask1, pre2, mask2, drop1;
  Matrix pooled;       // B x d, before batch norm
  Matrix normalized;   // B x d, after batch norm (== pooled when off)
  RowVector bn_mean, bn_inv_std;
  Matrix cov_pre;      // B x d_c
  Matrix head_input;   // B x (d + d_c)
};

struct ForwardPass {
  Matrix probs;  // B x 3
  ForwardCache cache;
};

// Train mode draws inverted-dropout masks from `rng` (Bernoulli(1 - r),
// scaled by 1 / (1 - r)) and normalizes the pooled embedding with batch
// statistics when batch norm is on. Eval mode is deterministic.
ForwardPass forward(const GcnParams& params, const Matrix& propagation, const Batch& batch, Mode mode,
                    double dropout_rate = 0.0, Rng* rng = nullptr);

// Eval-mode class probabilities for one subject.
Eigen::Vector3d predict(const GcnParams& params, const Matrix& propagation, const RowVector& features,
                        const RowVector& covariates);

Matrix predict_batch(const GcnParams& params, const Matrix& propagation, const Matrix& features,
                     const Matrix& covariates);

struct LossAndGradients {
  double loss = 0.0;
  GcnParams gradients;
  RowVector batch_mean;  // pooled-embedding statistics, for batch-norm buffers
  RowVector batch_var;
};

// Mean cross-entropy plus ridge * sum of squared weight entries (biases are
// not penalized). Dropout masks are drawn once and held fixed for the step.
LossAndGradients loss_and_gradients(const GcnParams& params, const Matrix& propagation, const Batch& batch,
                                    double ridge, double dropout_rate = 0.0, Rng* rng = nullptr);

double cross_entropy(const Matrix& probs, const std::vector<int>& labels);

struct TrainedModel {
  GcnParams params;
  Matrix propagation;
  ScalerState scaler;
  TrainConfig config;
  std::vector<double> train_loss_history;
  std::vector<double> val_loss_history;
  int best_epoch = -1;  // -1: initial parameters were never improved upon
  std::string conditioning = "implicit";
  int adjusted_node = -1;  // explicit conditioning only

  Matrix predict(const Matrix& features, const Matrix& covariates) const {
    return predict_batch(params, propagation, features, covariates);
  }
};

// `dataset` is already standardized. `covariate_inputs` replaces the
// covariate matrix (N x q') for explicit back-door conditioning.
TrainedModel train(const CohortDataset& dataset, const FoldSplit& split, const TrainConfig& config,
                   const std::optional<Matrix>& covariate_inputs = std::nullopt);

// Same training loop against an arbitrary propagation matrix.
TrainedModel train_with_propagation(const Matrix& propagation, const Matrix& features,
                                    const Matrix& covariates, const std::vector<int>& labels,
                                    const FoldSplit& split, const TrainConfig& config);

std::string to_string(InputProjection projection);
InputProjection input_projection_from_string(const std::string& name);

}  // namespace causal_gcn
