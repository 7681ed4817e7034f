#pragma once

#include <json.hpp>

#include "causal_gcn/common.hpp"

namespace causal_gcn {

inline constexpr int kDefaultComponents = 8;

// Principal axes of every node except `node_id`, fitted on training rows.
struct AdjustmentBasis {
  std::size_t node_id = 0;
  RowVector mean_vector;  // p - 1
  Matrix basis;           // (p - 1) x K, orthonormal columns
  Vector eigenvalues;     // all p - 1 covariance eigenvalues, descending
  IndexList fit_idx;

  Eigen::Index components() const { return basis.cols(); }
  Vector explained_variance_ratio() const;
};

// Features of all nodes but `node_id`.
RowVector drop_node(const RowVector& features, std::size_t node_id);

// Top-K eigenvectors of the (n - 1)-normalized covariance of the centered
// training columns, sign-fixed so each column's largest-magnitude entry is
// positive.
AdjustmentBasis fit_basis(const Matrix& features, const IndexList& fit_idx, std::size_t node_id, int components);

// (x_{-j} - mean) U
RowVector project(const AdjustmentBasis& basis, const RowVector& subject_features);

// [C ; t]
RowVector build_adjustment(const RowVector& covariates, const RowVector& scores);

// One adjustment vector per row of `features`.
Matrix adjustment_inputs(const AdjustmentBasis& basis, const Matrix& features, const Matrix& covariates);

nlohmann::json basis_to_json(const AdjustmentBasis& basis);

}  // namespace causal_gcn
