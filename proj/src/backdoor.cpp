#include "causal_gcn/backdoor.hpp"

#include <string>

#include "causal_gcn/checkpoint.hpp"

namespace causal_gcn {

RowVector drop_node(const RowVector& features, std::size_t node_id) {
  const auto p = features.size();
  const auto j = static_cast<Eigen::Index>(node_id);
  RowVector out(p - 1);
  out << features.head(j), features.tail(p - j - 1);
  return out;
}

Vector AdjustmentBasis::explained_variance_ratio() const {
  const double total = eigenvalues.sum();
  if (total <= 0.0) return Vector::Zero(components());
  return eigenvalues.head(components()) / total;
}

AdjustmentBasis fit_basis(const Matrix& features, const IndexList& fit_idx, std::size_t node_id, int components) {
  const auto p = features.cols();
  if (node_id >= static_cast<std::size_t>(p)) throw DataError("fit_basis: node out of range");
  if (fit_idx.empty()) throw DataError("fit_basis: fit index set is empty");
  const auto max_k = std::min<Eigen::Index>(static_cast<Eigen::Index>(fit_idx.size()), p - 1);
  if (components < 1 || components > max_k) {
    throw DataError("component count " + std::to_string(components) + " outside [1, " + std::to_string(max_k) + "]");
  }
  const auto n = static_cast<Eigen::Index>(fit_idx.size());
  Matrix rest(n, p - 1);
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto i = static_cast<Eigen::Index>(fit_idx[static_cast<std::size_t>(r)]);
    if (i >= features.rows()) throw DataError("fit_basis: subject index out of range");
    rest.row(r) = drop_node(features.row(i), node_id);
  }
  AdjustmentBasis out;
  out.node_id = node_id;
  out.fit_idx = fit_idx;
  out.mean_vector = rest.colwise().mean();
  rest.rowwise() -= out.mean_vector;
  const Matrix cov = rest.transpose() * rest / static_cast<double>(std::max<Eigen::Index>(1, n - 1));

  Eigen::SelfAdjointEigenSolver<Matrix> solver(cov);
  if (solver.info() != Eigen::Success) throw NumericError("eigen-decomposition failed for node " + std::to_string(node_id));
  // Eigen returns ascending eigenvalues.
  out.eigenvalues = solver.eigenvalues().reverse().cwiseMax(0.0);
  out.basis = solver.eigenvectors().rowwise().reverse().leftCols(components);
  for (Eigen::Index c = 0; c < out.basis.cols(); ++c) {
    Eigen::Index arg = 0;
    out.basis.col(c).cwiseAbs().maxCoeff(&arg);
    if (out.basis(arg, c) < 0.0) out.basis.col(c) *= -1.0;
  }
  return out;
}

RowVector project(const AdjustmentBasis& basis, const RowVector& subject_features) {
  if (subject_features.size() != basis.mean_vector.size() + 1) throw DataError("project: feature length mismatch");
  return (drop_node(subject_features, basis.node_id) - basis.mean_vector) * basis.basis;
}

RowVector build_adjustment(const RowVector& covariates, const RowVector& scores) {
  RowVector z(covariates.size() + scores.size());
  z << covariates, scores;
  return z;
}

Matrix adjustment_inputs(const AdjustmentBasis& basis, const Matrix& features, const Matrix& covariates) {
  Matrix out(features.rows(), covariates.cols() + basis.components());
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    out.row(i) = build_adjustment(covariates.row(i), project(basis, features.row(i)));
  }
  return out;
}

nlohmann::json basis_to_json(const AdjustmentBasis& basis) {
  return {{"node_id", basis.node_id},
          {"components", basis.components()},
          {"mean", array_to_json(basis.mean_vector)},
          {"matrix", array_to_json(basis.basis)},
          {"eigenvalues", array_to_json(basis.eigenvalues.transpose())},
          {"fit_size", basis.fit_idx.size()}};
}

}  // namespace causal_gcn
