#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "causal_gcn/common.hpp"

namespace causal_gcn {

inline const std::array<std::string, kNumClasses> kDefaultClassNames = {"CN", "MCI", "AD"};

// Subjects share one adjacency; rows of `features`/`covariates` follow
// `subject_ids`, which are kept in sorted order.
struct CohortDataset {
  Matrix adjacency;   // p x p, symmetric, zero diagonal
  Matrix features;    // N x p
  Matrix covariates;  // N x q
  std::vector<int> labels;
  std::vector<std::string> subject_ids;
  std::vector<std::string> node_names;
  std::vector<std::string> covariate_names;
  std::array<std::string, kNumClasses> class_names = kDefaultClassNames;

  std::size_t num_subjects() const { return static_cast<std::size_t>(features.rows()); }
  std::size_t num_nodes() const { return static_cast<std::size_t>(features.cols()); }
  std::size_t num_covariates() const { return static_cast<std::size_t>(covariates.cols()); }
};

// Column means and standard deviations used for z-scoring. The sd uses the
// population convention (divide by n); constant columns get sd 1.
struct ScalerState {
  RowVector feature_mean;
  RowVector feature_sd;
  RowVector covariate_mean;
  RowVector covariate_sd;
  std::string sd_convention = "population";

  CohortDataset apply(const CohortDataset& dataset) const;
};

struct FoldSplit {
  int fold_id = 0;
  IndexList train_idx;
  IndexList val_idx;
  IndexList test_idx;
};

struct ThresholdResult {
  Matrix adjacency;
  double tau = 0.0;
  double density = 0.0;  // off-diagonal nonzero fraction
};

inline constexpr double kDefaultTargetDensity = 0.15;
inline constexpr double kSymmetryTolerance = 1e-9;

// `adjacency_path` may be a dense p x p matrix (header = node names) or an
// edge list with header src,dst,weight, which is symmetrized on load.
CohortDataset load_cohort(const std::filesystem::path& features_path,
                          const std::filesystem::path& covariates_path,
                          const std::filesystem::path& labels_path,
                          const std::filesystem::path& adjacency_path);

// Writes features.csv, covariates.csv, labels.csv and adjacency.csv.
void write_cohort(const CohortDataset& dataset, const std::filesystem::path& dir);

// Throws DataError on shape mismatch, asymmetry, negative weights or bad labels.
void validate_cohort(const CohortDataset& dataset);

std::pair<CohortDataset, ScalerState> standardize(const CohortDataset& dataset,
                                                  const IndexList& fit_idx);

ScalerState fit_scaler(const CohortDataset& dataset, const IndexList& fit_idx);

// Symmetrizes by elementwise max, zeroes weights below tau and rescales the
// survivors by the largest weight. When `target_density` is given, tau is the
// weight that keeps that fraction of node pairs. With neither argument the
// default density of 15% is used; passing both is an error.
ThresholdResult threshold_and_rescale(const Matrix& raw, std::optional<double> tau,
                                      std::optional<double> target_density);

// D^{-1/2} (A + I) D^{-1/2} with D the degree matrix of A + I.
Matrix normalize_adjacency(const Matrix& adjacency);

std::vector<FoldSplit> stratified_kfold(const std::vector<int>& labels, int k, std::uint64_t seed);

double off_diagonal_density(const Matrix& adjacency);

Matrix select_rows(const Matrix& m, const IndexList& idx);

int parse_class_label(const std::string& cell, const std::array<std::string, kNumClasses>& names);

}  // namespace causal_gcn
