#include "causal_gcn/graph_data.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numeric>

#include "causal_gcn/csv.hpp"

namespace causal_gcn {
namespace {

std::string cell_ref(const std::filesystem::path& path, std::size_t row, std::size_t col) {
  return path.filename().string() + " row " + std::to_string(row) + " column " +
         std::to_string(col);
}

// subject_id -> numeric row, in file order
std::map<std::string, std::vector<double>> read_subject_table(const std::filesystem::path& path,
                                                              std::vector<std::string>& columns) {
  auto table = csv::read(path);
  if (table.header.size() < 2 || table.header.front() != "subject_id") {
    throw DataError(path.filename().string() + ": first column must be subject_id");
  }
  columns.assign(table.header.begin() + 1, table.header.end());
  std::map<std::string, std::vector<double>> out;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    std::vector<double> values(columns.size());
    for (std::size_t c = 0; c < columns.size(); ++c) {
      values[c] = csv::parse_number(row[c + 1], cell_ref(path, r + 1, c + 1));
    }
    if (!out.emplace(row[0], std::move(values)).second) {
      throw DataError(path.filename().string() + ": duplicate subject_id " + row[0]);
    }
  }
  return out;
}

Matrix read_adjacency(const std::filesystem::path& path, const std::vector<std::string>& nodes) {
  auto table = csv::read(path);
  const auto p = static_cast<Eigen::Index>(nodes.size());
  Matrix a = Matrix::Zero(p, p);
  if (table.header == std::vector<std::string>{"src", "dst", "weight"}) {
    std::map<std::string, Eigen::Index> by_name;
    for (Eigen::Index j = 0; j < p; ++j) by_name[nodes[j]] = j;
    auto resolve = [&](const std::string& s, std::size_t r) -> Eigen::Index {
      if (auto it = by_name.find(s); it != by_name.end()) return it->second;
      const double v = csv::parse_number(s, cell_ref(path, r, 0));
      if (v < 0 || v >= static_cast<double>(p) || v != std::floor(v)) {
        throw DataError("unknown node '" + s + "' at " + cell_ref(path, r, 0));
      }
      return static_cast<Eigen::Index>(v);
    };
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
      const auto& row = table.rows[r];
      const auto i = resolve(row[0], r + 1);
      const auto j = resolve(row[1], r + 1);
      const double w = csv::parse_number(row[2], cell_ref(path, r + 1, 2));
      if (i == j) continue;
      a(i, j) = std::max(a(i, j), w);
      a(j, i) = a(i, j);
    }
    return a;
  }
  std::size_t offset = 0;
  if (table.header.size() == nodes.size() + 1) offset = 1;  // leading row-label column
  if (table.header.size() != nodes.size() + offset) {
    throw DataError("adjacency has " + std::to_string(table.header.size()) +
                    " columns, features have " + std::to_string(nodes.size()) + " nodes");
  }
  if (table.rows.size() != nodes.size()) {
    throw DataError("adjacency has " + std::to_string(table.rows.size()) + " rows, expected " +
                    std::to_string(nodes.size()));
  }
  for (Eigen::Index i = 0; i < p; ++i) {
    for (Eigen::Index j = 0; j < p; ++j) {
      a(i, j) = csv::parse_number(table.rows[i][j + offset], cell_ref(path, i + 1, j + offset));
    }
  }
  a.diagonal().setZero();
  return a;
}

void column_stats(const Matrix& m, const IndexList& idx, RowVector& mean, RowVector& sd) {
  const auto n = static_cast<double>(idx.size());
  mean = RowVector::Zero(m.cols());
  sd = RowVector::Ones(m.cols());
  for (auto i : idx) mean += m.row(static_cast<Eigen::Index>(i));
  mean /= n;
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    double ss = 0.0;
    for (auto i : idx) {
      const double d = m(static_cast<Eigen::Index>(i), c) - mean(c);
      ss += d * d;
    }
    const double s = std::sqrt(ss / n);
    // Constant columns map to zero rather than dividing by ~0.
    sd(c) = s > 1e-12 * std::max(1.0, std::abs(mean(c))) ? s : 1.0;
  }
}

}  // namespace

int parse_class_label(const std::string& cell, const std::array<std::string, kNumClasses>& names) {
  for (int c = 0; c < kNumClasses; ++c) {
    if (cell == names[c] || cell == std::to_string(c)) return c;
  }
  throw DataError("unknown class '" + cell + "'");
}

CohortDataset load_cohort(const std::filesystem::path& features_path,
                          const std::filesystem::path& covariates_path,
                          const std::filesystem::path& labels_path,
                          const std::filesystem::path& adjacency_path) {
  CohortDataset ds;
  auto features = read_subject_table(features_path, ds.node_names);
  auto covariates = read_subject_table(covariates_path, ds.covariate_names);

  auto label_table = csv::read(labels_path);
  if (label_table.header.size() != 2 || label_table.header[0] != "subject_id") {
    throw DataError("labels.csv must have columns subject_id,label");
  }
  std::map<std::string, int> labels;
  for (std::size_t r = 0; r < label_table.rows.size(); ++r) {
    const auto& row = label_table.rows[r];
    try {
      labels[row[0]] = parse_class_label(row[1], ds.class_names);
    } catch (const DataError& e) {
      throw DataError(std::string(e.what()) + " at " + cell_ref(labels_path, r + 1, 1));
    }
  }

  if (features.size() != covariates.size() || features.size() != labels.size()) {
    throw DataError("row counts disagree: features " + std::to_string(features.size()) +
                    ", covariates " + std::to_string(covariates.size()) + ", labels " +
                    std::to_string(labels.size()));
  }
  const auto n = static_cast<Eigen::Index>(features.size());
  ds.features.resize(n, static_cast<Eigen::Index>(ds.node_names.size()));
  ds.covariates.resize(n, static_cast<Eigen::Index>(ds.covariate_names.size()));
  Eigen::Index i = 0;
  for (const auto& [id, row] : features) {  // std::map iterates in sorted id order
    auto cov = covariates.find(id);
    auto lab = labels.find(id);
    if (cov == covariates.end()) throw DataError("subject " + id + " missing from covariates");
    if (lab == labels.end()) throw DataError("subject " + id + " missing from labels");
    ds.subject_ids.push_back(id);
    ds.features.row(i) = Eigen::Map<const RowVector>(row.data(), static_cast<Eigen::Index>(row.size()));
    ds.covariates.row(i) =
        Eigen::Map<const RowVector>(cov->second.data(), static_cast<Eigen::Index>(cov->second.size()));
    ds.labels.push_back(lab->second);
    ++i;
  }
  ds.adjacency = read_adjacency(adjacency_path, ds.node_names);
  validate_cohort(ds);
  return ds;
}

void validate_cohort(const CohortDataset& ds) {
  const auto p = ds.features.cols();
  const auto n = ds.features.rows();
  if (ds.adjacency.rows() != p || ds.adjacency.cols() != p) {
    throw DataError("adjacency must be " + std::to_string(p) + "x" + std::to_string(p));
  }
  if (ds.covariates.rows() != n || static_cast<Eigen::Index>(ds.labels.size()) != n) {
    throw DataError("dimension mismatch between features, covariates and labels");
  }
  if (static_cast<Eigen::Index>(ds.node_names.size()) != p) throw DataError("node_names size mismatch");
  for (Eigen::Index r = 0; r < p; ++r) {
    for (Eigen::Index c = 0; c < p; ++c) {
      const double a = ds.adjacency(r, c);
      if (!std::isfinite(a) || a < 0.0) {
        throw DataError("adjacency entry (" + std::to_string(r) + "," + std::to_string(c) +
                        ") is negative or non-finite");
      }
      if (c > r && std::abs(a - ds.adjacency(c, r)) > kSymmetryTolerance) {
        throw DataError("adjacency is not symmetric at cell (" + std::to_string(r) + "," +
                        std::to_string(c) + ")");
      }
    }
  }
  for (int y : ds.labels) {
    if (y < 0 || y >= kNumClasses) throw DataError("unknown class " + std::to_string(y));
  }
  if (!ds.features.allFinite() || !ds.covariates.allFinite()) {
    throw DataError("features or covariates contain non-finite values");
  }
}

void write_cohort(const CohortDataset& ds, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto subject_table = [&](const std::vector<std::string>& names, const Matrix& m) {
    csv::Table t;
    t.header.push_back("subject_id");
    t.header.insert(t.header.end(), names.begin(), names.end());
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      std::vector<std::string> row{ds.subject_ids[i]};
      for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(csv::format_number(m(i, c)));
      t.rows.push_back(std::move(row));
    }
    return t;
  };
  csv::write(dir / "features.csv", subject_table(ds.node_names, ds.features));
  csv::write(dir / "covariates.csv", subject_table(ds.covariate_names, ds.covariates));

  csv::Table labels{{"subject_id", "label"}, {}};
  for (std::size_t i = 0; i < ds.labels.size(); ++i) {
    labels.rows.push_back({ds.subject_ids[i], ds.class_names[ds.labels[i]]});
  }
  csv::write(dir / "labels.csv", labels);

  csv::Table adj{ds.node_names, {}};
  for (Eigen::Index r = 0; r < ds.adjacency.rows(); ++r) {
    std::vector<std::string> row;
    for (Eigen::Index c = 0; c < ds.adjacency.cols(); ++c) {
      row.push_back(csv::format_number(ds.adjacency(r, c)));
    }
    adj.rows.push_back(std::move(row));
  }
  csv::write(dir / "adjacency.csv", adj);
}

Matrix select_rows(const Matrix& m, const IndexList& idx) {
  Matrix out(static_cast<Eigen::Index>(idx.size()), m.cols());
  for (std::size_t r = 0; r < idx.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = m.row(static_cast<Eigen::Index>(idx[r]));
  return out;
}

ScalerState fit_scaler(const CohortDataset& dataset, const IndexList& fit_idx) {
  if (fit_idx.empty()) throw DataError("standardize: fit index set is empty");
  for (auto i : fit_idx) {
    if (i >= dataset.num_subjects()) throw DataError("standardize: subject index out of range");
  }
  ScalerState s;
  column_stats(dataset.features, fit_idx, s.feature_mean, s.feature_sd);
  column_stats(dataset.covariates, fit_idx, s.covariate_mean, s.covariate_sd);
  return s;
}

CohortDataset ScalerState::apply(const CohortDataset& dataset) const {
  CohortDataset out = dataset;
  out.features = (dataset.features.rowwise() - feature_mean).array().rowwise() / feature_sd.array();
  out.covariates =
      (dataset.covariates.rowwise() - covariate_mean).array().rowwise() / covariate_sd.array();
  return out;
}

std::pair<CohortDataset, ScalerState> standardize(const CohortDataset& dataset,
                                                  const IndexList& fit_idx) {
  auto scaler = fit_scaler(dataset, fit_idx);
  return {scaler.apply(dataset), std::move(scaler)};
}

double off_diagonal_density(const Matrix& a) {
  const auto p = a.rows();
  if (p < 2) return 0.0;
  std::size_t nnz = 0;
  for (Eigen::Index r = 0; r < p; ++r)
    for (Eigen::Index c = 0; c < p; ++c)
      if (r != c && a(r, c) != 0.0) ++nnz;
  return static_cast<double>(nnz) / static_cast<double>(p * (p - 1));
}

ThresholdResult threshold_and_rescale(const Matrix& raw, std::optional<double> tau,
                                      std::optional<double> target_density) {
  if (raw.rows() != raw.cols()) throw DataError("adjacency must be square");
  if ((raw.array() < 0.0).any() || !raw.allFinite()) {
    throw DataError("adjacency must be finite and nonnegative");
  }
  if (tau && target_density) throw DataError("give either tau or target density, not both");
  const auto p = raw.rows();
  Matrix a = raw.cwiseMax(raw.transpose());
  a.diagonal().setZero();

  ThresholdResult result;
  if (tau) {
    result.tau = *tau;
  } else {
    const double density = target_density.value_or(kDefaultTargetDensity);
    if (!(density > 0.0 && density <= 1.0)) throw DataError("target density must lie in (0, 1]");
    std::vector<double> weights;
    for (Eigen::Index r = 0; r < p; ++r)
      for (Eigen::Index c = r + 1; c < p; ++c) weights.push_back(a(r, c));
    const auto keep = static_cast<std::size_t>(std::llround(density * static_cast<double>(weights.size())));
    if (keep == 0 || weights.empty()) {
      result.tau = std::numeric_limits<double>::infinity();
    } else {
      std::nth_element(weights.begin(), weights.begin() + (keep - 1), weights.end(), std::greater<>());
      result.tau = weights[keep - 1];
    }
  }
  for (Eigen::Index r = 0; r < p; ++r)
    for (Eigen::Index c = 0; c < p; ++c)
      if (a(r, c) < result.tau) a(r, c) = 0.0;
  const double max_w = a.maxCoeff();
  if (!(max_w > 0.0)) throw DataError("graph fully disconnected after thresholding");
  a /= max_w;
  result.density = off_diagonal_density(a);
  result.adjacency = std::move(a);
  return result;
}

Matrix normalize_adjacency(const Matrix& adjacency) {
  Matrix a = adjacency;
  a.diagonal().array() += 1.0;
  const Vector inv_sqrt = a.rowwise().sum().array().rsqrt();
  return inv_sqrt.asDiagonal() * a * inv_sqrt.asDiagonal();
}

std::vector<FoldSplit> stratified_kfold(const std::vector<int>& labels, int k, std::uint64_t seed) {
  if (k < 2) throw DataError("fold count must be at least 2");
  std::array<IndexList, kNumClasses> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= kNumClasses) throw DataError("unknown class in labels");
    by_class[labels[i]].push_back(i);
  }
  for (int c = 0; c < kNumClasses; ++c) {
    if (!by_class[c].empty() && by_class[c].size() < static_cast<std::size_t>(k)) {
      throw DataError("class " + kDefaultClassNames[c] + " has " + std::to_string(by_class[c].size()) +
                      " members, fewer than " + std::to_string(k) + " folds");
    }
  }
  Rng rng(derive_seed(seed, 0xf01d));
  std::vector<int> fold_of(labels.size(), -1);
  std::size_t offset = 0;
  for (auto& members : by_class) {
    std::shuffle(members.begin(), members.end(), rng);
    for (std::size_t m = 0; m < members.size(); ++m) {
      fold_of[members[m]] = static_cast<int>((offset + m) % static_cast<std::size_t>(k));
    }
    offset += members.size();
  }

  std::vector<FoldSplit> folds;
  for (int f = 0; f < k; ++f) {
    FoldSplit split;
    split.fold_id = f;
    Rng fold_rng(derive_seed(seed, 0x5a11 + static_cast<std::uint64_t>(f)));
    for (int c = 0; c < kNumClasses; ++c) {
      IndexList pool;
      for (auto i : by_class[c]) {
        if (fold_of[i] == f) {
          split.test_idx.push_back(i);
        } else {
          pool.push_back(i);
        }
      }
      std::sort(pool.begin(), pool.end());
      std::shuffle(pool.begin(), pool.end(), fold_rng);
      const auto n_val = static_cast<std::size_t>(std::llround(0.2 * static_cast<double>(pool.size())));
      split.train_idx.insert(split.train_idx.end(), pool.begin(), pool.end() - static_cast<std::ptrdiff_t>(n_val));
      split.val_idx.insert(split.val_idx.end(), pool.end() - static_cast<std::ptrdiff_t>(n_val), pool.end());
    }
    std::sort(split.train_idx.begin(), split.train_idx.end());
    std::sort(split.val_idx.begin(), split.val_idx.end());
    std::sort(split.test_idx.begin(), split.test_idx.end());
    folds.push_back(std::move(split));
  }
  return folds;
}

}  // namespace causal_gcn
