#include "causal_gcn/synth_scm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "causal_gcn/stats.hpp"

namespace causal_gcn {
namespace {

constexpr double kApoe4Prevalence = 0.3;

std::string padded(const std::string& prefix, std::size_t i, std::size_t count) {
  std::string digits = std::to_string(i);
  const std::size_t width = std::max<std::size_t>(2, std::to_string(count > 0 ? count - 1 : 0).size());
  if (digits.size() < width) digits.insert(0, width - digits.size(), '0');
  return prefix + digits;
}

// Ring plus random chords, giving a connected graph of roughly 30% density.
Matrix random_connected_graph(std::size_t p, Rng& rng) {
  const auto n = static_cast<Eigen::Index>(p);
  Matrix a = Matrix::Zero(n, n);
  if (p < 2) return a;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index j = (i + 1) % n;
    if (i != j) a(i, j) = a(j, i) = 1.0;
  }
  std::bernoulli_distribution chord(0.2);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 2; j < n; ++j)
      if (a(i, j) == 0.0 && chord(rng)) a(i, j) = a(j, i) = 1.0;
  return a;
}

RowVector draw_covariates(Rng& rng) {
  std::normal_distribution<double> normal;
  std::bernoulli_distribution sex(0.5);
  std::bernoulli_distribution apoe4(kApoe4Prevalence);
  RowVector c(3);
  c(0) = normal(rng);
  c(1) = sex(rng) ? 1.0 : -1.0;
  c(2) = apoe4(rng) ? 1.0 : -1.0;
  return c;
}

}  // namespace

void ScmSpec::validate() const {
  const auto n = static_cast<Eigen::Index>(p);
  if (p == 0) throw DataError("scm: p must be positive");
  if (adjacency.rows() != n || adjacency.cols() != n) throw DataError("scm: adjacency must be p x p");
  if (confounder_loadings.cols() != n || confounder_loadings.rows() != 3) {
    throw DataError("scm: confounder_loadings must be 3 x p (age, sex, apoe4)");
  }
  if (outcome_weights.size() != n) throw DataError("scm: outcome_weights must have length p");
  if (confounder_outcome_weights.size() != 3) {
    throw DataError("scm: confounder_outcome_weights must have length 3");
  }
  if (!(noise_sd > 0.0)) throw DataError("scm: noise_sd must be positive");
  for (int j : causal_nodes) {
    if (j < 0 || j >= static_cast<int>(p)) throw DataError("scm: causal node out of range");
  }
  for (Eigen::Index j = 0; j < n; ++j) {
    const bool causal = std::find(causal_nodes.begin(), causal_nodes.end(), static_cast<int>(j)) != causal_nodes.end();
    if (!causal && outcome_weights(j) != 0.0) {
      throw DataError("scm: outcome weight of node " + std::to_string(j) + " is nonzero but node is not causal");
    }
  }
  if ((adjacency - adjacency.transpose()).cwiseAbs().maxCoeff() > kSymmetryTolerance ||
      (adjacency.array() < 0.0).any()) {
    throw DataError("scm: adjacency must be symmetric and nonnegative");
  }
}

namespace {

// Shared structure of the presets; returns the node reserved as the cause.
ScmSpec confounded_base(std::size_t p, std::uint64_t seed, int& cause) {
  if (p < 6) throw DataError("presets need at least 6 nodes");
  Rng rng(derive_seed(seed, 0x5c3));
  ScmSpec spec;
  spec.p = p;
  spec.seed = seed;
  spec.adjacency = random_connected_graph(p, rng);
  spec.confounder_loadings = Matrix::Zero(3, static_cast<Eigen::Index>(p));
  spec.outcome_weights = Vector::Zero(static_cast<Eigen::Index>(p));
  spec.confounder_outcome_weights = Vector(3);
  spec.confounder_outcome_weights << 1.5, 0.0, 1.0;
  spec.noise_sd = 0.5;

  std::vector<int> order(p);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  // order[0] is reserved for the causal node of the single-cause preset.
  for (int k = 1; k <= 4; ++k) {
    spec.confounder_loadings(0, order[k]) = 1.5;
    spec.confounder_loadings(2, order[k]) = 0.75;
  }
  cause = order[0];
  return spec;
}

}  // namespace

ScmSpec null_preset(std::size_t p, std::uint64_t seed) {
  int cause = 0;
  return confounded_base(p, seed, cause);
}

ScmSpec single_cause_preset(std::size_t p, std::uint64_t seed) {
  int cause = 0;
  ScmSpec spec = confounded_base(p, seed, cause);
  spec.causal_nodes.push_back(cause);
  spec.outcome_weights(cause) = 1.0;
  return spec;
}

ScmSpec preset_by_name(const std::string& name, std::size_t p, std::uint64_t seed) {
  if (name == "single-cause") return single_cause_preset(p, seed);
  if (name == "null") return null_preset(p, seed);
  throw DataError("unknown preset '" + name + "' (expected single-cause or null)");
}

Eigen::Vector3d scm_class_probs(const ScmSpec& spec, const RowVector& x, const RowVector& c) {
  const double a = x.dot(spec.outcome_weights.transpose()) + c.dot(spec.confounder_outcome_weights.transpose());
  // softmax over (0, a/2, a), shifted by the max for stability
  const double m = std::max({0.0, 0.5 * a, a});
  Eigen::Vector3d e(std::exp(-m), std::exp(0.5 * a - m), std::exp(a - m));
  return e / e.sum();
}

std::pair<CohortDataset, GroundTruth> generate_cohort(const ScmSpec& spec, std::size_t n_subjects) {
  spec.validate();
  if (n_subjects == 0) throw DataError("n_subjects must be at least 1");
  const auto p = static_cast<Eigen::Index>(spec.p);
  const auto n = static_cast<Eigen::Index>(n_subjects);
  const Matrix smoothing = normalize_adjacency(spec.adjacency);

  CohortDataset ds;
  ds.adjacency = spec.adjacency;
  ds.features.resize(n, p);
  ds.covariates.resize(n, 3);
  ds.covariate_names = kScmCovariateNames;
  for (std::size_t j = 0; j < spec.p; ++j) ds.node_names.push_back(padded("roi", j, spec.p));

  Rng rng(derive_seed(spec.seed, 0xc0407));
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif;
  Vector eps(p);
  RowVector eta(p);
  for (Eigen::Index i = 0; i < n; ++i) {
    const RowVector c = draw_covariates(rng);
    for (Eigen::Index k = 0; k < p; ++k) eps(k) = normal(rng);
    for (Eigen::Index k = 0; k < p; ++k) eta(k) = normal(rng);
    const RowVector x = c * spec.confounder_loadings + (smoothing * eps).transpose() + spec.noise_sd * eta;
    const auto probs = scm_class_probs(spec, x, c);
    const double u = unif(rng);
    const int y = u < probs(0) ? 0 : (u < probs(0) + probs(1) ? 1 : 2);
    ds.features.row(i) = x;
    ds.covariates.row(i) = c;
    ds.labels.push_back(y);
    ds.subject_ids.push_back(padded("S", static_cast<std::size_t>(i), std::max<std::size_t>(n_subjects, 10000)));
  }

  GroundTruth truth;
  truth.true_delta = Vector::Zero(p);
  truth.true_delta_se = Vector::Zero(p);
  truth.x_lo.resize(p);
  truth.x_hi.resize(p);
  truth.n_mc = kGroundTruthDraws;
  for (Eigen::Index j = 0; j < p; ++j) {
    std::vector<double> column(ds.features.col(j).data(), ds.features.col(j).data() + n);
    std::sort(column.begin(), column.end());
    truth.x_lo(j) = stats::quantile_sorted(column, 0.10);
    truth.x_hi(j) = stats::quantile_sorted(column, 0.90);
    // Nodes outside the outcome equation have an exactly zero contrast.
    if (spec.outcome_weights(j) != 0.0) {
      const auto r = oracle_delta(spec, static_cast<std::size_t>(j), truth.x_lo(j), truth.x_hi(j), kGroundTruthDraws);
      truth.true_delta(j) = r.delta;
      truth.true_delta_se(j) = r.se;
    }
  }
  return {std::move(ds), std::move(truth)};
}

OracleResult oracle_delta(const ScmSpec& spec, std::size_t node_id, double x_lo, double x_hi,
                          std::size_t n_mc) {
  spec.validate();
  if (node_id >= spec.p) throw DataError("oracle_delta: node out of range");
  if (n_mc < kMinOracleDraws) throw DataError("oracle_delta: need at least 10^4 Monte Carlo draws");
  const auto p = static_cast<Eigen::Index>(spec.p);
  const auto j = static_cast<Eigen::Index>(node_id);
  const Matrix smoothing = normalize_adjacency(spec.adjacency);
  Rng rng(derive_seed(spec.seed, 0x0ac1e000 + node_id));
  std::normal_distribution<double> normal;
  Vector eps(p);
  RowVector eta(p);
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t s = 0; s < n_mc; ++s) {
    const RowVector c = draw_covariates(rng);
    for (Eigen::Index k = 0; k < p; ++k) eps(k) = normal(rng);
    for (Eigen::Index k = 0; k < p; ++k) eta(k) = normal(rng);
    RowVector x = c * spec.confounder_loadings + (smoothing * eps).transpose() + spec.noise_sd * eta;
    x(j) = x_hi;
    const double p_hi = scm_class_probs(spec, x, c)(kClassAD);
    x(j) = x_lo;
    const double p_lo = scm_class_probs(spec, x, c)(kClassAD);
    const double d = p_hi - p_lo;
    sum += d;
    sum_sq += d * d;
  }
  const double m = static_cast<double>(n_mc);
  OracleResult r;
  r.delta = sum / m;
  const double var = std::max(0.0, (sum_sq - m * r.delta * r.delta) / (m - 1.0));
  r.se = std::sqrt(var / m);
  return r;
}

namespace {

nlohmann::json matrix_to_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const nlohmann::json& j, const char* key) {
  if (!j.is_array()) throw DataError(std::string("scm: ") + key + " must be a 2-d array");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows ? static_cast<Eigen::Index>(j[0].size()) : 0;
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    if (!j[r].is_array() || static_cast<Eigen::Index>(j[r].size()) != cols) {
      throw DataError(std::string("scm: ragged array in ") + key);
    }
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

Vector vector_from_json(const nlohmann::json& j, const char* key) {
  if (!j.is_array()) throw DataError(std::string("scm: ") + key + " must be an array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = j[i].get<double>();
  return v;
}

}  // namespace

nlohmann::json scm_to_json(const ScmSpec& spec) {
  nlohmann::json j;
  j["p"] = spec.p;
  j["seed"] = spec.seed;
  j["noise_sd"] = spec.noise_sd;
  j["covariate_names"] = kScmCovariateNames;
  j["adjacency"] = matrix_to_json(spec.adjacency);
  j["confounder_loadings"] = matrix_to_json(spec.confounder_loadings);
  j["causal_nodes"] = spec.causal_nodes;
  j["outcome_weights"] = std::vector<double>(spec.outcome_weights.data(), spec.outcome_weights.data() + spec.outcome_weights.size());
  j["confounder_outcome_weights"] =
      std::vector<double>(spec.confounder_outcome_weights.data(),
                          spec.confounder_outcome_weights.data() + spec.confounder_outcome_weights.size());
  return j;
}

ScmSpec scm_from_json(const nlohmann::json& j) {
  static const std::vector<std::string> known = {"p", "seed", "noise_sd", "covariate_names", "adjacency",
                                                 "confounder_loadings", "causal_nodes", "outcome_weights",
                                                 "confounder_outcome_weights"};
  if (!j.is_object()) throw DataError("scm config must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw DataError("scm config: unknown key '" + key + "'");
    }
  }
  try {
    ScmSpec spec;
    spec.p = j.at("p").get<std::size_t>();
    spec.seed = j.value("seed", std::uint64_t{0});
    spec.noise_sd = j.value("noise_sd", 0.5);
    spec.adjacency = matrix_from_json(j.at("adjacency"), "adjacency");
    spec.confounder_loadings = matrix_from_json(j.at("confounder_loadings"), "confounder_loadings");
    spec.causal_nodes = j.value("causal_nodes", std::vector<int>{});
    spec.outcome_weights = vector_from_json(j.at("outcome_weights"), "outcome_weights");
    spec.confounder_outcome_weights = vector_from_json(j.at("confounder_outcome_weights"), "confounder_outcome_weights");
    spec.validate();
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("scm config: ") + e.what());
  }
}

}  // namespace causal_gcn
