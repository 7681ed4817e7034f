#include <gtest/gtest.h>

#include "causal_gcn/graph_data.hpp"
#include "causal_gcn/stats.hpp"
#include "causal_gcn/synth_scm.hpp"
#include "test_util.hpp"

using namespace causal_gcn;

namespace {

double corr_with_ad(const CohortDataset& ds, Eigen::Index j) {
  std::vector<double> x(ds.features.col(j).data(), ds.features.col(j).data() + ds.features.rows());
  std::vector<double> y;
  for (int label : ds.labels) y.push_back(label == kClassAD ? 1.0 : 0.0);
  return stats::pearson(x, y);
}

ScmSpec line_spec(std::size_t p) {
  ScmSpec s;
  s.p = p;
  s.adjacency = Matrix::Zero(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
  for (std::size_t i = 0; i + 1 < p; ++i) s.adjacency(i, i + 1) = s.adjacency(i + 1, i) = 1.0;
  s.confounder_loadings = Matrix::Zero(3, static_cast<Eigen::Index>(p));
  s.outcome_weights = Vector::Zero(static_cast<Eigen::Index>(p));
  s.confounder_outcome_weights = Vector::Zero(3);
  s.seed = 17;
  return s;
}

// E[e^a / (1 + e^{a/2} + e^a)] for a ~ N(mu, s^2), by composite Simpson
// over mu +/- 12 s.
double logit_normal_ad(double mu, double s) {
  const int n = 20000;
  const double lo = mu - 12.0 * s, h = 24.0 * s / n;
  double total = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double a = lo + i * h;
    const double z = (a - mu) / s;
    const double density = std::exp(-0.5 * z * z) / (s * std::sqrt(2.0 * M_PI));
    const double prob = 1.0 / (std::exp(-a) + std::exp(-0.5 * a) + 1.0);
    const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    total += w * prob * density;
  }
  return total * h / 3.0;
}

}  // namespace

TEST(GenerateCohort, NullModelLabelsIndependentOfFeatures) {
  ScmSpec spec = null_preset(8, 3);
  spec.confounder_outcome_weights.setZero();
  const auto small = generate_cohort(spec, 500).first;
  const auto large = generate_cohort(spec, 20000).first;
  double max_small = 0.0, max_large = 0.0;
  for (Eigen::Index j = 0; j < 8; ++j) {
    max_small = std::max(max_small, std::abs(corr_with_ad(small, j)));
    max_large = std::max(max_large, std::abs(corr_with_ad(large, j)));
  }
  // 4 / sqrt(n) bounds a null correlation with overwhelming probability.
  EXPECT_LT(max_large, 4.0 / std::sqrt(20000.0));
  EXPECT_LT(max_small, 4.0 / std::sqrt(500.0));
}

TEST(GenerateCohort, SingleCauseWithoutLoadingsOnlyCausePredicts) {
  ScmSpec spec = single_cause_preset(8, 4);
  spec.confounder_loadings.setZero();
  spec.confounder_outcome_weights.setZero();
  spec.adjacency.setZero();  // no shared latent between nodes
  const auto ds = generate_cohort(spec, 20000).first;
  const int cause = spec.causal_nodes.front();
  EXPECT_GT(corr_with_ad(ds, cause), 0.2);
  for (Eigen::Index j = 0; j < 8; ++j) {
    if (j == cause) continue;
    EXPECT_LT(std::abs(corr_with_ad(ds, j)), 4.0 / std::sqrt(20000.0)) << j;
  }
}

TEST(GenerateCohort, DeterministicFiles) {
  const ScmSpec spec = single_cause_preset(6, 5);
  test_util::TempDir a("scm_a"), b("scm_b");
  write_cohort(generate_cohort(spec, 300).first, a.path());
  write_cohort(generate_cohort(spec, 300).first, b.path());
  for (const char* name : {"features.csv", "covariates.csv", "labels.csv", "adjacency.csv"}) {
    EXPECT_EQ(test_util::read_text(a / name), test_util::read_text(b / name)) << name;
  }
}

TEST(GenerateCohort, CovariateDistributions) {
  const auto ds = generate_cohort(null_preset(6, 6), 40000).first;
  EXPECT_NEAR(ds.covariates.col(0).mean(), 0.0, 0.03);
  int male = 0, carrier = 0;
  for (Eigen::Index i = 0; i < ds.covariates.rows(); ++i) {
    ASSERT_TRUE(std::abs(ds.covariates(i, 1)) == 1.0 && std::abs(ds.covariates(i, 2)) == 1.0);
    male += ds.covariates(i, 1) > 0;
    carrier += ds.covariates(i, 2) > 0;
  }
  EXPECT_NEAR(male / 40000.0, 0.5, 0.015);
  EXPECT_NEAR(carrier / 40000.0, 0.3, 0.015);
}

TEST(GroundTruth, ZeroForNodesOutsideOutcome) {
  const ScmSpec spec = single_cause_preset(10, 7);
  const auto truth = generate_cohort(spec, 2000).second;
  for (Eigen::Index j = 0; j < 10; ++j) {
    if (j == spec.causal_nodes.front()) {
      EXPECT_GT(truth.true_delta(j), 0.05);
    } else {
      EXPECT_EQ(truth.true_delta(j), 0.0);
    }
  }
}

TEST(OracleDelta, NonCausalNodeIsZeroWithinThreeSe) {
  const ScmSpec spec = single_cause_preset(8, 8);
  for (std::size_t j = 0; j < 8; ++j) {
    if (static_cast<int>(j) == spec.causal_nodes.front()) continue;
    const auto r = oracle_delta(spec, j, -1.0, 1.0, kMinOracleDraws);
    EXPECT_LE(std::abs(r.delta), 3.0 * r.se + 1e-15) << j;
  }
}

TEST(OracleDelta, PositiveWeightGivesPositiveEffect) {
  const ScmSpec spec = single_cause_preset(8, 9);
  const auto r = oracle_delta(spec, static_cast<std::size_t>(spec.causal_nodes.front()), -1.0, 1.0, kMinOracleDraws);
  EXPECT_GT(r.delta, 0.0);
  EXPECT_GT(r.se, 0.0);
}

TEST(OracleDelta, AntisymmetricUnderLevelSwap) {
  const ScmSpec spec = single_cause_preset(8, 10);
  const auto j = static_cast<std::size_t>(spec.causal_nodes.front());
  const auto fwd = oracle_delta(spec, j, -0.7, 1.1, kMinOracleDraws);
  const auto rev = oracle_delta(spec, j, 1.1, -0.7, kMinOracleDraws);
  EXPECT_NEAR(fwd.delta, -rev.delta, 3.0 * (fwd.se + rev.se));
}

TEST(OracleDelta, RequiresEnoughDraws) {
  EXPECT_THROW(oracle_delta(single_cause_preset(6, 1), 0, -1.0, 1.0, 9999), DataError);
}

TEST(OracleDelta, MatchesLogitNormalQuadrature) {
  // Linear-Gaussian setup: only the Gaussian covariate (age) acts, so the AD
  // logit under do(X_j = x) is normal with closed-form moments.
  ScmSpec spec = line_spec(6);
  spec.confounder_loadings(0, 1) = 0.8;
  spec.confounder_loadings(0, 3) = -0.4;
  spec.causal_nodes = {0, 3, 4};
  spec.outcome_weights(0) = 1.0;
  spec.outcome_weights(3) = 0.6;
  spec.outcome_weights(4) = -0.5;
  spec.confounder_outcome_weights(0) = 0.7;
  const std::size_t j = 0;
  const double x_lo = -1.2, x_hi = 1.3;

  const Matrix smoothing = normalize_adjacency(spec.adjacency);
  Vector w_rest = spec.outcome_weights;
  w_rest(j) = 0.0;
  const double age_coef = spec.confounder_loadings.row(0).dot(w_rest.transpose()) + spec.confounder_outcome_weights(0);
  const double var = age_coef * age_coef + (smoothing.transpose() * w_rest).squaredNorm() +
                     spec.noise_sd * spec.noise_sd * w_rest.squaredNorm();
  const double s = std::sqrt(var);
  const double expected = logit_normal_ad(spec.outcome_weights(j) * x_hi, s) -
                          logit_normal_ad(spec.outcome_weights(j) * x_lo, s);
  const auto r = oracle_delta(spec, j, x_lo, x_hi, 100000);
  EXPECT_NEAR(r.delta, expected, 1e-2);
}

TEST(ConfoundingRealism, MarginalCorrelationWithoutCausalEffect) {
  const ScmSpec spec = single_cause_preset(10, 11);
  const auto ds = generate_cohort(spec, 5000).first;
  int confounded = 0;
  for (Eigen::Index j = 0; j < 10; ++j) {
    if (spec.confounder_loadings(0, j) == 0.0) continue;
    ++confounded;
    EXPECT_GT(std::abs(corr_with_ad(ds, j)), 0.1) << j;
    const auto r = oracle_delta(spec, static_cast<std::size_t>(j), -1.0, 1.0, kMinOracleDraws);
    EXPECT_LE(std::abs(r.delta), 3.0 * r.se + 1e-15);
  }
  EXPECT_EQ(confounded, 4);
}

TEST(ScmJson, RoundTripAndUnknownKey) {
  const ScmSpec spec = single_cause_preset(7, 12);
  const ScmSpec back = scm_from_json(scm_to_json(spec));
  EXPECT_EQ(back.p, spec.p);
  EXPECT_EQ(back.adjacency, spec.adjacency);
  EXPECT_EQ(back.confounder_loadings, spec.confounder_loadings);
  EXPECT_EQ(back.outcome_weights, spec.outcome_weights);
  EXPECT_EQ(back.causal_nodes, spec.causal_nodes);
  auto j = scm_to_json(spec);
  j["bogus"] = 1;
  EXPECT_THROW(scm_from_json(j), DataError);
}

TEST(ScmSpecValidate, WeightOutsideCausalNodesRejected) {
  ScmSpec spec = line_spec(6);
  spec.outcome_weights(2) = 0.5;
  EXPECT_THROW(spec.validate(), DataError);
  spec.causal_nodes = {2};
  EXPECT_NO_THROW(spec.validate());
  spec.noise_sd = 0.0;
  EXPECT_THROW(spec.validate(), DataError);
}
