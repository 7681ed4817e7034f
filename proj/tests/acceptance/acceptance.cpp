// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "auc_oracle.hpp"
#include "causal_gcn/backdoor.hpp"
#include "causal_gcn/inference.hpp"
#include "causal_gcn/stats.hpp"
#include "causal_gcn/synth_scm.hpp"
#include "gcn_reference.hpp"
#include "gradient_check.hpp"
#include "test_util.hpp"

using namespace causal_gcn;

namespace {

// Pinned tolerances and thresholds.
constexpr double kGradTol = 1e-4;
constexpr double kGradSeconds = 30.0;
constexpr double kForwardTol = 1e-12;
constexpr double kAucTol = 1e-12;
constexpr double kZeroSumTol = 1e-10;
constexpr double kNoOpTol = 1e-12;
constexpr int kSeeds = 10;
constexpr int kRequiredSeeds = 8;
constexpr int kMarginalRequired = 5;
constexpr double kRecoverySeconds = 600.0;
constexpr double kOracleMagnitude = 0.05;
constexpr double kConcordanceFloor = 0.3;
constexpr int kWidthRepetitions = 20;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

IndexList iota(std::size_t n) {
  IndexList idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  return idx;
}

std::vector<double> column(const Matrix& m, std::size_t j, const IndexList& rows) {
  std::vector<double> out;
  out.reserve(rows.size());
  for (auto i : rows) out.push_back(m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
  return out;
}

TrainConfig fast_train() {
  TrainConfig cfg;
  cfg.hidden = 16;
  cfg.learning_rate = 1e-2;
  cfg.dropout = 0.0;
  cfg.batch_size = 128;
  cfg.epochs = 60;
  return cfg;
}

PipelineConfig recovery_pipeline(std::uint64_t seed) {
  PipelineConfig c;
  c.k_folds = 5;
  c.seed = seed;
  c.train = fast_train();
  c.bootstrap = 200;
  c.baselines = false;
  c.threads = 1;
  return c;
}

// ---- 1 ----------------------------------------------------------------------

Outcome gradient_correctness() {
  const auto start = std::chrono::steady_clock::now();
  double worst = 0.0;
  int cases = 0;
  for (int p = 2; p <= 8; ++p) {
    for (int d : {4, 8}) {
      for (bool bn : {false, true}) {
        test_ref::GradientCheckCase tc;
        tc.p = p;
        tc.d = d;
        tc.per_node = (p + d) % 2 == 0 || bn;
        tc.batchnorm = bn;
        tc.seed = static_cast<std::uint64_t>(100 * p + 10 * d + bn);
        worst = std::max(worst, test_ref::max_gradient_error(tc));
        ++cases;
      }
    }
  }
  const double elapsed = seconds_since(start);
  return {cases >= 20 && worst < kGradTol && elapsed < kGradSeconds,
          fmt("%d configs, max rel err %.3g (tol %.0e), %.1f s", cases, worst, kGradTol, elapsed)};
}

// ---- 2 ----------------------------------------------------------------------

Outcome forward_equivalence() {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g;
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const int p = 2 + trial % 7;
    const int d = trial % 2 == 0 ? 4 : 8;
    const auto params = test_ref::random_params(p, 3, d, trial % 3 != 0, trial % 4 == 1, rng);
    const Matrix prop = normalize_adjacency(test_util::random_symmetric_adjacency(p, rng, 0.5));
    Matrix x(6, p), c(6, 3);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = g(rng);
    for (Eigen::Index i = 0; i < c.size(); ++i) c.data()[i] = g(rng);
    const Matrix probs = predict_batch(params, prop, x, c);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      std::vector<double> xs;
      for (int j = 0; j < p; ++j) xs.push_back(x(i, j));
      std::vector<double> cs = {c(i, 0), c(i, 1), c(i, 2)};
      const auto ref = test_ref::forward_eval(params, prop, xs, cs);
      for (int k = 0; k < 3; ++k) worst = std::max(worst, std::abs(probs(i, k) - ref[static_cast<std::size_t>(k)]));
    }
  }
  return {worst < kForwardTol, fmt("50 instances, max abs diff %.3g (tol %.0e)", worst, kForwardTol)};
}

// ---- 3 ----------------------------------------------------------------------

Outcome auc_equivalence() {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> cls(0, 2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> coarse(0, 4);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<int> labels(40);
    for (auto& y : labels) y = cls(rng);
    Matrix scores(40, 3);
    for (Eigen::Index i = 0; i < scores.size(); ++i) {
      scores.data()[i] = trial % 2 == 0 ? coarse(rng) / 4.0 : u(rng);
    }
    worst = std::max(worst, std::abs(macro_auc(labels, scores) - test_ref::pair_count_macro_auc(labels, scores)));
  }
  return {worst < kAucTol, fmt("100 fixtures x 40 samples, max abs diff %.3g (tol %.0e)", worst, kAucTol)};
}

// ---- 4 ----------------------------------------------------------------------

Outcome intervention_algebra() {
  ScmSpec spec = single_cause_preset(8, 4);
  auto [ds_raw, truth] = generate_cohort(spec, 600);
  const std::size_t isolated = 5;
  ds_raw.adjacency.row(isolated).setZero();
  ds_raw.adjacency.col(isolated).setZero();
  FoldSplit split;
  for (std::size_t i = 0; i < 600; ++i) (i % 5 == 0 ? split.test_idx : i % 5 == 1 ? split.val_idx : split.train_idx).push_back(i);
  const auto ds = standardize(ds_raw, split.train_idx).first;
  auto cfg = fast_train();
  cfg.epochs = 20;
  const auto model = train(ds, split, cfg);

  double worst_sum = 0.0;
  bool swap_exact = true;
  for (std::size_t j = 0; j < ds.num_nodes(); ++j) {
    auto levels = compute_levels(column(ds.features, j, split.test_idx), j);
    const Eigen::RowVector3d d = delta(model, ds, split.test_idx, j, levels);
    worst_sum = std::max(worst_sum, std::abs(d.sum()));
    std::swap(levels.x_lo, levels.x_hi);
    swap_exact = swap_exact && delta(model, ds, split.test_idx, j, levels) == -d;
  }

  const Matrix observed = model.predict(ds.features, ds.covariates);
  double worst_noop = 0.0;
  for (auto i : split.test_idx) {
    const auto row = static_cast<Eigen::Index>(i);
    const auto dist = do_forward(model, ds, {i}, isolated, ds.features(row, static_cast<Eigen::Index>(isolated)));
    worst_noop = std::max(worst_noop, (dist.per_subject_probs.row(0) - observed.row(row)).cwiseAbs().maxCoeff());
  }
  return {worst_sum < kZeroSumTol && swap_exact && worst_noop < kNoOpTol,
          fmt("max |sum delta| %.3g, swap exact %s, isolated no-op max diff %.3g", worst_sum,
              swap_exact ? "yes" : "no", worst_noop)};
}

// ---- 5, 6, 10 ---------------------------------------------------------------

struct SeedResult {
  bool cause_first = false;
  bool marginal_confounded_first = false;
  bool signs_agree = false;
  double concordance = 0.0;
  double seconds = 0.0;
};

SeedResult run_recovery_seed(std::uint64_t seed) {
  const auto start = std::chrono::steady_clock::now();
  const ScmSpec spec = single_cause_preset(10, seed);
  const auto [raw, truth] = generate_cohort(spec, 2000);
  const auto report = run_pipeline(raw, recovery_pipeline(seed));
  SeedResult r;
  const auto cause = static_cast<std::size_t>(spec.causal_nodes.front());
  r.cause_first = report.ranking.front().node_id == cause;

  std::vector<double> is_ad;
  for (int y : raw.labels) is_ad.push_back(y == kClassAD ? 1.0 : 0.0);
  std::size_t best = 0;
  double best_corr = -1.0;
  for (std::size_t j = 0; j < spec.p; ++j) {
    const double c = std::abs(stats::pearson(column(raw.features, j, iota(raw.num_subjects())), is_ad));
    if (c > best_corr) best_corr = c, best = j;
  }
  const bool confounded = spec.confounder_loadings.col(static_cast<Eigen::Index>(best)).cwiseAbs().maxCoeff() > 0.0;
  r.marginal_confounded_first = confounded && best != cause;

  r.signs_agree = true;
  for (const auto& e : report.effects) {
    if (e.cls != kClassAD) continue;
    const double oracle = truth.true_delta(static_cast<Eigen::Index>(e.node_id));
    if (std::abs(oracle) > kOracleMagnitude && (e.delta_mean > 0) != (oracle > 0)) r.signs_agree = false;
  }
  r.concordance = report.concordance.effect_ablation_spearman;
  r.seconds = seconds_since(start);
  return r;
}

struct RecoveryOutcomes {
  Outcome recovery, signs, concordance;
};

RecoveryOutcomes recovery_suite() {
  int cause_first = 0, marginal = 0, signs = 0, concordant = 0;
  double seconds = 0.0;
  std::string concordances;
  for (int s = 0; s < kSeeds; ++s) {
    const auto r = run_recovery_seed(static_cast<std::uint64_t>(s));
    cause_first += r.cause_first;
    marginal += r.marginal_confounded_first;
    signs += r.signs_agree;
    concordant += r.concordance > kConcordanceFloor;
    seconds += r.seconds;
    concordances += fmt("%s%.2f", s == 0 ? "" : " ", r.concordance);
  }
  RecoveryOutcomes out;
  out.recovery = {cause_first >= kRequiredSeeds && marginal >= kMarginalRequired && seconds < kRecoverySeconds,
                  fmt("cause ranked first %d/%d, marginal corr picks confounded node %d/%d, %.0f s", cause_first,
                      kSeeds, marginal, kSeeds, seconds)};
  out.signs = {signs >= kRequiredSeeds, fmt("signs agree for |oracle| > %.2f in %d/%d seeds", kOracleMagnitude, signs, kSeeds)};
  out.concordance = {concordant >= kRequiredSeeds,
                     fmt("Spearman > %.1f in %d/%d seeds [%s]", kConcordanceFloor, concordant, kSeeds, concordances.c_str())};
  return out;
}

// ---- 7 ----------------------------------------------------------------------

Outcome bootstrap_behavior() {
  const ScmSpec spec = single_cause_preset(6, 70);
  const auto [raw, truth] = generate_cohort(spec, 1500);
  FoldSplit split;
  for (std::size_t i = 0; i < 1500; ++i) (i % 5 == 0 ? split.val_idx : split.train_idx).push_back(i);
  const auto [ds, scaler] = standardize(raw, split.train_idx);
  const auto model = train(ds, split, fast_train());
  const auto cause = static_cast<std::size_t>(spec.causal_nodes.front());
  const auto levels = compute_levels(column(ds.features, cause, split.train_idx), cause);

  const std::vector<std::size_t> sizes = {200, 500, 1000, 2000};
  std::vector<double> mean_width(sizes.size(), 0.0);
  int pairwise_shrinks = 0;
  for (int r = 0; r < kWidthRepetitions; ++r) {
    std::vector<double> widths;
    for (std::size_t s = 0; s < sizes.size(); ++s) {
      ScmSpec eval_spec = spec;
      eval_spec.seed = derive_seed(7000 + static_cast<std::uint64_t>(r), s);
      const auto sample = scaler.apply(generate_cohort(eval_spec, sizes[s]).first);
      const auto contrast = intervention_contrast(model, sample, iota(sizes[s]), cause, levels);
      FoldContrasts fold;
      fold.nodes.push_back({contrast.hi.per_subject_probs, contrast.lo.per_subject_probs});
      const auto ci = bootstrap_effects({fold}, 200, 0.05, static_cast<std::uint64_t>(r))[0][kClassAD];
      widths.push_back(ci.ci_hi - ci.ci_lo);
      mean_width[s] += widths.back() / kWidthRepetitions;
    }
    pairwise_shrinks += widths.back() < widths.front();
  }
  bool monotone = true;
  for (std::size_t s = 1; s < sizes.size(); ++s) monotone = monotone && mean_width[s] < mean_width[s - 1];

  // Degenerate cases: every resample identical.
  const auto one = intervention_contrast(model, ds, {split.val_idx.front()}, cause, levels);
  bool zero_width = true;
  for (int b : {2, 50}) {
    FoldContrasts same;
    NodeContrast nc{Matrix::Constant(25, 3, 1.0 / 3.0), Matrix::Constant(25, 3, 1.0 / 3.0)};
    nc.hi.col(kClassAD).setConstant(0.6);
    nc.hi.col(0).setConstant(0.2);
    same.nodes.push_back(nc);
    FoldContrasts single;
    single.nodes.push_back({one.hi.per_subject_probs, one.lo.per_subject_probs});
    for (const auto& folds : {std::vector<FoldContrasts>{same}, std::vector<FoldContrasts>{single}}) {
      for (const auto& node : bootstrap_effects(folds, b, 0.05, 11)) {
        for (const auto& s : node) zero_width = zero_width && s.ci_hi - s.ci_lo == 0.0;
      }
    }
  }
  return {monotone && pairwise_shrinks >= kWidthRepetitions - 1 && zero_width,
          fmt("mean width N=200 %.4f, 500 %.4f, 1000 %.4f, 2000 %.4f; N=2000 narrower in %d/%d reps; "
              "degenerate widths zero %s",
              mean_width[0], mean_width[1], mean_width[2], mean_width[3], pairwise_shrinks, kWidthRepetitions,
              zero_width ? "yes" : "no")};
}

// ---- 8 ----------------------------------------------------------------------

Outcome determinism() {
  const auto raw = generate_cohort(single_cause_preset(8, 80), 400).first;
  auto config = recovery_pipeline(80);
  config.train.epochs = 20;
  config.bootstrap = 100;
  config.baselines = true;
  test_util::TempDir dir("acceptance_determinism");
  write_run_outputs(run_pipeline(raw, config), dir.path() / "a");
  config.threads = 2;
  write_run_outputs(run_pipeline(raw, config), dir.path() / "b");
  bool same = true;
  for (const char* name : {"report.json", "effects.csv"}) {
    same = same && test_util::read_text(dir.path() / "a" / name) == test_util::read_text(dir.path() / "b" / name);
  }
  return {same, fmt("report.json and effects.csv byte-identical across runs: %s", same ? "yes" : "no")};
}

// ---- 9 ----------------------------------------------------------------------

Outcome leakage_canary() {
  const auto raw = generate_cohort(single_cause_preset(8, 90), 300).first;
  const auto split = stratified_kfold(raw.labels, 5, 90).front();
  IndexList leaked = split.train_idx;
  leaked.push_back(split.test_idx.front());

  const auto clean_scaler = fit_scaler(raw, split.train_idx);
  const auto leaky_scaler = fit_scaler(raw, leaked);
  const double scaler_shift = std::max((clean_scaler.feature_mean - leaky_scaler.feature_mean).cwiseAbs().maxCoeff(),
                                       (clean_scaler.feature_sd - leaky_scaler.feature_sd).cwiseAbs().maxCoeff());

  PipelineConfig config;
  const auto ctx = prepare_fold(raw, split, config);
  const auto standardized = clean_scaler.apply(raw);
  const int k = effective_components(config.n_pcs, raw.num_nodes(), split.train_idx.size());
  const auto clean_basis = fit_basis(standardized.features, split.train_idx, 0, k);
  const auto leaky_basis = fit_basis(standardized.features, leaked, 0, k);
  const double basis_shift = std::max((clean_basis.mean_vector - leaky_basis.mean_vector).cwiseAbs().maxCoeff(),
                                      (clean_basis.eigenvalues - leaky_basis.eigenvalues).cwiseAbs().maxCoeff());
  // The pipeline's own fold state must be the train-only fit.
  const bool pipeline_clean = ctx.bases.front().mean_vector == clean_basis.mean_vector &&
                              ctx.bases.front().eigenvalues == clean_basis.eigenvalues &&
                              ctx.scaler.feature_mean == clean_scaler.feature_mean;
  return {scaler_shift > 0.0 && basis_shift > 0.0 && pipeline_clean,
          fmt("leaked subject shifts scaler by %.3g and basis by %.3g; pipeline fold state is train-only: %s",
              scaler_shift, basis_shift, pipeline_clean ? "yes" : "no")};
}

}  // namespace

int main() {
  int failures = 0;
  auto guarded = [](const std::function<Outcome()>& fn) -> Outcome {
    try {
      return fn();
    } catch (const std::exception& e) {
      return {false, std::string("threw: ") + e.what()};
    }
  };
  auto report = [&](int id, const char* name, const Outcome& o) {
    std::printf("%s [%d] %s: %s\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str());
    std::fflush(stdout);
    failures += !o.pass;
  };
  report(1, "gradient correctness", guarded(gradient_correctness));
  report(2, "forward oracle equivalence", guarded(forward_equivalence));
  report(3, "AUC oracle equivalence", guarded(auc_equivalence));
  report(4, "intervention algebra", guarded(intervention_algebra));
  RecoveryOutcomes recovery;
  try {
    recovery = recovery_suite();
  } catch (const std::exception& e) {
    recovery.recovery = recovery.signs = recovery.concordance = {false, std::string("threw: ") + e.what()};
  }
  report(5, "confounded-null recovery", recovery.recovery);
  report(6, "oracle sign agreement", recovery.signs);
  report(7, "bootstrap behavior", guarded(bootstrap_behavior));
  report(8, "determinism", guarded(determinism));
  report(9, "leakage canary", guarded(leakage_canary));
  report(10, "concordance reporting", recovery.concordance);
  std::printf("%d/10 criteria passed\n", 10 - failures);
  return failures == 0 ? 0 : 1;
}
