#include "causal_gcn/inference.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "causal_gcn/checkpoint.hpp"
#include "causal_gcn/csv.hpp"
#include "causal_gcn/mlp_baseline.hpp"
#include "causal_gcn/stats.hpp"

namespace causal_gcn {

using nlohmann::json;

std::string to_string(Conditioning conditioning) {
  return conditioning == Conditioning::kImplicit ? "implicit" : "explicit";
}

Conditioning conditioning_from_string(const std::string& name) {
  if (name == "implicit") return Conditioning::kImplicit;
  if (name == "explicit") return Conditioning::kExplicit;
  throw DataError("conditioning must be implicit or explicit, got '" + name + "'");
}

void PipelineConfig::validate() const {
  train.validate();
  if (k_folds < 2) throw DataError("k_folds must be at least 2");
  if (n_pcs < 0) throw DataError("n_pcs must be nonnegative");
  if (conditioning == Conditioning::kExplicit && n_pcs < 1) {
    throw DataError("explicit conditioning needs at least one principal component");
  }
  if (!(pct_lo >= 0.0 && pct_lo < pct_hi && pct_hi <= 100.0)) {
    throw DataError("percentiles must satisfy 0 <= pct_lo < pct_hi <= 100");
  }
  if (bootstrap < 2) throw DataError("bootstrap replicate count must be at least 2");
  if (!(alpha > 0.0 && alpha < 1.0)) throw DataError("alpha must lie in (0, 1)");
  if (threads < 1) throw DataError("threads must be at least 1");
}

json pipeline_config_to_json(const PipelineConfig& c) {
  return {{"k_folds", c.k_folds},
          {"seed", c.seed},
          {"train", config_to_json(c.train)},
          {"n_pcs", c.n_pcs},
          {"pct_lo", c.pct_lo},
          {"pct_hi", c.pct_hi},
          {"bootstrap", c.bootstrap},
          {"alpha", c.alpha},
          {"conditioning", to_string(c.conditioning)},
          {"renormalize_after_sever", c.renormalize_after_sever},
          {"strict", c.strict},
          {"baselines", c.baselines}};
}

// ---- AUC -----------------------------------------------------------------

double binary_auc(std::span<const double> scores, const std::vector<bool>& positive) {
  if (scores.size() != positive.size()) throw DataError("AUC: scores and labels differ in length");
  const auto ranks = stats::average_ranks(scores);
  double rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (positive[i]) {
      rank_sum += ranks[i];
      ++n_pos;
    }
  }
  const std::size_t n_neg = scores.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) throw DataError("AUC needs at least one positive and one negative");
  const double np = static_cast<double>(n_pos);
  return (rank_sum - np * (np + 1.0) / 2.0) / (np * static_cast<double>(n_neg));
}

double macro_auc(const std::vector<int>& labels, const Matrix& scores, std::vector<int>* skipped) {
  if (static_cast<Eigen::Index>(labels.size()) != scores.rows() || scores.cols() != kNumClasses) {
    throw DataError("AUC: score matrix must be N x 3");
  }
  double total = 0.0;
  int used = 0;
  for (int c = 0; c < kNumClasses; ++c) {
    std::vector<bool> positive(labels.size());
    std::size_t n_pos = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      positive[i] = labels[i] == c;
      n_pos += positive[i];
    }
    if (n_pos == 0 || n_pos == labels.size()) {
      if (skipped) skipped->push_back(c);
      continue;
    }
    std::vector<double> col(scores.col(c).data(), scores.col(c).data() + scores.rows());
    total += binary_auc(col, positive);
    ++used;
  }
  if (used == 0) throw DataError("AUC undefined: no class has both positives and negatives");
  return total / used;
}

// ---- Bootstrap -----------------------------------------------------------

BootstrapSummary summarize_bootstrap(std::span<const double> replicates, double alpha) {
  if (replicates.size() < 2) throw DataError("bootstrap needs at least two replicates");
  if (!(alpha > 0.0 && alpha < 1.0)) throw DataError("alpha must lie in (0, 1)");
  BootstrapSummary s;
  s.mean = stats::mean(replicates);
  s.variance = stats::sample_variance(replicates);
  std::vector<double> sorted(replicates.begin(), replicates.end());
  std::sort(sorted.begin(), sorted.end());
  s.ci_lo = stats::quantile_sorted(sorted, alpha / 2.0);
  s.ci_hi = stats::quantile_sorted(sorted, 1.0 - alpha / 2.0);
  return s;
}

Resampler uniform_resampler(std::uint64_t seed) {
  return [seed](std::size_t fold, int replicate, std::size_t n) {
    Rng rng(derive_seed(derive_seed(seed, static_cast<std::uint64_t>(replicate)), fold));
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    IndexList idx(n);
    for (auto& i : idx) i = pick(rng);
    return idx;
  };
}

BootstrapReplicates bootstrap_replicates(const std::vector<FoldContrasts>& folds, int replicates,
                                         const Resampler& resampler) {
  if (replicates < 2) throw DataError("bootstrap needs at least two replicates");
  if (folds.empty()) throw DataError("bootstrap needs at least one fold");
  const std::size_t p = folds.front().nodes.size();
  BootstrapReplicates out(p);
  for (auto& node : out)
    for (auto& cls : node) cls.assign(static_cast<std::size_t>(replicates), 0.0);
  const double inv_folds = 1.0 / static_cast<double>(folds.size());
  for (int b = 0; b < replicates; ++b) {
    for (std::size_t f = 0; f < folds.size(); ++f) {
      const std::size_t n = folds[f].subjects();
      if (folds[f].nodes.size() != p) throw DataError("folds disagree on node count");
      const IndexList idx = resampler(f, b, n);
      const double inv_n = 1.0 / static_cast<double>(idx.size());
      for (std::size_t j = 0; j < p; ++j) {
        const auto& nc = folds[f].nodes[j];
        Eigen::RowVector3d hi = Eigen::RowVector3d::Zero(), lo = Eigen::RowVector3d::Zero();
        for (auto i : idx) {
          hi += nc.hi.row(static_cast<Eigen::Index>(i));
          lo += nc.lo.row(static_cast<Eigen::Index>(i));
        }
        const Eigen::RowVector3d d = hi * inv_n - lo * inv_n;
        for (int c = 0; c < kNumClasses; ++c) out[j][c][static_cast<std::size_t>(b)] += d(c) * inv_folds;
      }
    }
  }
  return out;
}

std::vector<std::array<BootstrapSummary, kNumClasses>> bootstrap_effects(const std::vector<FoldContrasts>& folds,
                                                                         int replicates, double alpha,
                                                                         std::uint64_t seed) {
  const auto reps = bootstrap_replicates(folds, replicates, uniform_resampler(seed));
  std::vector<std::array<BootstrapSummary, kNumClasses>> out(reps.size());
  for (std::size_t j = 0; j < reps.size(); ++j)
    for (int c = 0; c < kNumClasses; ++c) out[j][c] = summarize_bootstrap(reps[j][c], alpha);
  return out;
}

// ---- Ranking -------------------------------------------------------------

std::vector<RankedNode> rank_effects(const std::vector<EffectEstimate>& estimates,
                                     const std::vector<std::string>& node_names,
                                     const std::vector<double>& delta_auc_self) {
  std::vector<RankedNode> out;
  for (const auto& e : estimates) {
    if (e.cls != kClassAD) continue;
    RankedNode r;
    r.node_id = e.node_id;
    r.node_name = e.node_id < node_names.size() ? node_names[e.node_id] : std::to_string(e.node_id);
    r.delta_ad = e.delta_mean;
    r.abs_delta_ad = std::abs(e.delta_mean);
    if (e.node_id < delta_auc_self.size()) r.delta_auc_self = delta_auc_self[e.node_id];
    out.push_back(std::move(r));
  }
  std::sort(out.begin(), out.end(), [](const RankedNode& a, const RankedNode& b) {
    if (a.abs_delta_ad != b.abs_delta_ad) return a.abs_delta_ad > b.abs_delta_ad;
    return a.node_id < b.node_id;
  });
  for (std::size_t i = 0; i < out.size(); ++i) out[i].rank = static_cast<int>(i + 1);
  return out;
}

std::string format_effect_percent(double abs_delta) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4f", 100.0 * abs_delta);
  return buf;
}

std::string format_delta_auc(double delta_auc) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", delta_auc);
  return buf;
}

std::string render_rank_table(const std::vector<RankedNode>& ranked, std::size_t top) {
  std::size_t width = 4;
  const std::size_t rows = std::min(top, ranked.size());
  for (std::size_t i = 0; i < rows; ++i) width = std::max(width, ranked[i].node_name.size());
  std::ostringstream out;
  char line[512];
  std::snprintf(line, sizeof(line), "%4s  %-*s  %14s  %14s\n", "rank", static_cast<int>(width), "node",
                "100x|delta_AD|", "delta_AUC_self");
  out << line;
  for (std::size_t i = 0; i < rows; ++i) {
    const auto& r = ranked[i];
    std::snprintf(line, sizeof(line), "%4d  %-*s  %14s  %14s\n", r.rank, static_cast<int>(width),
                  r.node_name.c_str(), format_effect_percent(r.abs_delta_ad).c_str(),
                  format_delta_auc(r.delta_auc_self).c_str());
    out << line;
  }
  return out.str();
}

// ---- Ablation ------------------------------------------------------------

double ablated_auc(const TrainedModel& model, const CohortDataset& standardized, const IndexList& eval_idx,
                   std::size_t node_id, SeverOptions options) {
  Matrix features = select_rows(standardized.features, eval_idx);
  features.col(static_cast<Eigen::Index>(node_id)).setZero();
  const Matrix probs = predict_batch(model.params, sever_node(standardized.adjacency, node_id, options), features,
                                     select_rows(standardized.covariates, eval_idx));
  std::vector<int> labels;
  for (auto i : eval_idx) labels.push_back(standardized.labels[i]);
  return macro_auc(labels, probs);
}

double ablation_delta_auc(const TrainedModel& model, const CohortDataset& standardized, const IndexList& eval_idx,
                          std::size_t node_id, SeverOptions options) {
  std::vector<int> labels;
  for (auto i : eval_idx) labels.push_back(standardized.labels[i]);
  const double base = macro_auc(labels, model.predict(select_rows(standardized.features, eval_idx),
                                                      select_rows(standardized.covariates, eval_idx)));
  return base - ablated_auc(model, standardized, eval_idx, node_id, options);
}

// ---- Pipeline ------------------------------------------------------------

int effective_components(int requested, std::size_t nodes, std::size_t fit_size) {
  const auto cap = std::min<std::size_t>(nodes > 0 ? nodes - 1 : 0, fit_size);
  return static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(std::max(requested, 0)), cap));
}

FoldContext prepare_fold(const CohortDataset& dataset, const FoldSplit& split, const PipelineConfig& config) {
  FoldContext ctx;
  ctx.split = split;
  auto [standardized, scaler] = standardize(dataset, split.train_idx);
  ctx.standardized = std::move(standardized);
  ctx.scaler = std::move(scaler);
  const int k = effective_components(config.n_pcs, dataset.num_nodes(), split.train_idx.size());
  if (k > 0) {
    for (std::size_t j = 0; j < dataset.num_nodes(); ++j) {
      ctx.bases.push_back(fit_basis(ctx.standardized.features, split.train_idx, j, k));
    }
  }
  return ctx;
}

namespace {

std::vector<int> labels_of(const CohortDataset& ds, const IndexList& idx) {
  std::vector<int> out;
  for (auto i : idx) out.push_back(ds.labels[i]);
  return out;
}

FoldResult run_fold(const CohortDataset& dataset, const FoldSplit& split, const PipelineConfig& config,
                    const ProgressFn& progress) {
  auto say = [&](const std::string& msg) {
    if (progress) progress("fold " + std::to_string(split.fold_id) + ": " + msg);
  };
  FoldContext ctx = prepare_fold(dataset, split, config);
  const auto& ds = ctx.standardized;
  const IndexList& eval = split.test_idx;
  const auto eval_labels = labels_of(ds, eval);
  const Matrix eval_features = select_rows(ds.features, eval);
  const Matrix eval_covariates = select_rows(ds.covariates, eval);

  TrainConfig tc = config.train;
  tc.seed = derive_seed(config.seed, 1000 + static_cast<std::uint64_t>(split.fold_id));

  FoldResult r;
  r.fold_id = split.fold_id;
  r.n_train = split.train_idx.size();
  r.n_val = split.val_idx.size();
  r.n_test = eval.size();

  say("training causal GCN");
  r.model = train(ds, split, tc);
  r.model.scaler = ctx.scaler;
  r.best_epoch = r.model.best_epoch;
  r.auc_model = macro_auc(eval_labels, r.model.predict(eval_features, eval_covariates));
  if (config.baselines) {
    say("training baselines");
    const auto mlp = train_mlp(ds, split, tc);
    r.auc_mlp = macro_auc(eval_labels, mlp.predict(eval_features, eval_covariates));
    const auto gcn = train_vanilla_gcn(ds, split, tc);
    r.auc_gcn = macro_auc(eval_labels, gcn.predict(eval_features, eval_covariates));
  }

  say("estimating interventional effects");
  const SeverOptions sever{config.renormalize_after_sever};
  for (std::size_t j = 0; j < ds.num_nodes(); ++j) {
    const auto col = eval_features.col(static_cast<Eigen::Index>(j));
    const auto levels = compute_levels(std::span<const double>(col.data(), static_cast<std::size_t>(col.size())), j,
                                       config.pct_lo, config.pct_hi);
    Contrast contrast;
    if (config.conditioning == Conditioning::kExplicit) {
      TrainConfig tcj = tc;
      tcj.seed = derive_seed(tc.seed, 7000 + j);
      auto model_j = train(ds, split, tcj, adjustment_inputs(ctx.bases[j], ds.features, ds.covariates));
      model_j.adjusted_node = static_cast<int>(j);
      contrast = intervention_contrast(model_j, ds, eval, j, levels, &ctx.bases[j], sever);
    } else {
      contrast = intervention_contrast(r.model, ds, eval, j, levels, nullptr, sever);
    }
    r.levels.push_back(levels);
    r.delta.push_back(contrast.delta);
    r.contrasts.nodes.push_back({std::move(contrast.hi.per_subject_probs), std::move(contrast.lo.per_subject_probs)});
    r.delta_auc_self.push_back(ablation_delta_auc(r.model, ds, eval, j, sever));
  }
  r.bases = std::move(ctx.bases);
  say("done (AUC " + std::to_string(r.auc_model) + ")");
  return r;
}

AucSummary summarize_auc(const std::vector<std::optional<double>>& values) {
  AucSummary s;
  s.per_fold = values;
  std::vector<double> present;
  for (const auto& v : values)
    if (v) present.push_back(*v);
  s.mean = present.empty() ? std::nan("") : stats::mean(present);
  s.sd = present.size() < 2 ? 0.0 : std::sqrt(stats::sample_variance(present));
  return s;
}

int sign_of(double v) { return (v > 0.0) - (v < 0.0); }

}  // namespace

RunReport run_pipeline(const CohortDataset& dataset, const PipelineConfig& config, const ProgressFn& progress) {
  config.validate();
  validate_cohort(dataset);
  const auto splits = stratified_kfold(dataset.labels, config.k_folds, config.seed);

  std::vector<FoldResult> results(splits.size());
  std::vector<std::exception_ptr> errors(splits.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t f = next++; f < splits.size(); f = next++) {
      try {
        results[f] = run_fold(dataset, splits[f], config, progress);
      } catch (...) {
        errors[f] = std::current_exception();
      }
    }
  };
  const auto n_threads = std::min<std::size_t>(static_cast<std::size_t>(config.threads), splits.size());
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }

  RunReport report;
  report.config = config;
  report.n_subjects = dataset.num_subjects();
  report.n_nodes = dataset.num_nodes();
  report.n_covariates = dataset.num_covariates();
  report.node_names = dataset.node_names;
  report.class_names = dataset.class_names;
  for (int y : dataset.labels) ++report.class_counts[y];
  if (config.n_pcs > static_cast<int>(dataset.num_nodes()) - 1) {
    report.warnings.push_back("n_pcs " + std::to_string(config.n_pcs) + " exceeds p - 1; using " +
                              std::to_string(dataset.num_nodes() - 1) + " components");
  }

  for (std::size_t f = 0; f < splits.size(); ++f) {
    if (!errors[f]) {
      report.folds.push_back(std::move(results[f]));
      continue;
    }
    std::string message;
    bool numeric = false;
    try {
      std::rethrow_exception(errors[f]);
    } catch (const NumericError& e) {
      message = e.what();
      numeric = true;
    } catch (const std::exception& e) {
      message = e.what();
    }
    message = "fold " + std::to_string(f) + " aborted: " + message;
    if (config.strict) {
      if (numeric) throw NumericError(message);
      throw DataError(message);
    }
    report.warnings.push_back(message);
    if (progress) progress("warning: " + message);
  }
  if (report.folds.empty()) throw DataError("every fold aborted");

  const std::size_t p = dataset.num_nodes();
  const double n_folds = static_cast<double>(report.folds.size());
  std::vector<std::optional<double>> auc_model, auc_mlp, auc_gcn;
  std::vector<FoldContrasts> contrasts;
  report.delta_auc_self.assign(p, 0.0);
  for (const auto& fold : report.folds) {
    auc_model.emplace_back(fold.auc_model);
    auc_mlp.push_back(fold.auc_mlp);
    auc_gcn.push_back(fold.auc_gcn);
    report.per_fold_delta.push_back(fold.delta);
    contrasts.push_back(fold.contrasts);
    for (std::size_t j = 0; j < p; ++j) report.delta_auc_self[j] += fold.delta_auc_self[j] / n_folds;
  }
  report.auc_model = summarize_auc(auc_model);
  report.auc_mlp = summarize_auc(auc_mlp);
  report.auc_gcn = summarize_auc(auc_gcn);

  if (progress) progress("bootstrap: " + std::to_string(config.bootstrap) + " replicates");
  const auto replicates =
      bootstrap_replicates(contrasts, config.bootstrap, uniform_resampler(derive_seed(config.seed, 0xb007)));

  std::vector<double> abs_ad(p);
  for (std::size_t j = 0; j < p; ++j) {
    Eigen::RowVector3d mean = Eigen::RowVector3d::Zero();
    for (const auto& fold : report.folds) mean += fold.delta[j];
    mean /= n_folds;
    abs_ad[j] = std::abs(mean(kClassAD));
    for (int c = 0; c < kNumClasses; ++c) {
      const auto summary = summarize_bootstrap(replicates[j][c], config.alpha);
      EffectEstimate e;
      e.node_id = j;
      e.cls = c;
      e.delta_mean = mean(c);
      e.boot_mean = summary.mean;
      e.boot_var = summary.variance;
      e.ci_lo = summary.ci_lo;
      e.ci_hi = summary.ci_hi;
      e.abs_delta_ad = abs_ad[j];
      report.effects.push_back(e);
    }
  }
  report.ranking = rank_effects(report.effects, report.node_names, report.delta_auc_self);
  for (const auto& r : report.ranking)
    for (int c = 0; c < kNumClasses; ++c) report.effects[r.node_id * kNumClasses + c].rank = r.rank;

  auto& conc = report.concordance;
  std::size_t agreeing = 0;
  for (std::size_t j = 0; j < p; ++j) {
    const int first = sign_of(report.folds.front().delta[j](kClassAD));
    bool agree = first != 0;
    for (const auto& fold : report.folds) agree = agree && sign_of(fold.delta[j](kClassAD)) == first;
    conc.sign_agreement.push_back(agree);
    agreeing += agree;
    const int point = sign_of(report.effects[j * kNumClasses + kClassAD].delta_mean);
    const auto& reps = replicates[j][kClassAD];
    const auto matching = std::count_if(reps.begin(), reps.end(), [&](double v) { return sign_of(v) == point; });
    conc.bootstrap_sign.push_back(static_cast<double>(matching) / static_cast<double>(reps.size()));
  }
  conc.fraction_sign_agreement = static_cast<double>(agreeing) / static_cast<double>(p);
  std::vector<double> pairwise;
  for (std::size_t a = 0; a < report.folds.size(); ++a) {
    for (std::size_t b = a + 1; b < report.folds.size(); ++b) {
      std::vector<double> va(p), vb(p);
      for (std::size_t j = 0; j < p; ++j) {
        va[j] = std::abs(report.folds[a].delta[j](kClassAD));
        vb[j] = std::abs(report.folds[b].delta[j](kClassAD));
      }
      pairwise.push_back(stats::spearman(va, vb));
    }
  }
  conc.rank_stability = pairwise.empty() ? 1.0 : stats::mean(pairwise);
  conc.effect_ablation_spearman = stats::spearman(abs_ad, report.delta_auc_self);
  return report;
}

namespace {

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json auc_json(const AucSummary& s) {
  json per_fold = json::array();
  for (const auto& v : s.per_fold) per_fold.push_back(optional_json(v));
  const bool any = std::any_of(s.per_fold.begin(), s.per_fold.end(), [](const auto& v) { return v.has_value(); });
  return {{"per_fold", per_fold}, {"mean", any ? json(s.mean) : json(nullptr)}, {"sd", any ? json(s.sd) : json(nullptr)}};
}

}  // namespace

json report_to_json(const RunReport& report) {
  json j;
  j["schema"] = kReportSchema;
  j["provenance"] = {{"config", pipeline_config_to_json(report.config)},
                     {"n_subjects", report.n_subjects},
                     {"n_nodes", report.n_nodes},
                     {"n_covariates", report.n_covariates},
                     {"class_names", report.class_names},
                     {"class_counts", report.class_counts},
                     {"fold_seeds_derived_from", report.config.seed}};
  json folds = json::array();
  for (const auto& f : report.folds) {
    json delta_ad = json::array();
    for (const auto& d : f.delta) delta_ad.push_back(d(kClassAD));
    folds.push_back({{"fold", f.fold_id},
                     {"n_train", f.n_train},
                     {"n_val", f.n_val},
                     {"n_test", f.n_test},
                     {"best_epoch", f.best_epoch},
                     {"auc_model", f.auc_model},
                     {"auc_mlp", optional_json(f.auc_mlp)},
                     {"auc_gcn", optional_json(f.auc_gcn)},
                     {"delta_ad", delta_ad}});
  }
  j["folds"] = std::move(folds);
  j["auc"] = {{"model", auc_json(report.auc_model)},
              {"mlp", auc_json(report.auc_mlp)},
              {"gcn", auc_json(report.auc_gcn)},
              {"reduction", "macro one-vs-rest"}};
  json effects = json::array();
  for (const auto& e : report.effects) {
    json per_fold = json::array();
    for (const auto& fold : report.per_fold_delta) per_fold.push_back(fold[e.node_id](e.cls));
    effects.push_back({{"node_id", e.node_id},
                       {"node_name", report.node_names[e.node_id]},
                       {"class", report.class_names[e.cls]},
                       {"delta_mean", e.delta_mean},
                       {"boot_mean", e.boot_mean},
                       {"boot_var", e.boot_var},
                       {"ci_lo", e.ci_lo},
                       {"ci_hi", e.ci_hi},
                       {"abs_delta_ad", e.abs_delta_ad},
                       {"rank", e.rank},
                       {"per_fold", per_fold}});
  }
  j["effects"] = std::move(effects);
  json ranking = json::array();
  for (const auto& r : report.ranking) {
    ranking.push_back({{"rank", r.rank},
                       {"node_id", r.node_id},
                       {"node_name", r.node_name},
                       {"delta_ad", r.delta_ad},
                       {"abs_delta_ad", r.abs_delta_ad},
                       {"delta_auc_self", r.delta_auc_self}});
  }
  j["ranking"] = std::move(ranking);
  json ablation = json::array();
  for (std::size_t n = 0; n < report.n_nodes; ++n) {
    json per_fold = json::array();
    for (const auto& f : report.folds) per_fold.push_back(f.delta_auc_self[n]);
    ablation.push_back({{"node_id", n},
                        {"node_name", report.node_names[n]},
                        {"delta_auc_self", report.delta_auc_self[n]},
                        {"per_fold", per_fold}});
  }
  j["ablation"] = std::move(ablation);
  const auto& c = report.concordance;
  j["concordance"] = {{"fold_sign_agreement", c.sign_agreement},
                      {"bootstrap_sign_agreement", c.bootstrap_sign},
                      {"fraction_sign_agreement", c.fraction_sign_agreement},
                      {"rank_stability_spearman", c.rank_stability},
                      {"effect_vs_ablation_spearman", c.effect_ablation_spearman}};
  j["bootstrap"] = {{"replicates", report.config.bootstrap},
                    {"alpha", report.config.alpha},
                    {"interval", "percentile"},
                    {"target",
                     "contrast of the trained models averaged over the evaluation subjects; "
                     "not the effect in the data-generating process"}};
  j["warnings"] = report.warnings;
  return j;
}

void write_run_outputs(const RunReport& report, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "adjustment");
  fs::create_directories(dir / "models");
  {
    std::ofstream out(dir / "report.json", std::ios::binary);
    if (!out) throw DataError("cannot write report.json in " + dir.string());
    out << report_to_json(report).dump(2) << '\n';
  }
  using csv::format_number;
  csv::Table effects{{"node_id", "node_name", "class", "delta_mean", "ci_lo", "ci_hi", "abs_delta_ad", "rank"}, {}};
  for (const auto& e : report.effects) {
    effects.rows.push_back({std::to_string(e.node_id), report.node_names[e.node_id], report.class_names[e.cls],
                            format_number(e.delta_mean), format_number(e.ci_lo), format_number(e.ci_hi),
                            format_number(e.abs_delta_ad), std::to_string(e.rank)});
  }
  csv::write(dir / "effects.csv", effects);

  csv::Table raw{{"fold", "node_id", "class", "x_lo", "x_hi", "delta"}, {}};
  for (const auto& f : report.folds) {
    for (std::size_t n = 0; n < f.delta.size(); ++n) {
      for (int c = 0; c < kNumClasses; ++c) {
        raw.rows.push_back({std::to_string(f.fold_id), std::to_string(n), report.class_names[c],
                            format_number(f.levels[n].x_lo), format_number(f.levels[n].x_hi),
                            format_number(f.delta[n](c))});
      }
    }
  }
  csv::write(dir / "effects_raw.csv", raw);

  csv::Table ablation{{"node_id", "node_name", "delta_auc_self"}, {}};
  for (std::size_t n = 0; n < report.n_nodes; ++n) {
    ablation.rows.push_back({std::to_string(n), report.node_names[n], format_number(report.delta_auc_self[n])});
  }
  csv::write(dir / "ablation.csv", ablation);

  csv::Table folds{{"fold", "auc_model", "auc_mlp", "auc_gcn"}, {}};
  auto opt = [](const std::optional<double>& v) { return v ? format_number(*v) : std::string("NA"); };
  for (const auto& f : report.folds) {
    folds.rows.push_back({std::to_string(f.fold_id), format_number(f.auc_model), opt(f.auc_mlp), opt(f.auc_gcn)});
  }
  csv::write(dir / "folds.csv", folds);

  for (std::size_t n = 0; n < report.n_nodes; ++n) {
    json per_fold = json::array();
    for (const auto& f : report.folds) {
      if (n < f.bases.size()) {
        auto b = basis_to_json(f.bases[n]);
        b["fold"] = f.fold_id;
        per_fold.push_back(std::move(b));
      }
    }
    std::ofstream out(dir / "adjustment" / (std::to_string(n) + ".json"), std::ios::binary);
    out << json{{"node_id", n}, {"node_name", report.node_names[n]}, {"folds", per_fold}}.dump(1) << '\n';
  }
  for (const auto& f : report.folds) {
    save_checkpoint(f.model, dir / "models" / ("fold" + std::to_string(f.fold_id) + ".json"));
  }
}

}  // namespace causal_gcn
