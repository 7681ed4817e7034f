#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "causal_gcn/backdoor.hpp"
#include "causal_gcn/gcn_model.hpp"
#include "causal_gcn/graph_data.hpp"
#include "causal_gcn/intervention.hpp"

namespace causal_gcn {

inline constexpr const char* kReportSchema = "causal-gcn-report/1";

enum class Conditioning { kImplicit, kExplicit };

std::string to_string(Conditioning conditioning);
Conditioning conditioning_from_string(const std::string& name);

struct PipelineConfig {
  int k_folds = 5;
  std::uint64_t seed = 0;
  TrainConfig train;
  int n_pcs = kDefaultComponents;
  double pct_lo = 10.0;
  double pct_hi = 90.0;
  int bootstrap = 200;
  double alpha = 0.05;
  Conditioning conditioning = Conditioning::kImplicit;
  bool renormalize_after_sever = true;
  bool strict = true;
  bool baselines = true;
  int threads = 1;

  void validate() const;
};

nlohmann::json pipeline_config_to_json(const PipelineConfig& config);

// ---- AUC -----------------------------------------------------------------

// Mann-Whitney estimate: P(score_pos > score_neg) + 0.5 P(tie).
double binary_auc(std::span<const double> scores, const std::vector<bool>& positive);

// Macro one-vs-rest AUC over the classes that have both positives and
// negatives; skipped classes are reported through `skipped`.
double macro_auc(const std::vector<int>& labels, const Matrix& scores, std::vector<int>* skipped = nullptr);

// ---- Bootstrap -----------------------------------------------------------

struct BootstrapSummary {
  double mean = 0.0;
  double variance = 0.0;  // denominator B - 1
  double ci_lo = 0.0;
  double ci_hi = 0.0;
};

BootstrapSummary summarize_bootstrap(std::span<const double> replicates, double alpha);

// Per-subject interventional probabilities of one node on one fold.
struct NodeContrast {
  Matrix hi;  // N_eval x 3
  Matrix lo;
};

struct FoldContrasts {
  std::vector<NodeContrast> nodes;
  std::size_t subjects() const { return nodes.empty() ? 0 : static_cast<std::size_t>(nodes.front().hi.rows()); }
};

// resampler(fold, replicate, n) returns n row indices in [0, n).
using Resampler = std::function<IndexList(std::size_t, int, std::size_t)>;

Resampler uniform_resampler(std::uint64_t seed);

// replicates[node][class][b]: the fold-averaged contrast recomputed on
// subject resamples of every fold with the model held fixed.
using BootstrapReplicates = std::vector<std::array<std::vector<double>, kNumClasses>>;

BootstrapReplicates bootstrap_replicates(const std::vector<FoldContrasts>& folds, int replicates,
                                         const Resampler& resampler);

std::vector<std::array<BootstrapSummary, kNumClasses>> bootstrap_effects(const std::vector<FoldContrasts>& folds,
                                                                         int replicates, double alpha,
                                                                         std::uint64_t seed);

// ---- Ranking -------------------------------------------------------------

struct EffectEstimate {
  std::size_t node_id = 0;
  int cls = 0;
  double delta_mean = 0.0;
  double boot_mean = 0.0;
  double boot_var = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  double abs_delta_ad = 0.0;
  int rank = 0;
};

struct RankedNode {
  int rank = 0;
  std::size_t node_id = 0;
  std::string node_name;
  double delta_ad = 0.0;
  double abs_delta_ad = 0.0;
  double delta_auc_self = 0.0;
};

// Orders nodes by |delta_ad| descending, lower node_id first on ties, and
// assigns ranks 1..p. Only class-AD estimates are consulted.
std::vector<RankedNode> rank_effects(const std::vector<EffectEstimate>& estimates,
                                     const std::vector<std::string>& node_names = {},
                                     const std::vector<double>& delta_auc_self = {});

// 100 * |delta| with four decimals, e.g. 0.001691 -> "0.1691".
std::string format_effect_percent(double abs_delta);
std::string format_delta_auc(double delta_auc);

// Top-N table mirroring the layout: rank, node, 100x|delta_AD|, delta_AUC_self.
std::string render_rank_table(const std::vector<RankedNode>& ranked, std::size_t top);

// ---- Ablation ------------------------------------------------------------

// AUC on `eval_idx` after zeroing node j's feature and severing its edges.
double ablated_auc(const TrainedModel& model, const CohortDataset& standardized, const IndexList& eval_idx,
                   std::size_t node_id, SeverOptions options = {});

// Baseline AUC minus ablated AUC for one model and evaluation set.
double ablation_delta_auc(const TrainedModel& model, const CohortDataset& standardized, const IndexList& eval_idx,
                          std::size_t node_id, SeverOptions options = {});

// ---- Pipeline ------------------------------------------------------------

// min(requested, p - 1, fit_size): the component count actually fitted.
int effective_components(int requested, std::size_t nodes, std::size_t fit_size);

// Per-fold state fitted on the training subjects only.
struct FoldContext {
  FoldSplit split;
  ScalerState scaler;
  CohortDataset standardized;
  std::vector<AdjustmentBasis> bases;  // empty when n_pcs == 0
};

FoldContext prepare_fold(const CohortDataset& dataset, const FoldSplit& split, const PipelineConfig& config);

struct FoldResult {
  int fold_id = 0;
  std::size_t n_train = 0, n_val = 0, n_test = 0;
  double auc_model = 0.0;
  std::optional<double> auc_mlp;
  std::optional<double> auc_gcn;
  int best_epoch = -1;
  std::vector<InterventionLevels> levels;
  std::vector<Eigen::RowVector3d> delta;  // per node
  std::vector<double> delta_auc_self;     // per node
  FoldContrasts contrasts;
  std::vector<AdjustmentBasis> bases;
  TrainedModel model;
  std::string error;  // nonempty when the fold aborted
};

struct AucSummary {
  std::vector<std::optional<double>> per_fold;
  double mean = 0.0;
  double sd = 0.0;  // denominator n - 1
};

struct Concordance {
  std::vector<bool> sign_agreement;     // per node: all folds share the sign of delta_AD
  std::vector<double> bootstrap_sign;   // per node: fraction of replicates matching sign(delta_mean_AD)
  double fraction_sign_agreement = 0.0;
  double rank_stability = 0.0;          // mean pairwise Spearman of per-fold |delta_AD|
  double effect_ablation_spearman = 0.0;
};

struct RunReport {
  PipelineConfig config;
  std::size_t n_subjects = 0, n_nodes = 0, n_covariates = 0;
  std::array<std::size_t, kNumClasses> class_counts{};
  std::vector<std::string> node_names;
  std::array<std::string, kNumClasses> class_names = kDefaultClassNames;
  std::vector<FoldResult> folds;  // completed folds only
  std::vector<std::string> warnings;
  AucSummary auc_model, auc_mlp, auc_gcn;
  std::vector<EffectEstimate> effects;  // node-major, class-minor
  std::vector<std::vector<Eigen::RowVector3d>> per_fold_delta;  // [fold][node]
  std::vector<double> delta_auc_self;   // per node, fold-averaged
  std::vector<RankedNode> ranking;
  Concordance concordance;
};

using ProgressFn = std::function<void(const std::string&)>;

// Cross-validated training, intervention effects, bootstrap intervals,
// rankings, baselines and self-ablation. `dataset` is unstandardized.
RunReport run_pipeline(const CohortDataset& dataset, const PipelineConfig& config, const ProgressFn& progress = {});

nlohmann::json report_to_json(const RunReport& report);

// report.json, effects.csv, effects_raw.csv, ablation.csv, folds.csv,
// adjustment/{node}.json and models/fold{k}.json.
void write_run_outputs(const RunReport& report, const std::filesystem::path& dir);

}  // namespace causal_gcn
