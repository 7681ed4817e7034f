#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "causal_gcn/csv.hpp"
#include "causal_gcn/graph_data.hpp"
#include "causal_gcn/inference.hpp"
#include "causal_gcn/run_config.hpp"
#include "causal_gcn/synth_scm.hpp"

namespace fs = std::filesystem;
using namespace causal_gcn;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

void log(const std::string& msg) { std::cerr << "[causal-gcn] " << msg << '\n'; }

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw DataError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

struct SimulateArgs {
  std::string preset = "single-cause";
  std::string config;
  std::size_t n = 2000;
  std::size_t p = 10;
  std::uint64_t seed = 0;
  std::string out = "sim_out";
};

int cmd_simulate(const SimulateArgs& a) {
  ScmSpec spec = a.config.empty() ? preset_by_name(a.preset, a.p, a.seed) : scm_from_json(read_json_file(a.config));
  spec.validate();
  if (a.n < 1) throw DataError("--n must be at least 1");
  log("simulating " + std::to_string(a.n) + " subjects, p=" + std::to_string(spec.p));
  auto [dataset, truth] = generate_cohort(spec, a.n);
  const fs::path out(a.out);
  fs::create_directories(out);
  write_cohort(dataset, out);
  csv::Table gt{{"node_id", "node_name", "true_delta", "true_delta_se", "x_lo", "x_hi"}, {}};
  for (std::size_t j = 0; j < spec.p; ++j) {
    const auto k = static_cast<Eigen::Index>(j);
    gt.rows.push_back({std::to_string(j), dataset.node_names[j], csv::format_number(truth.true_delta(k)),
                       csv::format_number(truth.true_delta_se(k)), csv::format_number(truth.x_lo(k)),
                       csv::format_number(truth.x_hi(k))});
  }
  csv::write(out / "ground_truth.csv", gt);
  std::ofstream(out / "scm.json", std::ios::binary) << scm_to_json(spec).dump(2) << '\n';
  log("wrote cohort to " + out.string());
  return kExitOk;
}

int default_threads() {
  if (const char* env = std::getenv("CAUSAL_GCN_THREADS")) {
    try {
      return std::stoi(env);
    } catch (const std::exception&) {
      throw DataError("CAUSAL_GCN_THREADS must be an integer");
    }
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

// Flags mirror config keys; values given on the command line override the file.
struct RunArgs {
  std::string config;
  std::map<std::string, std::string> values;
  bool batchnorm = false, no_renormalize = false, permissive = false, no_baselines = false, dry_run = false;
};

const std::vector<std::string> kStringKeys = {"features", "covariates", "labels", "adjacency",
                                              "output_dir", "input_projection", "conditioning"};

int cmd_run(const RunArgs& a, const std::map<std::string, bool>& given) {
  RunConfig config;
  config.pipeline.threads = default_threads();
  if (!a.config.empty()) {
    const auto threads = config.pipeline.threads;
    config = load_run_config(a.config);
    if (!read_json_file(a.config).contains("threads")) config.pipeline.threads = threads;
  }
  json overrides = json::object();
  for (const auto& [key, value] : a.values) {
    if (!given.at(key)) continue;
    if (std::find(kStringKeys.begin(), kStringKeys.end(), key) != kStringKeys.end()) {
      overrides[key] = value;
    } else {
      try {
        overrides[key] = json::parse(value);
      } catch (const json::parse_error&) {
        throw DataError("flag for '" + key + "' expects a number, got '" + value + "'");
      }
    }
  }
  if (a.batchnorm) overrides["batchnorm"] = true;
  if (a.no_renormalize) overrides["renormalize_after_sever"] = false;
  if (a.permissive) overrides["strict"] = false;
  if (a.no_baselines) overrides["baselines"] = false;
  apply_run_config_json(config, overrides);
  config.validate();

  const CohortDataset dataset = load_run_dataset(config);
  log("loaded " + std::to_string(dataset.num_subjects()) + " subjects, " + std::to_string(dataset.num_nodes()) +
      " nodes");
  stratified_kfold(dataset.labels, config.pipeline.k_folds, config.pipeline.seed);
  if (a.dry_run) {
    log("dry run: configuration and data are valid");
    return kExitOk;
  }
  const RunReport report = run_pipeline(dataset, config.pipeline, log);
  write_run_outputs(report, config.output_dir);
  {
    std::ofstream out(config.output_dir / "run_config.json", std::ios::binary);
    out << run_config_to_json(config).dump(2) << '\n';
  }
  log("wrote outputs to " + config.output_dir.string());
  return kExitOk;
}

std::vector<RankedNode> ranking_from_report(const json& report) {
  if (!report.is_object() || !report.contains("ranking") || !report["ranking"].is_array()) {
    throw DataError("report has no ranking array");
  }
  std::vector<RankedNode> out;
  try {
    for (const auto& r : report["ranking"]) {
      RankedNode n;
      n.rank = r.at("rank").get<int>();
      n.node_id = r.at("node_id").get<std::size_t>();
      n.node_name = r.at("node_name").get<std::string>();
      n.delta_ad = r.at("delta_ad").get<double>();
      n.abs_delta_ad = r.at("abs_delta_ad").get<double>();
      n.delta_auc_self = r.at("delta_auc_self").get<double>();
      out.push_back(std::move(n));
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed ranking entry: ") + e.what());
  }
  return out;
}

int cmd_rank(const std::string& path, int top) {
  if (top < 0) throw DataError("--top must be nonnegative");
  std::cout << render_rank_table(ranking_from_report(read_json_file(path)), static_cast<std::size_t>(top));
  return kExitOk;
}

std::string auc_line(const json& auc) {
  if (!auc.is_object() || auc.value("mean", json()).is_null()) return "n/a";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4f +/- %.4f", auc["mean"].get<double>(), auc["sd"].get<double>());
  return buf;
}

int cmd_report(const std::string& path, int top) {
  const json r = read_json_file(path);
  try {
    if (r.at("schema").get<std::string>() != kReportSchema) throw DataError("unsupported report schema");
    const auto& prov = r.at("provenance");
    std::cout << "subjects: " << prov.at("n_subjects") << "  nodes: " << prov.at("n_nodes")
              << "  folds completed: " << r.at("folds").size() << '\n';
    std::cout << "AUC (macro one-vs-rest)\n";
    std::cout << "  causal GCN  " << auc_line(r.at("auc").at("model")) << '\n';
    std::cout << "  MLP         " << auc_line(r.at("auc").at("mlp")) << '\n';
    std::cout << "  vanilla GCN " << auc_line(r.at("auc").at("gcn")) << '\n';
    const auto& c = r.at("concordance");
    std::cout << "fold sign agreement: " << c.at("fraction_sign_agreement").get<double>() << '\n';
    std::cout << "rank stability (Spearman): " << c.at("rank_stability_spearman").get<double>() << '\n';
    std::cout << "effect vs ablation (Spearman): " << c.at("effect_vs_ablation_spearman").get<double>() << '\n';
    std::cout << '\n' << render_rank_table(ranking_from_report(r), static_cast<std::size_t>(std::max(top, 0)));
    for (const auto& w : r.at("warnings")) std::cout << "warning: " << w.get<std::string>() << '\n';
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed report: ") + e.what());
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Causal graph convolutional network for cohort connectome data"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Generate a synthetic cohort with known causal effects");
  simulate->add_option("--preset", sim.preset, "Preset SCM: single-cause or null")->capture_default_str();
  simulate->add_option("--config", sim.config, "SCM definition JSON (overrides --preset)");
  simulate->add_option("--n", sim.n, "Number of subjects")->capture_default_str();
  simulate->add_option("--p", sim.p, "Number of nodes for presets")->capture_default_str();
  simulate->add_option("--seed", sim.seed, "Random seed")->capture_default_str();
  simulate->add_option("--out", sim.out, "Output directory")->capture_default_str();

  RunArgs run_args;
  auto* run = app.add_subcommand("run", "Cross-validated training and interventional effect estimation");
  run->add_option("--config", run_args.config, "Flat JSON config; flags override its values");
  const std::vector<std::pair<std::string, std::string>> run_flags = {
      {"features", "Features CSV"},
      {"covariates", "Covariates CSV"},
      {"labels", "Labels CSV"},
      {"adjacency", "Adjacency CSV (dense or src,dst,weight edge list)"},
      {"tau", "Absolute edge threshold"},
      {"target_density", "Edge density to keep (default 0.15)"},
      {"k_folds", "Cross-validation folds (default 5)"},
      {"seed", "Seed for all randomness (default 0)"},
      {"hidden", "Hidden width d (default 64)"},
      {"covariate_width", "Covariate branch width (default 16)"},
      {"dropout", "Dropout rate (default 0.5)"},
      {"learning_rate", "Adam learning rate (default 1e-3)"},
      {"ridge", "Ridge penalty (default 1e-4)"},
      {"epochs", "Training epochs (default 200)"},
      {"batch_size", "Minibatch size, 0 for full batch (default 0)"},
      {"input_projection", "per_node or shared (default per_node)"},
      {"n_pcs", "Principal components for adjustment (default 8)"},
      {"pct_lo", "Low intervention percentile (default 10)"},
      {"pct_hi", "High intervention percentile (default 90)"},
      {"bootstrap", "Bootstrap replicates (default 200)"},
      {"alpha", "CI level is 1 - alpha (default 0.05)"},
      {"conditioning", "implicit or explicit (default implicit)"},
      {"threads", "Worker threads (default: CAUSAL_GCN_THREADS or logical processors)"},
      {"output_dir", "Output directory"}};
  std::map<std::string, CLI::Option*> run_options;
  for (const auto& [key, help] : run_flags) {
    std::string flag = "--" + key;
    std::replace(flag.begin(), flag.end(), '_', '-');
    if (key == "output_dir") flag += ",--out";
    run_options[key] = run->add_option(flag, run_args.values[key], help);
  }
  run->add_flag("--batchnorm", run_args.batchnorm, "Batch norm on the pooled embedding");
  run->add_flag("--no-renormalize", run_args.no_renormalize, "Keep original normalization when severing");
  run->add_flag("--permissive", run_args.permissive, "Skip failed folds instead of aborting");
  run->add_flag("--no-baselines", run_args.no_baselines, "Skip MLP and vanilla GCN baselines");
  run->add_flag("--dry-run", run_args.dry_run, "Validate config and data, train nothing");

  std::string rank_report;
  int rank_top = 15;
  auto* rank = app.add_subcommand("rank", "Print the node ranking from a report");
  rank->add_option("--report", rank_report, "report.json")->required();
  rank->add_option("--top", rank_top, "Rows to print")->capture_default_str();

  std::string summary_report;
  int summary_top = 10;
  auto* report = app.add_subcommand("report", "Summarize a report");
  report->add_option("--report", summary_report, "report.json")->required();
  report->add_option("--top", summary_top, "Ranking rows to print")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitData;
  }

  try {
    if (simulate->parsed()) return cmd_simulate(sim);
    if (run->parsed()) {
      std::map<std::string, bool> given;
      for (const auto& [key, opt] : run_options) given[key] = opt->count() > 0;
      return cmd_run(run_args, given);
    }
    if (rank->parsed()) return cmd_rank(rank_report, rank_top);
    if (report->parsed()) return cmd_report(summary_report, summary_top);
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitData;
}
