#include "causal_gcn/run_config.hpp"

#include <algorithm>
#include <fstream>

#include "causal_gcn/checkpoint.hpp"

namespace causal_gcn {

using nlohmann::json;

const std::vector<std::string>& run_config_keys() {
  static const std::vector<std::string> keys = {
      "features",     "covariates",  "labels",          "adjacency",  "tau",
      "target_density", "k_folds",   "seed",            "hidden",     "covariate_width",
      "dropout",      "learning_rate", "ridge",         "epochs",     "batch_size",
      "batchnorm",    "input_projection", "n_pcs",      "pct_lo",     "pct_hi",
      "bootstrap",    "alpha",       "conditioning",    "renormalize_after_sever",
      "strict",       "baselines",   "threads",         "output_dir"};
  return keys;
}

void RunConfig::validate() const {
  if (tau && target_density) throw DataError("tau and target_density are mutually exclusive");
  pipeline.validate();
}

namespace {

template <typename T>
T get(const json& j, const std::string& key) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    throw DataError("config key '" + key + "' has the wrong type");
  }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& value) {
  std::filesystem::path p(value);
  return p.is_absolute() || base.empty() ? p : base / p;
}

}  // namespace

void apply_run_config_json(RunConfig& c, const json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw DataError("config must be a JSON object");
  const auto& keys = run_config_keys();
  for (const auto& [key, value] : j.items()) {
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) throw DataError("unknown config key '" + key + "'");
    if (value.is_null()) continue;
    auto& t = c.pipeline.train;
    if (key == "features") c.features = resolve(base_dir, get<std::string>(value, key));
    else if (key == "covariates") c.covariates = resolve(base_dir, get<std::string>(value, key));
    else if (key == "labels") c.labels = resolve(base_dir, get<std::string>(value, key));
    else if (key == "adjacency") c.adjacency = resolve(base_dir, get<std::string>(value, key));
    else if (key == "output_dir") c.output_dir = resolve(base_dir, get<std::string>(value, key));
    else if (key == "tau") c.tau = get<double>(value, key);
    else if (key == "target_density") c.target_density = get<double>(value, key);
    else if (key == "k_folds") c.pipeline.k_folds = get<int>(value, key);
    else if (key == "seed") c.pipeline.seed = get<std::uint64_t>(value, key);
    else if (key == "hidden") t.hidden = get<int>(value, key);
    else if (key == "covariate_width") t.covariate_width = get<int>(value, key);
    else if (key == "dropout") t.dropout = get<double>(value, key);
    else if (key == "learning_rate") t.learning_rate = get<double>(value, key);
    else if (key == "ridge") t.ridge = get<double>(value, key);
    else if (key == "epochs") t.epochs = get<int>(value, key);
    else if (key == "batch_size") t.batch_size = get<int>(value, key);
    else if (key == "batchnorm") t.batchnorm = get<bool>(value, key);
    else if (key == "input_projection") t.input_projection = input_projection_from_string(get<std::string>(value, key));
    else if (key == "n_pcs") c.pipeline.n_pcs = get<int>(value, key);
    else if (key == "pct_lo") c.pipeline.pct_lo = get<double>(value, key);
    else if (key == "pct_hi") c.pipeline.pct_hi = get<double>(value, key);
    else if (key == "bootstrap") c.pipeline.bootstrap = get<int>(value, key);
    else if (key == "alpha") c.pipeline.alpha = get<double>(value, key);
    else if (key == "conditioning") c.pipeline.conditioning = conditioning_from_string(get<std::string>(value, key));
    else if (key == "renormalize_after_sever") c.pipeline.renormalize_after_sever = get<bool>(value, key);
    else if (key == "strict") c.pipeline.strict = get<bool>(value, key);
    else if (key == "baselines") c.pipeline.baselines = get<bool>(value, key);
    else if (key == "threads") c.pipeline.threads = get<int>(value, key);
  }
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw DataError("malformed config " + path.string() + ": " + e.what());
  }
  RunConfig c;
  apply_run_config_json(c, j, path.parent_path());
  return c;
}

json run_config_to_json(const RunConfig& c) {
  const auto& t = c.pipeline.train;
  json j = {{"features", c.features.string()},
            {"covariates", c.covariates.string()},
            {"labels", c.labels.string()},
            {"adjacency", c.adjacency.string()},
            {"tau", c.tau ? json(*c.tau) : json(nullptr)},
            {"target_density", c.target_density ? json(*c.target_density) : json(nullptr)},
            {"k_folds", c.pipeline.k_folds},
            {"seed", c.pipeline.seed},
            {"hidden", t.hidden},
            {"covariate_width", t.covariate_width},
            {"dropout", t.dropout},
            {"learning_rate", t.learning_rate},
            {"ridge", t.ridge},
            {"epochs", t.epochs},
            {"batch_size", t.batch_size},
            {"batchnorm", t.batchnorm},
            {"input_projection", to_string(t.input_projection)},
            {"n_pcs", c.pipeline.n_pcs},
            {"pct_lo", c.pipeline.pct_lo},
            {"pct_hi", c.pipeline.pct_hi},
            {"bootstrap", c.pipeline.bootstrap},
            {"alpha", c.pipeline.alpha},
            {"conditioning", to_string(c.pipeline.conditioning)},
            {"renormalize_after_sever", c.pipeline.renormalize_after_sever},
            {"strict", c.pipeline.strict},
            {"baselines", c.pipeline.baselines},
            {"threads", c.pipeline.threads},
            {"output_dir", c.output_dir.string()}};
  return j;
}

CohortDataset load_run_dataset(const RunConfig& c) {
  for (const auto* p : {&c.features, &c.covariates, &c.labels, &c.adjacency}) {
    if (p->empty()) throw DataError("features, covariates, labels and adjacency paths are all required");
  }
  CohortDataset ds = load_cohort(c.features, c.covariates, c.labels, c.adjacency);
  ds.adjacency = threshold_and_rescale(ds.adjacency, c.tau, c.target_density).adjacency;
  validate_cohort(ds);
  return ds;
}

}  // namespace causal_gcn
