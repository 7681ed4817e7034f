#pragma once

#include <filesystem>
#include <optional>

#include <json.hpp>

#include "causal_gcn/graph_data.hpp"
#include "causal_gcn/inference.hpp"

namespace causal_gcn {

// Flat key-value configuration of a `run` invocation. Relative paths in a
// config file resolve against the file's directory.
struct RunConfig {
  std::filesystem::path features, covariates, labels, adjacency;
  std::optional<double> tau;             // absolute edge threshold
  std::optional<double> target_density;  // default 0.15 when neither is set
  PipelineConfig pipeline;
  std::filesystem::path output_dir = "causal_gcn_out";

  void validate() const;
};

// Keys accepted by the config file; anything else is a DataError.
const std::vector<std::string>& run_config_keys();

// Applies the keys of `j` on top of `config`.
void apply_run_config_json(RunConfig& config, const nlohmann::json& j, const std::filesystem::path& base_dir = {});

RunConfig load_run_config(const std::filesystem::path& path);

nlohmann::json run_config_to_json(const RunConfig& config);

// Loads the cohort and thresholds/rescales its adjacency.
CohortDataset load_run_dataset(const RunConfig& config);

}  // namespace causal_gcn
