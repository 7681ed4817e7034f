#pragma once

#include <filesystem>

#include <json.hpp>

#include "causal_gcn/gcn_model.hpp"

namespace causal_gcn {

inline constexpr const char* kCheckpointVersion = "causal-gcn-ckpt/1";

// {"shape": [rows, cols], "data": [row-major values]}
nlohmann::json array_to_json(const Eigen::Ref<const Matrix>& m);
Matrix array_from_json(const nlohmann::json& j);

nlohmann::json config_to_json(const TrainConfig& config);
TrainConfig config_from_json(const nlohmann::json& j);

nlohmann::json checkpoint_to_json(const TrainedModel& model);
TrainedModel checkpoint_from_json(const nlohmann::json& j);

void save_checkpoint(const TrainedModel& model, const std::filesystem::path& path);
TrainedModel load_checkpoint(const std::filesystem::path& path);

}  // namespace causal_gcn
