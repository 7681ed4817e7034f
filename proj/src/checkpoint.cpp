#include "causal_gcn/checkpoint.hpp"

#include <fstream>

namespace causal_gcn {

using nlohmann::json;

json array_to_json(const Eigen::Ref<const Matrix>& m) {
  json data = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  return {{"shape", {m.rows(), m.cols()}}, {"data", std::move(data)}};
}

Matrix array_from_json(const json& j) {
  const auto rows = j.at("shape").at(0).get<Eigen::Index>();
  const auto cols = j.at("shape").at(1).get<Eigen::Index>();
  const auto& data = j.at("data");
  if (static_cast<Eigen::Index>(data.size()) != rows * cols) throw DataError("array data does not match shape");
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[static_cast<std::size_t>(r * cols + c)].get<double>();
  return m;
}

json config_to_json(const TrainConfig& c) {
  return {{"hidden", c.hidden},
          {"covariate_width", c.covariate_width},
          {"dropout", c.dropout},
          {"learning_rate", c.learning_rate},
          {"ridge", c.ridge},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"batchnorm", c.batchnorm},
          {"input_projection", to_string(c.input_projection)},
          {"seed", c.seed},
          {"adam_beta1", c.adam_beta1},
          {"adam_beta2", c.adam_beta2},
          {"adam_epsilon", c.adam_epsilon}};
}

TrainConfig config_from_json(const json& j) {
  TrainConfig c;
  c.hidden = j.at("hidden").get<int>();
  c.covariate_width = j.at("covariate_width").get<int>();
  c.dropout = j.at("dropout").get<double>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.ridge = j.at("ridge").get<double>();
  c.epochs = j.at("epochs").get<int>();
  c.batch_size = j.at("batch_size").get<int>();
  c.batchnorm = j.at("batchnorm").get<bool>();
  c.input_projection = input_projection_from_string(j.at("input_projection").get<std::string>());
  c.seed = j.at("seed").get<std::uint64_t>();
  c.adam_beta1 = j.at("adam_beta1").get<double>();
  c.adam_beta2 = j.at("adam_beta2").get<double>();
  c.adam_epsilon = j.at("adam_epsilon").get<double>();
  return c;
}

json checkpoint_to_json(const TrainedModel& model) {
  json params = json::object();
  for (const auto& r : model.params.refs()) {
    params[std::string(r.name)] = array_to_json(Eigen::Map<const Matrix>(r.data, r.rows, r.cols));
  }
  params["bn_mean"] = array_to_json(model.params.bn_mean);
  params["bn_var"] = array_to_json(model.params.bn_var);
  const auto& s = model.scaler;
  json j;
  j["version"] = kCheckpointVersion;
  j["config"] = config_to_json(model.config);
  j["conditioning"] = model.conditioning;
  j["adjusted_node"] = model.adjusted_node;
  j["best_epoch"] = model.best_epoch;
  j["val_loss_history"] = model.val_loss_history;
  j["train_loss_history"] = model.train_loss_history;
  j["scaler"] = {{"sd_convention", s.sd_convention},
                 {"feature_mean", array_to_json(s.feature_mean)},
                 {"feature_sd", array_to_json(s.feature_sd)},
                 {"covariate_mean", array_to_json(s.covariate_mean)},
                 {"covariate_sd", array_to_json(s.covariate_sd)}};
  j["propagation"] = array_to_json(model.propagation);
  j["params"] = std::move(params);
  return j;
}

TrainedModel checkpoint_from_json(const json& j) {
  if (j.value("version", std::string{}) != kCheckpointVersion) {
    throw DataError(std::string("unsupported checkpoint version, expected ") + kCheckpointVersion);
  }
  try {
    TrainedModel model;
    model.config = config_from_json(j.at("config"));
    model.conditioning = j.at("conditioning").get<std::string>();
    model.adjusted_node = j.at("adjusted_node").get<int>();
    model.best_epoch = j.at("best_epoch").get<int>();
    model.val_loss_history = j.at("val_loss_history").get<std::vector<double>>();
    model.train_loss_history = j.at("train_loss_history").get<std::vector<double>>();
    const auto& s = j.at("scaler");
    model.scaler.sd_convention = s.at("sd_convention").get<std::string>();
    model.scaler.feature_mean = array_from_json(s.at("feature_mean"));
    model.scaler.feature_sd = array_from_json(s.at("feature_sd"));
    model.scaler.covariate_mean = array_from_json(s.at("covariate_mean"));
    model.scaler.covariate_sd = array_from_json(s.at("covariate_sd"));
    model.propagation = array_from_json(j.at("propagation"));
    const auto& params = j.at("params");
    auto& p = model.params;
    p.W0 = array_from_json(params.at("W0"));
    p.b0 = array_from_json(params.at("b0"));
    p.W1 = array_from_json(params.at("W1"));
    p.b1 = array_from_json(params.at("b1"));
    p.Wc = array_from_json(params.at("Wc"));
    p.bc = array_from_json(params.at("bc"));
    p.Wo = array_from_json(params.at("Wo"));
    p.bo = array_from_json(params.at("bo"));
    p.bn_mean = array_from_json(params.at("bn_mean"));
    p.bn_var = array_from_json(params.at("bn_var"));
    p.batchnorm = model.config.batchnorm;
    return model;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const TrainedModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << checkpoint_to_json(model).dump(1) << '\n';
}

TrainedModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return checkpoint_from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw DataError(std::string("malformed checkpoint: ") + e.what());
  }
}

}  // namespace causal_gcn
