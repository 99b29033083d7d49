#include "homo/checkpoint.hpp"

#include <fstream>

#include "homo/error.hpp"

namespace homo {

using nlohmann::ordered_json;

namespace {

void require(const ordered_json& j, const char* key) {
  if (!j.contains(key)) throw ConfigError(std::string("checkpoint: missing key '") + key + "'");
}

void check_version(const ordered_json& j) {
  require(j, "format_version");
  if (j.at("format_version").get<int>() != kCheckpointFormatVersion) {
    throw ConfigError("checkpoint: unsupported format_version " + j.at("format_version").dump());
  }
}

}  // namespace

ordered_json mlp_to_json(const Mlp& model, std::uint64_t rng_seed, long step_count) {
  ordered_json j;
  j["format_version"] = kCheckpointFormatVersion;
  j["layer_sizes"] = model.layer_sizes;
  j["activation"] = std::string(nn::to_string(model.activation));
  ordered_json weights = ordered_json::array();
  ordered_json biases = ordered_json::array();
  for (std::size_t l = 0; l < model.layer_count(); ++l) {
    ordered_json w = ordered_json::array();
    for (Eigen::Index r = 0; r < model.weights[l].rows(); ++r) {
      ordered_json row = ordered_json::array();
      for (Eigen::Index c = 0; c < model.weights[l].cols(); ++c) row.push_back(model.weights[l](r, c));
      w.push_back(std::move(row));
    }
    weights.push_back(std::move(w));
    ordered_json b = ordered_json::array();
    for (Eigen::Index r = 0; r < model.biases[l].size(); ++r) b.push_back(model.biases[l](r));
    biases.push_back(std::move(b));
  }
  j["weights"] = std::move(weights);
  j["biases"] = std::move(biases);
  j["rng_seed"] = rng_seed;
  j["step_count"] = step_count;
  return j;
}

Mlp mlp_from_json(const ordered_json& j) {
  check_version(j);
  for (const char* key : {"layer_sizes", "activation", "weights", "biases"}) require(j, key);
  Mlp m;
  m.layer_sizes = j.at("layer_sizes").get<std::vector<Eigen::Index>>();
  m.activation = nn::parse_activation(j.at("activation").get<std::string>());
  const auto& weights = j.at("weights");
  const auto& biases = j.at("biases");
  const std::size_t layers = m.layer_sizes.size() - 1;
  if (m.layer_sizes.size() < 2 || weights.size() != layers || biases.size() != layers) {
    throw ConfigError("checkpoint: layer count does not match layer_sizes");
  }
  for (std::size_t l = 0; l < layers; ++l) {
    const auto rows = m.layer_sizes[l + 1];
    const auto cols = m.layer_sizes[l];
    if (static_cast<Eigen::Index>(weights[l].size()) != rows ||
        static_cast<Eigen::Index>(biases[l].size()) != rows) {
      throw ConfigError("checkpoint: layer " + std::to_string(l) + " has the wrong number of rows");
    }
    Eigen::MatrixXd w(rows, cols);
    Eigen::VectorXd b(rows);
    for (Eigen::Index r = 0; r < rows; ++r) {
      const auto& row = weights[l][static_cast<std::size_t>(r)];
      if (static_cast<Eigen::Index>(row.size()) != cols) {
        throw ConfigError("checkpoint: layer " + std::to_string(l) + " has the wrong number of columns");
      }
      for (Eigen::Index c = 0; c < cols; ++c) w(r, c) = row[static_cast<std::size_t>(c)].get<double>();
      b(r) = biases[l][static_cast<std::size_t>(r)].get<double>();
    }
    m.weights.push_back(std::move(w));
    m.biases.push_back(std::move(b));
  }
  return m;
}

ordered_json fields_to_json(const FieldModels& models, const std::string& loss_label, std::uint64_t rng_seed,
                            long step_count) {
  ordered_json j;
  j["format_version"] = kCheckpointFormatVersion;
  j["loss_config"] = loss_label;
  j["step_conditioned"] = models.step_conditioned;
  j["rng_seed"] = rng_seed;
  j["step_count"] = step_count;
  ordered_json nets;
  nets["u1"] = mlp_to_json(models.u1, rng_seed, step_count);
  if (models.u2) nets["u2"] = mlp_to_json(*models.u2, rng_seed, step_count);
  if (models.u3) nets["u3"] = mlp_to_json(*models.u3, rng_seed, step_count);
  j["networks"] = std::move(nets);
  return j;
}

FieldModels fields_from_json(const ordered_json& j) {
  check_version(j);
  require(j, "networks");
  require(j, "step_conditioned");
  const auto& nets = j.at("networks");
  if (!nets.contains("u1")) throw ConfigError("checkpoint: networks.u1 missing");
  FieldModels m;
  m.step_conditioned = j.at("step_conditioned").get<bool>();
  m.u1 = mlp_from_json(nets.at("u1"));
  if (nets.contains("u2")) m.u2 = mlp_from_json(nets.at("u2"));
  if (nets.contains("u3")) m.u3 = mlp_from_json(nets.at("u3"));
  if (m.u3 && !m.u2) throw ConfigError("checkpoint: u3 present without u2");
  const Eigen::Index expect = field_input_dim(FieldRole::velocity, m.step_conditioned);
  if (m.u1.input_dim() != expect) throw DimensionError("checkpoint: u1 input dim", expect, m.u1.input_dim());
  return m;
}

void save_fields(const std::string& path, const FieldModels& models, const std::string& loss_label,
                 std::uint64_t rng_seed, long step_count) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write checkpoint '" + path + "'");
  out << fields_to_json(models, loss_label, rng_seed, step_count).dump(1) << '\n';
}

FieldModels load_fields(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read checkpoint '" + path + "'");
  ordered_json j;
  try {
    j = ordered_json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("checkpoint '" + path + "': " + e.what());
  }
  return fields_from_json(j);
}

}  // namespace homo
