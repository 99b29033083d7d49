#pragma once

#include <cstdint>
#include <string>

#include "json.hpp"

#include "homo/fields.hpp"

namespace homo {

inline constexpr int kCheckpointFormatVersion = 1;

// Single network, keys in this order:
//   format_version, layer_sizes, activation, weights, biases, rng_seed, step_count
// weights[i] is a list of rows; biases[i] a flat list. Doubles are written in
// shortest round-trip form, so load(save(m)) is bit-exact.
nlohmann::ordered_json mlp_to_json(const Mlp& model, std::uint64_t rng_seed, long step_count);
Mlp mlp_from_json(const nlohmann::ordered_json& j);

// Field bundle, keys in this order:
//   format_version, loss_config, step_conditioned, rng_seed, step_count,
//   networks {u1, u2?, u3?}
nlohmann::ordered_json fields_to_json(const FieldModels& models, const std::string& loss_label,
                                      std::uint64_t rng_seed, long step_count);
FieldModels fields_from_json(const nlohmann::ordered_json& j);

void save_fields(const std::string& path, const FieldModels& models, const std::string& loss_label,
                 std::uint64_t rng_seed, long step_count);
FieldModels load_fields(const std::string& path);

}  // namespace homo
