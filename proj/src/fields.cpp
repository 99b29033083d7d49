#include "homo/fields.hpp"

#include <algorithm>
#include <cctype>

#include "homo/error.hpp"

namespace homo {

std::string_view to_string(Reduction r) { return r == Reduction::mean ? "mean" : "sum"; }

Reduction parse_reduction(std::string_view name) {
  if (name == "mean") return Reduction::mean;
  if (name == "sum") return Reduction::sum;
  throw ConfigError("unknown reduction '" + std::string(name) + "'");
}

std::vector<double> dyadic_steps(bool include_one) {
  std::vector<double> steps;
  for (int denom = 128; denom >= (include_one ? 1 : 2); denom /= 2) steps.push_back(1.0 / denom);
  return steps;
}

std::string LossConfig::label() const {
  std::string out;
  auto append = [&](bool on, const char* name) {
    if (!on) return;
    if (!out.empty()) out += '+';
    out += name;
  };
  append(use_m1, "M1");
  append(use_m2, "M2");
  append(use_m3, "M3");
  append(use_sc, "SC");
  return out;
}

LossConfig LossConfig::from_label(std::string_view label) {
  LossConfig cfg;
  cfg.use_m1 = false;
  std::string token;
  auto flush = [&] {
    if (token.empty()) return;
    if (token == "M1") {
      cfg.use_m1 = true;
    } else if (token == "M2") {
      cfg.use_m2 = true;
    } else if (token == "M3") {
      cfg.use_m3 = true;
    } else if (token == "SC") {
      cfg.use_sc = true;
    } else {
      throw ConfigError("unknown loss term '" + token + "' in '" + std::string(label) + "'");
    }
    token.clear();
  };
  for (char c : label) {
    if (c == '+') {
      flush();
    } else if (!std::isspace(static_cast<unsigned char>(c))) {
      token += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    }
  }
  flush();
  validate(cfg);
  return cfg;
}

void validate(const LossConfig& cfg) {
  if (!cfg.any_matching() && !cfg.use_sc) throw ConfigError("loss: at least one term must be enabled");
  if (!(cfg.true_target_fraction > 0.0 && cfg.true_target_fraction <= 1.0)) {
    throw ConfigError("loss: true_target_fraction must lie in (0, 1]");
  }
  if (cfg.use_sc && cfg.step_set.empty()) throw ConfigError("loss: SC needs a non-empty step_set");
  for (double d : cfg.step_set) {
    if (!(d > 0.0 && d <= 1.0)) throw ConfigError("loss: step_set entries must lie in (0, 1]");
  }
}

Eigen::Index field_input_dim(FieldRole role, bool step_conditioned) {
  const Eigen::Index vectors = role == FieldRole::velocity ? 1 : (role == FieldRole::acceleration ? 2 : 3);
  return 2 * vectors + 1 + (step_conditioned ? 1 : 0);
}

std::vector<Eigen::Index> field_layer_sizes(FieldRole role, bool step_conditioned, const Architecture& arch) {
  std::vector<Eigen::Index> sizes{field_input_dim(role, step_conditioned)};
  sizes.insert(sizes.end(), arch.hidden.begin(), arch.hidden.end());
  sizes.push_back(2);
  return sizes;
}

Eigen::Index FieldModels::parameter_count() const {
  Eigen::Index n = u1.parameter_count();
  if (u2) n += u2->parameter_count();
  if (u3) n += u3->parameter_count();
  return n;
}

Eigen::MatrixXd field_input(std::initializer_list<const Eigen::Matrix2Xd*> vectors, const Eigen::RowVectorXd& t,
                            const Eigen::RowVectorXd& d, bool step_conditioned) {
  const Eigen::Index n = t.size();
  const Eigen::Index rows = 2 * static_cast<Eigen::Index>(vectors.size()) + 1 + (step_conditioned ? 1 : 0);
  Eigen::MatrixXd in(rows, n);
  Eigen::Index r = 0;
  for (const auto* v : vectors) {
    if (v->cols() != n) throw DimensionError("field_input: batch width", n, v->cols());
    in.middleRows(r, 2) = *v;
    r += 2;
  }
  in.row(r++) = t;
  if (step_conditioned) {
    if (d.size() != n) throw DimensionError("field_input: step row width", n, d.size());
    in.row(r) = d;
  }
  return in;
}

Eigen::Matrix2Xd FieldModels::velocity(const Eigen::Matrix2Xd& x, const Eigen::RowVectorXd& t,
                                       const Eigen::RowVectorXd& d) const {
  return nn::mlp_forward(u1, field_input({&x}, t, d, step_conditioned));
}

Eigen::Matrix2Xd FieldModels::acceleration(const Eigen::Matrix2Xd& v, const Eigen::Matrix2Xd& x,
                                           const Eigen::RowVectorXd& t, const Eigen::RowVectorXd& d) const {
  if (!u2) throw ConfigError("acceleration field requested but no u2 network is present");
  return nn::mlp_forward(*u2, field_input({&v, &x}, t, d, step_conditioned));
}

Eigen::Matrix2Xd FieldModels::jerk(const Eigen::Matrix2Xd& a, const Eigen::Matrix2Xd& v, const Eigen::Matrix2Xd& x,
                                   const Eigen::RowVectorXd& t, const Eigen::RowVectorXd& d) const {
  if (!u3) throw ConfigError("jerk field requested but no u3 network is present");
  return nn::mlp_forward(*u3, field_input({&a, &v, &x}, t, d, step_conditioned));
}

FieldModels make_field_models(const LossConfig& cfg, const Architecture& arch, SeededRng& rng) {
  validate(cfg);
  FieldModels m;
  m.step_conditioned = cfg.step_conditioned();
  m.u1 = nn::init_model(field_layer_sizes(FieldRole::velocity, m.step_conditioned, arch), arch.activation, rng);
  if (cfg.needs_u2()) {
    m.u2 = nn::init_model(field_layer_sizes(FieldRole::acceleration, m.step_conditioned, arch), arch.activation, rng);
  }
  if (cfg.needs_u3()) {
    m.u3 = nn::init_model(field_layer_sizes(FieldRole::jerk, m.step_conditioned, arch), arch.activation, rng);
  }
  return m;
}

}  // namespace homo
