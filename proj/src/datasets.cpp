#include "homo/datasets.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>

#include "homo/error.hpp"

namespace homo {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Sampler {
  SeededRng& rng;
  double sigma;

  Eigen::Vector2d isotropic(const Eigen::Vector2d& center) {
    const double nx = rng.normal();
    const double ny = rng.normal();
    return center + sigma * Eigen::Vector2d(nx, ny);
  }

  Eigen::Vector2d ring(double radius) {
    const double theta = kTwoPi * rng.uniform();
    const double r = radius + sigma * rng.normal();
    return r * Eigen::Vector2d(std::cos(theta), std::sin(theta));
  }

  Eigen::Vector2d irregular_ring(double radius, double amplitude, int frequency) {
    const double theta = kTwoPi * rng.uniform();
    const double r = radius * (1.0 + amplitude * std::sin(frequency * theta)) + sigma * rng.normal();
    return r * Eigen::Vector2d(std::cos(theta), std::sin(theta));
  }

  Eigen::Vector2d spiral(double inner, double outer, int rounds) {
    const double span = kTwoPi * rounds;
    const double theta = span * rng.uniform();
    const double r = inner + (outer - inner) * theta / span;
    return isotropic(r * Eigen::Vector2d(std::cos(theta), std::sin(theta)));
  }
};

PointCloud make_cloud(Eigen::Index n, CloudLabel label) {
  PointCloud c;
  c.points.resize(2, n);
  c.label = label;
  return c;
}

PointCloud gaussian_modes(const DatasetSpec& spec, double radius, CloudLabel label, Sampler& s) {
  PointCloud c = make_cloud(static_cast<Eigen::Index>(spec.mode_count) * spec.points_per_mode, label);
  Eigen::Index col = 0;
  for (int i = 0; i < spec.mode_count; ++i) {
    const double angle = kTwoPi * i / spec.mode_count;
    const Eigen::Vector2d center = radius * Eigen::Vector2d(std::cos(angle), std::sin(angle));
    for (int j = 0; j < spec.points_per_mode; ++j) c.points.col(col++) = s.isotropic(center);
  }
  return c;
}

template <typename F>
PointCloud fill(Eigen::Index n, CloudLabel label, F&& draw) {
  PointCloud c = make_cloud(n, label);
  for (Eigen::Index i = 0; i < n; ++i) c.points.col(i) = draw(i);
  return c;
}

}  // namespace

std::string_view to_string(CloudLabel label) {
  switch (label) {
    case CloudLabel::source: return "source";
    case CloudLabel::target: return "target";
    case CloudLabel::generated: return "generated";
  }
  return "source";
}

CloudLabel parse_cloud_label(std::string_view name) {
  if (name == "source") return CloudLabel::source;
  if (name == "target") return CloudLabel::target;
  if (name == "generated") return CloudLabel::generated;
  throw ConfigError("unknown cloud label '" + std::string(name) + "'");
}

std::string_view to_string(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::gaussian_modes: return "gaussian_modes";
    case DatasetKind::circle: return "circle";
    case DatasetKind::irregular_ring: return "irregular_ring";
    case DatasetKind::spiral: return "spiral";
    case DatasetKind::spin: return "spin";
    case DatasetKind::round_spin: return "round_spin";
    case DatasetKind::dot_circle: return "dot_circle";
  }
  return "gaussian_modes";
}

DatasetKind parse_dataset_kind(std::string_view name) {
  for (auto k : {DatasetKind::gaussian_modes, DatasetKind::circle, DatasetKind::irregular_ring, DatasetKind::spiral,
                 DatasetKind::spin, DatasetKind::round_spin, DatasetKind::dot_circle}) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("unknown dataset kind '" + std::string(name) + "'");
}

DatasetSpec DatasetSpec::gaussian_modes(int k, double r_src, double r_tgt, int per_mode) {
  DatasetSpec s;
  s.kind = DatasetKind::gaussian_modes;
  s.mode_count = k;
  s.source_radius = r_src;
  s.target_radius = r_tgt;
  s.points_per_mode = per_mode;
  return s;
}

DatasetSpec DatasetSpec::circle(int points) {
  DatasetSpec s;
  s.kind = DatasetKind::circle;
  s.source_radius = 5.0;
  s.target_radius = 12.0;
  s.total_points = points;
  return s;
}

DatasetSpec DatasetSpec::irregular_ring(int points) {
  DatasetSpec s;
  s.kind = DatasetKind::irregular_ring;
  s.source_radius = 5.0;
  s.target_radius = 10.0;
  s.total_points = points;
  return s;
}

DatasetSpec DatasetSpec::spiral(int points) {
  DatasetSpec s;
  s.kind = DatasetKind::spiral;
  s.source_radius = 5.0;
  s.target_radius = 12.0;
  s.total_points = points;
  s.rounds = 1;
  return s;
}

DatasetSpec DatasetSpec::spin(int points, int rounds) {
  DatasetSpec s = spiral(points);
  s.kind = rounds == 1 ? DatasetKind::spin : DatasetKind::round_spin;
  s.rounds = rounds;
  return s;
}

DatasetSpec DatasetSpec::dot_circle(int points) {
  DatasetSpec s;
  s.kind = DatasetKind::dot_circle;
  s.source_radius = 10.0;
  s.target_radius = 12.0;
  s.total_points = points;
  s.dot_points = points / 2;
  s.rounds = 2;
  return s;
}

Eigen::Index DatasetSpec::source_count() const {
  return kind == DatasetKind::gaussian_modes ? static_cast<Eigen::Index>(mode_count) * points_per_mode
                                             : total_points;
}

Eigen::Index DatasetSpec::target_count() const { return source_count(); }

void validate(const DatasetSpec& spec) {
  if (!(spec.variance > 0.0)) throw ConfigError("dataset: variance must be > 0");
  if (spec.source_radius < 0.0 || spec.target_radius < 0.0) throw ConfigError("dataset: radii must be >= 0");
  if (spec.kind == DatasetKind::gaussian_modes) {
    if (spec.mode_count <= 0 || spec.points_per_mode <= 0) {
      throw ConfigError("dataset: mode_count and points_per_mode must be > 0");
    }
  } else if (spec.total_points <= 0) {
    throw ConfigError("dataset: total_points must be > 0");
  }
  if (spec.rounds <= 0) throw ConfigError("dataset: rounds must be > 0");
  if (spec.kind == DatasetKind::dot_circle && (spec.dot_points < 0 || spec.dot_points > spec.total_points)) {
    throw ConfigError("dataset: dot_points must lie in [0, total_points]");
  }
}

DatasetSample sample_dataset(const DatasetSpec& spec, SeededRng& rng) {
  validate(spec);
  Sampler s{rng, std::sqrt(spec.variance)};
  const Eigen::Index n = spec.source_count();
  DatasetSample out;
  switch (spec.kind) {
    case DatasetKind::gaussian_modes:
      out.source = gaussian_modes(spec, spec.source_radius, CloudLabel::source, s);
      out.target = gaussian_modes(spec, spec.target_radius, CloudLabel::target, s);
      break;
    case DatasetKind::circle:
      out.source = fill(n, CloudLabel::source, [&](auto) { return s.ring(spec.source_radius); });
      out.target = fill(n, CloudLabel::target, [&](auto) { return s.ring(spec.target_radius); });
      break;
    case DatasetKind::irregular_ring:
      out.source = fill(n, CloudLabel::source, [&](auto) { return s.ring(spec.source_radius); });
      out.target = fill(n, CloudLabel::target, [&](auto) {
        return s.irregular_ring(spec.target_radius, spec.irregular_amplitude, spec.irregular_frequency);
      });
      break;
    case DatasetKind::spiral:
    case DatasetKind::spin:
    case DatasetKind::round_spin:
      out.source = fill(n, CloudLabel::source, [&](auto) { return s.ring(spec.source_radius); });
      out.target = fill(n, CloudLabel::target, [&](auto) {
        return s.spiral(spec.spiral_inner_radius, spec.target_radius, spec.rounds);
      });
      break;
    case DatasetKind::dot_circle:
      out.source = fill(n, CloudLabel::source, [&](Eigen::Index i) {
        return i < spec.dot_points ? s.isotropic(Eigen::Vector2d::Zero()) : s.ring(spec.source_radius);
      });
      out.target = fill(n, CloudLabel::target, [&](auto) {
        return s.spiral(spec.spiral_inner_radius, spec.target_radius, spec.rounds);
      });
      break;
  }
  return out;
}

const ExperimentCell& PaperExperiment::cell(std::string_view loss_label) const {
  for (const auto& c : cells) {
    if (c.loss_label == loss_label) return c;
  }
  throw ConfigError("experiment '" + name + "' has no cell '" + std::string(loss_label) + "'");
}

const std::vector<PaperExperiment>& list_paper_experiments() {
  static const std::vector<PaperExperiment> experiments = [] {
    using V = std::vector<double>;
    // Paper values in the order the cells are listed.
    auto gaussian_cells = [](int m1_m2_steps, V p) {
      return std::vector<ExperimentCell>{{"M1", 1000, p[0]},     {"M2", 100, p[1]},     {"SC", 50, p[2]},
                                         {"M1+M2", m1_m2_steps, p[3]}, {"M2+SC", 100, p[4]}, {"M1+SC", 1000, p[5]},
                                         {"M1+M2+SC", 1000, p[6]}};
    };
    auto complex_cells = [](int m2_sc_steps, V p) {
      return std::vector<ExperimentCell>{
          {"M1+M2", 1000, p[0]}, {"M1+SC", 1000, p[1]}, {"M2+SC", m2_sc_steps, p[2]}, {"M1+M2+SC", 1000, p[3]}};
    };
    auto third_order_cells = [](int steps, V p) {
      return std::vector<ExperimentCell>{
          {"SC", 180, p[0]}, {"M1+SC", steps, p[1]}, {"M1+M2+SC", steps, p[2]}, {"M1+M2+M3+SC", steps, p[3]}};
    };
    return std::vector<PaperExperiment>{
        {"four_mode", "t1", DatasetSpec::gaussian_modes(4, 5.0, 14.0, 200), 800, 0.005, gaussian_cells(1000, {2.759, 11.089, 6.761, 0.941, 8.708, 0.820, 0.809})},
        {"five_mode", "t1", DatasetSpec::gaussian_modes(5, 6.0, 13.0, 200), 1000, 0.005, gaussian_cells(2000, {3.281, 6.554, 10.893, 1.097, 9.212, 1.067, 0.917})},
        {"eight_mode", "t1", DatasetSpec::gaussian_modes(8, 6.0, 13.0, 100), 1600, 0.005, gaussian_cells(2000, {3.321, 10.830, 7.646, 0.977, 4.801, 1.084, 0.778})},
        {"circle", "t2", DatasetSpec::circle(400), 800, 0.005, complex_cells(100, {0.642, 0.736, 7.233, 0.579})},
        {"irregular_ring", "t2", DatasetSpec::irregular_ring(600), 1000, 0.005, complex_cells(1000, {0.731, 0.743, 0.975, 0.678})},
        {"spiral", "t2", DatasetSpec::spiral(300), 1600, 0.005, complex_cells(100, {7.233, 3.289, 10.096, 1.840})},
        {"spin", "t2", DatasetSpec::spin(600, 1), 1600, 0.005, complex_cells(1000, {31.009, 12.055, 50.499, 10.066})},
        {"round_spin_2", "t3", DatasetSpec::spin(400, 2), 800, 0.005, third_order_cells(1000, {59.490, 17.866, 9.417, 7.440})},
        {"round_spin_3", "t3", DatasetSpec::spin(400, 3), 1000, 0.005, third_order_cells(2000, {50.981, 23.606, 13.085, 10.679})},
        {"dot_circle", "t3", DatasetSpec::dot_circle(600), 1600, 0.005, third_order_cells(10000, {89.974, 37.550, 30.679, 26.819})},
    };
  }();
  return experiments;
}

const PaperExperiment& find_experiment(std::string_view name) {
  for (const auto& e : list_paper_experiments()) {
    if (e.name == name) return e;
  }
  throw ConfigError("unknown experiment '" + std::string(name) + "'");
}

void write_cloud_csv(std::ostream& out, const std::vector<PointCloud>& clouds) {
  out << "x,y,label\n";
  char buf[96];
  for (const auto& c : clouds) {
    const std::string label(to_string(c.label));
    for (Eigen::Index i = 0; i < c.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,", c.points(0, i), c.points(1, i));
      out << buf << label << '\n';
    }
  }
}

std::vector<PointCloud> read_cloud_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "x,y,label") throw ConfigError("cloud csv: expected header 'x,y,label'");
  std::vector<PointCloud> clouds;
  std::vector<std::vector<Eigen::Vector2d>> buffers;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream row(line);
    std::string xs, ys, label;
    if (!std::getline(row, xs, ',') || !std::getline(row, ys, ',') || !std::getline(row, label)) {
      throw ConfigError("cloud csv: malformed line " + std::to_string(line_no));
    }
    const CloudLabel l = parse_cloud_label(label);
    std::size_t slot = clouds.size();
    for (std::size_t i = 0; i < clouds.size(); ++i) {
      if (clouds[i].label == l) slot = i;
    }
    if (slot == clouds.size()) {
      clouds.push_back(PointCloud{Eigen::Matrix2Xd(2, 0), l});
      buffers.emplace_back();
    }
    buffers[slot].emplace_back(std::stod(xs), std::stod(ys));
  }
  for (std::size_t i = 0; i < clouds.size(); ++i) {
    clouds[i].points.resize(2, static_cast<Eigen::Index>(buffers[i].size()));
    for (std::size_t j = 0; j < buffers[i].size(); ++j) clouds[i].points.col(static_cast<Eigen::Index>(j)) = buffers[i][j];
  }
  return clouds;
}

}  // namespace homo
