#include "homo/runner.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <exception>
#include <limits>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "homo/checkpoint.hpp"
#include "homo/error.hpp"

namespace homo {

using nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// Typed access with key-path error messages.
class Reader {
 public:
  Reader(const ordered_json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(key_path(key) + ": " + e.what());
    }
  }

  const ordered_json* sub(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  std::string key_path(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.count(k)) throw ConfigError(key_path(k.c_str()) + ": unknown key");
    }
  }

 private:
  const ordered_json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <typename F>
auto rethrow_with_path(const std::string& path, F&& f) {
  try {
    return f();
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    if (msg.rfind(path, 0) == 0) throw;
    throw ConfigError(path + ": " + msg);
  }
}

std::string timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t tt = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  out << text;
}

std::string safe_label(std::string label) {
  std::replace(label.begin(), label.end(), '+', '_');
  return label;
}

}  // namespace

TrainSettings TrainRun::settings() const {
  TrainSettings s;
  s.dataset = dataset;
  s.schedule = schedule;
  s.loss = loss;
  s.architecture = architecture;
  s.learning_rate = learning_rate;
  s.steps = steps;
  s.batch_size = batch_size;
  s.seed = seed;
  return s;
}

TrainRun default_run() {
  TrainRun r;
  const PaperExperiment& e = find_experiment("eight_mode");
  r.dataset_name = e.name;
  r.dataset = e.dataset;
  r.batch_size = e.batch_size;
  r.learning_rate = e.learning_rate;
  r.steps = e.cell("M1+M2+SC").steps;
  return r;
}

TrainRun experiment_run(const PaperExperiment& e, const ExperimentCell& c, std::uint64_t seed,
                        const SamplerConfig& sampler) {
  TrainRun r = default_run();
  r.dataset_name = e.name;
  r.dataset = e.dataset;
  r.loss = LossConfig::from_label(c.loss_label);
  r.batch_size = e.batch_size;
  r.learning_rate = e.learning_rate;
  r.steps = c.steps;
  r.sampler = sampler;
  r.seed = seed;
  return r;
}

ordered_json dataset_to_json(const DatasetSpec& d) {
  ordered_json j;
  j["kind"] = std::string(to_string(d.kind));
  j["mode_count"] = d.mode_count;
  j["source_radius"] = d.source_radius;
  j["target_radius"] = d.target_radius;
  j["variance"] = d.variance;
  j["points_per_mode"] = d.points_per_mode;
  j["total_points"] = d.total_points;
  j["rounds"] = d.rounds;
  j["spiral_inner_radius"] = d.spiral_inner_radius;
  j["irregular_amplitude"] = d.irregular_amplitude;
  j["irregular_frequency"] = d.irregular_frequency;
  j["dot_points"] = d.dot_points;
  return j;
}

DatasetSpec dataset_from_json(const ordered_json& j, const std::string& path) {
  DatasetSpec d;
  Reader r(j, path);
  std::string kind = std::string(to_string(d.kind));
  r.get("kind", kind);
  d.kind = rethrow_with_path(r.key_path("kind"), [&] { return parse_dataset_kind(kind); });
  r.get("mode_count", d.mode_count);
  r.get("source_radius", d.source_radius);
  r.get("target_radius", d.target_radius);
  r.get("variance", d.variance);
  r.get("points_per_mode", d.points_per_mode);
  r.get("total_points", d.total_points);
  r.get("rounds", d.rounds);
  r.get("spiral_inner_radius", d.spiral_inner_radius);
  r.get("irregular_amplitude", d.irregular_amplitude);
  r.get("irregular_frequency", d.irregular_frequency);
  r.get("dot_points", d.dot_points);
  r.finish();
  rethrow_with_path(path, [&] {
    validate(d);
    return 0;
  });
  return d;
}

ordered_json run_to_json(const TrainRun& run) {
  ordered_json j;
  if (run.dataset_name.empty()) {
    j["dataset"] = dataset_to_json(run.dataset);
  } else {
    j["dataset"] = run.dataset_name;
  }
  ordered_json schedule;
  schedule["kind"] = std::string(to_string(run.schedule.kind));
  schedule["a"] = run.schedule.a;
  schedule["b"] = run.schedule.b;
  j["schedule"] = schedule;
  ordered_json loss;
  loss["terms"] = run.loss.label();
  loss["true_target_fraction"] = run.loss.true_target_fraction;
  loss["step_set"] = run.loss.step_set;
  loss["reduction"] = std::string(to_string(run.loss.reduction));
  loss["chain_gradients"] = run.loss.chain_gradients;
  j["loss"] = loss;
  ordered_json arch;
  arch["hidden"] = run.architecture.hidden;
  arch["activation"] = std::string(nn::to_string(run.architecture.activation));
  j["architecture"] = arch;
  ordered_json opt;
  opt["learning_rate"] = run.learning_rate;
  opt["steps"] = run.steps;
  opt["batch_size"] = run.batch_size;
  j["optimizer"] = opt;
  ordered_json sampler;
  if (run.sampler.order == 0) {
    sampler["order"] = "auto";
  } else {
    sampler["order"] = run.sampler.order;
  }
  sampler["steps"] = run.sampler.steps;
  sampler["delta_t_floor"] = run.sampler.delta_t_floor;
  j["sampler"] = sampler;
  j["seed"] = run.seed;
  j["out"] = run.out;
  j["write_trajectory"] = run.write_trajectory;
  if (run.sweep) {
    ordered_json sweep;
    sweep["loss_configs"] = run.sweep->loss_configs;
    sweep["seeds"] = run.sweep->seeds;
    j["sweep"] = sweep;
  }
  return j;
}

TrainRun run_from_json(const ordered_json& j) {
  TrainRun run = default_run();
  Reader r(j, "");

  if (const auto* ds = r.sub("dataset")) {
    if (ds->is_string()) {
      const auto name = ds->get<std::string>();
      const PaperExperiment& e = rethrow_with_path("dataset", [&]() -> const PaperExperiment& {
        return find_experiment(name);
      });
      run.dataset_name = e.name;
      run.dataset = e.dataset;
    } else {
      run.dataset_name.clear();
      run.dataset = dataset_from_json(*ds, "dataset");
    }
  }

  if (const auto* s = r.sub("schedule")) {
    Reader sr(*s, "schedule");
    std::string kind = std::string(to_string(run.schedule.kind));
    sr.get("kind", kind);
    run.schedule.kind = rethrow_with_path("schedule.kind", [&] { return parse_schedule_kind(kind); });
    sr.get("a", run.schedule.a);
    sr.get("b", run.schedule.b);
    sr.finish();
  }

  if (const auto* l = r.sub("loss")) {
    Reader lr(*l, "loss");
    std::string terms = run.loss.label();
    lr.get("terms", terms);
    LossConfig cfg = rethrow_with_path("loss.terms", [&] { return LossConfig::from_label(terms); });
    cfg.true_target_fraction = run.loss.true_target_fraction;
    cfg.step_set = run.loss.step_set;
    cfg.reduction = run.loss.reduction;
    cfg.chain_gradients = run.loss.chain_gradients;
    lr.get("true_target_fraction", cfg.true_target_fraction);
    lr.get("step_set", cfg.step_set);
    std::string reduction = std::string(to_string(cfg.reduction));
    lr.get("reduction", reduction);
    cfg.reduction = rethrow_with_path("loss.reduction", [&] { return parse_reduction(reduction); });
    lr.get("chain_gradients", cfg.chain_gradients);
    lr.finish();
    rethrow_with_path("loss", [&] {
      validate(cfg);
      return 0;
    });
    run.loss = cfg;
  }

  if (const auto* a = r.sub("architecture")) {
    Reader ar(*a, "architecture");
    ar.get("hidden", run.architecture.hidden);
    std::string act = std::string(nn::to_string(run.architecture.activation));
    ar.get("activation", act);
    run.architecture.activation =
        rethrow_with_path("architecture.activation", [&] { return nn::parse_activation(act); });
    ar.finish();
    if (run.architecture.hidden.empty()) throw ConfigError("architecture.hidden: need at least one layer");
    for (auto h : run.architecture.hidden) {
      if (h <= 0) throw ConfigError("architecture.hidden: widths must be positive");
    }
  }

  if (const auto* o = r.sub("optimizer")) {
    Reader orr(*o, "optimizer");
    orr.get("learning_rate", run.learning_rate);
    orr.get("steps", run.steps);
    orr.get("batch_size", run.batch_size);
    orr.finish();
    if (!(run.learning_rate > 0.0)) throw ConfigError("optimizer.learning_rate: must be > 0");
    if (run.steps < 0) throw ConfigError("optimizer.steps: must be >= 0");
    if (run.batch_size <= 0) throw ConfigError("optimizer.batch_size: must be > 0");
  }

  if (const auto* s = r.sub("sampler")) {
    Reader sr(*s, "sampler");
    if (const auto* order = sr.sub("order")) {
      if (order->is_string() && order->get<std::string>() == "auto") {
        run.sampler.order = 0;
      } else if (order->is_number_integer() && order->get<int>() >= 1 && order->get<int>() <= 3) {
        run.sampler.order = order->get<int>();
      } else {
        throw ConfigError("sampler.order: expected 1, 2, 3 or \"auto\"");
      }
    }
    sr.get("steps", run.sampler.steps);
    sr.get("delta_t_floor", run.sampler.delta_t_floor);
    sr.finish();
    if (run.sampler.steps < 1) throw ConfigError("sampler.steps: must be >= 1");
    if (!(run.sampler.delta_t_floor > 0.0 && run.sampler.delta_t_floor <= 1.0)) {
      throw ConfigError("sampler.delta_t_floor: must lie in (0, 1]");
    }
  }

  r.get("seed", run.seed);
  r.get("out", run.out);
  r.get("write_trajectory", run.write_trajectory);

  if (const auto* s = r.sub("sweep")) {
    Reader sr(*s, "sweep");
    SweepSpec sweep;
    sr.get("loss_configs", sweep.loss_configs);
    sr.get("seeds", sweep.seeds);
    sr.finish();
    if (sweep.loss_configs.empty()) throw ConfigError("sweep.loss_configs: must not be empty");
    if (sweep.seeds.empty()) throw ConfigError("sweep.seeds: must not be empty");
    for (auto& label : sweep.loss_configs) {
      label = rethrow_with_path("sweep.loss_configs", [&] { return LossConfig::from_label(label).label(); });
    }
    run.sweep = std::move(sweep);
  }
  r.finish();
  return run;
}

TrainRun load_run(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config '" + path.string() + "'");
  ordered_json j;
  try {
    j = ordered_json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config '" + path.string() + "': " + e.what());
  }
  return run_from_json(j);
}

ordered_json report_to_json(const MetricReport& m) {
  ordered_json j;
  j["dataset"] = m.dataset;
  j["loss_config"] = m.loss_config;
  j["euclidean_distance"] = m.euclidean_distance;
  j["seed"] = m.seed;
  j["param_count"] = m.param_count;
  j["flop_estimate"] = m.flop_estimate;
  return j;
}

DatasetSample evaluation_clouds(const DatasetSpec& spec, std::uint64_t seed) {
  SeededRng rng = SeededRng(seed).split(static_cast<std::uint64_t>(RunStream::evaluation));
  return sample_dataset(spec, rng);
}

namespace {

struct CellOutputs {
  CellResult result;
  std::optional<TrainResult> trained;
  DatasetSample eval;
  std::vector<Eigen::Matrix2Xd> trajectory;
};

CellOutputs compute_cell(const TrainRun& run) {
  CellOutputs o;
  MetricReport& rep = o.result.report;
  rep.dataset = run.dataset_name.empty() ? std::string(to_string(run.dataset.kind)) : run.dataset_name;
  rep.loss_config = run.loss.label();
  rep.seed = run.seed;
  rep.param_count = count_params(run.loss, run.architecture);
  rep.flop_estimate = estimate_flops(run.loss, run.architecture, run.batch_size);
  o.eval = evaluation_clouds(run.dataset, run.seed);
  try {
    o.trained = train(run.settings());
  } catch (const DivergenceError& e) {
    o.result.failed = true;
    o.result.failure = e.what();
    o.trained = e.partial();
    o.result.history = e.partial().history;
    rep.euclidean_distance = std::numeric_limits<double>::infinity();
    return o;
  }
  o.result.history = o.trained->history;
  SamplerConfig sc = run.sampler;
  if (sc.order == 0) sc.order = o.trained->models.order();
  o.trajectory = sample(o.trained->models, sc, o.eval.source.points);
  const PointCloud generated{o.trajectory.back(), CloudLabel::generated};
  // A sampler that blew up scores as infinitely far from the target.
  rep.euclidean_distance = generated.points.allFinite() ? euclidean_distance_loss(generated, o.eval.target)
                                                        : std::numeric_limits<double>::infinity();
  return o;
}

}  // namespace

CellResult evaluate_cell(const TrainRun& run) { return compute_cell(run).result; }

CellResult run_cell(const TrainRun& run, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  std::ofstream log(out_dir / "run.log", std::ios::app);
  log << timestamp() << " start " << run.loss.label() << " seed " << run.seed << '\n';

  CellOutputs o = compute_cell(run);
  const auto& models = o.trained->models;
  const long steps_done = static_cast<long>(o.result.history.size());
  save_fields((out_dir / "model.json").string(), models, run.loss.label(), run.seed, steps_done);
  {
    std::ofstream out(out_dir / "loss.csv", std::ios::binary);
    write_loss_csv(out, o.result.history);
  }
  if (o.result.failed) {
    ordered_json f;
    f["step"] = steps_done;
    f["message"] = o.result.failure;
    write_text(out_dir / "failure.json", f.dump(2) + "\n");
    log << timestamp() << " failed: " << o.result.failure << '\n';
    return o.result;
  }

  const PointCloud generated{o.trajectory.back(), CloudLabel::generated};
  {
    std::ofstream out(out_dir / "generated.csv", std::ios::binary);
    write_cloud_csv(out, {generated});
  }
  if (run.write_trajectory) {
    std::ofstream out(out_dir / "traj.csv", std::ios::binary);
    write_trajectory_csv(out, o.trajectory);
  }
  write_text(out_dir / "metrics.json", report_to_json(o.result.report).dump(2) + "\n");
  emit_scatter_svg({o.eval.source, o.eval.target, generated}, out_dir / "scatter.svg");
  log << timestamp() << " done euclidean_distance=" << fmt("%.6g", o.result.report.euclidean_distance) << '\n';
  return o.result;
}

std::size_t worker_count() {
  if (const char* env = std::getenv("HOMOFLOW_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
    throw ConfigError("HOMOFLOW_THREADS must be a positive integer, got '" + std::string(env) + "'");
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min(worker_count(), count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

double median(std::vector<double> v) {
  if (v.empty()) throw ConfigError("median of an empty set");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::vector<AggregateRow> aggregate(const std::vector<CellResult>& cells) {
  std::vector<AggregateRow> rows;
  for (const auto& c : cells) {
    auto it = std::find_if(rows.begin(), rows.end(),
                           [&](const AggregateRow& r) { return r.loss_config == c.report.loss_config; });
    if (it == rows.end()) {
      rows.push_back({c.report.loss_config, {}, 0.0});
      it = rows.end() - 1;
    }
    it->per_seed.push_back(c.report.euclidean_distance);
  }
  for (auto& r : rows) r.median = median(r.per_seed);
  return rows;
}

namespace {

std::string render_aggregate(const std::string& dataset, const std::vector<AggregateRow>& rows) {
  std::ostringstream os;
  os << "dataset: " << dataset << "\n";
  char line[256];
  std::snprintf(line, sizeof line, "%-14s %12s   %s\n", "loss", "median", "per-seed");
  os << line;
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%-14s %12.4f  ", r.loss_config.c_str(), r.median);
    os << line;
    for (double v : r.per_seed) os << ' ' << fmt("%.4f", v);
    os << '\n';
  }
  return os.str();
}

ordered_json aggregate_json(const std::string& dataset, const std::vector<AggregateRow>& rows) {
  ordered_json j;
  j["dataset"] = dataset;
  ordered_json arr = ordered_json::array();
  for (const auto& r : rows) {
    ordered_json o;
    o["loss_config"] = r.loss_config;
    o["median"] = r.median;
    o["per_seed"] = r.per_seed;
    arr.push_back(o);
  }
  j["rows"] = arr;
  return j;
}

}  // namespace

std::vector<CellResult> run_sweep(const TrainRun& run) {
  if (!run.sweep) throw ConfigError("run_sweep: config has no sweep section");
  std::vector<TrainRun> cells;
  for (const auto& label : run.sweep->loss_configs) {
    for (auto seed : run.sweep->seeds) {
      TrainRun c = run;
      c.sweep.reset();
      const LossConfig base = run.loss;
      c.loss = LossConfig::from_label(label);
      c.loss.true_target_fraction = base.true_target_fraction;
      c.loss.step_set = base.step_set;
      c.loss.reduction = base.reduction;
      c.loss.chain_gradients = base.chain_gradients;
      c.seed = seed;
      c.out = (fs::path(run.out) / safe_label(label) / ("seed" + std::to_string(seed))).string();
      cells.push_back(std::move(c));
    }
  }
  std::vector<CellResult> results(cells.size());
  parallel_for(cells.size(), [&](std::size_t i) { results[i] = run_cell(cells[i], cells[i].out); });
  const auto rows = aggregate(results);
  const std::string name = results.front().report.dataset;
  write_text(fs::path(run.out) / "aggregate.json", aggregate_json(name, rows).dump(2) + "\n");
  write_text(fs::path(run.out) / "aggregate.txt", render_aggregate(name, rows));
  return results;
}

std::string scatter_svg(const std::vector<PointCloud>& clouds) {
  if (clouds.empty()) throw ConfigError("emit_scatter_svg: no clouds to draw");
  double xmin = INFINITY, xmax = -INFINITY, ymin = INFINITY, ymax = -INFINITY;
  for (const auto& c : clouds) {
    for (Eigen::Index i = 0; i < c.size(); ++i) {
      const double x = c.points(0, i), y = c.points(1, i);
      if (!std::isfinite(x) || !std::isfinite(y)) continue;
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
  }
  if (!std::isfinite(xmin)) xmin = xmax = ymin = ymax = 0.0;
  const double span = std::max({xmax - xmin, ymax - ymin, 1e-9});
  const double margin = 0.05 * span;
  const double cx = 0.5 * (xmin + xmax), cy = 0.5 * (ymin + ymax);
  const double half = 0.5 * span + margin;
  constexpr double kSize = 640.0;
  const double scale = kSize / (2.0 * half);

  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
     << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"640\" viewBox=\"0 0 640 640\">\n"
     << "<rect width=\"640\" height=\"640\" fill=\"#FFFFFF\"/>\n";
  for (const auto& c : clouds) {
    const char* color = c.label == CloudLabel::source ? "#8B4513" : c.label == CloudLabel::target ? "#4B0082" : "#FFC0CB";
    os << "<g fill=\"" << color << "\" class=\"" << to_string(c.label) << "\">\n";
    for (Eigen::Index i = 0; i < c.size(); ++i) {
      const double x = c.points(0, i), y = c.points(1, i);
      if (!std::isfinite(x) || !std::isfinite(y)) continue;
      const double px = (x - (cx - half)) * scale;
      const double py = kSize - (y - (cy - half)) * scale;
      os << "<circle cx=\"" << fmt("%.2f", px) << "\" cy=\"" << fmt("%.2f", py) << "\" r=\"2\"/>\n";
    }
    os << "</g>\n";
  }
  os << "</svg>\n";
  return os.str();
}

void emit_scatter_svg(const std::vector<PointCloud>& clouds, const fs::path& path) {
  write_text(path, scatter_svg(clouds));
}

void write_loss_csv(std::ostream& out, const std::vector<LossBreakdown>& history) {
  out << "step,total,m1,m2,m3,sc\n";
  char line[256];
  for (std::size_t i = 0; i < history.size(); ++i) {
    const auto& h = history[i];
    std::snprintf(line, sizeof line, "%zu,%.17g,%.17g,%.17g,%.17g,%.17g\n", i, h.total, h.m1, h.m2, h.m3, h.sc);
    out << line;
  }
}

void write_trajectory_csv(std::ostream& out, const std::vector<Eigen::Matrix2Xd>& states) {
  out << "point_id,step,t,x,y\n";
  if (states.empty()) return;
  const std::size_t m = states.size() - 1;
  char line[160];
  for (Eigen::Index p = 0; p < states.front().cols(); ++p) {
    for (std::size_t s = 0; s < states.size(); ++s) {
      const double t = m == 0 ? 0.0 : static_cast<double>(s) / static_cast<double>(m);
      std::snprintf(line, sizeof line, "%ld,%zu,%.17g,%.17g,%.17g\n", static_cast<long>(p), s, t, states[s](0, p),
                    states[s](1, p));
      out << line;
    }
  }
}

namespace {

// Ranks best among the trio {SC, M1+SC, M1+M2+SC}, restricted to the
// configurations the table has.
const std::vector<std::string> kTrio{"SC", "M1+SC", "M1+M2+SC"};

}  // namespace

std::string render_reproduce_table(const std::string& table, const std::vector<ReproduceCell>& cells) {
  std::vector<std::string> datasets, losses;
  for (const auto& c : cells) {
    if (std::find(datasets.begin(), datasets.end(), c.dataset) == datasets.end()) datasets.push_back(c.dataset);
    if (std::find(losses.begin(), losses.end(), c.loss_config) == losses.end()) losses.push_back(c.loss_config);
  }
  auto find = [&](const std::string& d, const std::string& l) -> const ReproduceCell* {
    for (const auto& c : cells) {
      if (c.dataset == d && c.loss_config == l) return &c;
    }
    return nullptr;
  };

  std::ostringstream os;
  char buf[128];
  os << "table " << table << ": median euclidean distance (ours) / paper\n";
  std::snprintf(buf, sizeof buf, "%-14s", "loss");
  os << buf;
  for (const auto& d : datasets) {
    std::snprintf(buf, sizeof buf, " | %-22s", d.c_str());
    os << buf;
  }
  os << '\n';
  for (const auto& l : losses) {
    std::snprintf(buf, sizeof buf, "%-14s", l.c_str());
    os << buf;
    for (const auto& d : datasets) {
      const ReproduceCell* c = find(d, l);
      if (c) {
        std::snprintf(buf, sizeof buf, " | %10.4f / %-9.3f", c->ours.median, c->paper_metric);
      } else {
        std::snprintf(buf, sizeof buf, " | %-22s", "-");
      }
      os << buf;
    }
    os << '\n';
  }

  os << "\nordering summary\n";
  for (const auto& d : datasets) {
    std::vector<const ReproduceCell*> present;
    for (const auto& l : losses) {
      if (const auto* c = find(d, l)) present.push_back(c);
    }
    std::size_t agree = 0, pairs = 0;
    for (std::size_t i = 0; i < present.size(); ++i) {
      for (std::size_t k = i + 1; k < present.size(); ++k) {
        ++pairs;
        const bool ours = present[i]->ours.median < present[k]->ours.median;
        const bool paper = present[i]->paper_metric < present[k]->paper_metric;
        if (ours == paper) ++agree;
      }
    }
    std::vector<const ReproduceCell*> trio;
    for (const auto& l : kTrio) {
      if (const auto* c = find(d, l)) trio.push_back(c);
    }
    os << "  " << d << ": pairwise order agreement " << agree << "/" << pairs;
    const auto* ours_best = find(d, "M1+M2+SC");
    if (ours_best && trio.size() > 1) {
      const bool best = std::all_of(trio.begin(), trio.end(), [&](const ReproduceCell* c) {
        return c == ours_best || ours_best->ours.median < c->ours.median;
      });
      os << "; M1+M2+SC best among {";
      for (std::size_t i = 0; i < trio.size(); ++i) os << (i ? ", " : "") << trio[i]->loss_config;
      os << "}: " << (best ? "yes" : "no");
    }
    os << '\n';
  }
  return os.str();
}

ReproduceResult reproduce(const ReproduceOptions& options) {
  if (options.table != "t1" && options.table != "t2" && options.table != "t3") {
    throw ConfigError("reproduce: table must be t1, t2 or t3, got '" + options.table + "'");
  }
  if (options.seeds.empty()) throw ConfigError("reproduce: need at least one seed");
  struct Job {
    TrainRun run;
    std::size_t cell;
  };
  std::vector<ReproduceCell> cells;
  std::vector<Job> jobs;
  for (const auto& e : list_paper_experiments()) {
    if (e.table != options.table) continue;
    for (const auto& c : e.cells) {
      const std::size_t index = cells.size();
      cells.push_back({e.name, c.loss_label, c.paper_metric, {c.loss_label, {}, 0.0}});
      for (auto seed : options.seeds) {
        TrainRun r = experiment_run(e, c, seed, options.sampler);
        if (options.steps_override) r.steps = *options.steps_override;
        r.out = (fs::path(options.out) / options.table / e.name / safe_label(c.loss_label) /
                 ("seed" + std::to_string(seed)))
                    .string();
        jobs.push_back({std::move(r), index});
      }
    }
  }
  std::vector<CellResult> results(jobs.size());
  parallel_for(jobs.size(), [&](std::size_t i) { results[i] = run_cell(jobs[i].run, jobs[i].run.out); });
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    cells[jobs[i].cell].ours.per_seed.push_back(results[i].report.euclidean_distance);
  }
  for (auto& c : cells) c.ours.median = median(c.ours.per_seed);

  ReproduceResult out{options.table, cells, render_reproduce_table(options.table, cells)};
  fs::create_directories(fs::path(options.out) / options.table);
  write_text(fs::path(options.out) / options.table / "table.txt", out.rendered);
  ordered_json j = ordered_json::array();
  for (const auto& c : cells) {
    ordered_json o;
    o["dataset"] = c.dataset;
    o["loss_config"] = c.loss_config;
    o["paper"] = c.paper_metric;
    o["median"] = c.ours.median;
    o["per_seed"] = c.ours.per_seed;
    j.push_back(o);
  }
  write_text(fs::path(options.out) / options.table / "table.json", j.dump(2) + "\n");
  return out;
}

}  // namespace homo
