#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"

#include "homo/checkpoint.hpp"
#include "homo/error.hpp"
#include "homo/metrics.hpp"
#include "homo/runner.hpp"

namespace fs = std::filesystem;
using namespace homo;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> steps;
  std::optional<int> order;

  void add_to(CLI::App* app, const char* steps_help) {
    app->add_option("--seed", seed, "Run seed");
    app->add_option("--out", out, "Output directory");
    app->add_option("--steps", steps, steps_help)->check(CLI::PositiveNumber);
    app->add_option("--order", order, "Sampler order")->check(CLI::IsMember({1, 2, 3}));
  }
};

TrainRun load_or_default(const std::string& path) { return path.empty() ? default_run() : load_run(path); }

std::vector<PointCloud> read_clouds(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read '" + path + "'");
  return read_cloud_csv(in);
}

// Points of the requested label, or every point when the file has none.
PointCloud pick(const std::vector<PointCloud>& clouds, CloudLabel label) {
  for (const auto& c : clouds) {
    if (c.label == label) return c;
  }
  PointCloud all{Eigen::Matrix2Xd(2, 0), label};
  for (const auto& c : clouds) {
    Eigen::Matrix2Xd joined(2, all.size() + c.size());
    joined << all.points, c.points;
    all.points = std::move(joined);
  }
  return all;
}

int cmd_train(const std::string& config, const Overrides& o) {
  TrainRun run = load_run(config);
  if (o.steps) run.steps = *o.steps;
  if (o.order) run.sampler.order = *o.order;
  if (o.out) run.out = *o.out;
  if (run.sweep) {
    if (o.seed) run.sweep->seeds = {*o.seed};
    const auto cells = run_sweep(run);
    std::ifstream agg(fs::path(run.out) / "aggregate.txt");
    std::cout << agg.rdbuf();
    for (const auto& c : cells) {
      if (c.failed) return kExitNumeric;
    }
    return 0;
  }
  if (o.seed) run.seed = *o.seed;
  const CellResult r = run_cell(run, run.out);
  if (r.failed) {
    std::cerr << "error: " << r.failure << "\n";
    return kExitNumeric;
  }
  std::cout << report_to_json(r.report).dump(2) << "\n";
  return 0;
}

int cmd_sample(const std::string& config, const std::string& model_path, const Overrides& o, bool trajectory) {
  TrainRun run = load_or_default(config);
  if (o.seed) run.seed = *o.seed;
  if (o.steps) run.sampler.steps = *o.steps;
  if (o.order) run.sampler.order = *o.order;
  const fs::path out = o.out ? fs::path(*o.out) : fs::path(run.out);
  const FieldModels models = load_fields(model_path);
  SamplerConfig sc = run.sampler;
  if (sc.order == 0) sc.order = models.order();
  const DatasetSample clouds = evaluation_clouds(run.dataset, run.seed);
  const auto states = sample(models, sc, clouds.source.points);
  fs::create_directories(out);
  {
    std::ofstream f(out / "generated.csv", std::ios::binary);
    write_cloud_csv(f, {PointCloud{states.back(), CloudLabel::generated}});
  }
  if (trajectory) {
    std::ofstream f(out / "traj.csv", std::ios::binary);
    write_trajectory_csv(f, states);
  }
  std::cout << "wrote " << states.back().cols() << " points to " << (out / "generated.csv").string() << "\n";
  return 0;
}

int cmd_eval(const std::string& generated_path, const std::string& target_path) {
  const PointCloud g = pick(read_clouds(generated_path), CloudLabel::generated);
  const PointCloud t = pick(read_clouds(target_path), CloudLabel::target);
  nlohmann::ordered_json j;
  j["euclidean_distance"] = euclidean_distance_loss(g, t);
  j["generated_points"] = g.size();
  j["target_points"] = t.size();
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_reproduce(const std::string& table, int seeds, const Overrides& o, std::optional<int> sampler_steps) {
  ReproduceOptions opt;
  opt.table = table;
  opt.seeds.clear();
  const std::uint64_t first = o.seed.value_or(0);
  for (int i = 0; i < seeds; ++i) opt.seeds.push_back(first + static_cast<std::uint64_t>(i));
  opt.steps_override = o.steps;
  if (o.order) opt.sampler.order = *o.order;
  if (sampler_steps) opt.sampler.steps = *sampler_steps;
  if (o.out) opt.out = *o.out;
  std::cout << reproduce(opt).rendered;
  return 0;
}

int cmd_count_params(const std::string& label, const std::vector<Eigen::Index>& hidden, long batch) {
  const LossConfig cfg = LossConfig::from_label(label);
  Architecture arch;
  arch.hidden = hidden;
  nlohmann::ordered_json j;
  j["loss_config"] = cfg.label();
  j["param_count"] = count_params(cfg, arch);
  j["flop_estimate"] = estimate_flops(cfg, arch, batch);
  j["batch"] = batch;
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_print_config(const std::string& config, const Overrides& o) {
  TrainRun run = load_or_default(config);
  if (o.seed) run.seed = *o.seed;
  if (o.out) run.out = *o.out;
  if (o.steps) run.steps = *o.steps;
  if (o.order) run.sampler.order = *o.order;
  std::cout << run_to_json(run).dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"homoflow: high-order flow matching on 2-D toy distributions"};
  app.require_subcommand(1);

  std::string config, model_path, generated_path, target_path, table, label = "M1";
  bool trajectory = false;
  int seeds = 5;
  long batch = 1;
  std::optional<int> sampler_steps;
  std::vector<Eigen::Index> hidden{100, 100};
  Overrides train_o, sample_o, repro_o, print_o;

  auto* train = app.add_subcommand("train", "Train, sample and evaluate one config (or its sweep)");
  train->add_option("config", config, "Run config (JSON)")->required()->check(CLI::ExistingFile);
  train_o.add_to(train, "Training steps");

  auto* samp = app.add_subcommand("sample", "Sample a trained checkpoint");
  samp->add_option("--model", model_path, "model.json")->required()->check(CLI::ExistingFile);
  samp->add_option("--config", config, "Run config for dataset and sampler settings")->check(CLI::ExistingFile);
  samp->add_flag("--trajectory", trajectory, "Also write traj.csv");
  sample_o.add_to(samp, "Sampler steps M");

  auto* eval = app.add_subcommand("eval", "Euclidean distance between two cloud CSV files");
  eval->add_option("generated", generated_path)->required()->check(CLI::ExistingFile);
  eval->add_option("target", target_path)->required()->check(CLI::ExistingFile);

  auto* repro = app.add_subcommand("reproduce", "Run a paper table grid and compare orderings");
  repro->add_option("table", table, "t1, t2 or t3")->required()->check(CLI::IsMember({"t1", "t2", "t3"}));
  repro->add_option("--seeds", seeds, "Number of seeds (starting at --seed)")->check(CLI::PositiveNumber);
  repro->add_option("--sampler-steps", sampler_steps, "Sampler steps M")->check(CLI::PositiveNumber);
  repro_o.add_to(repro, "Override every cell's training steps");

  auto* count = app.add_subcommand("count-params", "Parameter count and FLOP estimate of a loss config");
  count->add_option("loss", label, "Loss label such as M1+M2+SC");
  count->add_option("--hidden", hidden, "Hidden widths");
  count->add_option("--batch", batch, "Batch size for the FLOP estimate")->check(CLI::PositiveNumber);

  auto* print = app.add_subcommand("print-config", "Print the fully resolved config (defaults when none given)");
  print->add_option("config", config, "Run config (JSON)")->check(CLI::ExistingFile);
  print_o.add_to(print, "Training steps");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*train) return cmd_train(config, train_o);
    if (*samp) return cmd_sample(config, model_path, sample_o, trajectory);
    if (*eval) return cmd_eval(generated_path, target_path);
    if (*repro) return cmd_reproduce(table, seeds, repro_o, sampler_steps);
    if (*count) return cmd_count_params(label, hidden, batch);
    if (*print) return cmd_print_config(config, print_o);
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const SingularityError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const Error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return 0;
}
