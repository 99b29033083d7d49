#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "homo/datasets.hpp"
#include "homo/metrics.hpp"
#include "homo/sample.hpp"
#include "homo/train.hpp"

namespace homo {

// Sweep over loss configurations and seeds; every other field comes from the
// enclosing run.
struct SweepSpec {
  std::vector<std::string> loss_configs;
  std::vector<std::uint64_t> seeds;
};

// One experiment run as described by a JSON config file. `sampler.order` 0
// means "highest order the trained model has".
struct TrainRun {
  std::string dataset_name;  // paper experiment name, or empty for an inline spec
  DatasetSpec dataset = DatasetSpec::gaussian_modes(8, 6.0, 13.0, 100);
  Schedule schedule = Schedule::vp();
  LossConfig loss = LossConfig::from_label("M1+M2+SC");
  Architecture architecture;
  double learning_rate = 0.005;
  int steps = 1000;
  Eigen::Index batch_size = 1600;
  SamplerConfig sampler{0, 128, kDeltaTFloor};
  std::uint64_t seed = 0;
  std::string out = "runs/default";
  bool write_trajectory = false;
  std::optional<SweepSpec> sweep;

  TrainSettings settings() const;
};

TrainRun default_run();

// One cell of a paper table at the experiment's batch size, learning rate and
// step count.
TrainRun experiment_run(const PaperExperiment& e, const ExperimentCell& c, std::uint64_t seed,
                        const SamplerConfig& sampler);

// Canonical JSON form; run_from_json(run_to_json(r)) reproduces r and
// run_to_json is a fixed point of that round trip.
nlohmann::ordered_json run_to_json(const TrainRun& run);

// Missing keys take the defaults of default_run(). Unknown keys and type
// mismatches raise ConfigError naming the key path (e.g. "loss.terms").
TrainRun run_from_json(const nlohmann::ordered_json& j);
TrainRun load_run(const std::filesystem::path& path);

nlohmann::ordered_json dataset_to_json(const DatasetSpec& spec);
DatasetSpec dataset_from_json(const nlohmann::ordered_json& j, const std::string& path = "dataset");

nlohmann::ordered_json report_to_json(const MetricReport& report);

// Result of a single (config, seed) cell.
struct CellResult {
  MetricReport report;
  std::vector<LossBreakdown> history;
  bool failed = false;
  std::string failure;
};

// Points drawn for evaluation: the source side seeds the sampler, the target
// side is the reference cloud for the metric. Both come from the evaluation
// stream of `seed`, independent of the training clouds.
DatasetSample evaluation_clouds(const DatasetSpec& spec, std::uint64_t seed);

// Trains, samples and evaluates one cell and writes into `out_dir`:
//   model.json, loss.csv, generated.csv, metrics.json, scatter.svg, run.log
//   (+ traj.csv when requested, failure.json on divergence).
// Only run.log carries timestamps. Divergence is reported in the result rather
// than thrown.
CellResult run_cell(const TrainRun& run, const std::filesystem::path& out_dir);

// Same, without touching the filesystem.
CellResult evaluate_cell(const TrainRun& run);

// Runs fn(0..count-1) on a bounded pool. Pool size: HOMOFLOW_THREADS when set,
// otherwise the hardware concurrency.
std::size_t worker_count();
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn);

struct AggregateRow {
  std::string loss_config;
  std::vector<double> per_seed;
  double median = 0.0;
};

double median(std::vector<double> values);
std::vector<AggregateRow> aggregate(const std::vector<CellResult>& cells);

// Expands a sweep into cells, runs them on the pool into
// out/<label>/seed<k>/ and writes aggregate.json and aggregate.txt into out.
std::vector<CellResult> run_sweep(const TrainRun& run);

// emit_scatter_svg draws every cloud, coloured by label, into a fixed 640x640
// viewport scaled to the joint bounds with a 5% margin.
void emit_scatter_svg(const std::vector<PointCloud>& clouds, const std::filesystem::path& path);
std::string scatter_svg(const std::vector<PointCloud>& clouds);

void write_loss_csv(std::ostream& out, const std::vector<LossBreakdown>& history);
void write_trajectory_csv(std::ostream& out, const std::vector<Eigen::Matrix2Xd>& states);

struct ReproduceOptions {
  std::string table;  // t1, t2, t3
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  std::optional<int> steps_override;  // desk-scale runs
  SamplerConfig sampler{0, 128, kDeltaTFloor};
  std::string out = "runs/reproduce";
};

struct ReproduceCell {
  std::string dataset;
  std::string loss_config;
  double paper_metric = 0.0;
  AggregateRow ours;
};

struct ReproduceResult {
  std::string table;
  std::vector<ReproduceCell> cells;
  std::string rendered;
};

ReproduceResult reproduce(const ReproduceOptions& options);

// Plain-text table: one row per loss config, one column per dataset, our
// median next to the paper value, followed by the ordering summary.
std::string render_reproduce_table(const std::string& table, const std::vector<ReproduceCell>& cells);

}  // namespace homo
