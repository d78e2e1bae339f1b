#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ipp/config.hpp"
#include "ipp/metrics.hpp"

namespace ipp {

/// Worker count: IPP_FLEET_THREADS when set (>= 1), otherwise hardware concurrency.
int worker_count();
/// Runs fn(0..n-1) on up to worker_count() threads; rethrows the first failure.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

/// Steps at which MetricRows are logged: 33%, 66% and 100% of the budget.
std::vector<int> checkpoint_steps(int budget);

struct MetricRow {
  int episode = 0;
  int step = 0;
  std::string planner;
  int agents = 0;
  double sor = 0.0;
  double nsor = 0.0;
  std::optional<double> avg_peak;  // empty when the field has no detected peak
  std::optional<double> max_peak;
  double mean_sigma = 0.0;
};

MetricRow measure(const FleetEnv& env, std::string_view planner, int episode, const std::vector<Cell>& peaks);

struct TraceRow {
  int episode = 0;
  int step = 0;
  int agent = 0;
  Cell cell;
  std::optional<Action> action;
  double reward = 0.0;
  double sor = 0.0;
};

struct EpisodeOutcome {
  std::uint64_t seed = 0;
  int episode = 0;  // index within the run
  std::uint64_t gt_seed = 0;
  std::vector<MetricRow> metrics;  // at checkpoint_steps
  std::vector<TraceRow> trace;
  double min_separation = 0.0;
  int null_actions = 0;
  std::vector<std::vector<Cell>> paths;  // per agent, including the start cell
};

/// Plays one episode of `planner` through safe_consensus.
EpisodeOutcome play_episode(FleetEnv& env, Planner& planner, std::uint64_t gt_seed, std::uint64_t placement_seed,
                            std::uint64_t planner_seed, int episode);

std::unique_ptr<Planner> make_planner(const ExperimentConfig& cfg);

struct EvalResult {
  std::vector<EpisodeOutcome> episodes;  // seed-major order
};

/// Runs cfg.episodes evaluation episodes per seed. Writes eval_summary.csv,
/// eval_metrics.csv, eval_trace.csv and run_config.txt to cfg.out when
/// `write` is set.
EvalResult run_eval(const ExperimentConfig& cfg, bool write = true);

struct BenchPoint {
  int mission = 0;
  int step = 0;
  int samples = 0;
  double sor_local = 0.0;
  double sor_global = 0.0;
  double seconds_local = 0.0;  // cumulative model update time
  double seconds_global = 0.0;
};

struct BenchResult {
  std::size_t local_gp_count = 0;
  std::vector<BenchPoint> points;  // mission-major
};

/// Random-wanderer missions feeding identical sample streams into the local
/// bank and one global GP. Writes gp_bench.csv (deterministic) and
/// gp_bench_timing.csv to cfg.out when `write` is set.
BenchResult gp_bench(const ExperimentConfig& cfg, bool write = true);

/// 8-bit level for a value in [0, 1] (clamped).
std::uint8_t gray_level(double v);
/// Writes a binary PGM. `pixels` is row-major H x W.
void write_pgm(const std::filesystem::path& path, int height, int width, std::span<const std::uint8_t> pixels);
/// Navigable-cell surface as an image (land = 0).
std::vector<std::uint8_t> surface_image(const NavMap& map, std::span<const double> values);
/// Land 0, water 64, visited 255.
std::vector<std::uint8_t> path_image(const NavMap& map, const std::vector<std::vector<Cell>>& paths);

struct Snapshot {
  NavMapPtr map;
  std::vector<double> gt, mu, sigma;
  std::vector<std::vector<Cell>> paths;
};

/// gt.pgm, mu.pgm, sigma.pgm, paths.pgm plus CSV (row,col,value) of each surface.
void render_snapshot(const Snapshot& snap, const std::filesystem::path& dir);
/// Plays the first evaluation episode of cfg and renders its final state.
Snapshot render(const ExperimentConfig& cfg);

/// Trains the Q-network, writes the checkpoint and train_log.csv.
TrainResult run_train(const ExperimentConfig& cfg);

/// Quick built-in oracle checks; prints one line per check. True when all pass.
bool run_selftest(std::ostream& os);

}  // namespace ipp
