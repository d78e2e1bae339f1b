#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "ipp/baselines.hpp"
#include "ipp/env.hpp"
#include "ipp/groundtruth.hpp"
#include "ipp/learner.hpp"

namespace ipp {

/// Everything a CLI run needs. Text form: one `key = value` per line, `#` starts a comment.
struct ExperimentConfig {
  std::filesystem::path map;  // empty: bundled lake
  FieldKind gt = FieldKind::WQP;
  int agents = 3;
  PlannerKind planner = PlannerKind::RWPP;
  RewardKind reward = RewardKind::DeltaMu;
  int episodes = 10;  // evaluation episodes per seed
  std::vector<std::uint64_t> seeds{0};
  double ell_min = 0.5;
  double ell_max = 10.0;
  std::filesystem::path out = "out";
  std::filesystem::path checkpoint;  // empty: <out>/ddql.ckpt

  int budget = kDefaultBudget;
  double safety_m = kDefaultSafetyM;
  double influence_m = kDefaultInfluenceM;
  double spacing_m = kDefaultSpacingM;
  FusionMode fusion = FusionMode::Full;
  /// PSO runs on one global GP unless this is false.
  bool pso_global = true;
  PSOConfig pso{};

  int train_episodes = 600;
  double lr = 1e-4;
  int batch = 64;
  double gamma = 0.99;
  double tau = 1e-4;
  double eps_min = 0.05;
  double eps_decay = 0.0;  // 0: reach eps_min at half of train_episodes
  std::size_t capacity = 50000;

  int bench_missions = 20;
};

ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);
/// Round-trips through parse_config.
std::string to_text(const ExperimentConfig& cfg);

NavMapPtr resolve_map(const ExperimentConfig& cfg);
EnvConfig make_env_config(const ExperimentConfig& cfg, const NavMapPtr& map);
TrainConfig make_train_config(const ExperimentConfig& cfg, const NavMapPtr& map);
std::filesystem::path checkpoint_path(const ExperimentConfig& cfg);

}  // namespace ipp
