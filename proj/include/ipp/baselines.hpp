#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "ipp/learner.hpp"

namespace ipp {

/// A fleet policy producing per-agent action preferences for safe_consensus.
class Planner {
 public:
  virtual ~Planner() = default;
  virtual std::string_view name() const = 0;
  /// Called right after env.reset().
  virtual void begin(const FleetEnv& env, std::uint64_t seed) = 0;
  virtual std::vector<AgentScores> scores(const FleetEnv& env) = 0;
  /// Called right after env.step() with the executed joint action.
  virtual void after_step(const FleetEnv& env, std::span<const std::optional<Action>> taken) {
    (void)env;
    (void)taken;
  }
};

enum class PlannerKind { DDQL, LMPP, RWPP, PSO };
std::string_view planner_kind_name(PlannerKind k);
PlannerKind parse_planner_kind(std::string_view s);

/// One-hot preference for `a`.
ScoreVector one_hot(Action a);

/// Lawn mower: straight runs along an axis heading, one lane (2 cells) shift
/// along a fixed perpendicular at each shore, then the reverse heading. When
/// both are blocked a fresh random feasible heading is drawn, axis-aligned
/// when possible.
class LawnMowerPlanner : public Planner {
 public:
  std::string_view name() const override { return "lmpp"; }
  void begin(const FleetEnv& env, std::uint64_t seed) override;
  std::vector<AgentScores> scores(const FleetEnv& env) override;
  void after_step(const FleetEnv& env, std::span<const std::optional<Action>> taken) override;

  Action heading(int agent) const { return agents_.at(agent).heading; }
  Action offset(int agent) const { return agents_.at(agent).offset; }
  /// Times the random-heading fallback was used.
  int fallbacks() const noexcept { return fallbacks_; }

 private:
  struct Agent {
    Action heading;
    Action offset;
    bool turning = false;  // the lane shift was requested this step
  };
  std::vector<Agent> agents_;
  std::mt19937_64 rng_;
  int fallbacks_ = 0;
};

/// Random wanderer: keeps its heading until blocked, then picks uniformly among
/// feasible non-reverse directions (reverse only as the last resort).
class RandomWandererPlanner : public Planner {
 public:
  std::string_view name() const override { return "rwpp"; }
  void begin(const FleetEnv& env, std::uint64_t seed) override;
  std::vector<AgentScores> scores(const FleetEnv& env) override;
  void after_step(const FleetEnv& env, std::span<const std::optional<Action>> taken) override;

  Action heading(int agent) const { return headings_.at(agent); }
  /// Exposed for tests: the direction chosen from `from` given the current heading.
  static std::optional<Action> choose(const NavMap& map, Cell from, Action heading, std::mt19937_64& rng);

 private:
  std::vector<Action> headings_;
  std::mt19937_64 rng_;
};

struct PSOConfig {
  double inertia = 0.7;
  std::array<double, 4> c{1.0, 1.0, 1.0, 1.0};  // sigma-max, personal, fleet, mu-max
};

/// Velocity-driven planner pulled toward the uncertainty maximum, the agent's
/// and fleet's best measurements, and the mean maximum.
class PSOPlanner : public Planner {
 public:
  explicit PSOPlanner(PSOConfig cfg = {}) : cfg_(cfg) {}
  std::string_view name() const override { return "pso"; }
  void begin(const FleetEnv& env, std::uint64_t seed) override;
  std::vector<AgentScores> scores(const FleetEnv& env) override;
  void after_step(const FleetEnv& env, std::span<const std::optional<Action>> taken) override;

  const PSOConfig& config() const noexcept { return cfg_; }
  std::array<double, 2> velocity(int agent) const { return agents_.at(agent).velocity; }
  double personal_best(int agent) const { return agents_.at(agent).best_value; }
  double fleet_best() const noexcept { return fleet_best_value_; }

  /// Cosine between `v` (row, col) and each action's unit direction; nullopt
  /// when |v| < 1e-9.
  static AgentScores direction_scores(std::array<double, 2> v);

 private:
  struct Agent {
    std::array<double, 2> velocity{0.0, 0.0};
    double best_value = -1.0;
    Cell best_cell{};
  };
  void record(const FleetEnv& env);

  PSOConfig cfg_;
  std::vector<Agent> agents_;
  double fleet_best_value_ = -1.0;
  Cell fleet_best_cell_{};
  std::mt19937_64 rng_;
};

/// Greedy Q-network policy (parameter sharing across agents).
class QPolicyPlanner : public Planner {
 public:
  QPolicyPlanner(QNetworkSpec spec, std::span<const float> weights);
  std::string_view name() const override { return "ddql"; }
  void begin(const FleetEnv& env, std::uint64_t seed) override;
  std::vector<AgentScores> scores(const FleetEnv& env) override;

 private:
  QNetwork<float> net_;
  std::vector<float> input_;
};

}  // namespace ipp
