#include "ipp/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ipp/errors.hpp"

namespace ipp {

std::string_view planner_kind_name(PlannerKind k) {
  switch (k) {
    case PlannerKind::DDQL: return "ddql";
    case PlannerKind::LMPP: return "lmpp";
    case PlannerKind::RWPP: return "rwpp";
    case PlannerKind::PSO: return "pso";
  }
  return "?";
}

PlannerKind parse_planner_kind(std::string_view s) {
  if (s == "ddql") return PlannerKind::DDQL;
  if (s == "lmpp") return PlannerKind::LMPP;
  if (s == "rwpp") return PlannerKind::RWPP;
  if (s == "pso") return PlannerKind::PSO;
  throw ConfigError("unknown planner '" + std::string(s) + "' (expected ddql, lmpp, rwpp or pso)");
}

ScoreVector one_hot(Action a) {
  ScoreVector s{};
  s[action_index(a)] = 1.0;
  return s;
}

namespace {

Action rotate(Action a, int eighths) { return action_from_index(((action_index(a) + eighths) % kActionCount + kActionCount) % kActionCount); }

std::vector<Action> feasible_actions(const NavMap& map, Cell from) {
  std::vector<Action> out;
  for (Action a : kAllActions)
    if (apply_action(map, from, a)) out.push_back(a);
  return out;
}

Action random_action(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> pick(0, kActionCount - 1);
  return action_from_index(pick(rng));
}

bool axis_aligned(Action a) { return action_index(a) % 2 == 0; }

}  // namespace

void LawnMowerPlanner::begin(const FleetEnv& env, std::uint64_t seed) {
  rng_.seed(seed);
  fallbacks_ = 0;
  agents_.clear();
  std::uniform_int_distribution<int> side(0, 1);
  std::uniform_int_distribution<int> axis(0, 3);
  for (int j = 0; j < env.agents(); ++j) {
    const Action h = action_from_index(2 * axis(rng_));
    agents_.push_back({h, rotate(h, side(rng_) ? 2 : -2), false});
  }
}

std::vector<AgentScores> LawnMowerPlanner::scores(const FleetEnv& env) {
  std::vector<AgentScores> out(agents_.size());
  for (std::size_t j = 0; j < agents_.size(); ++j) {
    Agent& a = agents_[j];
    const Cell p = env.positions()[j];
    a.turning = false;
    if (apply_action(env.map(), p, a.heading)) {
      out[j] = one_hot(a.heading);
    } else if (apply_action(env.map(), p, a.offset)) {
      a.turning = true;
      out[j] = one_hot(a.offset);
    } else {
      auto options = feasible_actions(env.map(), p);
      if (options.empty()) continue;
      if (std::any_of(options.begin(), options.end(), axis_aligned))
        std::erase_if(options, [](Action x) { return !axis_aligned(x); });
      std::uniform_int_distribution<std::size_t> pick(0, options.size() - 1);
      const int side = action_index(a.offset) == (action_index(a.heading) + 2) % kActionCount ? 2 : -2;
      a.heading = options[pick(rng_)];
      a.offset = rotate(a.heading, side);
      ++fallbacks_;
      out[j] = one_hot(a.heading);
    }
  }
  return out;
}

void LawnMowerPlanner::after_step(const FleetEnv&, std::span<const std::optional<Action>> taken) {
  for (std::size_t j = 0; j < agents_.size(); ++j) {
    Agent& a = agents_[j];
    if (a.turning && taken[j] == a.offset) a.heading = reverse(a.heading);
    a.turning = false;
  }
}

std::optional<Action> RandomWandererPlanner::choose(const NavMap& map, Cell from, Action heading,
                                                    std::mt19937_64& rng) {
  if (apply_action(map, from, heading)) return heading;
  std::vector<Action> options;
  bool reverse_ok = false;
  for (Action a : feasible_actions(map, from)) {
    if (a == reverse(heading))
      reverse_ok = true;
    else
      options.push_back(a);
  }
  if (!options.empty()) {
    std::uniform_int_distribution<std::size_t> pick(0, options.size() - 1);
    return options[pick(rng)];
  }
  if (reverse_ok) return reverse(heading);
  return std::nullopt;
}

void RandomWandererPlanner::begin(const FleetEnv& env, std::uint64_t seed) {
  rng_.seed(seed);
  headings_.clear();
  for (int j = 0; j < env.agents(); ++j) headings_.push_back(random_action(rng_));
}

std::vector<AgentScores> RandomWandererPlanner::scores(const FleetEnv& env) {
  std::vector<AgentScores> out(headings_.size());
  for (std::size_t j = 0; j < headings_.size(); ++j) {
    const auto a = choose(env.map(), env.positions()[j], headings_[j], rng_);
    if (a) out[j] = one_hot(*a);
  }
  return out;
}

void RandomWandererPlanner::after_step(const FleetEnv&, std::span<const std::optional<Action>> taken) {
  for (std::size_t j = 0; j < headings_.size(); ++j)
    if (taken[j]) headings_[j] = *taken[j];
}

AgentScores PSOPlanner::direction_scores(std::array<double, 2> v) {
  const double norm = std::hypot(v[0], v[1]);
  if (!(norm >= 1e-9)) return std::nullopt;
  ScoreVector s;
  for (Action a : kAllActions) {
    const Offset o = unit_offset(a);
    s[action_index(a)] = (v[0] * o.drow + v[1] * o.dcol) / (norm * std::hypot(o.drow, o.dcol));
  }
  return s;
}

void PSOPlanner::record(const FleetEnv& env) {
  for (std::size_t j = 0; j < agents_.size(); ++j) {
    const Cell p = env.positions()[j];
    const double y = sample(env.field(), p);
    if (y > agents_[j].best_value) {
      agents_[j].best_value = y;
      agents_[j].best_cell = p;
    }
    if (y > fleet_best_value_) {
      fleet_best_value_ = y;
      fleet_best_cell_ = p;
    }
  }
}

void PSOPlanner::begin(const FleetEnv& env, std::uint64_t seed) {
  rng_.seed(seed);
  agents_.assign(static_cast<std::size_t>(env.agents()), Agent{});
  fleet_best_value_ = -1.0;
  record(env);
}

std::vector<AgentScores> PSOPlanner::scores(const FleetEnv& env) {
  const auto& fused = env.model().fused();
  const auto& cells = env.map().navigable_cells();
  const auto argmax = [&](const std::vector<double>& v) {
    return cells[static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin())];
  };
  const Cell sigma_max = argmax(fused.std);
  const Cell mu_max = argmax(fused.mean);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<AgentScores> out(agents_.size());
  for (std::size_t j = 0; j < agents_.size(); ++j) {
    Agent& a = agents_[j];
    const Cell p = env.positions()[j];
    const std::array<Cell, 4> attractors{sigma_max, a.best_cell, fleet_best_cell_, mu_max};
    for (int d = 0; d < 2; ++d) a.velocity[d] *= cfg_.inertia;
    for (int k = 0; k < 4; ++k) {
      const double pull = cfg_.c[k] * u(rng_);
      a.velocity[0] += pull * (attractors[k].row - p.row);
      a.velocity[1] += pull * (attractors[k].col - p.col);
    }
    out[j] = direction_scores(a.velocity);
  }
  return out;
}

void PSOPlanner::after_step(const FleetEnv& env, std::span<const std::optional<Action>>) { record(env); }

QPolicyPlanner::QPolicyPlanner(QNetworkSpec spec, std::span<const float> weights) : net_(spec) {
  if (weights.size() != net_.size()) throw ConfigError("checkpoint does not match the network spec");
  std::copy(weights.begin(), weights.end(), net_.params().begin());
}

void QPolicyPlanner::begin(const FleetEnv& env, std::uint64_t) {
  if (net_.spec().height != env.map().height() || net_.spec().width != env.map().width())
    throw ConfigError("network input shape does not match the map");
}

std::vector<AgentScores> QPolicyPlanner::scores(const FleetEnv& env) {
  std::vector<CompactObservation> obs;
  for (int j = 0; j < env.agents(); ++j) obs.push_back(env.compact(j));
  std::vector<const CompactObservation*> ptrs;
  for (const auto& o : obs) ptrs.push_back(&o);
  encode_batch(env.map(), ptrs, input_);
  const auto& q = net_.forward(input_, env.agents());
  std::vector<AgentScores> out(obs.size());
  for (std::size_t j = 0; j < obs.size(); ++j) {
    ScoreVector s;
    for (int a = 0; a < kActionCount; ++a) s[a] = q(a, static_cast<Eigen::Index>(j));
    out[j] = s;
  }
  return out;
}

}  // namespace ipp
