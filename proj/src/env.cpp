#include "ipp/env.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "ipp/errors.hpp"

namespace ipp {

std::string_view reward_kind_name(RewardKind k) { return k == RewardKind::DeltaMu ? "mu" : "sigma"; }

RewardKind parse_reward_kind(std::string_view s) {
  if (s == "mu") return RewardKind::DeltaMu;
  if (s == "sigma") return RewardKind::DeltaSigma;
  throw ConfigError("unknown reward kind '" + std::string(s) + "' (expected mu or sigma)");
}

namespace {

void normalise(std::span<float> img) {
  const auto [lo, hi] = std::minmax_element(img.begin(), img.end());
  const float a = *lo, b = *hi;
  // A range below the smallest normal float would make the scale overflow.
  if (!(b - a >= std::numeric_limits<float>::min())) {
    std::fill(img.begin(), img.end(), 0.0f);
    return;
  }
  const float inv = 1.0f / (b - a);
  for (float& v : img) v = (v - a) * inv;
}

}  // namespace

void decode_observation(const NavMap& map, const CompactObservation& obs, std::span<float> out) {
  const std::size_t hw = static_cast<std::size_t>(map.height()) * map.width();
  if (out.size() != kObservationChannels * hw) throw ContractError("observation buffer has the wrong size");
  if (!obs.frame) throw ContractError("observation has no surface frame");
  const auto& cells = map.navigable_cells();
  if (obs.frame->mu.size() != cells.size() || obs.frame->sigma.size() != cells.size())
    throw ContractError("surface frame does not match the map");
  std::fill(out.begin(), out.end(), 0.0f);
  float* mu = out.data();
  float* sd = mu + hw;
  float* nav = sd + hw;
  float* self = nav + hw;
  float* others = self + hw;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const std::size_t f = map.flat(cells[i]);
    mu[f] = obs.frame->mu[i];
    sd[f] = obs.frame->sigma[i];
    nav[f] = 1.0f;
  }
  self[map.flat(obs.self)] = 1.0f;
  for (const Cell& c : obs.others) others[map.flat(c)] = 1.0f;
  for (int ch = 0; ch < kObservationChannels; ++ch) normalise(out.subspan(ch * hw, hw));
}

Observation decode_observation(const NavMap& map, const CompactObservation& obs) {
  Observation o;
  o.height = map.height();
  o.width = map.width();
  o.data.resize(static_cast<std::size_t>(kObservationChannels) * o.height * o.width);
  decode_observation(map, obs, o.data);
  return o;
}

int redundancy(const NavMap& map, std::span<const Cell> positions, Cell x, double radius_m) {
  int n = 0;
  for (const Cell& p : positions)
    if (within_radius(map, p, x, radius_m)) ++n;
  return n;
}

std::vector<double> compute_rewards(const NavMap& map, std::span<const Cell> positions,
                                    std::span<const double> before, std::span<const double> after,
                                    double radius_m) {
  if (before.size() != map.navigable_count() || after.size() != map.navigable_count())
    throw ContractError("reward surfaces do not match the map");
  std::vector<double> out(positions.size(), 0.0);
  for (std::size_t j = 0; j < positions.size(); ++j) {
    double r = 0.0;
    for (const Cell& x : disk(map, positions[j], radius_m)) {
      const auto i = static_cast<std::size_t>(map.navigable_index(x));
      r += std::abs(after[i] - before[i]) / redundancy(map, positions, x, radius_m);
    }
    out[j] = r;
  }
  return out;
}

double min_separation(const NavMap& map, std::span<const Cell> positions) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < positions.size(); ++a)
    for (std::size_t b = a + 1; b < positions.size(); ++b)
      best = std::min(best, distance_m(map, positions[a], positions[b]));
  return best;
}

FleetEnv::FleetEnv(EnvConfig cfg) : cfg_(std::move(cfg)) {
  if (!cfg_.map) cfg_.map = default_map();
  if (cfg_.agents < 1) throw ConfigError("fleet needs at least one agent");
  if (cfg_.budget < 1) throw ConfigError("step budget must be positive");
  if (cfg_.zones.empty())
    for (int j = 0; j < cfg_.agents; ++j) cfg_.zones.push_back(j + 1);
  if (static_cast<int>(cfg_.zones.size()) != cfg_.agents)
    throw ConfigError("one deployment zone per agent is required");
  for (int id : cfg_.zones) (void)cfg_.map->zone(id);
  layout_ = cfg_.global_model ? global_layout(*cfg_.map) : build_layout(*cfg_.map, cfg_.spacing_m, cfg_.influence_m);
}

void FleetEnv::reset(std::uint64_t gt_seed, std::uint64_t placement_seed) {
  GTConfig g = cfg_.gt;
  g.seed = gt_seed;
  field_ = std::make_shared<const ScalarField>(generate(cfg_.map, g));

  std::mt19937_64 rng(placement_seed);
  std::vector<Cell> pos(static_cast<std::size_t>(cfg_.agents));
  for (int attempt = 0;; ++attempt) {
    if (attempt == 1000)
      throw ConfigError("could not seat the fleet at safe separation after 1000 draws");
    for (int j = 0; j < cfg_.agents; ++j) {
      const auto& cells = cfg_.map->zone(cfg_.zones[j]).cells;
      std::uniform_int_distribution<std::size_t> pick(0, cells.size() - 1);
      pos[j] = cells[pick(rng)];
    }
    if (min_separation(*cfg_.map, pos) >= cfg_.safety_m) break;
  }
  start(std::move(pos));
}

void FleetEnv::reset(std::shared_ptr<const ScalarField> field, std::vector<Cell> positions) {
  if (!field || &field->map() != cfg_.map.get()) throw ContractError("field belongs to a different map");
  if (static_cast<int>(positions.size()) != cfg_.agents) throw ContractError("one start cell per agent is required");
  for (const Cell& c : positions)
    if (!cfg_.map->navigable(c)) throw ContractError("start cell is not navigable");
  if (min_separation(*cfg_.map, positions) < cfg_.safety_m) throw ContractError("start cells violate the safety distance");
  field_ = std::move(field);
  start(std::move(positions));
}

void FleetEnv::start(std::vector<Cell> positions) {
  positions_ = std::move(positions);
  step_count_ = 0;
  model_ = std::make_unique<LocalGPModel>(cfg_.map, layout_, cfg_.gp);
  std::vector<Measurement> m;
  for (const Cell& c : positions_) m.push_back({c, sample(*field_, c)});
  model_->add_samples(m);
  prev_ = model_->fused();
  publish_frame();
}

void FleetEnv::publish_frame() {
  auto f = std::make_shared<SurfaceFrame>();
  const auto& fused = model_->fused();
  f->mu.assign(fused.mean.begin(), fused.mean.end());
  f->sigma.assign(fused.std.begin(), fused.std.end());
  frame_ = std::move(f);
}

StepResult FleetEnv::step(std::span<const std::optional<Action>> actions) {
  if (!model_) throw ContractError("step before reset");
  if (done()) throw ContractError("step past the budget");
  if (static_cast<int>(actions.size()) != cfg_.agents) throw ContractError("one action per agent is required");
  std::vector<Cell> next = positions_;
  for (int j = 0; j < cfg_.agents; ++j) {
    if (!actions[j]) continue;
    const auto to = apply_action(*cfg_.map, positions_[j], *actions[j]);
    if (!to)
      throw ContractError("agent " + std::to_string(j) + " took blocked action " + std::string(action_name(*actions[j])));
    next[j] = *to;
  }
  if (min_separation(*cfg_.map, next) < cfg_.safety_m)
    throw ContractError("joint action violates the safety distance");

  positions_ = std::move(next);
  std::vector<Measurement> m;
  for (const Cell& c : positions_) m.push_back({c, sample(*field_, c)});
  prev_ = model_->fused();
  model_->add_samples(m);
  ++step_count_;
  publish_frame();

  const auto& now = model_->fused();
  const bool mu = cfg_.reward == RewardKind::DeltaMu;
  StepResult r;
  r.rewards = compute_rewards(*cfg_.map, positions_, mu ? prev_.mean : prev_.std, mu ? now.mean : now.std,
                              cfg_.influence_m);
  r.done = done();
  return r;
}

CompactObservation FleetEnv::compact(int agent) const {
  if (agent < 0 || agent >= cfg_.agents) throw ContractError("agent index out of range");
  CompactObservation o;
  o.frame = frame_;
  o.self = positions_[agent];
  for (int k = 0; k < cfg_.agents; ++k)
    if (k != agent) o.others.push_back(positions_[k]);
  return o;
}

Observation FleetEnv::observe(int agent) const { return decode_observation(*cfg_.map, compact(agent)); }

}  // namespace ipp
