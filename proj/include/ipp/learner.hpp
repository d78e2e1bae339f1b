#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "ipp/env.hpp"
#include "ipp/qnetwork.hpp"

namespace ipp {

using ScoreVector = std::array<double, kActionCount>;
/// Per-agent preferences; nullopt asks the agent to stay put.
using AgentScores = std::optional<ScoreVector>;

struct ConsensusResult {
  std::vector<std::optional<Action>> actions;  // nullopt = null action (stay)
  /// Agents left without any feasible action.
  std::vector<bool> boxed;
  /// Times the ordering was restarted to seat a stuck agent first.
  int restarts = 0;
};

/// Greedy-sequential joint action selection. Agents are served in descending
/// order of their best score (ties by index); each takes its best action that is
/// not blocked and lands at least `safety_m` from every committed next cell.
/// Agents requesting to stay commit their current cell first. An agent with no
/// feasible action stays; if its current cell is too close to a committed cell,
/// the round restarts with that agent served earlier.
ConsensusResult safe_consensus(std::span<const AgentScores> scores, std::span<const Cell> positions,
                               const NavMap& map, double safety_m);

/// Independent U(0, 1) 8-vectors, one per agent.
std::vector<AgentScores> random_scores(int agents, std::mt19937_64& rng);

struct Transition {
  CompactObservation obs;
  int action = 0;
  float reward = 0.0f;
  CompactObservation next_obs;
  bool done = false;
};

/// Fixed-capacity FIFO of transitions.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);
  void push(Transition t);
  std::size_t size() const noexcept { return count_; }
  std::size_t capacity() const noexcept { return slots_.size(); }
  /// i = 0 is the oldest stored transition.
  const Transition& at(std::size_t i) const;
  /// `batch` distinct indices drawn uniformly.
  std::vector<std::size_t> sample_indices(std::size_t batch, std::mt19937_64& rng) const;

 private:
  std::vector<Transition> slots_;
  std::size_t head_ = 0;  // next write slot
  std::size_t count_ = 0;
};

struct TrainConfig {
  double lr = 1e-4;
  int batch = 64;
  double gamma = 0.99;
  double tau = 1e-4;
  double eps_min = 0.05;
  double eps_decay = 1.9e-4;
  int episodes = 600;
  std::size_t capacity = 50000;
  std::uint64_t seed = 0;
  QNetworkSpec net{};
};

/// Decay rate that reaches eps_min after `fraction` of `episodes`.
double scaled_eps_decay(int episodes, double eps_min = 0.05, double fraction = 0.5);
double epsilon(int episode, const TrainConfig& cfg);

/// Decodes observations back to back into `out` (resized).
void encode_batch(const NavMap& map, std::span<const CompactObservation* const> obs, std::vector<float>& out);

/// Double-Q targets: the online net picks argmax at next_obs, the target net scores it.
std::vector<double> td_targets(std::span<const Transition* const> batch, QNetwork<float>& online,
                               QNetwork<float>& target, double gamma, const NavMap& map);

/// Online/target networks with an Adam optimiser.
class DDQLearner {
 public:
  DDQLearner(const TrainConfig& cfg, const NavMap& map);

  QNetwork<float>& online() noexcept { return online_; }
  QNetwork<float>& target() noexcept { return target_; }
  const TrainConfig& config() const noexcept { return cfg_; }

  /// One Adam step on the mean squared TD error, then the Polyak update.
  /// Returns the loss. Throws NumericalError on a non-finite loss.
  double train_step(std::span<const Transition* const> batch);
  /// target <- tau * online + (1 - tau) * target.
  void polyak(double tau);

  /// Greedy scores (Q-values) for each observation.
  std::vector<AgentScores> q_scores(std::span<const CompactObservation> obs);

 private:
  TrainConfig cfg_;
  const NavMap* map_;
  QNetwork<float> online_, target_;
  Adam adam_;
  std::vector<float> input_, grad_;
};

struct EpisodeLog {
  int episode = 0;
  double epsilon = 0.0;
  double mean_reward = 0.0;  // per agent-step
  double final_sor = 0.0;
  double loss_mean = 0.0;
  double loss_max = 0.0;
  int train_steps = 0;
  int null_actions = 0;
};

struct TrainResult {
  std::vector<float> weights;
  std::vector<EpisodeLog> episodes;
  std::size_t buffer_size = 0;
};

/// Full training loop. `on_episode` (optional) is called after every episode.
TrainResult run_training(const TrainConfig& cfg, const EnvConfig& env_cfg,
                         const std::function<void(const EpisodeLog&)>& on_episode = {});

/// Checkpoint: "IPPQ", u32 version, u64 spec hash, u64 weight count, then
/// little-endian float32 weights.
void save_checkpoint(const std::filesystem::path& path, const QNetworkSpec& spec, std::span<const float> weights);
std::vector<float> load_checkpoint(const std::filesystem::path& path, const QNetworkSpec& spec);

}  // namespace ipp
