#include "ipp/learner.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "ipp/errors.hpp"
#include "ipp/metrics.hpp"
#include "ipp/seeding.hpp"

namespace ipp {

ConsensusResult safe_consensus(std::span<const AgentScores> scores, std::span<const Cell> positions,
                               const NavMap& map, double safety_m) {
  const std::size_t n = positions.size();
  if (scores.size() != n) throw ContractError("one score vector per agent is required");
  auto best_score = [&](std::size_t j) {
    double m = -std::numeric_limits<double>::infinity();
    for (double v : *scores[j]) m = std::max(m, v);
    return m;
  };
  std::vector<std::size_t> promoted;
  ConsensusResult out;
  for (;;) {
    std::vector<std::size_t> order;
    for (std::size_t j = 0; j < n; ++j)
      if (!scores[j]) order.push_back(j);
    order.insert(order.end(), promoted.begin(), promoted.end());
    std::vector<std::size_t> rest;
    for (std::size_t j = 0; j < n; ++j)
      if (scores[j] && std::find(promoted.begin(), promoted.end(), j) == promoted.end()) rest.push_back(j);
    std::stable_sort(rest.begin(), rest.end(), [&](std::size_t a, std::size_t b) { return best_score(a) > best_score(b); });
    order.insert(order.end(), rest.begin(), rest.end());

    out.actions.assign(n, std::nullopt);
    out.boxed.assign(n, false);
    std::vector<Cell> committed;
    auto safe = [&](Cell c) {
      return std::all_of(committed.begin(), committed.end(),
                         [&](Cell o) { return distance_m(map, c, o) >= safety_m; });
    };
    std::optional<std::size_t> stuck;
    for (std::size_t j : order) {
      if (!scores[j]) {
        committed.push_back(positions[j]);
        continue;
      }
      int best = -1;
      double best_v = 0.0;
      Cell best_cell{};
      for (int a = 0; a < kActionCount; ++a) {
        const auto to = apply_action(map, positions[j], action_from_index(a));
        if (!to || !safe(*to)) continue;
        const double v = (*scores[j])[a];
        if (best < 0 || v > best_v) {
          best = a;
          best_v = v;
          best_cell = *to;
        }
      }
      if (best >= 0) {
        out.actions[j] = action_from_index(best);
        committed.push_back(best_cell);
        continue;
      }
      out.boxed[j] = true;
      if (!safe(positions[j]) && !stuck) stuck = j;
      committed.push_back(positions[j]);
    }
    if (!stuck || out.restarts >= static_cast<int>(n) ||
        std::find(promoted.begin(), promoted.end(), *stuck) != promoted.end())
      return out;
    promoted.push_back(*stuck);
    ++out.restarts;
  }
}

std::vector<AgentScores> random_scores(int agents, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<AgentScores> out(static_cast<std::size_t>(agents));
  for (auto& s : out) {
    ScoreVector v;
    for (double& x : v) x = u(rng);
    s = v;
  }
  return out;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : slots_(capacity) {
  if (capacity == 0) throw ConfigError("replay capacity must be positive");
}

void ReplayBuffer::push(Transition t) {
  slots_[head_] = std::move(t);
  head_ = (head_ + 1) % slots_.size();
  count_ = std::min(count_ + 1, slots_.size());
}

const Transition& ReplayBuffer::at(std::size_t i) const {
  if (i >= count_) throw ContractError("replay index out of range");
  const std::size_t oldest = (head_ + slots_.size() - count_) % slots_.size();
  return slots_[(oldest + i) % slots_.size()];
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t batch, std::mt19937_64& rng) const {
  if (batch > count_) throw ContractError("replay buffer holds fewer transitions than the batch");
  // Floyd's algorithm: a uniform subset without replacement.
  std::vector<std::size_t> out;
  out.reserve(batch);
  for (std::size_t j = count_ - batch; j < count_; ++j) {
    std::uniform_int_distribution<std::size_t> pick(0, j);
    const std::size_t t = pick(rng);
    out.push_back(std::find(out.begin(), out.end(), t) == out.end() ? t : j);
  }
  return out;
}

double scaled_eps_decay(int episodes, double eps_min, double fraction) {
  if (episodes < 1 || !(fraction > 0.0)) throw ConfigError("episode count and anneal fraction must be positive");
  return (1.0 - eps_min) / (fraction * episodes);
}

double epsilon(int episode, const TrainConfig& cfg) {
  if (episode < 0) throw ContractError("episode must be non-negative");
  return std::max(cfg.eps_min, 1.0 - cfg.eps_decay * episode);
}

void encode_batch(const NavMap& map, std::span<const CompactObservation* const> obs, std::vector<float>& out) {
  const std::size_t one = static_cast<std::size_t>(kObservationChannels) * map.height() * map.width();
  out.resize(one * obs.size());
  for (std::size_t i = 0; i < obs.size(); ++i)
    decode_observation(map, *obs[i], std::span<float>(out.data() + i * one, one));
}

std::vector<double> td_targets(std::span<const Transition* const> batch, QNetwork<float>& online,
                               QNetwork<float>& target, double gamma, const NavMap& map) {
  if (batch.empty()) throw ContractError("TD targets need a non-empty batch");
  std::vector<const CompactObservation*> next;
  for (const Transition* t : batch) next.push_back(&t->next_obs);
  std::vector<float> input;
  encode_batch(map, next, input);
  const int b = static_cast<int>(batch.size());
  const auto& q_online = online.forward(input, b);
  std::vector<Eigen::Index> pick(batch.size());
  for (int i = 0; i < b; ++i) q_online.col(i).maxCoeff(&pick[i]);
  const auto& q_target = target.forward(input, b);
  std::vector<double> y(batch.size());
  for (int i = 0; i < b; ++i) {
    const Transition& t = *batch[i];
    y[i] = t.done ? t.reward : t.reward + gamma * static_cast<double>(q_target(pick[i], i));
  }
  return y;
}

DDQLearner::DDQLearner(const TrainConfig& cfg, const NavMap& map)
    : cfg_(cfg),
      map_(&map),
      online_(cfg.net),
      target_(cfg.net),
      adam_(online_.size(), AdamConfig{cfg.lr, 0.9, 0.999, 1e-8}),
      grad_(online_.size()) {
  if (cfg_.net.height != map.height() || cfg_.net.width != map.width() || cfg_.net.channels != kObservationChannels)
    throw ConfigError("network input shape does not match the map");
  if (cfg_.batch < 1) throw ConfigError("batch size must be positive");
  std::mt19937_64 rng(derive_seed(cfg_.seed, 3, 0));
  online_.init(rng);
  std::copy(online_.params().begin(), online_.params().end(), target_.params().begin());
}

double DDQLearner::train_step(std::span<const Transition* const> batch) {
  const std::vector<double> y = td_targets(batch, online_, target_, cfg_.gamma, *map_);
  std::vector<const CompactObservation*> obs;
  for (const Transition* t : batch) obs.push_back(&t->obs);
  encode_batch(*map_, obs, input_);
  const int b = static_cast<int>(batch.size());
  const auto& q = online_.forward(input_, b);
  QNetwork<float>::Matrix dq = QNetwork<float>::Matrix::Zero(q.rows(), q.cols());
  double loss = 0.0;
  for (int i = 0; i < b; ++i) {
    const int a = batch[i]->action;
    const double err = static_cast<double>(q(a, i)) - y[i];
    loss += err * err;
    dq(a, i) = static_cast<float>(2.0 * err / b);
  }
  loss /= b;
  if (!std::isfinite(loss)) {
    std::ostringstream os;
    os << "non-finite TD loss (batch " << b << ", Adam step " << adam_.steps();
    const std::size_t one = input_.size() / static_cast<std::size_t>(b);
    for (int i = 0; i < b; ++i) {
      if (std::isfinite(y[i]) && std::isfinite(q(batch[i]->action, i))) continue;
      const auto bad = std::count_if(input_.begin() + i * one, input_.begin() + (i + 1) * one,
                                     [](float v) { return !std::isfinite(v); });
      os << "; sample " << i << ": reward " << batch[i]->reward << " target " << y[i] << " q "
         << q(batch[i]->action, i) << " non-finite inputs " << bad;
    }
    os << "; non-finite parameters "
       << std::count_if(online_.params().begin(), online_.params().end(), [](float v) { return !std::isfinite(v); })
       << ')';
    throw NumericalError(os.str());
  }
  online_.backward(dq, grad_);
  adam_.step(online_.params(), grad_);
  polyak(cfg_.tau);
  return loss;
}

void DDQLearner::polyak(double tau) {
  auto on = online_.params();
  auto tg = target_.params();
  const float t = static_cast<float>(tau);
  if (tau == 1.0) {
    std::copy(on.begin(), on.end(), tg.begin());
    return;
  }
  if (tau == 0.0) return;
  for (std::size_t i = 0; i < on.size(); ++i) tg[i] = t * on[i] + (1.0f - t) * tg[i];
}

std::vector<AgentScores> DDQLearner::q_scores(std::span<const CompactObservation> obs) {
  std::vector<const CompactObservation*> ptrs;
  for (const auto& o : obs) ptrs.push_back(&o);
  encode_batch(*map_, ptrs, input_);
  const auto& q = online_.forward(input_, static_cast<int>(obs.size()));
  std::vector<AgentScores> out(obs.size());
  for (std::size_t j = 0; j < obs.size(); ++j) {
    ScoreVector s;
    for (int a = 0; a < kActionCount; ++a) s[a] = q(a, static_cast<Eigen::Index>(j));
    out[j] = s;
  }
  return out;
}

TrainResult run_training(const TrainConfig& cfg, const EnvConfig& env_cfg,
                         const std::function<void(const EpisodeLog&)>& on_episode) {
  if (cfg.episodes < 1) throw ConfigError("training needs at least one episode");
  FleetEnv env(env_cfg);
  DDQLearner learner(cfg, env.map());
  ReplayBuffer buffer(cfg.capacity);
  std::mt19937_64 rng(derive_seed(cfg.seed, 1, 0));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<const Transition*> batch(static_cast<std::size_t>(cfg.batch));
  TrainResult result;

  for (int ep = 0; ep < cfg.episodes; ++ep) {
    EpisodeLog log;
    log.episode = ep;
    log.epsilon = epsilon(ep, cfg);
    env.reset(gt_seed(cfg.seed, SeedSet::Training, static_cast<std::uint64_t>(ep)),
              derive_seed(cfg.seed, 2, static_cast<std::uint64_t>(ep)));
    std::vector<CompactObservation> obs;
    for (int j = 0; j < env.agents(); ++j) obs.push_back(env.compact(j));
    double reward_sum = 0.0, loss_sum = 0.0;
    while (!env.done()) {
      const bool explore = u(rng) < log.epsilon;
      const auto scores = explore ? random_scores(env.agents(), rng) : learner.q_scores(obs);
      const auto cons = safe_consensus(scores, env.positions(), env.map(), env.config().safety_m);
      const StepResult res = env.step(cons.actions);
      std::vector<CompactObservation> next;
      for (int j = 0; j < env.agents(); ++j) next.push_back(env.compact(j));
      for (int j = 0; j < env.agents(); ++j) {
        reward_sum += res.rewards[j];
        if (!cons.actions[j]) {
          ++log.null_actions;
          continue;
        }
        buffer.push({obs[j], action_index(*cons.actions[j]), static_cast<float>(res.rewards[j]), next[j], res.done});
      }
      if (buffer.size() >= static_cast<std::size_t>(cfg.batch)) {
        const auto idx = buffer.sample_indices(static_cast<std::size_t>(cfg.batch), rng);
        for (std::size_t i = 0; i < idx.size(); ++i) batch[i] = &buffer.at(idx[i]);
        const double loss = learner.train_step(batch);
        loss_sum += loss;
        log.loss_max = std::max(log.loss_max, loss);
        ++log.train_steps;
      }
      obs = std::move(next);
    }
    log.mean_reward = reward_sum / (static_cast<double>(env.budget()) * env.agents());
    log.loss_mean = log.train_steps ? loss_sum / log.train_steps : 0.0;
    log.final_sor = sor(env.model().fused().mean, env.field().values());
    result.episodes.push_back(log);
    if (on_episode) on_episode(log);
  }
  result.weights.assign(learner.online().params().begin(), learner.online().params().end());
  result.buffer_size = buffer.size();
  return result;
}

namespace {

constexpr char kMagic[4] = {'I', 'P', 'P', 'Q'};
constexpr std::uint32_t kCheckpointVersion = 1;

template <typename T>
void put_le(std::ostream& os, T v) {
  unsigned char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
  os.write(reinterpret_cast<const char*>(b), sizeof(T));
}

template <typename T>
T get_le(std::istream& is) {
  unsigned char b[sizeof(T)];
  if (!is.read(reinterpret_cast<char*>(b), sizeof(T))) throw ConfigError("checkpoint is truncated");
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
  T v;
  std::memcpy(&v, b, sizeof(T));
  return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const QNetworkSpec& spec, std::span<const float> weights) {
  if (weights.size() != spec.parameter_count()) throw ContractError("weight count does not match the network spec");
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw ConfigError("cannot write checkpoint " + path.string());
  os.write(kMagic, 4);
  put_le<std::uint32_t>(os, kCheckpointVersion);
  put_le<std::uint64_t>(os, spec.hash());
  put_le<std::uint64_t>(os, weights.size());
  for (float w : weights) put_le<std::uint32_t>(os, std::bit_cast<std::uint32_t>(w));
  if (!os) throw ConfigError("failed writing checkpoint " + path.string());
}

std::vector<float> load_checkpoint(const std::filesystem::path& path, const QNetworkSpec& spec) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot open checkpoint " + path.string());
  char magic[4];
  if (!is.read(magic, 4) || !std::equal(magic, magic + 4, kMagic)) throw ConfigError("not a checkpoint file: " + path.string());
  const auto version = get_le<std::uint32_t>(is);
  if (version != kCheckpointVersion) throw ConfigError("unsupported checkpoint version " + std::to_string(version));
  if (get_le<std::uint64_t>(is) != spec.hash()) throw ConfigError("checkpoint was written for a different network spec");
  const auto count = get_le<std::uint64_t>(is);
  if (count != spec.parameter_count()) throw ConfigError("checkpoint weight count does not match the network spec");
  std::vector<float> w(count);
  for (auto& x : w) x = std::bit_cast<float>(get_le<std::uint32_t>(is));
  return w;
}

}  // namespace ipp
