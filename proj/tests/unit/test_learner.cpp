#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"
#include "ipp/errors.hpp"
#include "ipp/learner.hpp"

using namespace ipp;

namespace {

NavMapPtr pond() {
  std::ostringstream os;
  os << "MAP 12 12 290\n";
  for (int r = 0; r < 12; ++r) {
    for (int c = 0; c < 12; ++c) os << (c ? " 1" : "1");
    os << '\n';
  }
  os << "ZONE 1 0 0 0 1 1 0 1 1\nZONE 2 0 10 0 11 1 10 1 11\nZONE 3 10 0 10 1 11 0 11 1\n";
  return std::make_shared<const NavMap>(load_map(os.str()));
}

QNetworkSpec small_net(int h, int w) {
  QNetworkSpec s;
  s.height = h;
  s.width = w;
  s.conv = {4, 6, 8};
  s.fc_width = 16;
  s.fc_layers = 2;
  return s;
}

TrainConfig small_train(const NavMap& map) {
  TrainConfig t;
  t.net = small_net(map.height(), map.width());
  t.batch = 8;
  t.capacity = 1000;
  t.episodes = 1;
  t.seed = 5;
  return t;
}

EnvConfig small_env(NavMapPtr map, int agents) {
  EnvConfig e;
  e.map = std::move(map);
  e.agents = agents;
  e.gp.refit = false;
  e.spacing_m = 1200.0;
  e.budget = 10;
  return e;
}

AgentScores scores_of(std::initializer_list<double> v) {
  ScoreVector s{};
  std::copy(v.begin(), v.end(), s.begin());
  return s;
}

std::optional<Cell> target_of(const NavMap& map, Cell from, const std::optional<Action>& a) {
  if (!a) return from;
  return apply_action(map, from, *a);
}

}  // namespace

TEST_CASE("dueling head: the action mean of Q equals the value stream") {
  QNetwork<double> net(small_net(6, 6));
  std::mt19937_64 rng(1);
  net.init(rng);
  std::vector<double> x(static_cast<std::size_t>(3 * net.spec().input_size()));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (double& v : x) v = u(rng);
  QNetwork<double>::Matrix value;
  const auto q = net.forward(x, 3, &value);
  REQUIRE(q.rows() == 8);
  REQUIRE(q.cols() == 3);
  for (int b = 0; b < 3; ++b) CHECK(q.col(b).mean() == doctest::Approx(value(0, b)).epsilon(1e-12));

  std::fill(net.params().begin(), net.params().end(), 0.0);
  const auto z = net.forward(x, 3);
  CHECK(z.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("parameter count matches the layer shapes") {
  const QNetworkSpec s = small_net(6, 6);
  // 6x6 -> 3x3 -> 2x2 -> 1x1 with 3x3 kernels, stride 2, padding 1.
  CHECK(s.conv_output(0) == std::array<int, 2>{3, 3});
  CHECK(s.conv_output(2) == std::array<int, 2>{1, 1});
  CHECK(s.flat_size() == 8);
  const std::size_t expect = (5 * 9 * 4 + 4) + (4 * 9 * 6 + 6) + (6 * 9 * 8 + 8) + (8 * 16 + 16) + (16 * 16 + 16) +
                             (16 + 1) + (16 * 8 + 8);
  CHECK(s.parameter_count() == expect);
  CHECK(QNetwork<float>(s).size() == expect);
  QNetworkSpec t = s;
  t.fc_width = 17;
  CHECK(t.hash() != s.hash());
}

TEST_CASE("backward matches central finite differences") {
  QNetwork<double> net(small_net(6, 6));
  std::mt19937_64 rng(2);
  net.init(rng);
  const int batch = 2;
  std::vector<double> x(static_cast<std::size_t>(batch * net.spec().input_size()));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (double& v : x) v = u(rng);
  QNetwork<double>::Matrix r(8, batch);
  for (int i = 0; i < r.size(); ++i) r.data()[i] = u(rng) - 0.5;
  auto loss = [&] { return (net.forward(x, batch).array() * r.array()).sum(); };

  loss();
  std::vector<double> grad(net.size());
  net.backward(r, grad);

  const double h = 1e-6;
  int checked = 0, bad = 0;
  for (std::size_t i = 0; i < net.size(); i += 1 + i % 3) {
    double& p = net.params()[i];
    const double keep = p;
    p = keep + h;
    const double up = loss();
    p = keep - h;
    const double down = loss();
    p = keep;
    const double fd = (up - down) / (2 * h);
    ++checked;
    if (std::abs(fd - grad[i]) > 1e-6 * std::max(1.0, std::abs(fd))) ++bad;
  }
  CHECK(checked > 300);
  CHECK(bad == 0);
}

TEST_CASE("float and double networks agree") {
  const QNetworkSpec s = small_net(12, 12);
  QNetwork<double> d(s);
  QNetwork<float> f(s);
  std::mt19937_64 rng(3);
  d.init(rng);
  std::transform(d.params().begin(), d.params().end(), f.params().begin(), [](double v) { return static_cast<float>(v); });
  std::vector<double> xd(static_cast<std::size_t>(4 * s.input_size()));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (double& v : xd) v = u(rng);
  std::vector<float> xf(xd.begin(), xd.end());
  const auto qd = d.forward(xd, 4);
  const auto qf = f.forward(xf, 4);
  CHECK((qd - qf.cast<double>()).cwiseAbs().maxCoeff() < 1e-4);
}

TEST_CASE("consensus: far-apart agents take their own argmax") {
  const auto& map = *default_map();
  const std::vector<Cell> pos{map.zone(1).cells[0], map.zone(3).cells[0]};
  std::vector<AgentScores> s{scores_of({0, 0, 0, 0, 0, 0, 0, 0}), scores_of({0, 0, 0, 0, 0, 0, 0, 0})};
  for (int a = 0; a < 8; ++a)
    if (apply_action(map, pos[0], action_from_index(a))) {
      (*s[0])[a] = 1.0;
      break;
    }
  for (int a = 7; a >= 0; --a)
    if (apply_action(map, pos[1], action_from_index(a))) {
      (*s[1])[a] = 2.0;
      break;
    }
  const auto r = safe_consensus(s, pos, map, 300.0);
  for (int j = 0; j < 2; ++j) {
    REQUIRE(r.actions[j]);
    CHECK((*s[j])[action_index(*r.actions[j])] > 0.5);
    CHECK_FALSE(r.boxed[j]);
  }
  CHECK(r.restarts == 0);
}

TEST_CASE("consensus: two close agents agree with a 64-joint enumeration") {
  const auto m = pond();
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> coord(0, 11);
  int trials = 0;
  while (trials < 300) {
    const std::vector<Cell> pos{{coord(rng), coord(rng)}, {coord(rng), coord(rng)}};
    if (distance_m(*m, pos[0], pos[1]) < 300.0 || distance_m(*m, pos[0], pos[1]) > 1800.0) continue;
    ++trials;
    const auto s = random_scores(2, rng);
    const auto r = safe_consensus(s, pos, *m, 300.0);
    if (r.restarts) continue;
    const double best0 = *std::max_element(s[0]->begin(), s[0]->end());
    const double best1 = *std::max_element(s[1]->begin(), s[1]->end());
    const int first = best0 >= best1 ? 0 : 1, second = 1 - first;
    // First served: its best action that is merely feasible.
    double top = -1.0;
    for (int a = 0; a < 8; ++a)
      if (apply_action(*m, pos[first], action_from_index(a))) top = std::max(top, (*s[first])[a]);
    REQUIRE(r.actions[first]);
    CHECK((*s[first])[action_index(*r.actions[first])] == top);
    // Second served: the best over the joint table with the first action fixed.
    double best = -1.0;
    for (int a = 0; a < 8; ++a)
      for (int b = 0; b < 8; ++b) {
        if (action_from_index(a) != *r.actions[first]) continue;
        const auto ca = apply_action(*m, pos[first], action_from_index(a));
        const auto cb = apply_action(*m, pos[second], action_from_index(b));
        if (ca && cb && distance_m(*m, *ca, *cb) >= 300.0) best = std::max(best, (*s[second])[b]);
      }
    if (best < 0.0) {
      CHECK_FALSE(r.actions[second]);
      CHECK(r.boxed[second]);
    } else {
      REQUIRE(r.actions[second]);
      CHECK((*s[second])[action_index(*r.actions[second])] == best);
    }
  }
}

TEST_CASE("consensus: a boxed agent stays put") {
  const NavMap m(3, 3, 290.0, std::vector<std::uint8_t>(9, 1));
  const std::vector<Cell> pos{{1, 1}};
  const std::vector<AgentScores> s{scores_of({1, 2, 3, 4, 5, 6, 7, 8})};
  const auto r = safe_consensus(s, pos, m, 300.0);
  CHECK_FALSE(r.actions[0]);
  CHECK(r.boxed[0]);
}

TEST_CASE("consensus: stay requests are honoured and kept clear of") {
  const auto m = pond();
  const std::vector<Cell> pos{{5, 5}, {5, 3}};
  const std::vector<AgentScores> s{std::nullopt, scores_of({0, 0, 9, 0, 0, 0, 0, 0})};  // E lands on agent 0
  const auto r = safe_consensus(s, pos, *m, 300.0);
  CHECK_FALSE(r.actions[0]);
  REQUIRE(r.actions[1]);
  CHECK(*r.actions[1] != Action::E);
}

TEST_CASE("consensus fuzz: joint moves are feasible and safe") {
  const auto& map = *default_map();
  std::mt19937_64 rng(6);
  int unsafe = 0;
  for (int t = 0; t < 10000; ++t) {
    const int n = 2 + static_cast<int>(rng() % 2);
    std::vector<Cell> pos;
    const Cell anchor = map.navigable_cells()[rng() % map.navigable_count()];
    while (static_cast<int>(pos.size()) < n) {
      const auto near = disk(map, anchor, 1200.0);
      const Cell c = near[rng() % near.size()];
      pos.push_back(c);
      if (min_separation(map, pos) < 300.0) pos.pop_back();
    }
    const auto s = random_scores(n, rng);
    const auto r = safe_consensus(s, pos, map, 300.0);
    std::vector<Cell> next;
    for (int j = 0; j < n; ++j) {
      const auto c = target_of(map, pos[j], r.actions[j]);
      REQUIRE(c);
      next.push_back(*c);
      CHECK(r.boxed[j] == !r.actions[j]);
    }
    if (min_separation(map, next) < 300.0) ++unsafe;
  }
  CHECK(unsafe == 0);
}

TEST_CASE("consensus is permutation equivariant") {
  const auto& map = *default_map();
  std::mt19937_64 rng(7);
  for (int t = 0; t < 500; ++t) {
    std::vector<Cell> pos;
    const Cell anchor = map.navigable_cells()[rng() % map.navigable_count()];
    const auto near = disk(map, anchor, 1000.0);
    while (pos.size() < 3) {
      pos.push_back(near[rng() % near.size()]);
      if (min_separation(map, pos) < 300.0) pos.pop_back();
    }
    const auto s = random_scores(3, rng);
    const auto r = safe_consensus(s, pos, map, 300.0);
    const std::array<int, 3> perm{2, 0, 1};
    std::vector<Cell> pp;
    std::vector<AgentScores> ps;
    for (int k : perm) {
      pp.push_back(pos[k]);
      ps.push_back(s[k]);
    }
    const auto rp = safe_consensus(ps, pp, map, 300.0);
    for (int i = 0; i < 3; ++i) CHECK(rp.actions[i] == r.actions[perm[i]]);
  }
}

TEST_CASE("random scores are uniform over the argmax") {
  std::mt19937_64 rng(8);
  std::array<int, 8> counts{};
  for (int t = 0; t < 8000; ++t) {
    const auto s = random_scores(1, rng);
    ++counts[std::max_element(s[0]->begin(), s[0]->end()) - s[0]->begin()];
  }
  for (int c : counts) CHECK(std::abs(c - 1000) < 150);
}

TEST_CASE("epsilon schedule") {
  TrainConfig cfg;
  CHECK(epsilon(0, cfg) == 1.0);
  CHECK(epsilon(5000, cfg) == 0.05);
  CHECK(epsilon(1000000000, cfg) == 0.05);
  CHECK(epsilon(100, cfg) == doctest::Approx(1.0 - 100 * 1.9e-4));
  CHECK_THROWS_AS(epsilon(-1, cfg), ContractError);
  cfg.eps_decay = scaled_eps_decay(600);
  CHECK(epsilon(300, cfg) == doctest::Approx(0.05));
  CHECK(epsilon(150, cfg) > 0.5);
}

TEST_CASE("replay buffer is a FIFO and samples distinct indices") {
  ReplayBuffer buf(3);
  for (int i = 0; i < 5; ++i) buf.push(Transition{{}, i, 0.0f, {}, false});
  CHECK(buf.size() == 3);
  CHECK(buf.at(0).action == 2);
  CHECK(buf.at(2).action == 4);
  CHECK_THROWS_AS(buf.at(3), ContractError);
  CHECK_THROWS_AS(ReplayBuffer(0), ConfigError);

  ReplayBuffer big(100);
  for (int i = 0; i < 100; ++i) big.push(Transition{{}, i, 0.0f, {}, false});
  std::mt19937_64 rng(9);
  std::vector<int> hits(100, 0);
  for (int t = 0; t < 2000; ++t) {
    auto idx = big.sample_indices(10, rng);
    std::sort(idx.begin(), idx.end());
    CHECK(std::adjacent_find(idx.begin(), idx.end()) == idx.end());
    for (auto i : idx) ++hits[i];
  }
  for (int h : hits) CHECK(std::abs(h - 200) < 70);
  CHECK_THROWS_AS(buf.sample_indices(4, rng), ContractError);
}

TEST_CASE("TD targets") {
  const auto m = pond();
  FleetEnv env(small_env(m, 1));
  env.reset(1, 2);
  DDQLearner learner(small_train(*m), *m);
  std::vector<Transition> ts;
  std::mt19937_64 rng(10);
  for (int i = 0; i < 6; ++i) {
    const CompactObservation o = env.compact(0);
    const auto cons = safe_consensus(random_scores(1, rng), env.positions(), *m, 300.0);
    const auto r = env.step(cons.actions);
    ts.push_back({o, cons.actions[0] ? action_index(*cons.actions[0]) : 0, static_cast<float>(r.rewards[0]),
                  env.compact(0), i % 2 == 0});
  }
  std::vector<const Transition*> batch;
  for (const auto& t : ts) batch.push_back(&t);
  const double gamma = 0.9;
  const auto y = td_targets(batch, learner.online(), learner.target(), gamma, *m);
  for (std::size_t i = 0; i < ts.size(); ++i) {
    if (ts[i].done) {
      CHECK(y[i] == static_cast<double>(ts[i].reward));
      continue;
    }
    // One sample at a time: argmax from the online net, score from the target net.
    const std::vector<const CompactObservation*> one{&ts[i].next_obs};
    std::vector<float> x;
    encode_batch(*m, one, x);
    Eigen::Index a;
    learner.online().forward(x, 1).col(0).maxCoeff(&a);
    const double q = learner.target().forward(x, 1)(a, 0);
    CHECK(y[i] == doctest::Approx(ts[i].reward + gamma * q).epsilon(1e-5));
  }

  // Polyak extremes.
  learner.train_step(batch);
  const std::vector<float> before(learner.target().params().begin(), learner.target().params().end());
  learner.polyak(0.0);
  CHECK(std::equal(before.begin(), before.end(), learner.target().params().begin()));
  learner.polyak(1.0);
  CHECK(std::equal(learner.target().params().begin(), learner.target().params().end(), learner.online().params().begin()));
}

TEST_CASE("a fixed batch is overfit") {
  const auto m = pond();
  FleetEnv env(small_env(m, 1));
  env.reset(3, 4);
  TrainConfig cfg = small_train(*m);
  cfg.lr = 3e-3;
  DDQLearner learner(cfg, *m);
  std::vector<Transition> ts;
  std::mt19937_64 rng(11);
  while (!env.done()) {
    const CompactObservation o = env.compact(0);
    const auto cons = safe_consensus(random_scores(1, rng), env.positions(), *m, 300.0);
    const auto r = env.step(cons.actions);
    if (cons.actions[0]) ts.push_back({o, action_index(*cons.actions[0]), static_cast<float>(r.rewards[0]), env.compact(0), true});
  }
  REQUIRE(ts.size() >= 4);
  std::vector<const Transition*> batch;
  for (const auto& t : ts) batch.push_back(&t);
  const double first = learner.train_step(batch);
  double last = first;
  for (int i = 0; i < 300; ++i) last = learner.train_step(batch);
  MESSAGE("loss " << first << " -> " << last);
  CHECK(last < 0.01 * first);
}

TEST_CASE("run_training bookkeeping and determinism") {
  const auto m = pond();
  for (int n : {1, 3}) {
    TrainConfig cfg = small_train(*m);
    cfg.episodes = 2;
    const EnvConfig e = small_env(m, n);
    std::vector<EpisodeLog> seen;
    const TrainResult a = run_training(cfg, e, [&](const EpisodeLog& l) { seen.push_back(l); });
    REQUIRE(a.episodes.size() == 2);
    CHECK(seen.size() == 2);
    int nulls = 0;
    for (const auto& l : a.episodes) nulls += l.null_actions;
    CHECK(a.buffer_size == static_cast<std::size_t>(2 * 10 * n - nulls));
    CHECK(a.episodes[0].epsilon == 1.0);
    CHECK(a.episodes[1].train_steps > 0);
    const TrainResult b = run_training(cfg, e);
    CHECK(a.weights == b.weights);
    CHECK(a.episodes[1].final_sor == b.episodes[1].final_sor);
  }
}

TEST_CASE("checkpoint round trip and rejection") {
  const QNetworkSpec s = small_net(6, 6);
  QNetwork<float> net(s);
  std::mt19937_64 rng(12);
  net.init(rng);
  const auto dir = std::filesystem::temp_directory_path() / "ipp_ckpt_test";
  std::filesystem::create_directories(dir);
  const auto path = dir / "net.ckpt";
  save_checkpoint(path, s, net.params());
  const auto w = load_checkpoint(path, s);
  CHECK(std::equal(w.begin(), w.end(), net.params().begin()));
  CHECK(std::filesystem::file_size(path) == 4 + 4 + 8 + 8 + 4 * s.parameter_count());

  QNetworkSpec other = s;
  other.fc_width = 8;
  CHECK_THROWS_AS(load_checkpoint(path, other), ConfigError);
  CHECK_THROWS_AS(save_checkpoint(path, other, net.params()), ContractError);
  CHECK_THROWS_AS(load_checkpoint(dir / "missing.ckpt", s), ConfigError);

  std::filesystem::resize_file(path, 100);
  CHECK_THROWS_AS(load_checkpoint(path, s), ConfigError);
  {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    os << "NOPE and more bytes";
  }
  CHECK_THROWS_AS(load_checkpoint(path, s), ConfigError);
  std::filesystem::remove_all(dir);
}
