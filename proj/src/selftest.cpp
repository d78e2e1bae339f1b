#include <cmath>
#include <ostream>
#include <random>

#include <Eigen/LU>

#include "ipp/harness.hpp"

namespace ipp {

namespace {

bool gp_matches_explicit_inverse() {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> coord(0, 19);
  std::uniform_real_distribution<double> val(0.0, 1.0), ell(0.5, 10.0);
  for (int trial = 0; trial < 20; ++trial) {
    SampleSet data;
    for (int i = 0; i < 8; ++i) data.add({coord(rng), coord(rng)}, val(rng));
    const SampleSet d = deduplicate(data);
    const KernelParams kp{1.0, ell(rng)};
    std::vector<Cell> q;
    for (int i = 0; i < 10; ++i) q.push_back({coord(rng), coord(rng)});
    const Posterior p = predict(data, kp, 1e-3, q);
    const auto n = static_cast<Eigen::Index>(d.size());
    Eigen::MatrixXd k(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) k(i, j) = rbf(d.locations[i], d.locations[j], kp);
    k.diagonal().array() += p.noise * p.noise;
    const Eigen::MatrixXd kinv = k.inverse();
    const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(d.values.data(), n);
    for (std::size_t m = 0; m < q.size(); ++m) {
      Eigen::VectorXd ks(n);
      for (Eigen::Index i = 0; i < n; ++i) ks(i) = rbf(d.locations[i], q[m], kp);
      const double mu = ks.dot(kinv * y);
      const double var = std::max(1.0 - ks.dot(kinv * ks), kVarianceFloor);
      if (std::abs(mu - p.mean[m]) > 1e-6 || std::abs(var - p.variance[m]) > 1e-6) return false;
    }
  }
  return true;
}

bool global_fusion_is_plain_predict() {
  const auto& map = default_map();
  LocalGPModel model(map, global_layout(*map));
  std::mt19937_64 rng(5);
  const auto& cells = map->navigable_cells();
  std::uniform_int_distribution<std::size_t> pick(0, cells.size() - 1);
  for (int i = 0; i < 12; ++i) model.add_sample(cells[pick(rng)], std::uniform_real_distribution<double>(0, 1)(rng));
  const Posterior p = predict(model.samples(0), model.params(0), model.config().noise, cells);
  for (std::size_t i = 0; i < cells.size(); ++i)
    if (model.fused().mean[i] != p.mean[i] || model.fused().std[i] != std::sqrt(p.variance[i])) return false;
  return true;
}

bool consensus_is_safe() {
  EnvConfig cfg;
  cfg.agents = 3;
  cfg.gp.refit = false;
  FleetEnv env(cfg);
  std::mt19937_64 rng(7);
  for (int ep = 0; ep < 4; ++ep) {
    env.reset(static_cast<std::uint64_t>(ep), static_cast<std::uint64_t>(ep) + 100);
    while (!env.done()) {
      const auto c = safe_consensus(random_scores(3, rng), env.positions(), env.map(), cfg.safety_m);
      env.step(c.actions);
      if (min_separation(env.map(), env.positions()) < cfg.safety_m) return false;
    }
  }
  return true;
}

bool dueling_identity() {
  QNetworkSpec spec;
  spec.height = 8;
  spec.width = 8;
  spec.conv = {4, 4, 4};
  spec.fc_width = 16;
  QNetwork<double> net(spec);
  std::mt19937_64 rng(3);
  net.init(rng);
  std::vector<double> x(static_cast<std::size_t>(spec.input_size()) * 4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (double& v : x) v = u(rng);
  QNetwork<double>::Matrix value;
  const auto& q = net.forward(x, 4, &value);
  for (Eigen::Index b = 0; b < q.cols(); ++b)
    if (std::abs(q.col(b).mean() - value(0, b)) > 1e-9) return false;
  return true;
}

bool metrics_zero_on_truth() {
  GTConfig g;
  g.seed = 1;
  const ScalarField f = gen_wqp(default_map(), g);
  const PeakErrors e = peak_errors(f.values(), f);
  return sor(f.values(), f.values()) == 0.0 && nsor(f.values(), f.values()) == 0.0 && e.max == 0.0;
}

}  // namespace

bool run_selftest(std::ostream& os) {
  struct Check {
    const char* name;
    bool (*fn)();
  };
  const Check checks[] = {
      {"gp posterior vs explicit inverse", gp_matches_explicit_inverse},
      {"single global GP fusion equals predict", global_fusion_is_plain_predict},
      {"consensus keeps the safety distance", consensus_is_safe},
      {"dueling head identity", dueling_identity},
      {"metrics vanish on the ground truth", metrics_zero_on_truth},
  };
  bool all = true;
  for (const auto& c : checks) {
    bool ok = false;
    try {
      ok = c.fn();
    } catch (const std::exception& e) {
      os << "[FAIL] " << c.name << ": " << e.what() << '\n';
      all = false;
      continue;
    }
    os << (ok ? "[PASS] " : "[FAIL] ") << c.name << '\n';
    all = all && ok;
  }
  return all;
}

}  // namespace ipp
