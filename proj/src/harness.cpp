#include "ipp/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "ipp/errors.hpp"
#include "ipp/seeding.hpp"

namespace ipp {

int worker_count() {
  if (const char* env = std::getenv("IPP_FLEET_THREADS"); env && *env) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end && *end == '\0' && v >= 1) return static_cast<int>(std::min<long>(v, 1024));
    throw ConfigError("IPP_FLEET_THREADS must be a positive integer");
  }
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(worker_count()), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::mutex mu;
  std::size_t next = 0;
  std::exception_ptr error;
  auto work = [&] {
    for (;;) {
      std::size_t i;
      {
        std::lock_guard lock(mu);
        if (error || next >= n) return;
        i = next++;
      }
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(work);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

std::vector<int> checkpoint_steps(int budget) {
  std::vector<int> out;
  for (int k = 1; k <= 3; ++k) {
    const int s = static_cast<int>(std::lround(budget * k / 3.0));
    if (s >= 1 && (out.empty() || s > out.back())) out.push_back(s);
  }
  return out;
}

MetricRow measure(const FleetEnv& env, std::string_view planner, int episode, const std::vector<Cell>& peaks) {
  const auto& fused = env.model().fused();
  const auto& gt = env.field().values();
  MetricRow r;
  r.episode = episode;
  r.step = env.step_count();
  r.planner = std::string(planner);
  r.agents = env.agents();
  r.sor = sor(fused.mean, gt);
  r.nsor = nsor(fused.mean, gt);
  if (!peaks.empty()) {
    const PeakErrors e = peak_errors(fused.mean, env.field(), peaks);
    r.avg_peak = e.avg;
    r.max_peak = e.max;
  }
  r.mean_sigma = mean(fused.std);
  return r;
}

EpisodeOutcome play_episode(FleetEnv& env, Planner& planner, std::uint64_t gt_seed, std::uint64_t placement_seed,
                            std::uint64_t planner_seed, int episode) {
  env.reset(gt_seed, placement_seed);
  planner.begin(env, planner_seed);
  EpisodeOutcome out;
  out.episode = episode;
  out.gt_seed = gt_seed;
  const auto peaks = detect_peaks(env.field());
  const auto marks = checkpoint_steps(env.budget());
  out.min_separation = min_separation(env.map(), env.positions());
  out.paths.resize(static_cast<std::size_t>(env.agents()));
  const double sor0 = sor(env.model().fused().mean, env.field().values());
  for (int j = 0; j < env.agents(); ++j) {
    out.paths[j].push_back(env.positions()[j]);
    out.trace.push_back({episode, 0, j, env.positions()[j], std::nullopt, 0.0, sor0});
  }
  while (!env.done()) {
    const auto scores = planner.scores(env);
    const auto cons = safe_consensus(scores, env.positions(), env.map(), env.config().safety_m);
    const StepResult res = env.step(cons.actions);
    planner.after_step(env, cons.actions);
    out.min_separation = std::min(out.min_separation, min_separation(env.map(), env.positions()));
    const double s = sor(env.model().fused().mean, env.field().values());
    for (int j = 0; j < env.agents(); ++j) {
      if (!cons.actions[j]) ++out.null_actions;
      out.paths[j].push_back(env.positions()[j]);
      out.trace.push_back({episode, env.step_count(), j, env.positions()[j], cons.actions[j], res.rewards[j], s});
    }
    if (std::find(marks.begin(), marks.end(), env.step_count()) != marks.end())
      out.metrics.push_back(measure(env, planner.name(), episode, peaks));
  }
  return out;
}

namespace {

std::unique_ptr<Planner> planner_for(const ExperimentConfig& cfg, const QNetworkSpec& spec,
                                     const std::vector<float>& weights) {
  switch (cfg.planner) {
    case PlannerKind::LMPP: return std::make_unique<LawnMowerPlanner>();
    case PlannerKind::RWPP: return std::make_unique<RandomWandererPlanner>();
    case PlannerKind::PSO: return std::make_unique<PSOPlanner>(cfg.pso);
    case PlannerKind::DDQL: return std::make_unique<QPolicyPlanner>(spec, weights);
  }
  throw ConfigError("unknown planner");
}

std::string num(double v) {
  if (!std::isfinite(v)) return "NA";
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

std::string num(const std::optional<double>& v) { return v ? num(*v) : "NA"; }

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw ConfigError("cannot write " + path.string());
  return f;
}

void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) throw ConfigError("cannot create output directory " + dir.string());
}

}  // namespace

std::unique_ptr<Planner> make_planner(const ExperimentConfig& cfg) {
  const auto map = resolve_map(cfg);
  const QNetworkSpec spec = make_train_config(cfg, map).net;
  std::vector<float> weights;
  if (cfg.planner == PlannerKind::DDQL) weights = load_checkpoint(checkpoint_path(cfg), spec);
  return planner_for(cfg, spec, weights);
}

EvalResult run_eval(const ExperimentConfig& cfg, bool write) {
  const auto map = resolve_map(cfg);
  const EnvConfig env_cfg = make_env_config(cfg, map);
  const QNetworkSpec spec = make_train_config(cfg, map).net;
  std::vector<float> weights;
  if (cfg.planner == PlannerKind::DDQL) weights = load_checkpoint(checkpoint_path(cfg), spec);
  if (write) ensure_dir(cfg.out);

  struct Task {
    std::uint64_t seed;
    int episode;
  };
  std::vector<Task> tasks;
  for (std::uint64_t s : cfg.seeds)
    for (int e = 0; e < cfg.episodes; ++e) tasks.push_back({s, e});
  EvalResult result;
  result.episodes.resize(tasks.size());
  { const FleetEnv check(env_cfg); }  // surface config errors before any worker starts
  parallel_for(tasks.size(), [&](std::size_t i) {
    const Task& t = tasks[i];
    FleetEnv env(env_cfg);
    auto planner = planner_for(cfg, spec, weights);
    const auto e = static_cast<std::uint64_t>(t.episode);
    EpisodeOutcome o = play_episode(env, *planner, gt_seed(t.seed, SeedSet::Evaluation, e), derive_seed(t.seed, 2, e),
                                    derive_seed(t.seed, 4, e), static_cast<int>(i));
    o.seed = t.seed;
    result.episodes[i] = std::move(o);
  });
  if (!write) return result;

  {
    auto f = open_out(cfg.out / "run_config.txt");
    f << to_text(cfg) << "# rank test: Mann-Whitney, normal approximation with tie correction\n";
  }
  const std::string gt_name(field_kind_name(cfg.gt));
  {
    auto f = open_out(cfg.out / "eval_summary.csv");
    f << "seed,episode,gt_seed,planner,agents,gt,sor_33,sor_66,sor_100,nsor,avg_peak_sor,max_peak_sor,mean_sigma,"
         "min_separation_m,null_actions\n";
    for (const auto& o : result.episodes) {
      f << o.seed << ',' << o.episode << ',' << o.gt_seed << ',' << planner_kind_name(cfg.planner) << ',' << cfg.agents
        << ',' << gt_name;
      for (std::size_t k = 0; k < 3; ++k) f << ',' << (k < o.metrics.size() ? num(o.metrics[k].sor) : "NA");
      const MetricRow& last = o.metrics.back();
      f << ',' << num(last.nsor) << ',' << num(last.avg_peak) << ',' << num(last.max_peak) << ','
        << num(last.mean_sigma) << ',' << num(o.min_separation) << ',' << o.null_actions << '\n';
    }
  }
  {
    auto f = open_out(cfg.out / "eval_metrics.csv");
    f << "seed,episode,step,planner,agents,gt,sor,nsor,avg_peak_sor,max_peak_sor,mean_sigma\n";
    for (const auto& o : result.episodes)
      for (const auto& m : o.metrics)
        f << o.seed << ',' << m.episode << ',' << m.step << ',' << m.planner << ',' << m.agents << ',' << gt_name << ','
          << num(m.sor) << ',' << num(m.nsor) << ',' << num(m.avg_peak) << ',' << num(m.max_peak) << ','
          << num(m.mean_sigma) << '\n';
  }
  {
    auto f = open_out(cfg.out / "eval_trace.csv");
    f << "episode,step,agent,row,col,action,reward,sor\n";
    for (const auto& o : result.episodes)
      for (const auto& t : o.trace)
        f << t.episode << ',' << t.step << ',' << t.agent << ',' << t.cell.row << ',' << t.cell.col << ','
          << (t.action ? action_name(*t.action) : "stay") << ',' << num(t.reward) << ',' << num(t.sor) << '\n';
  }
  return result;
}

BenchResult gp_bench(const ExperimentConfig& cfg, bool write) {
  const auto map = resolve_map(cfg);
  EnvConfig env_cfg = make_env_config(cfg, map);
  env_cfg.global_model = false;
  env_cfg.gp.refit = false;  // the environment's own model only drives nothing here
  LocalGPConfig gp_cfg;
  gp_cfg.bounds = {cfg.ell_min, cfg.ell_max};
  gp_cfg.fusion = cfg.fusion;
  const LocalLayout local = build_layout(*map, cfg.spacing_m, cfg.influence_m);
  const LocalLayout global = global_layout(*map);
  const std::uint64_t seed = cfg.seeds.front();
  if (write) ensure_dir(cfg.out);

  const auto missions = static_cast<std::size_t>(cfg.bench_missions);
  std::vector<std::vector<BenchPoint>> per(missions);
  // Sequential on purpose: the timing columns are only meaningful without contention.
  for (std::size_t m = 0; m < missions; ++m) {
    FleetEnv env(env_cfg);
    RandomWandererPlanner planner;
    env.reset(gt_seed(seed, SeedSet::Evaluation, m), derive_seed(seed, 2, m));
    planner.begin(env, derive_seed(seed, 4, m));
    LocalGPModel lm(map, local, gp_cfg);
    LocalGPModel gm(map, global, gp_cfg);
    double tl = 0.0, tg = 0.0;
    int samples = 0;
    auto feed = [&] {
      std::vector<Measurement> batch;
      for (const Cell& c : env.positions()) batch.push_back({c, sample(env.field(), c)});
      samples += static_cast<int>(batch.size());
      using clock = std::chrono::steady_clock;
      auto t0 = clock::now();
      lm.add_samples(batch);
      auto t1 = clock::now();
      gm.add_samples(batch);
      auto t2 = clock::now();
      tl += std::chrono::duration<double>(t1 - t0).count();
      tg += std::chrono::duration<double>(t2 - t1).count();
      per[m].push_back({static_cast<int>(m), env.step_count(), samples, sor(lm.fused().mean, env.field().values()),
                        sor(gm.fused().mean, env.field().values()), tl, tg});
    };
    feed();
    while (!env.done()) {
      const auto scores = planner.scores(env);
      const auto cons = safe_consensus(scores, env.positions(), env.map(), env.config().safety_m);
      env.step(cons.actions);
      planner.after_step(env, cons.actions);
      feed();
    }
  }
  BenchResult result;
  result.local_gp_count = local.size();
  for (auto& v : per) result.points.insert(result.points.end(), v.begin(), v.end());
  if (!write) return result;

  {
    auto f = open_out(cfg.out / "gp_bench.csv");
    f << "mission,step,samples,local_gps,sor_local,sor_global\n";
    for (const auto& p : result.points)
      f << p.mission << ',' << p.step << ',' << p.samples << ',' << local.size() << ',' << num(p.sor_local) << ','
        << num(p.sor_global) << '\n';
  }
  {
    auto f = open_out(cfg.out / "gp_bench_timing.csv");
    f << "mission,step,samples,cum_seconds_local,cum_seconds_global\n";
    for (const auto& p : result.points)
      f << p.mission << ',' << p.step << ',' << p.samples << ',' << num(p.seconds_local) << ','
        << num(p.seconds_global) << '\n';
  }
  return result;
}

std::uint8_t gray_level(double v) {
  if (!(v >= 0.0)) v = 0.0;
  return static_cast<std::uint8_t>(std::lround(255.0 * std::min(v, 1.0)));
}

void write_pgm(const std::filesystem::path& path, int height, int width, std::span<const std::uint8_t> pixels) {
  if (pixels.size() != static_cast<std::size_t>(height) * width) throw ContractError("image size mismatch");
  auto f = open_out(path);
  f << "P5\n" << width << ' ' << height << "\n255\n";
  f.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
  if (!f) throw ConfigError("failed writing " + path.string());
}

std::vector<std::uint8_t> surface_image(const NavMap& map, std::span<const double> values) {
  if (values.size() != map.navigable_count()) throw ContractError("surface does not match the map");
  std::vector<std::uint8_t> img(static_cast<std::size_t>(map.height()) * map.width(), 0);
  const auto& cells = map.navigable_cells();
  for (std::size_t i = 0; i < cells.size(); ++i) img[map.flat(cells[i])] = gray_level(values[i]);
  return img;
}

std::vector<std::uint8_t> path_image(const NavMap& map, const std::vector<std::vector<Cell>>& paths) {
  std::vector<std::uint8_t> img(static_cast<std::size_t>(map.height()) * map.width(), 0);
  for (const Cell& c : map.navigable_cells()) img[map.flat(c)] = 64;
  for (const auto& p : paths)
    for (const Cell& c : p) img[map.flat(c)] = 255;
  return img;
}

void render_snapshot(const Snapshot& snap, const std::filesystem::path& dir) {
  ensure_dir(dir);
  const NavMap& map = *snap.map;
  const std::pair<const char*, const std::vector<double>*> surfaces[] = {
      {"gt", &snap.gt}, {"mu", &snap.mu}, {"sigma", &snap.sigma}};
  for (const auto& [name, values] : surfaces) {
    write_pgm(dir / (std::string(name) + ".pgm"), map.height(), map.width(), surface_image(map, *values));
    auto f = open_out(dir / (std::string(name) + ".csv"));
    f << "row,col,value\n";
    const auto& cells = map.navigable_cells();
    for (std::size_t i = 0; i < cells.size(); ++i) f << cells[i].row << ',' << cells[i].col << ',' << num((*values)[i]) << '\n';
  }
  write_pgm(dir / "paths.pgm", map.height(), map.width(), path_image(map, snap.paths));
}

Snapshot render(const ExperimentConfig& cfg) {
  const auto map = resolve_map(cfg);
  FleetEnv env(make_env_config(cfg, map));
  auto planner = make_planner(cfg);
  const std::uint64_t s = cfg.seeds.front();
  const EpisodeOutcome o =
      play_episode(env, *planner, gt_seed(s, SeedSet::Evaluation, 0), derive_seed(s, 2, 0), derive_seed(s, 4, 0), 0);
  Snapshot snap{map, env.field().values(), env.model().fused().mean, env.model().fused().std, o.paths};
  render_snapshot(snap, cfg.out);
  return snap;
}

TrainResult run_train(const ExperimentConfig& cfg) {
  const auto map = resolve_map(cfg);
  const TrainConfig tc = make_train_config(cfg, map);
  ensure_dir(cfg.out);
  const auto ckpt = checkpoint_path(cfg);
  if (ckpt.has_parent_path()) ensure_dir(ckpt.parent_path());
  auto log = open_out(cfg.out / "train_log.csv");
  log << "episode,epsilon,mean_reward,final_sor,loss_mean,loss_max,train_steps,null_actions\n";
  TrainResult r = run_training(tc, make_env_config(cfg, map), [&](const EpisodeLog& e) {
    log << e.episode << ',' << num(e.epsilon) << ',' << num(e.mean_reward) << ',' << num(e.final_sor) << ','
        << num(e.loss_mean) << ',' << num(e.loss_max) << ',' << e.train_steps << ',' << e.null_actions << '\n';
    log.flush();
  });
  save_checkpoint(ckpt, tc.net, r.weights);
  return r;
}

}  // namespace ipp
