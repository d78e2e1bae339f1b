// Command-line front end: train, eval, gp-bench, render, selftest.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "ipp/harness.hpp"

namespace {

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string planner;
  std::optional<int> agents;
  std::string gt;
  std::string reward;
  std::string checkpoint;
};

void add_flags(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "key = value config file")->check(CLI::ExistingFile);
  cmd->add_option("--seed", o.seed, "base seed (replaces the config's seed list)");
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--planner", o.planner, "fleet policy")->check(CLI::IsMember({"ddql", "lmpp", "rwpp", "pso"}));
  cmd->add_option("--agents", o.agents, "fleet size")->check(CLI::IsMember({1, 2, 3}));
  cmd->add_option("--gt", o.gt, "ground truth kind")->check(CLI::IsMember({"wqp", "algae"}));
  cmd->add_option("--reward", o.reward, "reward kind")->check(CLI::IsMember({"mu", "sigma"}));
  cmd->add_option("--checkpoint", o.checkpoint, "Q-network checkpoint path");
}

ipp::ExperimentConfig resolve(const Overrides& o) {
  ipp::ExperimentConfig c = o.config.empty() ? ipp::ExperimentConfig{} : ipp::load_config(o.config);
  if (o.seed) c.seeds = {*o.seed};
  if (!o.out.empty()) c.out = o.out;
  if (!o.planner.empty()) c.planner = ipp::parse_planner_kind(o.planner);
  if (o.agents) c.agents = *o.agents;
  if (!o.gt.empty()) c.gt = ipp::parse_field_kind(o.gt);
  if (!o.reward.empty()) c.reward = ipp::parse_reward_kind(o.reward);
  if (!o.checkpoint.empty()) c.checkpoint = o.checkpoint;
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-agent informative path planning with local Gaussian processes"};
  app.require_subcommand(1);
  Overrides o;
  auto* train = app.add_subcommand("train", "train the shared Q-network and write a checkpoint");
  auto* eval = app.add_subcommand("eval", "evaluate a planner and write CSV results");
  auto* bench = app.add_subcommand("gp-bench", "compare the local GP bank against one global GP");
  auto* render = app.add_subcommand("render", "play one episode and write PGM/CSV surfaces");
  auto* selftest = app.add_subcommand("selftest", "run the built-in oracle checks");
  for (auto* cmd : {train, eval, bench, render}) add_flags(cmd, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }

  try {
    if (selftest->parsed()) return ipp::run_selftest(std::cout) ? 0 : 1;
    const ipp::ExperimentConfig cfg = resolve(o);
    if (train->parsed()) {
      const auto r = ipp::run_train(cfg);
      std::cout << "trained " << r.episodes.size() << " episodes, final SoR " << r.episodes.back().final_sor
                << ", checkpoint " << ipp::checkpoint_path(cfg).string() << '\n';
    } else if (eval->parsed()) {
      const auto r = ipp::run_eval(cfg);
      std::vector<double> final_sor;
      for (const auto& e : r.episodes) final_sor.push_back(e.metrics.back().sor);
      std::cout << ipp::planner_kind_name(cfg.planner) << ": " << r.episodes.size() << " episodes, median final SoR "
                << ipp::median(final_sor) << ", results in " << cfg.out.string() << '\n';
    } else if (bench->parsed()) {
      const auto r = ipp::gp_bench(cfg);
      std::cout << "gp-bench: " << cfg.bench_missions << " missions, " << r.local_gp_count << " local GPs, results in "
                << cfg.out.string() << '\n';
    } else if (render->parsed()) {
      ipp::render(cfg);
      std::cout << "rendered to " << cfg.out.string() << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
