#include "ipp/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "ipp/errors.hpp"

namespace ipp {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(const std::string& v, int line) {
  T out{};
  const auto* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) throw ParseError(line, "bad number '" + v + "'");
  return out;
}

bool parse_bool(const std::string& v, int line) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ParseError(line, "bad boolean '" + v + "'");
}

using Setter = std::function<void(ExperimentConfig&, const std::string&, int)>;

const std::map<std::string, Setter, std::less<>>& setters() {
  static const std::map<std::string, Setter, std::less<>> s = {
      {"map", [](auto& c, auto& v, int) { c.map = v; }},
      {"gt", [](auto& c, auto& v, int l) {
         try {
           c.gt = parse_field_kind(v);
         } catch (const ConfigError& e) {
           throw ParseError(l, e.what());
         }
       }},
      {"agents", [](auto& c, auto& v, int l) { c.agents = parse_number<int>(v, l); }},
      {"planner", [](auto& c, auto& v, int l) {
         try {
           c.planner = parse_planner_kind(v);
         } catch (const ConfigError& e) {
           throw ParseError(l, e.what());
         }
       }},
      {"reward", [](auto& c, auto& v, int l) {
         try {
           c.reward = parse_reward_kind(v);
         } catch (const ConfigError& e) {
           throw ParseError(l, e.what());
         }
       }},
      {"episodes", [](auto& c, auto& v, int l) { c.episodes = parse_number<int>(v, l); }},
      {"seeds", [](auto& c, auto& v, int l) {
         c.seeds.clear();
         std::string tok;
         std::istringstream is(v);
         while (std::getline(is, tok, ',')) {
           tok = trim(tok);
           if (!tok.empty()) c.seeds.push_back(parse_number<std::uint64_t>(tok, l));
         }
       }},
      {"ell_min", [](auto& c, auto& v, int l) { c.ell_min = parse_number<double>(v, l); }},
      {"ell_max", [](auto& c, auto& v, int l) { c.ell_max = parse_number<double>(v, l); }},
      {"out", [](auto& c, auto& v, int) { c.out = v; }},
      {"checkpoint", [](auto& c, auto& v, int) { c.checkpoint = v; }},
      {"budget", [](auto& c, auto& v, int l) { c.budget = parse_number<int>(v, l); }},
      {"safety_m", [](auto& c, auto& v, int l) { c.safety_m = parse_number<double>(v, l); }},
      {"influence_m", [](auto& c, auto& v, int l) { c.influence_m = parse_number<double>(v, l); }},
      {"spacing_m", [](auto& c, auto& v, int l) { c.spacing_m = parse_number<double>(v, l); }},
      {"fusion", [](auto& c, auto& v, int l) {
         if (v == "full")
           c.fusion = FusionMode::Full;
         else if (v == "covering")
           c.fusion = FusionMode::Covering;
         else
           throw ParseError(l, "fusion must be full or covering");
       }},
      {"pso_global", [](auto& c, auto& v, int l) { c.pso_global = parse_bool(v, l); }},
      {"pso_inertia", [](auto& c, auto& v, int l) { c.pso.inertia = parse_number<double>(v, l); }},
      {"pso_c1", [](auto& c, auto& v, int l) { c.pso.c[0] = parse_number<double>(v, l); }},
      {"pso_c2", [](auto& c, auto& v, int l) { c.pso.c[1] = parse_number<double>(v, l); }},
      {"pso_c3", [](auto& c, auto& v, int l) { c.pso.c[2] = parse_number<double>(v, l); }},
      {"pso_c4", [](auto& c, auto& v, int l) { c.pso.c[3] = parse_number<double>(v, l); }},
      {"train_episodes", [](auto& c, auto& v, int l) { c.train_episodes = parse_number<int>(v, l); }},
      {"lr", [](auto& c, auto& v, int l) { c.lr = parse_number<double>(v, l); }},
      {"batch", [](auto& c, auto& v, int l) { c.batch = parse_number<int>(v, l); }},
      {"gamma", [](auto& c, auto& v, int l) { c.gamma = parse_number<double>(v, l); }},
      {"tau", [](auto& c, auto& v, int l) { c.tau = parse_number<double>(v, l); }},
      {"eps_min", [](auto& c, auto& v, int l) { c.eps_min = parse_number<double>(v, l); }},
      {"eps_decay", [](auto& c, auto& v, int l) { c.eps_decay = parse_number<double>(v, l); }},
      {"capacity", [](auto& c, auto& v, int l) { c.capacity = parse_number<std::size_t>(v, l); }},
      {"bench_missions", [](auto& c, auto& v, int l) { c.bench_missions = parse_number<int>(v, l); }},
  };
  return s;
}

void validate(const ExperimentConfig& c) {
  if (c.agents < 1) throw ConfigError("agents must be at least 1");
  if (c.episodes < 1) throw ConfigError("episodes must be at least 1");
  if (c.seeds.empty()) throw ConfigError("seeds list is empty");
  if (!(c.ell_min > 0.0) || !(c.ell_max >= c.ell_min)) throw ConfigError("need 0 < ell_min <= ell_max");
  if (c.budget < 1) throw ConfigError("budget must be positive");
  if (c.train_episodes < 1 || c.batch < 1 || c.capacity < 1) throw ConfigError("training sizes must be positive");
  if (c.bench_missions < 1) throw ConfigError("bench_missions must be positive");
  if (!c.map.empty() && !std::filesystem::exists(c.map)) throw ConfigError("map file not found: " + c.map.string());
}

}  // namespace

ExperimentConfig parse_config(std::string_view text) {
  ExperimentConfig cfg;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(line_no, "expected 'key = value'");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    const auto it = setters().find(key);
    if (it == setters().end()) throw ParseError(line_no, "unknown key '" + key + "'");
    it->second(cfg, value, line_no);
  }
  validate(cfg);
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str());
}

std::string to_text(const ExperimentConfig& c) {
  std::ostringstream os;
  os.precision(17);
  os << "map = " << c.map.string() << '\n'
     << "gt = " << field_kind_name(c.gt) << '\n'
     << "agents = " << c.agents << '\n'
     << "planner = " << planner_kind_name(c.planner) << '\n'
     << "reward = " << reward_kind_name(c.reward) << '\n'
     << "episodes = " << c.episodes << '\n'
     << "seeds = ";
  for (std::size_t i = 0; i < c.seeds.size(); ++i) os << (i ? "," : "") << c.seeds[i];
  os << '\n'
     << "ell_min = " << c.ell_min << '\n'
     << "ell_max = " << c.ell_max << '\n'
     << "out = " << c.out.string() << '\n'
     << "checkpoint = " << c.checkpoint.string() << '\n'
     << "budget = " << c.budget << '\n'
     << "safety_m = " << c.safety_m << '\n'
     << "influence_m = " << c.influence_m << '\n'
     << "spacing_m = " << c.spacing_m << '\n'
     << "fusion = " << (c.fusion == FusionMode::Full ? "full" : "covering") << '\n'
     << "pso_global = " << (c.pso_global ? "true" : "false") << '\n'
     << "pso_inertia = " << c.pso.inertia << '\n';
  for (int k = 0; k < 4; ++k) os << "pso_c" << k + 1 << " = " << c.pso.c[k] << '\n';
  os << "train_episodes = " << c.train_episodes << '\n'
     << "lr = " << c.lr << '\n'
     << "batch = " << c.batch << '\n'
     << "gamma = " << c.gamma << '\n'
     << "tau = " << c.tau << '\n'
     << "eps_min = " << c.eps_min << '\n'
     << "eps_decay = " << c.eps_decay << '\n'
     << "capacity = " << c.capacity << '\n'
     << "bench_missions = " << c.bench_missions << '\n';
  return os.str();
}

NavMapPtr resolve_map(const ExperimentConfig& cfg) {
  if (cfg.map.empty()) return default_map();
  return std::make_shared<const NavMap>(load_map_file(cfg.map));
}

EnvConfig make_env_config(const ExperimentConfig& cfg, const NavMapPtr& map) {
  EnvConfig e;
  e.map = map;
  e.agents = cfg.agents;
  e.gt.kind = cfg.gt;
  e.reward = cfg.reward;
  e.budget = cfg.budget;
  e.safety_m = cfg.safety_m;
  e.influence_m = cfg.influence_m;
  e.spacing_m = cfg.spacing_m;
  e.global_model = cfg.planner == PlannerKind::PSO && cfg.pso_global;
  e.gp.bounds = {cfg.ell_min, cfg.ell_max};
  e.gp.fusion = cfg.fusion;
  return e;
}

TrainConfig make_train_config(const ExperimentConfig& cfg, const NavMapPtr& map) {
  TrainConfig t;
  t.lr = cfg.lr;
  t.batch = cfg.batch;
  t.gamma = cfg.gamma;
  t.tau = cfg.tau;
  t.eps_min = cfg.eps_min;
  t.eps_decay = cfg.eps_decay > 0.0 ? cfg.eps_decay : scaled_eps_decay(cfg.train_episodes, cfg.eps_min);
  t.episodes = cfg.train_episodes;
  t.capacity = cfg.capacity;
  t.seed = cfg.seeds.front();
  t.net.height = map->height();
  t.net.width = map->width();
  return t;
}

std::filesystem::path checkpoint_path(const ExperimentConfig& cfg) {
  return cfg.checkpoint.empty() ? cfg.out / "ddql.ckpt" : cfg.checkpoint;
}

}  // namespace ipp
