#include "ipp/groundtruth.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "ipp/errors.hpp"

namespace ipp {

namespace {

int draw_in(std::mt19937_64& rng, IntRange r) {
  if (r.hi < r.lo) throw ConfigError("empty integer range");
  return std::uniform_int_distribution<int>(r.lo, r.hi)(rng);
}

Cell draw_cell(std::mt19937_64& rng, const NavMap& map) {
  const auto& cells = map.navigable_cells();
  std::uniform_int_distribution<std::size_t> pick(0, cells.size() - 1);
  return cells[pick(rng)];
}

std::vector<double> normalise(std::vector<double> v) {
  const double peak = *std::max_element(v.begin(), v.end());
  if (!(peak > 0.0) || !std::isfinite(peak)) throw NumericalError("ground truth has no positive mass");
  for (double& x : v) x = std::clamp(x / peak, 0.0, 1.0);
  return v;
}

Cell nearest_cell(const Particle& p) {
  return {static_cast<int>(std::lround(p.row)), static_cast<int>(std::lround(p.col))};
}

}  // namespace

std::string_view field_kind_name(FieldKind k) { return k == FieldKind::WQP ? "wqp" : "algae"; }

FieldKind parse_field_kind(std::string_view s) {
  if (s == "wqp") return FieldKind::WQP;
  if (s == "algae") return FieldKind::Algae;
  throw ConfigError("unknown ground truth kind '" + std::string(s) + "'");
}

ScalarField::ScalarField(NavMapPtr map, FieldKind kind, std::vector<double> values)
    : map_(std::move(map)), kind_(kind), values_(std::move(values)) {
  if (!map_) throw ContractError("scalar field needs a map");
  if (values_.size() != map_->navigable_count())
    throw ContractError("scalar field size does not match the navigable cell count");
}

double ScalarField::at(Cell c) const {
  const int i = map_->navigable_index(c);
  if (i < 0) throw ContractError("cell is not navigable");
  return values_[static_cast<std::size_t>(i)];
}

std::vector<GaussianBump> draw_wqp_bumps(const NavMap& map, const GTConfig& cfg) {
  std::mt19937_64 rng(cfg.seed);
  const int n = draw_in(rng, cfg.wqp_peaks);
  std::uniform_real_distribution<double> width(cfg.wqp_width_min, cfg.wqp_width_max);
  std::uniform_real_distribution<double> amp(cfg.wqp_amp_min, cfg.wqp_amp_max);
  std::vector<GaussianBump> bumps;
  bumps.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    GaussianBump b;
    b.center = draw_cell(rng, map);
    b.width = width(rng);
    b.amplitude = amp(rng);
    bumps.push_back(b);
  }
  return bumps;
}

ScalarField render_wqp(const NavMapPtr& map, const std::vector<GaussianBump>& bumps) {
  const auto& cells = map->navigable_cells();
  std::vector<double> v(cells.size(), 0.0);
  for (std::size_t i = 0; i < cells.size(); ++i) {
    double s = 0.0;
    for (const auto& b : bumps) {
      const double dr = cells[i].row - b.center.row;
      const double dc = cells[i].col - b.center.col;
      s += b.amplitude * std::exp(-(dr * dr + dc * dc) / (2.0 * b.width * b.width));
    }
    v[i] = s;
  }
  return ScalarField(map, FieldKind::WQP, normalise(std::move(v)));
}

ScalarField gen_wqp(const NavMapPtr& map, const GTConfig& cfg) {
  return render_wqp(map, draw_wqp_bumps(*map, cfg));
}

std::vector<Particle> simulate_algae(const NavMap& map, const GTConfig& cfg) {
  std::mt19937_64 rng(cfg.seed);
  const int blooms = draw_in(rng, cfg.algae_blooms);
  const int burn_in = draw_in(rng, cfg.algae_burn_in);
  std::vector<Particle> particles;
  particles.reserve(static_cast<std::size_t>(blooms * cfg.algae_particles));
  for (int b = 0; b < blooms; ++b) {
    const Cell seed = draw_cell(rng, map);
    for (int p = 0; p < cfg.algae_particles; ++p)
      particles.push_back({static_cast<double>(seed.row), static_cast<double>(seed.col)});
  }
  std::normal_distribution<double> step(0.0, cfg.algae_step_sigma);
  for (int t = 0; t < burn_in; ++t) {
    for (auto& p : particles) {
      const double dr = step(rng) + cfg.drift[0];
      const double dc = step(rng) + cfg.drift[1];
      const Particle forward{p.row + dr, p.col + dc};
      if (map.navigable(nearest_cell(forward))) {
        p = forward;
        continue;
      }
      // Reflect off the shore; if the mirrored move also lands ashore, hold still.
      const Particle mirrored{p.row - dr, p.col - dc};
      if (map.navigable(nearest_cell(mirrored))) p = mirrored;
    }
  }
  return particles;
}

ScalarField render_algae(const NavMapPtr& map, const std::vector<Particle>& particles, double sigma) {
  const auto& cells = map->navigable_cells();
  std::vector<double> v(cells.size(), 0.0);
  const double inv = 1.0 / (2.0 * sigma * sigma);
  for (std::size_t i = 0; i < cells.size(); ++i) {
    double s = 0.0;
    for (const auto& p : particles) {
      const double dr = cells[i].row - p.row;
      const double dc = cells[i].col - p.col;
      s += std::exp(-(dr * dr + dc * dc) * inv);
    }
    v[i] = s;
  }
  return ScalarField(map, FieldKind::Algae, normalise(std::move(v)));
}

ScalarField gen_algae(const NavMapPtr& map, const GTConfig& cfg) {
  return render_algae(map, simulate_algae(*map, cfg), cfg.algae_kernel_sigma);
}

ScalarField generate(const NavMapPtr& map, const GTConfig& cfg) {
  return cfg.kind == FieldKind::WQP ? gen_wqp(map, cfg) : gen_algae(map, cfg);
}

double sample(const ScalarField& field, Cell cell) {
  if (!field.map().navigable(cell)) throw ContractError("cannot sample a non-navigable cell");
  return field.at(cell);
}

}  // namespace ipp
