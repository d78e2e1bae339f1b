#include "ipp/localgp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ipp/errors.hpp"

namespace ipp {

namespace {

Cell nearest_navigable(const NavMap& map, double row, double col) {
  Cell best{};
  double best_d = std::numeric_limits<double>::infinity();
  for (const Cell& c : map.navigable_cells()) {
    const double dr = c.row - row;
    const double dc = c.col - col;
    const double d = dr * dr + dc * dc;
    if (d < best_d) {  // row-major scan keeps the lowest (row, col) on ties
      best_d = d;
      best = c;
    }
  }
  return best;
}

}  // namespace

LocalLayout build_layout(const NavMap& map, double spacing_m, double radius_m) {
  if (!(spacing_m > 0.0) || !(radius_m > 0.0))
    throw ConfigError("layout spacing and radius must be positive");
  const auto& cells = map.navigable_cells();
  const double s = spacing_m / map.cell_size();
  const int nr = static_cast<int>(std::floor((map.height() - 1) / s));
  const int nc = static_cast<int>(std::floor((map.width() - 1) / s));
  const double r0 = ((map.height() - 1) - nr * s) / 2.0;
  const double c0 = ((map.width() - 1) - nc * s) / 2.0;

  LocalLayout layout;
  layout.radius_m = radius_m;
  for (int i = 0; i <= nr; ++i) {
    for (int j = 0; j <= nc; ++j) {
      const Cell p{static_cast<int>(std::lround(r0 + i * s)), static_cast<int>(std::lround(c0 + j * s))};
      const bool touches = std::any_of(cells.begin(), cells.end(),
                                       [&](Cell c) { return within_radius(map, p, c, radius_m); });
      if (!touches) continue;
      const Cell snapped = nearest_navigable(map, p.row, p.col);
      if (std::find(layout.centroids.begin(), layout.centroids.end(), snapped) == layout.centroids.end())
        layout.centroids.push_back(snapped);
    }
  }

  // cover[i] = number of centroids whose disk contains navigable cell i
  std::vector<int> cover(cells.size(), 0);
  std::vector<std::vector<std::size_t>> members;
  for (const Cell& c : layout.centroids) {
    std::vector<std::size_t> m;
    for (const Cell& x : disk(map, c, radius_m)) m.push_back(static_cast<std::size_t>(map.navigable_index(x)));
    for (auto i : m) ++cover[i];
    members.push_back(std::move(m));
  }

  // Prune redundant lattice centroids, least useful first.
  std::vector<std::size_t> order(layout.centroids.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (members[a].size() != members[b].size()) return members[a].size() < members[b].size();
    return layout.centroids[a] < layout.centroids[b];
  });
  std::vector<char> keep(layout.centroids.size(), 1);
  for (std::size_t k : order) {
    const bool redundant = std::all_of(members[k].begin(), members[k].end(), [&](std::size_t i) { return cover[i] > 1; });
    if (redundant) {
      keep[k] = 0;
      for (auto i : members[k]) --cover[i];
    }
  }
  std::vector<Cell> kept;
  for (std::size_t k = 0; k < layout.centroids.size(); ++k)
    if (keep[k]) kept.push_back(layout.centroids[k]);
  layout.centroids = std::move(kept);
  layout.lattice_count = layout.centroids.size();

  const std::size_t limit = 4 * std::max<std::size_t>(layout.lattice_count, 1);
  for (;;) {
    std::vector<std::size_t> uncovered;
    for (std::size_t i = 0; i < cells.size(); ++i)
      if (cover[i] == 0) uncovered.push_back(i);
    if (uncovered.empty()) break;
    if (layout.centroids.size() >= limit)
      throw ConfigError("layout coverage repair exceeded " + std::to_string(limit) + " centroids");
    std::size_t best = uncovered.front();
    std::size_t best_gain = 0;
    for (std::size_t u : uncovered) {
      std::size_t gain = 0;
      for (std::size_t v : uncovered)
        if (within_radius(map, cells[u], cells[v], radius_m)) ++gain;
      if (gain > best_gain) {
        best_gain = gain;
        best = u;
      }
    }
    layout.centroids.push_back(cells[best]);
    ++layout.repaired_count;
    for (const Cell& x : disk(map, cells[best], radius_m)) ++cover[static_cast<std::size_t>(map.navigable_index(x))];
  }
  return layout;
}

LocalLayout global_layout(const NavMap& map) {
  LocalLayout layout;
  layout.centroids.push_back(nearest_navigable(map, (map.height() - 1) / 2.0, (map.width() - 1) / 2.0));
  layout.radius_m = std::numeric_limits<double>::infinity();
  layout.lattice_count = 1;
  return layout;
}

LocalGPModel::LocalGPModel(NavMapPtr map, LocalLayout layout, LocalGPConfig cfg)
    : map_(std::move(map)), layout_(std::move(layout)), cfg_(cfg) {
  if (!map_) throw ContractError("local GP model needs a map");
  if (layout_.centroids.empty()) throw ConfigError("layout has no centroid");
  if (!(cfg_.sigma0 > 0.0) || !(cfg_.noise > 0.0)) throw ConfigError("sigma0 and noise must be positive");
  const auto& cells = map_->navigable_cells();
  const std::size_t n = cells.size();
  const std::size_t k_count = layout_.size();

  gps_.resize(k_count);
  for (auto& g : gps_) {
    g.params = {cfg_.sigma0, cfg_.bounds.max};
    g.mean.assign(n, 0.0);
    g.std.assign(n, cfg_.sigma0);
  }

  weights_.assign(k_count * n, 0.0);
  std::vector<double> d(k_count);
  for (std::size_t i = 0; i < n; ++i) {
    double dmin = std::numeric_limits<double>::infinity();
    bool any_cover = false;
    for (std::size_t k = 0; k < k_count; ++k) {
      d[k] = distance_cells(cells[i], layout_.centroids[k]);
      const bool use = cfg_.fusion == FusionMode::Full || covers(k, cells[i]);
      any_cover = any_cover || use;
      if (use) dmin = std::min(dmin, d[k]);
    }
    double total = 0.0;
    for (std::size_t k = 0; k < k_count; ++k) {
      const bool use = !any_cover || cfg_.fusion == FusionMode::Full || covers(k, cells[i]);
      // Shifting by the nearest centroid distance leaves the normalised weights unchanged.
      const double w = use ? std::exp(-(d[k] - dmin)) : 0.0;
      weights_[k * n + i] = w;
      total += w;
    }
    for (std::size_t k = 0; k < k_count; ++k) weights_[k * n + i] /= total;
  }
  fused_ = fuse(*this);
}

bool LocalGPModel::covers(std::size_t k, Cell x) const {
  return within_radius(*map_, layout_.centroids.at(k), x, layout_.radius_m);
}

double LocalGPModel::raw_weight(std::size_t k, Cell x) const {
  return std::exp(-distance_cells(x, layout_.centroids.at(k)));
}

void LocalGPModel::route(Cell x, double y, std::vector<char>& touched) {
  if (!map_->navigable(x)) throw ContractError("sample location is not navigable");
  bool any = false;
  for (std::size_t k = 0; k < gps_.size(); ++k) {
    if (covers(k, x)) {
      gps_[k].samples.add(x, y);
      touched[k] = 1;
      any = true;
    }
  }
  if (!any) throw ContractError("sample lies outside every local GP (layout coverage broken)");
  ++sample_count_;
}

void LocalGPModel::update_gp(std::size_t k, bool refit) {
  Local& g = gps_[k];
  if (refit && !g.samples.empty()) {
    const LengthscaleFit fit = fit_lengthscale(g.samples, cfg_.bounds, cfg_.noise, cfg_.sigma0);
    g.params = fit.params;
    g.fallback = fit.fallback;
  }
  const GPFactor factor(g.samples, g.params, cfg_.noise);
  std::vector<double> var(g.mean.size());
  factor.predict(map_->navigable_cells(), g.mean, var);
  for (std::size_t i = 0; i < var.size(); ++i) g.std[i] = std::sqrt(var[i]);
}

void LocalGPModel::refuse() { fused_ = fuse(*this); }

void LocalGPModel::add_sample(Cell x, double y) {
  const Measurement m{x, y};
  add_samples(std::span<const Measurement>(&m, 1));
}

void LocalGPModel::add_samples(std::span<const Measurement> batch) {
  std::vector<char> touched(gps_.size(), 0);
  for (const auto& m : batch) route(m.cell, m.value, touched);
  // Touched GPs are independent here; refits could run concurrently before the fusion barrier.
  for (std::size_t k = 0; k < gps_.size(); ++k)
    if (touched[k]) update_gp(k, cfg_.refit);
  refuse();
}

void LocalGPModel::set_params(std::size_t k, KernelParams kp) {
  gps_.at(k).params = kp;
  update_gp(k, false);
  refuse();
}

FusedPosterior fuse(const LocalGPModel& model) {
  const std::size_t n = model.map_->navigable_count();
  FusedPosterior out;
  out.mean.assign(n, 0.0);
  out.std.assign(n, 0.0);
  // Where every contributing GP reports the same value, the fused value is that value exactly.
  const auto& g0 = model.gps_.front();
  std::vector<char> same_mean(n, 1), same_std(n, 1);
  for (std::size_t k = 0; k < model.gps_.size(); ++k) {
    const auto& g = model.gps_[k];
    const double* w = model.weights_.data() + k * n;
    for (std::size_t i = 0; i < n; ++i) {
      out.mean[i] += w[i] * g.mean[i];
      out.std[i] += w[i] * g.std[i];
      same_mean[i] &= g.mean[i] == g0.mean[i];
      same_std[i] &= g.std[i] == g0.std[i];
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (same_mean[i]) out.mean[i] = g0.mean[i];
    if (same_std[i]) out.std[i] = g0.std[i];
  }
  return out;
}

double kl_diag(const FusedPosterior& prev, const FusedPosterior& next) {
  if (prev.mean.size() != next.mean.size() || prev.std.size() != next.std.size() ||
      prev.mean.size() != prev.std.size())
    throw ContractError("kl_diag needs posteriors over the same query set");
  double log_ratio = 0.0, trace = 0.0, maha = 0.0;
  for (std::size_t i = 0; i < prev.mean.size(); ++i) {
    const double v1 = std::max(prev.std[i] * prev.std[i], kVarianceFloor);
    const double v2 = std::max(next.std[i] * next.std[i], kVarianceFloor);
    const double dm = next.mean[i] - prev.mean[i];
    log_ratio += std::log(v2 / v1);
    trace += v1 / v2;
    maha += dm * dm / v2;
  }
  const double d = static_cast<double>(prev.mean.size());
  return std::max(0.0, 0.5 * (log_ratio - d + trace + maha));
}

}  // namespace ipp
