#pragma once

#include <array>
#include <cstdint>
#include <string_view>
#include <vector>

#include "ipp/gridmap.hpp"

namespace ipp {

enum class FieldKind { WQP, Algae };

std::string_view field_kind_name(FieldKind k);
FieldKind parse_field_kind(std::string_view s);

struct IntRange {
  int lo = 0;
  int hi = 0;
};

/// Generator knobs. The ranges and widths are defaults of this framework, not
/// measured values.
struct GTConfig {
  FieldKind kind = FieldKind::WQP;
  std::uint64_t seed = 0;

  IntRange wqp_peaks{3, 6};
  double wqp_width_min = 2.0;  // cells
  double wqp_width_max = 8.0;
  double wqp_amp_min = 0.3;
  double wqp_amp_max = 1.0;

  IntRange algae_blooms{1, 3};
  IntRange algae_burn_in{20, 100};
  int algae_particles = 50;       // per bloom
  double algae_step_sigma = 1.0;  // cells per step
  double algae_kernel_sigma = 1.5;
  std::array<double, 2> drift{0.2, 0.1};  // (row, col) cells per step
};

/// Static ground truth Y over the navigable cells of one map, values in [0, 1].
class ScalarField {
 public:
  ScalarField(NavMapPtr map, FieldKind kind, std::vector<double> values);

  FieldKind kind() const noexcept { return kind_; }
  const NavMap& map() const noexcept { return *map_; }
  const NavMapPtr& map_ptr() const noexcept { return map_; }
  /// Indexed like NavMap::navigable_cells().
  const std::vector<double>& values() const noexcept { return values_; }
  double at(Cell c) const;

 private:
  NavMapPtr map_;
  FieldKind kind_;
  std::vector<double> values_;
};

struct GaussianBump {
  Cell center;
  double width = 1.0;  // standard deviation in cells
  double amplitude = 1.0;
};

struct Particle {
  double row = 0.0;
  double col = 0.0;
};

/// Draws the random WQP bump parameters (the generator's only randomness).
std::vector<GaussianBump> draw_wqp_bumps(const NavMap& map, const GTConfig& cfg);
/// Sum of bumps, max-normalised, clipped to [0, 1].
ScalarField render_wqp(const NavMapPtr& map, const std::vector<GaussianBump>& bumps);
ScalarField gen_wqp(const NavMapPtr& map, const GTConfig& cfg);

/// Runs the particle burn-in and returns the final particle positions.
std::vector<Particle> simulate_algae(const NavMap& map, const GTConfig& cfg);
/// Deposits one Gaussian kernel of `sigma` cells per particle, max-normalised, clipped.
ScalarField render_algae(const NavMapPtr& map, const std::vector<Particle>& particles, double sigma);
ScalarField gen_algae(const NavMapPtr& map, const GTConfig& cfg);

ScalarField generate(const NavMapPtr& map, const GTConfig& cfg);

/// Noise-free measurement Y(cell). Throws ContractError for land cells.
double sample(const ScalarField& field, Cell cell);

}  // namespace ipp
