#pragma once

#include <span>
#include <vector>

#include "ipp/gp.hpp"
#include "ipp/gridmap.hpp"

namespace ipp {

/// Centroids and shared influence radius of the local GP bank.
struct LocalLayout {
  std::vector<Cell> centroids;
  double radius_m = 0.0;
  /// Centroids that came from the lattice (before coverage repair).
  std::size_t lattice_count = 0;
  std::size_t repaired_count = 0;

  std::size_t size() const noexcept { return centroids.size(); }
};

/// Lattice of candidate centroids at `spacing_m`, centred on the grid. A candidate
/// is kept when its disk touches water and is snapped to the nearest navigable
/// cell; centroids whose water cells are all covered by others are pruned; any
/// cell left uncovered gets a greedily placed extra centroid.
/// Throws ConfigError when repair needs more than 4x the lattice count.
LocalLayout build_layout(const NavMap& map, double spacing_m, double radius_m);

/// One GP with infinite radius, centred at the navigable cell nearest the map centre.
LocalLayout global_layout(const NavMap& map);

/// Which GPs contribute to the fused surfaces at a cell.
enum class FusionMode {
  Full,      // every GP, as in the weighted-sum definition
  Covering,  // only GPs whose disk contains the cell
};

struct LocalGPConfig {
  double sigma0 = 1.0;
  double noise = kDefaultNoise;
  LengthscaleBounds bounds{};
  /// Refit the lengthscale of every GP that receives a sample.
  bool refit = true;
  FusionMode fusion = FusionMode::Full;
};

struct Measurement {
  Cell cell;
  double value = 0.0;
};

/// Fused surfaces, indexed like NavMap::navigable_cells().
struct FusedPosterior {
  std::vector<double> mean;
  std::vector<double> std;
};

/// Bank of K local GPs over one map plus their fused mean / standard deviation.
/// Single writer; const access is safe to share.
class LocalGPModel;
FusedPosterior fuse(const LocalGPModel& model);

class LocalGPModel {
 public:
  LocalGPModel(NavMapPtr map, LocalLayout layout, LocalGPConfig cfg = {});

  void add_sample(Cell x, double y);
  /// Routes all measurements first, then refits each touched GP once and refuses.
  void add_samples(std::span<const Measurement> batch);

  std::size_t gp_count() const noexcept { return layout_.size(); }
  const LocalLayout& layout() const noexcept { return layout_; }
  const LocalGPConfig& config() const noexcept { return cfg_; }
  const NavMap& map() const noexcept { return *map_; }

  const SampleSet& samples(std::size_t k) const { return gps_.at(k).samples; }
  const KernelParams& params(std::size_t k) const { return gps_.at(k).params; }
  bool fallback(std::size_t k) const { return gps_.at(k).fallback; }
  bool covers(std::size_t k, Cell x) const;

  /// Posterior of GP k over every navigable cell (prior where it holds no samples).
  std::span<const double> gp_mean(std::size_t k) const { return gps_.at(k).mean; }
  std::span<const double> gp_std(std::size_t k) const { return gps_.at(k).std; }

  /// Fusion weight exp(-|x - c_k|) in cell units, unnormalised.
  double raw_weight(std::size_t k, Cell x) const;

  const FusedPosterior& fused() const noexcept { return fused_; }
  /// Measurements routed so far (each counted once regardless of how many GPs hold it).
  std::size_t sample_count() const noexcept { return sample_count_; }

  /// Overrides the hyperparameters of GP k and recomputes its surfaces.
  void set_params(std::size_t k, KernelParams kp);

 private:
  friend FusedPosterior fuse(const LocalGPModel& model);

  struct Local {
    SampleSet samples;
    KernelParams params;
    bool fallback = false;
    std::vector<double> mean;
    std::vector<double> std;
  };

  void route(Cell x, double y, std::vector<char>& touched);
  void update_gp(std::size_t k, bool refit);
  void refuse();

  NavMapPtr map_;
  LocalLayout layout_;
  LocalGPConfig cfg_;
  std::vector<Local> gps_;
  // Normalised fusion weights, gp-major: weights_[k * cells + i].
  std::vector<double> weights_;
  FusedPosterior fused_;
  std::size_t sample_count_ = 0;
};

/// Weighted fusion of per-GP posteriors; recomputed from scratch from the model's GP surfaces.
FusedPosterior fuse(const LocalGPModel& model);

/// KL divergence between two fused posteriors treated as diagonal Gaussians.
/// Variances below kVarianceFloor are clamped first.
double kl_diag(const FusedPosterior& prev, const FusedPosterior& next);

}  // namespace ipp
