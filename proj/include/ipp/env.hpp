#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "ipp/groundtruth.hpp"
#include "ipp/localgp.hpp"

namespace ipp {

enum class RewardKind { DeltaMu, DeltaSigma };

std::string_view reward_kind_name(RewardKind k);  // "mu" / "sigma"
RewardKind parse_reward_kind(std::string_view s);

inline constexpr int kObservationChannels = 5;
inline constexpr double kDefaultSafetyM = 300.0;
inline constexpr double kDefaultInfluenceM = 1450.0;
inline constexpr double kDefaultSpacingM = 2000.0;
inline constexpr int kDefaultBudget = 50;

struct EnvConfig {
  NavMapPtr map;  // null selects default_map()
  int agents = 1;
  /// Deployment zone id per agent; empty means agent j starts in zone j + 1.
  std::vector<int> zones;
  GTConfig gt{};
  RewardKind reward = RewardKind::DeltaMu;
  int budget = kDefaultBudget;
  double safety_m = kDefaultSafetyM;
  /// Local GP radius; the reward influence radius follows it.
  double influence_m = kDefaultInfluenceM;
  double spacing_m = kDefaultSpacingM;
  /// Single infinite-radius GP instead of the local bank.
  bool global_model = false;
  LocalGPConfig gp{};
};

/// Fused surfaces at one instant, stored as float over navigable cells.
/// Shared by every observation taken at that instant.
struct SurfaceFrame {
  std::vector<float> mu;
  std::vector<float> sigma;
};

/// Observation in compact form: the shared surfaces plus agent positions.
struct CompactObservation {
  std::shared_ptr<const SurfaceFrame> frame;
  Cell self;
  std::vector<Cell> others;
};

/// Dense 5 x H x W observation, channel-major:
/// fused mean, fused std, navigation map, own position, other agents.
struct Observation {
  int height = 0;
  int width = 0;
  std::vector<float> data;

  float at(int channel, int row, int col) const {
    return data[(static_cast<std::size_t>(channel) * height + row) * width + col];
  }
  std::span<const float> channel(int c) const {
    const std::size_t hw = static_cast<std::size_t>(height) * width;
    return {data.data() + c * hw, hw};
  }
};

/// Writes the 5 min-max normalised channels into `out` (5 * H * W floats).
/// Land pixels are 0 before normalisation; constant channels become all zeros.
void decode_observation(const NavMap& map, const CompactObservation& obs, std::span<float> out);
Observation decode_observation(const NavMap& map, const CompactObservation& obs);

/// Number of agents whose disk of radius `radius_m` contains x.
int redundancy(const NavMap& map, std::span<const Cell> positions, Cell x, double radius_m);

/// Per-agent reward: sum over the agent's disk of |after - before| / rho(x).
/// Surfaces are indexed like NavMap::navigable_cells().
std::vector<double> compute_rewards(const NavMap& map, std::span<const Cell> positions,
                                    std::span<const double> before, std::span<const double> after,
                                    double radius_m);

/// Smallest pairwise distance in metres (+inf for fewer than two agents).
double min_separation(const NavMap& map, std::span<const Cell> positions);

struct StepResult {
  std::vector<double> rewards;
  bool done = false;
};

/// Fleet POMDP. One writer; independent instances may run concurrently.
class FleetEnv {
 public:
  explicit FleetEnv(EnvConfig cfg);

  /// Draws a ground truth from gt.seed = `gt_seed` and places the fleet with an
  /// RNG seeded by `placement_seed`. No reward is produced at reset.
  void reset(std::uint64_t gt_seed, std::uint64_t placement_seed);
  /// Starts an episode on a given field and given start cells.
  void reset(std::shared_ptr<const ScalarField> field, std::vector<Cell> positions);

  /// Moves every agent simultaneously (nullopt = stay), measures, updates the
  /// model once, and returns per-agent rewards. Throws ContractError for a
  /// blocked move, a safety violation, or a step past the budget.
  StepResult step(std::span<const std::optional<Action>> actions);

  const EnvConfig& config() const noexcept { return cfg_; }
  const NavMap& map() const noexcept { return *cfg_.map; }
  const NavMapPtr& map_ptr() const noexcept { return cfg_.map; }
  const LocalLayout& layout() const noexcept { return layout_; }
  int agents() const noexcept { return cfg_.agents; }
  int step_count() const noexcept { return step_count_; }
  int budget() const noexcept { return cfg_.budget; }
  bool done() const noexcept { return step_count_ >= cfg_.budget; }

  const std::vector<Cell>& positions() const noexcept { return positions_; }
  const ScalarField& field() const { return *field_; }
  const std::shared_ptr<const ScalarField>& field_ptr() const noexcept { return field_; }
  const LocalGPModel& model() const { return *model_; }
  /// Fused surfaces before the latest model update.
  const FusedPosterior& previous() const noexcept { return prev_; }
  const std::shared_ptr<const SurfaceFrame>& frame() const noexcept { return frame_; }

  CompactObservation compact(int agent) const;
  Observation observe(int agent) const;

 private:
  void start(std::vector<Cell> positions);
  void publish_frame();

  EnvConfig cfg_;
  LocalLayout layout_;
  std::shared_ptr<const ScalarField> field_;
  std::unique_ptr<LocalGPModel> model_;
  std::vector<Cell> positions_;
  int step_count_ = 0;
  FusedPosterior prev_;
  std::shared_ptr<const SurfaceFrame> frame_;
};

}  // namespace ipp
