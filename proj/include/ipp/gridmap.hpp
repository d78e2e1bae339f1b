#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ipp {

struct Cell {
  int row = 0;
  int col = 0;
  auto operator<=>(const Cell&) const = default;
};

/// The 8 movement directions, in the fixed order used for Q-value indices.
enum class Action : std::uint8_t { S = 0, SE, E, NE, N, NW, W, SW };

inline constexpr int kActionCount = 8;
inline constexpr std::array<Action, kActionCount> kAllActions = {
    Action::S, Action::SE, Action::E, Action::NE, Action::N, Action::NW, Action::W, Action::SW};

/// Cells travelled per action (d_meas = 580 m at 290 m cells).
inline constexpr int kStepCells = 2;

struct Offset {
  int drow = 0;
  int dcol = 0;
};

/// Unit displacement of an action; rows grow southward, columns eastward.
Offset unit_offset(Action a);
Action reverse(Action a);
std::string_view action_name(Action a);
inline int action_index(Action a) { return static_cast<int>(a); }
Action action_from_index(int index);

struct DeploymentZone {
  int id = 0;
  std::vector<Cell> cells;
};

/// Boolean navigability grid with a metric cell size and deployment zones.
/// Immutable after construction.
class NavMap {
 public:
  NavMap(int height, int width, double cell_size_m, std::vector<std::uint8_t> navigable,
         std::vector<DeploymentZone> zones = {});

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  double cell_size() const noexcept { return cell_size_; }

  bool in_bounds(Cell c) const noexcept {
    return c.row >= 0 && c.row < height_ && c.col >= 0 && c.col < width_;
  }
  bool navigable(Cell c) const noexcept { return in_bounds(c) && mask_[flat(c)] != 0; }
  std::size_t flat(Cell c) const noexcept {
    return static_cast<std::size_t>(c.row) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(c.col);
  }

  /// Navigable cells in row-major order. Per-cell surfaces are indexed by this order.
  const std::vector<Cell>& navigable_cells() const noexcept { return cells_; }
  std::size_t navigable_count() const noexcept { return cells_.size(); }
  /// Position of `c` in navigable_cells(), or -1 for land / out of bounds.
  int navigable_index(Cell c) const noexcept { return in_bounds(c) ? index_[flat(c)] : -1; }

  const std::vector<DeploymentZone>& zones() const noexcept { return zones_; }
  const DeploymentZone& zone(int id) const;

  /// Serialises back into the map-file format.
  std::string to_text() const;

 private:
  int height_;
  int width_;
  double cell_size_;
  std::vector<std::uint8_t> mask_;
  std::vector<int> index_;
  std::vector<Cell> cells_;
  std::vector<DeploymentZone> zones_;
};

using NavMapPtr = std::shared_ptr<const NavMap>;

/// Parses the map-file format:
///   MAP <height> <width> <cell_size_m>
///   <height lines of width 0/1 tokens>
///   ZONE <id> <row> <col> [<row> <col> ...]   (zero or more)
NavMap load_map(std::string_view text);
NavMap load_map_file(const std::filesystem::path& path);

/// The bundled 58 x 38 synthetic lake with three deployment zones.
const NavMapPtr& default_map();

/// Target of moving kStepCells along `a`, or nullopt when the target or the
/// intermediate cell is land or out of bounds.
std::optional<Cell> apply_action(const NavMap& map, Cell from, Action a);

double distance_cells(Cell a, Cell b);
double distance_m(const NavMap& map, Cell a, Cell b);

/// distance_m(a, b) <= radius_m, with a relative slack of 1e-9 so cells lying
/// exactly on the rim (e.g. 5 cells at 1450 m) count as inside.
bool within_radius(const NavMap& map, Cell a, Cell b, double radius_m);

/// Navigable cells whose centre lies within `radius_m` of `center`, row-major.
std::vector<Cell> disk(const NavMap& map, Cell center, double radius_m);

}  // namespace ipp
