#include "ipp/gridmap.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "ipp/default_map_data.hpp"
#include "ipp/errors.hpp"

namespace ipp {

namespace {

constexpr std::array<Offset, kActionCount> kOffsets = {{
    {1, 0},    // S
    {1, 1},    // SE
    {0, 1},    // E
    {-1, 1},   // NE
    {-1, 0},   // N
    {-1, -1},  // NW
    {0, -1},   // W
    {1, -1},   // SW
}};

constexpr std::array<std::string_view, kActionCount> kNames = {"S", "SE", "E", "NE",
                                                               "N", "NW", "W", "SW"};

std::vector<std::string> split_ws(const std::string& line) {
  std::istringstream is(line);
  std::vector<std::string> out;
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

int parse_int(const std::string& tok, int line) {
  std::size_t pos = 0;
  int v = 0;
  try {
    v = std::stoi(tok, &pos);
  } catch (const std::exception&) {
    throw ParseError(line, "expected integer, got '" + tok + "'");
  }
  if (pos != tok.size()) throw ParseError(line, "expected integer, got '" + tok + "'");
  return v;
}

}  // namespace

Offset unit_offset(Action a) { return kOffsets[action_index(a)]; }

Action reverse(Action a) { return action_from_index((action_index(a) + 4) % kActionCount); }

std::string_view action_name(Action a) { return kNames[action_index(a)]; }

Action action_from_index(int index) {
  if (index < 0 || index >= kActionCount)
    throw ContractError("action index out of range: " + std::to_string(index));
  return static_cast<Action>(index);
}

NavMap::NavMap(int height, int width, double cell_size_m, std::vector<std::uint8_t> navigable,
               std::vector<DeploymentZone> zones)
    : height_(height),
      width_(width),
      cell_size_(cell_size_m),
      mask_(std::move(navigable)),
      zones_(std::move(zones)) {
  if (height_ <= 0 || width_ <= 0) throw ConfigError("map dimensions must be positive");
  if (!(cell_size_ > 0.0)) throw ConfigError("cell size must be positive");
  if (mask_.size() != static_cast<std::size_t>(height_) * static_cast<std::size_t>(width_))
    throw ConfigError("navigability mask size does not match map dimensions");
  index_.assign(mask_.size(), -1);
  for (int r = 0; r < height_; ++r) {
    for (int c = 0; c < width_; ++c) {
      const Cell cell{r, c};
      if (mask_[flat(cell)] != 0) {
        mask_[flat(cell)] = 1;
        index_[flat(cell)] = static_cast<int>(cells_.size());
        cells_.push_back(cell);
      }
    }
  }
  if (cells_.empty()) throw ConfigError("map has no navigable cell");
  for (const auto& z : zones_) {
    if (z.cells.empty()) throw ConfigError("zone " + std::to_string(z.id) + " is empty");
    for (const auto& c : z.cells)
      if (!this->navigable(c)) throw ConfigError("zone cell not navigable");
  }
}

const DeploymentZone& NavMap::zone(int id) const {
  for (const auto& z : zones_)
    if (z.id == id) return z;
  throw ConfigError("no deployment zone with id " + std::to_string(id));
}

std::string NavMap::to_text() const {
  std::ostringstream os;
  os << "MAP " << height_ << ' ' << width_ << ' ' << cell_size_ << '\n';
  for (int r = 0; r < height_; ++r) {
    for (int c = 0; c < width_; ++c) {
      if (c) os << ' ';
      os << static_cast<int>(mask_[flat({r, c})]);
    }
    os << '\n';
  }
  for (const auto& z : zones_) {
    os << "ZONE " << z.id;
    for (const auto& c : z.cells) os << ' ' << c.row << ' ' << c.col;
    os << '\n';
  }
  return os.str();
}

NavMap load_map(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;

  auto next_line = [&](std::string& out) {
    while (std::getline(in, out)) {
      ++line_no;
      if (!out.empty() && out.back() == '\r') out.pop_back();
      return true;
    }
    return false;
  };

  if (!next_line(line)) throw ParseError(1, "missing MAP header");
  auto header = split_ws(line);
  if (header.size() != 4 || header[0] != "MAP")
    throw ParseError(line_no, "malformed header, expected 'MAP <height> <width> <cell_size_m>'");
  const int height = parse_int(header[1], line_no);
  const int width = parse_int(header[2], line_no);
  double cell_size = 0.0;
  try {
    std::size_t pos = 0;
    cell_size = std::stod(header[3], &pos);
    if (pos != header[3].size()) throw std::invalid_argument("trailing");
  } catch (const std::exception&) {
    throw ParseError(line_no, "malformed cell size '" + header[3] + "'");
  }
  if (height <= 0 || width <= 0) throw ParseError(line_no, "map dimensions must be positive");
  if (!(cell_size > 0.0)) throw ParseError(line_no, "cell size must be positive");

  std::vector<std::uint8_t> mask;
  mask.reserve(static_cast<std::size_t>(height) * static_cast<std::size_t>(width));
  for (int r = 0; r < height; ++r) {
    if (!next_line(line)) throw ParseError(line_no + 1, "missing grid row " + std::to_string(r));
    auto toks = split_ws(line);
    if (static_cast<int>(toks.size()) != width)
      throw ParseError(line_no, "ragged row: expected " + std::to_string(width) + " tokens, got " +
                                    std::to_string(toks.size()));
    for (const auto& t : toks) {
      if (t == "0")
        mask.push_back(0);
      else if (t == "1")
        mask.push_back(1);
      else
        throw ParseError(line_no, "grid token must be 0 or 1, got '" + t + "'");
    }
  }

  std::vector<DeploymentZone> zones;
  while (next_line(line)) {
    auto toks = split_ws(line);
    if (toks.empty()) continue;
    if (toks[0] != "ZONE") throw ParseError(line_no, "unexpected line, expected 'ZONE ...'");
    if (toks.size() < 4 || (toks.size() - 2) % 2 != 0)
      throw ParseError(line_no, "zone line needs an id and row/col pairs");
    DeploymentZone z;
    z.id = parse_int(toks[1], line_no);
    for (const auto& other : zones)
      if (other.id == z.id) throw ParseError(line_no, "duplicate zone id " + toks[1]);
    for (std::size_t i = 2; i < toks.size(); i += 2) {
      const Cell c{parse_int(toks[i], line_no), parse_int(toks[i + 1], line_no)};
      if (c.row < 0 || c.row >= height || c.col < 0 || c.col >= width)
        throw ParseError(line_no, "zone cell out of bounds");
      if (mask[static_cast<std::size_t>(c.row) * width + c.col] == 0)
        throw ParseError(line_no, "zone cell not navigable");
      z.cells.push_back(c);
    }
    zones.push_back(std::move(z));
  }

  try {
    return NavMap(height, width, cell_size, std::move(mask), std::move(zones));
  } catch (const ConfigError& e) {
    throw ParseError(line_no, e.what());
  }
}

NavMap load_map_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open map file " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return load_map(ss.str());
}

const NavMapPtr& default_map() {
  static const NavMapPtr map = std::make_shared<const NavMap>(load_map(kDefaultMapText));
  return map;
}

std::optional<Cell> apply_action(const NavMap& map, Cell from, Action a) {
  const Offset o = unit_offset(a);
  for (int k = 1; k <= kStepCells; ++k) {
    const Cell c{from.row + k * o.drow, from.col + k * o.dcol};
    if (!map.navigable(c)) return std::nullopt;
  }
  return Cell{from.row + kStepCells * o.drow, from.col + kStepCells * o.dcol};
}

double distance_cells(Cell a, Cell b) {
  const double dr = a.row - b.row;
  const double dc = a.col - b.col;
  return std::sqrt(dr * dr + dc * dc);
}

double distance_m(const NavMap& map, Cell a, Cell b) { return distance_cells(a, b) * map.cell_size(); }

bool within_radius(const NavMap& map, Cell a, Cell b, double radius_m) {
  if (radius_m < 0.0) return false;
  if (std::isinf(radius_m)) return true;
  return distance_m(map, a, b) <= radius_m + 1e-9 * std::max(1.0, radius_m);
}

std::vector<Cell> disk(const NavMap& map, Cell center, double radius_m) {
  std::vector<Cell> out;
  if (radius_m < 0.0) return out;
  const double reach = radius_m / map.cell_size();
  const int span = std::isfinite(reach) ? static_cast<int>(std::ceil(reach)) + 1
                                        : std::max(map.height(), map.width());
  const int r0 = std::max(0, center.row - span), r1 = std::min(map.height() - 1, center.row + span);
  const int c0 = std::max(0, center.col - span), c1 = std::min(map.width() - 1, center.col + span);
  for (int r = r0; r <= r1; ++r)
    for (int c = c0; c <= c1; ++c) {
      const Cell cell{r, c};
      if (map.navigable(cell) && within_radius(map, center, cell, radius_m)) out.push_back(cell);
    }
  return out;
}

}  // namespace ipp
