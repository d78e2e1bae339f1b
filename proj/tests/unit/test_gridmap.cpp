#include <algorithm>
#include <random>
#include <string>

#include "doctest.h"
#include "ipp/errors.hpp"
#include "ipp/gridmap.hpp"
#include "oracles.hpp"

using namespace ipp;

namespace {

NavMap open_water(int h, int w, double cell = 290.0) {
  return NavMap(h, w, cell, std::vector<std::uint8_t>(static_cast<std::size_t>(h) * w, 1));
}

std::string what_of(const std::string& text) {
  try {
    load_map(text);
  } catch (const ParseError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("load_map reads a tiny grid") {
  const NavMap m = load_map("MAP 2 2 290\n1 1\n1 0\n");
  CHECK(m.height() == 2);
  CHECK(m.width() == 2);
  CHECK(m.navigable_count() == 3);
  CHECK_FALSE(m.navigable({1, 1}));
  CHECK(m.navigable_index({1, 0}) == 2);
  CHECK(m.navigable_index({1, 1}) == -1);
}

TEST_CASE("bundled lake is 58 x 38 with three zones") {
  const auto& m = *default_map();
  CHECK(m.height() == 58);
  CHECK(m.width() == 38);
  CHECK(m.cell_size() == 290.0);
  CHECK(m.zones().size() == 3);
  CHECK(m.navigable_count() == 619);
  for (const auto& z : m.zones())
    for (const Cell& c : z.cells) CHECK(m.navigable(c));
#ifdef IPP_DATA_DIR
  const NavMap from_file = load_map_file(std::string(IPP_DATA_DIR) + "/default_lake.map");
  CHECK(from_file.to_text() == m.to_text());
#endif
}

TEST_CASE("load_map rejects malformed input with a line number") {
  CHECK(what_of("MAP 2 2 290\n1 1\n1 1\nZONE 1 1 1 0 0\nZONE 2 1 0\n").empty());
  const std::string zone = what_of("MAP 2 2 290\n1 1\n1 0\nZONE 1 1 1\n");
  CHECK(zone.find("zone cell not navigable") != std::string::npos);
  CHECK(zone.find("line 4") != std::string::npos);
  CHECK(what_of("MAP 2 2 290\n1 1\n1\n").find("ragged") != std::string::npos);
  CHECK(what_of("MAP 2 2 290\n1 1\n1 2\n").find("0 or 1") != std::string::npos);
  CHECK(what_of("GRID 2 2\n").find("line 1") != std::string::npos);
  CHECK(what_of("MAP 3 2 290\n1 1\n1 1\n").find("missing grid row") != std::string::npos);
  CHECK(what_of("MAP 1 1 290\n0\n").find("no navigable") != std::string::npos);
  CHECK(what_of("MAP 1 2 290\n1 1\nZONE 1 0 0\nZONE 1 0 1\n").find("duplicate") != std::string::npos);
}

TEST_CASE("to_text round-trips") {
  const NavMap m = load_map("MAP 3 4 100\n1 1 0 1\n0 1 1 1\n1 1 1 0\nZONE 2 0 0 1 1\n");
  const NavMap again = load_map(m.to_text());
  CHECK(again.to_text() == m.to_text());
  CHECK(again.zone(2).cells.size() == 2);
  CHECK_THROWS_AS(again.zone(7), ConfigError);
}

TEST_CASE("action helpers") {
  CHECK(reverse(Action::S) == Action::N);
  CHECK(reverse(Action::NE) == Action::SW);
  CHECK(action_name(Action::NW) == "NW");
  for (Action a : kAllActions) {
    CHECK(action_from_index(action_index(a)) == a);
    const Offset o = unit_offset(a);
    const Offset r = unit_offset(reverse(a));
    CHECK(o.drow == -r.drow);
    CHECK(o.dcol == -r.dcol);
  }
  CHECK(unit_offset(Action::S).drow == 1);
  CHECK(unit_offset(Action::E).dcol == 1);
  CHECK_THROWS_AS(action_from_index(8), ContractError);
}

TEST_CASE("apply_action displacement and blocking") {
  const NavMap water = open_water(20, 20);
  CHECK(apply_action(water, {10, 10}, Action::E) == Cell{10, 12});
  CHECK(apply_action(water, {10, 10}, Action::NW) == Cell{8, 8});
  CHECK_FALSE(apply_action(water, {0, 5}, Action::N));
  CHECK_FALSE(apply_action(water, {1, 5}, Action::N));

  std::vector<std::uint8_t> mask(25, 1);
  mask[2 * 5 + 2] = 0;  // land at the centre of a 5 x 5 map
  const NavMap m(5, 5, 290.0, mask);
  CHECK_FALSE(apply_action(m, {2, 0}, Action::E));  // land under the intermediate cell
  CHECK_FALSE(apply_action(m, {0, 2}, Action::S));
  CHECK_FALSE(apply_action(m, {2, 4}, Action::W));
  CHECK(apply_action(m, {0, 0}, Action::E) == Cell{0, 2});

  int feasible = 0;
  for (const Cell& from : m.navigable_cells())
    for (Action a : kAllActions) {
      const Offset o = unit_offset(a);
      const auto got = apply_action(m, from, a);
      CHECK(got == oracle::walk(m, from, o.drow, o.dcol));
      if (got) ++feasible;
    }
  // Frozen: counted separately over the 24 water cells x 8 directions.
  CHECK(feasible == 72);
}

TEST_CASE("distance_m") {
  const NavMap m = open_water(10, 10);
  CHECK(distance_m(m, {0, 0}, {0, 0}) == 0.0);
  CHECK(distance_m(m, {0, 0}, {0, 2}) == doctest::Approx(580.0).epsilon(1e-12));
  CHECK(distance_m(m, {0, 0}, {3, 4}) == doctest::Approx(1450.0).epsilon(1e-12));

  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> u(-50, 50);
  for (int t = 0; t < 1000; ++t) {
    const Cell a{u(rng), u(rng)}, b{u(rng), u(rng)}, c{u(rng), u(rng)};
    CHECK(distance_m(m, a, b) == distance_m(m, b, a));
    CHECK(distance_m(m, a, c) <= distance_m(m, a, b) + distance_m(m, b, c) + 1e-9);
  }
}

TEST_CASE("disk") {
  const NavMap water = open_water(30, 30);
  CHECK(disk(water, {15, 15}, 0.0) == std::vector<Cell>{{15, 15}});
  CHECK(disk(water, {15, 15}, 290.0).size() == 5);
  const auto big = disk(water, {15, 15}, 1450.0);
  CHECK(big.size() == 81);
  CHECK(big == oracle::disk_scan(water, {15, 15}, 1450.0));

  const auto& lake = *default_map();
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> radius(0.0, 3000.0);
  for (int t = 0; t < 200; ++t) {
    const Cell c = lake.navigable_cells()[rng() % lake.navigable_count()];
    double r1 = radius(rng), r2 = radius(rng);
    if (r1 > r2) std::swap(r1, r2);
    const auto small = disk(lake, c, r1);
    const auto large = disk(lake, c, r2);
    CHECK(small == oracle::disk_scan(lake, c, r1));
    CHECK(std::includes(large.begin(), large.end(), small.begin(), small.end()));
  }
}

TEST_CASE("apply_action never leaves the water and matches a brute-force scan") {
  const auto& m = *default_map();
  for (const Cell& from : m.navigable_cells())
    for (Action a : kAllActions) {
      const auto to = apply_action(m, from, a);
      if (to) CHECK(m.navigable(*to));
      const Offset o = unit_offset(a);
      CHECK(to == oracle::walk(m, from, o.drow, o.dcol));
    }
}
