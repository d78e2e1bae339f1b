#!/usr/bin/env python3
"""Generate the bundled synthetic lake map (58 x 38 cells, 290 m cells).

The shoreline is an elongated, irregular oval with a western bay and a small
island. Three deployment zones sit along the eastern shore. The output is
deterministic; re-running reproduces data/default_lake.map byte for byte.
"""
import math
import sys

HEIGHT, WIDTH, CELL = 58, 38, 290


def water(r, c):
    y = (r - 28.5) / 27.0
    x = (c - 18.5) / 17.0
    theta = math.atan2(y, x)
    # Irregular shoreline: a few low-order harmonics of the polar angle.
    rad = 1.0 + 0.07 * math.sin(3 * theta + 0.4) + 0.05 * math.cos(5 * theta + 1.1)
    # Narrow the southern half slightly.
    if y > 0.2:
        rad -= 0.12 * (y - 0.2)
    inside = x * x + y * y <= 0.45 * rad * rad
    # Western bay cut.
    if (r - 22) ** 2 / 20.0 + (c - 7) ** 2 / 9.0 <= 1.0:
        inside = False
    # Island.
    if (r - 36) ** 2 + (c - 21) ** 2 <= 2.0:
        inside = False
    return inside


def main(path):
    grid = [[1 if water(r, c) else 0 for c in range(WIDTH)] for r in range(HEIGHT)]
    zones = {
        1: [(r, c) for r in range(16, 20) for c in range(21, 25)],
        2: [(r, c) for r in range(26, 30) for c in range(25, 29)],
        3: [(r, c) for r in range(38, 42) for c in range(20, 24)],
    }
    for zid, cells in zones.items():
        for r, c in cells:
            if not grid[r][c]:
                raise SystemExit(f"zone {zid} cell ({r},{c}) is land")
    lines = [f"MAP {HEIGHT} {WIDTH} {CELL}"]
    lines += [" ".join(str(v) for v in row) for row in grid]
    for zid, cells in zones.items():
        lines.append(f"ZONE {zid} " + " ".join(f"{r} {c}" for r, c in cells))
    with open(path, "w", encoding="utf-8") as f:
        f.write("\n".join(lines) + "\n")
    print(f"navigable cells: {sum(map(sum, grid))}")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "data/default_lake.map")
