#pragma once

// Independent reference implementations used by the unit and acceptance tests.
// They share no code with the library beyond the plain data types.

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "ipp/gridmap.hpp"

namespace oracle {

using ipp::Cell;

/// Dense inverse by Gauss-Jordan elimination with partial pivoting, long double.
/// Also returns log|A| through `logdet` when given.
std::vector<long double> gauss_jordan_inverse(std::vector<long double> a, int n, long double* logdet = nullptr);

struct GPResult {
  std::vector<double> mean, variance;
  double lml = 0.0;
};

/// Textbook GP posterior from the explicit inverse of K + noise^2 I.
/// Kernel: sigma0^2 exp(-d^2 / (2 ell)). Inputs are assumed de-duplicated.
GPResult dense_gp(std::span<const Cell> x, std::span<const double> y, double sigma0, double ell, double noise,
                  std::span<const Cell> queries);

double kernel(Cell a, Cell b, double sigma0, double ell);

/// Every navigable cell within `radius_m` (exhaustive scan of the grid).
std::vector<Cell> disk_scan(const ipp::NavMap& map, Cell center, double radius_m);

/// Target of moving two cells along (dr, dc), walking each cell; nullopt when blocked.
std::optional<Cell> walk(const ipp::NavMap& map, Cell from, int dr, int dc);

/// Convex combination with weights exp(-|x - c_k|) / sum; `means[k]`/`stds[k]` per GP.
void fuse_direct(const ipp::NavMap& map, std::span<const Cell> centroids, const std::vector<std::vector<double>>& means,
                 const std::vector<std::vector<double>>& stds, std::vector<double>& mean, std::vector<double>& std);

double kl_terms(std::span<const double> m1, std::span<const double> s1, std::span<const double> m2,
                std::span<const double> s2);

double sum_abs(std::span<const double> a, std::span<const double> b);

/// Local maxima above `floor` in a (2*half+1)^2 window (exhaustive grid scan,
/// land ignored) whose second Sobel magnitude is below `flat`.
std::vector<Cell> peak_scan(const ipp::NavMap& map, std::span<const double> values, int half, double floor, double flat);

/// Index of the unit direction (S, SE, E, NE, N, NW, W, SW) with the smallest angle to v = (row, col).
int nearest_direction(double vr, double vc);

/// Agents whose disk contains x.
int count_covering(const ipp::NavMap& map, std::span<const Cell> agents, Cell x, double radius_m);

}  // namespace oracle
