#pragma once

#include <span>
#include <utility>
#include <vector>

#include "ipp/groundtruth.hpp"

namespace ipp {

/// Sum of absolute errors over navigable cells. Both spans are indexed like
/// NavMap::navigable_cells().
double sor(std::span<const double> mu_hat, std::span<const double> gt);
/// sor / sum(gt). Throws MetricError when the ground truth has no mass.
double nsor(std::span<const double> mu_hat, std::span<const double> gt);

/// Peak detection knobs. The window is the 1.5 km neighbourhood at 290 m cells.
struct PeakConfig {
  int window = 5;  // odd, cells per side
  double floor = 0.1;
  double flatness = 0.05;
};

/// Normalised (1/8) Sobel gradient magnitude of an H x W image, edges replicated.
std::vector<double> sobel_magnitude(std::span<const double> image, int height, int width);

/// Local maxima of the field above the floor whose second Sobel magnitude is
/// below the flatness threshold, ordered by (row, col).
std::vector<Cell> detect_peaks(const ScalarField& gt, const PeakConfig& cfg = {});

struct PeakErrors {
  double avg = 0.0;
  double max = 0.0;
};

/// Mean and max |mu_hat - gt| over `peaks`. Throws MetricError for an empty list.
PeakErrors peak_errors(std::span<const double> mu_hat, const ScalarField& gt, std::span<const Cell> peaks);
PeakErrors peak_errors(std::span<const double> mu_hat, const ScalarField& gt);

/// Mann-Whitney rank-sum test, normal approximation with tie correction.
struct RankSumResult {
  double u = 0.0;  // U statistic of the first sample
  double z = 0.0;
  double p_two_sided = 1.0;
  double p_less = 1.0;  // H1: first sample tends to be smaller
};
RankSumResult rank_sum_test(std::span<const double> a, std::span<const double> b);

double median(std::vector<double> v);
double mean(std::span<const double> v);

}  // namespace ipp
