#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

#include "ipp/gridmap.hpp"

namespace ipp {

/// RBF kernel hyperparameters. The exponent divides the squared distance by
/// 2 * lengthscale (not 2 * lengthscale^2), so lengthscale is in squared cells.
struct KernelParams {
  double sigma0 = 1.0;
  double lengthscale = 10.0;
};

struct LengthscaleBounds {
  double min = 0.5;
  double max = 10.0;
};

inline constexpr double kDefaultNoise = 1e-5;
inline constexpr double kVarianceFloor = 1e-12;
inline constexpr double kMaxJitterVariance = 1e-2;
inline constexpr int kLengthscaleGridPoints = 24;

struct SampleSet {
  std::vector<Cell> locations;
  std::vector<double> values;

  void add(Cell c, double y) {
    locations.push_back(c);
    values.push_back(y);
  }
  std::size_t size() const noexcept { return locations.size(); }
  bool empty() const noexcept { return locations.empty(); }
};

/// Collapses repeated locations, keeping first-seen order and the latest value.
SampleSet deduplicate(const SampleSet& data);

struct Posterior {
  std::vector<double> mean;
  std::vector<double> variance;
  /// Noise standard deviation actually used after jitter escalation.
  double noise = 0.0;
};

double rbf(Cell a, Cell b, const KernelParams& kp);

/// Cholesky factorization of K + s^2 I for one (deduplicated) training set.
/// Escalates s^2 tenfold on failure up to kMaxJitterVariance, then throws NumericalError.
class GPFactor {
 public:
  GPFactor() = default;
  GPFactor(const SampleSet& data, const KernelParams& kp, double noise);

  bool empty() const noexcept { return n_ == 0; }
  std::size_t size() const noexcept { return n_; }
  double noise() const noexcept { return noise_; }
  const KernelParams& params() const noexcept { return kp_; }

  double log_marginal_likelihood() const;
  /// Writes posterior mean and variance for each query.
  void predict(std::span<const Cell> queries, std::span<double> mean, std::span<double> variance) const;

 private:
  KernelParams kp_{};
  double noise_ = 0.0;
  std::size_t n_ = 0;
  std::vector<Cell> x_;
  Eigen::VectorXd y_;
  Eigen::MatrixXd chol_;  // lower triangular
  Eigen::VectorXd alpha_;
};

/// Zero-mean GP posterior at `queries`. Duplicate sample locations are merged first.
Posterior predict(const SampleSet& data, const KernelParams& kp, double noise,
                  std::span<const Cell> queries);

double log_marginal_likelihood(const SampleSet& data, const KernelParams& kp, double noise);

struct LengthscaleFit {
  KernelParams params;
  double log_likelihood = 0.0;
  /// True when every evaluation failed and lengthscale fell back to bounds.max.
  bool fallback = false;
};

/// Type-II maximum likelihood over lengthscale only (sigma0 held fixed): a
/// 24-point log grid, then golden-section refinement inside the best bracket.
/// Ties resolve toward the larger lengthscale.
LengthscaleFit fit_lengthscale(const SampleSet& data, LengthscaleBounds bounds, double noise,
                               double sigma0 = 1.0);

}  // namespace ipp
