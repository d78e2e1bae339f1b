#include "ipp/gp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "ipp/errors.hpp"

namespace ipp {

namespace {

double sq_dist(Cell a, Cell b) {
  const double dr = a.row - b.row;
  const double dc = a.col - b.col;
  return dr * dr + dc * dc;
}

}  // namespace

SampleSet deduplicate(const SampleSet& data) {
  if (data.locations.size() != data.values.size())
    throw ContractError("sample set has mismatched locations and values");
  SampleSet out;
  std::map<Cell, std::size_t> slot;
  for (std::size_t i = 0; i < data.size(); ++i) {
    auto [it, inserted] = slot.try_emplace(data.locations[i], out.size());
    if (inserted)
      out.add(data.locations[i], data.values[i]);
    else
      out.values[it->second] = data.values[i];
  }
  return out;
}

double rbf(Cell a, Cell b, const KernelParams& kp) {
  return kp.sigma0 * kp.sigma0 * std::exp(-sq_dist(a, b) / (2.0 * kp.lengthscale));
}

GPFactor::GPFactor(const SampleSet& raw, const KernelParams& kp, double noise) : kp_(kp) {
  if (!(noise > 0.0)) throw ContractError("noise must be positive");
  if (!(kp.sigma0 > 0.0) || !(kp.lengthscale > 0.0)) throw ContractError("invalid kernel parameters");
  const SampleSet data = deduplicate(raw);
  n_ = data.size();
  x_ = data.locations;
  y_ = Eigen::Map<const Eigen::VectorXd>(data.values.data(), static_cast<Eigen::Index>(n_));
  noise_ = noise;
  if (n_ == 0) return;

  const auto n = static_cast<Eigen::Index>(n_);
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    k(i, i) = kp.sigma0 * kp.sigma0;
    for (Eigen::Index j = 0; j < i; ++j) k(i, j) = k(j, i) = rbf(x_[i], x_[j], kp);
  }

  double jitter = noise * noise;
  for (;;) {
    Eigen::MatrixXd a = k;
    a.diagonal().array() += jitter;
    Eigen::LLT<Eigen::MatrixXd> llt(a);
    if (llt.info() == Eigen::Success && llt.matrixL().toDenseMatrix().diagonal().minCoeff() > 0.0) {
      chol_ = llt.matrixL();
      alpha_ = llt.solve(y_);
      noise_ = std::sqrt(jitter);
      if (alpha_.allFinite()) return;
    }
    jitter *= 10.0;
    if (jitter > kMaxJitterVariance * (1.0 + 1e-12)) break;
  }
  const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(k, Eigen::EigenvaluesOnly).eigenvalues();
  std::ostringstream os;
  os << "kernel matrix not positive definite after jitter escalation to " << kMaxJitterVariance
     << " (n=" << n_ << ", lengthscale=" << kp.lengthscale << ", eigenvalue range [" << ev.minCoeff()
     << ", " << ev.maxCoeff() << "])";
  throw NumericalError(os.str());
}

double GPFactor::log_marginal_likelihood() const {
  if (n_ == 0) throw ContractError("log marginal likelihood needs at least one sample");
  const double fit = -0.5 * y_.dot(alpha_);
  const double logdet_half = chol_.diagonal().array().log().sum();
  return fit - logdet_half - 0.5 * static_cast<double>(n_) * std::log(2.0 * std::numbers::pi);
}

void GPFactor::predict(std::span<const Cell> queries, std::span<double> mean,
                       std::span<double> variance) const {
  if (mean.size() != queries.size() || variance.size() != queries.size())
    throw ContractError("predict output spans must match the query count");
  const double prior = kp_.sigma0 * kp_.sigma0;
  if (n_ == 0) {
    std::fill(mean.begin(), mean.end(), 0.0);
    std::fill(variance.begin(), variance.end(), prior);
    return;
  }
  const auto n = static_cast<Eigen::Index>(n_);
  const auto m = static_cast<Eigen::Index>(queries.size());
  Eigen::MatrixXd ks(n, m);
  for (Eigen::Index q = 0; q < m; ++q)
    for (Eigen::Index i = 0; i < n; ++i) ks(i, q) = rbf(x_[i], queries[q], kp_);
  const Eigen::VectorXd mu = ks.transpose() * alpha_;
  chol_.triangularView<Eigen::Lower>().solveInPlace(ks);
  const Eigen::VectorXd reduction = ks.colwise().squaredNorm().transpose();
  for (Eigen::Index q = 0; q < m; ++q) {
    mean[q] = mu(q);
    variance[q] = std::clamp(prior - reduction(q), kVarianceFloor, prior);
  }
}

Posterior predict(const SampleSet& data, const KernelParams& kp, double noise,
                  std::span<const Cell> queries) {
  const GPFactor f(data, kp, noise);
  Posterior p;
  p.mean.resize(queries.size());
  p.variance.resize(queries.size());
  p.noise = f.noise();
  f.predict(queries, p.mean, p.variance);
  return p;
}

double log_marginal_likelihood(const SampleSet& data, const KernelParams& kp, double noise) {
  if (data.empty()) throw ContractError("log marginal likelihood needs at least one sample");
  return GPFactor(data, kp, noise).log_marginal_likelihood();
}

LengthscaleFit fit_lengthscale(const SampleSet& raw, LengthscaleBounds bounds, double noise,
                               double sigma0) {
  if (raw.empty()) throw ContractError("lengthscale fit needs at least one sample");
  if (!(bounds.min > 0.0) || !(bounds.max >= bounds.min))
    throw ConfigError("lengthscale bounds must satisfy 0 < min <= max");
  const SampleSet data = deduplicate(raw);
  constexpr double kFailed = -std::numeric_limits<double>::infinity();

  auto lml = [&](double ell) {
    try {
      const double v = GPFactor(data, {sigma0, ell}, noise).log_marginal_likelihood();
      return std::isfinite(v) ? v : kFailed;
    } catch (const NumericalError&) {
      return kFailed;
    }
  };

  const double lo = std::log(bounds.min);
  const double hi = std::log(bounds.max);
  const int points = bounds.max > bounds.min ? kLengthscaleGridPoints : 1;
  std::vector<double> grid(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i)
    grid[i] = points == 1 ? bounds.max : std::exp(lo + (hi - lo) * i / (points - 1));
  if (points > 1) grid.back() = bounds.max;

  int best_i = points - 1;
  double best = kFailed;
  for (int i = points - 1; i >= 0; --i) {
    const double v = lml(grid[i]);
    if (v > best) {
      best = v;
      best_i = i;
    }
  }
  if (best == kFailed) return {{sigma0, bounds.max}, kFailed, true};

  double best_ell = grid[best_i];
  if (points > 1) {
    // Golden section in log-lengthscale over the neighbouring grid bracket.
    double a = std::log(grid[std::max(best_i - 1, 0)]);
    double b = std::log(grid[std::min(best_i + 1, points - 1)]);
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    double fc = lml(std::exp(c));
    double fd = lml(std::exp(d));
    while (b - a > 1e-3) {
      if (fc > fd) {
        b = d;
        d = c;
        fd = fc;
        c = b - inv_phi * (b - a);
        fc = lml(std::exp(c));
      } else {
        a = c;
        c = d;
        fc = fd;
        d = a + inv_phi * (b - a);
        fd = lml(std::exp(d));
      }
    }
    const double cand = std::clamp(std::exp(0.5 * (a + b)), bounds.min, bounds.max);
    const double fcand = lml(cand);
    if (fcand > best) {
      best = fcand;
      best_ell = cand;
    }
  }
  return {{sigma0, best_ell}, best, false};
}

}  // namespace ipp
