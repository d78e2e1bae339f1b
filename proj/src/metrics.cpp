#include "ipp/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ipp/errors.hpp"

namespace ipp {

double sor(std::span<const double> mu_hat, std::span<const double> gt) {
  if (mu_hat.size() != gt.size()) throw ContractError("SoR needs surfaces on the same support");
  double s = 0.0;
  for (std::size_t i = 0; i < gt.size(); ++i) s += std::abs(mu_hat[i] - gt[i]);
  return s;
}

double nsor(std::span<const double> mu_hat, std::span<const double> gt) {
  const double mass = std::accumulate(gt.begin(), gt.end(), 0.0);
  if (!(mass > 0.0)) throw MetricError("nSoR is undefined for a zero ground truth");
  return sor(mu_hat, gt) / mass;
}

std::vector<double> sobel_magnitude(std::span<const double> img, int h, int w) {
  if (img.size() != static_cast<std::size_t>(h) * w) throw ContractError("image size mismatch");
  auto px = [&](int r, int c) {
    r = std::clamp(r, 0, h - 1);
    c = std::clamp(c, 0, w - 1);
    return img[static_cast<std::size_t>(r) * w + c];
  };
  std::vector<double> out(img.size());
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const double gx = (px(r - 1, c + 1) + 2 * px(r, c + 1) + px(r + 1, c + 1) - px(r - 1, c - 1) -
                         2 * px(r, c - 1) - px(r + 1, c - 1)) / 8.0;
      const double gy = (px(r + 1, c - 1) + 2 * px(r + 1, c) + px(r + 1, c + 1) - px(r - 1, c - 1) -
                         2 * px(r - 1, c) - px(r - 1, c + 1)) / 8.0;
      out[static_cast<std::size_t>(r) * w + c] = std::hypot(gx, gy);
    }
  }
  return out;
}

std::vector<Cell> detect_peaks(const ScalarField& gt, const PeakConfig& cfg) {
  const NavMap& map = gt.map();
  const int h = map.height(), w = map.width();
  std::vector<double> img(static_cast<std::size_t>(h) * w, 0.0);
  const auto& cells = map.navigable_cells();
  for (std::size_t i = 0; i < cells.size(); ++i) img[map.flat(cells[i])] = gt.values()[i];
  const auto curvature = sobel_magnitude(sobel_magnitude(img, h, w), h, w);
  const int half = cfg.window / 2;
  std::vector<Cell> peaks;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const Cell x = cells[i];
    const double v = gt.values()[i];
    if (!(v > cfg.floor)) continue;
    bool is_max = true;
    for (int dr = -half; dr <= half && is_max; ++dr)
      for (int dc = -half; dc <= half; ++dc) {
        const Cell y{x.row + dr, x.col + dc};
        if (map.navigable(y) && gt.at(y) > v) {
          is_max = false;
          break;
        }
      }
    if (is_max && curvature[map.flat(x)] < cfg.flatness) peaks.push_back(x);
  }
  return peaks;
}

PeakErrors peak_errors(std::span<const double> mu_hat, const ScalarField& gt, std::span<const Cell> peaks) {
  if (peaks.empty()) throw MetricError("no peaks detected");
  if (mu_hat.size() != gt.values().size()) throw ContractError("peak errors need surfaces on the same support");
  PeakErrors e;
  for (const Cell& p : peaks) {
    const auto i = static_cast<std::size_t>(gt.map().navigable_index(p));
    const double d = std::abs(mu_hat[i] - gt.values()[i]);
    e.avg += d;
    e.max = std::max(e.max, d);
  }
  e.avg /= static_cast<double>(peaks.size());
  return e;
}

PeakErrors peak_errors(std::span<const double> mu_hat, const ScalarField& gt) {
  const auto peaks = detect_peaks(gt);
  return peak_errors(mu_hat, gt, peaks);
}

RankSumResult rank_sum_test(std::span<const double> a, std::span<const double> b) {
  const std::size_t n1 = a.size(), n2 = b.size();
  if (n1 == 0 || n2 == 0) throw MetricError("rank-sum test needs two non-empty samples");
  std::vector<std::pair<double, int>> all;
  for (double v : a) all.emplace_back(v, 0);
  for (double v : b) all.emplace_back(v, 1);
  std::sort(all.begin(), all.end());
  const std::size_t n = all.size();
  double r1 = 0.0, tie_term = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && all[j].first == all[i].first) ++j;
    const double rank = 0.5 * static_cast<double>(i + 1 + j);
    const double t = static_cast<double>(j - i);
    tie_term += t * t * t - t;
    for (std::size_t k = i; k < j; ++k)
      if (all[k].second == 0) r1 += rank;
    i = j;
  }
  RankSumResult res;
  const double dn1 = static_cast<double>(n1), dn2 = static_cast<double>(n2), dn = static_cast<double>(n);
  res.u = r1 - dn1 * (dn1 + 1.0) / 2.0;
  const double mu = dn1 * dn2 / 2.0;
  const double var = dn1 * dn2 / 12.0 * ((dn + 1.0) - tie_term / (dn * (dn - 1.0)));
  if (!(var > 0.0)) return res;
  res.z = (res.u - mu) / std::sqrt(var);
  auto phi = [](double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); };
  res.p_two_sided = std::min(1.0, std::erfc(std::abs(res.z) / std::sqrt(2.0)));
  res.p_less = phi(res.z);
  return res;
}

double median(std::vector<double> v) {
  if (v.empty()) throw MetricError("median of an empty sample");
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

double mean(std::span<const double> v) {
  if (v.empty()) throw MetricError("mean of an empty sample");
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace ipp
