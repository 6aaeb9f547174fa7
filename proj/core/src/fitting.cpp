#include "screener/fitting.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

namespace screener {
namespace {

int count_distinct(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return static_cast<int>(std::unique(v.begin(), v.end()) - v.begin());
}

void require_same_size(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("signals and b-values differ in length");
}

}  // namespace

void FitConfig::validate() const {
  if (!(high_b_threshold >= 0.0)) throw std::invalid_argument("FitConfig: high_b_threshold < 0");
  if (!(d_min > 0.0 && d_max > d_min)) throw std::invalid_argument("FitConfig: need 0 < d_min < d_max");
  if (!(dstar_max > d_max)) throw std::invalid_argument("FitConfig: need dstar_max > d_max");
  if (dstar_grid_points < 3) throw std::invalid_argument("FitConfig: dstar_grid_points < 3");
  if (!(dstar_rel_tol > 0.0)) throw std::invalid_argument("FitConfig: dstar_rel_tol <= 0");
}

HighBFit fit_high_b(std::span<const double> signals, std::span<const double> b_values,
                    double threshold, const FitConfig& config) {
  require_same_size(signals, b_values);
  std::vector<double> bs;
  std::vector<double> ys;
  for (std::size_t i = 0; i < b_values.size(); ++i) {
    if (b_values[i] >= threshold && signals[i] > 0.0) {
      bs.push_back(b_values[i]);
      ys.push_back(std::log(signals[i]));
    }
  }
  if (count_distinct(bs) < 2) throw HighBDeficient{};

  const double n = static_cast<double>(bs.size());
  double b_mean = 0.0;
  double y_mean = 0.0;
  for (std::size_t i = 0; i < bs.size(); ++i) {
    b_mean += bs[i];
    y_mean += ys[i];
  }
  b_mean /= n;
  y_mean /= n;
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < bs.size(); ++i) {
    sxx += (bs[i] - b_mean) * (bs[i] - b_mean);
    sxy += (bs[i] - b_mean) * (ys[i] - y_mean);
  }
  const double slope = sxy / sxx;

  HighBFit out;
  out.intercept = y_mean - slope * b_mean;
  out.d_est = std::clamp(-slope, config.d_min, config.d_max);
  out.d_clamped = out.d_est != -slope;
  return out;
}

S0FEstimate estimate_s0_f(std::span<const double> signals, std::span<const double> b_values,
                          double intercept) {
  require_same_size(signals, b_values);
  double sum = 0.0;
  int n = 0;
  for (std::size_t i = 0; i < b_values.size(); ++i) {
    if (b_values[i] == 0.0) {
      sum += signals[i];
      ++n;
    }
  }
  if (n == 0) throw NoB0{};

  S0FEstimate out;
  out.s0_est = sum / n;
  const double f_raw = out.s0_est > 0.0 ? 1.0 - std::exp(intercept) / out.s0_est : 0.0;
  out.f_est = std::clamp(f_raw, 0.0, 1.0);
  out.f_clamped = out.f_est != f_raw;
  return out;
}

double dstar_residual(std::span<const double> signals, std::span<const double> b_values, double s0,
                      double f, double d, double dstar) {
  double rss = 0.0;
  for (std::size_t i = 0; i < b_values.size(); ++i) {
    const double b = b_values[i];
    const double model = s0 * ((1.0 - f) * std::exp(-b * d) + f * std::exp(-b * dstar));
    const double r = signals[i] - model;
    rss += r * r;
  }
  return rss;
}

DStarFit fit_dstar(std::span<const double> signals, std::span<const double> b_values, double s0_est,
                   double f_est, double d_est, const FitConfig& config) {
  require_same_size(signals, b_values);
  const double lo = d_est;
  const double hi = config.dstar_max;
  if (!(f_est > 0.0)) return {lo, true};

  auto cost = [&](double x) { return dstar_residual(signals, b_values, s0_est, f_est, d_est, x); };

  const int n = config.dstar_grid_points;
  const double log_lo = std::log(lo);
  const double log_step = (std::log(hi) - log_lo) / (n - 1);
  auto grid = [&](int i) {
    if (i == 0) return lo;
    if (i == n - 1) return hi;
    return std::exp(log_lo + log_step * i);
  };

  int best = 0;
  double best_cost = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    const double c = cost(grid(i));
    if (c < best_cost) {
      best_cost = c;
      best = i;
    }
  }

  // Golden-section search on the two cells around the grid minimum.
  constexpr double kInvPhi = 0.6180339887498949;
  double a = grid(std::max(best - 1, 0));
  double b = grid(std::min(best + 1, n - 1));
  double x1 = b - kInvPhi * (b - a);
  double x2 = a + kInvPhi * (b - a);
  double f1 = cost(x1);
  double f2 = cost(x2);
  while (b - a > config.dstar_rel_tol * 0.5 * (a + b)) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - kInvPhi * (b - a);
      f1 = cost(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + kInvPhi * (b - a);
      f2 = cost(x2);
    }
  }

  // The refined point competes with the bracket ends so boundary minima are kept exactly.
  double x = 0.5 * (a + b);
  double fx = cost(x);
  for (double cand : {grid(std::max(best - 1, 0)), grid(best), grid(std::min(best + 1, n - 1))}) {
    const double c = cost(cand);
    if (c < fx) {
      fx = c;
      x = cand;
    }
  }

  const double edge_tol = 10.0 * config.dstar_rel_tol;
  const bool at_bound = (x - lo) <= edge_tol * lo || (hi - x) <= edge_tol * hi;
  return {x, at_bound};
}

FitResult segmented_fit(std::span<const double> signals, std::span<const double> b_values,
                        const FitConfig& config) {
  require_same_size(signals, b_values);

  // Canonical (b, signal) order makes the fit bitwise invariant to measurement order.
  std::vector<std::pair<double, double>> pairs;
  pairs.reserve(b_values.size());
  for (std::size_t i = 0; i < b_values.size(); ++i) pairs.emplace_back(b_values[i], signals[i]);
  std::sort(pairs.begin(), pairs.end());
  std::vector<double> b(pairs.size());
  std::vector<double> s(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    b[i] = pairs[i].first;
    s[i] = pairs[i].second;
  }

  FitResult out;
  const auto sentinel = [&] {
    FitResult r;
    r.s0_est = 0.0;
    r.f_est = 0.0;
    r.d_est = config.d_min;
    r.dstar_est = config.d_min;
    r.high_b_deficient = true;
    return r;
  };

  if (std::find(b.begin(), b.end(), 0.0) == b.end()) return sentinel();

  std::vector<double> usable_b;
  for (std::size_t i = 0; i < b.size(); ++i) {
    if (s[i] > 0.0) usable_b.push_back(b[i]);
  }
  std::vector<double> high;
  for (double v : usable_b) {
    if (v >= config.high_b_threshold) high.push_back(v);
  }

  double threshold = config.high_b_threshold;
  if (count_distinct(high) < 2) {
    out.high_b_deficient = true;
    std::vector<double> nonzero;
    for (double v : usable_b) {
      if (v > 0.0) nonzero.push_back(v);
    }
    std::sort(nonzero.begin(), nonzero.end());
    nonzero.erase(std::unique(nonzero.begin(), nonzero.end()), nonzero.end());
    if (!config.relax_threshold || nonzero.size() < 2) return sentinel();
    threshold = nonzero[nonzero.size() - 2];
    out.threshold_relaxed = true;
  }

  const HighBFit high_fit = fit_high_b(s, b, threshold, config);
  const S0FEstimate s0f = estimate_s0_f(s, b, high_fit.intercept);
  const DStarFit ds = fit_dstar(s, b, s0f.s0_est, s0f.f_est, high_fit.d_est, config);

  out.s0_est = s0f.s0_est;
  out.f_est = s0f.f_est;
  out.d_est = high_fit.d_est;
  out.dstar_est = ds.dstar_est;
  out.d_clamped = high_fit.d_clamped;
  out.f_clamped = s0f.f_clamped;
  out.dstar_at_bound = ds.at_bound;
  return out;
}

}  // namespace screener
