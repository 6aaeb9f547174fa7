#pragma once

#include <span>
#include <stdexcept>

namespace screener {

/// Bounds and knobs of the segmented IVIM fit. Diffusivities in mm^2/s.
struct FitConfig {
  double high_b_threshold = 200.0;  // s/mm^2
  double d_min = 1e-5;
  double d_max = 5e-3;
  double dstar_max = 0.5;
  int dstar_grid_points = 200;
  double dstar_rel_tol = 1e-6;
  /// When fewer than two distinct b-values reach the threshold, fall back to the two
  /// largest distinct nonzero b-values instead of returning the sentinel fit.
  bool relax_threshold = true;

  void validate() const;
};

struct FitResult {
  double s0_est = 0.0;
  double f_est = 0.0;
  double d_est = 0.0;
  double dstar_est = 0.0;

  bool high_b_deficient = false;  // fewer than two distinct b >= threshold
  bool threshold_relaxed = false;  // high-b fit used b-values below the threshold
  bool d_clamped = false;
  bool f_clamped = false;
  bool dstar_at_bound = false;
};

class HighBDeficient : public std::runtime_error {
 public:
  HighBDeficient() : std::runtime_error("fewer than two distinct b-values above threshold") {}
};

class NoB0 : public std::runtime_error {
 public:
  NoB0() : std::runtime_error("no b = 0 measurement") {}
};

struct HighBFit {
  double d_est = 0.0;
  double intercept = 0.0;  // fitted ln S at b = 0
  bool d_clamped = false;
};

/// Log-linear OLS of ln S against b over measurements with b >= threshold and S > 0.
/// Throws HighBDeficient with fewer than two distinct qualifying b-values.
HighBFit fit_high_b(std::span<const double> signals, std::span<const double> b_values,
                    double threshold = 200.0, const FitConfig& config = {});

struct S0FEstimate {
  double s0_est = 0.0;
  double f_est = 0.0;
  bool f_clamped = false;
};

/// s0 is the mean of the b = 0 signals; f = 1 - exp(intercept) / s0, clamped to [0, 1].
S0FEstimate estimate_s0_f(std::span<const double> signals, std::span<const double> b_values,
                          double intercept);

struct DStarFit {
  double dstar_est = 0.0;
  bool at_bound = false;
};

/// Bi-exponential residual sum of squares for a candidate D* with s0, f, D held fixed.
double dstar_residual(std::span<const double> signals, std::span<const double> b_values,
                      double s0, double f, double d, double dstar);

/// Minimizes dstar_residual over [d_est, dstar_max] by a log-spaced grid scan followed by
/// golden-section refinement. With f_est <= 0 the lower bound is returned and flagged.
DStarFit fit_dstar(std::span<const double> signals, std::span<const double> b_values, double s0_est,
                   double f_est, double d_est, const FitConfig& config = {});

/// Segmented fit: D and f from the high-b segment, then D* from the full residual.
/// Never throws on data; degenerate protocols produce a flagged sentinel at the lower bounds.
/// Invariant to the order of (signal, b) pairs.
FitResult segmented_fit(std::span<const double> signals, std::span<const double> b_values,
                        const FitConfig& config = {});

}  // namespace screener
