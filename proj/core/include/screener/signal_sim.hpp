#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "screener/random.hpp"

namespace screener {

inline constexpr std::size_t kProtocolLength = 10;
inline constexpr double kBMaxGrid = 1000.0;  // s/mm^2

/// Bi-exponential IVIM tissue parameters. Diffusivities in mm^2/s.
struct IvimParams {
  double s0 = 1.0;
  double f = 0.0;
  double d = 1e-3;
  double d_star = 1e-2;

  /// Validating constructor; throws std::invalid_argument on violation.
  static IvimParams make(double s0, double f, double d, double d_star);

  /// Empty string when valid, otherwise a description of the violation.
  [[nodiscard]] std::string violation() const;

  bool operator==(const IvimParams&) const = default;
};

struct ScannerConfig {
  double gradient_strength = 0.033;   // T/m
  double gyromagnetic_ratio = 2.675e8;  // rad s^-1 T^-1
  double te_overhead = 0.020;         // s
  double t2 = 0.100;                  // s
  double snr = 25.0;                  // at S0

  /// Throws std::invalid_argument if any field is out of range.
  void validate() const;

  /// Noise standard deviation relative to S0 = 1.
  [[nodiscard]] double sigma() const { return 1.0 / snr; }
};

/// Minimum echo time (s) able to accommodate a diffusion encoding of b_max (s/mm^2).
///
/// Stejskal-Tanner with Delta = delta gives b = (2/3) gamma^2 G^2 delta^3; the echo
/// holds both lobes, so TE = 2 delta + te_overhead.
double min_te(double b_max, const ScannerConfig& scanner);

/// Ten b-values (s/mm^2), kept sorted ascending. TE is a function of the scanner and is
/// always recomputed from the largest b-value.
class AcquisitionProtocol {
 public:
  using Values = std::array<double, kProtocolLength>;

  /// Throws std::invalid_argument unless there are exactly ten values in
  /// [0, kBMaxGrid] with at least one zero.
  static AcquisitionProtocol create(std::span<const double> b_values);

  /// The clinical baseline: 0, 10, 20, 30, 50, 80, 100, 200, 400, 800.
  static AcquisitionProtocol ad_hoc();

  [[nodiscard]] const Values& b_values() const { return b_; }
  [[nodiscard]] double b_max() const { return b_.back(); }
  [[nodiscard]] double te(const ScannerConfig& scanner) const { return min_te(b_max(), scanner); }
  [[nodiscard]] std::string to_string() const;

  bool operator==(const AcquisitionProtocol&) const = default;

 private:
  explicit AcquisitionProtocol(const Values& b) : b_(b) {}
  Values b_{};
};

/// Parses "0,10,20,..." into a protocol.
AcquisitionProtocol parse_protocol(const std::string& csv);

using SignalVector = std::array<double, kProtocolLength>;

/// Noiseless IVIM signal with T2 weighting at echo time te.
double ivim_signal(const IvimParams& p, double b, double te, double t2);

/// sqrt((s + xi1)^2 + xi2^2) with xi1, xi2 ~ N(0, sigma^2).
double add_rician_noise(double signal, double sigma, Rng& rng);

/// One noisy acquisition per b-value; repeated b-values get independent draws.
SignalVector simulate_acquisition(const IvimParams& p, const AcquisitionProtocol& protocol,
                                  const ScannerConfig& scanner, Rng& rng);

/// Same as above but with an explicit noise level (sigma = 0 gives the noiseless vector).
SignalVector simulate_acquisition(const IvimParams& p, const AcquisitionProtocol& protocol,
                                  const ScannerConfig& scanner, double sigma, Rng& rng);

}  // namespace screener
