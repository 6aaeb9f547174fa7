#include "screener/signal_sim.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace screener {

IvimParams IvimParams::make(double s0, double f, double d, double d_star) {
  IvimParams p{s0, f, d, d_star};
  if (auto why = p.violation(); !why.empty()) throw std::invalid_argument("IvimParams: " + why);
  return p;
}

std::string IvimParams::violation() const {
  if (!(s0 > 0.0)) return "s0 must be > 0";
  if (!(f >= 0.0 && f <= 1.0)) return "f must lie in [0, 1]";
  if (!(d > 0.0)) return "d must be > 0";
  if (!(d_star > 0.0)) return "d_star must be > 0";
  if (d_star < d) return "d_star must be >= d";
  return {};
}

void ScannerConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("ScannerConfig: ") + what);
  };
  require(gradient_strength > 0.0, "gradient_strength must be > 0");
  require(gyromagnetic_ratio > 0.0, "gyromagnetic_ratio must be > 0");
  require(te_overhead > 0.0, "te_overhead must be > 0");
  require(t2 > 0.0, "t2 must be > 0");
  require(snr > 1.0, "snr must be > 1");
}

double min_te(double b_max, const ScannerConfig& scanner) {
  if (b_max <= 0.0) return scanner.te_overhead;
  const double b_si = b_max * 1e6;  // s/mm^2 -> s/m^2
  const double gg = scanner.gyromagnetic_ratio * scanner.gradient_strength;
  const double delta = std::cbrt(3.0 * b_si / (2.0 * gg * gg));
  return scanner.te_overhead + 2.0 * delta;
}

AcquisitionProtocol AcquisitionProtocol::create(std::span<const double> b_values) {
  if (b_values.size() != kProtocolLength) {
    throw std::invalid_argument("protocol must have exactly " + std::to_string(kProtocolLength) +
                                " b-values, got " + std::to_string(b_values.size()));
  }
  Values b{};
  std::copy(b_values.begin(), b_values.end(), b.begin());
  for (double v : b) {
    if (!(v >= 0.0 && v <= kBMaxGrid)) {
      throw std::invalid_argument("b-value out of [0, 1000]: " + std::to_string(v));
    }
  }
  std::sort(b.begin(), b.end());
  if (b.front() != 0.0) throw std::invalid_argument("protocol must contain b = 0");
  return AcquisitionProtocol{b};
}

AcquisitionProtocol AcquisitionProtocol::ad_hoc() {
  static constexpr Values kAdHoc{0, 10, 20, 30, 50, 80, 100, 200, 400, 800};
  return AcquisitionProtocol{kAdHoc};
}

std::string AcquisitionProtocol::to_string() const {
  std::ostringstream os;
  for (std::size_t i = 0; i < b_.size(); ++i) {
    if (i) os << ',';
    os << b_[i];
  }
  return os.str();
}

AcquisitionProtocol parse_protocol(const std::string& csv) {
  std::vector<double> values;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(tok, &used);
    } catch (const std::exception&) {
      throw std::invalid_argument("malformed protocol literal: '" + csv + "'");
    }
    if (tok.find_first_not_of(" \t", used) != std::string::npos) {
      throw std::invalid_argument("malformed protocol literal: '" + csv + "'");
    }
    values.push_back(v);
  }
  return AcquisitionProtocol::create(values);
}

double ivim_signal(const IvimParams& p, double b, double te, double t2) {
  return p.s0 * std::exp(-te / t2) * (p.f * std::exp(-b * p.d_star) + (1.0 - p.f) * std::exp(-b * p.d));
}

double add_rician_noise(double signal, double sigma, Rng& rng) {
  if (sigma <= 0.0) return std::abs(signal);
  std::normal_distribution<double> noise(0.0, sigma);
  const double re = signal + noise(rng);
  const double im = noise(rng);
  return std::sqrt(re * re + im * im);
}

SignalVector simulate_acquisition(const IvimParams& p, const AcquisitionProtocol& protocol,
                                  const ScannerConfig& scanner, Rng& rng) {
  return simulate_acquisition(p, protocol, scanner, scanner.sigma(), rng);
}

SignalVector simulate_acquisition(const IvimParams& p, const AcquisitionProtocol& protocol,
                                  const ScannerConfig& scanner, double sigma, Rng& rng) {
  const double te = protocol.te(scanner);
  SignalVector out{};
  const auto& b = protocol.b_values();
  for (std::size_t i = 0; i < kProtocolLength; ++i) {
    out[i] = add_rician_noise(ivim_signal(p, b[i], te, scanner.t2), sigma, rng);
  }
  return out;
}

}  // namespace screener
