#include "screener/crlb_opt.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace screener {

Eigen::Vector4d signal_jacobian(const IvimParams& p, double b, double te, double t2) {
  const double t2w = std::exp(-te / t2);
  const double e_star = std::exp(-b * p.d_star);
  const double e_d = std::exp(-b * p.d);
  Eigen::Vector4d j;
  j[kS0] = t2w * (p.f * e_star + (1.0 - p.f) * e_d);
  j[kF] = p.s0 * t2w * (e_star - e_d);
  j[kD] = -b * p.s0 * t2w * (1.0 - p.f) * e_d;
  j[kDStar] = -b * p.s0 * t2w * p.f * e_star;
  return j;
}

FisherMatrix fisher_matrix(const IvimParams& p, std::span<const double> b_values, double te, double t2,
                           double sigma) {
  FisherMatrix f = FisherMatrix::Zero();
  for (double b : b_values) {
    const Eigen::Vector4d j = signal_jacobian(p, b, te, t2);
    f.noalias() += j * j.transpose();
  }
  return f / (sigma * sigma);
}

FisherMatrix fisher_matrix(const IvimParams& p, const AcquisitionProtocol& protocol,
                           const ScannerConfig& scanner) {
  return fisher_matrix(p, protocol.b_values(), protocol.te(scanner), scanner.t2, scanner.sigma());
}

void CrlbConfig::validate() const {
  if (n_tissue_samples < 1) throw std::invalid_argument("CrlbConfig: n_tissue_samples < 1");
  if (anneal.iterations < 1) throw std::invalid_argument("CrlbConfig: iterations < 1");
  if (anneal.initial_temperature < 0.0) throw std::invalid_argument("CrlbConfig: negative temperature");
  if (anneal.step_width < 1) throw std::invalid_argument("CrlbConfig: step_width < 1");
  if (!(ridge_epsilon >= 0.0)) throw std::invalid_argument("CrlbConfig: negative ridge");
  if (std::none_of(scored.begin(), scored.end(), [](bool s) { return s; })) {
    throw std::invalid_argument("CrlbConfig: no parameter scored");
  }
}

bool crlb_covariance(const FisherMatrix& fisher, double ridge_epsilon, Eigen::Matrix4d& covariance) {
  const Eigen::Vector4d diag = fisher.diagonal();
  if (!diag.allFinite() || (diag.array() <= 0.0).any()) return false;
  const Eigen::Vector4d inv_sqrt = diag.array().rsqrt();
  Eigen::Matrix4d scaled = inv_sqrt.asDiagonal() * fisher * inv_sqrt.asDiagonal();
  scaled.diagonal().array() += ridge_epsilon;
  Eigen::LLT<Eigen::Matrix4d> llt(scaled);
  if (llt.info() != Eigen::Success) return false;
  const Eigen::Matrix4d inv = llt.solve(Eigen::Matrix4d::Identity());
  covariance = inv_sqrt.asDiagonal() * inv * inv_sqrt.asDiagonal();
  return covariance.allFinite();
}

double crlb_cost(const IvimParams& p, std::span<const double> b_values, double te, double t2, double sigma,
                 const CrlbConfig& config) {
  Eigen::Matrix4d cov;
  if (!crlb_covariance(fisher_matrix(p, b_values, te, t2, sigma), config.ridge_epsilon, cov)) {
    return config.penalty;
  }
  const std::array<double, 4> theta{p.s0, p.f, p.d, p.d_star};
  double cost = 0.0;
  for (int i = 0; i < 4; ++i) {
    if (!config.scored[i]) continue;
    if (cov(i, i) < 0.0) return config.penalty;
    cost += cov(i, i) / (theta[i] * theta[i]);
  }
  if (!std::isfinite(cost)) return config.penalty;
  return std::min(cost, config.penalty);
}

double crlb_objective(std::span<const double> b_values, std::span<const IvimParams> samples,
                      const ScannerConfig& scanner, const CrlbConfig& config) {
  if (samples.empty()) throw std::invalid_argument("crlb_objective: no tissue samples");
  const double b_max = *std::max_element(b_values.begin(), b_values.end());
  const double te = min_te(b_max, scanner);
  double total = 0.0;
  for (const auto& p : samples) total += crlb_cost(p, b_values, te, scanner.t2, scanner.sigma(), config);
  return total / static_cast<double>(samples.size());
}

double crlb_objective(const AcquisitionProtocol& protocol, std::span<const IvimParams> samples,
                      const ScannerConfig& scanner, const CrlbConfig& config) {
  return crlb_objective(protocol.b_values(), samples, scanner, config);
}

std::vector<IvimParams> draw_tissue_samples(const DistributionSet& dists, std::span<const TissueClass> classes,
                                            int n, Rng& rng) {
  if (classes.empty()) throw std::invalid_argument("draw_tissue_samples: no classes");
  std::vector<IvimParams> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    out.push_back(sample_params(find_distribution(dists, classes[static_cast<std::size_t>(i) % classes.size()]), rng));
  }
  return out;
}

AnnealResult anneal_design(const std::function<double(std::span<const double>)>& cost,
                           std::vector<double> initial, const AnnealConfig& config, Rng& rng) {
  const int n = static_cast<int>(initial.size());
  if (n <= config.pinned_slots) throw std::invalid_argument("anneal_design: no free slots");

  std::vector<double> current = initial;
  double current_cost = cost(current);
  AnnealResult out;
  out.initial_cost = current_cost;
  out.best = current;
  out.best_cost = current_cost;
  out.best_trace.reserve(static_cast<std::size_t>(config.iterations));

  std::uniform_int_distribution<int> slot(config.pinned_slots, n - 1);
  std::uniform_int_distribution<int> any_slot(0, n - 1);
  std::uniform_int_distribution<int> shift(-config.step_width, config.step_width);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::vector<double> proposal;
  for (int it = 0; it < config.iterations; ++it) {
    const double temperature =
        config.initial_temperature * std::pow(1e-3, static_cast<double>(it) / config.iterations);
    proposal = current;
    const int i = slot(rng);
    if (unit(rng) < config.merge_probability) {
      proposal[static_cast<std::size_t>(i)] = proposal[static_cast<std::size_t>(any_slot(rng))];
    } else {
      const double moved = proposal[static_cast<std::size_t>(i)] + shift(rng);
      proposal[static_cast<std::size_t>(i)] =
          std::clamp(moved, static_cast<double>(config.b_min), static_cast<double>(config.b_max));
    }
    const double c = cost(proposal);
    const double delta = std::log(c) - std::log(current_cost);
    const double u = unit(rng);
    if (delta <= 0.0 || (temperature > 0.0 && u < std::exp(-delta / temperature))) {
      current.swap(proposal);
      current_cost = c;
      if (c < out.best_cost) {
        out.best_cost = c;
        out.best = current;
      }
    }
    out.best_trace.push_back(out.best_cost);
  }
  std::sort(out.best.begin(), out.best.end());
  return out;
}

CrlbOptimum optimize_crlb(std::span<const IvimParams> samples, const ScannerConfig& scanner,
                          const CrlbConfig& config, Rng& rng) {
  config.validate();
  const auto& start = AcquisitionProtocol::ad_hoc().b_values();
  auto cost = [&](std::span<const double> b) { return crlb_objective(b, samples, scanner, config); };
  AnnealResult r = anneal_design(cost, std::vector<double>(start.begin(), start.end()), config.anneal, rng);
  CrlbOptimum out;
  out.protocol = AcquisitionProtocol::create(r.best);
  out.objective = r.best_cost;
  out.initial_objective = r.initial_cost;
  out.best_trace = std::move(r.best_trace);
  return out;
}

CrlbOptimum optimize_crlb(const TaskSpec& task, const TaskEnvironment& env, const CrlbConfig& config, Rng& rng) {
  config.validate();
  const auto classes = task.classes();
  const auto samples = draw_tissue_samples(env.distributions, classes, config.n_tissue_samples, rng);
  return optimize_crlb(samples, env.scanner, config, rng);
}

}  // namespace screener
