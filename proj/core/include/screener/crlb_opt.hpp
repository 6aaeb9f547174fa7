#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "screener/cohort.hpp"
#include "screener/signal_sim.hpp"
#include "screener/task_eval.hpp"

namespace screener {

/// Parameter order used by every Jacobian and Fisher matrix: (s0, f, d, d_star).
enum ParamIndex : int { kS0 = 0, kF = 1, kD = 2, kDStar = 3 };

using FisherMatrix = Eigen::Matrix4d;

/// Analytic partial derivatives of ivim_signal with respect to (s0, f, d, d_star).
Eigen::Vector4d signal_jacobian(const IvimParams& p, double b, double te, double t2);

/// Gaussian-noise Fisher information: (1/sigma^2) sum_i J_i J_i^T.
FisherMatrix fisher_matrix(const IvimParams& p, std::span<const double> b_values, double te, double t2,
                           double sigma);
FisherMatrix fisher_matrix(const IvimParams& p, const AcquisitionProtocol& protocol,
                           const ScannerConfig& scanner);

struct AnnealConfig {
  int iterations = 4000;
  double initial_temperature = 0.05;  // in units of log(cost)
  int step_width = 60;                // max |delta b| of a slot perturbation, s/mm^2
  double merge_probability = 0.2;     // chance a proposal copies another slot's value
  int pinned_slots = 1;               // leading slots held fixed (b = 0)
  int b_min = 0;
  int b_max = static_cast<int>(kBMaxGrid);
};

struct CrlbConfig {
  int n_tissue_samples = 100;
  /// Which of (s0, f, d, d_star) enter the normalized-variance sum.
  std::array<bool, 4> scored{false, true, true, true};
  AnnealConfig anneal;
  double ridge_epsilon = 1e-12;  // relative to the unit diagonal of the scaled Fisher matrix
  double penalty = 1e12;

  void validate() const;
};

/// Inverse of the ridge-regularized Fisher matrix, computed in correlation scaling.
/// Returns false when the matrix is singular or indefinite.
bool crlb_covariance(const FisherMatrix& fisher, double ridge_epsilon, Eigen::Matrix4d& covariance);

/// sum over scored parameters of CRLB(theta) / theta^2, for one tissue sample. Singular designs
/// return `config.penalty`.
double crlb_cost(const IvimParams& p, std::span<const double> b_values, double te, double t2, double sigma,
                 const CrlbConfig& config);

/// Mean normalized-variance cost over the tissue samples. TE follows the largest b-value.
double crlb_objective(std::span<const double> b_values, std::span<const IvimParams> samples,
                      const ScannerConfig& scanner, const CrlbConfig& config);
double crlb_objective(const AcquisitionProtocol& protocol, std::span<const IvimParams> samples,
                      const ScannerConfig& scanner, const CrlbConfig& config);

/// n samples drawn round-robin over `classes`.
std::vector<IvimParams> draw_tissue_samples(const DistributionSet& dists, std::span<const TissueClass> classes,
                                            int n, Rng& rng);

struct AnnealResult {
  std::vector<double> best;          // sorted ascending
  double best_cost = 0.0;
  double initial_cost = 0.0;
  std::vector<double> best_trace;    // best-seen cost after each iteration
};

/// Metropolis simulated annealing over an integer b-value grid with a geometric temperature
/// schedule. Proposals either shift one unpinned slot or copy another slot's value. A zero
/// initial temperature reduces to hill climbing.
AnnealResult anneal_design(const std::function<double(std::span<const double>)>& cost,
                           std::vector<double> initial, const AnnealConfig& config, Rng& rng);

struct CrlbOptimum {
  AcquisitionProtocol protocol = AcquisitionProtocol::ad_hoc();
  double objective = 0.0;
  double initial_objective = 0.0;
  std::vector<double> best_trace;
};

/// Anneals from the ad hoc protocol against a fixed sample set.
CrlbOptimum optimize_crlb(std::span<const IvimParams> samples, const ScannerConfig& scanner,
                          const CrlbConfig& config, Rng& rng);

/// Draws the sample set from the task's classes, then anneals.
CrlbOptimum optimize_crlb(const TaskSpec& task, const TaskEnvironment& env, const CrlbConfig& config, Rng& rng);

}  // namespace screener
