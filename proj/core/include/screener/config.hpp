#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "screener/cohort.hpp"
#include "screener/crlb_opt.hpp"
#include "screener/fitting.hpp"
#include "screener/ppo.hpp"
#include "screener/signal_sim.hpp"
#include "screener/task_eval.hpp"

namespace screener {

enum class OptimizerKind { AdHoc, Crlb, Screener, Fixed };

std::string to_string(OptimizerKind k);
/// "adhoc", "crlb", "screener", "fixed".
OptimizerKind parse_optimizer(const std::string& name);

/// How a per-parameter AUC is reported: oriented (first-named class above second) or
/// direction-free (max with complement).
enum class AucOrientation { Oriented, DirectionFree };

struct ValidationConfig {
  double snr = 200.0;
  int n_repeats = 50;
  AucOrientation orientation = AucOrientation::Oriented;
};

inline constexpr std::array<const char*, 3> kAucParameters{"f", "d", "dstar"};

/// Table-style AUC targets, indexed [binary task][parameter]; empty cells are not fitted.
using AucTargets = std::array<std::array<std::optional<double>, 3>, 3>;

/// Reference AUC matrix (rows active-chronic, active-healthy, chronic-healthy; columns f, D, D*).
AucTargets reference_auc_targets();

struct CalibrationConfig {
  AucTargets targets = reference_auc_targets();
  int n_repeats = 20;
  double tolerance = 0.06;      // stop once every fitted cell is this close
  int max_rounds = 25;
  double initial_step = 0.15;   // relative step for means and stds
  double min_step = 0.005;
  bool fit_dstar = false;       // also move the D* means/stds
};

struct ScreenerSettings {
  rl::PpoConfig ppo;
  long long total_steps = 100000;
  /// Cohort repeats used to choose between the best-seen and the greedy protocol after training.
  int n_repeats_select = 10;
};

struct ExperimentConfig {
  std::uint64_t seed = 20240501;
  std::filesystem::path output_dir = "out";
  std::filesystem::path distributions_path;
  DistributionSet distributions;
  ScannerConfig scanner;
  CohortSpec cohort;
  TaskSpec task;
  EvalConfig eval;
  FitConfig fit;
  CrlbConfig crlb;
  ScreenerSettings screener;
  OptimizerKind optimizer = OptimizerKind::AdHoc;
  std::optional<AcquisitionProtocol> protocol;  // used by the "fixed" optimizer and evaluate
  std::vector<double> snr_list{5.0, 15.0, 25.0, 35.0};
  ValidationConfig validation;
  CalibrationConfig calibration;
  /// Named protocols evaluated by sweep-snr in addition to the ad hoc baseline.
  std::map<std::string, AcquisitionProtocol> sweep_protocols;

  void validate() const;

  /// Scanner/fit/cohort bundle used by task_eval.
  [[nodiscard]] TaskEnvironment environment() const;
  [[nodiscard]] TaskEnvironment environment(double snr) const;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parses a JSON experiment configuration. Relative paths resolve against the config file's
/// directory. Unknown keys are rejected. Throws ConfigError.
ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir);

/// Canonical JSON with every field resolved (distributions embedded, no file paths).
std::string canonical_config_json(const ExperimentConfig& config);

/// 16 hex digits of FNV-1a over the canonical JSON, excluding the seed and output directory.
std::string config_hash(const ExperimentConfig& config);

std::uint64_t fnv1a64(const std::string& data);

}  // namespace screener
