#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "screener/config.hpp"
#include "screener/protocol_env.hpp"

namespace screener::harness {

/// Children of the master seed, one per command.
enum StreamKey : std::uint64_t {
  kValidateStream = 1,
  kCalibrateStream = 2,
  kEvaluateStream = 3,
  kCrlbStream = 4,
  kPolicyStream = 5,
  kRewardStream = 6,
  kSelectStream = 7,
};

struct AucCell {
  double mean = 0.0;
  double std = 0.0;
  int n_repeats = 0;
};

/// [binary task][parameter], tasks in kBinaryTasks order, parameters (f, D, D*).
using AucMatrix = std::array<std::array<AucCell, 3>, 3>;

/// Per-parameter AUC between the two classes of each binary task, over `n_repeats` fresh
/// cohorts simulated with `protocol` in `env`.
AucMatrix parameter_auc_matrix(const AcquisitionProtocol& protocol, const TaskEnvironment& env,
                               AucOrientation orientation, int n_repeats, std::uint64_t seed);

/// Largest |achieved - target| over the defined target cells.
double max_auc_deviation(const AucMatrix& achieved, const AucTargets& targets);

struct ValidationReport {
  AucMatrix aucs;
  double snr = 0.0;
  AucOrientation orientation = AucOrientation::Oriented;
};

/// Per-parameter class-separability validation at the configured validation SNR. Writes validation.csv to out_dir.
ValidationReport cmd_validate(const ExperimentConfig& config, const std::filesystem::path& out_dir);

std::string validation_csv(const ValidationReport& report, const std::string& hash, std::uint64_t seed);

struct CalibrationResult {
  DistributionSet distributions;
  AucMatrix achieved;
  double max_deviation = 0.0;
  int rounds = 0;
  bool converged = false;
};

/// Coordinate descent on class means/stds until every target cell is within tolerance or the
/// budget is spent. A starting point already within tolerance is returned unchanged.
CalibrationResult calibrate(const ExperimentConfig& config, std::ostream* log = nullptr);

/// Runs calibrate and writes calibrated_distributions.json and calibration.csv.
CalibrationResult cmd_calibrate(const ExperimentConfig& config, const std::filesystem::path& out_dir,
                                std::ostream* log = nullptr);

inline constexpr int kReportSchemaVersion = 1;

struct ReportRow {
  std::string task;
  std::string protocol_id;
  AcquisitionProtocol protocol = AcquisitionProtocol::ad_hoc();
  double snr = 0.0;
  double mean = 0.0;
  double std = 0.0;
  int n_repeats = 0;
  double te = 0.0;
  std::string config_hash;
  std::uint64_t seed = 0;
  double wall_clock_s = 0.0;
};

class ReportSchemaMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string report_header();
std::string format_report_row(const ReportRow& row);

/// Throws ReportSchemaMismatch if the file's version line or header differs.
std::vector<ReportRow> read_report(const std::filesystem::path& path);

/// Creates the file with its version line when absent; refuses to append to a file with a
/// different schema version.
void append_report(const std::filesystem::path& path, const std::vector<ReportRow>& rows);

/// Fifty-repeat (n_repeats_report) accuracy of one protocol at one SNR.
ReportRow evaluate_row(const ExperimentConfig& config, const std::string& protocol_id,
                       const AcquisitionProtocol& protocol, double snr);

/// Evaluates at each SNR and appends to out_dir/report.csv.
std::vector<ReportRow> cmd_evaluate(const ExperimentConfig& config, const std::string& protocol_id,
                                    const AcquisitionProtocol& protocol, const std::vector<double>& snrs,
                                    const std::filesystem::path& out_dir);

struct ProtocolArtifact {
  std::string protocol_id;
  std::string optimizer;
  std::string task;
  double snr = 0.0;
  AcquisitionProtocol protocol = AcquisitionProtocol::ad_hoc();
  double te = 0.0;
  std::optional<double> objective;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string extra_json = "{}";  // optimizer-specific details
};

std::string artifact_json(const ProtocolArtifact& a);
ProtocolArtifact load_artifact(const std::filesystem::path& path);

struct ScreenerRun {
  rl::TrainResult train;
  AcquisitionProtocol greedy = AcquisitionProtocol::ad_hoc();
  AcquisitionProtocol selected = AcquisitionProtocol::ad_hoc();
  double best_seen_score = 0.0;  // selection-stream accuracy
  double greedy_score = 0.0;
};

/// Trains the agent, then keeps whichever of the best-seen and greedy protocols scores higher
/// on an independent selection stream.
ScreenerRun run_screener(const ExperimentConfig& config, double snr, long long total_steps,
                         const std::optional<std::filesystem::path>& checkpoint, std::ostream* log = nullptr);

/// Dispatches to the configured optimizer at `snr` and writes protocol.json, config.json and,
/// for screener, curve.csv and checkpoint.json under out_dir.
ProtocolArtifact cmd_optimize(const ExperimentConfig& config, const std::filesystem::path& out_dir,
                              std::optional<long long> budget = std::nullopt, std::ostream* log = nullptr);

struct SweepOptions {
  bool reoptimize = false;  // re-run crlb and screener at every SNR
  std::optional<long long> budget;
  /// Protocol optimized at the scanner SNR and evaluated everywhere (zero-shot series).
  std::optional<AcquisitionProtocol> zero_shot;
};

/// Accuracy of ad hoc, the configured sweep protocols and (optionally) per-SNR optimized
/// protocols at every SNR in the list; rows are appended to out_dir/report.csv.
std::vector<ReportRow> cmd_sweep_snr(const ExperimentConfig& config, const std::vector<double>& snrs,
                                     const SweepOptions& options, const std::filesystem::path& out_dir,
                                     std::ostream* log = nullptr);

/// Accuracy-vs-SNR SVG with one series per protocol id and std error bars. Missing cells break
/// the series line and are reported through `log`.
std::string render_plot(const std::vector<ReportRow>& rows, const std::string& task, std::ostream* log = nullptr);

void cmd_plot(const std::filesystem::path& report_path, const std::string& task,
              const std::filesystem::path& svg_path, std::ostream* log = nullptr);

/// Markdown summary (task x protocol x SNR) of a report file.
std::string summarize_report(const std::vector<ReportRow>& rows);

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace screener::harness
