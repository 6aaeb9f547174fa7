#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "screener/cohort.hpp"
#include "screener/fitting.hpp"
#include "screener/signal_sim.hpp"

namespace screener {

enum class TaskKind { BinaryActiveChronic, BinaryActiveHealthy, BinaryChronicHealthy, MultiClass };

inline constexpr std::array<TaskKind, 3> kBinaryTasks{
    TaskKind::BinaryActiveChronic, TaskKind::BinaryActiveHealthy, TaskKind::BinaryChronicHealthy};

struct TaskSpec {
  TaskKind kind = TaskKind::MultiClass;

  /// Classes in the task's naming order (first-named class first).
  [[nodiscard]] std::vector<TissueClass> classes() const;
  [[nodiscard]] std::string name() const;
};

/// "active-chronic", "active-healthy", "chronic-healthy", "multiclass".
TaskSpec parse_task(std::string_view name);

struct EvalConfig {
  int k_neighbors = 5;
  int n_folds = 5;
  int n_repeats_report = 50;
  int n_repeats_reward = 3;

  void validate() const;
};

inline constexpr std::size_t kNumFeatures = 4;
/// (s0_est, f_est, d_est, dstar_est)
using Feature = std::array<double, kNumFeatures>;

Feature to_feature(const FitResult& fit);

/// Majority label among the k nearest training points (Euclidean). Vote ties go to the tied
/// label whose member is nearest; distance ties go to the lower training index. Features are
/// expected to be standardized by the caller.
int knn_predict(std::span<const Feature> train_features, std::span<const int> train_labels,
                const Feature& query, int k);

/// Per-feature affine map fitted on training data only. Zero-variance features keep scale 1.
struct ZScore {
  Feature mean{};
  Feature scale{};

  static ZScore fit(std::span<const Feature> train);
  [[nodiscard]] Feature apply(const Feature& x) const;
};

class InsufficientSubjects : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Fold index per subject; within each class, subjects are shuffled then dealt round-robin
/// with a counter that continues across classes.
std::vector<int> stratified_folds(std::span<const int> labels, int n_folds, Rng& rng);

struct Accuracy {
  double mean = 0.0;
  double std = 0.0;
  int n_repeats = 0;
};

/// Stratified k-fold accuracy with per-fold z-scoring. Each repeat reshuffles the folds from a
/// stream derived from (seed, repeat). Returns the mean and std of fold accuracies, each
/// averaged over repeats.
Accuracy cross_val_accuracy(std::span<const Feature> features, std::span<const int> labels,
                            const EvalConfig& config, int n_repeats, std::uint64_t seed);

/// Mann-Whitney AUC of `a` versus `b` (P(a > b) + 0.5 P(a == b)), without orientation.
double raw_auc(std::span<const double> a, std::span<const double> b);

/// Direction-free AUC: max(raw_auc, 1 - raw_auc).
double parameter_auc(std::span<const double> values_a, std::span<const double> values_b);

/// Everything a protocol is scored against.
struct TaskEnvironment {
  DistributionSet distributions;
  CohortSpec cohort;
  ScannerConfig scanner;
  FitConfig fit;
};

/// Fresh cohort -> simulation -> segmented fit -> cross-validated KNN accuracy.
/// Deterministic in (seed, protocol, config).
Accuracy task_objective(const AcquisitionProtocol& protocol, const TaskSpec& task,
                        const TaskEnvironment& env, const EvalConfig& eval, int n_cv_repeats,
                        std::uint64_t seed);

/// Reporting mode: each repeat draws a fresh cohort (stream derived from (seed, repeat)) and
/// runs one stratified CV. Mean and std are taken across repeats.
Accuracy evaluate_protocol(const AcquisitionProtocol& protocol, const TaskSpec& task,
                           const TaskEnvironment& env, const EvalConfig& eval, int n_repeats,
                           std::uint64_t seed);

/// Simulated, fitted dataset for one repeat of a task.
Dataset simulate_task_dataset(const AcquisitionProtocol& protocol, const TaskSpec& task,
                              const TaskEnvironment& env, std::uint64_t seed);

}  // namespace screener
