#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "screener/ppo.hpp"
#include "screener/signal_sim.hpp"
#include "screener/task_eval.hpp"

namespace screener::rl {

inline constexpr int kObservationSize = static_cast<int>(kProtocolLength) + 2;
inline constexpr int kActionCount = static_cast<int>(kBMaxGrid) + 1;  // b = 0..1000 in steps of 1
inline constexpr double kSnrScale = 50.0;

struct ProtocolEnvConfig {
  TaskSpec task;
  TaskEnvironment env;
  EvalConfig eval;
  std::uint64_t seed = 0;  // reward stream root; episode e uses derive_seed(seed, e)
};

class StepAfterDone : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// slots / 1000, cursor / 10, snr / 50 (clipped to 1).
Eigen::VectorXd encode_observation(const AcquisitionProtocol::Values& slots, int cursor, double snr);

/// Sequential-slot MDP: each step writes one b-value into the next free slot (slot 0 is
/// pinned at 0). After nine decisions the sorted protocol is scored by the task objective.
class ProtocolEnv : public Environment {
 public:
  explicit ProtocolEnv(ProtocolEnvConfig config);

  [[nodiscard]] int observation_size() const override { return kObservationSize; }
  [[nodiscard]] int action_count() const override { return kActionCount; }
  Eigen::VectorXd reset() override;
  StepResult step(int action) override;

  [[nodiscard]] const AcquisitionProtocol::Values& slots() const { return slots_; }
  [[nodiscard]] int cursor() const { return cursor_; }
  [[nodiscard]] bool done() const { return done_; }
  [[nodiscard]] long long episodes_completed() const { return episodes_; }

  /// Populated after a terminal step.
  [[nodiscard]] const std::vector<int>& last_actions() const { return last_actions_; }
  [[nodiscard]] std::uint64_t last_reward_seed() const { return last_reward_seed_; }
  [[nodiscard]] double last_reward() const { return last_reward_; }
  [[nodiscard]] const ProtocolEnvConfig& config() const { return config_; }

 private:
  ProtocolEnvConfig config_;
  AcquisitionProtocol::Values slots_{};
  int cursor_ = 1;
  bool done_ = false;
  long long episodes_ = 0;
  std::vector<int> actions_;
  std::vector<int> last_actions_;
  std::uint64_t last_reward_seed_ = 0;
  double last_reward_ = 0.0;
};

/// Mean accuracy of `protocol` over `n_repeats_reward` fresh cohorts.
double protocol_reward(const AcquisitionProtocol& protocol, const ProtocolEnvConfig& config,
                       std::uint64_t reward_seed);

/// Protocol produced by an action sequence of length 9 starting from the reset state.
AcquisitionProtocol protocol_from_actions(const std::vector<int>& actions);

struct CurvePoint {
  long long step = 0;
  double mean_episode_reward = 0.0;  // NaN if no episode finished in the rollout
  double best_reward = 0.0;
};

struct TrainConfig {
  PpoConfig ppo;
  long long total_steps = 100000;
  std::optional<std::filesystem::path> checkpoint_path;  // rewritten after every update
  std::uint64_t seed = 0;
  std::string config_hash;
};

struct TrainResult {
  ActorCritic agent;
  AcquisitionProtocol best_protocol = AcquisitionProtocol::ad_hoc();
  std::optional<double> best_reward;  // empty if no episode finished
  std::vector<int> best_actions;
  std::uint64_t best_reward_seed = 0;
  std::vector<CurvePoint> curve;
  long long steps = 0;
};

/// PPO on the protocol environment, tracking the best terminal-reward protocol ever seen.
TrainResult train_screener(const ProtocolEnvConfig& env_config, const TrainConfig& config, Rng& rng);

/// One argmax episode; no reward is computed.
AcquisitionProtocol rollout_greedy(const ActorCritic& agent, double snr);

}  // namespace screener::rl
