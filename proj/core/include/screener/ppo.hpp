#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "screener/mlp.hpp"
#include "screener/random.hpp"

namespace screener::rl {

/// Hyperparameters. Defaults mirror the stable-baselines3 PPO defaults except the learning
/// rate, which is 1e-3.
struct PpoConfig {
  int hidden = 64;
  double learning_rate = 1e-3;
  int n_steps = 2048;  // rollout length
  int batch_size = 64;
  int n_epochs = 10;
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double clip_range = 0.2;
  double ent_coef = 0.0;
  double vf_coef = 0.5;
  double max_grad_norm = 0.5;
  double adam_epsilon = 1e-5;
  bool normalize_advantage = true;

  void validate() const;
};

struct StepResult {
  Eigen::VectorXd observation;
  double reward = 0.0;
  bool done = false;
};

/// Episodic environment with a discrete action set.
class Environment {
 public:
  virtual ~Environment() = default;
  [[nodiscard]] virtual int observation_size() const = 0;
  [[nodiscard]] virtual int action_count() const = 0;
  virtual Eigen::VectorXd reset() = 0;
  virtual StepResult step(int action) = 0;
};

/// Separate actor (logits) and critic (value) networks with one Adam state each.
struct ActorCritic {
  Mlp actor;
  Mlp critic;
  Adam actor_opt;
  Adam critic_opt;

  /// SB3-style orthogonal init: gain sqrt(2) on hidden layers, 0.01 on the policy head and
  /// 1 on the value head.
  static ActorCritic create(int observation_size, int action_count, const PpoConfig& config, Rng& rng);

  [[nodiscard]] bool finite() const;
};

struct PolicyOutput {
  Eigen::VectorXd probabilities;
  Eigen::VectorXd log_probabilities;
  double value = 0.0;
};

/// One observation through both networks.
PolicyOutput policy_forward(const ActorCritic& agent, const Eigen::VectorXd& observation);

/// Index of the largest probability; ties go to the lowest index.
int greedy_action(const PolicyOutput& out);

/// Inverse-CDF categorical draw.
int sample_action(const Eigen::VectorXd& probabilities, Rng& rng);

struct Transition {
  Eigen::VectorXd observation;
  int action = 0;
  double log_prob = 0.0;
  double reward = 0.0;
  double value = 0.0;
  bool done = false;  // this step ended the episode
};

struct RolloutBuffer {
  std::vector<Transition> steps;
  double last_value = 0.0;  // V(observation after the final step); ignored if that step was terminal
  std::vector<double> advantages;
  std::vector<double> returns;
};

/// Generalized advantage estimation; returns = advantages + values.
void compute_gae(RolloutBuffer& buffer, double gamma, double lambda);

struct Minibatch {
  Eigen::MatrixXd observations;  // one column per sample
  std::vector<int> actions;
  Eigen::VectorXd old_log_probs;
  Eigen::VectorXd advantages;  // already normalized if requested
  Eigen::VectorXd returns;
};

struct LossTerms {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double approx_kl = 0.0;
  double clip_fraction = 0.0;
  double total = 0.0;
};

/// Clipped-surrogate PPO loss: policy_loss - ent_coef * entropy + vf_coef * value_loss.
/// When gradient pointers are given they receive the exact gradient of `total`.
LossTerms ppo_loss(const ActorCritic& agent, const Minibatch& batch, const PpoConfig& config,
                   Eigen::VectorXd* actor_grad = nullptr, Eigen::VectorXd* critic_grad = nullptr);

struct UpdateStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double approx_kl = 0.0;
  double clip_fraction = 0.0;
  int gradient_steps = 0;
};

class PpoDivergence : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// n_epochs passes over shuffled minibatches with one clipped-gradient Adam step each.
/// Computes GAE first. Throws PpoDivergence on a non-finite loss or weights.
UpdateStats ppo_update(ActorCritic& agent, RolloutBuffer& buffer, const PpoConfig& config, Rng& rng);

struct TrainHooks {
  /// After every terminal step; `env` is the environment that just finished an episode.
  std::function<void(const Environment& env, double episode_return)> on_episode_end;
  /// After every update: total steps so far, the update statistics and the mean return of
  /// episodes finished during the rollout (NaN if none).
  std::function<void(long long steps, const UpdateStats& stats, double mean_return)> on_update;
};

/// Rollout/update loop until `total_steps` environment steps. The final rollout is truncated
/// so exactly `total_steps` steps are taken.
void ppo_train(ActorCritic& agent, Environment& env, const PpoConfig& config, long long total_steps, Rng& rng,
               const TrainHooks& hooks = {});

/// Versioned JSON checkpoint of both networks, optimizer moments, step count and RNG state.
struct CheckpointMeta {
  long long steps = 0;
  std::string rng_state;
  std::string config_hash;
  std::uint64_t seed = 0;
};

void save_checkpoint(const ActorCritic& agent, const PpoConfig& config, const CheckpointMeta& meta,
                     const std::filesystem::path& path);
ActorCritic load_checkpoint(const std::filesystem::path& path, PpoConfig* config = nullptr,
                            CheckpointMeta* meta = nullptr);

}  // namespace screener::rl
