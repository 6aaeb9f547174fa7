#include "screener/protocol_env.hpp"

#include <algorithm>
#include <atomic>
#include <iostream>
#include <limits>
#include <sstream>

namespace screener::rl {

Eigen::VectorXd encode_observation(const AcquisitionProtocol::Values& slots, int cursor, double snr) {
  static std::atomic<bool> warned{false};
  Eigen::VectorXd obs(kObservationSize);
  for (std::size_t i = 0; i < kProtocolLength; ++i) obs[static_cast<Eigen::Index>(i)] = slots[i] / kBMaxGrid;
  obs[kProtocolLength] = static_cast<double>(cursor) / static_cast<double>(kProtocolLength);
  double s = snr / kSnrScale;
  if (s > 1.0) {
    if (!warned.exchange(true)) {
      std::cerr << "warning: snr " << snr << " exceeds " << kSnrScale << "; observation entry clipped to 1\n";
    }
    s = 1.0;
  }
  obs[kProtocolLength + 1] = s;
  return obs;
}

ProtocolEnv::ProtocolEnv(ProtocolEnvConfig config) : config_(std::move(config)) {
  config_.env.scanner.validate();
  config_.eval.validate();
  reset();
}

Eigen::VectorXd ProtocolEnv::reset() {
  slots_ = AcquisitionProtocol::ad_hoc().b_values();
  cursor_ = 1;
  done_ = false;
  actions_.clear();
  return encode_observation(slots_, cursor_, config_.env.scanner.snr);
}

StepResult ProtocolEnv::step(int action) {
  if (done_) throw StepAfterDone("ProtocolEnv::step called on a finished episode");
  if (action < 0 || action >= kActionCount) {
    throw std::out_of_range("ProtocolEnv::step: action " + std::to_string(action) + " outside [0, 1000]");
  }
  slots_[static_cast<std::size_t>(cursor_)] = static_cast<double>(action);
  actions_.push_back(action);
  ++cursor_;
  StepResult r;
  if (cursor_ == static_cast<int>(kProtocolLength)) {
    done_ = true;
    last_reward_seed_ = derive_seed(config_.seed, static_cast<std::uint64_t>(episodes_));
    ++episodes_;
    last_actions_ = actions_;
    last_reward_ = protocol_reward(AcquisitionProtocol::create(slots_), config_, last_reward_seed_);
    r.reward = last_reward_;
    r.done = true;
  }
  r.observation = encode_observation(slots_, cursor_, config_.env.scanner.snr);
  return r;
}

double protocol_reward(const AcquisitionProtocol& protocol, const ProtocolEnvConfig& config,
                       std::uint64_t reward_seed) {
  return evaluate_protocol(protocol, config.task, config.env, config.eval, config.eval.n_repeats_reward, reward_seed)
      .mean;
}

AcquisitionProtocol protocol_from_actions(const std::vector<int>& actions) {
  if (actions.size() != kProtocolLength - 1) {
    throw std::invalid_argument("protocol_from_actions: expected 9 actions");
  }
  std::array<double, kProtocolLength> b{};
  for (std::size_t i = 0; i < actions.size(); ++i) b[i + 1] = actions[i];
  return AcquisitionProtocol::create(b);
}

TrainResult train_screener(const ProtocolEnvConfig& env_config, const TrainConfig& config, Rng& rng) {
  config.ppo.validate();
  if (config.total_steps < 0) throw std::invalid_argument("train_screener: negative step budget");
  TrainResult out;
  out.agent = ActorCritic::create(kObservationSize, kActionCount, config.ppo, rng);
  ProtocolEnv env(env_config);

  double best = -std::numeric_limits<double>::infinity();
  TrainHooks hooks;
  hooks.on_episode_end = [&](const Environment& e, double episode_return) {
    const auto& pe = static_cast<const ProtocolEnv&>(e);
    if (episode_return > best) {
      best = episode_return;
      out.best_reward = episode_return;
      out.best_actions = pe.last_actions();
      out.best_reward_seed = pe.last_reward_seed();
      out.best_protocol = protocol_from_actions(pe.last_actions());
    }
  };
  hooks.on_update = [&](long long steps, const UpdateStats&, double mean_return) {
    out.steps = steps;
    out.curve.push_back({steps, mean_return, out.best_reward.value_or(std::numeric_limits<double>::quiet_NaN())});
    if (config.checkpoint_path) {
      std::ostringstream state;
      state << rng;
      save_checkpoint(out.agent, config.ppo, {steps, state.str(), config.config_hash, config.seed},
                      *config.checkpoint_path);
    }
  };
  ppo_train(out.agent, env, config.ppo, config.total_steps, rng, hooks);
  return out;
}

AcquisitionProtocol rollout_greedy(const ActorCritic& agent, double snr) {
  auto slots = AcquisitionProtocol::ad_hoc().b_values();
  for (int cursor = 1; cursor < static_cast<int>(kProtocolLength); ++cursor) {
    const PolicyOutput out = policy_forward(agent, encode_observation(slots, cursor, snr));
    slots[static_cast<std::size_t>(cursor)] = greedy_action(out);
  }
  return AcquisitionProtocol::create(slots);
}

}  // namespace screener::rl
