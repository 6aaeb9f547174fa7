#pragma once

// Small environments shared by the unit and acceptance tests.

#include <cstdint>

#include <Eigen/Dense>

#include "screener/ppo.hpp"

namespace screener::rl::toy {

/// One-step episodes with Bernoulli rewards; arm `n_actions - 1` pays p_best, every other
/// arm pays p_other.
class Bandit : public Environment {
 public:
  Bandit(double p_best, double p_other, std::uint64_t seed, int observation_size = 1, int n_actions = 2)
      : p_best_(p_best), p_other_(p_other), obs_(Eigen::VectorXd::Ones(observation_size)), n_(n_actions),
        rng_(seed) {}

  [[nodiscard]] int observation_size() const override { return static_cast<int>(obs_.size()); }
  [[nodiscard]] int action_count() const override { return n_; }
  [[nodiscard]] int best_action() const { return n_ - 1; }
  Eigen::VectorXd reset() override { return obs_; }
  StepResult step(int action) override {
    std::bernoulli_distribution pay(action == best_action() ? p_best_ : p_other_);
    return {obs_, pay(rng_) ? 1.0 : 0.0, true};
  }

 private:
  double p_best_;
  double p_other_;
  Eigen::VectorXd obs_;
  int n_;
  Rng rng_;
};

/// Trains a fresh agent for 5000 steps on a 0.8 / 0.2 two-armed bandit and returns the final
/// probability of the better arm.
inline double train_bandit(std::uint64_t seed) {
  PpoConfig cfg;
  cfg.hidden = 16;
  cfg.n_steps = 500;
  Rng rng(seed);
  ActorCritic agent = ActorCritic::create(1, 2, cfg, rng);
  Bandit env(0.8, 0.2, seed + 1000);
  ppo_train(agent, env, cfg, 5000, rng);
  return policy_forward(agent, env.reset()).probabilities[env.best_action()];
}

}  // namespace screener::rl::toy
