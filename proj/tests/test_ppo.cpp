#include <cmath>
#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "screener/ppo.hpp"
#include "test_envs.hpp"

namespace screener::rl {
namespace {

PpoConfig tiny_config() {
  PpoConfig c;
  c.hidden = 4;
  c.ent_coef = 0.01;
  return c;
}

Minibatch random_batch(const ActorCritic& agent, int n, Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_int_distribution<int> act(0, agent.actor.outputs() - 1);
  Minibatch mb;
  mb.observations.resize(agent.actor.inputs(), n);
  for (Eigen::Index i = 0; i < mb.observations.size(); ++i) mb.observations.data()[i] = g(rng);
  mb.actions.resize(static_cast<std::size_t>(n));
  mb.old_log_probs.resize(n);
  mb.advantages.resize(n);
  mb.returns.resize(n);
  for (int i = 0; i < n; ++i) {
    const auto out = policy_forward(agent, mb.observations.col(i));
    const int a = act(rng);
    mb.actions[static_cast<std::size_t>(i)] = a;
    // Ratios well inside or well outside the clip band, away from the kinks.
    const double shift = (i % 3 == 0) ? 0.05 : (i % 3 == 1 ? 0.6 : -0.6);
    mb.old_log_probs[i] = out.log_probabilities[a] - shift;
    mb.advantages[i] = g(rng);
    mb.returns[i] = g(rng);
  }
  return mb;
}

TEST(PpoLoss, GradientMatchesFiniteDifferences) {
  Rng rng(1);
  ActorCritic agent = ActorCritic::create(3, 5, tiny_config(), rng);
  std::normal_distribution<double> g(0.0, 0.3);
  for (Mlp* m : {&agent.actor, &agent.critic}) {
    for (Eigen::Index i = 0; i < m->parameter_count(); ++i) m->parameters()[i] += g(rng);
  }
  const Minibatch mb = random_batch(agent, 12, rng);
  const PpoConfig cfg = tiny_config();
  Eigen::VectorXd ga, gc;
  ppo_loss(agent, mb, cfg, &ga, &gc);

  auto check = [&](Mlp ActorCritic::*net, const Eigen::VectorXd& grad) {
    for (Eigen::Index i = 0; i < grad.size(); ++i) {
      ActorCritic plus = agent, minus = agent;
      const double h = 1e-6;
      (plus.*net).parameters()[i] += h;
      (minus.*net).parameters()[i] -= h;
      const double fd = (ppo_loss(plus, mb, cfg).total - ppo_loss(minus, mb, cfg).total) / (2.0 * h);
      EXPECT_LE(std::abs(grad[i] - fd), 1e-4 * std::max(std::abs(fd), 1e-3)) << "parameter " << i;
    }
  };
  check(&ActorCritic::actor, ga);
  check(&ActorCritic::critic, gc);
}

TEST(PpoLoss, ZeroAdvantageLeavesPolicyTermInert) {
  Rng rng(2);
  PpoConfig cfg = tiny_config();
  cfg.ent_coef = 0.0;
  ActorCritic agent = ActorCritic::create(3, 4, cfg, rng);
  Minibatch mb = random_batch(agent, 8, rng);
  mb.advantages.setZero();
  Eigen::VectorXd ga;
  const auto t = ppo_loss(agent, mb, cfg, &ga);
  EXPECT_EQ(t.policy_loss, 0.0);
  EXPECT_EQ(ga.cwiseAbs().maxCoeff(), 0.0);
}

TEST(PpoLoss, ClippedObjectiveAtRatioTwo) {
  Rng rng(3);
  PpoConfig cfg = tiny_config();
  cfg.ent_coef = 0.0;
  ActorCritic agent = ActorCritic::create(2, 3, cfg, rng);
  Minibatch mb;
  mb.observations = Eigen::MatrixXd::Ones(2, 1);
  mb.actions = {1};
  const auto out = policy_forward(agent, mb.observations.col(0));
  mb.old_log_probs = Eigen::VectorXd::Constant(1, out.log_probabilities[1] - std::log(2.0));
  mb.advantages = Eigen::VectorXd::Constant(1, 0.7);
  mb.returns = Eigen::VectorXd::Zero(1);
  Eigen::VectorXd ga;
  const auto t = ppo_loss(agent, mb, cfg, &ga);
  EXPECT_NEAR(-t.policy_loss, 1.2 * 0.7, 1e-12);
  EXPECT_EQ(t.clip_fraction, 1.0);
  // The clipped branch has no gradient.
  EXPECT_EQ(ga.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_NEAR(t.approx_kl, 1.0 - std::log(2.0), 1e-12);
}

TEST(Policy, FreshAgentIsNearUniform) {
  Rng rng(4);
  ActorCritic agent = ActorCritic::create(12, 1001, PpoConfig{}, rng);
  Eigen::VectorXd obs(12);
  obs << 0, 0.01, 0.02, 0.03, 0.05, 0.08, 0.1, 0.2, 0.4, 0.8, 0.1, 0.5;
  const auto out = policy_forward(agent, obs);
  EXPECT_NEAR(out.probabilities.sum(), 1.0, 1e-6);
  EXPECT_GE(out.probabilities.minCoeff(), 0.0);
  EXPECT_LT(out.probabilities.maxCoeff() / out.probabilities.minCoeff(), 3.0);
}

TEST(Policy, SampleAndGreedy) {
  Eigen::VectorXd p(4);
  p << 0.1, 0.0, 0.6, 0.3;
  PolicyOutput out;
  out.probabilities = p;
  EXPECT_EQ(greedy_action(out), 2);
  Rng rng(5);
  int counts[4] = {0, 0, 0, 0};
  for (int i = 0; i < 100000; ++i) ++counts[sample_action(p, rng)];
  EXPECT_EQ(counts[1], 0);
  EXPECT_NEAR(counts[2] / 100000.0, 0.6, 0.01);
  EXPECT_NEAR(counts[3] / 100000.0, 0.3, 0.01);
}

TEST(Gae, HandComputedTwoStepEpisode) {
  RolloutBuffer buf;
  buf.steps = {{Eigen::VectorXd::Zero(1), 0, 0.0, 0.0, 0.5, false},
               {Eigen::VectorXd::Zero(1), 0, 0.0, 1.0, 0.8, true},
               {Eigen::VectorXd::Zero(1), 0, 0.0, 0.0, 0.3, false}};
  buf.last_value = 2.0;
  compute_gae(buf, 0.9, 0.8);
  const double a2 = 0.0 + 0.9 * 2.0 - 0.3;
  const double a1 = 1.0 - 0.8;
  const double a0 = (0.0 + 0.9 * 0.8 - 0.5) + 0.9 * 0.8 * a1;
  EXPECT_NEAR(buf.advantages[2], a2, 1e-15);
  EXPECT_NEAR(buf.advantages[1], a1, 1e-15);
  EXPECT_NEAR(buf.advantages[0], a0, 1e-15);
  EXPECT_NEAR(buf.returns[0], a0 + 0.5, 1e-15);
}

TEST(Gae, LambdaOneIsDiscountedReturnMinusValue) {
  RolloutBuffer buf;
  const double r[3] = {0.2, -0.1, 1.0};
  const double v[3] = {0.4, 0.1, 0.7};
  for (int i = 0; i < 3; ++i) buf.steps.push_back({Eigen::VectorXd::Zero(1), 0, 0.0, r[i], v[i], i == 2});
  compute_gae(buf, 0.95, 1.0);
  const double g0 = 0.2 + 0.95 * (-0.1) + 0.95 * 0.95 * 1.0;
  EXPECT_NEAR(buf.returns[0], g0, 1e-14);
  EXPECT_NEAR(buf.advantages[0], g0 - 0.4, 1e-14);
}

TEST(PpoUpdate, RejectsEmptyRollout) {
  Rng rng(6);
  ActorCritic agent = ActorCritic::create(1, 2, tiny_config(), rng);
  RolloutBuffer buf;
  EXPECT_THROW(ppo_update(agent, buf, tiny_config(), rng), std::invalid_argument);
}

TEST(PpoUpdate, NonFiniteRewardRaisesDivergence) {
  Rng rng(7);
  ActorCritic agent = ActorCritic::create(1, 2, tiny_config(), rng);
  RolloutBuffer buf;
  for (int i = 0; i < 4; ++i) {
    buf.steps.push_back({Eigen::VectorXd::Ones(1), i % 2, std::log(0.5), i == 2 ? std::nan("") : 1.0, 0.0, true});
  }
  EXPECT_THROW(ppo_update(agent, buf, tiny_config(), rng), PpoDivergence);
}

TEST(PpoUpdate, GradientStepsIncludeShortFinalMinibatch) {
  Rng rng(8);
  PpoConfig cfg = tiny_config();
  cfg.batch_size = 4;
  cfg.n_epochs = 3;
  ActorCritic agent = ActorCritic::create(1, 2, cfg, rng);
  RolloutBuffer buf;
  for (int i = 0; i < 10; ++i) buf.steps.push_back({Eigen::VectorXd::Ones(1), i % 2, std::log(0.5), i % 2, 0.0, true});
  const auto stats = ppo_update(agent, buf, cfg, rng);
  EXPECT_EQ(stats.gradient_steps, 9);
  EXPECT_EQ(agent.actor_opt.t, 9);
}

TEST(PpoTrain, BanditConvergesInMostSeeds) {
  int converged = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    if (toy::train_bandit(seed) >= 0.9) ++converged;
  }
  EXPECT_GE(converged, 9);
}

TEST(PpoTrain, ExactStepBudgetAndHooks) {
  Rng rng(9);
  PpoConfig cfg = tiny_config();
  cfg.n_steps = 64;
  ActorCritic agent = ActorCritic::create(1, 2, cfg, rng);
  toy::Bandit env(0.8, 0.2, 1);
  long long episodes = 0;
  long long last_steps = 0;
  int updates = 0;
  TrainHooks hooks;
  hooks.on_episode_end = [&](const Environment&, double) { ++episodes; };
  hooks.on_update = [&](long long steps, const UpdateStats&, double) {
    last_steps = steps;
    ++updates;
  };
  ppo_train(agent, env, cfg, 150, rng, hooks);
  EXPECT_EQ(episodes, 150);
  EXPECT_EQ(last_steps, 150);
  EXPECT_EQ(updates, 3);
}

TEST(PpoTrain, DeterministicForSeed) {
  auto run = [] {
    Rng rng(10);
    PpoConfig cfg = tiny_config();
    cfg.n_steps = 32;
    ActorCritic agent = ActorCritic::create(1, 2, cfg, rng);
    toy::Bandit env(0.8, 0.2, 5);
    ppo_train(agent, env, cfg, 200, rng);
    return agent.actor.parameters();
  };
  EXPECT_EQ(run(), run());
}

TEST(Checkpoint, RoundTripIsExact) {
  Rng rng(11);
  PpoConfig cfg = tiny_config();
  cfg.n_steps = 16;
  ActorCritic agent = ActorCritic::create(3, 4, cfg, rng);
  toy::Bandit env(0.7, 0.3, 2, 3, 4);
  ppo_train(agent, env, cfg, 32, rng);

  const auto path = std::filesystem::temp_directory_path() / "screener_test_ckpt.json";
  save_checkpoint(agent, cfg, {32, "state", "abcd", 77}, path);
  PpoConfig loaded_cfg;
  CheckpointMeta meta;
  const ActorCritic loaded = load_checkpoint(path, &loaded_cfg, &meta);
  EXPECT_EQ(loaded.actor.parameters(), agent.actor.parameters());
  EXPECT_EQ(loaded.critic.parameters(), agent.critic.parameters());
  EXPECT_EQ(loaded.actor_opt.m, agent.actor_opt.m);
  EXPECT_EQ(loaded.critic_opt.v, agent.critic_opt.v);
  EXPECT_EQ(loaded.actor_opt.t, agent.actor_opt.t);
  EXPECT_EQ(loaded_cfg.hidden, 4);
  EXPECT_EQ(loaded_cfg.ent_coef, cfg.ent_coef);
  EXPECT_EQ(meta.steps, 32);
  EXPECT_EQ(meta.config_hash, "abcd");
  EXPECT_EQ(meta.seed, 77u);
  std::filesystem::remove(path);
}

TEST(Checkpoint, RejectsForeignFiles) {
  const auto path = std::filesystem::temp_directory_path() / "screener_test_not_ckpt.json";
  { std::ofstream(path) << R"({"format": "other", "version": 1})"; }
  EXPECT_THROW(load_checkpoint(path), std::runtime_error);
  std::filesystem::remove(path);
  EXPECT_THROW(load_checkpoint(path), std::runtime_error);
}

}  // namespace
}  // namespace screener::rl
