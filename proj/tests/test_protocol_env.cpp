#include <cmath>
#include <filesystem>

#include <gtest/gtest.h>

#include "screener/protocol_env.hpp"

namespace screener::rl {
namespace {

ProtocolEnvConfig shipped_env(TaskKind task = TaskKind::MultiClass) {
  ProtocolEnvConfig c;
  c.task = TaskSpec{task};
  c.env.distributions = load_distributions(std::filesystem::path(SCREENER_DATA_DIR) / "tissue_distributions.json");
  c.eval.n_repeats_reward = 1;
  c.seed = 42;
  return c;
}

std::vector<int> ad_hoc_actions() { return {10, 20, 30, 50, 80, 100, 200, 400, 800}; }

TEST(Observation, Encoding) {
  const auto obs = encode_observation(AcquisitionProtocol::ad_hoc().b_values(), 1, 25.0);
  ASSERT_EQ(obs.size(), kObservationSize);
  EXPECT_EQ(obs[0], 0.0);
  EXPECT_EQ(obs[9], 0.8);
  EXPECT_EQ(obs[10], 0.1);
  EXPECT_EQ(obs[11], 0.5);
  EXPECT_EQ(encode_observation(AcquisitionProtocol::ad_hoc().b_values(), 1, 200.0)[11], 1.0);
}

TEST(ProtocolEnv, ResetIsDeterministic) {
  ProtocolEnv env(shipped_env());
  const auto a = env.reset();
  env.step(5);
  const auto b = env.reset();
  EXPECT_EQ(a, b);
  EXPECT_EQ(env.cursor(), 1);
  EXPECT_EQ(env.slots()[0], 0.0);
}

TEST(ProtocolEnv, SparseTerminalReward) {
  ProtocolEnv env(shipped_env());
  env.reset();
  const auto actions = ad_hoc_actions();
  for (std::size_t i = 0; i + 1 < actions.size(); ++i) {
    const auto r = env.step(actions[i]);
    EXPECT_EQ(r.reward, 0.0);
    EXPECT_FALSE(r.done);
    EXPECT_EQ(r.observation[10], (i + 2) / 10.0);
  }
  const auto last = env.step(actions.back());
  EXPECT_TRUE(last.done);
  EXPECT_GT(last.reward, 0.0);
  EXPECT_EQ(env.episodes_completed(), 1);
  EXPECT_EQ(env.last_actions(), actions);
  EXPECT_THROW(env.step(0), StepAfterDone);
}

TEST(ProtocolEnv, RejectsOutOfRangeActions) {
  ProtocolEnv env(shipped_env());
  EXPECT_THROW(env.step(-1), std::out_of_range);
  EXPECT_THROW(env.step(1001), std::out_of_range);
  EXPECT_NO_THROW(env.step(1000));
}

TEST(ProtocolEnv, SlotsStayInRange) {
  ProtocolEnv env(shipped_env());
  Rng rng(1);
  std::uniform_int_distribution<int> act(0, kActionCount - 1);
  for (int e = 0; e < 3; ++e) {
    env.reset();
    while (!env.done()) {
      env.step(act(rng));
      EXPECT_LE(env.cursor(), 10);
      EXPECT_EQ(env.slots()[0], 0.0);
      for (double b : env.slots()) {
        EXPECT_GE(b, 0.0);
        EXPECT_LE(b, 1000.0);
      }
    }
  }
}

TEST(ProtocolEnv, TerminalRewardIsReplayable) {
  ProtocolEnv env(shipped_env());
  env.reset();
  for (int a : {0, 175, 229, 336, 540, 595, 603, 618, 881}) env.step(a);
  const double r = env.last_reward();
  EXPECT_EQ(protocol_reward(protocol_from_actions(env.last_actions()), env.config(), env.last_reward_seed()), r);
  EXPECT_EQ(env.last_reward_seed(), derive_seed(42, 0));
}

TEST(ProtocolReward, AdHocMulticlassNearReference) {
  ProtocolEnvConfig c = shipped_env();
  c.eval.n_repeats_reward = 20;
  const double r = protocol_reward(protocol_from_actions(ad_hoc_actions()), c, 7);
  RecordProperty("ad_hoc_reward", std::to_string(r));
  EXPECT_NEAR(r, 0.46, 0.06);
}

TEST(ProtocolReward, AllZeroProtocolIsAtChance) {
  ProtocolEnvConfig c = shipped_env();
  c.eval.n_repeats_reward = 10;
  const double r = protocol_reward(protocol_from_actions(std::vector<int>(9, 0)), c, 8);
  RecordProperty("all_zero_reward", std::to_string(r));
  EXPECT_NEAR(r, 1.0 / 3.0, 0.03);
}

TEST(ProtocolFromActions, SortsAndValidates) {
  EXPECT_EQ(protocol_from_actions({800, 400, 200, 100, 80, 50, 30, 20, 10}), AcquisitionProtocol::ad_hoc());
  EXPECT_THROW(protocol_from_actions({1, 2, 3}), std::invalid_argument);
}

TrainConfig small_train(long long steps) {
  TrainConfig t;
  t.ppo.hidden = 16;
  t.ppo.n_steps = 90;
  t.ppo.batch_size = 30;
  t.ppo.n_epochs = 2;
  t.total_steps = steps;
  return t;
}

TEST(TrainScreener, ZeroBudgetReturnsAdHoc) {
  Rng rng(2);
  const auto r = train_screener(shipped_env(), small_train(0), rng);
  EXPECT_EQ(r.best_protocol, AcquisitionProtocol::ad_hoc());
  EXPECT_FALSE(r.best_reward.has_value());
  EXPECT_TRUE(r.curve.empty());
  EXPECT_TRUE(r.agent.finite());
}

TEST(TrainScreener, TracksReplayableBestAndWritesCheckpoint) {
  const auto ckpt = std::filesystem::temp_directory_path() / "screener_test_train_ckpt.json";
  TrainConfig t = small_train(180);
  t.checkpoint_path = ckpt;
  t.config_hash = "feedface";
  Rng rng(3);
  const ProtocolEnvConfig env = shipped_env();
  const auto r = train_screener(env, t, rng);
  ASSERT_TRUE(r.best_reward.has_value());
  EXPECT_EQ(r.steps, 180);
  EXPECT_EQ(r.curve.size(), 2u);
  EXPECT_EQ(protocol_from_actions(r.best_actions), r.best_protocol);
  EXPECT_EQ(protocol_reward(r.best_protocol, env, r.best_reward_seed), *r.best_reward);

  CheckpointMeta meta;
  const ActorCritic loaded = load_checkpoint(ckpt, nullptr, &meta);
  EXPECT_EQ(meta.steps, 180);
  EXPECT_EQ(meta.config_hash, "feedface");
  EXPECT_EQ(loaded.actor.parameters(), r.agent.actor.parameters());
  EXPECT_EQ(rollout_greedy(loaded, 25.0), rollout_greedy(r.agent, 25.0));
  std::filesystem::remove(ckpt);
}

TEST(TrainScreener, DeterministicForSeed) {
  auto run = [] {
    Rng rng(4);
    return train_screener(shipped_env(), small_train(90), rng);
  };
  const auto a = run();
  const auto b = run();
  EXPECT_EQ(a.agent.actor.parameters(), b.agent.actor.parameters());
  EXPECT_EQ(a.best_protocol, b.best_protocol);
  EXPECT_EQ(a.best_reward, b.best_reward);
}

TEST(RolloutGreedy, DeterministicAndValid) {
  Rng rng(5);
  const ActorCritic agent = ActorCritic::create(kObservationSize, kActionCount, PpoConfig{}, rng);
  const auto a = rollout_greedy(agent, 25.0);
  EXPECT_EQ(a, rollout_greedy(agent, 25.0));
  const auto& b = a.b_values();
  EXPECT_EQ(b.front(), 0.0);
  EXPECT_TRUE(std::is_sorted(b.begin(), b.end()));
  EXPECT_LE(b.back(), 1000.0);
}

}  // namespace
}  // namespace screener::rl
