#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>
#include <vector>

#include <gtest/gtest.h>

#include "screener/task_eval.hpp"

namespace screener {
namespace {

// All-pairs reference: sort every training point by (distance, index), vote over the first k,
// break vote ties by the earliest-ranked member of a tied label.
int brute_knn(const std::vector<Feature>& x, const std::vector<int>& y, const Feature& q, int k) {
  std::vector<std::tuple<double, std::size_t>> order;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double d = 0.0;
    for (std::size_t j = 0; j < kNumFeatures; ++j) d += (x[i][j] - q[j]) * (x[i][j] - q[j]);
    order.emplace_back(d, i);
  }
  std::sort(order.begin(), order.end());
  order.resize(std::min<std::size_t>(k, order.size()));
  std::map<int, int> votes;
  for (const auto& [d, i] : order) ++votes[y[i]];
  int top = 0;
  for (const auto& [label, n] : votes) top = std::max(top, n);
  for (const auto& [d, i] : order) {
    if (votes[y[i]] == top) return y[i];
  }
  return -1;
}

double brute_auc(const std::vector<double>& a, const std::vector<double>& b) {
  double wins = 0.0;
  for (double u : a) {
    for (double v : b) wins += u > v ? 1.0 : (u == v ? 0.5 : 0.0);
  }
  return wins / static_cast<double>(a.size() * b.size());
}

TEST(Task, NamesRoundTrip) {
  for (const char* n : {"active-chronic", "active-healthy", "chronic-healthy", "multiclass"}) {
    EXPECT_EQ(parse_task(n).name(), n);
  }
  EXPECT_THROW(parse_task("binary"), std::invalid_argument);
  EXPECT_EQ(TaskSpec{TaskKind::BinaryChronicHealthy}.classes(),
            (std::vector<TissueClass>{TissueClass::Chronic, TissueClass::Healthy}));
  EXPECT_EQ(TaskSpec{TaskKind::MultiClass}.classes().size(), 3u);
}

TEST(Knn, SeparableClustersK1) {
  std::vector<Feature> x;
  std::vector<int> y;
  Rng rng(1);
  std::normal_distribution<double> jitter(0.0, 0.1);
  for (int i = 0; i < 20; ++i) {
    const double c = i % 2 ? 9.0 : 0.0;
    x.push_back({c + jitter(rng), c + jitter(rng), c + jitter(rng), c + jitter(rng)});
    y.push_back(i % 2);
  }
  for (int i = 0; i < 50; ++i) {
    const double c = i % 2 ? 9.0 : 0.0;
    EXPECT_EQ(knn_predict(x, y, {c + jitter(rng), c, c, c - jitter(rng)}, 1), i % 2);
  }
}

TEST(Knn, KEqualsTrainSizeGivesMajority) {
  Rng rng(2);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Feature> x;
  std::vector<int> y;
  for (int i = 0; i < 11; ++i) {
    x.push_back({u(rng), u(rng), u(rng), u(rng)});
    y.push_back(i < 7 ? 2 : 0);
  }
  for (int t = 0; t < 20; ++t) EXPECT_EQ(knn_predict(x, y, {u(rng), u(rng), u(rng), u(rng)}, 11), 2);
}

TEST(Knn, MatchesBruteForce) {
  Rng rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_int_distribution<int> label(0, 2);
  std::uniform_int_distribution<int> grid(0, 3);
  for (int inst = 0; inst < 100; ++inst) {
    std::vector<Feature> x;
    std::vector<int> y;
    // Half the instances use a coarse grid so distance ties actually occur.
    const bool coarse = inst % 2 == 0;
    auto coord = [&] { return coarse ? static_cast<double>(grid(rng)) : u(rng); };
    for (int i = 0; i < 30; ++i) {
      x.push_back({coord(), coord(), coord(), coord()});
      y.push_back(label(rng));
    }
    for (int q = 0; q < 100; ++q) {
      const Feature query{coord(), coord(), coord(), coord()};
      ASSERT_EQ(knn_predict(x, y, query, 5), brute_knn(x, y, query, 5)) << "instance " << inst;
    }
  }
}

TEST(Knn, RejectsBadInput) {
  const std::vector<Feature> x{{0, 0, 0, 0}};
  EXPECT_THROW(knn_predict({}, {}, {0, 0, 0, 0}, 1), std::invalid_argument);
  EXPECT_THROW(knn_predict(x, std::vector<int>{0}, {0, 0, 0, 0}, 0), std::invalid_argument);
  EXPECT_THROW(knn_predict(x, std::vector<int>{0, 1}, {0, 0, 0, 0}, 1), std::invalid_argument);
}

TEST(ZScore, UsesTrainingMomentsAndKeepsConstantFeatures) {
  const std::vector<Feature> train{{1, 5, 0, 2}, {3, 5, 0, 4}};
  const auto z = ZScore::fit(train);
  EXPECT_EQ(z.apply({2, 5, 0, 3}), (Feature{0, 0, 0, 0}));
  EXPECT_EQ(z.apply({3, 6, 1, 4}), (Feature{1, 1, 1, 1}));
}

TEST(StratifiedFolds, BalancedPerClass) {
  std::vector<int> labels;
  for (int i = 0; i < 20; ++i) labels.push_back(0);
  for (int i = 0; i < 21; ++i) labels.push_back(1);
  for (int i = 0; i < 21; ++i) labels.push_back(2);
  Rng rng(4);
  const auto fold = stratified_folds(labels, 5, rng);
  for (int c = 0; c < 3; ++c) {
    std::vector<int> per(5, 0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == c) ++per[fold[i]];
    }
    EXPECT_LE(*std::max_element(per.begin(), per.end()) - *std::min_element(per.begin(), per.end()), 1);
  }
  std::vector<int> total(5, 0);
  for (int f : fold) ++total[f];
  EXPECT_LE(*std::max_element(total.begin(), total.end()) - *std::min_element(total.begin(), total.end()), 1);
}

TEST(StratifiedFolds, TooFewSubjects) {
  Rng rng(5);
  const std::vector<int> labels{0, 0, 0, 1, 1, 1, 1, 1};
  EXPECT_THROW(stratified_folds(labels, 5, rng), InsufficientSubjects);
}

TEST(CrossVal, PerfectlySeparated) {
  std::vector<Feature> x;
  std::vector<int> y;
  for (int i = 0; i < 40; ++i) {
    x.push_back({i < 20 ? 0.0 + 0.01 * i : 10.0 + 0.01 * i, 0, 0, 0});
    y.push_back(i < 20 ? 0 : 1);
  }
  EXPECT_EQ(cross_val_accuracy(x, y, EvalConfig{}, 3, 7).mean, 1.0);
}

TEST(CrossVal, ChanceLevelTwoClasses) {
  Rng rng(6);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<Feature> x;
  std::vector<int> y;
  for (int i = 0; i < 10000; ++i) {
    x.push_back({g(rng), g(rng), g(rng), g(rng)});
    y.push_back(i % 2);
  }
  const double acc = cross_val_accuracy(x, y, EvalConfig{}, 1, 8).mean;
  EXPECT_GE(acc, 0.47);
  EXPECT_LE(acc, 0.53);
}

TEST(CrossVal, ChanceLevelThreeClasses) {
  Rng rng(7);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<Feature> x;
  std::vector<int> y;
  for (int i = 0; i < 9000; ++i) {
    x.push_back({g(rng), g(rng), g(rng), g(rng)});
    y.push_back(i % 3);
  }
  EXPECT_NEAR(cross_val_accuracy(x, y, EvalConfig{}, 1, 9).mean, 1.0 / 3.0, 0.03);
}

TEST(CrossVal, DeterministicInSeed) {
  Rng rng(8);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<Feature> x;
  std::vector<int> y;
  for (int i = 0; i < 60; ++i) {
    x.push_back({g(rng) + (i % 2), g(rng), g(rng), g(rng)});
    y.push_back(i % 2);
  }
  const auto a = cross_val_accuracy(x, y, EvalConfig{}, 4, 10);
  const auto b = cross_val_accuracy(x, y, EvalConfig{}, 4, 10);
  EXPECT_EQ(a.mean, b.mean);
  EXPECT_EQ(a.std, b.std);
}

TEST(Auc, OrientationAndTies) {
  const std::vector<double> lo{1, 2, 3};
  const std::vector<double> hi{4, 5, 6, 7};
  EXPECT_EQ(parameter_auc(lo, hi), 1.0);
  EXPECT_EQ(raw_auc(lo, hi), 0.0);
  EXPECT_EQ(raw_auc(hi, lo), 1.0);
  EXPECT_EQ(parameter_auc(lo, lo), 0.5);
  EXPECT_THROW(raw_auc({}, hi), std::invalid_argument);
}

TEST(Auc, MatchesBruteForce) {
  Rng rng(9);
  std::uniform_int_distribution<int> small(0, 5);
  std::uniform_int_distribution<int> size(1, 25);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int inst = 0; inst < 100; ++inst) {
    std::vector<double> a(size(rng)), b(size(rng));
    const bool ties = inst % 2 == 0;
    for (auto& v : a) v = ties ? small(rng) : g(rng);
    for (auto& v : b) v = ties ? small(rng) : g(rng) + 0.5;
    // Both are exact rationals with denominator |a||b|.
    EXPECT_NEAR(raw_auc(a, b), brute_auc(a, b), 1e-12);
    EXPECT_NEAR(parameter_auc(a, b), std::max(brute_auc(a, b), 1.0 - brute_auc(a, b)), 1e-12);
  }
}

TEST(Auc, ChanceLevel) {
  Rng rng(10);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> a(5000), b(5000);
  for (auto& v : a) v = g(rng);
  for (auto& v : b) v = g(rng);
  EXPECT_NEAR(raw_auc(a, b), 0.5, 0.03);
}

TaskEnvironment point_mass_env() {
  TaskEnvironment env;
  env.distributions = {{TissueClass::Active, 0.1, 0.0, 1e-3, 0.0, 2e-2, 0.0},
                       {TissueClass::Chronic, 0.1, 0.0, 1e-3, 0.0, 2e-2, 0.0},
                       {TissueClass::Healthy, 0.1, 0.0, 1e-3, 0.0, 2e-2, 0.0}};
  return env;
}

TEST(TaskObjective, IdenticalClassesWithoutNoiseAreAtChance) {
  // Infinite SNR is approximated by a huge value; class features are identical up to round-off
  // noise, which carries no class information.
  TaskEnvironment env = point_mass_env();
  env.scanner.snr = 1e12;
  const auto acc = evaluate_protocol(AcquisitionProtocol::ad_hoc(), TaskSpec{TaskKind::MultiClass}, env, EvalConfig{},
                                     20, 3);
  EXPECT_NEAR(acc.mean, 1.0 / 3.0, 0.05);
}

TEST(TaskObjective, SeparatedClassesAreDetected) {
  TaskEnvironment env = point_mass_env();
  env.distributions[0].mean_d = 2e-3;
  env.scanner.snr = 200.0;
  const auto acc = evaluate_protocol(AcquisitionProtocol::ad_hoc(), TaskSpec{TaskKind::BinaryActiveChronic}, env,
                                     EvalConfig{}, 5, 4);
  EXPECT_GT(acc.mean, 0.95);
}

TEST(TaskObjective, DeterministicAndSeedSensitive) {
  TaskEnvironment env = point_mass_env();
  env.distributions[0].std_d = 0.2e-3;
  env.distributions[1].mean_d = 0.8e-3;
  const TaskSpec task{TaskKind::BinaryActiveChronic};
  const auto a = task_objective(AcquisitionProtocol::ad_hoc(), task, env, EvalConfig{}, 2, 11);
  const auto b = task_objective(AcquisitionProtocol::ad_hoc(), task, env, EvalConfig{}, 2, 11);
  EXPECT_EQ(a.mean, b.mean);
  EXPECT_EQ(a.std, b.std);
  const auto r1 = evaluate_protocol(AcquisitionProtocol::ad_hoc(), task, env, EvalConfig{}, 5, 11);
  const auto r2 = evaluate_protocol(AcquisitionProtocol::ad_hoc(), task, env, EvalConfig{}, 5, 12);
  EXPECT_NE(r1.mean, r2.mean);
  EXPECT_EQ(r1.n_repeats, 5);
}

TEST(TaskObjective, DatasetContainsOnlyTaskClasses) {
  const auto data = simulate_task_dataset(AcquisitionProtocol::ad_hoc(), TaskSpec{TaskKind::BinaryChronicHealthy},
                                          point_mass_env(), 1);
  EXPECT_EQ(data.size(), 42u);
  for (const auto& s : data.subjects) {
    EXPECT_NE(s.label, TissueClass::Active);
    EXPECT_TRUE(s.fit.has_value());
  }
}

}  // namespace
}  // namespace screener
