#include "screener/task_eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace screener {

std::vector<TissueClass> TaskSpec::classes() const {
  switch (kind) {
    case TaskKind::BinaryActiveChronic: return {TissueClass::Active, TissueClass::Chronic};
    case TaskKind::BinaryActiveHealthy: return {TissueClass::Active, TissueClass::Healthy};
    case TaskKind::BinaryChronicHealthy: return {TissueClass::Chronic, TissueClass::Healthy};
    case TaskKind::MultiClass: return {TissueClass::Active, TissueClass::Chronic, TissueClass::Healthy};
  }
  return {};
}

std::string TaskSpec::name() const {
  switch (kind) {
    case TaskKind::BinaryActiveChronic: return "active-chronic";
    case TaskKind::BinaryActiveHealthy: return "active-healthy";
    case TaskKind::BinaryChronicHealthy: return "chronic-healthy";
    case TaskKind::MultiClass: return "multiclass";
  }
  return "unknown";
}

TaskSpec parse_task(std::string_view name) {
  for (TaskKind k : {TaskKind::BinaryActiveChronic, TaskKind::BinaryActiveHealthy,
                     TaskKind::BinaryChronicHealthy, TaskKind::MultiClass}) {
    if (TaskSpec{k}.name() == name) return TaskSpec{k};
  }
  throw std::invalid_argument("unknown task '" + std::string(name) +
                              "' (expected active-chronic|active-healthy|chronic-healthy|multiclass)");
}

void EvalConfig::validate() const {
  if (k_neighbors < 1) throw std::invalid_argument("EvalConfig: k_neighbors < 1");
  if (n_folds < 2) throw std::invalid_argument("EvalConfig: n_folds < 2");
  if (n_repeats_report < 1 || n_repeats_reward < 1) throw std::invalid_argument("EvalConfig: repeats < 1");
}

Feature to_feature(const FitResult& fit) { return {fit.s0_est, fit.f_est, fit.d_est, fit.dstar_est}; }

int knn_predict(std::span<const Feature> train_features, std::span<const int> train_labels,
                const Feature& query, int k) {
  if (train_features.empty()) throw std::invalid_argument("knn_predict: empty training set");
  if (train_features.size() != train_labels.size()) throw std::invalid_argument("knn_predict: size mismatch");
  if (k < 1) throw std::invalid_argument("knn_predict: k < 1");

  const std::size_t n = train_features.size();
  std::vector<std::pair<double, std::size_t>> dist(n);
  for (std::size_t i = 0; i < n; ++i) {
    double d2 = 0.0;
    for (std::size_t j = 0; j < kNumFeatures; ++j) {
      const double diff = train_features[i][j] - query[j];
      d2 += diff * diff;
    }
    dist[i] = {d2, i};
  }
  const std::size_t kk = std::min<std::size_t>(static_cast<std::size_t>(k), n);
  std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(kk), dist.end());

  std::map<int, int> votes;
  int top = 0;
  for (std::size_t i = 0; i < kk; ++i) top = std::max(top, ++votes[train_labels[dist[i].second]]);
  for (std::size_t i = 0; i < kk; ++i) {
    const int label = train_labels[dist[i].second];
    if (votes[label] == top) return label;
  }
  return train_labels[dist[0].second];
}

ZScore ZScore::fit(std::span<const Feature> train) {
  ZScore z;
  const double n = static_cast<double>(train.size());
  for (std::size_t j = 0; j < kNumFeatures; ++j) {
    double m = 0.0;
    for (const auto& x : train) m += x[j];
    m /= n;
    double v = 0.0;
    for (const auto& x : train) v += (x[j] - m) * (x[j] - m);
    v /= n;
    z.mean[j] = m;
    z.scale[j] = v > 0.0 ? std::sqrt(v) : 1.0;
  }
  return z;
}

Feature ZScore::apply(const Feature& x) const {
  Feature out{};
  for (std::size_t j = 0; j < kNumFeatures; ++j) out[j] = (x[j] - mean[j]) / scale[j];
  return out;
}

std::vector<int> stratified_folds(std::span<const int> labels, int n_folds, Rng& rng) {
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  for (const auto& [label, idx] : by_class) {
    if (static_cast<int>(idx.size()) < n_folds) {
      throw InsufficientSubjects("class " + std::to_string(label) + " has " + std::to_string(idx.size()) +
                                 " subjects, fewer than " + std::to_string(n_folds) + " folds");
    }
  }
  std::vector<int> fold(labels.size(), 0);
  int counter = 0;
  for (auto& [label, idx] : by_class) {
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t i : idx) fold[i] = counter++ % n_folds;
  }
  return fold;
}

namespace {

struct FoldStats {
  double mean;
  double std;
};

FoldStats one_cv_pass(std::span<const Feature> features, std::span<const int> labels, const EvalConfig& config,
                      Rng& rng) {
  const auto fold = stratified_folds(labels, config.n_folds, rng);
  std::vector<double> acc;
  acc.reserve(static_cast<std::size_t>(config.n_folds));
  std::vector<Feature> train;
  std::vector<int> train_labels;
  for (int f = 0; f < config.n_folds; ++f) {
    train.clear();
    train_labels.clear();
    for (std::size_t i = 0; i < features.size(); ++i) {
      if (fold[i] != f) {
        train.push_back(features[i]);
        train_labels.push_back(labels[i]);
      }
    }
    const ZScore z = ZScore::fit(train);
    for (auto& x : train) x = z.apply(x);

    int correct = 0;
    int total = 0;
    for (std::size_t i = 0; i < features.size(); ++i) {
      if (fold[i] != f) continue;
      ++total;
      if (knn_predict(train, train_labels, z.apply(features[i]), config.k_neighbors) == labels[i]) ++correct;
    }
    acc.push_back(static_cast<double>(correct) / total);
  }
  const double mean = std::accumulate(acc.begin(), acc.end(), 0.0) / static_cast<double>(acc.size());
  double var = 0.0;
  for (double a : acc) var += (a - mean) * (a - mean);
  return {mean, std::sqrt(var / static_cast<double>(acc.size()))};
}

Accuracy summarize(const std::vector<double>& values) {
  Accuracy out;
  out.n_repeats = static_cast<int>(values.size());
  out.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - out.mean) * (v - out.mean);
  out.std = std::sqrt(var / static_cast<double>(values.size()));
  return out;
}

std::vector<int> label_ids(const Dataset& data) {
  std::vector<int> labels;
  labels.reserve(data.size());
  for (const auto& s : data.subjects) labels.push_back(static_cast<int>(s.label));
  return labels;
}

std::vector<Feature> feature_rows(const Dataset& data) {
  std::vector<Feature> x;
  x.reserve(data.size());
  for (const auto& s : data.subjects) x.push_back(to_feature(s.fit.value()));
  return x;
}

}  // namespace

Accuracy cross_val_accuracy(std::span<const Feature> features, std::span<const int> labels,
                            const EvalConfig& config, int n_repeats, std::uint64_t seed) {
  config.validate();
  if (features.size() != labels.size()) throw std::invalid_argument("cross_val_accuracy: size mismatch");
  if (n_repeats < 1) throw std::invalid_argument("cross_val_accuracy: n_repeats < 1");
  double mean = 0.0;
  double sd = 0.0;
  for (int r = 0; r < n_repeats; ++r) {
    Rng rng = make_rng(seed, static_cast<std::uint64_t>(r));
    const FoldStats s = one_cv_pass(features, labels, config, rng);
    mean += s.mean;
    sd += s.std;
  }
  return {mean / n_repeats, sd / n_repeats, n_repeats};
}

double raw_auc(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("auc: empty sample");
  std::vector<std::pair<double, int>> all;
  all.reserve(a.size() + b.size());
  for (double v : a) all.emplace_back(v, 0);
  for (double v : b) all.emplace_back(v, 1);
  std::sort(all.begin(), all.end(), [](const auto& x, const auto& y) { return x.first < y.first; });

  // Midranks over tie groups, 1-based.
  double rank_sum_a = 0.0;
  std::size_t i = 0;
  while (i < all.size()) {
    std::size_t j = i;
    while (j < all.size() && all[j].first == all[i].first) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t t = i; t < j; ++t) {
      if (all[t].second == 0) rank_sum_a += midrank;
    }
    i = j;
  }
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const double u_a = rank_sum_a - na * (na + 1.0) / 2.0;
  return u_a / (na * nb);
}

double parameter_auc(std::span<const double> values_a, std::span<const double> values_b) {
  const double auc = raw_auc(values_a, values_b);
  return std::max(auc, 1.0 - auc);
}

Dataset simulate_task_dataset(const AcquisitionProtocol& protocol, const TaskSpec& task,
                              const TaskEnvironment& env, std::uint64_t seed) {
  const auto classes = task.classes();
  const CohortSpec spec = env.cohort.restricted_to(classes);
  Rng cohort_rng = make_rng(seed, 0);
  const Cohort cohort = sample_cohort(env.distributions, spec, cohort_rng);
  Dataset data = simulate_dataset(cohort, protocol, env.scanner, derive_seed(seed, 1));
  fit_dataset(data, env.fit);
  return data;
}

Accuracy task_objective(const AcquisitionProtocol& protocol, const TaskSpec& task,
                        const TaskEnvironment& env, const EvalConfig& eval, int n_cv_repeats,
                        std::uint64_t seed) {
  const Dataset data = simulate_task_dataset(protocol, task, env, seed);
  const auto x = feature_rows(data);
  const auto y = label_ids(data);
  return cross_val_accuracy(x, y, eval, n_cv_repeats, derive_seed(seed, 2));
}

Accuracy evaluate_protocol(const AcquisitionProtocol& protocol, const TaskSpec& task,
                           const TaskEnvironment& env, const EvalConfig& eval, int n_repeats,
                           std::uint64_t seed) {
  if (n_repeats < 1) throw std::invalid_argument("evaluate_protocol: n_repeats < 1");
  std::vector<double> acc;
  acc.reserve(static_cast<std::size_t>(n_repeats));
  for (int r = 0; r < n_repeats; ++r) {
    acc.push_back(task_objective(protocol, task, env, eval, 1, derive_seed(seed, static_cast<std::uint64_t>(r))).mean);
  }
  return summarize(acc);
}

}  // namespace screener
