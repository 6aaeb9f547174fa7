#include "screener/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include <json.hpp>

namespace screener::rl {

void PpoConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("PpoConfig: ") + what);
  };
  require(hidden >= 1, "hidden < 1");
  require(learning_rate > 0.0, "learning_rate <= 0");
  require(n_steps >= 1, "n_steps < 1");
  require(batch_size >= 1, "batch_size < 1");
  require(n_epochs >= 1, "n_epochs < 1");
  require(gamma >= 0.0 && gamma <= 1.0, "gamma outside [0, 1]");
  require(gae_lambda >= 0.0 && gae_lambda <= 1.0, "gae_lambda outside [0, 1]");
  require(clip_range > 0.0, "clip_range <= 0");
  require(ent_coef >= 0.0 && vf_coef >= 0.0, "negative loss coefficient");
  require(max_grad_norm > 0.0, "max_grad_norm <= 0");
}

ActorCritic ActorCritic::create(int observation_size, int action_count, const PpoConfig& config, Rng& rng) {
  ActorCritic ac;
  ac.actor = Mlp(observation_size, config.hidden, action_count);
  ac.critic = Mlp(observation_size, config.hidden, 1);
  ac.actor.init_orthogonal(std::sqrt(2.0), 0.01, rng);
  ac.critic.init_orthogonal(std::sqrt(2.0), 1.0, rng);
  for (Adam* opt : {&ac.actor_opt, &ac.critic_opt}) {
    opt->learning_rate = config.learning_rate;
    opt->epsilon = config.adam_epsilon;
  }
  return ac;
}

bool ActorCritic::finite() const { return actor.parameters().allFinite() && critic.parameters().allFinite(); }

namespace {

void log_softmax(const Eigen::VectorXd& logits, Eigen::VectorXd& log_p) {
  const double m = logits.maxCoeff();
  const double lse = m + std::log((logits.array() - m).exp().sum());
  log_p = logits.array() - lse;
}

}  // namespace

PolicyOutput policy_forward(const ActorCritic& agent, const Eigen::VectorXd& observation) {
  PolicyOutput out;
  const Eigen::VectorXd logits = agent.actor.forward(observation).col(0);
  log_softmax(logits, out.log_probabilities);
  out.probabilities = out.log_probabilities.array().exp();
  out.value = agent.critic.forward(observation)(0, 0);
  return out;
}

int greedy_action(const PolicyOutput& out) {
  Eigen::Index best = 0;
  out.probabilities.maxCoeff(&best);
  return static_cast<int>(best);
}

int sample_action(const Eigen::VectorXd& probabilities, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double u = unit(rng) * probabilities.sum();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < probabilities.size(); ++i) {
    acc += probabilities[i];
    if (u < acc) return static_cast<int>(i);
  }
  // Rounding left u beyond the last partial sum: take the last action with mass.
  for (Eigen::Index i = probabilities.size() - 1; i > 0; --i) {
    if (probabilities[i] > 0.0) return static_cast<int>(i);
  }
  return 0;
}

void compute_gae(RolloutBuffer& buffer, double gamma, double lambda) {
  const std::size_t n = buffer.steps.size();
  buffer.advantages.assign(n, 0.0);
  buffer.returns.assign(n, 0.0);
  double last_gae = 0.0;
  for (std::size_t k = n; k-- > 0;) {
    const Transition& s = buffer.steps[k];
    const double next_value = k + 1 < n ? buffer.steps[k + 1].value : buffer.last_value;
    const double not_done = s.done ? 0.0 : 1.0;
    const double delta = s.reward + gamma * next_value * not_done - s.value;
    last_gae = delta + gamma * lambda * not_done * last_gae;
    buffer.advantages[k] = last_gae;
    buffer.returns[k] = last_gae + s.value;
  }
}

LossTerms ppo_loss(const ActorCritic& agent, const Minibatch& batch, const PpoConfig& config,
                   Eigen::VectorXd* actor_grad, Eigen::VectorXd* critic_grad) {
  const Eigen::Index n = batch.observations.cols();
  const double inv_n = 1.0 / static_cast<double>(n);
  Mlp::Cache actor_cache;
  Mlp::Cache critic_cache;
  const Eigen::MatrixXd logits = agent.actor.forward(batch.observations, &actor_cache);
  const Eigen::MatrixXd values = agent.critic.forward(batch.observations, &critic_cache);

  LossTerms t;
  Eigen::MatrixXd d_logits(logits.rows(), n);
  Eigen::MatrixXd d_values(1, n);
  Eigen::VectorXd log_p;
  const double lo = 1.0 - config.clip_range;
  const double hi = 1.0 + config.clip_range;

  for (Eigen::Index i = 0; i < n; ++i) {
    log_softmax(logits.col(i), log_p);
    const Eigen::VectorXd p = log_p.array().exp();
    const int a = batch.actions[static_cast<std::size_t>(i)];
    const double log_ratio = log_p[a] - batch.old_log_probs[i];
    const double ratio = std::exp(log_ratio);
    const double adv = batch.advantages[i];

    const double unclipped = ratio * adv;
    const double clipped = std::clamp(ratio, lo, hi) * adv;
    // d(surrogate)/d(log pi(a)); zero when the clipped branch is the active minimum.
    const double d_surr = unclipped <= clipped ? adv * ratio : 0.0;
    t.policy_loss -= std::min(unclipped, clipped) * inv_n;
    if (std::abs(ratio - 1.0) > config.clip_range) t.clip_fraction += inv_n;
    t.approx_kl += ((ratio - 1.0) - log_ratio) * inv_n;

    const double entropy = -(p.array() * log_p.array()).sum();
    t.entropy += entropy * inv_n;

    // policy term: -d_surr * (onehot(a) - p); entropy term: -ent_coef * dH/dz, dH/dz = -p (log p + H)
    Eigen::VectorXd g = d_surr * p;
    g[a] -= d_surr;
    g.array() += config.ent_coef * p.array() * (log_p.array() + entropy);
    d_logits.col(i) = g * inv_n;

    const double v = values(0, i);
    const double err = v - batch.returns[i];
    t.value_loss += err * err * inv_n;
    d_values(0, i) = config.vf_coef * 2.0 * err * inv_n;
  }
  t.total = t.policy_loss - config.ent_coef * t.entropy + config.vf_coef * t.value_loss;

  if (actor_grad != nullptr) {
    actor_grad->setZero(agent.actor.parameter_count());
    agent.actor.backward(actor_cache, d_logits, *actor_grad);
  }
  if (critic_grad != nullptr) {
    critic_grad->setZero(agent.critic.parameter_count());
    agent.critic.backward(critic_cache, d_values, *critic_grad);
  }
  return t;
}

UpdateStats ppo_update(ActorCritic& agent, RolloutBuffer& buffer, const PpoConfig& config, Rng& rng) {
  if (buffer.steps.empty()) throw std::invalid_argument("ppo_update: empty rollout");
  compute_gae(buffer, config.gamma, config.gae_lambda);

  const std::size_t n = buffer.steps.size();
  const int obs_size = static_cast<int>(buffer.steps.front().observation.size());
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  UpdateStats stats;
  Eigen::VectorXd actor_grad;
  Eigen::VectorXd critic_grad;
  Minibatch mb;
  for (int epoch = 0; epoch < config.n_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(n, start + static_cast<std::size_t>(config.batch_size));
      const auto m = static_cast<Eigen::Index>(end - start);
      mb.observations.resize(obs_size, m);
      mb.actions.resize(static_cast<std::size_t>(m));
      mb.old_log_probs.resize(m);
      mb.advantages.resize(m);
      mb.returns.resize(m);
      for (Eigen::Index j = 0; j < m; ++j) {
        const std::size_t k = order[start + static_cast<std::size_t>(j)];
        const Transition& s = buffer.steps[k];
        mb.observations.col(j) = s.observation;
        mb.actions[static_cast<std::size_t>(j)] = s.action;
        mb.old_log_probs[j] = s.log_prob;
        mb.advantages[j] = buffer.advantages[k];
        mb.returns[j] = buffer.returns[k];
      }
      if (config.normalize_advantage && m > 1) {
        const double mean = mb.advantages.mean();
        const double sd = std::sqrt((mb.advantages.array() - mean).square().sum() / static_cast<double>(m - 1));
        mb.advantages = (mb.advantages.array() - mean) / (sd + 1e-8);
      }

      const LossTerms t = ppo_loss(agent, mb, config, &actor_grad, &critic_grad);
      if (!std::isfinite(t.total) || !actor_grad.allFinite() || !critic_grad.allFinite()) {
        std::ostringstream os;
        os << "non-finite PPO loss at epoch " << epoch << ", minibatch " << start / config.batch_size
           << ": policy=" << t.policy_loss << " value=" << t.value_loss << " entropy=" << t.entropy;
        throw PpoDivergence(os.str());
      }

      const double norm = std::sqrt(actor_grad.squaredNorm() + critic_grad.squaredNorm());
      const double clip = config.max_grad_norm / (norm + 1e-6);
      if (clip < 1.0) {
        actor_grad *= clip;
        critic_grad *= clip;
      }
      agent.actor_opt.step(agent.actor.parameters(), actor_grad);
      agent.critic_opt.step(agent.critic.parameters(), critic_grad);

      stats.policy_loss += t.policy_loss;
      stats.value_loss += t.value_loss;
      stats.approx_kl += t.approx_kl;
      stats.clip_fraction += t.clip_fraction;
      ++stats.gradient_steps;
    }
  }
  if (!agent.finite()) throw PpoDivergence("non-finite weights after PPO update");
  const double k = stats.gradient_steps;
  stats.policy_loss /= k;
  stats.value_loss /= k;
  stats.approx_kl /= k;
  stats.clip_fraction /= k;
  return stats;
}

void ppo_train(ActorCritic& agent, Environment& env, const PpoConfig& config, long long total_steps, Rng& rng,
               const TrainHooks& hooks) {
  config.validate();
  if (total_steps <= 0) return;
  Eigen::VectorXd obs = env.reset();
  double episode_return = 0.0;
  long long steps = 0;
  RolloutBuffer buffer;
  while (steps < total_steps) {
    const long long n = std::min<long long>(config.n_steps, total_steps - steps);
    buffer.steps.clear();
    double finished_sum = 0.0;
    int finished = 0;
    for (long long t = 0; t < n; ++t) {
      const PolicyOutput out = policy_forward(agent, obs);
      const int action = sample_action(out.probabilities, rng);
      StepResult r = env.step(action);
      buffer.steps.push_back({obs, action, out.log_probabilities[action], r.reward, out.value, r.done});
      episode_return += r.reward;
      ++steps;
      if (r.done) {
        if (hooks.on_episode_end) hooks.on_episode_end(env, episode_return);
        finished_sum += episode_return;
        ++finished;
        episode_return = 0.0;
        obs = env.reset();
      } else {
        obs = std::move(r.observation);
      }
    }
    buffer.last_value = policy_forward(agent, obs).value;
    const UpdateStats stats = ppo_update(agent, buffer, config, rng);
    if (hooks.on_update) {
      hooks.on_update(steps, stats,
                      finished > 0 ? finished_sum / finished : std::numeric_limits<double>::quiet_NaN());
    }
  }
}

namespace {

using nlohmann::json;

json vec_to_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd vec_from_json(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json mlp_to_json(const Mlp& m, const Adam& opt) {
  return {{"inputs", m.inputs()},
          {"hidden", m.hidden()},
          {"outputs", m.outputs()},
          {"params", vec_to_json(m.parameters())},
          {"adam", {{"t", opt.t}, {"m", vec_to_json(opt.m)}, {"v", vec_to_json(opt.v)}}}};
}

void mlp_from_json(const json& j, Mlp& m, Adam& opt) {
  m = Mlp(j.at("inputs").get<int>(), j.at("hidden").get<int>(), j.at("outputs").get<int>());
  m.parameters() = vec_from_json(j.at("params"));
  if (m.parameters().size() != m.parameter_count()) throw std::runtime_error("checkpoint: parameter size mismatch");
  opt.t = j.at("adam").at("t").get<long long>();
  opt.m = vec_from_json(j.at("adam").at("m"));
  opt.v = vec_from_json(j.at("adam").at("v"));
}

}  // namespace

void save_checkpoint(const ActorCritic& agent, const PpoConfig& config, const CheckpointMeta& meta,
                     const std::filesystem::path& path) {
  json j;
  j["format"] = "screener-ppo-checkpoint";
  j["version"] = 1;
  j["config"] = {{"hidden", config.hidden},         {"learning_rate", config.learning_rate},
                 {"n_steps", config.n_steps},       {"batch_size", config.batch_size},
                 {"n_epochs", config.n_epochs},     {"gamma", config.gamma},
                 {"gae_lambda", config.gae_lambda}, {"clip_range", config.clip_range},
                 {"ent_coef", config.ent_coef},     {"vf_coef", config.vf_coef},
                 {"max_grad_norm", config.max_grad_norm}, {"adam_epsilon", config.adam_epsilon},
                 {"normalize_advantage", config.normalize_advantage}};
  j["steps"] = meta.steps;
  j["rng_state"] = meta.rng_state;
  j["config_hash"] = meta.config_hash;
  j["seed"] = meta.seed;
  j["actor"] = mlp_to_json(agent.actor, agent.actor_opt);
  j["critic"] = mlp_to_json(agent.critic, agent.critic_opt);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out << j.dump() << '\n';
}

ActorCritic load_checkpoint(const std::filesystem::path& path, PpoConfig* config, CheckpointMeta* meta) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  const json j = json::parse(in);
  if (j.value("format", "") != "screener-ppo-checkpoint" || j.value("version", 0) != 1) {
    throw std::runtime_error("unsupported checkpoint format in " + path.string());
  }
  ActorCritic agent;
  mlp_from_json(j.at("actor"), agent.actor, agent.actor_opt);
  mlp_from_json(j.at("critic"), agent.critic, agent.critic_opt);
  PpoConfig c;
  const json& jc = j.at("config");
  c.hidden = jc.at("hidden");
  c.learning_rate = jc.at("learning_rate");
  c.n_steps = jc.at("n_steps");
  c.batch_size = jc.at("batch_size");
  c.n_epochs = jc.at("n_epochs");
  c.gamma = jc.at("gamma");
  c.gae_lambda = jc.at("gae_lambda");
  c.clip_range = jc.at("clip_range");
  c.ent_coef = jc.at("ent_coef");
  c.vf_coef = jc.at("vf_coef");
  c.max_grad_norm = jc.at("max_grad_norm");
  c.adam_epsilon = jc.at("adam_epsilon");
  c.normalize_advantage = jc.at("normalize_advantage");
  for (Adam* opt : {&agent.actor_opt, &agent.critic_opt}) {
    opt->learning_rate = c.learning_rate;
    opt->epsilon = c.adam_epsilon;
  }
  if (config != nullptr) *config = c;
  if (meta != nullptr) {
    meta->steps = j.at("steps");
    meta->rng_state = j.at("rng_state");
    meta->config_hash = j.at("config_hash");
    meta->seed = j.at("seed");
  }
  return agent;
}

}  // namespace screener::rl
