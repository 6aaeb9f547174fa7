#include "screener/config.hpp"

#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>

#include <json.hpp>

namespace screener {

using nlohmann::json;

std::string to_string(OptimizerKind k) {
  switch (k) {
    case OptimizerKind::AdHoc: return "adhoc";
    case OptimizerKind::Crlb: return "crlb";
    case OptimizerKind::Screener: return "screener";
    case OptimizerKind::Fixed: return "fixed";
  }
  return "?";
}

OptimizerKind parse_optimizer(const std::string& name) {
  if (name == "adhoc") return OptimizerKind::AdHoc;
  if (name == "crlb") return OptimizerKind::Crlb;
  if (name == "screener") return OptimizerKind::Screener;
  if (name == "fixed") return OptimizerKind::Fixed;
  throw std::invalid_argument("unknown optimizer '" + name + "' (expected adhoc, crlb, screener or fixed)");
}

AucTargets reference_auc_targets() {
  AucTargets t;
  t[0] = {0.51, 0.95, 0.50};
  t[1] = {0.79, 0.96, 0.52};
  t[2] = {0.84, 0.53, 0.50};
  return t;
}

void ExperimentConfig::validate() const {
  scanner.validate();
  cohort.validate();
  eval.validate();
  fit.validate();
  crlb.validate();
  screener.ppo.validate();
  if (screener.total_steps < 0) throw ConfigError("screener.total_steps must be >= 0");
  if (screener.n_repeats_select < 1) throw ConfigError("screener.n_repeats_select must be >= 1");
  for (TissueClass c : task.classes()) find_distribution(distributions, c);
  for (const auto& d : distributions) d.validate();
  for (double s : snr_list) {
    if (!(s > 1.0)) throw ConfigError("snr_list entries must be > 1");
  }
  if (!(validation.snr > 1.0)) throw ConfigError("validation.snr must be > 1");
  if (validation.n_repeats < 1) throw ConfigError("validation.n_repeats must be >= 1");
  if (calibration.n_repeats < 1 || calibration.max_rounds < 0) throw ConfigError("invalid calibration budget");
  if (!(calibration.tolerance > 0.0) || !(calibration.initial_step > 0.0) || !(calibration.min_step > 0.0)) {
    throw ConfigError("calibration tolerance and steps must be positive");
  }
  if (optimizer == OptimizerKind::Fixed && !protocol) throw ConfigError("optimizer 'fixed' needs a protocol");
}

TaskEnvironment ExperimentConfig::environment() const {
  return TaskEnvironment{distributions, cohort, scanner, fit};
}

TaskEnvironment ExperimentConfig::environment(double snr) const {
  TaskEnvironment env = environment();
  env.scanner.snr = snr;
  return env;
}

namespace {

void check_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + ": expected an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& item : obj.items()) {
    if (ok.count(item.key()) == 0) throw ConfigError(where + ": unknown key '" + item.key() + "'");
  }
}

template <class T>
void get(const json& obj, const char* key, T& out) {
  if (auto it = obj.find(key); it != obj.end() && !it->is_null()) out = it->get<T>();
}

AcquisitionProtocol protocol_from_json(const json& j) {
  if (j.is_string()) return parse_protocol(j.get<std::string>());
  const auto b = j.get<std::vector<double>>();
  return AcquisitionProtocol::create(b);
}

std::string protocol_csv(const AcquisitionProtocol& p) { return p.to_string(); }

const char* orientation_name(AucOrientation o) {
  return o == AucOrientation::Oriented ? "oriented" : "direction-free";
}

void parse_scanner(const json& j, ScannerConfig& s) {
  check_keys(j, {"gradient_strength", "gyromagnetic_ratio", "te_overhead", "t2", "snr"}, "scanner");
  get(j, "gradient_strength", s.gradient_strength);
  get(j, "gyromagnetic_ratio", s.gyromagnetic_ratio);
  get(j, "te_overhead", s.te_overhead);
  get(j, "t2", s.t2);
  get(j, "snr", s.snr);
}

void parse_cohort(const json& j, CohortSpec& c) {
  if (!j.is_object()) throw ConfigError("cohort: expected an object of class counts");
  c.counts.clear();
  for (const auto& item : j.items()) c.counts[parse_tissue_class(item.key())] = item.value().get<int>();
}

void parse_eval(const json& j, EvalConfig& e) {
  check_keys(j, {"k_neighbors", "n_folds", "n_repeats_report", "n_repeats_reward"}, "eval");
  get(j, "k_neighbors", e.k_neighbors);
  get(j, "n_folds", e.n_folds);
  get(j, "n_repeats_report", e.n_repeats_report);
  get(j, "n_repeats_reward", e.n_repeats_reward);
}

void parse_fit(const json& j, FitConfig& f) {
  check_keys(j, {"high_b_threshold", "d_min", "d_max", "dstar_max", "dstar_grid_points", "dstar_rel_tol",
                 "relax_threshold"},
             "fit");
  get(j, "high_b_threshold", f.high_b_threshold);
  get(j, "d_min", f.d_min);
  get(j, "d_max", f.d_max);
  get(j, "dstar_max", f.dstar_max);
  get(j, "dstar_grid_points", f.dstar_grid_points);
  get(j, "dstar_rel_tol", f.dstar_rel_tol);
  get(j, "relax_threshold", f.relax_threshold);
}

const std::array<const char*, 4> kParamNames{"s0", "f", "d", "dstar"};

void parse_crlb(const json& j, CrlbConfig& c) {
  check_keys(j, {"n_tissue_samples", "scored", "iterations", "initial_temperature", "step_width",
                 "merge_probability", "ridge_epsilon", "penalty"},
             "crlb");
  get(j, "n_tissue_samples", c.n_tissue_samples);
  if (auto it = j.find("scored"); it != j.end()) {
    c.scored = {false, false, false, false};
    for (const auto& name : it->get<std::vector<std::string>>()) {
      bool found = false;
      for (std::size_t i = 0; i < kParamNames.size(); ++i) {
        if (name == kParamNames[i]) {
          c.scored[i] = true;
          found = true;
        }
      }
      if (!found) throw ConfigError("crlb.scored: unknown parameter '" + name + "'");
    }
  }
  get(j, "iterations", c.anneal.iterations);
  get(j, "initial_temperature", c.anneal.initial_temperature);
  get(j, "step_width", c.anneal.step_width);
  get(j, "merge_probability", c.anneal.merge_probability);
  get(j, "ridge_epsilon", c.ridge_epsilon);
  get(j, "penalty", c.penalty);
}

void parse_screener(const json& j, ScreenerSettings& s) {
  check_keys(j, {"total_steps", "n_repeats_select", "hidden", "learning_rate", "n_steps", "batch_size", "n_epochs",
                 "gamma", "gae_lambda", "clip_range", "ent_coef", "vf_coef", "max_grad_norm", "adam_epsilon",
                 "normalize_advantage"},
             "screener");
  get(j, "total_steps", s.total_steps);
  get(j, "n_repeats_select", s.n_repeats_select);
  auto& p = s.ppo;
  get(j, "hidden", p.hidden);
  get(j, "learning_rate", p.learning_rate);
  get(j, "n_steps", p.n_steps);
  get(j, "batch_size", p.batch_size);
  get(j, "n_epochs", p.n_epochs);
  get(j, "gamma", p.gamma);
  get(j, "gae_lambda", p.gae_lambda);
  get(j, "clip_range", p.clip_range);
  get(j, "ent_coef", p.ent_coef);
  get(j, "vf_coef", p.vf_coef);
  get(j, "max_grad_norm", p.max_grad_norm);
  get(j, "adam_epsilon", p.adam_epsilon);
  get(j, "normalize_advantage", p.normalize_advantage);
}

void parse_validation(const json& j, ValidationConfig& v) {
  check_keys(j, {"snr", "n_repeats", "auc_orientation"}, "validation");
  get(j, "snr", v.snr);
  get(j, "n_repeats", v.n_repeats);
  if (auto it = j.find("auc_orientation"); it != j.end()) {
    const auto s = it->get<std::string>();
    if (s == "oriented") {
      v.orientation = AucOrientation::Oriented;
    } else if (s == "direction-free") {
      v.orientation = AucOrientation::DirectionFree;
    } else {
      throw ConfigError("validation.auc_orientation must be 'oriented' or 'direction-free'");
    }
  }
}

void parse_calibration(const json& j, CalibrationConfig& c) {
  check_keys(j, {"targets", "n_repeats", "tolerance", "max_rounds", "initial_step", "min_step", "fit_dstar"},
             "calibration");
  if (auto it = j.find("targets"); it != j.end()) {
    if (!it->is_array() || it->size() != 3) throw ConfigError("calibration.targets: expected 3 rows");
    for (std::size_t r = 0; r < 3; ++r) {
      const json& row = (*it)[r];
      if (!row.is_array() || row.size() != 3) throw ConfigError("calibration.targets: expected 3 columns");
      for (std::size_t k = 0; k < 3; ++k) {
        c.targets[r][k] = row[k].is_null() ? std::nullopt : std::optional<double>(row[k].get<double>());
      }
    }
  }
  get(j, "n_repeats", c.n_repeats);
  get(j, "tolerance", c.tolerance);
  get(j, "max_rounds", c.max_rounds);
  get(j, "initial_step", c.initial_step);
  get(j, "min_step", c.min_step);
  get(j, "fit_dstar", c.fit_dstar);
}

json to_json_impl(const ExperimentConfig& c, bool include_seed) {
  json j;
  j["schema_version"] = 1;
  if (include_seed) j["seed"] = c.seed;
  j["distributions"] = json::parse(distributions_to_json(c.distributions));
  j["scanner"] = {{"gradient_strength", c.scanner.gradient_strength},
                  {"gyromagnetic_ratio", c.scanner.gyromagnetic_ratio},
                  {"te_overhead", c.scanner.te_overhead},
                  {"t2", c.scanner.t2},
                  {"snr", c.scanner.snr}};
  json cohort = json::object();
  for (const auto& [cls, n] : c.cohort.counts) cohort[std::string(to_string(cls))] = n;
  j["cohort"] = cohort;
  j["task"] = c.task.name();
  j["eval"] = {{"k_neighbors", c.eval.k_neighbors},
               {"n_folds", c.eval.n_folds},
               {"n_repeats_report", c.eval.n_repeats_report},
               {"n_repeats_reward", c.eval.n_repeats_reward}};
  j["fit"] = {{"high_b_threshold", c.fit.high_b_threshold},   {"d_min", c.fit.d_min},
              {"d_max", c.fit.d_max},                         {"dstar_max", c.fit.dstar_max},
              {"dstar_grid_points", c.fit.dstar_grid_points}, {"dstar_rel_tol", c.fit.dstar_rel_tol},
              {"relax_threshold", c.fit.relax_threshold}};
  std::vector<std::string> scored;
  for (std::size_t i = 0; i < kParamNames.size(); ++i) {
    if (c.crlb.scored[i]) scored.emplace_back(kParamNames[i]);
  }
  j["crlb"] = {{"n_tissue_samples", c.crlb.n_tissue_samples},
               {"scored", scored},
               {"iterations", c.crlb.anneal.iterations},
               {"initial_temperature", c.crlb.anneal.initial_temperature},
               {"step_width", c.crlb.anneal.step_width},
               {"merge_probability", c.crlb.anneal.merge_probability},
               {"ridge_epsilon", c.crlb.ridge_epsilon},
               {"penalty", c.crlb.penalty}};
  const auto& p = c.screener.ppo;
  j["screener"] = {{"total_steps", c.screener.total_steps},
                   {"n_repeats_select", c.screener.n_repeats_select},
                   {"hidden", p.hidden},
                   {"learning_rate", p.learning_rate},
                   {"n_steps", p.n_steps},
                   {"batch_size", p.batch_size},
                   {"n_epochs", p.n_epochs},
                   {"gamma", p.gamma},
                   {"gae_lambda", p.gae_lambda},
                   {"clip_range", p.clip_range},
                   {"ent_coef", p.ent_coef},
                   {"vf_coef", p.vf_coef},
                   {"max_grad_norm", p.max_grad_norm},
                   {"adam_epsilon", p.adam_epsilon},
                   {"normalize_advantage", p.normalize_advantage}};
  j["optimizer"] = to_string(c.optimizer);
  j["protocol"] = c.protocol ? json(protocol_csv(*c.protocol)) : json(nullptr);
  j["snr_list"] = c.snr_list;
  j["validation"] = {{"snr", c.validation.snr},
                     {"n_repeats", c.validation.n_repeats},
                     {"auc_orientation", orientation_name(c.validation.orientation)}};
  json targets = json::array();
  for (const auto& row : c.calibration.targets) {
    json r = json::array();
    for (const auto& cell : row) r.push_back(cell ? json(*cell) : json(nullptr));
    targets.push_back(r);
  }
  j["calibration"] = {{"targets", targets},
                      {"n_repeats", c.calibration.n_repeats},
                      {"tolerance", c.calibration.tolerance},
                      {"max_rounds", c.calibration.max_rounds},
                      {"initial_step", c.calibration.initial_step},
                      {"min_step", c.calibration.min_step},
                      {"fit_dstar", c.calibration.fit_dstar}};
  json sweep = json::object();
  for (const auto& [name, proto] : c.sweep_protocols) sweep[name] = protocol_csv(proto);
  j["sweep_protocols"] = sweep;
  return j;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
  ExperimentConfig c;
  try {
    const json j = json::parse(text);
    check_keys(j, {"schema_version", "seed", "output_dir", "distributions", "scanner", "cohort", "task", "eval",
                   "fit", "crlb", "screener", "optimizer", "protocol", "snr_list", "validation", "calibration",
                   "sweep_protocols", "comment"},
               "config");
    if (j.value("schema_version", 1) != 1) throw ConfigError("unsupported config schema_version");
    get(j, "seed", c.seed);
    if (auto it = j.find("output_dir"); it != j.end()) {
      std::filesystem::path out = it->get<std::string>();
      c.output_dir = out.is_relative() ? base_dir / out : out;
    }
    const auto dist = j.find("distributions");
    if (dist == j.end()) throw ConfigError("config: 'distributions' is required");
    if (dist->is_string()) {
      std::filesystem::path p = dist->get<std::string>();
      c.distributions_path = p.is_relative() ? base_dir / p : p;
      if (!std::filesystem::exists(c.distributions_path)) {
        throw ConfigError("distribution file not found: " + c.distributions_path.string());
      }
      c.distributions = load_distributions(c.distributions_path);
    } else {
      c.distributions = distributions_from_json(dist->dump());
    }
    if (auto it = j.find("scanner"); it != j.end()) parse_scanner(*it, c.scanner);
    if (auto it = j.find("cohort"); it != j.end()) parse_cohort(*it, c.cohort);
    if (auto it = j.find("task"); it != j.end()) c.task = parse_task(it->get<std::string>());
    if (auto it = j.find("eval"); it != j.end()) parse_eval(*it, c.eval);
    if (auto it = j.find("fit"); it != j.end()) parse_fit(*it, c.fit);
    if (auto it = j.find("crlb"); it != j.end()) parse_crlb(*it, c.crlb);
    if (auto it = j.find("screener"); it != j.end()) parse_screener(*it, c.screener);
    if (auto it = j.find("optimizer"); it != j.end()) c.optimizer = parse_optimizer(it->get<std::string>());
    if (auto it = j.find("protocol"); it != j.end() && !it->is_null()) c.protocol = protocol_from_json(*it);
    get(j, "snr_list", c.snr_list);
    if (auto it = j.find("validation"); it != j.end()) parse_validation(*it, c.validation);
    if (auto it = j.find("calibration"); it != j.end()) parse_calibration(*it, c.calibration);
    if (auto it = j.find("sweep_protocols"); it != j.end()) {
      if (!it->is_object()) throw ConfigError("sweep_protocols: expected an object");
      for (const auto& item : it->items()) c.sweep_protocols.emplace(item.key(), protocol_from_json(item.value()));
    }
    c.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("invalid configuration: ") + e.what());
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.parent_path());
}

std::string canonical_config_json(const ExperimentConfig& config) { return to_json_impl(config, true).dump(2); }

std::uint64_t fnv1a64(const std::string& data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : data) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string config_hash(const ExperimentConfig& config) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(to_json_impl(config, false).dump())));
  return buf;
}

}  // namespace screener
