#include "screener/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

namespace screener::harness {

using nlohmann::json;

namespace {

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::pair<double, double> mean_std(const std::vector<double>& v) {
  if (v.empty()) return {0.0, 0.0};
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return {m, std::sqrt(s / static_cast<double>(v.size()))};
}

double feature_value(const FitResult& fit, int param) {
  switch (param) {
    case 0: return fit.f_est;
    case 1: return fit.d_est;
    default: return fit.dstar_est;
  }
}

AcquisitionProtocol configured_protocol(const ExperimentConfig& config) {
  return config.protocol.value_or(AcquisitionProtocol::ad_hoc());
}

std::string header_comment(const std::string& hash, std::uint64_t seed) {
  return "# config_hash=" + hash + " seed=" + std::to_string(seed) + "\n";
}

}  // namespace

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

AucMatrix parameter_auc_matrix(const AcquisitionProtocol& protocol, const TaskEnvironment& env,
                               AucOrientation orientation, int n_repeats, std::uint64_t seed) {
  AucMatrix out{};
  for (std::size_t t = 0; t < kBinaryTasks.size(); ++t) {
    const TaskSpec task{kBinaryTasks[t]};
    const auto classes = task.classes();
    std::array<std::vector<double>, 3> per_param;
    for (int r = 0; r < n_repeats; ++r) {
      const Dataset data = simulate_task_dataset(protocol, task, env, derive_seed(derive_seed(seed, t), r));
      for (int p = 0; p < 3; ++p) {
        std::vector<double> a;
        std::vector<double> b;
        for (const auto& s : data.subjects) (s.label == classes[0] ? a : b).push_back(feature_value(*s.fit, p));
        per_param[p].push_back(orientation == AucOrientation::Oriented ? raw_auc(a, b) : parameter_auc(a, b));
      }
    }
    for (int p = 0; p < 3; ++p) {
      const auto [m, s] = mean_std(per_param[p]);
      out[t][p] = {m, s, n_repeats};
    }
  }
  return out;
}

double max_auc_deviation(const AucMatrix& achieved, const AucTargets& targets) {
  double worst = 0.0;
  for (std::size_t t = 0; t < 3; ++t) {
    for (std::size_t p = 0; p < 3; ++p) {
      if (targets[t][p]) worst = std::max(worst, std::abs(achieved[t][p].mean - *targets[t][p]));
    }
  }
  return worst;
}

ValidationReport cmd_validate(const ExperimentConfig& config, const std::filesystem::path& out_dir) {
  ValidationReport r;
  r.snr = config.validation.snr;
  r.orientation = config.validation.orientation;
  r.aucs = parameter_auc_matrix(configured_protocol(config), config.environment(r.snr), r.orientation,
                                config.validation.n_repeats, derive_seed(config.seed, kValidateStream));
  write_text(out_dir / "validation.csv", validation_csv(r, config_hash(config), config.seed));
  return r;
}

std::string validation_csv(const ValidationReport& report, const std::string& hash, std::uint64_t seed) {
  std::ostringstream os;
  os << header_comment(hash, seed);
  os << "task,parameter,auc_mean,auc_std,n_repeats,snr,orientation\n";
  for (std::size_t t = 0; t < 3; ++t) {
    for (std::size_t p = 0; p < 3; ++p) {
      const AucCell& c = report.aucs[t][p];
      os << TaskSpec{kBinaryTasks[t]}.name() << ',' << kAucParameters[p] << ',' << fmt("%.4f", c.mean) << ','
         << fmt("%.4f", c.std) << ',' << c.n_repeats << ',' << fmt("%g", report.snr) << ','
         << (report.orientation == AucOrientation::Oriented ? "oriented" : "direction-free") << '\n';
    }
  }
  return os.str();
}

namespace {

struct Coordinate {
  TissueClass label;
  double TissueDistribution::*field;
  double TissueDistribution::*paired_mean;  // scale for a zero std; nullptr for means
  const char* name;
};

std::vector<Coordinate> calibration_coordinates(bool fit_dstar) {
  std::vector<Coordinate> out;
  for (TissueClass c : kAllClasses) {
    out.push_back({c, &TissueDistribution::mean_f, nullptr, "mean_f"});
    out.push_back({c, &TissueDistribution::std_f, &TissueDistribution::mean_f, "std_f"});
    out.push_back({c, &TissueDistribution::mean_d, nullptr, "mean_d"});
    out.push_back({c, &TissueDistribution::std_d, &TissueDistribution::mean_d, "std_d"});
    if (fit_dstar) {
      out.push_back({c, &TissueDistribution::mean_dstar, nullptr, "mean_dstar"});
      out.push_back({c, &TissueDistribution::std_dstar, &TissueDistribution::mean_dstar, "std_dstar"});
    }
  }
  return out;
}

TissueDistribution& find_mutable(DistributionSet& dists, TissueClass c) {
  for (auto& d : dists) {
    if (d.label == c) return d;
  }
  throw MissingDistribution(c);
}

double calibration_loss(const AucMatrix& m, const AucTargets& targets) {
  double loss = 0.0;
  for (std::size_t t = 0; t < 3; ++t) {
    for (std::size_t p = 0; p < 3; ++p) {
      if (targets[t][p]) loss += std::pow(m[t][p].mean - *targets[t][p], 2);
    }
  }
  return loss;
}

}  // namespace

CalibrationResult calibrate(const ExperimentConfig& config, std::ostream* log) {
  const CalibrationConfig& cal = config.calibration;
  const AcquisitionProtocol protocol = configured_protocol(config);
  const std::uint64_t seed = derive_seed(config.seed, kCalibrateStream);
  ExperimentConfig work = config;

  auto evaluate = [&](const DistributionSet& dists) {
    TaskEnvironment env = work.environment(config.validation.snr);
    env.distributions = dists;
    return parameter_auc_matrix(protocol, env, config.validation.orientation, cal.n_repeats, seed);
  };

  CalibrationResult res;
  res.distributions = config.distributions;
  res.achieved = evaluate(res.distributions);
  res.max_deviation = max_auc_deviation(res.achieved, cal.targets);
  double loss = calibration_loss(res.achieved, cal.targets);
  if (res.max_deviation <= cal.tolerance) {
    res.converged = true;
    return res;
  }

  const auto coords = calibration_coordinates(cal.fit_dstar);
  double step = cal.initial_step;
  while (res.rounds < cal.max_rounds && step >= cal.min_step) {
    ++res.rounds;
    bool improved = false;
    for (const Coordinate& c : coords) {
      for (double sign : {1.0, -1.0}) {
        DistributionSet trial = res.distributions;
        TissueDistribution& d = find_mutable(trial, c.label);
        double& x = d.*(c.field);
        if (c.paired_mean != nullptr && x == 0.0) {
          if (sign < 0.0) continue;
          x = step * std::abs(d.*(c.paired_mean));
        } else {
          x *= 1.0 + sign * step;
        }
        if (c.field == &TissueDistribution::mean_f) x = std::clamp(x, kMinSampledF, kMaxSampledF);
        try {
          d.validate();
        } catch (const std::invalid_argument&) {
          continue;
        }
        const AucMatrix m = evaluate(trial);
        const double l = calibration_loss(m, cal.targets);
        if (l < loss) {
          loss = l;
          res.distributions = std::move(trial);
          res.achieved = m;
          improved = true;
          break;
        }
      }
    }
    res.max_deviation = max_auc_deviation(res.achieved, cal.targets);
    if (log != nullptr) {
      *log << "calibrate: round " << res.rounds << " step " << step << " loss " << loss << " max deviation "
           << res.max_deviation << '\n';
    }
    if (res.max_deviation <= cal.tolerance) {
      res.converged = true;
      break;
    }
    if (!improved) step *= 0.5;
  }
  if (!res.converged && log != nullptr) {
    *log << "warning: calibration did not reach tolerance " << cal.tolerance << " (max deviation "
         << res.max_deviation << "); writing best found\n";
  }
  return res;
}

CalibrationResult cmd_calibrate(const ExperimentConfig& config, const std::filesystem::path& out_dir,
                                std::ostream* log) {
  CalibrationResult r = calibrate(config, log);
  std::filesystem::create_directories(out_dir);
  const std::string hash = config_hash(config);
  save_distributions(r.distributions, out_dir / "calibrated_distributions.json",
                     "calibrated; config_hash=" + hash + " seed=" + std::to_string(config.seed));
  std::ostringstream os;
  os << header_comment(hash, config.seed);
  os << "task,parameter,target,achieved_mean,achieved_std,deviation\n";
  for (std::size_t t = 0; t < 3; ++t) {
    for (std::size_t p = 0; p < 3; ++p) {
      const auto& target = config.calibration.targets[t][p];
      const AucCell& c = r.achieved[t][p];
      os << TaskSpec{kBinaryTasks[t]}.name() << ',' << kAucParameters[p] << ','
         << (target ? fmt("%.4f", *target) : "") << ',' << fmt("%.4f", c.mean) << ',' << fmt("%.4f", c.std) << ','
         << (target ? fmt("%.4f", c.mean - *target) : "") << '\n';
    }
  }
  os << "# converged=" << (r.converged ? "true" : "false") << " rounds=" << r.rounds
     << " max_deviation=" << fmt("%.4f", r.max_deviation) << '\n';
  write_text(out_dir / "calibration.csv", os.str());
  return r;
}

std::string report_header() {
  return "task,protocol_id,protocol,snr,mean,std,n_repeats,te_s,config_hash,seed,wall_clock_s";
}

namespace {

std::string protocol_field(const AcquisitionProtocol& p) {
  std::string s = p.to_string();
  std::replace(s.begin(), s.end(), ',', ' ');
  return s;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string tok;
  while (std::getline(ss, tok, sep)) out.push_back(tok);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

const std::string kSchemaLine = "#schema_version=" + std::to_string(kReportSchemaVersion);

}  // namespace

std::string format_report_row(const ReportRow& r) {
  std::ostringstream os;
  os << r.task << ',' << r.protocol_id << ',' << protocol_field(r.protocol) << ',' << fmt("%g", r.snr) << ','
     << fmt("%.6f", r.mean) << ',' << fmt("%.6f", r.std) << ',' << r.n_repeats << ',' << fmt("%.6f", r.te) << ','
     << r.config_hash << ',' << r.seed << ',' << fmt("%.3f", r.wall_clock_s);
  return os.str();
}

std::vector<ReportRow> read_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open report " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kSchemaLine) {
    throw ReportSchemaMismatch("report " + path.string() + " has schema line '" + line + "', expected '" +
                               kSchemaLine + "'");
  }
  if (!std::getline(in, line) || line != report_header()) {
    throw ReportSchemaMismatch("report " + path.string() + " has an unexpected header");
  }
  std::vector<ReportRow> rows;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto f = split(line, ',');
    if (f.size() != 11) throw std::runtime_error("malformed report row: " + line);
    ReportRow r;
    r.task = f[0];
    r.protocol_id = f[1];
    std::string b = f[2];
    std::replace(b.begin(), b.end(), ' ', ',');
    r.protocol = parse_protocol(b);
    r.snr = std::stod(f[3]);
    r.mean = std::stod(f[4]);
    r.std = std::stod(f[5]);
    r.n_repeats = std::stoi(f[6]);
    r.te = std::stod(f[7]);
    r.config_hash = f[8];
    r.seed = std::stoull(f[9]);
    r.wall_clock_s = std::stod(f[10]);
    rows.push_back(std::move(r));
  }
  return rows;
}

void append_report(const std::filesystem::path& path, const std::vector<ReportRow>& rows) {
  const bool exists = std::filesystem::exists(path) && std::filesystem::file_size(path) > 0;
  if (exists) {
    std::ifstream in(path);
    std::string first;
    std::string second;
    std::getline(in, first);
    std::getline(in, second);
    if (first != kSchemaLine || second != report_header()) {
      throw ReportSchemaMismatch("refusing to append to " + path.string() + ": schema line '" + first +
                                 "' does not match '" + kSchemaLine + "'");
    }
  } else if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::app | std::ios::binary);
  if (!out) throw std::runtime_error("cannot write report " + path.string());
  if (!exists) out << kSchemaLine << '\n' << report_header() << '\n';
  for (const auto& r : rows) out << format_report_row(r) << '\n';
}

ReportRow evaluate_row(const ExperimentConfig& config, const std::string& protocol_id,
                       const AcquisitionProtocol& protocol, double snr) {
  const auto t0 = std::chrono::steady_clock::now();
  const TaskEnvironment env = config.environment(snr);
  const Accuracy acc = evaluate_protocol(protocol, config.task, env, config.eval, config.eval.n_repeats_report,
                                         derive_seed(config.seed, kEvaluateStream));
  ReportRow r;
  r.task = config.task.name();
  r.protocol_id = protocol_id;
  r.protocol = protocol;
  r.snr = snr;
  r.mean = acc.mean;
  r.std = acc.std;
  r.n_repeats = acc.n_repeats;
  r.te = protocol.te(env.scanner);
  r.config_hash = config_hash(config);
  r.seed = config.seed;
  r.wall_clock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

std::vector<ReportRow> cmd_evaluate(const ExperimentConfig& config, const std::string& protocol_id,
                                    const AcquisitionProtocol& protocol, const std::vector<double>& snrs,
                                    const std::filesystem::path& out_dir) {
  std::vector<ReportRow> rows;
  for (double snr : snrs) rows.push_back(evaluate_row(config, protocol_id, protocol, snr));
  append_report(out_dir / "report.csv", rows);
  return rows;
}

std::string artifact_json(const ProtocolArtifact& a) {
  json j;
  j["schema_version"] = 1;
  j["protocol_id"] = a.protocol_id;
  j["optimizer"] = a.optimizer;
  j["task"] = a.task;
  j["snr"] = a.snr;
  const auto& b = a.protocol.b_values();
  j["b_values"] = std::vector<double>(b.begin(), b.end());
  j["te_s"] = a.te;
  j["objective"] = a.objective ? json(*a.objective) : json(nullptr);
  j["config_hash"] = a.config_hash;
  j["seed"] = a.seed;
  j["details"] = json::parse(a.extra_json);
  return j.dump(2) + "\n";
}

ProtocolArtifact load_artifact(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open protocol artifact " + path.string());
  const json j = json::parse(in);
  if (j.value("schema_version", 0) != 1) throw std::runtime_error("unsupported protocol artifact version");
  ProtocolArtifact a;
  a.protocol_id = j.at("protocol_id").get<std::string>();
  a.optimizer = j.at("optimizer").get<std::string>();
  a.task = j.at("task").get<std::string>();
  a.snr = j.at("snr").get<double>();
  a.protocol = AcquisitionProtocol::create(j.at("b_values").get<std::vector<double>>());
  a.te = j.at("te_s").get<double>();
  if (!j.at("objective").is_null()) a.objective = j.at("objective").get<double>();
  a.config_hash = j.at("config_hash").get<std::string>();
  a.seed = j.at("seed").get<std::uint64_t>();
  a.extra_json = j.at("details").dump();
  return a;
}

ScreenerRun run_screener(const ExperimentConfig& config, double snr, long long total_steps,
                         const std::optional<std::filesystem::path>& checkpoint, std::ostream* log) {
  rl::ProtocolEnvConfig ec{config.task, config.environment(snr), config.eval,
                           derive_seed(config.seed, kRewardStream)};
  rl::TrainConfig tc{config.screener.ppo, total_steps, checkpoint, config.seed, config_hash(config)};
  Rng rng = make_rng(config.seed, kPolicyStream);
  ScreenerRun run;
  if (log != nullptr) *log << "screener: training " << total_steps << " steps at snr " << snr << '\n';
  run.train = rl::train_screener(ec, tc, rng);
  run.greedy = rl::rollout_greedy(run.train.agent, snr);
  if (!run.train.best_reward) {
    run.selected = AcquisitionProtocol::ad_hoc();
    return run;
  }
  const std::uint64_t sel = derive_seed(config.seed, kSelectStream);
  const int n = config.screener.n_repeats_select;
  run.best_seen_score = evaluate_protocol(run.train.best_protocol, config.task, ec.env, config.eval, n, sel).mean;
  run.greedy_score = evaluate_protocol(run.greedy, config.task, ec.env, config.eval, n, sel).mean;
  run.selected = run.greedy_score > run.best_seen_score ? run.greedy : run.train.best_protocol;
  if (log != nullptr) {
    *log << "screener: best-seen " << run.train.best_protocol.to_string() << " (" << run.best_seen_score
         << "), greedy " << run.greedy.to_string() << " (" << run.greedy_score << ")\n";
  }
  return run;
}

namespace {

std::string curve_csv(const std::vector<rl::CurvePoint>& curve, const std::string& hash, std::uint64_t seed) {
  std::ostringstream os;
  os << header_comment(hash, seed) << "step,mean_episode_reward,best_reward\n";
  for (const auto& p : curve) {
    os << p.step << ',' << (std::isnan(p.mean_episode_reward) ? "" : fmt("%.6f", p.mean_episode_reward)) << ','
       << (std::isnan(p.best_reward) ? "" : fmt("%.6f", p.best_reward)) << '\n';
  }
  return os.str();
}

json protocol_json(const AcquisitionProtocol& p) {
  const auto& b = p.b_values();
  return std::vector<double>(b.begin(), b.end());
}

}  // namespace

ProtocolArtifact cmd_optimize(const ExperimentConfig& config, const std::filesystem::path& out_dir,
                              std::optional<long long> budget, std::ostream* log) {
  std::filesystem::create_directories(out_dir);
  ProtocolArtifact a;
  a.optimizer = to_string(config.optimizer);
  a.protocol_id = a.optimizer;
  a.task = config.task.name();
  a.snr = config.scanner.snr;
  a.config_hash = config_hash(config);
  a.seed = config.seed;
  switch (config.optimizer) {
    case OptimizerKind::AdHoc:
      a.protocol = AcquisitionProtocol::ad_hoc();
      break;
    case OptimizerKind::Fixed:
      a.protocol = *config.protocol;
      break;
    case OptimizerKind::Crlb: {
      Rng rng = make_rng(config.seed, kCrlbStream);
      const CrlbOptimum opt = optimize_crlb(config.task, config.environment(), config.crlb, rng);
      a.protocol = opt.protocol;
      a.objective = opt.objective;
      a.extra_json = json{{"initial_objective", opt.initial_objective},
                          {"n_tissue_samples", config.crlb.n_tissue_samples},
                          {"iterations", config.crlb.anneal.iterations}}
                         .dump();
      break;
    }
    case OptimizerKind::Screener: {
      const long long steps = budget.value_or(config.screener.total_steps);
      const ScreenerRun run = run_screener(config, config.scanner.snr, steps, out_dir / "checkpoint.json", log);
      a.protocol = run.selected;
      json extra;
      extra["steps"] = run.train.steps;
      extra["best_seen"] = {{"b_values", protocol_json(run.train.best_protocol)},
                            {"reward", run.train.best_reward ? json(*run.train.best_reward) : json(nullptr)},
                            {"reward_seed", run.train.best_reward_seed},
                            {"actions", run.train.best_actions},
                            {"selection_score", run.best_seen_score}};
      extra["greedy"] = {{"b_values", protocol_json(run.greedy)}, {"selection_score", run.greedy_score}};
      a.extra_json = extra.dump();
      if (run.train.best_reward) a.objective = std::max(run.best_seen_score, run.greedy_score);
      write_text(out_dir / "curve.csv", curve_csv(run.train.curve, a.config_hash, a.seed));
      break;
    }
  }
  a.te = a.protocol.te(config.scanner);
  write_text(out_dir / "protocol.json", artifact_json(a));
  write_text(out_dir / "config.json", canonical_config_json(config) + "\n");
  return a;
}

std::vector<ReportRow> cmd_sweep_snr(const ExperimentConfig& config, const std::vector<double>& snrs,
                                     const SweepOptions& options, const std::filesystem::path& out_dir,
                                     std::ostream* log) {
  std::vector<ReportRow> rows;
  for (double snr : snrs) {
    if (log != nullptr) *log << "sweep-snr: snr " << snr << '\n';
    rows.push_back(evaluate_row(config, "adhoc", AcquisitionProtocol::ad_hoc(), snr));
    for (const auto& [name, proto] : config.sweep_protocols) rows.push_back(evaluate_row(config, name, proto, snr));
    if (options.zero_shot) rows.push_back(evaluate_row(config, "screener-zero-shot", *options.zero_shot, snr));
    if (options.reoptimize) {
      Rng rng = make_rng(config.seed, kCrlbStream);
      const CrlbOptimum crlb = optimize_crlb(config.task, config.environment(snr), config.crlb, rng);
      rows.push_back(evaluate_row(config, "crlb", crlb.protocol, snr));
      const ScreenerRun run =
          run_screener(config, snr, options.budget.value_or(config.screener.total_steps), std::nullopt, log);
      rows.push_back(evaluate_row(config, "screener", run.selected, snr));
    }
  }
  append_report(out_dir / "report.csv", rows);
  return rows;
}

std::string render_plot(const std::vector<ReportRow>& rows, const std::string& task, std::ostream* log) {
  std::vector<const ReportRow*> sel;
  for (const auto& r : rows) {
    if (r.task == task) sel.push_back(&r);
  }
  if (sel.empty()) throw std::runtime_error("no report rows for task '" + task + "'");

  std::set<double> snr_set;
  std::vector<std::string> series;
  std::map<std::string, std::map<double, const ReportRow*>> cells;
  std::set<std::pair<std::string, std::string>> stamps;
  for (const ReportRow* r : sel) {
    snr_set.insert(r->snr);
    if (cells.find(r->protocol_id) == cells.end()) series.push_back(r->protocol_id);
    cells[r->protocol_id][r->snr] = r;  // later rows win
    stamps.insert({r->config_hash, std::to_string(r->seed)});
  }
  const std::vector<double> xs(snr_set.begin(), snr_set.end());

  double lo = 1.0;
  double hi = 0.0;
  for (const auto& [id, m] : cells) {
    for (const auto& [snr, r] : m) {
      lo = std::min(lo, r->mean - r->std);
      hi = std::max(hi, r->mean + r->std);
    }
  }
  lo = std::clamp(std::floor(lo * 10.0) / 10.0, 0.0, 1.0);
  hi = std::clamp(std::ceil(hi * 10.0) / 10.0, 0.0, 1.0);
  if (hi - lo < 0.1) hi = std::min(1.0, lo + 0.1);
  if (hi - lo < 0.1) lo = hi - 0.1;

  const double width = 640;
  const double height = 420;
  const double left = 70;
  const double right = 170;
  const double top = 40;
  const double bottom = 60;
  const double pw = width - left - right;
  const double ph = height - top - bottom;
  const double x_lo = xs.front();
  const double x_hi = xs.size() > 1 ? xs.back() : xs.front() + 1.0;
  auto px = [&](double snr) { return left + (xs.size() > 1 ? (snr - x_lo) / (x_hi - x_lo) * pw : pw / 2); };
  auto py = [&](double acc) { return top + (hi - acc) / (hi - lo) * ph; };

  static const std::array<const char*, 8> kColors{"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                                  "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f"};
  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
     << "\" viewBox=\"0 0 " << width << ' ' << height << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  for (const auto& [hash, seed] : stamps) os << "<!-- config_hash=" << hash << " seed=" << seed << " -->\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << left + pw / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">Accuracy vs SNR ("
     << task << ")</text>\n";
  os << "<g id=\"axes\" stroke=\"black\" fill=\"none\">\n";
  os << "<line x1=\"" << left << "\" y1=\"" << top + ph << "\" x2=\"" << left + pw << "\" y2=\"" << top + ph
     << "\"/>\n";
  os << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << top + ph << "\"/>\n";
  os << "</g>\n<g id=\"ticks\">\n";
  for (double x : xs) {
    os << "<line x1=\"" << fmt("%.2f", px(x)) << "\" y1=\"" << top + ph << "\" x2=\"" << fmt("%.2f", px(x))
       << "\" y2=\"" << top + ph + 5 << "\" stroke=\"black\"/>";
    os << "<text x=\"" << fmt("%.2f", px(x)) << "\" y=\"" << top + ph + 20 << "\" text-anchor=\"middle\">"
       << fmt("%g", x) << "</text>\n";
  }
  const int n_y = static_cast<int>(std::lround((hi - lo) / 0.1));
  for (int i = 0; i <= n_y; ++i) {
    const double v = lo + 0.1 * i;
    os << "<line x1=\"" << left - 5 << "\" y1=\"" << fmt("%.2f", py(v)) << "\" x2=\"" << left << "\" y2=\""
       << fmt("%.2f", py(v)) << "\" stroke=\"black\"/>";
    os << "<text x=\"" << left - 8 << "\" y=\"" << fmt("%.2f", py(v) + 4) << "\" text-anchor=\"end\">"
       << fmt("%.1f", v) << "</text>\n";
  }
  os << "</g>\n";
  os << "<text x=\"" << left + pw / 2 << "\" y=\"" << height - 15 << "\" text-anchor=\"middle\">SNR</text>\n";
  os << "<text x=\"18\" y=\"" << top + ph / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
     << top + ph / 2 << ")\">Accuracy</text>\n";

  for (std::size_t s = 0; s < series.size(); ++s) {
    const std::string& id = series[s];
    const char* color = kColors[s % kColors.size()];
    const auto& m = cells[id];
    os << "<g class=\"series\" id=\"series-" << id << "\" stroke=\"" << color << "\" fill=\"" << color << "\">\n";
    std::vector<std::vector<std::pair<double, double>>> segments(1);
    for (double x : xs) {
      auto it = m.find(x);
      if (it == m.end()) {
        if (log != nullptr) *log << "warning: series '" << id << "' has no value at snr " << x << "\n";
        if (!segments.back().empty()) segments.emplace_back();
        continue;
      }
      segments.back().push_back({px(x), py(it->second->mean)});
      const double y1 = py(std::min(hi, it->second->mean + it->second->std));
      const double y0 = py(std::max(lo, it->second->mean - it->second->std));
      os << "<line class=\"errorbar\" x1=\"" << fmt("%.2f", px(x)) << "\" y1=\"" << fmt("%.2f", y0) << "\" x2=\""
         << fmt("%.2f", px(x)) << "\" y2=\"" << fmt("%.2f", y1) << "\"/>\n";
      os << "<circle class=\"point\" cx=\"" << fmt("%.2f", px(x)) << "\" cy=\"" << fmt("%.2f", py(it->second->mean))
         << "\" r=\"3\"/>\n";
    }
    for (const auto& seg : segments) {
      if (seg.size() < 2) continue;
      os << "<polyline fill=\"none\" stroke-width=\"2\" points=\"";
      for (std::size_t i = 0; i < seg.size(); ++i) {
        if (i) os << ' ';
        os << fmt("%.2f", seg[i].first) << ',' << fmt("%.2f", seg[i].second);
      }
      os << "\"/>\n";
    }
    os << "</g>\n";
    const double ly = top + 10 + 20.0 * static_cast<double>(s);
    os << "<g class=\"legend\"><line x1=\"" << left + pw + 15 << "\" y1=\"" << ly << "\" x2=\"" << left + pw + 40
       << "\" y2=\"" << ly << "\" stroke=\"" << color << "\" stroke-width=\"2\"/><text x=\"" << left + pw + 46
       << "\" y=\"" << ly + 4 << "\">" << id << "</text></g>\n";
  }
  os << "</svg>\n";
  return os.str();
}

void cmd_plot(const std::filesystem::path& report_path, const std::string& task,
              const std::filesystem::path& svg_path, std::ostream* log) {
  const auto rows = read_report(report_path);
  if (rows.empty()) throw std::runtime_error("report " + report_path.string() + " has no rows");
  write_text(svg_path, render_plot(rows, task.empty() ? rows.front().task : task, log));
}

std::string summarize_report(const std::vector<ReportRow>& rows) {
  std::vector<std::string> tasks;
  for (const auto& r : rows) {
    if (std::find(tasks.begin(), tasks.end(), r.task) == tasks.end()) tasks.push_back(r.task);
  }
  std::ostringstream os;
  for (const auto& task : tasks) {
    std::set<double> snrs;
    std::vector<std::string> ids;
    std::map<std::pair<std::string, double>, const ReportRow*> cell;
    for (const auto& r : rows) {
      if (r.task != task) continue;
      snrs.insert(r.snr);
      if (std::find(ids.begin(), ids.end(), r.protocol_id) == ids.end()) ids.push_back(r.protocol_id);
      cell[{r.protocol_id, r.snr}] = &r;
    }
    os << "## " << task << "\n\n| protocol |";
    for (double s : snrs) os << " SNR " << fmt("%g", s) << " |";
    os << "\n|---|";
    for (std::size_t i = 0; i < snrs.size(); ++i) os << "---|";
    os << '\n';
    for (const auto& id : ids) {
      os << "| " << id << " |";
      for (double s : snrs) {
        auto it = cell.find({id, s});
        os << ' ' << (it == cell.end() ? std::string("-") : fmt("%.3f", it->second->mean) + " ± " +
                                                               fmt("%.3f", it->second->std))
           << " |";
      }
      os << '\n';
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace screener::harness
