// Command-line front end: validate, calibrate, evaluate, optimize, sweep-snr, plot, report.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "screener/harness.hpp"

namespace fs = std::filesystem;
using namespace screener;

namespace {

struct CommonOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::vector<double> snrs;
  std::string protocol;
  std::string out;
  std::string task;
  std::string optimizer;
  std::optional<long long> budget;
};

void add_common(CLI::App* cmd, CommonOptions& o, bool with_config = true) {
  if (with_config) cmd->add_option("--config", o.config_path, "Experiment configuration (JSON)")->required();
  cmd->add_option("--seed", o.seed, "Master seed (overrides the config)");
  cmd->add_option("--snr", o.snrs, "SNR value(s), comma-separated")->delimiter(',');
  cmd->add_option("--protocol", o.protocol, "Ten comma-separated b-values");
  cmd->add_option("--out", o.out, "Output directory (overrides the config)");
  cmd->add_option("--task", o.task, "active-chronic | active-healthy | chronic-healthy | multiclass");
  cmd->add_option("--optimizer", o.optimizer, "adhoc | crlb | screener | fixed");
  cmd->add_option("--budget", o.budget, "PPO step budget (screener)");
}

ExperimentConfig resolve(const CommonOptions& o) {
  ExperimentConfig c = load_config(o.config_path);
  if (o.seed) c.seed = *o.seed;
  if (!o.out.empty()) c.output_dir = o.out;
  if (!o.task.empty()) c.task = parse_task(o.task);
  if (!o.optimizer.empty()) c.optimizer = parse_optimizer(o.optimizer);
  if (!o.protocol.empty()) c.protocol = parse_protocol(o.protocol);
  if (o.budget) c.screener.total_steps = *o.budget;
  c.validate();
  return c;
}

std::vector<double> snr_or(const CommonOptions& o, std::vector<double> fallback) {
  return o.snrs.empty() ? fallback : o.snrs;
}

void print_rows(const std::vector<harness::ReportRow>& rows) {
  for (const auto& r : rows) {
    std::cout << r.task << "  " << r.protocol_id << "  snr " << r.snr << "  accuracy " << r.mean << " +/- " << r.std
              << "  (" << r.n_repeats << " repeats)\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Task-specific b-value protocol design for IVIM diffusion MRI"};
  app.require_subcommand(1);
  CommonOptions o;

  auto* validate = app.add_subcommand("validate", "Per-parameter AUC table for the three binary tasks");
  add_common(validate, o);

  auto* calibrate = app.add_subcommand("calibrate", "Fit class distributions to the AUC targets");
  add_common(calibrate, o);

  auto* evaluate = app.add_subcommand("evaluate", "Repeated cross-validated accuracy of one protocol");
  add_common(evaluate, o);
  std::string protocol_file;
  std::string checkpoint;
  std::string protocol_id;
  evaluate->add_option("--protocol-file", protocol_file, "Protocol artifact written by optimize");
  evaluate->add_option("--checkpoint", checkpoint, "Agent checkpoint; the greedy protocol is evaluated");
  evaluate->add_option("--id", protocol_id, "Protocol id written to the report");

  auto* optimize = app.add_subcommand("optimize", "Search a protocol with the CRLB or SCREENER optimizer");
  add_common(optimize, o);

  auto* sweep = app.add_subcommand("sweep-snr", "Evaluate protocols across an SNR list");
  add_common(sweep, o);
  bool reoptimize = false;
  std::string zero_shot_file;
  sweep->add_flag("--reoptimize", reoptimize, "Re-run crlb and screener at every SNR");
  sweep->add_option("--zero-shot", zero_shot_file, "Protocol artifact evaluated at every SNR as screener-zero-shot");

  auto* plot = app.add_subcommand("plot", "Accuracy-vs-SNR SVG from a report");
  add_common(plot, o, false);
  std::string report_path;
  std::string svg_path;
  plot->add_option("--report", report_path, "Report CSV")->required();
  plot->add_option("--svg", svg_path, "Output SVG (default: next to the report)");

  auto* report = app.add_subcommand("report", "Markdown summary of a report");
  add_common(report, o, false);
  report->add_option("--report", report_path, "Report CSV")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (validate->parsed()) {
      ExperimentConfig c = resolve(o);
      if (!o.snrs.empty()) c.validation.snr = o.snrs.front();
      const auto r = harness::cmd_validate(c, c.output_dir);
      std::cout << harness::validation_csv(r, config_hash(c), c.seed);
    } else if (calibrate->parsed()) {
      ExperimentConfig c = resolve(o);
      const auto r = harness::cmd_calibrate(c, c.output_dir, &std::clog);
      std::cout << "calibration " << (r.converged ? "converged" : "did not converge") << " after " << r.rounds
                << " rounds; max deviation " << r.max_deviation << "\nwrote "
                << (c.output_dir / "calibrated_distributions.json").string() << '\n';
    } else if (evaluate->parsed()) {
      ExperimentConfig c = resolve(o);
      AcquisitionProtocol p = c.protocol.value_or(AcquisitionProtocol::ad_hoc());
      std::string id = c.protocol ? "custom" : "adhoc";
      if (!protocol_file.empty()) {
        const auto a = harness::load_artifact(protocol_file);
        p = a.protocol;
        id = a.protocol_id;
      } else if (!checkpoint.empty()) {
        p = rl::rollout_greedy(rl::load_checkpoint(checkpoint), c.scanner.snr);
        id = "screener-greedy";
      }
      if (!protocol_id.empty()) id = protocol_id;
      print_rows(harness::cmd_evaluate(c, id, p, snr_or(o, {c.scanner.snr}), c.output_dir));
    } else if (optimize->parsed()) {
      ExperimentConfig c = resolve(o);
      if (!o.snrs.empty()) c.scanner.snr = o.snrs.front();
      const auto a = harness::cmd_optimize(c, c.output_dir, o.budget, &std::clog);
      std::cout << a.protocol_id << " protocol: " << a.protocol.to_string() << "  (TE " << a.te << " s)\nwrote "
                << (c.output_dir / "protocol.json").string() << '\n';
    } else if (sweep->parsed()) {
      ExperimentConfig c = resolve(o);
      harness::SweepOptions opts;
      opts.reoptimize = reoptimize;
      opts.budget = o.budget;
      if (!zero_shot_file.empty()) opts.zero_shot = harness::load_artifact(zero_shot_file).protocol;
      print_rows(harness::cmd_sweep_snr(c, snr_or(o, c.snr_list), opts, c.output_dir, &std::clog));
    } else if (plot->parsed()) {
      const fs::path svg = svg_path.empty() ? fs::path(report_path).replace_extension(".svg") : fs::path(svg_path);
      harness::cmd_plot(report_path, o.task, svg, &std::clog);
      std::cout << "wrote " << svg.string() << '\n';
    } else if (report->parsed()) {
      std::cout << harness::summarize_report(harness::read_report(report_path));
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
