// immfpf: simulate, filter, run oracles and sweeps from a scenario file.
//
// Errors go to stderr as one line: `error code=<Code> message=<text>`.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <tuple>
#include <string>

#include "immfpf/immfpf.hpp"

namespace {

using namespace immfpf;
using json = nlohmann::ordered_json;

struct Options {
  std::string command;
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::size_t> particles;
  std::optional<double> dt;
  std::optional<std::string> mu_update;
  std::optional<std::string> obs_path;
};

std::filesystem::path output_dir(const Options& opt, const ScenarioConfig& config) {
  if (opt.out) return *opt.out;
  if (const char* env = std::getenv("IMMFPF_OUT_DIR"); env && *env) return env;
  return config.output_dir;
}

ScenarioConfig load(const Options& opt) {
  auto config = parse_config(opt.config_path);
  if (opt.particles) config.n_particles = *opt.particles;
  if (opt.dt) config.dt = *opt.dt;
  if (opt.mu_update) config.mu_update = *opt.mu_update == "bayes" ? MuUpdate::bayes : MuUpdate::euler;
  if (opt.seed) config.seeds = {*opt.seed};
  config.validate();
  return config;
}

json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json metrics_json(const ScenarioConfig& config, const RunResult& r) {
  json j;
  j["seed"] = r.seed;
  j["steps"] = r.truth.steps();
  j["dt"] = config.dt;
  j["particles_per_mode"] = config.n_particles;
  j["mu_update"] = config.mu_update == MuUpdate::euler ? "euler" : "bayes";
  j["burn_in"] = config.burn_in;
  j["rmse"] = number(r.metrics.rmse);
  j["segment_accuracy"] = json::array();
  for (double a : r.metrics.segment_accuracy) j["segment_accuracy"].push_back(a);
  j["runtime_seconds"] = r.metrics.runtime_seconds;
  return j;
}

void add_run_outputs(io::OutputSet& out, const ScenarioConfig& config, const RunResult& r) {
  out.add("truth.csv", io::truth_csv(r.truth));
  out.add("obs.csv", io::observations_csv(r.observations));
  out.add("estimate.csv", io::estimate_csv(r.filter));
  out.add("mu.csv", io::mu_csv(r.filter));
  out.add("metrics.json", metrics_json(config, r).dump(2) + "\n");
}

int cmd_simulate(const Options& opt) {
  const auto config = load(opt);
  const auto seed = config.seeds.front();
  const auto truth = simulate_scenario_truth(config, seed);
  const auto obs = synthesize_observations(config.model, truth, seed);
  io::OutputSet out(output_dir(opt, config));
  out.add("truth.csv", io::truth_csv(truth));
  out.add("obs.csv", io::observations_csv(obs));
  for (const auto& p : out.commit()) std::cout << "wrote " << p.string() << '\n';
  return 0;
}

int cmd_filter(const Options& opt) {
  const auto config = load(opt);
  const auto seed = config.seeds.front();
  io::OutputSet out(output_dir(opt, config));
  if (opt.obs_path) {
    const auto obs = io::read_observations_csv(*opt.obs_path, config.dt);
    auto run_config = config;
    run_config.oracle.reset();
    const auto trace = run_filter(run_config, obs, seed);
    out.add("estimate.csv", io::estimate_csv(trace));
    out.add("mu.csv", io::mu_csv(trace));
  } else {
    auto run_config = config;
    run_config.oracle.reset();
    add_run_outputs(out, run_config, run_scenario(run_config, seed));
  }
  for (const auto& p : out.commit()) std::cout << "wrote " << p.string() << '\n';
  return 0;
}

int cmd_experiment(const Options& opt) {
  auto config = load(opt);
  config.oracle.reset();
  const auto result = run_scenario(config, config.seeds.front());
  io::OutputSet out(output_dir(opt, config));
  add_run_outputs(out, config, result);
  for (const auto& p : out.commit()) std::cout << "wrote " << p.string() << '\n';
  std::cout << "rmse " << text::format_double(result.metrics.rmse) << '\n';
  for (std::size_t s = 0; s < result.metrics.segment_accuracy.size(); ++s)
    std::cout << "segment " << s + 1 << " accuracy "
              << text::format_double(result.metrics.segment_accuracy[s]) << '\n';
  return 0;
}

int cmd_oracle(const Options& opt) {
  const auto config = load(opt);
  if (!config.oracle) fail(ErrorCode::validation_error, "config has no [oracle] section");
  const auto result = run_scenario(config, config.seeds.front());
  io::OutputSet out(output_dir(opt, config));
  add_run_outputs(out, config, result);
  const auto& trace = result.filter;
  out.add("oracle_moments.csv", io::oracle_moments_csv(trace));
  for (std::size_t i = 0; i < trace.oracle->snapshots.size(); ++i)
    out.add("oracle_density_" + std::to_string(i + 1) + ".csv",
            io::density_csv(trace.oracle->snapshots[i].second));
  double mu_gap = 0.0;
  for (std::size_t k = 0; k < trace.times.size(); ++k)
    for (std::size_t m = 0; m < config.model.n_modes(); ++m)
      mu_gap = std::max(mu_gap, std::abs(trace.oracle->mu[k][m] - trace.mu[k][m]));
  for (const auto& p : out.commit()) std::cout << "wrote " << p.string() << '\n';
  std::cout << "sup |mu_grid - mu_filter| " << text::format_double(mu_gap) << '\n';
  return 0;
}

int cmd_sweep(const Options& opt) {
  auto config = parse_config(opt.config_path);
  if (opt.particles) config.n_particles = *opt.particles;
  if (opt.dt) config.dt = *opt.dt;
  if (opt.mu_update) config.mu_update = *opt.mu_update == "bayes" ? MuUpdate::bayes : MuUpdate::euler;
  if (opt.seed) config.seeds = {*opt.seed};
  config.oracle.reset();
  config.validate();
  const auto summary = seed_sweep(config);
  std::ostringstream csv;
  csv << "seed,rmse,min_accuracy,mean_accuracy,runtime_seconds\n";
  std::printf("%8s %12s %12s %12s\n", "seed", "rmse", "min_acc", "mean_acc");
  for (const auto& row : summary.rows) {
    csv << row.seed << ',' << text::format_double(row.rmse) << ',' << text::format_double(row.min_accuracy)
        << ',' << text::format_double(row.mean_accuracy) << ',' << text::format_double(row.runtime_seconds)
        << '\n';
    std::printf("%8llu %12.4f %12.4f %12.4f\n", static_cast<unsigned long long>(row.seed), row.rmse,
                row.min_accuracy, row.mean_accuracy);
  }
  std::printf("rmse %.4f +- %.4f   mean accuracy %.4f +- %.4f\n", summary.rmse_mean, summary.rmse_std,
              summary.accuracy_mean, summary.accuracy_std);
  json j;
  j["seeds"] = summary.rows.size();
  j["rmse_mean"] = number(summary.rmse_mean);
  j["rmse_std"] = number(summary.rmse_std);
  j["accuracy_mean"] = summary.accuracy_mean;
  j["accuracy_std"] = summary.accuracy_std;
  io::OutputSet out(output_dir(opt, config));
  out.add("sweep.csv", csv.str());
  out.add("sweep.json", j.dump(2) + "\n");
  out.commit();
  return 0;
}

int cmd_gain_check(const Options& opt) {
  ScalarFunction h = ScalarFunction::arctan(10.0, 1.0 / 0.015);
  std::uint64_t seed = opt.seed.value_or(1);
  if (!opt.config_path.empty()) {
    const auto config = parse_config(opt.config_path);
    const auto& obs = config.model.modes.front().observation;
    if (obs.kind() == ScalarFunction::Kind::arctan)
      h = ScalarFunction::arctan(obs.params()[0], obs.params()[1] / config.model.obs_noise);
    if (!opt.seed) seed = config.seeds.front();
  }
  const auto grid = gain_check_grid();
  std::printf("h(x) = %s\n", h.to_string().c_str());
  std::printf("%8s %10s %14s %14s %12s %12s %6s\n", "N", "bandwidth", "constant_K", "E[K_exact]",
              "abs_error", "tolerance", "ok");
  double previous = 0.0;
  for (std::size_t n : {std::size_t{1000}, std::size_t{10000}}) {
    const auto row = gain_check(h, n, seed, grid);
    std::printf("%8zu %10.4f %14.6f %14.6f %12.4e %12.4e %6s\n", row.n_particles, row.bandwidth,
                row.constant_gain, row.exact_mean_gain, row.abs_error, row.tolerance,
                row.within_tolerance ? "yes" : "no");
    if (previous > 0.0) std::printf("error ratio N=1000 / N=10000: %.4f\n", previous / row.abs_error);
    previous = row.abs_error;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Interacting multiple model feedback particle filter"};
  app.require_subcommand(0, 1);
  Options opt;
  bool print_schema = false;
  app.add_flag("--schema", print_schema, "Print the config file reference and exit");

  std::string mu_update;
  auto add_common = [&](CLI::App* sub, bool config_required) {
    auto* cfg = sub->add_option("config", opt.config_path, "Scenario config file");
    if (config_required) cfg->required();
    sub->add_option("--seed", opt.seed, "Seed override");
    sub->add_option("--out", opt.out, "Output directory (default: $IMMFPF_OUT_DIR, then the config)");
    sub->add_option("--particles", opt.particles, "Particles per mode")->check(CLI::Range(2, 100000000));
    sub->add_option("--dt", opt.dt, "Time step")->check(CLI::PositiveNumber);
    sub->add_option("--mu-update", opt.mu_update, "Mode probability update")
        ->check(CLI::IsMember({"euler", "bayes"}));
  };
  for (const auto& [name, help, required] :
       {std::tuple{"simulate", "Simulate truth and observations", true},
        std::tuple{"filter", "Run the filter (on --obs or a fresh simulation)", true},
        std::tuple{"oracle", "Run the filter alongside the grid oracle", true},
        std::tuple{"experiment", "Simulate, filter and score one seed", true},
        std::tuple{"sweep", "Run every configured seed and aggregate", true},
        std::tuple{"gain-check", "Constant gain vs exact gain table", false}}) {
    auto* sub = app.add_subcommand(name, help);
    add_common(sub, required);
    if (std::string(name) == "filter") sub->add_option("--obs", opt.obs_path, "Observation CSV (t,dz)");
    sub->callback([&opt, sub] { opt.command = sub->get_name(); });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error code=UsageError message=" << e.what() << '\n';
    return 2;
  }

  if (print_schema) {
    std::cout << config_schema();
    return 0;
  }
  if (opt.command.empty()) {
    std::cerr << "error code=UsageError message=a subcommand is required\n";
    return 2;
  }

  try {
    if (opt.command == "simulate") return cmd_simulate(opt);
    if (opt.command == "filter") return cmd_filter(opt);
    if (opt.command == "oracle") return cmd_oracle(opt);
    if (opt.command == "experiment") return cmd_experiment(opt);
    if (opt.command == "sweep") return cmd_sweep(opt);
    if (opt.command == "gain-check") return cmd_gain_check(opt);
  } catch (const Error& e) {
    std::cerr << "error code=" << to_string(e.code()) << " message=" << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error code=InternalError message=" << e.what() << '\n';
    return 1;
  }
  return 1;
}
