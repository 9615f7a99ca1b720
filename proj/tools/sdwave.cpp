// sdwave: simulate, estimate, variance, montecarlo and qq subcommands.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sdwave/sdwave.hpp"

namespace {

using namespace sdwave;
namespace fs = std::filesystem;

enum ExitCode : int {
  kOk = 0,
  kOther = 1,
  kConfigError = 2,
  kDiverged = 3,
  kIoError = 4,
};

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config_error: return kConfigError;
    case ErrorKind::integration_diverged: return kDiverged;
    case ErrorKind::io_error: return kIoError;
    default: return kOther;
  }
}

struct Options {
  std::string config_path;
  std::string preset;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::optional<unsigned> threads;
  std::string samples_path;
};

RunConfig load(const Options& opt) {
  RunConfig rc = [&] {
    if (!opt.preset.empty()) {
      if (!opt.config_path.empty()) throw Error(ErrorKind::config_error, "--config and --preset are exclusive");
      if (opt.preset != "paper") throw Error(ErrorKind::config_error, "unknown preset '" + opt.preset + "'");
      return paper_preset();
    }
    if (opt.config_path.empty()) throw Error(ErrorKind::config_error, "no configuration: pass --config or --preset");
    std::ifstream in(opt.config_path);
    if (!in) throw Error(ErrorKind::io_error, "cannot read " + opt.config_path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(std::string_view(ss.str()));
  }();
  if (opt.seed) rc.plan.seed = *opt.seed;
  if (!opt.out_dir.empty()) rc.out_dir = opt.out_dir;
  if (opt.threads) rc.threads = *opt.threads;
  return rc;
}

fs::path prepare_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw Error(ErrorKind::io_error, "cannot create output directory " + dir);
  return fs::path(dir);
}

// Writes through a buffer so a failed run leaves no partial file behind.
void write_file(const fs::path& path, const std::function<void(std::ostream&)>& body) {
  std::ostringstream buf;
  body(buf);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::io_error, "cannot open " + path.string() + " for writing");
  const std::string text = buf.str();
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.close();
  if (!out) throw Error(ErrorKind::io_error, "write failed for " + path.string());
}

std::string numbered(const char* prefix, std::size_t index, const EstimatorSpec& spec) {
  return std::string(prefix) + "_" + std::to_string(index) + "_" + spec.label() + ".csv";
}

void print_double(std::ostream& os, double x) { detail::write_double(os, x); }

int cmd_simulate(const RunConfig& rc) {
  const fs::path dir = prepare_dir(rc.out_dir);
  const fs::path file = dir / "trajectory.csv";
  ModeState final_state;
  write_file(file, [&](std::ostream& os) {
    TrajectoryCsvWriter writer(os, rc.stride);
    final_state = simulate(rc.plan, {&writer});
  });
  std::cout << "wrote " << file.string() << " (t = ";
  print_double(std::cout, final_state.t);
  std::cout << ")\n";
  return kOk;
}

int cmd_estimate(const RunConfig& rc) {
  if (rc.estimators.empty()) throw Error(ErrorKind::config_error, "estimators: none configured");
  const fs::path dir = prepare_dir(rc.out_dir);
  const ReducedRun run = reduce_to_support(rc.plan, rc.estimators);
  std::vector<SnapshotRecorder> recorders;
  recorders.reserve(run.estimators.size());
  for (const EstimatorSpec& s : run.estimators) recorders.emplace_back(run.plan.cfg, s.window, rc.stride, rc.quadrature);
  std::vector<Observer*> observers;
  for (auto& r : recorders) observers.push_back(&r);
  simulate(run.plan, observers);

  std::cout << "estimator,final\n";
  for (std::size_t i = 0; i < run.estimators.size(); ++i) {
    const auto series = estimator_time_series(recorders[i].snapshots(), run.estimators[i], run.plan.cfg, rc.plan.params);
    const fs::path file = dir / numbered("estimate", i, rc.estimators[i]);
    write_file(file, [&](std::ostream& os) { write_estimate_csv(os, series, rc.estimators[i].kind); });
    std::cout << rc.estimators[i].label() << ',';
    if (!series.empty() && series.back().estimate) {
      print_double(std::cout, *series.back().estimate);
    } else {
      std::cout << "nan";
    }
    std::cout << '\n';
  }
  return kOk;
}

int cmd_variance(const RunConfig& rc) {
  std::cout << "estimator,var_theoretical,rounded\n";
  for (const EstimatorSpec& s : rc.estimators) {
    std::cout << s.label() << ',';
    const auto v = limiting_variance(s, rc.plan.params, rc.plan.cfg);
    if (v) {
      print_double(std::cout, v->value);
      char rounded[64];
      std::snprintf(rounded, sizeof rounded, "%.4f", v->value);
      std::cout << ',' << rounded << '\n';
    } else {
      std::cout << "nan,nan\n";
    }
  }
  return kOk;
}

int cmd_montecarlo(const RunConfig& rc) {
  if (rc.estimators.empty()) throw Error(ErrorKind::config_error, "estimators: none configured");
  const fs::path dir = prepare_dir(rc.out_dir);
  McPlan plan{rc.plan, rc.replications, rc.estimators, rc.plan.seed, rc.quadrature, rc.threads};
  const McReport report = run_monte_carlo(plan);

  write_file(dir / "report.csv", [&](std::ostream& os) { write_report_csv(os, report); });
  for (std::size_t i = 0; i < report.estimators.size(); ++i) {
    const EstimatorReport& e = report.estimators[i];
    write_file(dir / numbered("samples", i, e.spec), [&](std::ostream& os) { write_samples_csv(os, e, report.horizon); });
    if (!e.scaled.empty()) {
      const auto points = qq_points(e.scaled);
      write_file(dir / numbered("qq", i, e.spec), [&](std::ostream& os) { write_qq_csv(os, points); });
    }
  }
  write_report_csv(std::cout, report);
  return kOk;
}

int cmd_qq(const Options& opt) {
  std::ifstream in(opt.samples_path);
  if (!in) throw Error(ErrorKind::io_error, "cannot read " + opt.samples_path);
  const std::vector<double> sample = read_scaled_samples(in);
  if (sample.empty()) throw Error(ErrorKind::insufficient_sample, "no valid samples in " + opt.samples_path);
  const auto points = qq_points(sample);
  if (opt.out_dir.empty()) {
    write_qq_csv(std::cout, points);
  } else {
    const fs::path dir = prepare_dir(opt.out_dir);
    const fs::path file = dir / ("qq_" + fs::path(opt.samples_path).stem().string() + ".csv");
    write_file(file, [&](std::ostream& os) { write_qq_csv(os, points); });
    std::cout << "wrote " << file.string() << '\n';
  }
  if (sample.size() >= 3) {
    const ShapiroWilk sw = shapiro_wilk(sample);
    std::cerr << "n = " << sample.size() << ", shapiro-wilk W = ";
    print_double(std::cerr, sw.w);
    std::cerr << ", p = ";
    print_double(std::cerr, sw.p_value);
    std::cerr << '\n';
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spectral simulation and parameter estimation for the strongly damped stochastic wave equation"};
  app.require_subcommand(0, 1);
  Options opt;
  bool print_preset = false;

  const auto add_run_options = [&](CLI::App* sub) {
    sub->add_option("-c,--config", opt.config_path, "JSON run configuration");
    sub->add_option("--preset", opt.preset, "built-in configuration (paper)");
    sub->add_option("--seed", opt.seed, "override the configured seed");
    sub->add_option("-o,--out", opt.out_dir, "override the output directory");
    sub->add_option("-j,--threads", opt.threads, "worker threads for montecarlo (0 = all cores)");
  };
  app.add_flag("--print-preset", print_preset, "print the built-in 'paper' preset as JSON and exit");

  CLI::App* simulate_cmd = app.add_subcommand("simulate", "integrate one trajectory and dump trajectory.csv");
  CLI::App* estimate_cmd = app.add_subcommand("estimate", "estimator time series along one trajectory");
  CLI::App* variance_cmd = app.add_subcommand("variance", "print theoretical limiting variances");
  CLI::App* mc_cmd = app.add_subcommand("montecarlo", "replicate and report sample moments and normality");
  CLI::App* qq_cmd = app.add_subcommand("qq", "Q-Q points for a samples CSV written by montecarlo");
  for (CLI::App* sub : {simulate_cmd, estimate_cmd, variance_cmd, mc_cmd}) add_run_options(sub);
  qq_cmd->add_option("samples", opt.samples_path, "samples_<i>_<label>.csv")->required();
  qq_cmd->add_option("-o,--out", opt.out_dir, "write qq_<name>.csv here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }

  try {
    if (print_preset) {
      std::cout << paper_preset_json().dump(2) << '\n';
      return kOk;
    }
    if (*qq_cmd) return cmd_qq(opt);
    if (app.get_subcommands().empty()) {
      std::cerr << app.help();
      return kConfigError;
    }
    const RunConfig rc = load(opt);
    if (*simulate_cmd) return cmd_simulate(rc);
    if (*estimate_cmd) return cmd_estimate(rc);
    if (*variance_cmd) return cmd_variance(rc);
    return cmd_montecarlo(rc);
  } catch (const Error& e) {
    std::cerr << "sdwave: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "sdwave: " << e.what() << '\n';
    return kOther;
  }
}
