#include "panelkern/cli.hpp"

#include <fstream>
#include <optional>
#include <ostream>

#include <CLI11.hpp>

#include "panelkern/errors.hpp"
#include "panelkern/study_harness.hpp"

namespace panelkern {

namespace {

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open output file: " + path);
  return out;
}

struct CommonFitFlags {
  std::string kernel = "epanechnikov";
  double bandwidth = 0.5;
  int degree = 1;
  std::size_t grid_points = 100;
  double level = 0.95;
  int threads = 1;
};

void add_fit_flags(CLI::App* cmd, CommonFitFlags& flags, bool bandwidth_required) {
  cmd->add_option("--kernel", flags.kernel, "Kernel family")
      ->check(CLI::IsMember({"epanechnikov", "uniform", "triangular"}));
  auto* bw = cmd->add_option("--bandwidth", flags.bandwidth, "Kernel bandwidth")
                 ->check(CLI::PositiveNumber);
  if (bandwidth_required) bw->required();
  cmd->add_option("--degree", flags.degree, "Local polynomial degree")
      ->check(CLI::Range(0, 2));
  cmd->add_option("--grid-points", flags.grid_points, "Number of grid points")
      ->check(CLI::Range(std::size_t{2}, std::size_t{100000}));
  cmd->add_option("--level", flags.level, "Confidence level")
      ->check(CLI::Range(1e-6, 1.0 - 1e-6));
  cmd->add_option("--threads", flags.threads, "Worker threads")->check(CLI::Range(1, 256));
}

KernelSpec to_spec(const CommonFitFlags& flags) {
  KernelSpec spec;
  spec.family = kernel_family_from_name(flags.kernel);
  spec.bandwidth = flags.bandwidth;
  spec.degree = flags.degree;
  return spec;
}

void print_matrix(std::ostream& out, const char* name, const Eigen::MatrixXd& m) {
  out << name << ":\n";
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    out << " ";
    for (Eigen::Index c = 0; c < m.cols(); ++c) out << ' ' << format_double(m(r, c));
    out << '\n';
  }
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Local likelihood estimation for panel count data"};
  app.require_subcommand(1);

  // simulate
  auto* simulate_cmd = app.add_subcommand("simulate", "Draw a synthetic panel dataset");
  int setting = 1;
  std::size_t n = 300;
  std::uint64_t seed = 1;
  std::string out_path;
  int max_visits = 10;
  double gap_rate = 1.0;
  std::optional<double> lattice;
  bool censoring = false;
  simulate_cmd->add_option("--setting", setting, "Built-in truth (1 or 2)")
      ->required()
      ->check(CLI::Range(1, 2));
  simulate_cmd->add_option("--n", n, "Number of subjects")
      ->check(CLI::Range(std::size_t{2}, std::size_t{10000000}));
  simulate_cmd->add_option("--seed", seed, "Random seed");
  simulate_cmd->add_option("--out", out_path, "Output CSV path")->required();
  simulate_cmd->add_option("--max-visits", max_visits, "Visit budget upper bound")
      ->check(CLI::Range(1, 100000));
  simulate_cmd->add_option("--gap-rate", gap_rate, "Exponential rate of visit gaps")
      ->check(CLI::PositiveNumber);
  simulate_cmd->add_option("--lattice", lattice,
                           "Visit time rounding lattice (0 disables rounding)");
  simulate_cmd->add_flag("--censoring", censoring, "Draw censor times on (tau/2, tau)");

  // estimate
  auto* estimate_cmd = app.add_subcommand("estimate", "Fit the coefficient curve to a CSV");
  std::string data_path;
  CommonFitFlags est_flags;
  std::string est_out;
  estimate_cmd->add_option("--data", data_path, "Input panel CSV")->required();
  add_fit_flags(estimate_cmd, est_flags, /*bandwidth_required=*/true);
  estimate_cmd->add_option("--out", est_out, "Output curve CSV path")->required();

  // study
  auto* study_cmd = app.add_subcommand("study", "Monte Carlo study of the estimator");
  int study_setting = 1;
  std::size_t study_n = 300;
  std::size_t replications = 200;
  std::uint64_t study_seed = 1;
  CommonFitFlags study_flags;
  std::string study_out;
  std::optional<double> study_lattice;
  study_cmd->add_option("--setting", study_setting, "Built-in truth (1 or 2)")
      ->required()
      ->check(CLI::Range(1, 2));
  study_cmd->add_option("--n", study_n, "Subjects per replication")
      ->check(CLI::Range(std::size_t{2}, std::size_t{10000000}));
  study_cmd->add_option("--replications", replications, "Number of replications")
      ->check(CLI::Range(std::size_t{1}, std::size_t{1000000}));
  study_cmd->add_option("--seed", study_seed, "Study seed");
  add_fit_flags(study_cmd, study_flags, /*bandwidth_required=*/false);
  study_cmd->add_option("--lattice", study_lattice,
                        "Visit time rounding lattice (0 disables rounding)");
  study_cmd->add_option("--out", study_out, "Output report CSV path")->required();

  // analyze
  auto* analyze_cmd =
      app.add_subcommand("analyze", "Curve fit plus constant-coefficient comparison");
  std::string analyze_data;
  CommonFitFlags analyze_flags;
  std::string analyze_out;
  analyze_cmd->add_option("--data", analyze_data, "Input panel CSV")->required();
  add_fit_flags(analyze_cmd, analyze_flags, /*bandwidth_required=*/true);
  analyze_cmd->add_option("--out", analyze_out, "Output curve CSV path");

  // kernel-info
  auto* kernel_cmd = app.add_subcommand("kernel-info", "Print kernel moment constants");
  std::string kernel_name = "epanechnikov";
  int kernel_degree = 1;
  kernel_cmd->add_option("--kernel", kernel_name, "Kernel family")
      ->check(CLI::IsMember({"epanechnikov", "uniform", "triangular"}));
  kernel_cmd->add_option("--degree", kernel_degree, "Local polynomial degree")
      ->check(CLI::Range(0, 2));

  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  argv.push_back("panelkern");
  for (const std::string& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n';
    return 1;
  }

  try {
    if (simulate_cmd->parsed()) {
      SimulationConfig config = builtin_setting(setting);
      config.n = n;
      config.seed = seed;
      config.max_visits = max_visits;
      config.gap_rate = gap_rate;
      if (lattice.has_value()) config.visit_lattice = *lattice;
      if (censoring) config.censoring = CensoringMode::UniformHalfTau;
      const PanelDataset dataset = generate(config);
      auto file = open_output(out_path);
      emit_csv(dataset, file);
      out << "wrote " << dataset.subjects.size() << " subjects to " << out_path << '\n';
      return 0;
    }

    if (estimate_cmd->parsed()) {
      const PanelDataset dataset = ingest_csv_file(data_path);
      const KernelSpec spec = to_spec(est_flags);
      CurveOptions options;
      options.level = est_flags.level;
      options.threads = est_flags.threads;
      const std::vector<double> grid = make_grid(dataset.tau, est_flags.grid_points);
      const CurveEstimate estimate = estimate_curve(dataset, spec, grid, options);
      auto file = open_output(est_out);
      write_curve_csv(estimate, file);
      const std::size_t converged =
          static_cast<std::size_t>(std::count(estimate.converged.begin(),
                                              estimate.converged.end(), true));
      out << "fitted " << converged << "/" << grid.size() << " grid points; wrote " << est_out
          << '\n';
      return 0;
    }

    if (study_cmd->parsed()) {
      StudyConfig config;
      config.sim = builtin_setting(study_setting);
      config.sim.n = study_n;
      if (study_lattice.has_value()) config.sim.visit_lattice = *study_lattice;
      config.spec = to_spec(study_flags);
      config.grid = make_grid(config.sim.tau, study_flags.grid_points);
      config.replications = replications;
      config.seed = study_seed;
      config.level = study_flags.level;
      config.threads = study_flags.threads;
      const StudyReport report = run_study(config);
      auto file = open_output(study_out);
      write_study_csv(report, file);
      out << "ran " << report.replications << " replications (convergence rate "
          << format_double(report.convergence_rate) << ", "
          << format_double(report.elapsed_seconds) << "s); wrote " << study_out << '\n';
      return 0;
    }

    if (analyze_cmd->parsed()) {
      const PanelDataset dataset = ingest_csv_file(analyze_data);
      const KernelSpec spec = to_spec(analyze_flags);
      CurveOptions options;
      options.level = analyze_flags.level;
      options.threads = analyze_flags.threads;
      const std::vector<double> grid = make_grid(dataset.tau, analyze_flags.grid_points);
      const AnalysisResult result = analyze(dataset, spec, grid, options);
      if (!analyze_out.empty()) {
        auto file = open_output(analyze_out);
        write_curve_csv(result.curve, file);
      }
      out << "constant_beta=" << format_double(result.constant_beta)
          << " constant_se=" << format_double(result.constant_se)
          << " converged=" << (result.constant_converged ? 1 : 0) << '\n';
      if (!analyze_out.empty()) out << "wrote " << analyze_out << '\n';
      return 0;
    }

    if (kernel_cmd->parsed()) {
      KernelSpec spec;
      spec.family = kernel_family_from_name(kernel_name);
      spec.degree = kernel_degree;
      const KernelMoments m = moments(spec);
      out << "kernel=" << kernel_name << " degree=" << kernel_degree << '\n';
      out << "mu2=" << format_double(m.mu2) << '\n';
      out << "nu0=" << format_double(m.nu0) << '\n';
      print_matrix(out, "omega1", m.omega1);
      print_matrix(out, "omega2", m.omega2);
      print_matrix(out, "b", m.b);
      return 0;
    }
  } catch (const ValidationError& e) {
    err << "error: validation: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    err << "error: validation: " << e.what() << '\n';
    return 2;
  } catch (const EstimationError& e) {
    err << "error: estimation: " << e.what() << '\n';
    return 3;
  }
  return 1;
}

}  // namespace panelkern
