#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "panelkern/cli.hpp"
#include "panelkern/errors.hpp"
#include "panelkern/rng.hpp"
#include "panelkern/stats.hpp"
#include "panelkern/study_harness.hpp"

namespace py = pybind11;
using namespace panelkern;

namespace {

Eigen::VectorXd to_dense(const BasisVec& v) { return Eigen::VectorXd(v); }
Eigen::MatrixXd to_dense(const BasisMat& m) { return Eigen::MatrixXd(m); }

BasisVec to_basis(const Eigen::VectorXd& v) {
  if (v.size() > kMaxBasis) throw ValidationError("coefficient vector too long");
  return BasisVec(v);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Local polynomial estimation of time-varying covariate effects in panel count data";

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<EstimationError>(m, "EstimationError", PyExc_RuntimeError);

  py::class_<Subject>(m, "Subject")
      .def(py::init<>())
      .def(py::init([](std::string id, std::vector<double> visit_times,
                       std::vector<long long> cumulative_counts, double covariate,
                       double censor_time) {
             Subject s;
             s.id = std::move(id);
             s.visit_times = std::move(visit_times);
             s.cumulative_counts = std::move(cumulative_counts);
             s.covariate = covariate;
             s.censor_time = censor_time;
             return s;
           }),
           py::arg("id"), py::arg("visit_times"), py::arg("cumulative_counts"),
           py::arg("covariate"), py::arg("censor_time"))
      .def_readwrite("id", &Subject::id)
      .def_readwrite("visit_times", &Subject::visit_times)
      .def_readwrite("cumulative_counts", &Subject::cumulative_counts)
      .def_readwrite("covariate", &Subject::covariate)
      .def_readwrite("censor_time", &Subject::censor_time);

  py::class_<PanelDataset>(m, "PanelDataset")
      .def(py::init<>())
      .def(py::init([](std::vector<Subject> subjects, double tau) {
             PanelDataset d;
             d.subjects = std::move(subjects);
             d.tau = tau;
             return d;
           }),
           py::arg("subjects"), py::arg("tau"))
      .def_readwrite("subjects", &PanelDataset::subjects)
      .def_readwrite("tau", &PanelDataset::tau)
      .def("__len__", [](const PanelDataset& d) { return d.subjects.size(); });

  py::class_<Violation>(m, "Violation")
      .def_readonly("subject_id", &Violation::subject_id)
      .def_readonly("rule", &Violation::rule)
      .def_readonly("detail", &Violation::detail)
      .def("__repr__", [](const Violation& v) { return to_string(v); });

  m.def("validate", &validate, py::arg("dataset"));
  m.def("require_valid", &require_valid, py::arg("dataset"));
  m.def("ingest_csv", &ingest_csv_string, py::arg("text"), py::arg("tau") = std::nullopt);
  m.def("ingest_csv_file", &ingest_csv_file, py::arg("path"), py::arg("tau") = std::nullopt);
  m.def("emit_csv", &emit_csv_string, py::arg("dataset"));

  py::enum_<KernelFamily>(m, "KernelFamily")
      .value("epanechnikov", KernelFamily::Epanechnikov)
      .value("uniform", KernelFamily::Uniform)
      .value("triangular", KernelFamily::Triangular);

  py::class_<KernelSpec>(m, "KernelSpec")
      .def(py::init<>())
      .def(py::init([](const std::string& kernel, double bandwidth, int degree) {
             KernelSpec spec;
             spec.family = kernel_family_from_name(kernel);
             spec.bandwidth = bandwidth;
             spec.degree = degree;
             return spec;
           }),
           py::arg("kernel") = "epanechnikov", py::arg("bandwidth") = 0.5, py::arg("degree") = 1)
      .def_readwrite("family", &KernelSpec::family)
      .def_readwrite("bandwidth", &KernelSpec::bandwidth)
      .def_readwrite("degree", &KernelSpec::degree);

  py::class_<KernelMoments>(m, "KernelMoments")
      .def_readonly("mu2", &KernelMoments::mu2)
      .def_readonly("nu0", &KernelMoments::nu0)
      .def_readonly("omega1", &KernelMoments::omega1)
      .def_readonly("omega2", &KernelMoments::omega2)
      .def_readonly("b", &KernelMoments::b);

  m.def("kernel_value", &kernel_value, py::arg("spec"), py::arg("u"));
  m.def("moments", &moments, py::arg("spec"));
  m.def("moments_by_quadrature", &moments_by_quadrature, py::arg("spec"),
        py::arg("tol") = 1e-13);

  py::class_<LocalFit>(m, "LocalFit")
      .def_property_readonly("beta", [](const LocalFit& f) { return to_dense(f.beta); })
      .def_property_readonly("hessian", [](const LocalFit& f) { return to_dense(f.hessian); })
      .def_readonly("loglik", &LocalFit::loglik)
      .def_readonly("score_norm", &LocalFit::score_norm)
      .def_readonly("iterations", &LocalFit::iterations)
      .def_readonly("converged", &LocalFit::converged)
      .def_readonly("effective_events", &LocalFit::effective_events)
      .def_readonly("target_time", &LocalFit::target_time);

  m.def(
      "fit_at",
      [](const PanelDataset& dataset, double t, const KernelSpec& spec) {
        return fit_at(dataset, t, spec);
      },
      py::arg("dataset"), py::arg("t"), py::arg("spec"));
  m.def(
      "loglik",
      [](const PanelDataset& dataset, double t, const KernelSpec& spec,
         const Eigen::VectorXd& beta) {
        return loglik(build_design(dataset, t, spec), to_basis(beta));
      },
      py::arg("dataset"), py::arg("t"), py::arg("spec"), py::arg("beta"));
  m.def(
      "score",
      [](const PanelDataset& dataset, double t, const KernelSpec& spec,
         const Eigen::VectorXd& beta) {
        return to_dense(score(build_design(dataset, t, spec), to_basis(beta)));
      },
      py::arg("dataset"), py::arg("t"), py::arg("spec"), py::arg("beta"));
  m.def(
      "hessian",
      [](const PanelDataset& dataset, double t, const KernelSpec& spec,
         const Eigen::VectorXd& beta) {
        return to_dense(hessian(build_design(dataset, t, spec), to_basis(beta)));
      },
      py::arg("dataset"), py::arg("t"), py::arg("spec"), py::arg("beta"));

  py::class_<StepFunction>(m, "StepFunction")
      .def("__call__", &StepFunction::operator(), py::arg("t"))
      .def("knot_at", &StepFunction::knot_at, py::arg("t"))
      .def_property_readonly("knots", &StepFunction::knots)
      .def_property_readonly("values", &StepFunction::values);

  m.def("baseline_at", &baseline_at, py::arg("dataset"), py::arg("beta_at"), py::arg("t"));
  m.def("pooled_visit_times", &pooled_visit_times, py::arg("dataset"));
  m.def("baseline_step", &baseline_step, py::arg("dataset"), py::arg("beta_at"));

  m.def(
      "optimal_bandwidth",
      [](const std::function<double(double)>& sigma1, const std::function<double(double)>& sigma2,
         const std::function<double(double)>& beta_second_derivative,
         const std::function<double(double)>& weight, double tau, std::size_t n,
         const KernelSpec& spec) {
        return optimal_bandwidth(sigma1, sigma2, beta_second_derivative, weight, tau, n, spec);
      },
      py::arg("sigma1"), py::arg("sigma2"), py::arg("beta_second_derivative"), py::arg("weight"),
      py::arg("tau"), py::arg("n"), py::arg("spec"));

  py::class_<CurveEstimate>(m, "CurveEstimate")
      .def_readonly("grid", &CurveEstimate::grid)
      .def_readonly("beta_hat", &CurveEstimate::beta_hat)
      .def_readonly("se", &CurveEstimate::se)
      .def_readonly("ci_lower", &CurveEstimate::ci_lower)
      .def_readonly("ci_upper", &CurveEstimate::ci_upper)
      .def_readonly("derivative_hat", &CurveEstimate::derivative_hat)
      .def_readonly("effective_events", &CurveEstimate::effective_events)
      .def_readonly("converged", &CurveEstimate::converged)
      .def_readonly("boundary", &CurveEstimate::boundary)
      .def_readonly("mu0_hat", &CurveEstimate::mu0_hat)
      .def_readonly("mu0_eval_time", &CurveEstimate::mu0_eval_time)
      .def_readonly("mu0_step", &CurveEstimate::mu0_step)
      .def_readonly("n_subjects", &CurveEstimate::n_subjects)
      .def_readonly("bandwidth", &CurveEstimate::bandwidth)
      .def_readonly("degree", &CurveEstimate::degree)
      .def_readonly("level", &CurveEstimate::level)
      .def("csv", [](const CurveEstimate& e) { return curve_csv_string(e); });

  m.def(
      "estimate_curve",
      [](const PanelDataset& dataset, const KernelSpec& spec, const std::vector<double>& grid,
         double level, int threads) {
        CurveOptions options;
        options.level = level;
        options.threads = threads;
        return estimate_curve(dataset, spec, grid, options);
      },
      py::arg("dataset"), py::arg("spec"), py::arg("grid"), py::arg("level") = 0.95,
      py::arg("threads") = 1);

  py::enum_<CensoringMode>(m, "CensoringMode")
      .value("none", CensoringMode::None)
      .value("uniform_half_tau", CensoringMode::UniformHalfTau);

  py::class_<SimulationTruth>(m, "SimulationTruth")
      .def(py::init<>())
      .def_readwrite("mu0", &SimulationTruth::mu0)
      .def_readwrite("beta", &SimulationTruth::beta);

  py::class_<SimulationConfig>(m, "SimulationConfig")
      .def(py::init<>())
      .def_readwrite("n", &SimulationConfig::n)
      .def_readwrite("max_visits", &SimulationConfig::max_visits)
      .def_readwrite("tau", &SimulationConfig::tau)
      .def_readwrite("gap_rate", &SimulationConfig::gap_rate)
      .def_readwrite("visit_lattice", &SimulationConfig::visit_lattice)
      .def_readwrite("covariate_lo", &SimulationConfig::covariate_lo)
      .def_readwrite("covariate_hi", &SimulationConfig::covariate_hi)
      .def_readwrite("censoring", &SimulationConfig::censoring)
      .def_readwrite("truth", &SimulationConfig::truth)
      .def_readwrite("seed", &SimulationConfig::seed);

  m.def("generate", &generate, py::arg("config"));
  m.def("builtin_setting", &builtin_setting, py::arg("which"));

  py::class_<StudyConfig>(m, "StudyConfig")
      .def(py::init<>())
      .def_readwrite("sim", &StudyConfig::sim)
      .def_readwrite("spec", &StudyConfig::spec)
      .def_readwrite("grid", &StudyConfig::grid)
      .def_readwrite("replications", &StudyConfig::replications)
      .def_readwrite("seed", &StudyConfig::seed)
      .def_readwrite("level", &StudyConfig::level)
      .def_readwrite("threads", &StudyConfig::threads)
      .def_readwrite("min_convergence", &StudyConfig::min_convergence);

  py::class_<GridSummary>(m, "GridSummary")
      .def_readonly("t", &GridSummary::t)
      .def_readonly("truth_beta", &GridSummary::truth_beta)
      .def_readonly("mean_beta", &GridSummary::mean_beta)
      .def_readonly("bias", &GridSummary::bias)
      .def_readonly("ese", &GridSummary::ese)
      .def_readonly("mean_se", &GridSummary::mean_se)
      .def_readonly("coverage", &GridSummary::coverage)
      .def_readonly("mean_mu0", &GridSummary::mean_mu0)
      .def_readonly("truth_mu0", &GridSummary::truth_mu0)
      .def_readonly("mu0_eval_time", &GridSummary::mu0_eval_time)
      .def_readonly("converged_count", &GridSummary::converged_count)
      .def_readonly("se_count", &GridSummary::se_count);

  py::class_<StudyReport>(m, "StudyReport")
      .def_readonly("rows", &StudyReport::rows)
      .def_readonly("replications", &StudyReport::replications)
      .def_readonly("failed_replications", &StudyReport::failed_replications)
      .def_readonly("convergence_rate", &StudyReport::convergence_rate)
      .def_readonly("n_subjects", &StudyReport::n_subjects)
      .def_readonly("bandwidth", &StudyReport::bandwidth)
      .def_readonly("degree", &StudyReport::degree)
      .def_readonly("kernel", &StudyReport::kernel)
      .def_readonly("seed", &StudyReport::seed)
      .def_readonly("level", &StudyReport::level)
      .def_readonly("elapsed_seconds", &StudyReport::elapsed_seconds)
      .def("csv", [](const StudyReport& r) { return study_csv_string(r); });

  m.def("run_study", &run_study, py::arg("config"));

  py::class_<AnalysisResult>(m, "AnalysisResult")
      .def_readonly("curve", &AnalysisResult::curve)
      .def_readonly("constant_beta", &AnalysisResult::constant_beta)
      .def_readonly("constant_se", &AnalysisResult::constant_se)
      .def_readonly("constant_iterations", &AnalysisResult::constant_iterations)
      .def_readonly("constant_converged", &AnalysisResult::constant_converged);

  m.def(
      "analyze",
      [](const PanelDataset& dataset, const KernelSpec& spec, const std::vector<double>& grid,
         double level, int threads) {
        CurveOptions options;
        options.level = level;
        options.threads = threads;
        return analyze(dataset, spec, grid, options);
      },
      py::arg("dataset"), py::arg("spec"), py::arg("grid"), py::arg("level") = 0.95,
      py::arg("threads") = 1);

  m.def("make_grid", &make_grid, py::arg("tau"), py::arg("points"));
  m.def("normal_quantile", &normal_quantile, py::arg("p"));
  m.def("mix64", &mix64, py::arg("x"));

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        const int code = run_cli(args, out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"));
}
