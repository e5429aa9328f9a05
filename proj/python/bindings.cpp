#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>

#include "marginlab/analysis.hpp"
#include "marginlab/datamodel.hpp"
#include "marginlab/harness.hpp"
#include "marginlab/maxmargin.hpp"
#include "marginlab/network.hpp"
#include "marginlab/oracles.hpp"
#include "marginlab/report.hpp"
#include "marginlab/rng.hpp"

namespace py = pybind11;
using namespace marginlab;

PYBIND11_MODULE(_core, mod) {
  mod.doc() = "max-margin overfitting laboratory";

  py::register_exception<ParameterError>(mod, "ParameterError", PyExc_ValueError);
  py::register_exception<SingularMatrixError>(mod, "SingularMatrixError", PyExc_RuntimeError);
  py::register_exception<InfeasibleError>(mod, "InfeasibleError", PyExc_RuntimeError);
  py::register_exception<NonCertifiedError>(mod, "NonCertifiedError", PyExc_RuntimeError);

  // rng
  py::class_<PhiloxRng>(mod, "PhiloxRng")
      .def(py::init<std::uint64_t, std::uint64_t>(), py::arg("seed") = 0, py::arg("stream") = 0)
      .def("next_u64", [](PhiloxRng& r) { return r(); })
      .def("below", &PhiloxRng::below, py::arg("bound"))
      .def("uniform01", &PhiloxRng::uniform01)
      .def("normal", &PhiloxRng::normal);
  mod.def("mix64", &mix64, py::arg("x"));
  mod.def(
      "substream",
      [](std::uint64_t seed, const std::string& purpose, std::uint64_t index) {
        return substream(seed, purpose, index);
      },
      py::arg("seed"), py::arg("purpose"), py::arg("index") = 0);

  // data model
  py::enum_<CorruptionMode>(mod, "CorruptionMode")
      .value("IidLabels", CorruptionMode::IidLabels)
      .value("BalancedLabels", CorruptionMode::BalancedLabels);
  py::class_<DataModelParams>(mod, "DataModelParams")
      .def(py::init<>())
      .def_readwrite("d", &DataModelParams::d)
      .def_readwrite("n", &DataModelParams::n)
      .def_readwrite("k", &DataModelParams::k)
      .def_readwrite("gamma", &DataModelParams::gamma)
      .def_readwrite("v", &DataModelParams::v)
      .def_readwrite("mode", &DataModelParams::mode)
      .def_readwrite("seed", &DataModelParams::seed);
  py::class_<Dataset>(mod, "Dataset")
      .def_readonly("params", &Dataset::params)
      .def_readonly("X", &Dataset::X)
      .def_readonly("N", &Dataset::N)
      .def_readonly("y_true", &Dataset::y_true)
      .def_readonly("y_obs", &Dataset::y_obs)
      .def_readonly("corrupt_set", &Dataset::corrupt_set)
      .def_readonly("beta", &Dataset::beta);
  py::class_<TestPoint>(mod, "TestPoint")
      .def_readonly("x", &TestPoint::x)
      .def_readonly("y", &TestPoint::y);
  mod.def("validated", &validated, py::arg("params"));
  mod.def("sample_dataset", &sample_dataset, py::arg("params"));
  mod.def("sample_test_point", &sample_test_point, py::arg("params"), py::arg("rng"));
  mod.def("dataset_to_json", &dataset_to_json, py::arg("data"));
  mod.def("dataset_from_json", &dataset_from_json, py::arg("text"));

  // network
  py::class_<NetworkWeights>(mod, "NetworkWeights")
      .def(py::init<>())
      .def_readwrite("W", &NetworkWeights::W)
      .def_readwrite("m", &NetworkWeights::m)
      .def_readwrite("alpha", &NetworkWeights::alpha);
  py::class_<Hyperparams>(mod, "Hyperparams")
      .def_readonly("eta", &Hyperparams::eta)
      .def_readonly("lambda_", &Hyperparams::lambda);
  py::enum_<InitMode>(mod, "InitMode")
      .value("Zero", InitMode::Zero)
      .value("UniformBall", InitMode::UniformBall);
  py::class_<TrainConfig>(mod, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("eta", &TrainConfig::eta)
      .def_readwrite("init_scale", &TrainConfig::init_scale)
      .def_readwrite("init_mode", &TrainConfig::init_mode)
      .def_readwrite("max_iters", &TrainConfig::max_iters)
      .def_readwrite("record_trace", &TrainConfig::record_trace)
      .def_readwrite("seed", &TrainConfig::seed);
  py::class_<TrainTrace>(mod, "TrainTrace")
      .def_readonly("T", &TrainTrace::T)
      .def_readonly("converged", &TrainTrace::converged)
      .def_readonly("final_loss", &TrainTrace::final_loss)
      .def_readonly("eta", &TrainTrace::eta)
      .def_readonly("alpha", &TrainTrace::alpha)
      .def_readonly("m", &TrainTrace::m)
      .def_readonly("W0", &TrainTrace::W0)
      .def_readonly("w_star", &TrainTrace::w_star)
      .def_readonly("detailed", &TrainTrace::detailed)
      .def_readonly("active_counts", &TrainTrace::active_counts)
      .def_readonly("G", &TrainTrace::G)
      .def_readonly("F_align", &TrainTrace::F_align)
      .def_readonly("U", &TrainTrace::U)
      .def_readonly("active_sets", &TrainTrace::active_sets)
      .def_readonly("counters", &TrainTrace::counters);
  mod.def("forward", &forward, py::arg("net"), py::arg("x"));
  mod.def("training_loss", &training_loss, py::arg("net"), py::arg("data"));
  mod.def("default_hyperparams", &default_hyperparams, py::arg("data"), py::arg("m"),
          py::arg("alpha"));
  mod.def("default_max_iters", &default_max_iters, py::arg("data"), py::arg("m"),
          py::arg("alpha"), py::arg("eta"));
  mod.def("train", &train, py::arg("data"), py::arg("m"), py::arg("alpha"),
          py::arg("config") = TrainConfig{}, py::arg("w_star") = std::nullopt);
  mod.def("trace_to_jsonl", &trace_to_jsonl, py::arg("trace"));
  mod.def("weights_to_json", &weights_to_json, py::arg("net"));
  mod.def("weights_from_json", &weights_from_json, py::arg("text"));

  // max margin
  py::class_<MaxMarginConfig>(mod, "MaxMarginConfig")
      .def(py::init<>())
      .def_readwrite("kkt_tol", &MaxMarginConfig::kkt_tol)
      .def_readwrite("max_sweeps", &MaxMarginConfig::max_sweeps);
  py::class_<MaxMarginSolution>(mod, "MaxMarginSolution")
      .def_readonly("w_star", &MaxMarginSolution::w_star)
      .def_readonly("norm", &MaxMarginSolution::norm)
      .def_readonly("margins", &MaxMarginSolution::margins)
      .def_readonly("dual_coeffs", &MaxMarginSolution::dual_coeffs)
      .def_readonly("support_set", &MaxMarginSolution::support_set)
      .def_readonly("kkt_residual", &MaxMarginSolution::kkt_residual)
      .def_readonly("sweeps", &MaxMarginSolution::sweeps);
  mod.def(
      "solve_max_margin",
      [](const Dataset& data, const MaxMarginConfig& config) {
        return solve_max_margin(data, config);
      },
      py::arg("data"), py::arg("config") = MaxMarginConfig{});
  mod.def(
      "solve_max_margin",
      [](const Eigen::MatrixXd& X, const Eigen::VectorXi& y_obs, const MaxMarginConfig& config) {
        return solve_max_margin(X, y_obs, config);
      },
      py::arg("X"), py::arg("y_obs"), py::arg("config") = MaxMarginConfig{});
  mod.def("least_norm_noise_interpolator", &least_norm_noise_interpolator, py::arg("N"),
          py::arg("y_obs"), py::arg("I"));
  py::enum_<BoundKind>(mod, "BoundKind")
      .value("SignalPlusNoise", BoundKind::SignalPlusNoise)
      .value("NoiseOnly", BoundKind::NoiseOnly);
  py::class_<InterpolatorBound>(mod, "InterpolatorBound")
      .def_readonly("kind", &InterpolatorBound::kind)
      .def_readonly("w_tilde", &InterpolatorBound::w_tilde)
      .def_readonly("norm", &InterpolatorBound::norm)
      .def_readonly("margins", &InterpolatorBound::margins)
      .def_readonly("z", &InterpolatorBound::z);
  mod.def("build_signal_plus_noise_bound", &build_signal_plus_noise_bound, py::arg("data"));
  mod.def("build_noise_only_bound", &build_noise_only_bound, py::arg("data"));
  mod.def("maxmargin_to_json", &maxmargin_to_json, py::arg("solution"));
  mod.def("maxmargin_from_json", &maxmargin_from_json, py::arg("text"));

  // analysis
  py::class_<SignalActivations>(mod, "SignalActivations")
      .def_readonly("A_plus", &SignalActivations::A_plus)
      .def_readonly("A_minus", &SignalActivations::A_minus)
      .def_readonly("A_min", &SignalActivations::A_min)
      .def_readonly("A_lin", &SignalActivations::A_lin);
  py::class_<SnrReport>(mod, "SnrReport")
      .def_readonly("a", &SnrReport::a)
      .def_readonly("Z", &SnrReport::Z)
      .def_readonly("activations", &SnrReport::activations)
      .def_readonly("z_lin", &SnrReport::z_lin)
      .def_readonly("z_lin_norm", &SnrReport::z_lin_norm)
      .def_readonly("Z_frobenius", &SnrReport::Z_frobenius)
      .def_readonly("margin_ratio", &SnrReport::margin_ratio)
      .def_readonly("a_v", &SnrReport::a_v)
      .def_readonly("z_linear", &SnrReport::z_linear);
  mod.def("decompose", &decompose, py::arg("net"), py::arg("v"));
  mod.def("signal_activations", &signal_activations, py::arg("net"), py::arg("v"));
  mod.def("margin_ratio", &margin_ratio, py::arg("net"), py::arg("w_star_norm"));
  mod.def("snr_report", &snr_report, py::arg("net"), py::arg("v"),
          py::arg("w_star_norm") = std::nullopt);
  mod.def("normal_cdf", &normal_cdf, py::arg("x"));
  py::class_<LinearErrorBounds>(mod, "LinearErrorBounds")
      .def_readonly("exact", &LinearErrorBounds::exact)
      .def_readonly("hoeffding_upper", &LinearErrorBounds::hoeffding_upper)
      .def_readonly("anticoncentration_lower", &LinearErrorBounds::anticoncentration_lower);
  mod.def("linear_error_closed_form", &linear_error_closed_form, py::arg("a_v"),
          py::arg("z_norm"), py::arg("gamma"), py::arg("d"));
  py::class_<ErrorEstimate>(mod, "ErrorEstimate")
      .def(py::init<>())
      .def_readwrite("estimate", &ErrorEstimate::estimate)
      .def_readwrite("std_error", &ErrorEstimate::std_error)
      .def_readwrite("trials", &ErrorEstimate::trials)
      .def_readwrite("method", &ErrorEstimate::method);
  mod.def("mc_generalization_error", &mc_generalization_error, py::arg("net"), py::arg("params"),
          py::arg("trials"), py::arg("rng"));
  py::enum_<Outcome>(mod, "Outcome")
      .value("Benign", Outcome::Benign)
      .value("Harmful", Outcome::Harmful)
      .value("Interpolating", Outcome::Interpolating)
      .value("NonInterpolating", Outcome::NonInterpolating);
  mod.def("classify_outcome", &classify_outcome, py::arg("final_train_loss"),
          py::arg("estimate"), py::arg("epsilon"), py::arg("band") = 2.0);
  mod.def("snr_report_to_json", &snr_report_to_json, py::arg("report"));
  mod.def("error_estimate_to_json", &error_estimate_to_json, py::arg("estimate"));

  // oracles
  py::class_<SingularValueReport>(mod, "SingularValueReport")
      .def_readonly("sigma_max", &SingularValueReport::sigma_max)
      .def_readonly("sigma_min", &SingularValueReport::sigma_min)
      .def_readonly("n", &SingularValueReport::n)
      .def_readonly("d", &SingularValueReport::d);
  mod.def("noise_singular_values", &noise_singular_values, py::arg("N"));
  py::class_<LemmaCheckResult>(mod, "LemmaCheckResult")
      .def_readonly("lemma_id", &LemmaCheckResult::lemma_id)
      .def_readonly("trials", &LemmaCheckResult::trials)
      .def_readonly("pass_count", &LemmaCheckResult::pass_count)
      .def_readonly("worst_violation", &LemmaCheckResult::worst_violation)
      .def_readonly("passed", &LemmaCheckResult::pass)
      .def_readonly("details", &LemmaCheckResult::details);
  mod.def(
      "check_balance",
      [](const Eigen::VectorXi& labels, const std::vector<int>& I) {
        return check_balance(labels, I);
      },
      py::arg("labels"), py::arg("I"));
  mod.def(
      "check_interpolator_identities",
      [](const Dataset& data, const InterpolatorBound& bound,
         std::optional<MaxMarginSolution> solution) {
        return check_interpolator_identities(data, bound, solution ? &*solution : nullptr);
      },
      py::arg("data"), py::arg("bound"), py::arg("solution") = std::nullopt);
  mod.def("check_training_bookkeeping", &check_training_bookkeeping, py::arg("trace"),
          py::arg("data"), py::arg("v"));
  mod.def("lemma_check_to_json", &lemma_check_to_json, py::arg("result"));

  // harness
  py::class_<ExperimentSpec>(mod, "ExperimentSpec")
      .def(py::init<>())
      .def_readwrite("params", &ExperimentSpec::params)
      .def_readwrite("m", &ExperimentSpec::m)
      .def_readwrite("alpha", &ExperimentSpec::alpha)
      .def_readwrite("train", &ExperimentSpec::train)
      .def_readwrite("mc_trials", &ExperimentSpec::mc_trials)
      .def_readwrite("epsilon", &ExperimentSpec::epsilon)
      .def_readwrite("repeats", &ExperimentSpec::repeats)
      .def_readwrite("delta_note", &ExperimentSpec::delta_note);
  py::class_<ExperimentResult>(mod, "ExperimentResult")
      .def(py::init<>())
      .def_readwrite("cell_index", &ExperimentResult::cell_index)
      .def_readwrite("repeat", &ExperimentResult::repeat)
      .def_readwrite("d", &ExperimentResult::d)
      .def_readwrite("n", &ExperimentResult::n)
      .def_readwrite("k", &ExperimentResult::k)
      .def_readwrite("gamma", &ExperimentResult::gamma)
      .def_readwrite("m", &ExperimentResult::m)
      .def_readwrite("alpha", &ExperimentResult::alpha)
      .def_readwrite("eta", &ExperimentResult::eta)
      .def_readwrite("seed", &ExperimentResult::seed)
      .def_readwrite("converged", &ExperimentResult::converged)
      .def_readwrite("T", &ExperimentResult::T)
      .def_readwrite("train_loss", &ExperimentResult::train_loss)
      .def_readwrite("w_star_norm", &ExperimentResult::w_star_norm)
      .def_readwrite("margin_ratio", &ExperimentResult::margin_ratio)
      .def_readwrite("A_min", &ExperimentResult::A_min)
      .def_readwrite("A_lin", &ExperimentResult::A_lin)
      .def_readwrite("Z_frobenius", &ExperimentResult::Z_frobenius)
      .def_readwrite("z_lin_norm", &ExperimentResult::z_lin_norm)
      .def_readwrite("test_error", &ExperimentResult::test_error)
      .def_readwrite("test_stderr", &ExperimentResult::test_stderr)
      .def_readwrite("outcome", &ExperimentResult::outcome)
      .def_readwrite("wall_time_s", &ExperimentResult::wall_time_s)
      .def_readwrite("kkt_residual", &ExperimentResult::kkt_residual);
  mod.def("derive_seed", &derive_seed, py::arg("base"), py::arg("cell_index"), py::arg("repeat"));
  mod.def("run_single", &run_single, py::arg("spec"), py::arg("cell_index") = 0,
          py::arg("repeat") = 0, py::arg("artifact_dir") = std::string());
  mod.def("run_experiment", &run_experiment, py::arg("spec"),
          py::arg("artifact_dir") = std::string());
  py::class_<SweepSpec>(mod, "SweepSpec")
      .def(py::init<>())
      .def_readwrite("grid", &SweepSpec::grid)
      .def_readwrite("base", &SweepSpec::base)
      .def_readwrite("parallelism", &SweepSpec::parallelism)
      .def_readwrite("output_path", &SweepSpec::output_path)
      .def_readwrite("max_cells", &SweepSpec::max_cells);
  py::class_<SweepTable>(mod, "SweepTable")
      .def_readonly("spec", &SweepTable::spec)
      .def_readonly("rows", &SweepTable::rows);
  mod.def("run_sweep", &run_sweep, py::arg("spec"), py::arg("checkpoint_path") = std::string(),
          py::call_guard<py::gil_scoped_release>());
  mod.def("cell_spec", &cell_spec, py::arg("spec"), py::arg("cell_index"));
  mod.def("sweep_cell_count", &sweep_cell_count, py::arg("spec"));
  mod.def("experiment_result_to_json", &experiment_result_to_json, py::arg("result"));
  mod.def("experiment_result_from_json", &experiment_result_from_json, py::arg("text"));
  mod.def("experiment_spec_from_json", &experiment_spec_from_json, py::arg("text"));
  mod.def("sweep_spec_from_json", &sweep_spec_from_json, py::arg("text"));

  // report
  mod.def("table_to_csv", &table_to_csv, py::arg("rows"));
  mod.def("table_from_csv", &table_from_csv, py::arg("text"));
  mod.def("heatmap_svg", &heatmap_svg, py::arg("rows"), py::arg("epsilon"));
  mod.def("summary_text", &summary_text, py::arg("rows"));
}
