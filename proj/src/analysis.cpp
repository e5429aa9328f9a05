#include "marginlab/analysis.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "marginlab/errors.hpp"

namespace marginlab {

SnrReport decompose(const NetworkWeights& net, const Eigen::VectorXd& v) {
  if (net.W.cols() != v.size()) throw ParameterError("weight/signal dimension mismatch");
  SnrReport report;
  report.a = net.W * v;
  report.Z = net.W - report.a * v.transpose();
  const int width = static_cast<int>(net.W.rows());
  if (net.m == 1 && net.alpha == 1.0 && width == 2) {
    const double scale = std::max(1.0, net.W.row(1).norm());
    if ((net.W.row(0) + net.W.row(1)).norm() <= 1e-9 * scale) {
      report.a_v = report.a(1);
      report.z_linear = report.Z.row(1).transpose();
    }
  }
  return report;
}

SignalActivations signal_activations(const NetworkWeights& net, const Eigen::VectorXd& v) {
  const Eigen::VectorXd a = net.W * v;
  SignalActivations act;
  for (Eigen::Index j = 0; j < a.size(); ++j) {
    const double s = neuron_sign(static_cast<int>(j));
    act.A_plus += s * leaky_relu(a(j), net.alpha);
    act.A_minus += -s * leaky_relu(-a(j), net.alpha);
    act.A_lin += s * a(j);
  }
  act.A_min = std::min(act.A_plus, act.A_minus);
  return act;
}

void noise_aggregates(SnrReport& report) {
  const int width = static_cast<int>(report.Z.rows());
  report.z_lin = Eigen::VectorXd::Zero(report.Z.cols());
  for (int j = 0; j < width; ++j) report.z_lin += neuron_sign(j) * report.Z.row(j).transpose();
  report.z_lin_norm = report.z_lin.norm();
  report.Z_frobenius = report.Z.norm();
}

double margin_ratio(const NetworkWeights& net, double w_star_norm) {
  if (!(w_star_norm > 0.0)) throw ParameterError("max-margin norm must be positive");
  return net.W.norm() / w_star_norm;
}

SnrReport snr_report(const NetworkWeights& net, const Eigen::VectorXd& v,
                     std::optional<double> w_star_norm) {
  SnrReport report = decompose(net, v);
  report.activations = signal_activations(net, v);
  noise_aggregates(report);
  if (w_star_norm) report.margin_ratio = margin_ratio(net, *w_star_norm);
  return report;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

LinearErrorBounds linear_error_closed_form(double a_v, double z_norm, double gamma, int d) {
  if (d < 1) throw ParameterError("d must be >= 1");
  if (!(gamma >= 0.0 && gamma < 1.0)) {
    throw ParameterError("gamma must lie in [0, 1); the deterministic case is the z_norm = 0 path");
  }
  if (z_norm < 0.0) throw ParameterError("z_norm must be nonnegative");
  LinearErrorBounds out;
  if (z_norm == 0.0) {
    out.exact = a_v > 0.0 ? 0.0 : (a_v < 0.0 ? 1.0 : 0.5);
    out.hoeffding_upper = a_v == 0.0 ? 1.0 : 0.0;
    out.anticoncentration_lower = a_v > 0.0 ? 0.0 : (a_v < 0.0 ? 1.0 : 0.5);
    return out;
  }
  const double u = std::sqrt(gamma * static_cast<double>(d) / (1.0 - gamma)) * a_v / z_norm;
  out.exact = normal_cdf(-u);
  out.hoeffding_upper = std::min(1.0, std::exp(-0.5 * u * u));
  out.anticoncentration_lower = std::clamp(0.5 - u / std::sqrt(2.0 * M_PI), 0.0, 1.0);
  return out;
}

ErrorEstimate mc_generalization_error(const NetworkWeights& net, const DataModelParams& params,
                                      long long trials, PhiloxRng& rng) {
  if (trials < 1) throw ParameterError("trials must be >= 1");
  long long errors = 0;
  for (long long t = 0; t < trials; ++t) {
    const TestPoint tp = sample_test_point(params, rng);
    if (static_cast<double>(tp.y) * forward(net, tp.x) <= 0.0) ++errors;
  }
  ErrorEstimate est;
  est.trials = trials;
  est.estimate = static_cast<double>(errors) / static_cast<double>(trials);
  est.std_error = std::sqrt(est.estimate * (1.0 - est.estimate) / static_cast<double>(trials));
  est.method = "mc";
  return est;
}

const char* to_string(Outcome outcome) {
  switch (outcome) {
    case Outcome::Benign: return "Benign";
    case Outcome::Harmful: return "Harmful";
    case Outcome::Interpolating: return "Interpolating";
    default: return "NonInterpolating";
  }
}

Outcome outcome_from_string(const std::string& s) {
  if (s == "Benign") return Outcome::Benign;
  if (s == "Harmful") return Outcome::Harmful;
  if (s == "Interpolating") return Outcome::Interpolating;
  if (s == "NonInterpolating") return Outcome::NonInterpolating;
  throw ParameterError("unknown outcome: " + s);
}

Outcome classify_outcome(double final_train_loss, const ErrorEstimate& estimate, double epsilon,
                         double band) {
  if (!(epsilon > 0.0 && epsilon < 0.5)) throw ParameterError("epsilon must lie in (0, 0.5)");
  if (!(band > 0.0)) throw ParameterError("band must be positive");
  if (final_train_loss > 0.0) return Outcome::NonInterpolating;
  if (estimate.estimate + band * estimate.std_error <= epsilon) return Outcome::Benign;
  if (estimate.estimate - band * estimate.std_error >= 0.125) return Outcome::Harmful;
  return Outcome::Interpolating;
}

std::string snr_report_to_json(const SnrReport& report) {
  nlohmann::json j;
  j["a"] = std::vector<double>(report.a.data(), report.a.data() + report.a.size());
  j["A_plus"] = report.activations.A_plus;
  j["A_minus"] = report.activations.A_minus;
  j["A_min"] = report.activations.A_min;
  j["A_lin"] = report.activations.A_lin;
  j["z_lin_norm"] = report.z_lin_norm;
  j["Z_frobenius"] = report.Z_frobenius;
  if (report.margin_ratio) j["margin_ratio"] = *report.margin_ratio;
  if (report.a_v) j["a_v"] = *report.a_v;
  return j.dump();
}

std::string error_estimate_to_json(const ErrorEstimate& estimate) {
  nlohmann::json j;
  j["estimate"] = estimate.estimate;
  j["std_error"] = estimate.std_error;
  j["trials"] = estimate.trials;
  j["method"] = estimate.method;
  return j.dump();
}

}  // namespace marginlab
