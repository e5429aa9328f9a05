#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>

#include "marginlab/datamodel.hpp"
#include "marginlab/network.hpp"

namespace marginlab {

// Per-neuron activations along the signal direction, with A_s = s * f(W, s v):
//   A_+1 = sum_j (-1)^j sigma(a_j),  A_-1 = sum_j (-1)^{j+1} sigma(-a_j).
struct SignalActivations {
  double A_plus = 0.0;   // A_{+1}
  double A_minus = 0.0;  // A_{-1}
  double A_min = 0.0;    // min of the two
  double A_lin = 0.0;    // sum_j (-1)^j a_j
};

// Signal/noise split of the weights: w_j = a_j v + z_j with z_j orthogonal
// to v.  The linear fields a_v / z_linear are set only for the linear
// emulation (m = 1, alpha = 1, w_1 = -w_2).
struct SnrReport {
  Eigen::VectorXd a;  // 2m
  Eigen::MatrixXd Z;  // 2m x d
  SignalActivations activations;
  Eigen::VectorXd z_lin;  // sum_j (-1)^j z_j
  double z_lin_norm = 0.0;
  double Z_frobenius = 0.0;
  std::optional<double> margin_ratio;
  std::optional<double> a_v;
  std::optional<Eigen::VectorXd> z_linear;
};

SnrReport decompose(const NetworkWeights& net, const Eigen::VectorXd& v);
SignalActivations signal_activations(const NetworkWeights& net, const Eigen::VectorXd& v);
void noise_aggregates(SnrReport& report);

// Frobenius norm of W over the max-margin norm.
double margin_ratio(const NetworkWeights& net, double w_star_norm);

// decompose + activations + aggregates (+ margin ratio when a norm is given).
SnrReport snr_report(const NetworkWeights& net, const Eigen::VectorXd& v,
                     std::optional<double> w_star_norm = std::nullopt);

double normal_cdf(double x);

// Test error of the linear classifier w = a_v v + z on clean test data:
//   exact        P(y <w,x> <= 0) = Phi(-sqrt(gamma d / (1-gamma)) a_v / |z|)
//   upper        exp(-gamma d a_v^2 / (2 (1-gamma) |z|^2))      (a_v >= 0)
//   lower        1/2 - sqrt(d gamma / (2 pi (1-gamma))) a_v/|z| (a_v >= 0)
// The deterministic z = 0 classifier errs never/always/half by sign(a_v).
struct LinearErrorBounds {
  double exact = 0.0;
  double hoeffding_upper = 0.0;
  double anticoncentration_lower = 0.0;
};
LinearErrorBounds linear_error_closed_form(double a_v, double z_norm, double gamma, int d);

struct ErrorEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
  long long trials = 0;
  std::string method;
};

// Fraction of fresh test points with y f(W, x) <= 0 (ties count as errors),
// with the binomial standard error.
ErrorEstimate mc_generalization_error(const NetworkWeights& net, const DataModelParams& params,
                                      long long trials, PhiloxRng& rng);

enum class Outcome { Benign, Harmful, Interpolating, NonInterpolating };
const char* to_string(Outcome outcome);
Outcome outcome_from_string(const std::string& s);

// NonInterpolating if training loss is nonzero; else Benign when the
// estimate is below epsilon and Harmful when above 1/8, both judged at
// `band` standard errors; Interpolating when neither call is clear.
Outcome classify_outcome(double final_train_loss, const ErrorEstimate& estimate, double epsilon,
                         double band = 2.0);

std::string snr_report_to_json(const SnrReport& report);
std::string error_estimate_to_json(const ErrorEstimate& estimate);

}  // namespace marginlab
