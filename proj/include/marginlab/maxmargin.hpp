#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <vector>

#include "marginlab/datamodel.hpp"
#include "marginlab/errors.hpp"

namespace marginlab {

// Minimum-norm separator: argmin |w| subject to y_obs_i <w, x_i> >= 1.
// Solved in the dual by coordinate ascent plus an active-set polish; the KKT
// certificate, not the solve path, defines success.
struct MaxMarginSolution {
  Eigen::VectorXd w_star;
  double norm = 0.0;
  Eigen::VectorXd margins;      // y_obs_i <w_star, x_i>
  Eigen::VectorXd dual_coeffs;  // lambda >= 0 with w_star = X^T (lambda .* y_obs)
  std::vector<int> support_set; // indices with margin within kkt_tol of 1
  double kkt_residual = 0.0;
  long long sweeps = 0;         // dual coordinate epochs consumed
};

struct MaxMarginConfig {
  double kkt_tol = 1e-8;
  long long max_sweeps = 50000;
};

// No separator exists; carries the Farkas-style certificate nu >= 0 with
// sum(nu) = 1 and X^T (nu .* y_obs) numerically zero.
class InfeasibleError : public std::runtime_error {
 public:
  InfeasibleError(const std::string& what, Eigen::VectorXd certificate, double residual)
      : std::runtime_error(what), certificate(std::move(certificate)), residual(residual) {}
  Eigen::VectorXd certificate;
  double residual;
};

// Budget exhausted without meeting the KKT tolerance and without an
// infeasibility certificate; carries the best iterate found.
class NonCertifiedError : public std::runtime_error {
 public:
  NonCertifiedError(const std::string& what, MaxMarginSolution best)
      : std::runtime_error(what), best(std::move(best)) {}
  MaxMarginSolution best;
};

MaxMarginSolution solve_max_margin(const Eigen::MatrixXd& X, const Eigen::VectorXi& y_obs,
                                   const MaxMarginConfig& config = {});
MaxMarginSolution solve_max_margin(const Dataset& data, const MaxMarginConfig& config = {});

// Least-norm z with y_obs_i <n_i, z> = 1 on I and <n_i, z> = 0 off I:
// z = N^T (N N^T)^{-1} w with w_i = y_obs_i on I, 0 elsewhere.  Requires N
// full row rank (smallest singular value above 1e-10 times the largest);
// violations surface as SingularMatrixError, never as silent regularization.
Eigen::VectorXd least_norm_noise_interpolator(const Eigen::MatrixXd& N,
                                              const Eigen::VectorXi& y_obs,
                                              const std::vector<int>& I);

enum class BoundKind { SignalPlusNoise, NoiseOnly };

const char* to_string(BoundKind kind);

// Feasible interpolator built in closed form; every margin equals 1 exactly
// (up to roundoff), so its norm upper-bounds the max-margin norm.
struct InterpolatorBound {
  BoundKind kind = BoundKind::SignalPlusNoise;
  Eigen::VectorXd w_tilde;
  double norm = 0.0;
  Eigen::VectorXd margins;  // y_obs_i <w_tilde, x_i>
  Eigen::VectorXd z;        // the noise-space component used
};

// w_tilde = v / sqrt(gamma) + 2 z / sqrt(1 - gamma) with z interpolating the
// corrupt set only.  Needs gamma strictly inside (0, 1).
InterpolatorBound build_signal_plus_noise_bound(const Dataset& data);

// w_tilde = z / sqrt(1 - gamma) with z interpolating every point.  Needs
// gamma < 1.
InterpolatorBound build_noise_only_bound(const Dataset& data);

std::string maxmargin_to_json(const MaxMarginSolution& sol);
MaxMarginSolution maxmargin_from_json(const std::string& text);

}  // namespace marginlab
