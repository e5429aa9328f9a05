#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "marginlab/datamodel.hpp"

namespace marginlab {

// Two-layer net with 2m hidden units, leaky-ReLU activation and frozen
// alternating output signs: f(W, x) = sum_j (-1)^j sigma(<w_j, x>), j = 1..2m.
// Row r of W (0-based) is neuron j = r + 1.
struct NetworkWeights {
  Eigen::MatrixXd W;  // 2m x d
  int m = 0;
  double alpha = 1.0;
};

inline double neuron_sign(int row) { return (row % 2 == 0) ? -1.0 : 1.0; }

inline double leaky_relu(double z, double alpha) { return z >= 0.0 ? z : alpha * z; }

// Subgradient convention: slope 1 at z = 0.
inline double leaky_relu_slope(double z, double alpha) { return z >= 0.0 ? 1.0 : alpha; }

inline double hinge(double z) { return z < 1.0 ? 1.0 - z : 0.0; }

double forward(const NetworkWeights& net, const Eigen::VectorXd& x);

// Sum (not mean) of hinge losses of y_obs_i * f(W, x_i).
double training_loss(const NetworkWeights& net, const Dataset& data);

struct Hyperparams {
  double eta;     // 1 / (m n max_i |x_i|^2)
  double lambda;  // sqrt(alpha) / (m min_i |x_i|)
};
Hyperparams default_hyperparams(const Dataset& data, int m, double alpha);

enum class InitMode { Zero, UniformBall };

struct TrainConfig {
  double eta = 0.0;          // <= 0 picks the default step size
  double init_scale = -1.0;  // < 0 picks lambda (UniformBall only)
  InitMode init_mode = InitMode::Zero;
  long long max_iters = 0;   // <= 0 picks the safety cap from the norm bound
  bool record_trace = false;
  std::uint64_t seed = 0;
};

// One subgradient step on the summed hinge loss.  The active set holds the
// indices with y_obs_i f(W, x_i) strictly below 1 (margin exactly 1 is
// inactive).  b(i, j) is 0 off the active set, else the slope sigma'(<w_j, x_i>).
struct GdStepResult {
  NetworkWeights next;
  std::vector<int> active_set;
  Eigen::MatrixXd b;  // n x 2m
};
GdStepResult gd_step(const NetworkWeights& net, const Dataset& data, double eta);

struct TrainTrace {
  long long T = 0;
  bool converged = false;
  double final_loss = 0.0;
  double eta = 0.0;
  double alpha = 0.0;
  int m = 0;
  Eigen::MatrixXd W0;
  std::optional<Eigen::VectorXd> w_star;

  // Per-iteration records for t = 0..T, filled only when record_trace is on.
  bool detailed = false;
  std::vector<int> active_counts;
  std::vector<double> G;        // squared Frobenius norm of W at t
  std::vector<double> F_align;  // signed alignment with w_star; empty without w_star
  std::vector<long long> U;     // cumulative update count, U[0] = 0
  std::vector<std::vector<int>> active_sets;
  Eigen::MatrixXd counters;     // 2m x n, c_{j,i} = sum_t b^{(t)}(i, j)
};

// Runs subgradient descent until the active set empties (T = that iteration)
// or max_iters is hit (converged = false, never an exception).  A supplied
// w_star only feeds the F_align trace column.
std::pair<NetworkWeights, TrainTrace> train(
    const Dataset& data, int m, double alpha, const TrainConfig& config,
    const std::optional<Eigen::VectorXd>& w_star = std::nullopt);

// 50 * ceil(|w_tilde|^2 / (eta alpha^2 m)) with |w_tilde| the cheapest
// constructive interpolator norm; a fixed large cap when no construction
// applies (gamma at an endpoint, rank-deficient noise).
long long default_max_iters(const Dataset& data, int m, double alpha, double eta);

std::string trace_to_jsonl(const TrainTrace& trace);
std::string weights_to_json(const NetworkWeights& net);
NetworkWeights weights_from_json(const std::string& text);

}  // namespace marginlab
