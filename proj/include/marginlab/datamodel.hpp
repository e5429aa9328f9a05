#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "marginlab/rng.hpp"

namespace marginlab {

// ±1 label corruption layout.  IidLabels draws labels independently and
// uniformly; BalancedLabels forces an exact 50/50 split inside both the
// clean subset and the corrupt subset (so n-k and k must be even).
enum class CorruptionMode { IidLabels, BalancedLabels };

const char* to_string(CorruptionMode mode);
CorruptionMode corruption_mode_from_string(const std::string& s);

struct DataModelParams {
  int d = 0;
  int n = 0;
  int k = 0;
  double gamma = 0.0;
  Eigen::VectorXd v;  // signal direction; empty selects e_1, always stored unit-norm
  CorruptionMode mode = CorruptionMode::IidLabels;
  std::uint64_t seed = 0;
};

// One sampled training set.  Rows of X are the points
//   x_i = sqrt(gamma) * y_i * v + sqrt(1-gamma) * n_i,
// with the noise rows n_i Gaussian in the hyperplane orthogonal to v
// (covariance (I - v v^T)/d).  y_obs flips y_true exactly on corrupt_set.
struct Dataset {
  DataModelParams params;
  Eigen::MatrixXd X;  // n x d
  Eigen::MatrixXd N;  // n x d
  Eigen::VectorXi y_true;
  Eigen::VectorXi y_obs;
  std::vector<int> corrupt_set;  // sorted, 0-based
  Eigen::VectorXi beta;          // y_true .* y_obs, -1 exactly on corrupt_set
};

struct TestPoint {
  Eigen::VectorXd x;
  int y;
};

// Gaussian noise orthogonal to v: draws g with i.i.d. N(0, 1/d) entries and
// projects out the v component.
Eigen::VectorXd sample_noise_vector(const Eigen::VectorXd& v, PhiloxRng& rng);

// Deterministic in params (all randomness comes from substreams of
// params.seed).  Identical params give a bit-identical Dataset.
Dataset sample_dataset(const DataModelParams& params);

// Fresh test point from the clean distribution: y uniform ±1,
// x = sqrt(gamma) y v + sqrt(1-gamma) n.
TestPoint sample_test_point(const DataModelParams& params, PhiloxRng& rng);

// Validates ranges, normalizes v (or fills e_1).  Every sampler runs this.
DataModelParams validated(const DataModelParams& params);

// JSON export with every real carried as a decimal string that parses back
// to the identical 64-bit value.  Import reconstructs N and beta from X.
std::string dataset_to_json(const Dataset& data);
Dataset dataset_from_json(const std::string& text);

}  // namespace marginlab
