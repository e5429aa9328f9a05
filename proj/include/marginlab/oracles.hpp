#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "marginlab/datamodel.hpp"
#include "marginlab/maxmargin.hpp"
#include "marginlab/network.hpp"

namespace marginlab {

struct SingularValueReport {
  double sigma_max = 0.0;
  double sigma_min = 0.0;
  int n = 0;
  int d = 0;
};

// Extreme singular values of the noise matrix, for conditioning checks
// against the asymptotic (1 ± sqrt(n/d)) envelope.
SingularValueReport noise_singular_values(const Eigen::MatrixXd& N);

struct LemmaCheckResult {
  std::string lemma_id;
  long long trials = 0;
  long long pass_count = 0;
  double worst_violation = 0.0;
  bool pass = false;
  std::string details;
};

// Coarse two-sided balance gate: the +1 count over I must land within
// [ceil(|I|/4), floor(3|I|/4)].
LemmaCheckResult check_balance(const Eigen::VectorXi& labels, const std::vector<int>& I);

// Margin, orthogonality and norm identities of a constructive interpolator,
// plus max-margin dominance when a solution is supplied.
LemmaCheckResult check_interpolator_identities(const Dataset& data, const InterpolatorBound& bound,
                                               const MaxMarginSolution* w_star = nullptr);

// Replays the recorded training run from W0 step by step (its own loop, not
// the trainer's) and verifies: the recorded per-iteration quantities, the
// weight-reconstruction identity through the counters, the counter ratio,
// the two descent recursions, and the alignment Cauchy-Schwarz sandwich.
std::vector<LemmaCheckResult> check_training_bookkeeping(const TrainTrace& trace,
                                                         const Dataset& data,
                                                         const Eigen::VectorXd& v);

std::string lemma_check_to_json(const LemmaCheckResult& result);

}  // namespace marginlab
