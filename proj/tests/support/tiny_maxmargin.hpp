#pragma once

// Exhaustive active-set oracle for the minimum-norm separator, usable only on
// instances small enough to enumerate every candidate support set.  If the
// program is feasible its optimum is the equality solution of some support
// subset with nonnegative multipliers, so scanning all subsets and keeping
// the best valid candidate is exact; no subset valid means infeasible.

#include <Eigen/Dense>
#include <vector>

namespace marginlab::testsupport {

struct TinyMaxMargin {
  bool feasible = false;
  Eigen::VectorXd w;
  double norm = 0.0;
  std::vector<int> support;
};

inline TinyMaxMargin tiny_max_margin(const Eigen::MatrixXd& X, const Eigen::VectorXi& y_obs,
                                     double tol = 1e-9) {
  const int n = static_cast<int>(X.rows());
  Eigen::MatrixXd A(n, X.cols());
  for (int i = 0; i < n; ++i) A.row(i) = y_obs(i) * X.row(i);

  TinyMaxMargin best;
  for (int mask = 1; mask < (1 << n); ++mask) {
    std::vector<int> S;
    for (int i = 0; i < n; ++i) {
      if (mask & (1 << i)) S.push_back(i);
    }
    Eigen::MatrixXd As(S.size(), X.cols());
    for (std::size_t r = 0; r < S.size(); ++r) As.row(static_cast<Eigen::Index>(r)) = A.row(S[r]);

    Eigen::FullPivLU<Eigen::MatrixXd> lu(As * As.transpose());
    lu.setThreshold(1e-10);
    if (!lu.isInvertible()) continue;
    const Eigen::VectorXd mu = lu.solve(Eigen::VectorXd::Ones(static_cast<Eigen::Index>(S.size())));
    if (mu.minCoeff() < -tol) continue;
    const Eigen::VectorXd w = As.transpose() * mu;
    if (((A * w).array() < 1.0 - 1e-8).any()) continue;

    const double norm = w.norm();
    if (!best.feasible || norm < best.norm) {
      best.feasible = true;
      best.w = w;
      best.norm = norm;
      best.support = S;
    }
  }
  return best;
}

}  // namespace marginlab::testsupport
