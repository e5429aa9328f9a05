#include "marginlab/maxmargin.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <json.hpp>

namespace marginlab {

namespace {

Eigen::VectorXd to_double(const Eigen::VectorXi& y) {
  Eigen::VectorXd out(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) out(i) = static_cast<double>(y(i));
  return out;
}

void certify(const Eigen::MatrixXd& X, const Eigen::VectorXd& yhat, double kkt_tol,
             MaxMarginSolution& sol) {
  const Eigen::Index n = X.rows();
  sol.w_star = X.transpose() * sol.dual_coeffs.cwiseProduct(yhat);
  sol.norm = sol.w_star.norm();
  sol.margins = yhat.cwiseProduct(X * sol.w_star);

  const double feas = std::max(0.0, 1.0 - sol.margins.minCoeff());
  const double dual_feas = std::max(0.0, -sol.dual_coeffs.minCoeff());
  double comp = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (sol.margins(i) > 1.0 + kkt_tol) comp = std::max(comp, sol.dual_coeffs(i));
  }
  sol.kkt_residual = std::max({feas, dual_feas, comp});

  sol.support_set.clear();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (std::abs(sol.margins(i) - 1.0) <= kkt_tol) sol.support_set.push_back(static_cast<int>(i));
  }
}

// Equality-constrained refinement on a guessed support set: solve
// Q_SS mu = 1, drop negative multipliers, pull in violated constraints.
bool polish(const Eigen::MatrixXd& X, const Eigen::VectorXd& yhat, const Eigen::MatrixXd& Q,
            const Eigen::VectorXd& lambda0, double kkt_tol, MaxMarginSolution& out) {
  const int n = static_cast<int>(X.rows());
  std::vector<int> S;
  const double lmax = lambda0.size() ? lambda0.maxCoeff() : 0.0;
  for (int i = 0; i < n; ++i) {
    if (lambda0(i) > 1e-12 * std::max(lmax, 1.0)) S.push_back(i);
  }
  if (S.empty()) S.push_back(0);

  Eigen::VectorXd mu;
  const int max_pivots = 3 * n + 10;
  for (int pivot = 0; pivot < max_pivots; ++pivot) {
    const int s = static_cast<int>(S.size());
    Eigen::MatrixXd Qss(s, s);
    for (int a = 0; a < s; ++a)
      for (int b = 0; b < s; ++b) Qss(a, b) = Q(S[a], S[b]);
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(s);

    Eigen::LLT<Eigen::MatrixXd> llt(Qss);
    if (llt.info() == Eigen::Success) {
      mu = llt.solve(ones);
    } else {
      // Singular support Gram (duplicated rows and the like): minimum-norm
      // multipliers of the consistent system.
      Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(Qss);
      cod.setThreshold(1e-12);
      mu = cod.solve(ones);
    }
    if (!mu.allFinite()) return false;
    if ((Qss * mu - ones).cwiseAbs().maxCoeff() > 1e-6 * std::max(1.0, mu.cwiseAbs().maxCoeff())) {
      return false;
    }

    int drop = -1;
    double most_negative = -1e-11;
    for (int a = 0; a < s; ++a) {
      if (mu(a) < most_negative) {
        most_negative = mu(a);
        drop = a;
      }
    }
    if (drop >= 0) {
      S.erase(S.begin() + drop);
      if (S.empty()) return false;
      continue;
    }

    Eigen::VectorXd lambda = Eigen::VectorXd::Zero(n);
    for (int a = 0; a < s; ++a) lambda(S[a]) = std::max(0.0, mu(a));
    const Eigen::VectorXd w = X.transpose() * lambda.cwiseProduct(yhat);
    const Eigen::VectorXd margins = yhat.cwiseProduct(X * w);

    int add = -1;
    double worst = 1.0 - 1e-11;
    for (int i = 0; i < n; ++i) {
      if (std::find(S.begin(), S.end(), i) != S.end()) continue;
      if (margins(i) < worst) {
        worst = margins(i);
        add = i;
      }
    }
    if (add >= 0) {
      S.push_back(add);
      std::sort(S.begin(), S.end());
      continue;
    }

    out.dual_coeffs = std::move(lambda);
    certify(X, yhat, kkt_tol, out);
    return true;
  }
  return false;
}

}  // namespace

MaxMarginSolution solve_max_margin(const Eigen::MatrixXd& X, const Eigen::VectorXi& y_obs,
                                   const MaxMarginConfig& config) {
  const int n = static_cast<int>(X.rows());
  if (n < 1) throw ParameterError("need at least one constraint");
  if (y_obs.size() != n) throw ParameterError("label length mismatch");
  if (!(config.kkt_tol > 0.0 && config.kkt_tol <= 1e-3)) {
    throw ParameterError("kkt_tol must lie in (0, 1e-3]");
  }
  const Eigen::VectorXd yhat = to_double(y_obs);
  const double max_row_norm = X.rowwise().norm().maxCoeff();

  const Eigen::MatrixXd G = X * X.transpose();
  const Eigen::MatrixXd Q = yhat.asDiagonal() * G * yhat.asDiagonal();
  const Eigen::VectorXd qdiag = Q.diagonal();
  for (int i = 0; i < n; ++i) {
    if (qdiag(i) <= 0.0) {
      // A zero point can never reach margin 1: certified infeasible.
      Eigen::VectorXd nu = Eigen::VectorXd::Zero(n);
      nu(i) = 1.0;
      throw InfeasibleError("constraint on a zero data point is unsatisfiable", nu, 0.0);
    }
  }

  Eigen::VectorXd lambda = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(n);  // Q * lambda
  const double inner_tol = std::max(1e-12, 0.01 * config.kkt_tol);

  MaxMarginSolution best;
  best.kkt_residual = std::numeric_limits<double>::infinity();
  auto consider = [&](MaxMarginSolution& cand, long long sweeps) {
    cand.sweeps = sweeps;
    if (cand.kkt_residual < best.kkt_residual) best = cand;
  };

  long long sweep = 0;
  for (; sweep < config.max_sweeps; ++sweep) {
    double max_violation = 0.0;
    for (int i = 0; i < n; ++i) {
      const double gi = g(i);
      const double violation = lambda(i) > 0.0 ? std::abs(1.0 - gi) : std::max(0.0, 1.0 - gi);
      max_violation = std::max(max_violation, violation);
      double next = lambda(i) + (1.0 - gi) / qdiag(i);
      if (next < 0.0) next = 0.0;
      const double delta = next - lambda(i);
      if (delta != 0.0) {
        lambda(i) = next;
        g.noalias() += delta * Q.col(i);
      }
    }
    const bool settled = max_violation <= inner_tol;
    if (settled || (sweep + 1) % 256 == 0) {
      MaxMarginSolution cand;
      if (polish(X, yhat, Q, lambda, config.kkt_tol, cand)) consider(cand, sweep + 1);
      if (best.kkt_residual <= config.kkt_tol) return best;
      if (settled) break;
    }
  }

  {
    MaxMarginSolution cand;
    cand.dual_coeffs = lambda;
    certify(X, yhat, config.kkt_tol, cand);
    consider(cand, sweep);
    if (best.kkt_residual <= config.kkt_tol) return best;
  }

  // Budget spent without a certificate.  The margin system is unsatisfiable
  // exactly when the origin lies in the convex hull of {y_i x_i}, i.e. some
  // nu >= 0 with sum 1 has X^T (nu .* yhat) = 0.  The diverging dual iterate
  // approaches such a direction only at rate 1/sum(lambda), so project it
  // onto the null space of Q instead and verify the candidate outright.
  {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(Q);
    if (eig.info() == Eigen::Success) {
      const Eigen::VectorXd evals = eig.eigenvalues();
      const double lam_max = std::max(0.0, evals.maxCoeff());
      const double null_tol = std::max(1e-12, 1e-12 * lam_max);
      const double total = lambda.sum();
      std::vector<Eigen::VectorXd> seeds;
      if (total > 0.0) seeds.push_back(lambda / total);
      seeds.push_back(Eigen::VectorXd::Ones(n) / static_cast<double>(n));
      for (const Eigen::VectorXd& seed_dir : seeds) {
        Eigen::VectorXd proj = Eigen::VectorXd::Zero(n);
        for (int a = 0; a < n; ++a) {
          if (evals(a) <= null_tol) {
            const Eigen::VectorXd u = eig.eigenvectors().col(a);
            proj += u.dot(seed_dir) * u;
          }
        }
        proj = proj.cwiseMax(0.0);
        if (proj.sum() <= 1e-12) continue;
        const Eigen::VectorXd nu = proj / proj.sum();
        const double residual = (X.transpose() * nu.cwiseProduct(yhat)).norm();
        if (residual <= 1e-9 * std::max(1.0, max_row_norm)) {
          throw InfeasibleError("no separator: Farkas certificate found", nu, residual);
        }
      }
    }
  }
  throw NonCertifiedError("iteration budget exhausted before KKT certification", best);
}

MaxMarginSolution solve_max_margin(const Dataset& data, const MaxMarginConfig& config) {
  return solve_max_margin(data.X, data.y_obs, config);
}

Eigen::VectorXd least_norm_noise_interpolator(const Eigen::MatrixXd& N,
                                              const Eigen::VectorXi& y_obs,
                                              const std::vector<int>& I) {
  const int n = static_cast<int>(N.rows());
  const int d = static_cast<int>(N.cols());
  if (y_obs.size() != n) throw ParameterError("label length mismatch");
  std::vector<char> seen(static_cast<std::size_t>(n), 0);
  for (int i : I) {
    if (i < 0 || i >= n) throw ParameterError("interpolation index out of range");
    if (seen[static_cast<std::size_t>(i)]++) throw ParameterError("duplicate interpolation index");
  }

  const Eigen::MatrixXd G = N * N.transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(G);
  if (eig.info() != Eigen::Success) throw SingularMatrixError("eigendecomposition failed", 0.0);
  const double lam_max = std::max(0.0, eig.eigenvalues().maxCoeff());
  const double lam_min = std::max(0.0, eig.eigenvalues().minCoeff());
  const double sigma_max = std::sqrt(lam_max);
  const double sigma_min = std::sqrt(lam_min);
  if (n > d || sigma_min <= 1e-10 * sigma_max || sigma_max == 0.0) {
    throw SingularMatrixError("noise matrix is not full row rank", sigma_min);
  }

  Eigen::VectorXd target = Eigen::VectorXd::Zero(n);
  for (int i : I) target(i) = static_cast<double>(y_obs(i));

  const Eigen::LLT<Eigen::MatrixXd> llt(G);
  if (llt.info() != Eigen::Success) {
    throw SingularMatrixError("noise Gram matrix is not positive definite", sigma_min);
  }
  return N.transpose() * llt.solve(target);
}

const char* to_string(BoundKind kind) {
  return kind == BoundKind::SignalPlusNoise ? "SignalPlusNoise" : "NoiseOnly";
}

InterpolatorBound build_signal_plus_noise_bound(const Dataset& data) {
  const double gamma = data.params.gamma;
  if (!(gamma > 0.0 && gamma < 1.0)) {
    throw ParameterError("signal-plus-noise construction needs gamma strictly inside (0, 1)");
  }
  InterpolatorBound b;
  b.kind = BoundKind::SignalPlusNoise;
  b.z = least_norm_noise_interpolator(data.N, data.y_obs, data.corrupt_set);
  b.w_tilde = data.params.v / std::sqrt(gamma) + (2.0 / std::sqrt(1.0 - gamma)) * b.z;
  b.norm = b.w_tilde.norm();
  b.margins = to_double(data.y_obs).cwiseProduct(data.X * b.w_tilde);
  return b;
}

InterpolatorBound build_noise_only_bound(const Dataset& data) {
  const double gamma = data.params.gamma;
  if (!(gamma < 1.0)) throw ParameterError("noise-only construction needs gamma < 1");
  std::vector<int> all(static_cast<std::size_t>(data.params.n));
  for (int i = 0; i < data.params.n; ++i) all[static_cast<std::size_t>(i)] = i;
  InterpolatorBound b;
  b.kind = BoundKind::NoiseOnly;
  b.z = least_norm_noise_interpolator(data.N, data.y_obs, all);
  b.w_tilde = b.z / std::sqrt(1.0 - gamma);
  b.norm = b.w_tilde.norm();
  b.margins = to_double(data.y_obs).cwiseProduct(data.X * b.w_tilde);
  return b;
}

std::string maxmargin_to_json(const MaxMarginSolution& sol) {
  nlohmann::json j;
  j["w_star"] = std::vector<double>(sol.w_star.data(), sol.w_star.data() + sol.w_star.size());
  j["norm"] = sol.norm;
  j["margins"] = std::vector<double>(sol.margins.data(), sol.margins.data() + sol.margins.size());
  j["support_set"] = sol.support_set;
  j["kkt_residual"] = sol.kkt_residual;
  return j.dump();
}

MaxMarginSolution maxmargin_from_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  MaxMarginSolution sol;
  const auto w = j.at("w_star").get<std::vector<double>>();
  sol.w_star = Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
  sol.norm = j.at("norm").get<double>();
  const auto mg = j.at("margins").get<std::vector<double>>();
  sol.margins = Eigen::Map<const Eigen::VectorXd>(mg.data(), static_cast<Eigen::Index>(mg.size()));
  sol.support_set = j.at("support_set").get<std::vector<int>>();
  sol.kkt_residual = j.at("kkt_residual").get<double>();
  return sol;
}

}  // namespace marginlab
