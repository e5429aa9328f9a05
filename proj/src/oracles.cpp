#include "marginlab/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "marginlab/errors.hpp"

namespace marginlab {

SingularValueReport noise_singular_values(const Eigen::MatrixXd& N) {
  const int n = static_cast<int>(N.rows());
  const int d = static_cast<int>(N.cols());
  if (n < 1 || d < 1) throw ParameterError("empty matrix");
  if (n > d) throw ParameterError("noise matrix must have n <= d");
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(N);
  SingularValueReport report;
  report.n = n;
  report.d = d;
  report.sigma_max = svd.singularValues().maxCoeff();
  report.sigma_min = svd.singularValues().minCoeff();
  return report;
}

LemmaCheckResult check_balance(const Eigen::VectorXi& labels, const std::vector<int>& I) {
  LemmaCheckResult result;
  result.lemma_id = "label-balance";
  result.trials = 1;
  long long count = 0;
  for (int i : I) {
    if (i < 0 || i >= labels.size()) throw ParameterError("index out of range");
    if (labels(i) == 1) ++count;
  }
  const long long size = static_cast<long long>(I.size());
  const long long lo = (size + 3) / 4;
  const long long hi = (3 * size) / 4;
  result.pass = count >= lo && count <= hi;
  result.pass_count = result.pass ? 1 : 0;
  result.worst_violation =
      result.pass ? 0.0 : static_cast<double>(std::max(lo - count, count - hi));
  std::ostringstream details;
  details << "+1 count " << count << " of " << size << ", band [" << lo << ", " << hi << "]";
  result.details = details.str();
  return result;
}

LemmaCheckResult check_interpolator_identities(const Dataset& data, const InterpolatorBound& bound,
                                               const MaxMarginSolution* w_star) {
  const int n = data.params.n;
  const double gamma = data.params.gamma;
  LemmaCheckResult result;
  result.lemma_id = "interpolator-identities";
  result.trials = 1;

  // Recompute everything from w_tilde itself; the cached margins and norm are
  // checked for consistency but never trusted.
  Eigen::VectorXd margins(n);
  for (int i = 0; i < n; ++i) {
    margins(i) = static_cast<double>(data.y_obs(i)) * data.X.row(i).dot(bound.w_tilde);
  }
  double margin_violation = 0.0;
  for (int i = 0; i < n; ++i) {
    margin_violation = std::max(margin_violation, std::abs(margins(i) - 1.0));
    margin_violation = std::max(margin_violation, std::abs(margins(i) - bound.margins(i)));
  }

  const double z_norm = bound.z.norm();
  const double ortho_violation =
      std::abs(bound.z.dot(data.params.v)) / std::max(z_norm, 1e-300);

  std::vector<char> on_I(static_cast<std::size_t>(n), 0);
  if (bound.kind == BoundKind::SignalPlusNoise) {
    for (int i : data.corrupt_set) on_I[static_cast<std::size_t>(i)] = 1;
  } else {
    std::fill(on_I.begin(), on_I.end(), 1);
  }
  double pattern_violation = 0.0;
  const Eigen::VectorXd nz = data.N * bound.z;
  for (int i = 0; i < n; ++i) {
    const double want = on_I[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
    pattern_violation = std::max(pattern_violation, std::abs(data.y_obs(i) * nz(i) - want));
  }

  const double true_norm = bound.w_tilde.norm();
  double norm_violation = std::abs(bound.norm - true_norm) / std::max(true_norm, 1e-300);
  if (bound.kind == BoundKind::SignalPlusNoise) {
    const double claim = 1.0 / gamma + 4.0 * z_norm * z_norm / (1.0 - gamma);
    norm_violation = std::max(norm_violation,
                              std::abs(true_norm * true_norm - claim) / std::max(claim, 1e-300));
  } else {
    const double claim = z_norm / std::sqrt(1.0 - gamma);
    norm_violation =
        std::max(norm_violation, std::abs(true_norm - claim) / std::max(claim, 1e-300));
  }

  double dominance_violation = 0.0;
  if (w_star != nullptr) {
    dominance_violation = std::max(0.0, (w_star->norm - true_norm) / true_norm);
  }

  result.pass = margin_violation <= 1e-8 && ortho_violation <= 1e-10 &&
                pattern_violation <= 1e-8 && norm_violation <= 1e-10 &&
                dominance_violation <= 1e-8;
  result.pass_count = result.pass ? 1 : 0;
  result.worst_violation = std::max({margin_violation, ortho_violation, pattern_violation,
                                     norm_violation, dominance_violation});
  std::ostringstream details;
  details << to_string(bound.kind) << ": margins " << margin_violation << ", orthogonality "
          << ortho_violation << ", pattern " << pattern_violation << ", norm " << norm_violation;
  if (w_star != nullptr) details << ", dominance " << dominance_violation;
  result.details = details.str();
  return result;
}

namespace {

LemmaCheckResult make_result(const std::string& id, long long trials, long long passes,
                             double worst, bool pass, const std::string& details) {
  LemmaCheckResult r;
  r.lemma_id = id;
  r.trials = trials;
  r.pass_count = passes;
  r.worst_violation = worst;
  r.pass = pass;
  r.details = details;
  return r;
}

}  // namespace

std::vector<LemmaCheckResult> check_training_bookkeeping(const TrainTrace& trace,
                                                         const Dataset& data,
                                                         const Eigen::VectorXd& v) {
  if (!trace.detailed) throw ParameterError("trace lacks per-iteration records");
  const int n = data.params.n;
  const int d = data.params.d;
  const int width = 2 * trace.m;
  if (trace.W0.rows() != width || trace.W0.cols() != d) throw ParameterError("W0 shape mismatch");
  const long long T = trace.T;
  if (static_cast<long long>(trace.active_counts.size()) != T + 1 ||
      static_cast<long long>(trace.G.size()) != T + 1 ||
      static_cast<long long>(trace.U.size()) != T + 1 ||
      static_cast<long long>(trace.active_sets.size()) != T + 1) {
    throw ParameterError("trace arrays do not cover t = 0..T");
  }
  const bool with_w_star = trace.w_star.has_value() && !trace.F_align.empty();
  const double eta = trace.eta;
  const double alpha = trace.alpha;

  Eigen::VectorXd yhat(n);
  for (int i = 0; i < n; ++i) yhat(i) = static_cast<double>(data.y_obs(i));
  Eigen::VectorXd sign(width);
  for (int j = 0; j < width; ++j) sign(j) = (j % 2 == 0) ? -1.0 : 1.0;

  Eigen::MatrixXd W = trace.W0;
  Eigen::MatrixXd C = Eigen::MatrixXd::Zero(width, n);
  Eigen::MatrixXd P(n, width), M(n, width);
  std::vector<double> G_replay(static_cast<std::size_t>(T) + 1);
  std::vector<double> F_replay;
  std::vector<int> counts_replay(static_cast<std::size_t>(T) + 1);
  if (with_w_star) F_replay.resize(static_cast<std::size_t>(T) + 1);

  double replay_violation = 0.0;
  bool replay_pass = true;
  std::ostringstream replay_notes;
  long long updates = 0;

  for (long long t = 0; t <= T; ++t) {
    P.noalias() = data.X * W.transpose();
    std::vector<int> active;
    for (int i = 0; i < n; ++i) {
      double f = 0.0;
      for (int j = 0; j < width; ++j) {
        const double p = P(i, j);
        f += sign(j) * (p >= 0.0 ? p : alpha * p);
      }
      if (yhat(i) * f < 1.0) active.push_back(i);
    }
    counts_replay[static_cast<std::size_t>(t)] = static_cast<int>(active.size());
    G_replay[static_cast<std::size_t>(t)] = W.squaredNorm();
    if (with_w_star) {
      double f_align = 0.0;
      for (int j = 0; j < width; ++j) f_align += sign(j) * W.row(j).dot(*trace.w_star);
      F_replay[static_cast<std::size_t>(t)] = f_align;
    }

    if (active != trace.active_sets[static_cast<std::size_t>(t)]) {
      replay_pass = false;
      replay_notes << "active set diverges at t=" << t << "; ";
    }
    const double g_err = std::abs(G_replay[static_cast<std::size_t>(t)] - trace.G[static_cast<std::size_t>(t)]) /
                         std::max(1.0, std::abs(trace.G[static_cast<std::size_t>(t)]));
    replay_violation = std::max(replay_violation, g_err);
    if (with_w_star) {
      const double f_err =
          std::abs(F_replay[static_cast<std::size_t>(t)] - trace.F_align[static_cast<std::size_t>(t)]) /
          std::max(1.0, std::abs(trace.F_align[static_cast<std::size_t>(t)]));
      replay_violation = std::max(replay_violation, f_err);
    }
    if (trace.U[static_cast<std::size_t>(t)] != updates) {
      replay_pass = false;
      replay_notes << "U diverges at t=" << t << "; ";
    }

    if (t == T) break;
    M.setZero();
    for (int i : active) {
      for (int j = 0; j < width; ++j) {
        const double slope = P(i, j) >= 0.0 ? 1.0 : alpha;
        M(i, j) = slope * yhat(i) * sign(j);
        C(j, i) += slope;
      }
    }
    W.noalias() += eta * (M.transpose() * data.X);
    updates += static_cast<long long>(active.size());
  }

  const double counter_err = (C - trace.counters).cwiseAbs().maxCoeff();
  replay_violation = std::max(replay_violation, counter_err);
  if (replay_violation > 1e-9) replay_pass = false;

  std::vector<LemmaCheckResult> out;
  {
    std::ostringstream details;
    details << "replayed " << (T + 1) << " records; worst deviation " << replay_violation << "; "
            << replay_notes.str();
    out.push_back(make_result("trace-replay", T + 1, replay_pass ? T + 1 : 0, replay_violation,
                              replay_pass, details.str()));
  }

  // Weight reconstruction through the counters: the orthogonal part of the
  // final weights must equal eta (-1)^j sum_i c_{j,i} yhat_i (x_i)_perp.
  {
    const Eigen::MatrixXd Xperp = data.X - (data.X * v) * v.transpose();
    double worst = 0.0;
    for (int j = 0; j < width; ++j) {
      const Eigen::VectorXd wj = W.row(j).transpose();
      const Eigen::VectorXd w0 = trace.W0.row(j).transpose();
      const Eigen::VectorXd lhs =
          (wj - wj.dot(v) * v) - (w0 - w0.dot(v) * v);
      const Eigen::VectorXd rhs =
          eta * sign(j) * (Xperp.transpose() * C.row(j).transpose().cwiseProduct(yhat));
      const double denom = std::max(rhs.norm(), 1e-300);
      const double err = (lhs - rhs).norm();
      worst = std::max(worst, err == 0.0 ? 0.0 : err / denom);
    }
    out.push_back(make_result("weight-reconstruction", width, worst <= 1e-8 ? width : 0, worst,
                              worst <= 1e-8, "max_j relative reconstruction error"));
  }

  // Counter ratio: min_j c_{j,i} >= alpha max_j c_{j,i} for every i.
  {
    double worst = 0.0;
    for (int i = 0; i < n; ++i) {
      const double cmax = C.col(i).maxCoeff();
      const double cmin = C.col(i).minCoeff();
      worst = std::max(worst, alpha * cmax - cmin);
    }
    out.push_back(make_result("counter-ratio", n, worst <= 1e-12 ? n : 0, worst, worst <= 1e-12,
                              "max over i of alpha*max_j c_{j,i} - min_j c_{j,i}"));
  }

  // Descent recursions: squared norm grows at most 4 eta |F|, alignment at
  // least 2 eta m alpha |F|, both with 1e-9 relative slack.
  {
    double worst_g = 0.0;
    double worst_f = 0.0;
    for (long long t = 0; t < T; ++t) {
      const double count = static_cast<double>(counts_replay[static_cast<std::size_t>(t)]);
      const double g_bound = G_replay[static_cast<std::size_t>(t)] + 4.0 * eta * count;
      worst_g = std::max(worst_g, (G_replay[static_cast<std::size_t>(t) + 1] - g_bound) /
                                      std::max(1.0, std::abs(g_bound)));
      if (with_w_star) {
        const double f_bound = F_replay[static_cast<std::size_t>(t)] +
                               2.0 * eta * trace.m * alpha * count;
        worst_f = std::max(worst_f, (f_bound - F_replay[static_cast<std::size_t>(t) + 1]) /
                                        std::max(1.0, std::abs(f_bound)));
      }
    }
    const double worst = std::max({worst_g, worst_f, 0.0});
    std::ostringstream details;
    details << "norm-growth slack " << worst_g;
    if (with_w_star) details << ", alignment-growth slack " << worst_f;
    out.push_back(make_result("descent-recursions", std::max<long long>(T, 1),
                              worst <= 1e-9 ? std::max<long long>(T, 1) : 0, worst, worst <= 1e-9,
                              details.str()));
  }

  if (with_w_star) {
    const double w_norm = trace.w_star->norm();
    double worst = 0.0;
    for (long long t = 0; t <= T; ++t) {
      const double rhs = w_norm * std::sqrt(2.0 * trace.m * G_replay[static_cast<std::size_t>(t)]);
      worst = std::max(worst, (F_replay[static_cast<std::size_t>(t)] - rhs) / std::max(1.0, rhs));
    }
    out.push_back(make_result("alignment-cauchy-schwarz", T + 1, worst <= 1e-9 ? T + 1 : 0,
                              std::max(worst, 0.0), worst <= 1e-9,
                              "F_align(t) <= |w*| sqrt(2m G(t)) at every t"));
  }
  return out;
}

std::string lemma_check_to_json(const LemmaCheckResult& result) {
  nlohmann::json j;
  j["lemma_id"] = result.lemma_id;
  j["trials"] = result.trials;
  j["pass_count"] = result.pass_count;
  j["worst_violation"] = result.worst_violation;
  j["pass"] = result.pass;
  j["details"] = result.details;
  return j.dump();
}

}  // namespace marginlab
