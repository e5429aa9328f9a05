#include "marginlab/network.hpp"

#include <cmath>
#include <limits>

#include <json.hpp>

#include "marginlab/errors.hpp"
#include "marginlab/maxmargin.hpp"

namespace marginlab {

double forward(const NetworkWeights& net, const Eigen::VectorXd& x) {
  const Eigen::VectorXd p = net.W * x;
  double f = 0.0;
  for (Eigen::Index j = 0; j < p.size(); ++j) {
    f += neuron_sign(static_cast<int>(j)) * leaky_relu(p(j), net.alpha);
  }
  return f;
}

double training_loss(const NetworkWeights& net, const Dataset& data) {
  const Eigen::MatrixXd P = data.X * net.W.transpose();  // n x 2m
  double loss = 0.0;
  for (Eigen::Index i = 0; i < P.rows(); ++i) {
    double f = 0.0;
    for (Eigen::Index j = 0; j < P.cols(); ++j) {
      f += neuron_sign(static_cast<int>(j)) * leaky_relu(P(i, j), net.alpha);
    }
    loss += hinge(data.y_obs(i) * f);
  }
  return loss;
}

Hyperparams default_hyperparams(const Dataset& data, int m, double alpha) {
  if (m < 1) throw ParameterError("m must be >= 1");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ParameterError("alpha must lie in (0, 1]");
  const Eigen::VectorXd norms = data.X.rowwise().norm();
  const double max_norm = norms.maxCoeff();
  const double min_norm = norms.minCoeff();
  if (min_norm == 0.0) throw ParameterError("degenerate data: a training point has zero norm");
  Hyperparams hp;
  hp.eta = 1.0 / (static_cast<double>(m) * static_cast<double>(data.params.n) * max_norm * max_norm);
  hp.lambda = std::sqrt(alpha) / (static_cast<double>(m) * min_norm);
  return hp;
}

GdStepResult gd_step(const NetworkWeights& net, const Dataset& data, double eta) {
  const int n = static_cast<int>(data.X.rows());
  const int width = static_cast<int>(net.W.rows());
  GdStepResult out;
  out.b = Eigen::MatrixXd::Zero(n, width);
  const Eigen::MatrixXd P = data.X * net.W.transpose();

  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, width);
  for (int i = 0; i < n; ++i) {
    double f = 0.0;
    for (int j = 0; j < width; ++j) f += neuron_sign(j) * leaky_relu(P(i, j), net.alpha);
    if (data.y_obs(i) * f < 1.0) {
      out.active_set.push_back(i);
      for (int j = 0; j < width; ++j) {
        const double slope = leaky_relu_slope(P(i, j), net.alpha);
        out.b(i, j) = slope;
        M(i, j) = slope * data.y_obs(i) * neuron_sign(j);
      }
    }
  }
  out.next = net;
  out.next.W.noalias() += eta * (M.transpose() * data.X);
  return out;
}

long long default_max_iters(const Dataset& data, int m, double alpha, double eta) {
  double best_sq = std::numeric_limits<double>::infinity();
  try {
    best_sq = std::min(best_sq, std::pow(build_signal_plus_noise_bound(data).norm, 2));
  } catch (const std::exception&) {
  }
  try {
    best_sq = std::min(best_sq, std::pow(build_noise_only_bound(data).norm, 2));
  } catch (const std::exception&) {
  }
  if (!std::isfinite(best_sq)) return 1000000;
  const double raw = 50.0 * std::ceil(best_sq / (eta * alpha * alpha * static_cast<double>(m)));
  if (!(raw > 0.0)) return 1000000;
  if (raw > 9.0e18) return static_cast<long long>(9.0e18);
  return static_cast<long long>(raw);
}

std::pair<NetworkWeights, TrainTrace> train(const Dataset& data, int m, double alpha,
                                            const TrainConfig& config,
                                            const std::optional<Eigen::VectorXd>& w_star) {
  if (m < 1) throw ParameterError("m must be >= 1");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ParameterError("alpha must lie in (0, 1]");
  const int n = data.params.n;
  const int d = data.params.d;
  const int width = 2 * m;

  double eta = config.eta;
  if (eta <= 0.0) eta = default_hyperparams(data, m, alpha).eta;

  NetworkWeights net;
  net.m = m;
  net.alpha = alpha;
  net.W = Eigen::MatrixXd::Zero(width, d);
  if (config.init_mode == InitMode::UniformBall) {
    double radius = config.init_scale;
    if (radius < 0.0) radius = default_hyperparams(data, m, alpha).lambda;
    PhiloxRng rng = substream(config.seed, "init");
    for (int j = 0; j < width; ++j) {
      Eigen::VectorXd g(d);
      for (int c = 0; c < d; ++c) g(c) = rng.normal();
      const double norm = g.norm();
      if (norm > 0.0) {
        const double r = radius * std::pow(rng.uniform01(), 1.0 / static_cast<double>(d));
        net.W.row(j) = (r / norm) * g.transpose();
      }
    }
  }

  long long max_iters = config.max_iters;
  if (max_iters <= 0) max_iters = default_max_iters(data, m, alpha, eta);

  TrainTrace trace;
  trace.eta = eta;
  trace.alpha = alpha;
  trace.m = m;
  trace.W0 = net.W;
  trace.w_star = w_star;
  trace.detailed = config.record_trace;
  if (trace.detailed) trace.counters = Eigen::MatrixXd::Zero(width, n);

  Eigen::VectorXd yhat(n);
  for (int i = 0; i < n; ++i) yhat(i) = static_cast<double>(data.y_obs(i));
  Eigen::VectorXd sign(width);
  for (int j = 0; j < width; ++j) sign(j) = neuron_sign(j);

  Eigen::MatrixXd P(n, width), M(n, width);
  std::vector<int> active;
  active.reserve(n);
  long long updates = 0;

  for (long long t = 0;; ++t) {
    P.noalias() = data.X * net.W.transpose();
    active.clear();
    M.setZero();
    for (int i = 0; i < n; ++i) {
      double f = 0.0;
      for (int j = 0; j < width; ++j) f += sign(j) * leaky_relu(P(i, j), alpha);
      if (yhat(i) * f < 1.0) active.push_back(i);
    }

    if (trace.detailed) {
      trace.active_counts.push_back(static_cast<int>(active.size()));
      trace.G.push_back(net.W.squaredNorm());
      trace.U.push_back(updates);
      trace.active_sets.push_back(active);
      if (w_star) {
        double f_align = 0.0;
        for (int j = 0; j < width; ++j) f_align += sign(j) * net.W.row(j).dot(*w_star);
        trace.F_align.push_back(f_align);
      }
    }

    if (active.empty()) {
      trace.T = t;
      trace.converged = true;
      break;
    }
    if (t >= max_iters) {
      trace.T = t;
      trace.converged = false;
      break;
    }

    for (int i : active) {
      for (int j = 0; j < width; ++j) {
        const double slope = leaky_relu_slope(P(i, j), alpha);
        M(i, j) = slope * yhat(i) * sign(j);
        if (trace.detailed) trace.counters(j, i) += slope;
      }
    }
    net.W.noalias() += eta * (M.transpose() * data.X);
    updates += static_cast<long long>(active.size());
  }

  trace.final_loss = training_loss(net, data);
  return {std::move(net), std::move(trace)};
}

std::string trace_to_jsonl(const TrainTrace& trace) {
  std::string out;
  if (trace.detailed) {
    for (std::size_t t = 0; t < trace.active_counts.size(); ++t) {
      nlohmann::json row;
      row["t"] = static_cast<long long>(t);
      row["active_count"] = trace.active_counts[t];
      row["G"] = trace.G[t];
      if (!trace.F_align.empty()) row["F_align"] = trace.F_align[t];
      row["U"] = trace.U[t];
      out += row.dump();
      out += '\n';
    }
  }
  nlohmann::json terminal;
  terminal["T"] = trace.T;
  terminal["converged"] = trace.converged;
  terminal["final_loss"] = trace.final_loss;
  out += terminal.dump();
  out += '\n';
  return out;
}

std::string weights_to_json(const NetworkWeights& net) {
  nlohmann::json j;
  j["m"] = net.m;
  j["alpha"] = net.alpha;
  std::vector<double> flat;
  flat.reserve(static_cast<std::size_t>(net.W.size()));
  for (Eigen::Index r = 0; r < net.W.rows(); ++r)
    for (Eigen::Index c = 0; c < net.W.cols(); ++c) flat.push_back(net.W(r, c));
  j["W"] = std::move(flat);
  return j.dump();
}

NetworkWeights weights_from_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  NetworkWeights net;
  net.m = j.at("m").get<int>();
  net.alpha = j.at("alpha").get<double>();
  const auto flat = j.at("W").get<std::vector<double>>();
  const int width = 2 * net.m;
  if (width <= 0 || flat.size() % static_cast<std::size_t>(width) != 0) {
    throw ParameterError("weights array does not match 2m rows");
  }
  const int d = static_cast<int>(flat.size()) / width;
  net.W.resize(width, d);
  for (int r = 0; r < width; ++r)
    for (int c = 0; c < d; ++c) net.W(r, c) = flat[static_cast<std::size_t>(r) * d + c];
  return net;
}

}  // namespace marginlab
