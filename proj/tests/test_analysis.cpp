#include <doctest.h>

#include <cmath>

#include "marginlab/analysis.hpp"
#include "marginlab/errors.hpp"
#include "marginlab/rng.hpp"
#include "support/phi_oracle.hpp"

using namespace marginlab;

namespace {

NetworkWeights emulated_linear(const Eigen::VectorXd& w) {
  NetworkWeights net;
  net.m = 1;
  net.alpha = 1.0;
  net.W.resize(2, w.size());
  net.W.row(0) = -w.transpose();
  net.W.row(1) = w.transpose();
  return net;
}

}  // namespace

TEST_CASE("decomposition splits weights orthogonally") {
  PhiloxRng rng = substream(5, "analysis");
  const int d = 12;
  Eigen::VectorXd v(d);
  for (int i = 0; i < d; ++i) v(i) = rng.normal();
  v.normalize();

  NetworkWeights net;
  net.m = 2;
  net.alpha = 0.5;
  net.W.resize(4, d);
  for (int j = 0; j < 4; ++j)
    for (int c = 0; c < d; ++c) net.W(j, c) = rng.normal();

  const SnrReport report = decompose(net, v);
  for (int j = 0; j < 4; ++j) {
    CHECK(report.a(j) == doctest::Approx(net.W.row(j).dot(v)).epsilon(1e-12));
    CHECK(std::abs(report.Z.row(j).dot(v)) < 1e-12);
    const Eigen::VectorXd rebuilt = report.a(j) * v + report.Z.row(j).transpose();
    CHECK((rebuilt - net.W.row(j).transpose()).norm() < 1e-12);
  }
  // Pythagoras at the matrix level.
  const double frob_sq = net.W.squaredNorm();
  CHECK(report.a.squaredNorm() + report.Z.squaredNorm() ==
        doctest::Approx(frob_sq).epsilon(1e-9));
}

TEST_CASE("signal activations on a hand example") {
  NetworkWeights net;
  net.m = 1;
  net.alpha = 0.5;
  net.W.resize(2, 2);
  net.W << 0.0, 0.0,
           1.0, 0.0;  // a = (0, 1) along v = e_1
  const SignalActivations acts = signal_activations(net, Eigen::Vector2d(1.0, 0.0));
  CHECK(acts.A_plus == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(acts.A_minus == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(acts.A_min == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(acts.A_lin == doctest::Approx(1.0).epsilon(1e-12));

  // A_{+1} = f(W, v) and A_{-1} = -f(W, -v) by positive homogeneity.
  CHECK(acts.A_plus == doctest::Approx(forward(net, Eigen::Vector2d(1.0, 0.0))));
  CHECK(acts.A_minus == doctest::Approx(-forward(net, Eigen::Vector2d(-1.0, 0.0))));
}

TEST_CASE("margin ratio is plain arithmetic with a guarded denominator") {
  NetworkWeights net;
  net.m = 1;
  net.alpha = 1.0;
  net.W.resize(2, 2);
  net.W << 3.0, 0.0,
           0.0, 0.0;
  CHECK(margin_ratio(net, 2.0) == doctest::Approx(1.5).epsilon(1e-12));
  net.W.setZero();
  CHECK(margin_ratio(net, 2.0) == 0.0);
  CHECK_THROWS_AS(margin_ratio(net, 0.0), ParameterError);
}

TEST_CASE("normal cdf agrees with quadrature") {
  CHECK(normal_cdf(0.0) == 0.5);
  for (double x : {-3.0, -1.0, -0.3, 0.4, 1.0, 2.5}) {
    CHECK(normal_cdf(x) == doctest::Approx(testsupport::phi_by_quadrature(x)).epsilon(1e-11));
    CHECK(normal_cdf(x) + normal_cdf(-x) == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK(normal_cdf(-1.0) == doctest::Approx(0.158655).epsilon(1e-6));
  CHECK(normal_cdf(-40.0) == 0.0);
  CHECK(normal_cdf(40.0) == 1.0);
}

TEST_CASE("the linear closed form matches its special cases") {
  // Scaled argument exactly 1: gamma d / (1-gamma) * (a_v/|z|)^2 = 1.
  const LinearErrorBounds unit = linear_error_closed_form(1.0, 2.0, 0.5, 4);
  CHECK(unit.exact == doctest::Approx(0.1586552539).epsilon(1e-9));
  CHECK(unit.exact == doctest::Approx(testsupport::phi_by_quadrature(-1.0)).epsilon(1e-10));

  CHECK(linear_error_closed_form(0.0, 1.5, 0.3, 64).exact == 0.5);
  CHECK(linear_error_closed_form(0.7, 0.0, 0.3, 64).exact == 0.0);
  CHECK(linear_error_closed_form(-0.7, 0.0, 0.3, 64).exact == 1.0);
  CHECK(linear_error_closed_form(0.0, 0.0, 0.3, 64).exact == 0.5);
  CHECK_THROWS_AS(linear_error_closed_form(0.5, 1.0, 1.0, 64), ParameterError);
}

TEST_CASE("the error bounds sandwich the exact value") {
  PhiloxRng rng = substream(6, "sandwich");
  for (int t = 0; t < 300; ++t) {
    const double a_v = rng.uniform01() * 2.5;
    const double z_norm = 0.1 + rng.uniform01() * 3.0;
    const double gamma = 0.05 + rng.uniform01() * 0.9;
    const int d = 2 + static_cast<int>(rng.below(512));
    const auto b = linear_error_closed_form(a_v, z_norm, gamma, d);
    CHECK(b.anticoncentration_lower <= b.exact + 1e-12);
    CHECK(b.exact <= b.hoeffding_upper + 1e-12);
    CHECK(b.hoeffding_upper <= 1.0);
    CHECK(b.anticoncentration_lower >= 0.0);
  }
}

TEST_CASE("monte carlo error handles the degenerate conventions") {
  DataModelParams p;
  p.d = 16;
  p.n = 4;
  p.k = 0;
  p.gamma = 1.0;
  p.seed = 2;
  const DataModelParams vp = validated(p);

  NetworkWeights aligned;
  aligned.m = 1;
  aligned.alpha = 1.0;
  aligned.W.resize(2, 16);
  aligned.W.setZero();
  aligned.W.row(1) = Eigen::VectorXd::Unit(16, 0).transpose();  // f(x) = <e_1, x>
  PhiloxRng rng_a = substream(9, "mc-a");
  const ErrorEstimate clean = mc_generalization_error(aligned, vp, 500, rng_a);
  CHECK(clean.estimate == 0.0);
  CHECK(clean.trials == 500);

  NetworkWeights zero;
  zero.m = 1;
  zero.alpha = 1.0;
  zero.W = Eigen::MatrixXd::Zero(2, 16);
  PhiloxRng rng_b = substream(9, "mc-b");
  const ErrorEstimate ties = mc_generalization_error(zero, vp, 300, rng_b);
  CHECK(ties.estimate == 1.0);
}

TEST_CASE("monte carlo agrees with the closed form for a linear emulation") {
  const int d = 64;
  const double gamma = 0.2;
  DataModelParams p;
  p.d = d;
  p.n = 4;
  p.k = 0;
  p.gamma = gamma;
  p.seed = 3;
  const DataModelParams vp = validated(p);

  PhiloxRng wgen = substream(8, "wgen");
  Eigen::VectorXd z(d);
  z(0) = 0.0;
  for (int i = 1; i < d; ++i) z(i) = wgen.normal();
  z *= 1.8 / z.norm();
  const double a_v = 0.35;
  const Eigen::VectorXd w = a_v * vp.v + z;

  const auto bounds = linear_error_closed_form(a_v, z.norm(), gamma, d);
  PhiloxRng rng = substream(10, "mc-linear");
  const ErrorEstimate est = mc_generalization_error(emulated_linear(w), vp, 40000, rng);
  CHECK(std::abs(est.estimate - bounds.exact) <= 3.0 * est.std_error);

  // Doubling the trial count shrinks the standard error like 1/sqrt(2).
  PhiloxRng rng2 = substream(10, "mc-linear2");
  const ErrorEstimate est2 = mc_generalization_error(emulated_linear(w), vp, 80000, rng2);
  CHECK(est.std_error / est2.std_error == doctest::Approx(std::sqrt(2.0)).epsilon(0.08));

  // Disjoint substreams agree within combined uncertainty.
  CHECK(std::abs(est.estimate - est2.estimate) <=
        4.0 * std::sqrt(est.std_error * est.std_error + est2.std_error * est2.std_error));
}

TEST_CASE("outcome classification follows the banded thresholds") {
  auto est = [](double e, double se) {
    ErrorEstimate r;
    r.estimate = e;
    r.std_error = se;
    r.trials = 1000;
    return r;
  };
  CHECK(classify_outcome(0.3, est(0.01, 0.001), 0.05) == Outcome::NonInterpolating);
  CHECK(classify_outcome(0.0, est(0.01, 0.001), 0.05) == Outcome::Benign);
  CHECK(classify_outcome(0.0, est(0.48, 0.005), 0.05) == Outcome::Harmful);
  CHECK(classify_outcome(0.0, est(0.06, 0.02), 0.05) == Outcome::Interpolating);
  // Boundary cases sit inside the claims, not the band.
  CHECK(classify_outcome(0.0, est(0.046, 0.002), 0.05) == Outcome::Benign);
  CHECK(classify_outcome(0.0, est(0.129, 0.002), 0.05) == Outcome::Harmful);
  CHECK_THROWS_AS(classify_outcome(0.0, est(0.1, 0.01), 0.6), ParameterError);
}

TEST_CASE("the linear emulation is recognized in the report") {
  Eigen::VectorXd w(6);
  w << 0.4, 0.1, -0.2, 0.0, 0.3, -0.1;
  Eigen::VectorXd v = Eigen::VectorXd::Unit(6, 0);
  const SnrReport report = snr_report(emulated_linear(w), v, 2.0);
  REQUIRE(report.a_v.has_value());
  REQUIRE(report.z_linear.has_value());
  CHECK(*report.a_v == doctest::Approx(w(0)).epsilon(1e-12));
  CHECK((*report.z_linear - (w - w(0) * v)).norm() < 1e-12);
  REQUIRE(report.margin_ratio.has_value());
  CHECK(*report.margin_ratio == doctest::Approx(w.norm() * std::sqrt(2.0) / 2.0).epsilon(1e-12));

  // A generic network has no linear specialization.
  NetworkWeights generic;
  generic.m = 1;
  generic.alpha = 0.5;
  generic.W.resize(2, 6);
  generic.W.setRandom();
  CHECK_FALSE(snr_report(generic, v).a_v.has_value());
  CHECK_FALSE(snr_report(generic, v).margin_ratio.has_value());
}

TEST_CASE("reports serialize with their aggregates") {
  Eigen::VectorXd w(4);
  w << 0.5, 0.25, 0.0, -0.125;
  const Eigen::VectorXd v = Eigen::VectorXd::Unit(4, 0);
  const SnrReport report = snr_report(emulated_linear(w), v, 1.5);
  const std::string json = snr_report_to_json(report);
  CHECK(json.find("A_min") != std::string::npos);
  CHECK(json.find("Z_frobenius") != std::string::npos);
  CHECK(json.find("margin_ratio") != std::string::npos);

  ErrorEstimate est;
  est.estimate = 0.125;
  est.std_error = 0.002;
  est.trials = 4000;
  est.method = "monte-carlo";
  const std::string ejson = error_estimate_to_json(est);
  CHECK(ejson.find("0.125") != std::string::npos);
  CHECK(ejson.find("monte-carlo") != std::string::npos);
}
