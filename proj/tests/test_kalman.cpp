#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "oracles.hpp"
#include "spikedet/arima.hpp"
#include "spikedet/kalman.hpp"
#include "spikedet/rng.hpp"

using namespace spikedet;
using kalman::StateSpaceModel;

namespace {

arima::ArimaModel arma(int p, int q, std::vector<double> ar,
                       std::vector<double> ma, double sigma2 = 1.0) {
  arima::ArimaModel m;
  m.p = p;
  m.q = q;
  m.ar = std::move(ar);
  m.ma = std::move(ma);
  m.sigma2 = sigma2;
  return m;
}

std::vector<double> gaussian_series(std::size_t n, std::uint64_t seed,
                                    double sd = 1.0) {
  std::mt19937_64 rng(derive_seed(seed, 0));
  std::normal_distribution<double> noise(0.0, sd);
  std::vector<double> y(n);
  for (double& v : y) v = noise(rng);
  return y;
}

}  // namespace

TEST_CASE("to_state_space: AR(1) companion form") {
  const StateSpaceModel ssm = kalman::to_state_space(arma(1, 0, {0.5}, {}));
  CHECK(ssm.state_dim() == 1);
  CHECK(ssm.T(0, 0) == doctest::Approx(0.5));
  CHECK(ssm.Z(0) == doctest::Approx(1.0));
  CHECK(ssm.Q(0, 0) == doctest::Approx(1.0));
  CHECK(ssm.P1(0, 0) == doctest::Approx(4.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("to_state_space: white noise degenerates") {
  const StateSpaceModel ssm = kalman::to_state_space(arma(0, 0, {}, {}, 2.5));
  CHECK(ssm.state_dim() == 1);
  CHECK(ssm.T(0, 0) == doctest::Approx(0.0));
  CHECK(ssm.P1(0, 0) == doctest::Approx(2.5));
}

TEST_CASE(
    "to_state_space: MA(1) stationary covariance matches autocovariances") {
  const double theta = 0.794;
  const StateSpaceModel ssm =
      kalman::to_state_space(arma(0, 1, {}, {theta}, 1.3));
  REQUIRE(ssm.state_dim() == 2);
  // gamma_0 = sigma2 (1 + theta^2), gamma_1 = -sigma2 theta
  CHECK(ssm.P1(0, 0) ==
        doctest::Approx(1.3 * (1.0 + theta * theta)).epsilon(1e-12));
  const double gamma1 = (ssm.T * ssm.P1)(0, 0);
  CHECK(gamma1 == doctest::Approx(-1.3 * theta).epsilon(1e-12));
}

TEST_CASE("to_state_space rejects non-stationary models") {
  CHECK_THROWS_AS(kalman::to_state_space(arma(1, 0, {1.01}, {})), ModelError);
}

TEST_CASE("stationary_covariance agrees with fixed-point iteration") {
  const StateSpaceModel ssm =
      kalman::to_state_space(arma(2, 2, {0.5, -0.3}, {0.4, 0.2}, 0.7));
  const Eigen::MatrixXd RQRt = ssm.R * ssm.Q * ssm.R.transpose();
  const Eigen::MatrixXd ref = oracle::lyapunov_fixed_point(ssm.T, RQRt);
  CHECK((ssm.P1 - ref).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("filter: deterministic local level has zero innovations") {
  StateSpaceModel ssm;
  ssm.T = Eigen::MatrixXd::Constant(1, 1, 1.0);
  ssm.Z = Eigen::RowVectorXd::Constant(1, 1.0);
  ssm.R = Eigen::MatrixXd::Constant(1, 1, 1.0);
  ssm.Q = Eigen::MatrixXd::Constant(1, 1, 0.0);
  ssm.H = 1e-12;  // tiny floor; exact zero would degenerate F
  const std::vector<double> y(10, 3.25);
  ssm.a1 = Eigen::VectorXd::Constant(1, y[0]);
  ssm.P1 = Eigen::MatrixXd::Constant(1, 1, 0.0);

  const kalman::FilterOutput fo = kalman::filter(ssm, y);
  for (std::size_t t = 0; t < y.size(); ++t) {
    CHECK(std::abs(fo.v[t]) < 1e-9);
  }
}

TEST_CASE("filter: filtered means match direct Gaussian conditioning") {
  const arima::ArimaModel model = arma(1, 0, {0.5}, {}, 1.0);
  const StateSpaceModel ssm = kalman::to_state_space(model, 0.8);
  const std::vector<double> y = gaussian_series(12, 101, 1.4);

  const oracle::JointGaussian joint(ssm, 12);
  const kalman::FilterOutput fo = kalman::filter(ssm, y);
  for (int t = 0; t < 12; ++t) {
    const Eigen::VectorXd want = joint.conditional_state_mean(y, t, t + 1);
    const Eigen::VectorXd got = fo.filtered_mean(ssm, t);
    CHECK((want - got).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("filter: huge observation noise drives the gain to zero") {
  StateSpaceModel ssm = kalman::to_state_space(arma(1, 0, {0.6}, {}));
  ssm.H = 1e12;
  const std::vector<double> y = gaussian_series(20, 7);
  const kalman::FilterOutput fo = kalman::filter(ssm, y);
  for (const auto& K : fo.K) {
    CHECK(K.cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("filter rejects degenerate innovation variance") {
  StateSpaceModel ssm;
  ssm.T = Eigen::MatrixXd::Constant(1, 1, 0.0);
  ssm.Z = Eigen::RowVectorXd::Constant(1, 1.0);
  ssm.R = Eigen::MatrixXd::Constant(1, 1, 1.0);
  ssm.Q = Eigen::MatrixXd::Constant(1, 1, 0.0);
  ssm.H = 0.0;
  ssm.a1 = Eigen::VectorXd::Zero(1);
  ssm.P1 = Eigen::MatrixXd::Zero(1, 1);
  const std::vector<double> y(5, 1.0);
  CHECK_THROWS_AS(kalman::filter(ssm, y), FilterError);
}

TEST_CASE("smooth: final smoothed state equals final filtered state") {
  const StateSpaceModel ssm =
      kalman::to_state_space(arma(2, 1, {0.4, 0.2}, {0.3}), 0.5);
  const std::vector<double> y = gaussian_series(15, 33);
  const kalman::FilterOutput fo = kalman::filter(ssm, y);
  const kalman::SmootherOutput so = kalman::smooth(ssm, fo);
  const Eigen::VectorXd last_filtered = fo.filtered_mean(ssm, 14);
  CHECK((so.alpha_hat[14] - last_filtered).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("smooth: smoothed means match full-sample conditioning") {
  const arima::ArimaModel model = arma(1, 0, {0.5}, {}, 1.0);
  const StateSpaceModel ssm = kalman::to_state_space(model, 0.6);
  const std::vector<double> y = gaussian_series(12, 55, 1.2);

  const oracle::JointGaussian joint(ssm, 12);
  const kalman::FilterOutput fo = kalman::filter(ssm, y);
  const kalman::SmootherOutput so = kalman::smooth(ssm, fo);
  for (int t = 0; t < 12; ++t) {
    const Eigen::VectorXd want = joint.conditional_state_mean(y, t, 12);
    CHECK((want - so.alpha_hat[t]).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("smooth: pure measurement noise gives a constant smoothed state") {
  StateSpaceModel ssm;
  ssm.T = Eigen::MatrixXd::Constant(1, 1, 1.0);
  ssm.Z = Eigen::RowVectorXd::Constant(1, 1.0);
  ssm.R = Eigen::MatrixXd::Constant(1, 1, 1.0);
  ssm.Q = Eigen::MatrixXd::Constant(1, 1, 0.0);
  ssm.H = 1.0;
  ssm.a1 = Eigen::VectorXd::Zero(1);
  ssm.P1 = Eigen::MatrixXd::Constant(1, 1, 4.0);
  const std::vector<double> y = gaussian_series(10, 9);
  const kalman::SmootherOutput so =
      kalman::smooth(ssm, kalman::filter(ssm, y));
  for (int t = 1; t < 10; ++t) {
    CHECK(so.alpha_hat[t](0) == doctest::Approx(so.alpha_hat[0](0)));
  }
}

TEST_CASE("filter/smoother exactness across small ARMA models") {
  const std::vector<arima::ArimaModel> models = {
      arma(0, 0, {}, {}, 1.0),
      arma(1, 0, {0.7}, {}, 0.5),
      arma(0, 1, {}, {0.6}, 2.0),
      arma(1, 1, {0.5}, {-0.4}, 1.0),
      arma(2, 0, {0.4, -0.35}, {}, 1.5),
      arma(0, 2, {}, {0.5, 0.25}, 0.8),
      arma(2, 1, {0.3, 0.2}, {0.6}, 1.0),
      arma(1, 2, {-0.6}, {0.4, -0.2}, 1.2),
      arma(2, 2, {0.9, -0.4}, {-0.3, 0.2}, 0.9),
  };
  int model_index = 0;
  for (const auto& model : models) {
    for (double h : {0.0, 0.5}) {
      const StateSpaceModel ssm = kalman::to_state_space(model, h);
      const std::vector<double> y =
          gaussian_series(14, 1000 + model_index, 1.0);
      const oracle::JointGaussian joint(ssm, 14);
      const kalman::FilterOutput fo = kalman::filter(ssm, y);
      const kalman::SmootherOutput so = kalman::smooth(ssm, fo);
      for (int t = 0; t < 14; ++t) {
        const Eigen::VectorXd filt = joint.conditional_state_mean(y, t, t + 1);
        const Eigen::VectorXd smth = joint.conditional_state_mean(y, t, 14);
        CHECK((filt - fo.filtered_mean(ssm, t)).cwiseAbs().maxCoeff() < 1e-8);
        CHECK((smth - so.alpha_hat[t]).cwiseAbs().maxCoeff() < 1e-8);
      }
    }
    ++model_index;
  }
}

TEST_CASE("likelihood equality: filter vs arima::loglikelihood") {
  const arima::ArimaModel model = arma(2, 1, {0.5, -0.2}, {0.3}, 1.7);
  const std::vector<double> y = gaussian_series(40, 12, 2.0);
  const TimeSeries series{std::vector<double>(y)};

  const StateSpaceModel ssm = kalman::to_state_space(model, 0.0);
  const kalman::FilterOutput fo = kalman::filter(ssm, y);
  CHECK(fo.loglik ==
        doctest::Approx(arima::loglikelihood(model, series)).epsilon(1e-10));
  CHECK(kalman::filter_loglik(ssm, y) == doctest::Approx(fo.loglik));
}

TEST_CASE("smoothing variance dominance: V_t <= P_t") {
  const StateSpaceModel ssm =
      kalman::to_state_space(arma(2, 2, {0.6, -0.3}, {0.5, -0.1}, 1.0), 0.4);
  const std::vector<double> y = gaussian_series(25, 77);
  const kalman::FilterOutput fo = kalman::filter(ssm, y);
  const kalman::SmootherOutput so = kalman::smooth(ssm, fo);
  for (std::size_t t = 0; t < y.size(); ++t) {
    const Eigen::MatrixXd diff = fo.P[t] - so.V[t];
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(diff);
    CHECK(es.eigenvalues().minCoeff() > -1e-10);
  }
}

TEST_CASE("reversal symmetry for a time-reversible AR(1)") {
  const arima::ArimaModel model = arma(1, 0, {0.6}, {}, 1.0);
  const StateSpaceModel ssm = kalman::to_state_space(model, 0.5);
  std::vector<double> y = gaussian_series(18, 21);
  std::vector<double> rev(y.rbegin(), y.rend());

  const kalman::SmootherOutput fwd =
      kalman::smooth(ssm, kalman::filter(ssm, y));
  const kalman::SmootherOutput bwd =
      kalman::smooth(ssm, kalman::filter(ssm, rev));
  for (std::size_t t = 0; t < y.size(); ++t) {
    CHECK(fwd.alpha_hat[t](0) ==
          doctest::Approx(bwd.alpha_hat[y.size() - 1 - t](0)).epsilon(1e-8));
  }
}

TEST_CASE("smoothed observation disturbance at the last point") {
  // r_n = 0, so eps_hat_n = H v_n / F_n.
  const StateSpaceModel ssm =
      kalman::to_state_space(arma(1, 0, {0.5}, {}), 0.7);
  const std::vector<double> y = gaussian_series(9, 3);
  const kalman::FilterOutput fo = kalman::filter(ssm, y);
  const kalman::SmootherOutput so = kalman::smooth(ssm, fo);
  CHECK(so.eps_hat[8] ==
        doctest::Approx(0.7 * fo.v[8] / fo.F[8]).epsilon(1e-12));
}

TEST_CASE("estimate_obs_noise stays within bounds and finds real noise") {
  std::mt19937_64 rng(derive_seed(5, 5));
  arima::ArimaModel model = arma(1, 0, {0.5}, {}, 1.0);
  model.mean = 10.0;
  TimeSeries series = arima::simulate(model, 96, rng);
  std::normal_distribution<double> obs(0.0, 0.8);
  for (double& v : series.values) v += obs(rng);

  const double h = kalman::estimate_obs_noise(model, series);
  const double var = series.variance();
  CHECK(h >= 1e-6 * var);
  CHECK(h <= 4.0 * var);
  CHECK(h > 0.05);  // true obs-noise variance was 0.64
}

TEST_CASE("detect_spikes_kalman: constant series plus impulse") {
  std::vector<double> v(96, 50.0);
  // mild wiggle so model selection keeps a positive variance
  for (std::size_t i = 0; i < v.size(); ++i) {
    v[i] += 0.01 * std::sin(0.7 * static_cast<double>(i));
  }
  v[40] += 25.0;
  const TimeSeries series{std::move(v)};
  const DetectionResult det = kalman::detect_spikes_kalman(series, 2.0);
  CHECK(det.method == Method::Kalman);
  CHECK(det.spikes.contains(40));
  CHECK(det.fitted.size() == series.size());
  CHECK(det.residuals.size() == series.size());
}

TEST_CASE("detect_spikes_kalman: spikes exceed the realized threshold") {
  std::mt19937_64 rng(derive_seed(8, 2));
  arima::ArimaModel model = arma(1, 0, {0.436}, {}, 9.36);
  model.mean = 35.53;
  TimeSeries series = arima::simulate(model, 96, rng);
  series.values[30] += 0.5 * 35.53;

  const DetectionResult det = kalman::detect_spikes_kalman(series, 2.0);
  for (std::size_t idx : det.spikes.indices) {
    CHECK(det.residuals[idx] > det.threshold_value);
  }
}
