#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "spikedet/arima.hpp"
#include "spikedet/time_series.hpp"

namespace spikedet::kalman {

/// Time-invariant linear Gaussian state-space model
///
///   alpha_{t+1} = T alpha_t + R eta_t,   eta_t ~ N(0, Q)
///   y_t         = Z alpha_t + eps_t,     eps_t ~ N(0, H)
///
/// with alpha_1 ~ N(a1, P1).
struct StateSpaceModel {
  Eigen::MatrixXd T;     // m x m transition
  Eigen::RowVectorXd Z;  // 1 x m observation row
  Eigen::MatrixXd R;     // m x r disturbance selection
  Eigen::MatrixXd Q;     // r x r disturbance covariance
  double H = 0.0;        // observation-noise variance
  Eigen::VectorXd a1;    // initial state mean
  Eigen::MatrixXd P1;    // initial state covariance

  Eigen::Index state_dim() const { return T.rows(); }
  Eigen::Index disturbance_dim() const { return Q.rows(); }

  /// Dimension and symmetry/positivity checks.
  void validate() const;
};

/// Solve P = T P T' + RQR' for the stationary state covariance
/// (vec trick: (I - T (x) T) vec P = vec RQR'). Throws ModelError if T has
/// an eigenvalue on or outside the unit circle.
Eigen::MatrixXd stationary_covariance(const Eigen::MatrixXd& T,
                                      const Eigen::MatrixXd& RQRt);

/// ARMA(p,q) companion ("Harvey") form with m = max(p, q+1): first column
/// of T holds the AR coefficients, superdiagonal identity,
/// R = (1, -theta_1, ..., -theta_{m-1})', Z = (1, 0, ..., 0), Q = sigma2.
/// a1 = 0 and P1 solves the stationary Lyapunov equation.
///
/// For d > 0 the state is augmented with d integration components whose
/// initial variance is `diffuse_variance` (the caller scales it to the
/// data, e.g. 1e7 * Var(series)).
StateSpaceModel to_state_space(const arima::ArimaModel& model,
                               double obs_noise = 0.0,
                               double diffuse_variance = 1e7);

/// Forward pass output. a[t]/P[t] are the one-step predicted moments
/// E[alpha_t | y_1..y_{t-1}] and their covariance; v, F, K follow the
/// textbook recursions; loglik is the prediction-error decomposition
/// -1/2 sum (log 2pi + log F_t + v_t^2 / F_t).
struct FilterOutput {
  std::vector<Eigen::VectorXd> a;
  std::vector<Eigen::MatrixXd> P;
  std::vector<double> v;
  std::vector<double> F;
  std::vector<Eigen::VectorXd> K;
  double loglik = 0.0;

  std::size_t size() const { return v.size(); }

  /// Filtered mean E[alpha_t | y_1..y_t] = a_t + P_t Z' v_t / F_t.
  Eigen::VectorXd filtered_mean(const StateSpaceModel& ssm,
                                std::size_t t) const;
  /// Filtered covariance P_t - P_t Z' F_t^-1 Z P_t.
  Eigen::MatrixXd filtered_cov(const StateSpaceModel& ssm,
                               std::size_t t) const;
};

FilterOutput filter(const StateSpaceModel& ssm, const TimeSeries& series);
FilterOutput filter(const StateSpaceModel& ssm, std::span<const double> y);

/// Likelihood-only filter pass; identical recursion, no stored output.
double filter_loglik(const StateSpaceModel& ssm, std::span<const double> y);

/// Accumulated quantities for the concentrated ARMA likelihood: the filter
/// is run with a unit-variance disturbance and returns
/// ssq = sum v_t^2 / F_t and sumlog = sum log F_t.
struct LikelihoodSums {
  double ssq = 0.0;
  double sumlog = 0.0;
  int n = 0;
};

LikelihoodSums filter_sums(const StateSpaceModel& ssm,
                           std::span<const double> y);

/// Backward smoothing pass. Arrays are aligned so index t holds the
/// quantities used for time t: r[t] and N[t] are r_{t-1} and N_{t-1} of the
/// recursion (alpha_hat_t = a_t + P_t r_{t-1}), eps_hat/eta_hat are the
/// smoothed observation and state disturbances with their variances.
struct SmootherOutput {
  std::vector<Eigen::VectorXd> alpha_hat;
  std::vector<Eigen::MatrixXd> V;
  std::vector<Eigen::VectorXd> r;
  std::vector<Eigen::MatrixXd> N;
  std::vector<double> eps_hat;
  std::vector<double> eps_hat_var;
  std::vector<Eigen::VectorXd> eta_hat;
  std::vector<Eigen::MatrixXd> eta_hat_var;

  /// Smoothed signal Z alpha_hat_t.
  std::vector<double> signal(const StateSpaceModel& ssm) const;

  /// eps_hat_t / sqrt(Var eps_hat_t): the auxiliary residual used as the
  /// observation-outlier diagnostic.
  std::vector<double> standardized_eps() const;
};

SmootherOutput smooth(const StateSpaceModel& ssm, const FilterOutput& fo);

/// Estimate the observation-noise variance H by one-dimensional likelihood
/// maximization with the ARIMA signal parameters held fixed. Search is on
/// a log grid refined by golden section, bounded below by
/// 1e-6 * Var(series).
double estimate_obs_noise(const arima::ArimaModel& model,
                          const TimeSeries& series);

struct KalmanDetectOptions {
  double k_sd = 2.0;
  bool use_innovations = false;  // residual = v_t/sqrt(F_t) instead of
                                 // smoothed observation disturbances
  arima::SelectOptions selection;
};

/// Select and fit an ARIMA model by AIC, move to state space with an
/// estimated observation-noise term, run filter and smoother, and flag
/// indices whose standardized smoothed observation disturbance exceeds
/// k_sd times the residual standard deviation.
DetectionResult detect_spikes_kalman(const TimeSeries& series,
                                     const KalmanDetectOptions& options = {});

inline DetectionResult detect_spikes_kalman(const TimeSeries& series,
                                            double k_sd) {
  KalmanDetectOptions o;
  o.k_sd = k_sd;
  return detect_spikes_kalman(series, o);
}

}  // namespace spikedet::kalman
