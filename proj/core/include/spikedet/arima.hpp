#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "spikedet/time_series.hpp"

namespace spikedet::arima {

/// ARIMA(p,d,q) written as
///
///   phi(B) (1-B)^d y_t = mu' + theta(B) eps_t,   eps_t ~ N(0, sigma2)
///
/// with phi(B) = 1 - phi_1 B - ... - phi_p B^p and
///      theta(B) = 1 - theta_1 B - ... - theta_q B^q.
///
/// `mean` is the mean of the d-times-differenced series (present only when
/// d == 0 in fitted models). Stationarity and invertibility both mean all
/// polynomial roots strictly outside the unit circle.
struct ArimaModel {
  int p = 0;
  int d = 0;
  int q = 0;
  std::vector<double> ar;  // phi_1..phi_p
  std::vector<double> ma;  // theta_1..theta_q
  double mean = 0.0;
  double sigma2 = 1.0;

  bool stationary() const;
  bool invertible() const;

  /// Throws ModelError on order/coefficient mismatches, unit-circle
  /// violations, or sigma2 <= 0.
  void validate() const;
};

/// Fitted-model summary. aic = -2 loglik + 2 (p + q + mean term + variance).
struct FitReport {
  ArimaModel model;
  double loglik = 0.0;
  double aic = 0.0;
  int n_effective = 0;  // observations entering the likelihood
  bool mean_included = false;
};

/// Thrown when the optimizer exhausts its iteration budget (including
/// restarts); carries the best point found.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, FitReport best)
      : Error(what), best_(std::move(best)) {}
  const FitReport& best() const { return best_; }

 private:
  FitReport best_;
};

/// Thrown by select_order when every candidate model fails to fit; the
/// message lists the per-candidate failures.
class SelectionError : public Error {
 public:
  using Error::Error;
};

/// Draw n observations from the model. A burn-in of
/// max(200, 10 (p+q+1)) draws is discarded so the ARMA part starts in
/// approximate stationarity; for d > 0 the stationary simulation is
/// cumulatively summed d times and the result is shifted by start_level.
TimeSeries simulate(const ArimaModel& model, std::size_t n,
                    std::mt19937_64& rng, double start_level = 0.0);

/// Exact Gaussian log-likelihood of the differenced, mean-subtracted
/// series, computed by the Kalman filter on the ARMA state-space form with
/// exact stationary initialization.
double loglikelihood(const ArimaModel& model, const TimeSeries& series);

struct FitOptions {
  int max_iterations = 500;   // per optimizer run
  double param_tol = 1e-8;    // simplex diameter convergence tolerance
  int restarts = 3;           // jittered restarts before giving up
};

/// Maximum-likelihood fit with fixed orders. The search runs over an
/// unconstrained reparameterization (partial-autocorrelation transform for
/// both AR and MA sides) so every candidate is stationary and invertible;
/// sigma2 is concentrated out of the likelihood.
FitReport fit(const TimeSeries& series, int p, int d, int q,
              bool include_mean, const FitOptions& options = {});

struct SelectOptions {
  int max_p = 5;
  int max_q = 5;
  int max_d = 2;
  int max_evaluations = 94;  // total model fits in the stepwise search
  FitOptions fit;
};

/// KPSS level-stationarity statistic with Bartlett long-run variance,
/// lag floor(4 (n/100)^0.25). Large values reject stationarity.
double kpss_statistic(std::span<const double> values);

/// 5% critical value for the level-stationary KPSS test.
inline constexpr double kKpssCritical5 = 0.463;

/// Stepwise AIC order selection: d is the smallest value whose d-th
/// difference passes the KPSS test at 5%, then a stepwise search over
/// (p,q) starting from {(2,2),(0,0),(1,0),(0,1)} walks +/- 1 neighbors
/// (toggling the mean term when d == 0) while the AIC strictly improves.
FitReport select_order(const TimeSeries& series,
                       const SelectOptions& options = {});

enum class ResidualKind {
  OneStepAhead,  // standardized one-step prediction errors (default)
  InSample       // standardized smoothed innovation estimates
};

struct ArimaDetectOptions {
  double k_sd = 2.0;
  ResidualKind residual_kind = ResidualKind::OneStepAhead;
  SelectOptions selection;
};

/// Fit by select_order, then flag every index whose standardized residual
/// exceeds k_sd times the residual standard deviation (one-sided: spikes
/// are upward).
DetectionResult detect_spikes_arima(const TimeSeries& series,
                                    const ArimaDetectOptions& options = {});

inline DetectionResult detect_spikes_arima(const TimeSeries& series,
                                           double k_sd) {
  ArimaDetectOptions o;
  o.k_sd = k_sd;
  return detect_spikes_arima(series, o);
}

}  // namespace spikedet::arima
