#pragma once

#include <cstddef>
#include <vector>

#include "spikedet/arima.hpp"
#include "spikedet/time_series.hpp"

namespace spikedet::ao {

struct AoOutlier {
  std::size_t index = 0;
  double magnitude = 0.0;  // estimated omega
};

/// Working state of the iterative procedure: the current model, its
/// pi-weights (pi(B) = phi(B)(1-B)^d / theta(B), truncated), the current
/// residual sequence and scale, and the outliers treated as known.
struct AoState {
  arima::ArimaModel model;
  std::vector<double> pi_weights;  // pi_1 .. pi_{n-1}
  std::vector<double> residuals;
  double sigma_hat = 1.0;
  std::vector<AoOutlier> known_outliers;
};

/// Coefficients pi_1..pi_{n-1} of pi(B) = 1 - sum_i pi_i B^i obtained by
/// long division of phi(B) (1-B)^d by theta(B).
std::vector<double> pi_weights(const arima::ArimaModel& model, std::size_t n);

/// Per-time outlier test quantities:
///   rho2_t   = (1 + sum_{i=1}^{n-t} pi_i^2)^-1
///   omega_t  = rho2_t (eps_t - sum_{i=1}^{n-t} pi_i eps_{t+i})
///   lambda_t = omega_t / (rho_t sigma_hat)
struct AoStatistics {
  std::vector<double> lambda;
  std::vector<double> omega;
  std::vector<double> rho2;
};

AoStatistics ao_statistics(const AoState& state);

struct AoDetectOptions {
  double critical_value = 3.0;
  bool robust_scale = true;  // MAD-based sigma_hat; false uses the raw SD
  int max_outer_iterations = 10;
  arima::SelectOptions selection;
};

/// Full iterative additive-outlier search: fit, scan the lambda statistics,
/// peel off the largest outlier and adjust the residuals, repeat; then
/// re-estimate the model treating found outliers as known and rescan until
/// nothing new appears. Positive-magnitude outliers are reported as spikes.
/// Hard caps (n/5 outliers, max_outer_iterations rounds) guard against
/// non-termination and leave a warning in the result when hit.
DetectionResult detect_spikes_ao(const TimeSeries& series,
                                 const AoDetectOptions& options = {});

inline DetectionResult detect_spikes_ao(const TimeSeries& series,
                                        double critical_value) {
  AoDetectOptions o;
  o.critical_value = critical_value;
  return detect_spikes_ao(series, o);
}

}  // namespace spikedet::ao
