#include "spikedet/ao_detect.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <set>

#include "detect_util.hpp"
#include "spikedet/kalman.hpp"

namespace spikedet::ao {

namespace {

/// Multiply polynomial coefficient vectors (constant term first).
std::vector<double> poly_mul(const std::vector<double>& a,
                             const std::vector<double>& b) {
  std::vector<double> out(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
  }
  return out;
}

/// Innovation-scale residuals: standardized one-step prediction errors
/// rescaled by the model innovation SD, so early diffuse-heavy steps do
/// not blow up.
std::vector<double> model_residuals(const arima::ArimaModel& model,
                                    const TimeSeries& series) {
  const double diffuse = 1e7 * std::max(series.variance(), 1e-12);
  const kalman::StateSpaceModel ssm =
      kalman::to_state_space(model, 0.0, diffuse);
  std::vector<double> y = series.values;
  const double offset = model.d == 0 ? model.mean : 0.0;
  for (double& v : y) v -= offset;
  const kalman::FilterOutput fo = kalman::filter(ssm, y);
  const double sd = std::sqrt(model.sigma2);
  std::vector<double> eps(fo.size());
  for (std::size_t t = 0; t < fo.size(); ++t) {
    eps[t] = fo.v[t] / std::sqrt(fo.F[t]) * sd;
  }
  return eps;
}

double residual_scale(const std::vector<double>& eps, bool robust) {
  double s = robust ? detail::mad_scale(eps) : detail::sample_sd(eps);
  double peak = 0.0;
  for (double v : eps) peak = std::max(peak, std::abs(v));
  const double floor = 1e-10 * (1.0 + peak);
  if (s <= floor && robust) s = detail::sample_sd(eps);
  return s <= floor ? 0.0 : s;
}

}  // namespace

std::vector<double> pi_weights(const arima::ArimaModel& model, std::size_t n) {
  if (!model.invertible()) {
    throw ModelError("pi-weights need an invertible MA polynomial");
  }
  if (n < 1) throw InputError("pi_weights: n must be >= 1");

  // c(B) = phi(B) (1-B)^d, stored as raw coefficients c_0 = 1, c_k.
  std::vector<double> c{1.0};
  {
    std::vector<double> phi_poly(model.p + 1, 0.0);
    phi_poly[0] = 1.0;
    for (int i = 0; i < model.p; ++i) phi_poly[i + 1] = -model.ar[i];
    c = poly_mul(c, phi_poly);
    const std::vector<double> diff{1.0, -1.0};
    for (int k = 0; k < model.d; ++k) c = poly_mul(c, diff);
  }

  // Long division by theta(B): pt_k = c_k + sum_j theta_j pt_{k-j}, then
  // pi(B) = 1 - sum pi_i B^i means pi_i = -pt_i.
  std::vector<double> pt(n, 0.0);
  pt[0] = 1.0;
  for (std::size_t k = 1; k < n; ++k) {
    double v = k < c.size() ? c[k] : 0.0;
    const std::size_t jmax = std::min<std::size_t>(k, model.q);
    for (std::size_t j = 1; j <= jmax; ++j) v += model.ma[j - 1] * pt[k - j];
    pt[k] = v;
  }
  std::vector<double> pi(n - 1);
  for (std::size_t i = 1; i < n; ++i) pi[i - 1] = -pt[i];
  return pi;
}

AoStatistics ao_statistics(const AoState& state) {
  const std::size_t n = state.residuals.size();
  if (state.pi_weights.size() + 1 != n) {
    throw InputError("pi_weights and residuals come from different lengths");
  }
  if (!(state.sigma_hat > 0.0)) {
    throw InputError("ao_statistics: sigma_hat must be > 0");
  }

  AoStatistics stats;
  stats.lambda.resize(n);
  stats.omega.resize(n);
  stats.rho2.resize(n);

  const auto& pi = state.pi_weights;
  const auto& eps = state.residuals;
  for (std::size_t t = 0; t < n; ++t) {
    const std::size_t upper = n - 1 - t;  // terms i = 1..n-t in 1-based time
    double dot = 0.0, sumsq = 0.0;
    for (std::size_t i = 1; i <= upper; ++i) {
      dot += pi[i - 1] * eps[t + i];
      sumsq += pi[i - 1] * pi[i - 1];
    }
    const double rho2 = 1.0 / (1.0 + sumsq);
    const double omega = rho2 * (eps[t] - dot);
    stats.rho2[t] = rho2;
    stats.omega[t] = omega;
    stats.lambda[t] = omega / (std::sqrt(rho2) * state.sigma_hat);
  }
  return stats;
}

DetectionResult detect_spikes_ao(const TimeSeries& series,
                                 const AoDetectOptions& options) {
  series.validate();
  const std::size_t n = series.size();
  const std::size_t max_outliers = std::max<std::size_t>(1, n / 5);

  arima::FitReport rep = arima::select_order(series, options.selection);

  AoState state;
  state.model = rep.model;

  DetectionResult result;
  result.method = Method::AoDetect;
  result.threshold_value = options.critical_value;

  std::set<std::size_t> found;
  TimeSeries adjusted = series;

  auto rescan_residuals = [&]() {
    state.pi_weights = pi_weights(state.model, n);
    state.residuals = model_residuals(state.model, adjusted);
    state.sigma_hat = residual_scale(state.residuals, options.robust_scale);
  };

  bool capped = false;
  for (int outer = 0; outer < options.max_outer_iterations; ++outer) {
    rescan_residuals();

    std::vector<AoOutlier> fresh;
    while (state.sigma_hat > 0.0) {
      const AoStatistics stats = ao_statistics(state);
      double best_abs = 0.0;
      std::size_t best_t = n;
      for (std::size_t t = 0; t < n; ++t) {
        if (found.count(t)) continue;
        if (std::abs(stats.lambda[t]) > best_abs) {
          best_abs = std::abs(stats.lambda[t]);
          best_t = t;
        }
      }
      if (best_t == n || best_abs <= options.critical_value) break;
      if (found.size() >= max_outliers) {
        capped = true;
        break;
      }

      const double omega = stats.omega[best_t];
      found.insert(best_t);
      fresh.push_back({best_t, omega});
      state.known_outliers.push_back({best_t, omega});

      // Remove the outlier's footprint from the residuals and rescale.
      state.residuals[best_t] -= omega;
      for (std::size_t k = 1; best_t + k < n; ++k) {
        state.residuals[best_t + k] += omega * state.pi_weights[k - 1];
      }
      state.sigma_hat = residual_scale(state.residuals, options.robust_scale);
    }

    if (fresh.empty()) break;  // nothing new: procedure complete

    // Treat all found outliers as known: joint least squares of the raw
    // residuals on the pi-filtered indicator patterns, then re-estimate
    // the model coefficients on the outlier-adjusted series.
    const std::vector<double> raw = model_residuals(state.model, series);
    const std::size_t k = state.known_outliers.size();
    Eigen::MatrixXd X = Eigen::MatrixXd::Zero(n, k);
    for (std::size_t j = 0; j < k; ++j) {
      const std::size_t T = state.known_outliers[j].index;
      X(T, j) = 1.0;
      for (std::size_t i = 1; T + i < n; ++i) {
        X(T + i, j) = -state.pi_weights[i - 1];
      }
    }
    Eigen::VectorXd r(n);
    for (std::size_t t = 0; t < n; ++t) r(t) = raw[t];
    const Eigen::VectorXd omega = X.colPivHouseholderQr().solve(r);
    if (!omega.allFinite()) {
      result.warnings.push_back("joint outlier magnitude estimation failed");
      break;
    }
    adjusted = series;
    for (std::size_t j = 0; j < k; ++j) {
      state.known_outliers[j].magnitude = omega(j);
      adjusted.values[state.known_outliers[j].index] -= omega(j);
    }

    try {
      rep = arima::fit(adjusted, state.model.p, state.model.d, state.model.q,
                       rep.mean_included, options.selection.fit);
      state.model = rep.model;
    } catch (const arima::ConvergenceError& e) {
      state.model = e.best().model;
    } catch (const Error& e) {
      result.warnings.push_back(
          std::string("model re-estimation stopped the search: ") + e.what());
      break;
    }

    if (capped) break;
    if (outer + 1 == options.max_outer_iterations) {
      result.warnings.push_back("outer iteration cap reached");
    }
  }
  if (capped) {
    result.warnings.push_back("outlier count cap (n/5) reached");
  }

  // Final statistics under the final model for reporting.
  rescan_residuals();
  if (state.sigma_hat > 0.0) {
    result.residuals = ao_statistics(state).lambda;
  } else {
    result.residuals.assign(n, 0.0);
  }

  std::vector<std::size_t> spike_idx;
  for (const AoOutlier& o : state.known_outliers) {
    if (o.magnitude > 0.0) spike_idx.push_back(o.index);
  }
  result.spikes = SpikeSet::from_unsorted(std::move(spike_idx));

  // Fitted values: one-step predictions of the final model on the
  // outlier-adjusted series.
  {
    const double diffuse = 1e7 * std::max(series.variance(), 1e-12);
    const kalman::StateSpaceModel ssm =
        kalman::to_state_space(state.model, 0.0, diffuse);
    std::vector<double> y = adjusted.values;
    const double offset = state.model.d == 0 ? state.model.mean : 0.0;
    for (double& v : y) v -= offset;
    const kalman::FilterOutput fo = kalman::filter(ssm, y);
    result.fitted.resize(n);
    for (std::size_t t = 0; t < n; ++t) {
      result.fitted[t] = adjusted.values[t] - fo.v[t];
    }
  }
  return result;
}

}  // namespace spikedet::ao
