#include "spikedet/arima.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>

#include "arma_filter.hpp"
#include "detect_util.hpp"
#include "nelder_mead.hpp"
#include "spikedet/kalman.hpp"

namespace spikedet::arima {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;
constexpr double kBigObjective = 1e300;

/// Roots of 1 - c_1 z - ... - c_k z^k all outside the unit circle, i.e.
/// the companion matrix has spectral radius < 1.
bool poly_stable(const std::vector<double>& c) {
  const int k = static_cast<int>(c.size());
  if (k == 0) return true;
  if (k == 1) return std::abs(c[0]) < 1.0;
  Eigen::MatrixXd comp = Eigen::MatrixXd::Zero(k, k);
  for (int i = 0; i < k; ++i) {
    comp(i, 0) = c[i];
    if (i + 1 < k) comp(i, i + 1) = 1.0;
  }
  return comp.eigenvalues().cwiseAbs().maxCoeff() < 1.0;
}

/// Map unconstrained values to the coefficients of a stable polynomial via
/// tanh partial autocorrelations and the Levinson recursion.
std::vector<double> partrans(std::span<const double> raw) {
  const std::size_t p = raw.size();
  std::vector<double> out(p);
  for (std::size_t i = 0; i < p; ++i) out[i] = std::tanh(raw[i]);
  std::vector<double> work(out);
  for (std::size_t j = 1; j < p; ++j) {
    for (std::size_t k = 0; k < j; ++k) {
      work[k] -= out[j] * out[j - k - 1];
    }
    std::copy(work.begin(), work.begin() + j, out.begin());
  }
  return out;
}

/// Inverse of partrans; input must be a stable coefficient vector.
std::vector<double> invpartrans(std::vector<double> coef) {
  const std::size_t p = coef.size();
  std::vector<double> work(coef);
  for (std::size_t j = p; j-- > 1;) {
    const double a = coef[j];
    const double denom = 1.0 - a * a;
    for (std::size_t k = 0; k < j; ++k) {
      work[k] = (coef[k] + a * coef[j - k - 1]) / denom;
    }
    std::copy(work.begin(), work.begin() + j, coef.begin());
  }
  for (std::size_t j = 0; j < p; ++j) {
    const double r = std::clamp(coef[j], -0.999, 0.999);
    coef[j] = std::atanh(r);
  }
  return coef;
}

/// Shrink a coefficient vector toward zero until its polynomial is stable
/// (used to sanitize rough initial estimates).
std::vector<double> stabilize(std::vector<double> c) {
  for (int pass = 0; pass < 50 && !poly_stable(c); ++pass) {
    double factor = 0.95;
    for (double& v : c) {
      v *= factor;
      factor *= 0.95;
    }
  }
  if (!poly_stable(c)) std::fill(c.begin(), c.end(), 0.0);
  return c;
}

struct HannanRissanen {
  std::vector<double> ar;
  std::vector<double> ma;
};

/// Rough ARMA starting values: long-AR residuals by Levinson-Durbin, then
/// least squares of w_t on lagged w and lagged residuals.
HannanRissanen hannan_rissanen(std::span<const double> w, int p, int q) {
  HannanRissanen hr;
  hr.ar.assign(p, 0.0);
  hr.ma.assign(q, 0.0);
  const int n = static_cast<int>(w.size());
  const int h = std::min(std::max(8, p + q + 2), n / 3);
  if (h < 1 || n < p + q + h + 2) return hr;

  const double mean = detail::sample_mean(w);
  std::vector<double> x(w.begin(), w.end());
  for (double& v : x) v -= mean;

  std::vector<double> acov(h + 1, 0.0);
  for (int lag = 0; lag <= h; ++lag) {
    for (int t = lag; t < n; ++t) acov[lag] += x[t] * x[t - lag];
    acov[lag] /= n;
  }
  if (acov[0] <= 0.0) return hr;

  // Levinson-Durbin for the AR(h) approximation.
  std::vector<double> a(h, 0.0), a_prev(h, 0.0);
  double err = acov[0];
  for (int k = 0; k < h; ++k) {
    double num = acov[k + 1];
    for (int j = 0; j < k; ++j) num -= a_prev[j] * acov[k - j];
    const double refl = num / err;
    a = a_prev;
    a[k] = refl;
    for (int j = 0; j < k; ++j) a[j] = a_prev[j] - refl * a_prev[k - 1 - j];
    err *= (1.0 - refl * refl);
    if (err <= 0.0) break;
    a_prev = a;
  }

  std::vector<double> eps(n, 0.0);
  for (int t = h; t < n; ++t) {
    double pred = 0.0;
    for (int j = 0; j < h; ++j) pred += a[j] * x[t - 1 - j];
    eps[t] = x[t] - pred;
  }

  const int t0 = std::max({p, q, h});
  const int rows = n - t0;
  if (rows < p + q + 2) return hr;
  Eigen::MatrixXd X(rows, p + q);
  Eigen::VectorXd y(rows);
  for (int t = t0; t < n; ++t) {
    y(t - t0) = x[t];
    for (int j = 0; j < p; ++j) X(t - t0, j) = x[t - 1 - j];
    for (int j = 0; j < q; ++j) X(t - t0, p + j) = eps[t - 1 - j];
  }
  Eigen::VectorXd b = X.colPivHouseholderQr().solve(y);
  if (!b.allFinite()) return hr;
  for (int j = 0; j < p; ++j) hr.ar[j] = b(j);
  for (int j = 0; j < q; ++j) hr.ma[j] = -b(p + j);
  hr.ar = stabilize(std::move(hr.ar));
  hr.ma = stabilize(std::move(hr.ma));
  return hr;
}

struct ConcentratedObjective {
  std::span<const double> w;
  int p = 0;
  int q = 0;
  bool include_mean = false;
  mutable kalman::detail::ArmaFilterScratch scratch;
  mutable std::vector<double> buffer;

  double operator()(const std::vector<double>& x) const {
    const std::span<const double> xs(x);
    const std::vector<double> phi =
        p > 0 ? partrans(xs.subspan(0, p)) : std::vector<double>{};
    const std::vector<double> theta =
        q > 0 ? partrans(xs.subspan(p, q)) : std::vector<double>{};
    const double mu = include_mean ? x[p + q] : 0.0;

    buffer.assign(w.begin(), w.end());
    for (double& v : buffer) v -= mu;
    kalman::LikelihoodSums sums;
    try {
      sums = kalman::detail::arma_concentrated_sums(phi, theta, buffer,
                                                    scratch);
    } catch (const Error&) {
      return kBigObjective;
    }
    const double sigma2 = sums.ssq / sums.n;
    if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) return kBigObjective;
    const double negll =
        0.5 * (sums.n * (kLog2Pi + 1.0) + sums.n * std::log(sigma2) +
               sums.sumlog);
    return std::isfinite(negll) ? negll : kBigObjective;
  }
};

int parameter_count(int p, int q, bool include_mean) {
  return p + q + (include_mean ? 1 : 0);
}

}  // namespace

bool ArimaModel::stationary() const { return poly_stable(ar); }
bool ArimaModel::invertible() const { return poly_stable(ma); }

void ArimaModel::validate() const {
  if (p < 0 || d < 0 || q < 0) throw ModelError("orders must be >= 0");
  if (static_cast<int>(ar.size()) != p || static_cast<int>(ma.size()) != q) {
    throw ModelError("coefficient vectors do not match the stated orders");
  }
  if (!(sigma2 > 0.0)) throw ModelError("sigma2 must be > 0");
  if (!stationary()) {
    throw ModelError("AR polynomial has a root on or inside the unit circle");
  }
  if (!invertible()) {
    throw ModelError("MA polynomial has a root on or inside the unit circle");
  }
}

TimeSeries simulate(const ArimaModel& model, std::size_t n,
                    std::mt19937_64& rng, double start_level) {
  model.validate();
  if (n < 1) throw InputError("simulate: n must be >= 1");

  const int p = model.p;
  const int q = model.q;
  const std::size_t burnin =
      std::max<std::size_t>(200, 10 * static_cast<std::size_t>(p + q + 1));
  const std::size_t total = burnin + n;

  std::normal_distribution<double> noise(0.0, std::sqrt(model.sigma2));
  std::vector<double> eps(total);
  for (double& e : eps) e = noise(rng);

  std::vector<double> z(total, 0.0);
  for (std::size_t t = 0; t < total; ++t) {
    double v = eps[t];
    for (int i = 0; i < p; ++i) {
      if (t > static_cast<std::size_t>(i)) v += model.ar[i] * z[t - 1 - i];
    }
    for (int j = 0; j < q; ++j) {
      if (t > static_cast<std::size_t>(j)) v -= model.ma[j] * eps[t - 1 - j];
    }
    z[t] = v;
  }

  std::vector<double> y(z.begin() + burnin, z.end());
  for (double& v : y) v += model.mean;
  for (int k = 0; k < model.d; ++k) {
    for (std::size_t t = 1; t < y.size(); ++t) y[t] += y[t - 1];
  }
  if (model.d > 0) {
    for (double& v : y) v += start_level;
  }
  return TimeSeries(std::move(y));
}

double loglikelihood(const ArimaModel& model, const TimeSeries& series) {
  model.validate();
  series.validate();
  std::vector<double> w = detail::difference(series.values, model.d);
  if (static_cast<int>(w.size()) <= model.p + model.q) {
    throw InputError("effective sample after differencing is too short");
  }
  for (double& v : w) v -= model.mean;

  ArimaModel arma = model;
  arma.d = 0;
  arma.mean = 0.0;
  const kalman::StateSpaceModel ssm = kalman::to_state_space(arma, 0.0);
  return kalman::filter_loglik(ssm, w);
}

FitReport fit(const TimeSeries& series, int p, int d, int q,
              bool include_mean, const FitOptions& options) {
  series.validate();
  if (p < 0 || d < 0 || q < 0) throw InputError("orders must be >= 0");
  const std::vector<double> w = detail::difference(series.values, d);
  const int n_eff = static_cast<int>(w.size());
  if (n_eff <= p + q) {
    throw InputError("series too short for ARMA(" + std::to_string(p) + "," +
                     std::to_string(q) + ") after " + std::to_string(d) +
                     " differences");
  }

  const double w_mean = detail::sample_mean(w);
  double w_var = 0.0;
  for (double v : w) w_var += (v - w_mean) * (v - w_mean);
  w_var /= std::max(1, n_eff - 1);
  const double sigma2_floor =
      1e-12 * (w_var + 1e-8 * w_mean * w_mean) + 1e-300;

  auto finalize = [&](const std::vector<double>& x) -> FitReport {
    const std::span<const double> xs(x);
    ArimaModel model;
    model.p = p;
    model.d = d;
    model.q = q;
    model.ar = p > 0 ? partrans(xs.subspan(0, p)) : std::vector<double>{};
    model.ma = q > 0 ? partrans(xs.subspan(p, q)) : std::vector<double>{};
    model.mean = include_mean ? x[p + q] : 0.0;

    kalman::detail::ArmaFilterScratch scratch;
    std::vector<double> wc(w);
    for (double& v : wc) v -= model.mean;
    const kalman::LikelihoodSums sums =
        kalman::detail::arma_concentrated_sums(model.ar, model.ma, wc,
                                               scratch);
    const double sigma2 = sums.ssq / sums.n;
    if (!(sigma2 > sigma2_floor)) {
      throw DegenerateVarianceError(
          "maximum-likelihood variance collapsed to zero (constant series?)");
    }
    model.sigma2 = sigma2;

    FitReport report;
    report.model = model;
    report.loglik = loglikelihood(model, series);
    report.n_effective = n_eff;
    report.mean_included = include_mean;
    report.aic = -2.0 * report.loglik +
                 2.0 * (parameter_count(p, q, include_mean) + 1);
    return report;
  };

  // Pure-variance models need no numerical search.
  if (p == 0 && q == 0) {
    std::vector<double> x;
    if (include_mean) x.push_back(w_mean);
    return finalize(x);
  }

  ConcentratedObjective objective;
  objective.w = std::span<const double>(w);
  objective.p = p;
  objective.q = q;
  objective.include_mean = include_mean;

  const HannanRissanen hr = hannan_rissanen(w, p, q);
  std::vector<double> x0 = invpartrans(hr.ar);
  const std::vector<double> ma0 = invpartrans(hr.ma);
  x0.insert(x0.end(), ma0.begin(), ma0.end());
  if (include_mean) x0.push_back(w_mean);

  std::mt19937_64 jitter_rng(0x5eedf17ULL);
  std::uniform_real_distribution<double> jitter(-0.5, 0.5);

  detail::NelderMeadResult best;
  best.fx = std::numeric_limits<double>::infinity();
  for (int attempt = 0; attempt <= options.restarts; ++attempt) {
    // Attempt 1 refines the incumbent with a fresh small simplex; later
    // attempts jitter away from it in case the first run stalled.
    std::vector<double> start = attempt == 0 ? x0 : best.x;
    double step = 0.1;
    if (attempt == 1) {
      step = 0.02;
    } else if (attempt > 1) {
      for (double& v : start) v += jitter(jitter_rng);
    }
    detail::NelderMeadResult r = detail::nelder_mead(
        [&objective](const std::vector<double>& x) { return objective(x); },
        std::move(start), step, options.max_iterations, options.param_tol);
    const bool good_enough =
        r.converged && r.fx <= best.fx + 1e-9 * (1.0 + std::abs(best.fx));
    if (r.fx < best.fx || best.x.empty()) best = r;
    if (good_enough && best.fx < kBigObjective) {
      best.converged = true;
      break;
    }
  }

  if (!(best.fx < kBigObjective)) {
    throw DegenerateVarianceError(
        "likelihood evaluation failed everywhere (degenerate series?)");
  }
  FitReport report = finalize(best.x);
  if (!best.converged) {
    throw ConvergenceError("optimizer did not reach the parameter tolerance",
                           report);
  }
  return report;
}

double kpss_statistic(std::span<const double> values) {
  const int n = static_cast<int>(values.size());
  if (n < 3) throw InputError("kpss_statistic: need at least 3 observations");
  const double mean = detail::sample_mean(values);
  std::vector<double> e(values.begin(), values.end());
  for (double& v : e) v -= mean;

  double s = 0.0, num = 0.0;
  for (double v : e) {
    s += v;
    num += s * s;
  }
  num /= static_cast<double>(n) * n;

  const int lag = static_cast<int>(
      std::floor(4.0 * std::pow(n / 100.0, 0.25)));
  std::vector<double> gamma(lag + 1, 0.0);
  for (int j = 0; j <= lag; ++j) {
    for (int t = j; t < n; ++t) gamma[j] += e[t] * e[t - j];
    gamma[j] /= n;
  }
  double lrv = gamma[0];
  for (int j = 1; j <= lag; ++j) {
    lrv += 2.0 * (1.0 - j / (lag + 1.0)) * gamma[j];
  }
  if (!(lrv > 0.0)) return 0.0;  // constant series: trivially stationary
  return num / lrv;
}

FitReport select_order(const TimeSeries& series, const SelectOptions& options) {
  series.validate();
  if (series.size() < 20) {
    throw InputError("select_order needs at least 20 observations");
  }

  int d = 0;
  {
    std::vector<double> x = series.values;
    while (d < options.max_d && kpss_statistic(x) > kKpssCritical5) {
      x = detail::difference(x, 1);
      ++d;
    }
  }

  struct Key {
    int p, q;
    bool mean;
    auto operator<=>(const Key&) const = default;
  };
  std::map<Key, std::optional<FitReport>> memo;
  std::vector<std::string> failures;
  int evaluations = 0;

  auto try_fit = [&](int p, int q, bool mean) -> const std::optional<FitReport>& {
    static const std::optional<FitReport> kNone;
    if (p < 0 || q < 0 || p > options.max_p || q > options.max_q) return kNone;
    const Key key{p, q, mean};
    auto it = memo.find(key);
    if (it != memo.end()) return it->second;
    if (evaluations >= options.max_evaluations) return kNone;
    ++evaluations;
    std::optional<FitReport> rep;
    try {
      rep = fit(series, p, d, q, mean, options.fit);
    } catch (const ConvergenceError& e) {
      rep = e.best();  // keep the best point; AIC comparisons still apply
    } catch (const Error& e) {
      std::ostringstream msg;
      msg << "(" << p << "," << d << "," << q << (mean ? ",mean" : "")
          << "): " << e.what();
      failures.push_back(msg.str());
    }
    return memo.emplace(key, std::move(rep)).first->second;
  };

  const bool mean0 = (d == 0);
  const std::optional<FitReport>* incumbent = nullptr;
  for (auto [p0, q0] : {std::pair{2, 2}, {0, 0}, {1, 0}, {0, 1}}) {
    const auto& rep = try_fit(p0, q0, mean0);
    if (rep && (!incumbent || !*incumbent || rep->aic < (*incumbent)->aic)) {
      incumbent = &try_fit(p0, q0, mean0);
    }
  }
  if (!incumbent || !*incumbent) {
    std::ostringstream msg;
    msg << "every candidate model failed to fit:";
    for (const auto& f : failures) msg << "\n  " << f;
    throw SelectionError(msg.str());
  }

  FitReport current = **incumbent;
  bool improved = true;
  while (improved && evaluations < options.max_evaluations) {
    improved = false;
    const int p = current.model.p;
    const int q = current.model.q;
    const bool mean = current.mean_included;

    std::vector<Key> moves = {
        {p - 1, q, mean},     {p + 1, q, mean},     {p, q - 1, mean},
        {p, q + 1, mean},     {p - 1, q - 1, mean}, {p + 1, q + 1, mean},
    };
    if (d == 0) moves.push_back({p, q, !mean});

    for (const Key& k : moves) {
      const auto& rep = try_fit(k.p, k.q, k.mean);
      if (rep && rep->aic < current.aic) {
        current = *rep;
        improved = true;
      }
    }
  }
  return current;
}

DetectionResult detect_spikes_arima(const TimeSeries& series,
                                    const ArimaDetectOptions& options) {
  series.validate();
  const FitReport rep = select_order(series, options.selection);
  const ArimaModel& model = rep.model;

  const double diffuse = 1e7 * std::max(series.variance(), 1e-12);
  const kalman::StateSpaceModel ssm =
      kalman::to_state_space(model, 0.0, diffuse);

  std::vector<double> y = series.values;
  const double offset = model.d == 0 ? model.mean : 0.0;
  for (double& v : y) v -= offset;

  const kalman::FilterOutput fo = kalman::filter(ssm, y);

  DetectionResult result;
  result.method = Method::Arima;
  result.residuals.resize(fo.size());
  result.fitted.resize(fo.size());

  if (options.residual_kind == ResidualKind::OneStepAhead) {
    for (std::size_t t = 0; t < fo.size(); ++t) {
      result.residuals[t] = fo.v[t] / std::sqrt(fo.F[t]);
      result.fitted[t] = series.values[t] - fo.v[t];
    }
  } else {
    const kalman::SmootherOutput so = kalman::smooth(ssm, fo);
    const Eigen::MatrixXd QRt = ssm.Q * ssm.R.transpose();
    for (std::size_t t = 0; t < fo.size(); ++t) {
      const double est = (QRt * so.r[t])(0);
      const double var = (QRt * so.N[t] * QRt.transpose())(0, 0);
      result.residuals[t] = var > 0.0 ? est / std::sqrt(var) : 0.0;
      result.fitted[t] = series.values[t] - est;
    }
  }

  const auto cut = detail::threshold_positive(result.residuals, options.k_sd);
  result.spikes = cut.spikes;
  result.threshold_value = cut.threshold;
  return result;
}

}  // namespace spikedet::arima
