#include "spikedet/kalman.hpp"

#include <algorithm>
#include <cmath>

#include "detect_util.hpp"
#include "spikedet/errors.hpp"

namespace spikedet::kalman {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;  // log(2 pi)
constexpr double kVarianceFloor = 1e-300;

void check_dims(const StateSpaceModel& ssm) {
  const auto m = ssm.T.rows();
  if (ssm.T.cols() != m || ssm.Z.cols() != m || ssm.R.rows() != m ||
      ssm.Q.rows() != ssm.Q.cols() || ssm.R.cols() != ssm.Q.rows() ||
      ssm.a1.size() != m || ssm.P1.rows() != m || ssm.P1.cols() != m) {
    throw InputError("state-space matrices have inconsistent dimensions");
  }
}

}  // namespace

void StateSpaceModel::validate() const {
  check_dims(*this);
  if (H < 0.0) throw ModelError("observation-noise variance must be >= 0");
  auto check_psd = [](const Eigen::MatrixXd& M, const char* name) {
    if (!M.isApprox(M.transpose(), 1e-8)) {
      throw ModelError(std::string(name) + " must be symmetric");
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
    if (es.eigenvalues().minCoeff() < -1e-8 * (1.0 + M.norm())) {
      throw ModelError(std::string(name) + " must be positive semidefinite");
    }
  };
  check_psd(Q, "Q");
  check_psd(P1, "P1");
}

Eigen::MatrixXd stationary_covariance(const Eigen::MatrixXd& T,
                                      const Eigen::MatrixXd& RQRt) {
  const auto m = T.rows();
  if (T.cols() != m || RQRt.rows() != m || RQRt.cols() != m) {
    throw InputError("stationary_covariance: dimension mismatch");
  }
  const double rho = T.eigenvalues().cwiseAbs().maxCoeff();
  if (!(rho < 1.0 - 1e-10)) {
    throw ModelError("transition matrix has spectral radius " +
                     std::to_string(rho) + " >= 1; no stationary solution");
  }
  Eigen::MatrixXd A = Eigen::MatrixXd::Identity(m * m, m * m);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j)
      for (Eigen::Index k = 0; k < m; ++k)
        for (Eigen::Index l = 0; l < m; ++l)
          A(i + k * m, j + l * m) -= T(i, j) * T(k, l);
  Eigen::VectorXd b(m * m);
  for (Eigen::Index l = 0; l < m; ++l)
    for (Eigen::Index k = 0; k < m; ++k) b(k + l * m) = RQRt(k, l);
  Eigen::VectorXd x = A.fullPivLu().solve(b);
  Eigen::MatrixXd P(m, m);
  for (Eigen::Index l = 0; l < m; ++l)
    for (Eigen::Index k = 0; k < m; ++k) P(k, l) = x(k + l * m);
  P = 0.5 * (P + P.transpose()).eval();
  if (!P.allFinite()) throw ModelError("Lyapunov solve produced non-finite P");
  return P;
}

StateSpaceModel to_state_space(const arima::ArimaModel& model,
                               double obs_noise, double diffuse_variance) {
  model.validate();
  if (obs_noise < 0.0) throw InputError("obs_noise must be >= 0");

  const int p = model.p;
  const int q = model.q;
  const int d = model.d;
  const int r = std::max(p, q + 1);
  const int m = r + d;

  StateSpaceModel ssm;
  ssm.T = Eigen::MatrixXd::Zero(m, m);
  for (int i = 0; i < r; ++i) {
    if (i < p) ssm.T(i, 0) = model.ar[i];
    if (i + 1 < r) ssm.T(i, i + 1) = 1.0;
  }
  ssm.Z = Eigen::RowVectorXd::Zero(m);
  ssm.Z(0) = 1.0;
  ssm.R = Eigen::MatrixXd::Zero(m, 1);
  ssm.R(0, 0) = 1.0;
  for (int i = 1; i < r; ++i) {
    if (i <= q) ssm.R(i, 0) = -model.ma[i - 1];
  }
  ssm.Q = Eigen::MatrixXd::Constant(1, 1, model.sigma2);
  ssm.H = obs_noise;
  ssm.a1 = Eigen::VectorXd::Zero(m);

  Eigen::MatrixXd Tr = ssm.T.topLeftCorner(r, r);
  Eigen::MatrixXd RQRr =
      model.sigma2 * (ssm.R.topRows(r) * ssm.R.topRows(r).transpose());
  Eigen::MatrixXd Pr = stationary_covariance(Tr, RQRr);

  ssm.P1 = Eigen::MatrixXd::Zero(m, m);
  ssm.P1.topLeftCorner(r, r) = Pr;

  if (d > 0) {
    // Integration components carry the levels: with w_t the ARMA part and
    // delta_j the coefficients of 1 - (1-B)^d,
    //   y_t = w_t + sum_j delta_j y_{t-j}.
    std::vector<double> delta(d);
    double binom = 1.0;
    for (int j = 1; j <= d; ++j) {
      binom = binom * (d - j + 1) / j;
      delta[j - 1] = (j % 2 == 1 ? 1.0 : -1.0) * binom;
    }
    for (int j = 0; j < d; ++j) ssm.Z(r + j) = delta[j];
    // Row r tracks y_t; rows r+1.. shift the older lags down.
    ssm.T(r, 0) = 1.0;  // Z restricted to the ARMA block
    for (int j = 0; j < d; ++j) ssm.T(r, r + j) = delta[j];
    for (int j = 1; j < d; ++j) ssm.T(r + j, r + j - 1) = 1.0;
    for (int j = 0; j < d; ++j) ssm.P1(r + j, r + j) = diffuse_variance;
  }
  return ssm;
}

FilterOutput filter(const StateSpaceModel& ssm, const TimeSeries& series) {
  series.validate();
  return filter(ssm, std::span<const double>(series.values));
}

FilterOutput filter(const StateSpaceModel& ssm, std::span<const double> y) {
  check_dims(ssm);
  const std::size_t n = y.size();

  FilterOutput fo;
  fo.a.reserve(n);
  fo.P.reserve(n);
  fo.v.reserve(n);
  fo.F.reserve(n);
  fo.K.reserve(n);

  const Eigen::MatrixXd RQRt = ssm.R * ssm.Q * ssm.R.transpose();
  Eigen::VectorXd a = ssm.a1;
  Eigen::MatrixXd P = ssm.P1;

  for (std::size_t t = 0; t < n; ++t) {
    const double v = y[t] - ssm.Z.dot(a);                       // Eq. 5
    const Eigen::VectorXd PZt = P * ssm.Z.transpose();
    const double F = ssm.Z.dot(PZt) + ssm.H;                    // Eq. 9
    if (!(F > kVarianceFloor)) {
      throw FilterError("innovation variance F_" + std::to_string(t + 1) +
                        " fell below the numerical floor");
    }
    const Eigen::VectorXd K = ssm.T * PZt / F;                  // Eq. 11

    fo.a.push_back(a);
    fo.P.push_back(P);
    fo.v.push_back(v);
    fo.F.push_back(F);
    fo.K.push_back(K);
    fo.loglik -= 0.5 * (kLog2Pi + std::log(F) + v * v / F);

    // a_{t+1} = T a_{t|t} (Eq. 7, 10); P_{t+1} = T P (T - K Z)' + RQR'
    // (Eq. 12, 13).
    a = ssm.T * a + K * v;
    P = ssm.T * P * (ssm.T - K * ssm.Z).transpose() + RQRt;
    P = 0.5 * (P + P.transpose()).eval();
  }
  return fo;
}

Eigen::VectorXd FilterOutput::filtered_mean(const StateSpaceModel& ssm,
                                            std::size_t t) const {
  return a[t] + P[t] * ssm.Z.transpose() * (v[t] / F[t]);
}

Eigen::MatrixXd FilterOutput::filtered_cov(const StateSpaceModel& ssm,
                                           std::size_t t) const {
  const Eigen::VectorXd PZt = P[t] * ssm.Z.transpose();
  return P[t] - PZt * PZt.transpose() / F[t];
}

double filter_loglik(const StateSpaceModel& ssm, std::span<const double> y) {
  check_dims(ssm);
  const Eigen::MatrixXd RQRt = ssm.R * ssm.Q * ssm.R.transpose();
  Eigen::VectorXd a = ssm.a1;
  Eigen::MatrixXd P = ssm.P1;
  double loglik = 0.0;
  for (std::size_t t = 0; t < y.size(); ++t) {
    const double v = y[t] - ssm.Z.dot(a);
    const Eigen::VectorXd PZt = P * ssm.Z.transpose();
    const double F = ssm.Z.dot(PZt) + ssm.H;
    if (!(F > kVarianceFloor)) {
      throw FilterError("innovation variance fell below the numerical floor");
    }
    const Eigen::VectorXd K = ssm.T * PZt / F;
    loglik -= 0.5 * (kLog2Pi + std::log(F) + v * v / F);
    a = ssm.T * a + K * v;
    P = ssm.T * P * (ssm.T - K * ssm.Z).transpose() + RQRt;
    P = 0.5 * (P + P.transpose()).eval();
  }
  return loglik;
}

LikelihoodSums filter_sums(const StateSpaceModel& ssm,
                           std::span<const double> y) {
  check_dims(ssm);
  const Eigen::MatrixXd RQRt = ssm.R * ssm.Q * ssm.R.transpose();
  Eigen::VectorXd a = ssm.a1;
  Eigen::MatrixXd P = ssm.P1;
  LikelihoodSums out;
  for (std::size_t t = 0; t < y.size(); ++t) {
    const double v = y[t] - ssm.Z.dot(a);
    const Eigen::VectorXd PZt = P * ssm.Z.transpose();
    const double F = ssm.Z.dot(PZt) + ssm.H;
    if (!(F > kVarianceFloor)) {
      throw FilterError("innovation variance fell below the numerical floor");
    }
    const Eigen::VectorXd K = ssm.T * PZt / F;
    out.ssq += v * v / F;
    out.sumlog += std::log(F);
    ++out.n;
    a = ssm.T * a + K * v;
    P = ssm.T * P * (ssm.T - K * ssm.Z).transpose() + RQRt;
    P = 0.5 * (P + P.transpose()).eval();
  }
  return out;
}

SmootherOutput smooth(const StateSpaceModel& ssm, const FilterOutput& fo) {
  check_dims(ssm);
  const auto m = ssm.state_dim();
  const std::size_t n = fo.size();
  if (fo.a.size() != n || fo.P.size() != n || fo.K.size() != n) {
    throw InputError("filter output arrays have mismatched lengths");
  }

  SmootherOutput so;
  so.alpha_hat.resize(n);
  so.V.resize(n);
  so.r.resize(n);
  so.N.resize(n);
  so.eps_hat.resize(n);
  so.eps_hat_var.resize(n);
  so.eta_hat.resize(n);
  so.eta_hat_var.resize(n);

  const Eigen::MatrixXd QRt = ssm.Q * ssm.R.transpose();
  Eigen::VectorXd r = Eigen::VectorXd::Zero(m);   // r_n
  Eigen::MatrixXd N = Eigen::MatrixXd::Zero(m, m);  // N_n

  for (std::size_t ti = n; ti-- > 0;) {
    const double finv = 1.0 / fo.F[ti];
    // Observation disturbance: u_t = F^-1 v - K' r_t, eps_hat = H u_t,
    // Var(eps_hat) = H^2 (F^-1 + K' N_t K).
    const double u = finv * fo.v[ti] - fo.K[ti].dot(r);
    const double D = finv + (fo.K[ti].transpose() * N * fo.K[ti]).value();
    so.eps_hat[ti] = ssm.H * u;
    so.eps_hat_var[ti] = ssm.H * ssm.H * D;
    // State disturbance: eta_hat_t = Q R' r_t, Var = Q R' N_t R Q.
    so.eta_hat[ti] = QRt * r;
    so.eta_hat_var[ti] = QRt * N * QRt.transpose();

    const Eigen::MatrixXd L = ssm.T - fo.K[ti] * ssm.Z;
    const Eigen::VectorXd r_prev =
        ssm.Z.transpose() * (finv * fo.v[ti]) + L.transpose() * r;
    Eigen::MatrixXd N_prev =
        ssm.Z.transpose() * finv * ssm.Z + L.transpose() * N * L;
    N_prev = 0.5 * (N_prev + N_prev.transpose()).eval();

    so.alpha_hat[ti] = fo.a[ti] + fo.P[ti] * r_prev;
    Eigen::MatrixXd V = fo.P[ti] - fo.P[ti] * N_prev * fo.P[ti];
    so.V[ti] = 0.5 * (V + V.transpose()).eval();
    so.r[ti] = r_prev;
    so.N[ti] = N_prev;

    r = r_prev;
    N = N_prev;
  }
  return so;
}

std::vector<double> SmootherOutput::signal(const StateSpaceModel& ssm) const {
  std::vector<double> s(alpha_hat.size());
  for (std::size_t t = 0; t < alpha_hat.size(); ++t) {
    s[t] = ssm.Z.dot(alpha_hat[t]);
  }
  return s;
}

std::vector<double> SmootherOutput::standardized_eps() const {
  std::vector<double> e(eps_hat.size(), 0.0);
  for (std::size_t t = 0; t < eps_hat.size(); ++t) {
    if (eps_hat_var[t] > 0.0) {
      e[t] = eps_hat[t] / std::sqrt(eps_hat_var[t]);
    }
  }
  return e;
}

double estimate_obs_noise(const arima::ArimaModel& model,
                          const TimeSeries& series) {
  series.validate();
  const double var = std::max(series.variance(), 1e-12);
  const double h_lo = 1e-6 * var;
  const double h_hi = 4.0 * var;
  const double diffuse = 1e7 * var;

  std::vector<double> y = series.values;
  if (model.d == 0) {
    for (double& v : y) v -= model.mean;
  }
  auto negloglik = [&](double h) {
    const StateSpaceModel ssm = to_state_space(model, h, diffuse);
    return -filter_loglik(ssm, y);
  };

  // Coarse log-spaced scan, then golden-section refinement around the
  // best bracket. The likelihood in H is close to unimodal; the scan
  // protects against flat stretches near the lower bound.
  constexpr int kScan = 25;
  const double llo = std::log(h_lo), lhi = std::log(h_hi);
  double best_l = llo, best_f = negloglik(h_lo);
  for (int i = 1; i < kScan; ++i) {
    const double l = llo + (lhi - llo) * i / (kScan - 1);
    const double f = negloglik(std::exp(l));
    if (f < best_f) {
      best_f = f;
      best_l = l;
    }
  }
  const double step = (lhi - llo) / (kScan - 1);
  double a = std::max(llo, best_l - step);
  double b = std::min(lhi, best_l + step);
  constexpr double kGolden = 0.6180339887498949;
  double x1 = b - kGolden * (b - a);
  double x2 = a + kGolden * (b - a);
  double f1 = negloglik(std::exp(x1));
  double f2 = negloglik(std::exp(x2));
  for (int it = 0; it < 40; ++it) {
    if (f1 < f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - kGolden * (b - a);
      f1 = negloglik(std::exp(x1));
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + kGolden * (b - a);
      f2 = negloglik(std::exp(x2));
    }
  }
  const double l = f1 < f2 ? x1 : x2;
  const double f = std::min(f1, f2);
  return f < best_f ? std::exp(l) : std::exp(best_l);
}

DetectionResult detect_spikes_kalman(const TimeSeries& series,
                                     const KalmanDetectOptions& options) {
  series.validate();
  const arima::FitReport rep = arima::select_order(series, options.selection);
  const arima::ArimaModel& model = rep.model;

  const double h = estimate_obs_noise(model, series);
  const double diffuse = 1e7 * std::max(series.variance(), 1e-12);
  const StateSpaceModel ssm = to_state_space(model, h, diffuse);

  std::vector<double> y = series.values;
  const double offset = model.d == 0 ? model.mean : 0.0;
  for (double& v : y) v -= offset;

  const FilterOutput fo = filter(ssm, y);
  const SmootherOutput so = smooth(ssm, fo);

  DetectionResult result;
  result.method = Method::Kalman;
  if (options.use_innovations) {
    result.residuals.resize(fo.size());
    for (std::size_t t = 0; t < fo.size(); ++t) {
      result.residuals[t] = fo.v[t] / std::sqrt(fo.F[t]);
    }
  } else {
    result.residuals = so.standardized_eps();
  }
  result.fitted = so.signal(ssm);
  for (double& v : result.fitted) v += offset;

  const auto cut = detail::threshold_positive(result.residuals, options.k_sd);
  result.spikes = cut.spikes;
  result.threshold_value = cut.threshold;
  return result;
}

}  // namespace spikedet::kalman
