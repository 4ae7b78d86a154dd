#pragma once

// Brute-force reference implementations used only by tests. Everything
// here deliberately avoids the library's filtering code paths: moments
// come from MA(infinity) expansions and plain fixed-point iteration, and
// conditioning is done by dense joint-Gaussian algebra.

#include <Eigen/Dense>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "spikedet/arima.hpp"
#include "spikedet/kalman.hpp"

namespace oracle {

/// psi-weights of the MA(infinity) representation
/// y_t = sum_j psi_j eps_{t-j} for a stationary ARMA in the
/// theta(B) = 1 - theta_1 B - ... convention.
inline std::vector<double> psi_weights(const spikedet::arima::ArimaModel& m,
                                       std::size_t count) {
  std::vector<double> psi(count, 0.0);
  psi[0] = 1.0;
  for (std::size_t j = 1; j < count; ++j) {
    double v = j <= static_cast<std::size_t>(m.q) ? -m.ma[j - 1] : 0.0;
    for (int i = 1; i <= m.p && static_cast<std::size_t>(i) <= j; ++i) {
      v += m.ar[i - 1] * psi[j - i];
    }
    psi[j] = v;
  }
  return psi;
}

/// Autocovariance gamma(0..maxlag) of a stationary zero-mean ARMA via the
/// truncated MA(infinity) expansion.
inline std::vector<double> arma_autocov(const spikedet::arima::ArimaModel& m,
                                        int maxlag, std::size_t terms = 5000) {
  const std::vector<double> psi = psi_weights(m, terms + maxlag + 1);
  std::vector<double> gamma(maxlag + 1, 0.0);
  for (int k = 0; k <= maxlag; ++k) {
    double acc = 0.0;
    for (std::size_t j = 0; j < terms; ++j) acc += psi[j] * psi[j + k];
    gamma[k] = m.sigma2 * acc;
  }
  return gamma;
}

/// Log-density of y under N(mean * 1, Sigma) with Sigma the ARMA
/// autocovariance Toeplitz matrix plus obs_noise on the diagonal.
inline double mvn_loglik(const spikedet::arima::ArimaModel& m,
                         std::span<const double> y, double obs_noise = 0.0) {
  const int n = static_cast<int>(y.size());
  const std::vector<double> gamma = arma_autocov(m, n - 1);
  Eigen::MatrixXd sigma(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) sigma(i, j) = gamma[std::abs(i - j)];
    sigma(i, i) += obs_noise;
  }
  Eigen::VectorXd centered(n);
  for (int i = 0; i < n; ++i) centered(i) = y[i] - m.mean;

  const Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("oracle covariance not positive definite");
  }
  double logdet = 0.0;
  for (int i = 0; i < n; ++i) logdet += 2.0 * std::log(llt.matrixL()(i, i));
  const double quad = centered.dot(llt.solve(centered));
  constexpr double kLog2Pi = 1.8378770664093453;
  return -0.5 * (n * kLog2Pi + logdet + quad);
}

/// Stationary state covariance by plain fixed-point iteration
/// P <- T P T' + RQR' (a different route than the library's solvers).
inline Eigen::MatrixXd lyapunov_fixed_point(const Eigen::MatrixXd& T,
                                            const Eigen::MatrixXd& RQRt,
                                            int iterations = 20000) {
  Eigen::MatrixXd P = RQRt;
  for (int i = 0; i < iterations; ++i) {
    const Eigen::MatrixXd next = T * P * T.transpose() + RQRt;
    if ((next - P).cwiseAbs().maxCoeff() < 1e-16 * (1.0 + P.norm())) {
      return next;
    }
    P = next;
  }
  return P;
}

/// Joint Gaussian of (alpha_1..alpha_n, y_1..y_n) for a stationary
/// time-invariant state-space model, used to condition state means on any
/// prefix of the observations.
struct JointGaussian {
  int n = 0;
  int m = 0;
  Eigen::MatrixXd cov_states;     // (n m) x (n m)
  Eigen::MatrixXd cov_state_obs;  // (n m) x n
  Eigen::MatrixXd cov_obs;        // n x n

  JointGaussian(const spikedet::kalman::StateSpaceModel& ssm, int n_obs)
      : n(n_obs), m(static_cast<int>(ssm.state_dim())) {
    const Eigen::MatrixXd RQRt = ssm.R * ssm.Q * ssm.R.transpose();
    const Eigen::MatrixXd Pstat = lyapunov_fixed_point(ssm.T, RQRt);

    std::vector<Eigen::MatrixXd> Tpow(n);
    Tpow[0] = Eigen::MatrixXd::Identity(m, m);
    for (int k = 1; k < n; ++k) Tpow[k] = ssm.T * Tpow[k - 1];

    cov_states.resize(n * m, n * m);
    for (int t = 0; t < n; ++t) {
      for (int s = 0; s < n; ++s) {
        // Cov(alpha_{t}, alpha_{s}) = T^{t-s} Pstat for t >= s.
        const Eigen::MatrixXd block =
            t >= s ? Eigen::MatrixXd(Tpow[t - s] * Pstat)
                   : Eigen::MatrixXd(Pstat * Tpow[s - t].transpose());
        cov_states.block(t * m, s * m, m, m) = block;
      }
    }
    cov_state_obs.resize(n * m, n);
    cov_obs.resize(n, n);
    for (int t = 0; t < n; ++t) {
      for (int s = 0; s < n; ++s) {
        cov_state_obs.block(t * m, s, m, 1) =
            cov_states.block(t * m, s * m, m, m) * ssm.Z.transpose();
        cov_obs(t, s) =
            ssm.Z * cov_states.block(t * m, s * m, m, m) * ssm.Z.transpose();
        if (t == s) cov_obs(t, s) += ssm.H;
      }
    }
  }

  /// E[alpha_t | y_1..y_k] (0-based t, conditioning on the first k
  /// observations). Zero state/obs means are assumed.
  Eigen::VectorXd conditional_state_mean(std::span<const double> y, int t,
                                         int k) const {
    Eigen::VectorXd yk(k);
    for (int i = 0; i < k; ++i) yk(i) = y[i];
    const Eigen::MatrixXd S = cov_obs.topLeftCorner(k, k);
    const Eigen::MatrixXd C = cov_state_obs.block(t * m, 0, m, k);
    return C * S.ldlt().solve(yk);
  }
};

}  // namespace oracle
