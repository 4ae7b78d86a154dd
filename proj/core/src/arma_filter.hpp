#pragma once

// Private fast path for the concentrated ARMA likelihood. The simulation
// harness evaluates this inside every optimizer step, so everything here
// runs on fixed-capacity Eigen matrices (no heap traffic) and exploits the
// companion structure of the transition matrix:
//
//   (T x)_i    = phi_{i+1} x_0 + x_{i+1}
//   (T P)_{ij} = phi_{i+1} P_{0j} + P_{i+1,j}
//
// Results agree with kalman::filter to 1e-10; tests pin the equality.

#include <Eigen/Dense>
#include <cmath>
#include <span>

#include "spikedet/errors.hpp"
#include "spikedet/kalman.hpp"

namespace spikedet::kalman::detail {

inline constexpr int kMaxArmaState = 6;  // max(p, q+1) with p,q <= 5

using ArmaMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0,
                              kMaxArmaState, kMaxArmaState>;
using ArmaVec =
    Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxArmaState, 1>;
using KronMat =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0,
                  kMaxArmaState * kMaxArmaState, kMaxArmaState * kMaxArmaState>;
using KronVec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0,
                              kMaxArmaState * kMaxArmaState, 1>;

struct ArmaFilterScratch {
  ArmaVec phi;   // padded to m
  ArmaVec rvec;  // (1, -theta_1, ..., -theta_{m-1})
  ArmaMat RQR;
  ArmaMat P;
  ArmaMat TP;
  ArmaMat Pnew;
  ArmaVec a;
  ArmaVec anew;
  ArmaMat A;   // doubling: T^(2^k)
  ArmaMat AS;  // doubling workspace
};

/// Stationary covariance of the companion-form state with unit innovation
/// variance by doubling: P = sum_k T^k RR' T'^k, folded as
/// S <- S + A S A', A <- A^2 until the increment vanishes.
inline void stationary_cov_unit(ArmaFilterScratch& s, int m) {
  s.P = s.RQR;
  s.A.resize(m, m);
  s.A.setZero();
  for (int i = 0; i < m; ++i) {
    s.A(i, 0) = s.phi(i);
    if (i + 1 < m) s.A(i, i + 1) = 1.0;
  }
  s.AS.resize(m, m);
  for (int k = 0; k < 64; ++k) {
    s.AS.noalias() = s.A * s.P;
    s.Pnew.noalias() = s.AS * s.A.transpose();
    const double inc = s.Pnew.cwiseAbs().maxCoeff();
    s.P += s.Pnew;
    if (!std::isfinite(inc)) {
      throw ModelError("stationary covariance iteration diverged");
    }
    if (inc < 1e-14 * (1.0 + s.P.cwiseAbs().maxCoeff())) {
      s.P = 0.5 * (s.P + s.P.transpose()).eval();
      return;
    }
    s.AS = s.A;
    s.A.noalias() = s.AS * s.AS;
  }
  throw ModelError("stationary covariance solve failed (unit root?)");
}

/// Concentrated-likelihood sums for a zero-mean ARMA(p,q) on w: runs the
/// exact filter with unit innovation variance and accumulates
/// ssq = sum v^2/F and sumlog = sum log F. Switches to the steady-state
/// gain once P converges.
inline LikelihoodSums arma_concentrated_sums(std::span<const double> phi,
                                             std::span<const double> theta,
                                             std::span<const double> w,
                                             ArmaFilterScratch& s) {
  const int p = static_cast<int>(phi.size());
  const int q = static_cast<int>(theta.size());
  const int m = std::max(p, q + 1);

  s.phi.resize(m);
  for (int i = 0; i < m; ++i) s.phi(i) = i < p ? phi[i] : 0.0;
  s.rvec.resize(m);
  s.rvec(0) = 1.0;
  for (int i = 1; i < m; ++i) s.rvec(i) = i <= q ? -theta[i - 1] : 0.0;
  s.RQR.resize(m, m);
  s.RQR.noalias() = s.rvec * s.rvec.transpose();

  stationary_cov_unit(s, m);

  s.a.setZero(m);
  s.anew.resize(m);
  s.TP.resize(m, m);
  s.Pnew.resize(m, m);

  LikelihoodSums out;
  bool steady = false;
  double F = 0.0;
  ArmaVec Kgain(m);

  for (std::size_t t = 0; t < w.size(); ++t) {
    if (!steady) {
      F = s.P(0, 0);
      if (!(F > 1e-300)) {
        throw FilterError("innovation variance collapsed during filtering");
      }
      // TP_{ij} = phi_i P_{0j} + P_{i+1,j}
      for (int j = 0; j < m; ++j) {
        const double p0j = s.P(0, j);
        for (int i = 0; i < m; ++i) {
          s.TP(i, j) = s.phi(i) * p0j + (i + 1 < m ? s.P(i + 1, j) : 0.0);
        }
      }
      Kgain = s.TP.col(0) / F;
      // Pnew = TP T' + RQR' - (TP e1)(TP e1)'/F
      for (int j = 0; j < m; ++j) {
        const double kj = s.TP(j, 0);
        for (int i = 0; i < m; ++i) {
          double tpt = s.phi(j) * s.TP(i, 0) + (j + 1 < m ? s.TP(i, j + 1) : 0.0);
          s.Pnew(i, j) = tpt + s.RQR(i, j) - s.TP(i, 0) * kj / F;
        }
      }
      s.Pnew = 0.5 * (s.Pnew + s.Pnew.transpose()).eval();
      if ((s.Pnew - s.P).cwiseAbs().maxCoeff() < 1e-13 * (1.0 + F)) {
        steady = true;
      }
      s.P = s.Pnew;
    }
    const double v = w[t] - s.a(0);
    out.ssq += v * v / F;
    out.sumlog += std::log(F);
    ++out.n;
    const double a0 = s.a(0);
    for (int i = 0; i < m; ++i) {
      s.anew(i) = s.phi(i) * a0 + (i + 1 < m ? s.a(i + 1) : 0.0) + Kgain(i) * v;
    }
    s.a = s.anew;
  }
  return out;
}

}  // namespace spikedet::kalman::detail
