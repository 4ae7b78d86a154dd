#pragma once

// Derivative-free simplex minimizer used for the ARMA likelihood surface.
// Adaptive expansion/contraction coefficients (scaled by dimension) keep
// the search stable in the 4-6 parameter fits the order search produces.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

namespace spikedet::detail {

struct NelderMeadResult {
  std::vector<double> x;
  double fx = 0.0;
  int evaluations = 0;
  bool converged = false;
};

inline NelderMeadResult nelder_mead(
    const std::function<double(const std::vector<double>&)>& f,
    std::vector<double> x0, double step, int max_iterations, double xtol) {
  const std::size_t n = x0.size();
  NelderMeadResult out;
  if (n == 0) {
    out.x = x0;
    out.fx = f(x0);
    out.evaluations = 1;
    out.converged = true;
    return out;
  }

  const double dim = static_cast<double>(n);
  const double alpha = 1.0;
  const double beta = 1.0 + 2.0 / dim;   // expansion
  const double gamma = 0.75 - 0.5 / dim; // contraction
  const double delta = 0.5;              // shrink

  std::vector<std::vector<double>> simplex(n + 1, x0);
  std::vector<double> fx(n + 1);
  for (std::size_t i = 0; i < n; ++i) simplex[i + 1][i] += step;
  for (std::size_t i = 0; i <= n; ++i) {
    fx[i] = f(simplex[i]);
    ++out.evaluations;
  }

  std::vector<std::size_t> order(n + 1);
  std::vector<double> centroid(n), xr(n), xe(n), xc(n);

  for (int iter = 0; iter < max_iterations; ++iter) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return fx[a] < fx[b]; });
    const std::size_t best = order[0];
    const std::size_t worst = order[n];
    const std::size_t second_worst = order[n - 1];

    double diameter = 0.0;
    for (std::size_t i = 1; i <= n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        diameter = std::max(
            diameter, std::abs(simplex[order[i]][j] - simplex[best][j]));
      }
    }
    // Converged when vertices coincide to xtol or the function values
    // agree to a relative spread where further refinement cannot move any
    // downstream decision (AIC comparisons act at the 1e-1 scale).
    // Converged when vertices coincide to xtol, or when the function
    // spread is far below anything an AIC comparison or residual
    // threshold can resolve. The likelihood surface of overparameterized
    // ARMA fits has flat ridges of statistically equivalent models; the
    // spread test stops the walk along them.
    if (diameter < xtol ||
        fx[worst] - fx[best] < 1e-8 * (1.0 + std::abs(fx[best]))) {
      out.converged = true;
      break;
    }

    std::fill(centroid.begin(), centroid.end(), 0.0);
    for (std::size_t i = 0; i <= n; ++i) {
      if (i == worst) continue;
      for (std::size_t j = 0; j < n; ++j) centroid[j] += simplex[i][j];
    }
    for (double& c : centroid) c /= dim;

    for (std::size_t j = 0; j < n; ++j) {
      xr[j] = centroid[j] + alpha * (centroid[j] - simplex[worst][j]);
    }
    const double fr = f(xr);
    ++out.evaluations;

    if (fr < fx[best]) {
      for (std::size_t j = 0; j < n; ++j) {
        xe[j] = centroid[j] + beta * (xr[j] - centroid[j]);
      }
      const double fe = f(xe);
      ++out.evaluations;
      if (fe < fr) {
        simplex[worst] = xe;
        fx[worst] = fe;
      } else {
        simplex[worst] = xr;
        fx[worst] = fr;
      }
    } else if (fr < fx[second_worst]) {
      simplex[worst] = xr;
      fx[worst] = fr;
    } else {
      const bool outside = fr < fx[worst];
      if (outside) {
        for (std::size_t j = 0; j < n; ++j) {
          xc[j] = centroid[j] + gamma * (xr[j] - centroid[j]);
        }
      } else {
        for (std::size_t j = 0; j < n; ++j) {
          xc[j] = centroid[j] - gamma * (centroid[j] - simplex[worst][j]);
        }
      }
      const double fc = f(xc);
      ++out.evaluations;
      if (fc < std::min(fr, fx[worst])) {
        simplex[worst] = xc;
        fx[worst] = fc;
      } else {
        for (std::size_t i = 0; i <= n; ++i) {
          if (i == best) continue;
          for (std::size_t j = 0; j < n; ++j) {
            simplex[i][j] =
                simplex[best][j] + delta * (simplex[i][j] - simplex[best][j]);
          }
          fx[i] = f(simplex[i]);
          ++out.evaluations;
        }
      }
    }
  }

  std::size_t best = 0;
  for (std::size_t i = 1; i <= n; ++i) {
    if (fx[i] < fx[best]) best = i;
  }
  out.x = simplex[best];
  out.fx = fx[best];
  return out;
}

}  // namespace spikedet::detail
