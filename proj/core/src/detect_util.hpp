#pragma once

// Shared helpers for the residual-threshold detectors.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "spikedet/time_series.hpp"

namespace spikedet::detail {

inline double sample_mean(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v;
  return x.empty() ? 0.0 : s / static_cast<double>(x.size());
}

inline double sample_sd(std::span<const double> x) {
  if (x.size() < 2) return 0.0;
  const double m = sample_mean(x);
  double acc = 0.0;
  for (double v : x) acc += (v - m) * (v - m);
  return std::sqrt(acc / static_cast<double>(x.size() - 1));
}

inline double median(std::vector<double> x) {
  if (x.empty()) return 0.0;
  const std::size_t mid = x.size() / 2;
  std::nth_element(x.begin(), x.begin() + mid, x.end());
  double hi = x[mid];
  if (x.size() % 2 == 1) return hi;
  std::nth_element(x.begin(), x.begin() + mid - 1, x.begin() + mid);
  return 0.5 * (hi + x[mid - 1]);
}

/// median(|x - median(x)|) / 0.6745, the usual robust scale.
inline double mad_scale(std::span<const double> x) {
  std::vector<double> tmp(x.begin(), x.end());
  const double med = median(tmp);
  for (double& v : tmp) v = std::abs(v - med);
  return median(std::move(tmp)) / 0.6745;
}

struct ThresholdCut {
  SpikeSet spikes;
  double threshold = 0.0;
};

/// One-sided positive cut: flag indices with residual > k * SD(residuals).
inline ThresholdCut threshold_positive(std::span<const double> residuals,
                                       double k) {
  ThresholdCut cut;
  cut.threshold = k * sample_sd(residuals);
  for (std::size_t i = 0; i < residuals.size(); ++i) {
    if (residuals[i] > cut.threshold) cut.spikes.indices.push_back(i);
  }
  return cut;
}

/// Apply d rounds of first differencing.
inline std::vector<double> difference(std::span<const double> y, int d) {
  std::vector<double> w(y.begin(), y.end());
  for (int k = 0; k < d; ++k) {
    for (std::size_t t = w.size(); t-- > 1;) w[t] -= w[t - 1];
    w.erase(w.begin());
  }
  return w;
}

}  // namespace spikedet::detail
