#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "spikedet/time_series.hpp"

namespace spikedet::wavelet {

enum class Filter {
  Haar,
  Daubechies4  // 4-tap Daubechies filter, 2 vanishing moments
};

/// Full dyadic decomposition of a series padded to the next power of two.
/// detail[j] has 2^j coefficients (j = 0 coarsest, levels-1 finest) and
/// approx holds the single coarsest scaling coefficient. The transform is
/// orthonormal on the padded input, so squared coefficients sum to the
/// padded energy.
struct WaveletDecomposition {
  Filter filter = Filter::Daubechies4;
  int levels = 0;  // J; padded length is 2^J
  std::vector<std::vector<double>> detail;
  std::vector<double> approx;
  std::size_t original_length = 0;
  YearMonth origin{2005, 1};
  std::string period_label = "monthly";

  std::size_t padded_length() const { return std::size_t{1} << levels; }
  const std::vector<double>& finest_detail() const { return detail.back(); }
};

/// Mallat pyramid: symmetric-reflection pad to the next power of two, then
/// repeated quadrature-mirror convolution and dyadic downsampling.
WaveletDecomposition dwt(const TimeSeries& series,
                         Filter filter = Filter::Daubechies4);
WaveletDecomposition dwt(std::span<const double> values,
                         Filter filter = Filter::Daubechies4);

/// sign(b) max(|b| - lambda, 0) on every detail coefficient; the
/// approximation is untouched.
WaveletDecomposition soft_threshold(WaveletDecomposition dec, double lambda);

/// Invert the pyramid and truncate the reflection padding.
TimeSeries idwt(const WaveletDecomposition& dec);

struct WaveletDetectOptions {
  double k_sd = 2.0;
  Filter filter = Filter::Daubechies4;
  /// Override for the soft threshold; default is the universal threshold
  /// sigma_hat sqrt(2 log n_padded) with sigma_hat the MAD estimate from
  /// the finest detail level.
  std::optional<double> lambda;
};

/// Denoise by soft thresholding, take residuals against the reconstruction
/// and flag indices with residual > k_sd * SD(residuals).
DetectionResult detect_spikes_wavelet(const TimeSeries& series,
                                      const WaveletDetectOptions& options = {});

inline DetectionResult detect_spikes_wavelet(const TimeSeries& series,
                                             double k_sd) {
  WaveletDetectOptions o;
  o.k_sd = k_sd;
  return detect_spikes_wavelet(series, o);
}

}  // namespace spikedet::wavelet
