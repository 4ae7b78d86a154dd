#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "spikedet/errors.hpp"

namespace spikedet {

/// Calendar year-month, the only time label the library understands.
/// Internally everything is a 0-based index; YearMonth appears at I/O
/// boundaries only.
struct YearMonth {
  int year = 2005;
  int month = 1;  // 1..12

  /// Parse ISO "YYYY-MM".
  static YearMonth parse(const std::string& text);

  std::string str() const;

  /// Calendar month this many steps after (or before, if negative) *this.
  YearMonth plus(int months) const;

  /// Signed number of months from `other` to *this.
  int months_since(const YearMonth& other) const;

  friend auto operator<=>(const YearMonth&, const YearMonth&) = default;
};

/// Equally spaced observations with a calendar origin. Index i maps to
/// calendar month origin + i, with no gaps.
struct TimeSeries {
  std::vector<double> values;
  YearMonth origin{2005, 1};
  std::string period_label = "monthly";

  TimeSeries() = default;
  explicit TimeSeries(std::vector<double> v, YearMonth o = YearMonth{2005, 1})
      : values(std::move(v)), origin(o) {}

  std::size_t size() const { return values.size(); }

  double mean() const;
  double variance() const;  // denominator n-1; 0 for n < 2

  /// Throws InputError unless length >= 1 and every value is finite.
  void validate() const;
};

/// Strictly increasing set of 0-based time indices.
struct SpikeSet {
  std::vector<std::size_t> indices;

  SpikeSet() = default;
  explicit SpikeSet(std::vector<std::size_t> idx);

  /// Build from an arbitrary list: sorts and rejects duplicates.
  static SpikeSet from_unsorted(std::vector<std::size_t> idx);

  std::size_t size() const { return indices.size(); }
  bool empty() const { return indices.empty(); }
  bool contains(std::size_t i) const;

  /// Throws InputError if any index >= n or ordering is broken.
  void validate(std::size_t n) const;
};

enum class Method { Arima, Kalman, Wavelet, AoDetect };

std::string to_string(Method m);

/// Parse "arima" / "kalman" / "wavelet" / "ao".
Method parse_method(const std::string& name);

/// Output of a single detector run on a single series.
///
/// For the three residual-threshold methods, `residuals` are the
/// standardized residuals the threshold was applied to and every spike
/// index i satisfies residuals[i] > threshold_value. For AoDetect,
/// `residuals` holds the final outlier test statistics and
/// threshold_value is the critical value.
struct DetectionResult {
  Method method = Method::Arima;
  SpikeSet spikes;
  std::vector<double> fitted;     // same length as the input series
  std::vector<double> residuals;  // same length as the input series
  double threshold_value = 0.0;
  std::vector<std::string> warnings;
};

}  // namespace spikedet
