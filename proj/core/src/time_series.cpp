#include "spikedet/time_series.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

namespace spikedet {

YearMonth YearMonth::parse(const std::string& text) {
  int y = 0, m = 0;
  char tail = '\0';
  if (std::sscanf(text.c_str(), "%d-%d%c", &y, &m, &tail) != 2 || m < 1 ||
      m > 12 || text.size() != 7 || text[4] != '-') {
    throw InputError("bad year-month '" + text + "', expected YYYY-MM");
  }
  return YearMonth{y, m};
}

std::string YearMonth::str() const {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02d", year, month);
  return buf;
}

YearMonth YearMonth::plus(int months) const {
  int total = year * 12 + (month - 1) + months;
  int y = total / 12;
  int m = total % 12;
  if (m < 0) {
    m += 12;
    y -= 1;
  }
  return YearMonth{y, m + 1};
}

int YearMonth::months_since(const YearMonth& other) const {
  return (year - other.year) * 12 + (month - other.month);
}

double TimeSeries::mean() const {
  if (values.empty()) return 0.0;
  return std::accumulate(values.begin(), values.end(), 0.0) /
         static_cast<double>(values.size());
}

double TimeSeries::variance() const {
  const std::size_t n = values.size();
  if (n < 2) return 0.0;
  const double m = mean();
  double acc = 0.0;
  for (double v : values) acc += (v - m) * (v - m);
  return acc / static_cast<double>(n - 1);
}

void TimeSeries::validate() const {
  if (values.empty()) throw InputError("time series must have length >= 1");
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw InputError("non-finite value at index " + std::to_string(i));
    }
  }
}

SpikeSet::SpikeSet(std::vector<std::size_t> idx) : indices(std::move(idx)) {
  for (std::size_t i = 1; i < indices.size(); ++i) {
    if (indices[i] <= indices[i - 1]) {
      throw InputError("spike indices must be strictly increasing");
    }
  }
}

SpikeSet SpikeSet::from_unsorted(std::vector<std::size_t> idx) {
  std::sort(idx.begin(), idx.end());
  if (std::adjacent_find(idx.begin(), idx.end()) != idx.end()) {
    throw InputError("duplicate spike index");
  }
  SpikeSet s;
  s.indices = std::move(idx);
  return s;
}

bool SpikeSet::contains(std::size_t i) const {
  return std::binary_search(indices.begin(), indices.end(), i);
}

void SpikeSet::validate(std::size_t n) const {
  for (std::size_t i = 1; i < indices.size(); ++i) {
    if (indices[i] <= indices[i - 1]) {
      throw InputError("spike indices must be strictly increasing");
    }
  }
  if (!indices.empty() && indices.back() >= n) {
    throw InputError("spike index " + std::to_string(indices.back()) +
                     " out of range for length " + std::to_string(n));
  }
}

std::string to_string(Method m) {
  switch (m) {
    case Method::Arima:
      return "arima";
    case Method::Kalman:
      return "kalman";
    case Method::Wavelet:
      return "wavelet";
    case Method::AoDetect:
      return "ao";
  }
  return "unknown";
}

Method parse_method(const std::string& name) {
  if (name == "arima") return Method::Arima;
  if (name == "kalman") return Method::Kalman;
  if (name == "wavelet") return Method::Wavelet;
  if (name == "ao" || name == "outlier") return Method::AoDetect;
  throw InputError("unknown method '" + name +
                   "' (expected arima|kalman|wavelet|ao)");
}

}  // namespace spikedet
