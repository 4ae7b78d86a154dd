#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>

#include "spikedet/arima.hpp"

namespace spikedet::sim {

/// A city-parameterized generator shape: ARIMA orders and coefficients
/// plus the target mean and standard deviation of the generated series.
/// The innovation variance is left at 1 and supplied by calibration.
struct CityFixture {
  std::string name;
  arima::ArimaModel shape;
  double mean = 0.0;
  double sd = 1.0;
};

/// The nine built-in city fixtures.
std::span<const CityFixture> city_fixtures();

/// nullptr when the name is unknown. Names are lower_snake_case
/// ("los_angeles", "san_diego", ...).
const CityFixture* find_fixture(std::string_view name);

/// A ready-to-simulate generator: innovation variance calibrated so the
/// generated series matches the fixture's mean/SD targets, plus the level
/// anchor used for integrated models.
struct Generator {
  std::string name;
  arima::ArimaModel model;
  double start_level = 0.0;
};

/// Calibrate a fixture for a given series length. For stationary shapes
/// sigma2 comes from the closed-form stationary variance; for integrated
/// shapes it is set so the expected sample SD over `length` points matches
/// the target, estimated by an internal fixed-seed Monte-Carlo.
Generator calibrated_generator(const CityFixture& fixture,
                               std::size_t length = 96);

}  // namespace spikedet::sim
