#include "spikedet/fixtures.hpp"

#include <array>
#include <cmath>
#include <vector>

#include "detect_util.hpp"
#include "spikedet/kalman.hpp"
#include "spikedet/rng.hpp"

namespace spikedet::sim {

namespace {

arima::ArimaModel make_shape(int p, int d, int q, std::vector<double> ar,
                             std::vector<double> ma, double mean) {
  arima::ArimaModel m;
  m.p = p;
  m.d = d;
  m.q = q;
  m.ar = std::move(ar);
  m.ma = std::move(ma);
  m.mean = mean;
  m.sigma2 = 1.0;
  return m;
}

// City parameterizations. MA signs follow the theta(B) = 1 - theta_1 B -
// ... convention, so a displayed "+ c eps_{t-1}" term stores theta_1 = -c.
// Integrated shapes carry no drift; their level is anchored at the city
// mean by the calibrated generator.
const std::array<CityFixture, 9>& fixture_table() {
  static const std::array<CityFixture, 9> table = {{
      {"oakland",
       make_shape(4, 1, 2, {0.8481, -0.1436, 0.3572, -0.6178},
                  {1.6616, -0.7814}, 0.0),
       79.28, 11.79},
      {"san_diego", make_shape(2, 0, 0, {0.3605, 0.1875}, {}, 30.72), 30.72,
       3.20},
      {"los_angeles", make_shape(1, 0, 0, {0.436}, {}, 35.53), 35.53, 3.40},
      {"sacramento",
       make_shape(2, 0, 1, {-0.465, 0.5180}, {-0.9315}, 50.99), 50.99, 6.85},
      {"fresno", make_shape(1, 1, 1, {0.5306}, {0.9504}, 0.0), 49.20, 6.38},
      {"san_francisco", make_shape(1, 0, 0, {0.3151}, {}, 46.65), 46.65,
       5.01},
      {"stockton", make_shape(1, 0, 0, {0.3440}, {}, 54.58), 54.58, 7.90},
      {"richmond", make_shape(0, 1, 1, {}, {0.7940}, 0.0), 73.59, 12.49},
      {"berkeley", make_shape(1, 0, 1, {0.8762}, {0.6531}, 28.41), 28.41,
       6.84},
  }};
  return table;
}

/// Stationary variance of the ARMA part with unit innovation variance.
double unit_stationary_variance(const arima::ArimaModel& shape) {
  arima::ArimaModel unit = shape;
  unit.d = 0;
  unit.mean = 0.0;
  unit.sigma2 = 1.0;
  const kalman::StateSpaceModel ssm = kalman::to_state_space(unit, 0.0);
  return ssm.P1(0, 0);
}

/// Expected sample SD over `length` points of the integrated series with
/// unit innovation variance, by a fixed-seed Monte-Carlo.
double unit_integrated_sd(const arima::ArimaModel& shape, std::size_t length) {
  arima::ArimaModel unit = shape;
  unit.mean = 0.0;
  unit.sigma2 = 1.0;
  constexpr int kReplicates = 2000;
  std::mt19937_64 rng(splitmix64(0xca11b8a7e5ULL));
  double acc = 0.0;
  for (int r = 0; r < kReplicates; ++r) {
    const TimeSeries s = arima::simulate(unit, length, rng, 0.0);
    acc += detail::sample_sd(s.values);
  }
  return acc / kReplicates;
}

}  // namespace

std::span<const CityFixture> city_fixtures() { return fixture_table(); }

const CityFixture* find_fixture(std::string_view name) {
  for (const CityFixture& f : fixture_table()) {
    if (f.name == name) return &f;
  }
  return nullptr;
}

Generator calibrated_generator(const CityFixture& fixture,
                               std::size_t length) {
  Generator g;
  g.name = fixture.name;
  g.model = fixture.shape;

  if (fixture.shape.d == 0) {
    const double unit_var = unit_stationary_variance(fixture.shape);
    g.model.sigma2 = fixture.sd * fixture.sd / unit_var;
    g.model.mean = fixture.mean;
    g.start_level = 0.0;
  } else {
    const double unit_sd = unit_integrated_sd(fixture.shape, length);
    const double scale = fixture.sd / unit_sd;
    g.model.sigma2 = scale * scale;
    g.model.mean = 0.0;
    g.start_level = fixture.mean;
  }
  g.model.validate();
  return g;
}

}  // namespace spikedet::sim
