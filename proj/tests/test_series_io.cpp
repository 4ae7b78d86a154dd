#include <doctest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "spikedet/io.hpp"
#include "spikedet/time_series.hpp"

using namespace spikedet;

TEST_CASE("YearMonth parse/format/arithmetic") {
  const YearMonth ym = YearMonth::parse("2006-07");
  CHECK(ym.year == 2006);
  CHECK(ym.month == 7);
  CHECK(ym.str() == "2006-07");
  CHECK(ym.plus(6).str() == "2007-01");
  CHECK(ym.plus(-7).str() == "2005-12");
  CHECK(ym.plus(18).months_since(ym) == 18);

  CHECK_THROWS_AS(YearMonth::parse("2006/07"), InputError);
  CHECK_THROWS_AS(YearMonth::parse("2006-13"), InputError);
  CHECK_THROWS_AS(YearMonth::parse("200-07"), InputError);
}

TEST_CASE("TimeSeries validation") {
  TimeSeries empty;
  CHECK_THROWS_AS(empty.validate(), InputError);

  TimeSeries bad(
      std::vector<double>{1.0, std::numeric_limits<double>::quiet_NaN()});
  CHECK_THROWS_AS(bad.validate(), InputError);

  TimeSeries ok({1.0, 2.0, 3.0});
  CHECK_NOTHROW(ok.validate());
  CHECK(ok.mean() == doctest::Approx(2.0));
  CHECK(ok.variance() == doctest::Approx(1.0));
}

TEST_CASE("SpikeSet ordering rules") {
  CHECK_THROWS_AS(SpikeSet({3, 3}), InputError);
  CHECK_THROWS_AS(SpikeSet({5, 2}), InputError);
  const SpikeSet s = SpikeSet::from_unsorted({9, 2, 5});
  CHECK(s.indices == std::vector<std::size_t>{2, 5, 9});
  CHECK(s.contains(5));
  CHECK(!s.contains(4));
  CHECK_THROWS_AS(s.validate(9), InputError);
  CHECK_NOTHROW(s.validate(10));
}

TEST_CASE("compute_rates: unit conversions") {
  std::istringstream in(
      "month,count,population\n"
      "2005-01,35,100000\n"
      "2005-02,0,100000\n"
      "2005-03,178,400000\n");
  const TimeSeries s = io::read_series_csv(in);
  REQUIRE(s.size() == 3);
  CHECK(s.values[0] == doctest::Approx(35.0));
  CHECK(s.values[1] == doctest::Approx(0.0));
  CHECK(s.values[2] == doctest::Approx(44.5));
  CHECK(s.origin.str() == "2005-01");
}

TEST_CASE("rate input passes through") {
  std::istringstream in(
      "month,rate\n"
      "2010-11,12.5\n"
      "2010-12,13.5\n");
  const TimeSeries s = io::read_series_csv(in);
  REQUIRE(s.size() == 2);
  CHECK(s.values[0] == doctest::Approx(12.5));
  CHECK(s.origin.str() == "2010-11");
}

TEST_CASE("gap detection lists the missing months") {
  std::istringstream in(
      "month,rate\n"
      "2005-01,1\n"
      "2005-02,1\n"
      "2005-05,1\n");
  try {
    io::read_series_csv(in);
    FAIL("expected InputError");
  } catch (const InputError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("2005-03") != std::string::npos);
    CHECK(msg.find("2005-04") != std::string::npos);
  }
}

TEST_CASE("ingestion errors carry line numbers") {
  std::istringstream bad_header("month;rate\n2005-01,1\n");
  CHECK_THROWS_WITH_AS(io::read_series_csv(bad_header),
                       doctest::Contains("line 1"), InputError);

  std::istringstream bad_value(
      "month,rate\n"
      "2005-01,1.0\n"
      "2005-02,abc\n");
  CHECK_THROWS_WITH_AS(io::read_series_csv(bad_value),
                       doctest::Contains("line 3"), InputError);

  std::istringstream zero_pop(
      "month,count,population\n"
      "2005-01,3,0\n");
  CHECK_THROWS_AS(io::read_series_csv(zero_pop), InputError);
}

TEST_CASE("plot data and spike report shapes") {
  TimeSeries s({10.0, 11.0, 30.0, 10.5}, YearMonth{2006, 5});
  DetectionResult det;
  det.method = Method::Kalman;
  det.spikes = SpikeSet({2});
  det.fitted = {10.0, 10.5, 10.6, 10.4};
  det.residuals = {0.0, 0.5, 19.4, 0.1};
  det.threshold_value = 2.0;

  std::ostringstream plot;
  io::write_plot_data(plot, s, det);
  const std::string text = plot.str();
  CHECK(text.find("time,observed,fitted,residual,spike_flag") == 0);
  CHECK(text.find("2006-07,30.000000,10.600000,19.400000,1") !=
        std::string::npos);

  std::ostringstream rep;
  io::write_spike_report(rep, s, std::vector<DetectionResult>{det});
  CHECK(rep.str() ==
        "method,n_spikes,months\n"
        "kalman,1,2006-07\n");
}
