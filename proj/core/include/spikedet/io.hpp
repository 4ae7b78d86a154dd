#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "spikedet/time_series.hpp"

namespace spikedet::io {

/// One parsed input row: either a raw rate or a count/population pair.
struct RateRow {
  YearMonth month;
  std::optional<double> rate;
  std::optional<double> count;
  std::optional<double> population;
};

/// Parsed input file. Rows are sorted by month on load; months must be
/// contiguous.
struct RateTable {
  std::vector<RateRow> rows;
  bool has_counts = false;  // count+population columns present

  void validate() const;  // contiguity, positive populations
};

/// Read a comma-delimited file with header `month,count,population` or
/// `month,rate`. Errors carry 1-based line numbers.
RateTable read_rate_table(std::istream& in);

/// rate_t = 100000 * count_t / population_t (identity for rate input).
TimeSeries compute_rates(const RateTable& table);

/// read_rate_table followed by compute_rates.
TimeSeries read_series_csv(std::istream& in);

/// Plot-data file: header `time,observed,fitted,residual,spike_flag`, one
/// row per observation.
void write_plot_data(std::ostream& out, const TimeSeries& series,
                     const DetectionResult& result);

/// Spike report in the months-per-method table shape:
/// `method,n_spikes,months` with months "YYYY-MM" separated by "; ".
void write_spike_report(std::ostream& out, const TimeSeries& series,
                        std::span<const DetectionResult> results);

/// Structured (JSON) form of the spike report.
void write_spike_report_json(std::ostream& out, const TimeSeries& series,
                             std::span<const DetectionResult> results);

}  // namespace spikedet::io
