#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "spikedet/fixtures.hpp"
#include "spikedet/metrics.hpp"
#include "spikedet/time_series.hpp"

namespace spikedet::sim {

/// One simulation cell: a generator, a spike configuration, and the
/// detectors to run. Every random draw in the cell flows from `seed`:
/// replicate k uses derive_seed(seed, k), so results are independent of
/// thread count and execution order.
struct SimulationConfig {
  Generator generator;
  std::size_t series_length = 96;
  int n_spikes = 1;
  double magnitude_fraction = 0.5;
  int replicates = 1000;
  std::uint64_t seed = 0;
  std::vector<Method> methods = {Method::Arima, Method::Kalman,
                                 Method::Wavelet, Method::AoDetect};
  double threshold_k = 2.0;
  double ao_critical_value = 3.0;

  void validate() const;
};

/// Aggregates for one (generator, method, magnitude, n_spikes) cell.
/// Means are macro averages of per-replicate metrics over the replicates
/// where the metric is defined and the detector succeeded; the used_*
/// counts say how many that was.
struct CellResult {
  std::string generator;
  Method method = Method::Arima;
  double magnitude_fraction = 0.0;
  int n_spikes = 0;
  int replicates = 0;
  std::uint64_t seed = 0;
  int used_sensitivity = 0;
  int used_specificity = 0;
  double mean_sensitivity = 0.0;
  double se_sensitivity = 0.0;
  double mean_specificity = 0.0;
  double se_specificity = 0.0;
  int failures = 0;
  bool flagged = false;  // > 5% detector failures
};

struct SimulationReport {
  std::vector<CellResult> cells;

  const CellResult* find(std::string_view generator, Method method,
                         double magnitude_fraction, int n_spikes) const;
};

/// Add magnitude_fraction * mean(series) to n_spikes distinct positions
/// sampled uniformly without replacement.
std::pair<TimeSeries, SpikeSet> insert_spikes(const TimeSeries& series,
                                              int n_spikes,
                                              double magnitude_fraction,
                                              std::mt19937_64& rng);

/// Per-method outcome of one replicate.
struct MethodOutcome {
  bool failed = false;
  std::string error;
  std::optional<double> sens;
  std::optional<double> spec;
};

struct ReplicateOutcome {
  std::vector<MethodOutcome> by_method;  // aligned with config.methods
};

/// Simulate, insert spikes, run every configured detector, and score.
/// Deterministic given (config, replicate_seed).
ReplicateOutcome run_replicate(const SimulationConfig& config,
                               std::uint64_t replicate_seed);

/// Run one cell; produces one CellResult per configured method.
SimulationReport run_cell(const SimulationConfig& config, int threads = 1);

/// Run many cells, parallelizing across all (cell, replicate) pairs.
/// threads <= 0 means hardware concurrency.
SimulationReport run_grid(std::span<const SimulationConfig> configs,
                          int threads = 1);

/// Build the cross product of magnitudes and spike counts for one
/// generator; cell i gets seed derive_seed(master_seed, i).
std::vector<SimulationConfig> make_grid(
    const Generator& generator, std::size_t series_length,
    std::span<const double> magnitude_fractions, std::span<const int> counts,
    int replicates, std::uint64_t master_seed,
    std::vector<Method> methods = {Method::Arima, Method::Kalman,
                                   Method::Wavelet, Method::AoDetect},
    double threshold_k = 2.0, double ao_critical_value = 3.0);

/// Delimited-text report: header plus one line per cell with columns
/// generator, method, magnitude, n_spikes, replicates, mean_sensitivity,
/// se_sensitivity, mean_specificity, se_specificity, failures.
/// Undefined means print as "nan". Byte-stable for identical reports.
void write_csv(const SimulationReport& report, std::ostream& out);

/// Structured key/value form of the same report (JSON), one record per
/// cell, including the per-cell seed and usage counts.
void write_json(const SimulationReport& report, std::ostream& out);

}  // namespace spikedet::sim
