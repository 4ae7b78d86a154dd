#include "spikedet/simlab.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <ostream>
#include <thread>

#include "spikedet/ao_detect.hpp"
#include "spikedet/arima.hpp"
#include "spikedet/kalman.hpp"
#include "spikedet/rng.hpp"
#include "spikedet/wavelet.hpp"

namespace spikedet::sim {

void SimulationConfig::validate() const {
  generator.model.validate();
  if (series_length < 1) throw InputError("series_length must be >= 1");
  if (n_spikes < 0 || static_cast<std::size_t>(n_spikes) >= series_length) {
    throw InputError("n_spikes must lie in [0, series_length)");
  }
  if (magnitude_fraction < 0.0) {
    throw InputError("magnitude_fraction must be >= 0");
  }
  if (replicates < 1) throw InputError("replicates must be >= 1");
  if (methods.empty()) throw InputError("at least one method is required");
}

const CellResult* SimulationReport::find(std::string_view generator,
                                         Method method,
                                         double magnitude_fraction,
                                         int n_spikes) const {
  for (const CellResult& c : cells) {
    if (c.generator == generator && c.method == method &&
        std::abs(c.magnitude_fraction - magnitude_fraction) < 1e-12 &&
        c.n_spikes == n_spikes) {
      return &c;
    }
  }
  return nullptr;
}

std::pair<TimeSeries, SpikeSet> insert_spikes(const TimeSeries& series,
                                              int n_spikes,
                                              double magnitude_fraction,
                                              std::mt19937_64& rng) {
  series.validate();
  const std::size_t n = series.size();
  if (n_spikes < 0 || static_cast<std::size_t>(n_spikes) > n) {
    throw InputError("insert_spikes: n_spikes out of range");
  }
  if (magnitude_fraction < 0.0) {
    throw InputError("insert_spikes: magnitude_fraction must be >= 0");
  }

  // Partial Fisher-Yates over the index vector: uniform without
  // replacement, deterministic given the engine state.
  std::vector<std::size_t> pool(n);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  std::vector<std::size_t> picked;
  picked.reserve(n_spikes);
  for (int k = 0; k < n_spikes; ++k) {
    std::uniform_int_distribution<std::size_t> pick(k, n - 1);
    std::swap(pool[k], pool[pick(rng)]);
    picked.push_back(pool[k]);
  }

  TimeSeries out = series;
  const double bump = magnitude_fraction * series.mean();
  for (std::size_t idx : picked) out.values[idx] += bump;
  return {std::move(out), SpikeSet::from_unsorted(std::move(picked))};
}

ReplicateOutcome run_replicate(const SimulationConfig& config,
                               std::uint64_t replicate_seed) {
  ReplicateOutcome outcome;
  outcome.by_method.resize(config.methods.size());

  std::mt19937_64 rng = make_engine(replicate_seed);
  TimeSeries clean;
  SpikeSet inserted;
  try {
    clean = arima::simulate(config.generator.model, config.series_length, rng,
                            config.generator.start_level);
    auto [spiked, ins] = insert_spikes(clean, config.n_spikes,
                                       config.magnitude_fraction, rng);
    clean = std::move(spiked);
    inserted = std::move(ins);
  } catch (const Error& e) {
    for (auto& m : outcome.by_method) {
      m.failed = true;
      m.error = e.what();
    }
    return outcome;
  }

  for (std::size_t mi = 0; mi < config.methods.size(); ++mi) {
    MethodOutcome& mo = outcome.by_method[mi];
    try {
      DetectionResult det;
      switch (config.methods[mi]) {
        case Method::Arima:
          det = arima::detect_spikes_arima(clean, config.threshold_k);
          break;
        case Method::Kalman:
          det = kalman::detect_spikes_kalman(clean, config.threshold_k);
          break;
        case Method::Wavelet:
          det = wavelet::detect_spikes_wavelet(clean, config.threshold_k);
          break;
        case Method::AoDetect:
          det = ao::detect_spikes_ao(clean, config.ao_critical_value);
          break;
      }
      const ConfusionCounts c = score(inserted, det.spikes, clean.size());
      mo.sens = sensitivity(c);
      mo.spec = specificity(c);
    } catch (const Error& e) {
      mo.failed = true;
      mo.error = e.what();
    }
  }
  return outcome;
}

namespace {

struct Task {
  std::size_t cell = 0;
  int replicate = 0;
};

SimulationReport reduce(std::span<const SimulationConfig> configs,
                        const std::vector<std::vector<ReplicateOutcome>>&
                            outcomes) {
  SimulationReport report;
  for (std::size_t ci = 0; ci < configs.size(); ++ci) {
    const SimulationConfig& cfg = configs[ci];
    for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi) {
      CellResult cell;
      cell.generator = cfg.generator.name;
      cell.method = cfg.methods[mi];
      cell.magnitude_fraction = cfg.magnitude_fraction;
      cell.n_spikes = cfg.n_spikes;
      cell.replicates = cfg.replicates;
      cell.seed = cfg.seed;

      double s_sum = 0.0, s_sq = 0.0, p_sum = 0.0, p_sq = 0.0;
      for (const ReplicateOutcome& rep : outcomes[ci]) {
        const MethodOutcome& mo = rep.by_method[mi];
        if (mo.failed) {
          ++cell.failures;
          continue;
        }
        if (mo.sens) {
          ++cell.used_sensitivity;
          s_sum += *mo.sens;
          s_sq += *mo.sens * *mo.sens;
        }
        if (mo.spec) {
          ++cell.used_specificity;
          p_sum += *mo.spec;
          p_sq += *mo.spec * *mo.spec;
        }
      }
      auto finish = [](int n, double sum, double sq, double& mean,
                       double& se) {
        if (n == 0) {
          mean = std::numeric_limits<double>::quiet_NaN();
          se = std::numeric_limits<double>::quiet_NaN();
          return;
        }
        mean = sum / n;
        const double var =
            n > 1 ? std::max(0.0, (sq - n * mean * mean) / (n - 1)) : 0.0;
        se = std::sqrt(var / n);
      };
      finish(cell.used_sensitivity, s_sum, s_sq, cell.mean_sensitivity,
             cell.se_sensitivity);
      finish(cell.used_specificity, p_sum, p_sq, cell.mean_specificity,
             cell.se_specificity);
      cell.flagged = cell.failures * 20 > cell.replicates;  // > 5%
      report.cells.push_back(std::move(cell));
    }
  }
  return report;
}

}  // namespace

SimulationReport run_grid(std::span<const SimulationConfig> configs,
                          int threads) {
  if (configs.empty()) throw InputError("run_grid: empty configuration list");
  for (const SimulationConfig& c : configs) c.validate();

  std::vector<Task> tasks;
  std::vector<std::vector<ReplicateOutcome>> outcomes(configs.size());
  for (std::size_t ci = 0; ci < configs.size(); ++ci) {
    outcomes[ci].resize(configs[ci].replicates);
    for (int r = 0; r < configs[ci].replicates; ++r) {
      tasks.push_back({ci, r});
    }
  }

  int n_threads = threads;
  if (n_threads <= 0) {
    n_threads = static_cast<int>(std::thread::hardware_concurrency());
    if (n_threads < 1) n_threads = 1;
  }
  n_threads = std::min<int>(n_threads, static_cast<int>(tasks.size()));

  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= tasks.size()) break;
      const Task& t = tasks[i];
      const SimulationConfig& cfg = configs[t.cell];
      outcomes[t.cell][t.replicate] =
          run_replicate(cfg, derive_seed(cfg.seed, t.replicate));
    }
  };

  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  return reduce(configs, outcomes);
}

SimulationReport run_cell(const SimulationConfig& config, int threads) {
  return run_grid(std::span<const SimulationConfig>(&config, 1), threads);
}

std::vector<SimulationConfig> make_grid(
    const Generator& generator, std::size_t series_length,
    std::span<const double> magnitude_fractions, std::span<const int> counts,
    int replicates, std::uint64_t master_seed, std::vector<Method> methods,
    double threshold_k, double ao_critical_value) {
  std::vector<SimulationConfig> grid;
  std::uint64_t cell_index = 0;
  for (double mag : magnitude_fractions) {
    for (int count : counts) {
      SimulationConfig cfg;
      cfg.generator = generator;
      cfg.series_length = series_length;
      cfg.n_spikes = count;
      cfg.magnitude_fraction = mag;
      cfg.replicates = replicates;
      cfg.seed = derive_seed(master_seed, cell_index++);
      cfg.methods = methods;
      cfg.threshold_k = threshold_k;
      cfg.ao_critical_value = ao_critical_value;
      grid.push_back(std::move(cfg));
    }
  }
  return grid;
}

namespace {

std::string fmt(double v) {
  char buf[64];
  if (std::isnan(v)) return "nan";
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

}  // namespace

void write_csv(const SimulationReport& report, std::ostream& out) {
  out << "generator,method,magnitude,n_spikes,replicates,mean_sensitivity,"
         "se_sensitivity,mean_specificity,se_specificity,failures\n";
  for (const CellResult& c : report.cells) {
    out << c.generator << ',' << to_string(c.method) << ','
        << fmt(c.magnitude_fraction) << ',' << c.n_spikes << ','
        << c.replicates << ',' << fmt(c.mean_sensitivity) << ','
        << fmt(c.se_sensitivity) << ',' << fmt(c.mean_specificity) << ','
        << fmt(c.se_specificity) << ',' << c.failures << '\n';
  }
}

void write_json(const SimulationReport& report, std::ostream& out) {
  out << "{\n  \"cells\": [\n";
  for (std::size_t i = 0; i < report.cells.size(); ++i) {
    const CellResult& c = report.cells[i];
    auto num = [](double v) -> std::string {
      return std::isnan(v) ? "null" : fmt(v);
    };
    out << "    {\"generator\": \"" << c.generator << "\", \"method\": \""
        << to_string(c.method) << "\", \"magnitude\": "
        << fmt(c.magnitude_fraction) << ", \"n_spikes\": " << c.n_spikes
        << ", \"replicates\": " << c.replicates << ", \"seed\": " << c.seed
        << ", \"used_sensitivity\": " << c.used_sensitivity
        << ", \"used_specificity\": " << c.used_specificity
        << ", \"mean_sensitivity\": " << num(c.mean_sensitivity)
        << ", \"se_sensitivity\": " << num(c.se_sensitivity)
        << ", \"mean_specificity\": " << num(c.mean_specificity)
        << ", \"se_specificity\": " << num(c.se_specificity)
        << ", \"failures\": " << c.failures
        << ", \"flagged\": " << (c.flagged ? "true" : "false") << "}"
        << (i + 1 < report.cells.size() ? "," : "") << "\n";
  }
  out << "  ]\n}\n";
}

}  // namespace spikedet::sim
