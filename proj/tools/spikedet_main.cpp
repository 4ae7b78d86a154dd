// spikedet command-line tool: ingest rate series, run spike detectors,
// and drive simulation grids.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "spikedet/ao_detect.hpp"
#include "spikedet/arima.hpp"
#include "spikedet/io.hpp"
#include "spikedet/kalman.hpp"
#include "spikedet/rng.hpp"
#include "spikedet/simlab.hpp"
#include "spikedet/wavelet.hpp"

namespace fs = std::filesystem;
using namespace spikedet;

namespace {

std::vector<int> parse_int_list(const std::string& text) {
  // "1..10" or "1,2,5"
  std::vector<int> out;
  const auto dots = text.find("..");
  if (dots != std::string::npos) {
    const int lo = std::stoi(text.substr(0, dots));
    const int hi = std::stoi(text.substr(dots + 2));
    for (int v = lo; v <= hi; ++v) out.push_back(v);
    return out;
  }
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stoi(item));
  return out;
}

std::vector<double> parse_percent_list(const std::string& text) {
  std::vector<double> out;
  for (int v : parse_int_list(text)) out.push_back(v / 100.0);
  return out;
}

std::vector<Method> parse_methods(const std::string& text) {
  if (text == "all") {
    return {Method::Arima, Method::Kalman, Method::Wavelet, Method::AoDetect};
  }
  std::vector<Method> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_method(item));
  return out;
}

TimeSeries load_series(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open input file '" + path + "'");
  return io::read_series_csv(in);
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  return out;
}

/// Custom generator description: a small key=value file with keys
/// p, d, q, ar, ma, mean, sigma2, start_level, name (ar/ma comma lists).
sim::Generator load_generator_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open generator file '" + path + "'");
  sim::Generator g;
  g.name = fs::path(path).stem().string();
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw InputError("generator file line " + std::to_string(line_no) +
                       ": expected key=value");
    }
    const std::string key = line.substr(0, eq);
    const std::string val = line.substr(eq + 1);
    auto parse_doubles = [](const std::string& s) {
      std::vector<double> out;
      std::stringstream ss(s);
      std::string item;
      while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
      return out;
    };
    if (key == "p") g.model.p = std::stoi(val);
    else if (key == "d") g.model.d = std::stoi(val);
    else if (key == "q") g.model.q = std::stoi(val);
    else if (key == "ar") g.model.ar = parse_doubles(val);
    else if (key == "ma") g.model.ma = parse_doubles(val);
    else if (key == "mean") g.model.mean = std::stod(val);
    else if (key == "sigma2") g.model.sigma2 = std::stod(val);
    else if (key == "start_level") g.start_level = std::stod(val);
    else if (key == "name") g.name = val;
    else {
      throw InputError("generator file line " + std::to_string(line_no) +
                       ": unknown key '" + key + "'");
    }
  }
  g.model.validate();
  return g;
}

sim::Generator resolve_generator(const std::string& spec, std::size_t length) {
  if (const sim::CityFixture* f = sim::find_fixture(spec)) {
    return sim::calibrated_generator(*f, length);
  }
  if (fs::exists(spec)) return load_generator_file(spec);
  std::string msg = "unknown generator '" + spec + "'; available fixtures:";
  for (const auto& f : sim::city_fixtures()) msg += " " + f.name;
  throw InputError(msg);
}

int cmd_fixtures() {
  std::printf("%-14s %-12s %8s %8s\n", "name", "model", "mean", "sd");
  for (const auto& f : sim::city_fixtures()) {
    std::printf("%-14s ARIMA(%d,%d,%d) %8.2f %8.2f\n", f.name.c_str(),
                f.shape.p, f.shape.d, f.shape.q, f.mean, f.sd);
  }
  return 0;
}

int cmd_rates(const std::string& input, const std::string& output) {
  std::ifstream in(input);
  if (!in) throw InputError("cannot open input file '" + input + "'");
  const TimeSeries series = io::compute_rates(io::read_rate_table(in));

  std::ostream* out = &std::cout;
  std::ofstream file;
  if (!output.empty()) {
    file = open_out(output);
    out = &file;
  }
  *out << "month,rate\n";
  char buf[64];
  for (std::size_t t = 0; t < series.size(); ++t) {
    std::snprintf(buf, sizeof(buf), "%s,%.6f\n",
                  series.origin.plus(static_cast<int>(t)).str().c_str(),
                  series.values[t]);
    *out << buf;
  }
  return 0;
}

int cmd_detect(const std::string& input, const std::string& method_spec,
               double threshold, double critical_value,
               const std::string& out_dir, const std::string& format) {
  const TimeSeries series = load_series(input);
  const std::vector<Method> methods = parse_methods(method_spec);
  fs::create_directories(out_dir);

  std::vector<DetectionResult> results;
  std::vector<std::string> errors;
  for (Method m : methods) {
    try {
      DetectionResult det;
      switch (m) {
        case Method::Arima:
          det = arima::detect_spikes_arima(series, threshold);
          break;
        case Method::Kalman:
          det = kalman::detect_spikes_kalman(series, threshold);
          break;
        case Method::Wavelet:
          det = wavelet::detect_spikes_wavelet(series, threshold);
          break;
        case Method::AoDetect:
          det = ao::detect_spikes_ao(series, critical_value);
          break;
      }
      for (const std::string& w : det.warnings) {
        std::cerr << to_string(m) << ": warning: " << w << "\n";
      }
      auto plot =
          open_out(fs::path(out_dir) / ("plot_" + to_string(m) + ".csv"));
      io::write_plot_data(plot, series, det);
      results.push_back(std::move(det));
    } catch (const Error& e) {
      errors.push_back(to_string(m) + ": " + e.what());
      std::cerr << "error: " << errors.back() << "\n";
    }
  }

  if (format == "structured") {
    auto rep = open_out(fs::path(out_dir) / "spike_report.json");
    io::write_spike_report_json(rep, series, results);
  } else {
    auto rep = open_out(fs::path(out_dir) / "spike_report.csv");
    io::write_spike_report(rep, series, results);
  }
  io::write_spike_report(std::cout, series, results);
  return errors.empty() ? 0 : 1;
}

int cmd_simulate(const std::string& generator_spec,
                 const std::string& magnitudes, const std::string& counts,
                 int reps, std::uint64_t seed, bool seed_given,
                 double threshold, double critical_value,
                 const std::string& methods_spec, std::size_t length,
                 int threads, const std::string& out_dir) {
  if (!seed_given) {
    seed = std::random_device{}();
  }
  std::cout << "seed: " << seed << "\n";

  const sim::Generator gen = resolve_generator(generator_spec, length);
  const std::vector<double> mags = parse_percent_list(magnitudes);
  const std::vector<int> ns = parse_int_list(counts);
  const std::vector<sim::SimulationConfig> grid =
      sim::make_grid(gen, length, mags, ns, reps, seed,
                     parse_methods(methods_spec), threshold, critical_value);

  const sim::SimulationReport report = sim::run_grid(grid, threads);

  fs::create_directories(out_dir);
  {
    auto csv = open_out(fs::path(out_dir) / "report.csv");
    sim::write_csv(report, csv);
    auto json = open_out(fs::path(out_dir) / "report.json");
    sim::write_json(report, json);
  }

  std::printf("%-14s %-8s %5s %8s %10s %10s %9s\n", "generator", "method",
              "mag%", "n_spikes", "sens%", "spec%", "failures");
  for (const auto& c : report.cells) {
    std::printf("%-14s %-8s %5.0f %8d %10.2f %10.2f %9d\n",
                c.generator.c_str(), to_string(c.method).c_str(),
                100.0 * c.magnitude_fraction, c.n_spikes,
                100.0 * c.mean_sensitivity, 100.0 * c.mean_specificity,
                c.failures);
  }

  bool flagged = false;
  for (const auto& c : report.cells) flagged = flagged || c.flagged;
  if (flagged) {
    std::cerr << "warning: at least one cell had > 5% detector failures\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"spike detection toolkit for monthly rate series"};
  app.require_subcommand(1);

  // fixtures
  app.add_subcommand("fixtures", "list built-in simulation generators");

  // rates
  auto* rates = app.add_subcommand(
      "rates", "convert a month,count,population CSV to rates per 100,000");
  std::string rates_in, rates_out;
  rates->add_option("--input", rates_in, "input CSV")->required();
  rates->add_option("--output", rates_out, "output CSV (default stdout)");

  // detect
  auto* detect =
      app.add_subcommand("detect", "run spike detectors on a rate series");
  std::string det_in, det_method = "all", det_out = ".", det_format = "csv";
  double det_threshold = 2.0, det_critical = 3.0;
  detect->add_option("--input", det_in, "input CSV (month,rate or counts)")
      ->required();
  detect->add_option("--method", det_method, "arima|kalman|wavelet|ao|all");
  detect->add_option("--threshold", det_threshold,
                     "residual SD multiple for the threshold methods");
  detect->add_option("--critical-value", det_critical,
                     "critical value for outlier detection");
  detect->add_option("--out", det_out, "output directory");
  detect->add_option("--format", det_format, "csv|structured spike report")
      ->check(CLI::IsMember({"csv", "structured"}));

  // simulate
  auto* simulate = app.add_subcommand(
      "simulate", "run a sensitivity/specificity simulation grid");
  std::string sim_gen, sim_mags = "10,20,30,40,50", sim_counts = "1..10";
  std::string sim_methods = "all", sim_out = ".";
  int sim_reps = 1000, sim_threads = 0;
  std::uint64_t sim_seed = 0;
  std::size_t sim_length = 96;
  double sim_threshold = 2.0, sim_critical = 3.0;
  simulate->add_option("--generator", sim_gen,
                       "fixture name or generator file")
      ->required();
  simulate->add_option("--magnitudes", sim_mags,
                       "spike magnitudes in percent (list or a..b)");
  simulate->add_option("--counts", sim_counts,
                       "spike counts (list or a..b)");
  simulate->add_option("--reps", sim_reps, "replicates per cell");
  auto* seed_opt = simulate->add_option("--seed", sim_seed, "master seed");
  simulate->add_option("--threshold", sim_threshold, "residual SD multiple");
  simulate->add_option("--critical-value", sim_critical,
                       "outlier-detection critical value");
  simulate->add_option("--methods", sim_methods, "subset of methods");
  simulate->add_option("--length", sim_length, "series length");
  simulate->add_option("--threads", sim_threads,
                       "worker threads (0 = hardware)");
  simulate->add_option("--out", sim_out, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand("fixtures")) return cmd_fixtures();
    if (app.got_subcommand("rates")) return cmd_rates(rates_in, rates_out);
    if (app.got_subcommand("detect")) {
      return cmd_detect(det_in, det_method, det_threshold, det_critical,
                        det_out, det_format);
    }
    if (app.got_subcommand("simulate")) {
      return cmd_simulate(sim_gen, sim_mags, sim_counts, sim_reps, sim_seed,
                          seed_opt->count() > 0, sim_threshold, sim_critical,
                          sim_methods, sim_length, sim_threads, sim_out);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
