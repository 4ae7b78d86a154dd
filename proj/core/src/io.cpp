#include "spikedet/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

namespace spikedet::io {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) {
    // trim ASCII whitespace
    const auto b = field.find_first_not_of(" \t\r");
    const auto e = field.find_last_not_of(" \t\r");
    fields.push_back(b == std::string::npos ? ""
                                            : field.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') fields.push_back("");
  return fields;
}

double parse_number(const std::string& text, int line_no, const char* what) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(text, &pos);
    if (pos != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw InputError("line " + std::to_string(line_no) + ": bad " + what +
                     " value '" + text + "'");
  }
}

}  // namespace

void RateTable::validate() const {
  if (rows.empty()) throw InputError("rate table has no data rows");
  std::vector<std::string> missing;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const YearMonth expect = rows[i - 1].month.plus(1);
    if (rows[i].month != expect) {
      if (rows[i].month < expect) {
        throw InputError("duplicate or out-of-order month " +
                         rows[i].month.str());
      }
      for (YearMonth m = expect; m < rows[i].month; m = m.plus(1)) {
        missing.push_back(m.str());
      }
    }
  }
  if (!missing.empty()) {
    std::string msg = "months are not contiguous; missing:";
    for (const auto& m : missing) msg += " " + m;
    throw InputError(msg);
  }
  for (const RateRow& row : rows) {
    if (row.population && !(*row.population > 0.0)) {
      throw InputError("population must be > 0 at " + row.month.str());
    }
    if (row.count && *row.count < 0.0) {
      throw InputError("count must be >= 0 at " + row.month.str());
    }
  }
}

RateTable read_rate_table(std::istream& in) {
  std::string line;
  int line_no = 0;

  if (!std::getline(in, line)) throw InputError("empty input file");
  ++line_no;
  const std::vector<std::string> header = split_csv_line(line);

  RateTable table;
  if (header.size() == 3 && header[0] == "month" && header[1] == "count" &&
      header[2] == "population") {
    table.has_counts = true;
  } else if (header.size() == 2 && header[0] == "month" &&
             header[1] == "rate") {
    table.has_counts = false;
  } else {
    throw InputError(
        "line 1: expected header 'month,count,population' or 'month,rate'");
  }

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const std::vector<std::string> fields = split_csv_line(line);
    const std::size_t want = table.has_counts ? 3 : 2;
    if (fields.size() != want) {
      throw InputError("line " + std::to_string(line_no) + ": expected " +
                       std::to_string(want) + " fields, got " +
                       std::to_string(fields.size()));
    }
    RateRow row;
    try {
      row.month = YearMonth::parse(fields[0]);
    } catch (const InputError& e) {
      throw InputError("line " + std::to_string(line_no) + ": " + e.what());
    }
    if (table.has_counts) {
      row.count = parse_number(fields[1], line_no, "count");
      row.population = parse_number(fields[2], line_no, "population");
    } else {
      row.rate = parse_number(fields[1], line_no, "rate");
    }
    table.rows.push_back(row);
  }

  std::sort(table.rows.begin(), table.rows.end(),
            [](const RateRow& a, const RateRow& b) { return a.month < b.month; });
  table.validate();
  return table;
}

TimeSeries compute_rates(const RateTable& table) {
  table.validate();
  TimeSeries out;
  out.origin = table.rows.front().month;
  out.values.reserve(table.rows.size());
  for (const RateRow& row : table.rows) {
    if (row.rate) {
      out.values.push_back(*row.rate);
    } else if (row.count && row.population) {
      out.values.push_back(100000.0 * *row.count / *row.population);
    } else {
      throw InputError("row " + row.month.str() +
                       " lacks both rate and count/population");
    }
  }
  out.validate();
  return out;
}

TimeSeries read_series_csv(std::istream& in) {
  return compute_rates(read_rate_table(in));
}

void write_plot_data(std::ostream& out, const TimeSeries& series,
                     const DetectionResult& result) {
  out << "time,observed,fitted,residual,spike_flag\n";
  char buf[96];
  for (std::size_t t = 0; t < series.size(); ++t) {
    std::snprintf(buf, sizeof(buf), "%s,%.6f,%.6f,%.6f,%d\n",
                  series.origin.plus(static_cast<int>(t)).str().c_str(),
                  series.values[t], result.fitted[t], result.residuals[t],
                  result.spikes.contains(t) ? 1 : 0);
    out << buf;
  }
}

void write_spike_report(std::ostream& out, const TimeSeries& series,
                        std::span<const DetectionResult> results) {
  out << "method,n_spikes,months\n";
  for (const DetectionResult& r : results) {
    out << to_string(r.method) << ',' << r.spikes.size() << ',';
    for (std::size_t i = 0; i < r.spikes.size(); ++i) {
      if (i > 0) out << "; ";
      out << series.origin.plus(static_cast<int>(r.spikes.indices[i])).str();
    }
    out << '\n';
  }
}

void write_spike_report_json(std::ostream& out, const TimeSeries& series,
                             std::span<const DetectionResult> results) {
  out << "{\n  \"methods\": [\n";
  for (std::size_t ri = 0; ri < results.size(); ++ri) {
    const DetectionResult& r = results[ri];
    out << "    {\"method\": \"" << to_string(r.method)
        << "\", \"threshold\": " << r.threshold_value << ", \"months\": [";
    for (std::size_t i = 0; i < r.spikes.size(); ++i) {
      if (i > 0) out << ", ";
      out << '"'
          << series.origin.plus(static_cast<int>(r.spikes.indices[i])).str()
          << '"';
    }
    out << "]}" << (ri + 1 < results.size() ? "," : "") << "\n";
  }
  out << "  ]\n}\n";
}

}  // namespace spikedet::io
