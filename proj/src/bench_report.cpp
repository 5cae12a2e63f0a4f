#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "fdkg/bench.hpp"
#include "fdkg/error.hpp"
#include "fdkg/serialization.hpp"

namespace fdkg::bench {

namespace {

using nlohmann::json;

constexpr const char* kColumns = "algorithm,env,snr_db,nmse,ker,kgr,wall_time_s,seed";
constexpr const char* kSweepColumns = "sweep_axis,sweep_value,";
constexpr double kMinTargetEnergy = 1e-12;

std::string fmt(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, sep)) out.push_back(field);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

double parse_double(const std::string& text) {
  if (text == "inf") return INFINITY;
  if (text == "-inf") return -INFINITY;
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    throw FormatError("not a number: \"" + text + "\"");
  }
  if (used != text.size()) throw FormatError("not a number: \"" + text + "\"");
  return v;
}

template <class Int>
Int parse_int(const std::string& text) {
  Int v{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) throw FormatError("not an integer: \"" + text + "\"");
  return v;
}

}  // namespace

NmseResult nmse(const nn::Matrix& predicted, const nn::Matrix& actual) {
  if (predicted.rows() != actual.rows() || predicted.cols() != actual.cols()) {
    throw DimensionError("nmse: shape mismatch");
  }
  NmseResult r;
  double sum = 0.0;
  for (Eigen::Index c = 0; c < actual.cols(); ++c) {
    const double energy = actual.col(c).squaredNorm();
    if (energy < kMinTargetEnergy) {
      ++r.excluded;
      continue;
    }
    sum += (predicted.col(c) - actual.col(c)).squaredNorm() / energy;
    ++r.used;
  }
  if (r.used == 0) throw NumericError("nmse: every target vector is degenerate");
  r.value = sum / static_cast<double>(r.used);
  return r;
}

void write_report_csv(std::ostream& out, const ExperimentReport& report) {
  const bool sweep = !report.sweep_axis.empty();
  if (sweep) out << kSweepColumns;
  out << kColumns << '\n';
  for (const ReportRow& r : report.rows) {
    if (sweep) out << report.sweep_axis << ',' << fmt(r.sweep_value.value_or(NAN)) << ',';
    out << r.algorithm << ',' << r.env << ',' << fmt(r.snr_db) << ',' << fmt(r.nmse) << ',' << fmt(r.ker) << ','
        << fmt(r.kgr) << ',' << fmt(r.wall_time_s) << ',' << r.seed << '\n';
  }
}

ExperimentReport read_report_csv(std::istream& in) {
  ExperimentReport report;
  std::string line;
  if (!std::getline(in, line)) throw FormatError("empty report");
  const bool sweep = line.rfind(kSweepColumns, 0) == 0;
  if (line != (sweep ? std::string(kSweepColumns) + kColumns : std::string(kColumns))) {
    throw FormatError("unexpected report header: " + line);
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::vector<std::string> f = split(line, ',');
    const std::size_t offset = sweep ? 2 : 0;
    if (f.size() != 8 + offset) throw FormatError("wrong field count in report row: " + line);
    ReportRow r;
    if (sweep) {
      report.sweep_axis = f[0];
      r.sweep_value = parse_double(f[1]);
    }
    r.algorithm = f[offset + 0];
    r.env = parse_int<int>(f[offset + 1]);
    r.snr_db = parse_double(f[offset + 2]);
    r.nmse = parse_double(f[offset + 3]);
    r.ker = parse_double(f[offset + 4]);
    r.kgr = parse_double(f[offset + 5]);
    r.wall_time_s = parse_double(f[offset + 6]);
    r.seed = parse_int<std::uint64_t>(f[offset + 7]);
    report.rows.push_back(std::move(r));
  }
  return report;
}

void write_randomness_csv(std::ostream& out, const ExperimentReport& report) {
  out << "test,params,n_sets,applicable,pass_ratio\n";
  for (const RandomnessRow& r : report.randomness) {
    out << r.test << ',' << r.params << ',' << r.n_sets << ',' << r.applicable << ',' << fmt(r.pass_ratio) << '\n';
  }
}

nlohmann::json report_to_json(const ExperimentReport& report) {
  json rows = json::array();
  for (const ReportRow& r : report.rows) {
    json row = {{"algorithm", r.algorithm}, {"env", r.env},   {"snr_db", channel::snr_to_json(r.snr_db)},
                {"nmse", r.nmse},           {"ker", r.ker},   {"kgr", r.kgr},
                {"wall_time_s", r.wall_time_s}, {"seed", r.seed}};
    if (r.sweep_value) row["sweep_value"] = *r.sweep_value;
    rows.push_back(std::move(row));
  }
  json randomness = json::array();
  for (const RandomnessRow& r : report.randomness) {
    randomness.push_back({{"test", r.test},
                          {"params", r.params},
                          {"n_sets", r.n_sets},
                          {"applicable", r.applicable},
                          {"pass_ratio", r.pass_ratio}});
  }
  return {{"sweep_axis", report.sweep_axis}, {"rows", rows}, {"randomness", randomness}};
}

ExperimentReport report_from_json(const nlohmann::json& j) {
  ExperimentReport report;
  try {
    report.sweep_axis = j.value("sweep_axis", std::string());
    for (const json& row : j.at("rows")) {
      ReportRow r;
      r.algorithm = row.at("algorithm").get<std::string>();
      r.env = row.at("env").get<int>();
      r.snr_db = channel::snr_from_json(row.at("snr_db"));
      r.nmse = row.at("nmse").get<double>();
      r.ker = row.at("ker").get<double>();
      r.kgr = row.at("kgr").get<double>();
      r.wall_time_s = row.at("wall_time_s").get<double>();
      r.seed = row.at("seed").get<std::uint64_t>();
      if (row.contains("sweep_value")) r.sweep_value = row.at("sweep_value").get<double>();
      report.rows.push_back(std::move(r));
    }
    for (const json& row : j.value("randomness", json::array())) {
      report.randomness.push_back({row.at("test").get<std::string>(), row.at("params").get<std::string>(),
                                   row.at("n_sets").get<std::size_t>(), row.at("applicable").get<std::size_t>(),
                                   row.at("pass_ratio").get<double>()});
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("report json: ") + e.what());
  }
  return report;
}

void emit_report(const ExperimentReport& report, ReportFormat format, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  if (format == ReportFormat::Csv) {
    write_report_csv(out, report);
  } else {
    out << report_to_json(report).dump(2) << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace fdkg::bench
