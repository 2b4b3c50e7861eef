#pragma once

// CSV (de)serialization for every dataset the toolkit exchanges on disk.
// Comma separated, mandatory header, '.' decimal separator. Doubles are written
// in shortest round-trip form so write -> read is lossless.

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "tse/core.hpp"
#include "tse/simnet.hpp"

namespace tse::csv {

inline constexpr std::string_view kTracesHeader = "vehicle_id,route_id,t_in_s,t_out_s";
inline constexpr std::string_view kDetectionsHeader = "sensor_id,kind,spot_id,token,t_s";
inline constexpr std::string_view kSeriesHeader = "series_id,interval_index,value,unit";
inline constexpr std::string_view kLoopsHeader = "detector_id,interval_index,count,occupancy_pct";
inline constexpr std::string_view kPhasesHeader = "controller_id,t_s,phase";
inline constexpr std::string_view kMissingLiteral = "NA";

inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc{}) throw std::runtime_error("number formatting failed");
  return std::string(buf, ptr);
}

inline std::string format_sample(const Sample& v) {
  return v ? format_double(*v) : std::string(kMissingLiteral);
}

inline std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  for (;;) {
    auto comma = line.find(',', pos);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(pos));
      break;
    }
    out.push_back(line.substr(pos, comma - pos));
    pos = comma + 1;
  }
  return out;
}

inline double parse_double(std::string_view s, std::size_t line, std::string_view field) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v))
    throw ParseError(line, "invalid number '" + std::string(s) + "' in field " + std::string(field));
  return v;
}

inline long long parse_int(std::string_view s, std::size_t line, std::string_view field) {
  long long v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw ParseError(line, "invalid integer '" + std::string(s) + "' in field " + std::string(field));
  return v;
}

// Iterates data rows, checking the header and the column count.
template <typename RowFn>
void for_each_row(std::istream& in, std::string_view header, RowFn&& fn) {
  std::string line;
  std::size_t lineno = 0;
  bool seen_header = false;
  const std::size_t columns = split(header).size();
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!seen_header) {
      if (line != header)
        throw SchemaError("line 1: expected header '" + std::string(header) + "', got '" + line + "'");
      seen_header = true;
      continue;
    }
    if (line.empty()) continue;
    auto fields = split(line);
    if (fields.size() != columns)
      throw ParseError(lineno, "expected " + std::to_string(columns) + " fields, got " +
                                   std::to_string(fields.size()));
    fn(fields, lineno);
  }
  if (!seen_header) throw SchemaError("missing header row '" + std::string(header) + "'");
}

// ---------------------------------------------------------------------------
// traces.csv
// ---------------------------------------------------------------------------

inline void write_traces(std::ostream& out, const std::vector<VehicleTrace>& traces) {
  out << kTracesHeader << '\n';
  for (const auto& t : traces)
    out << t.vehicle_id << ',' << t.route_id << ',' << format_double(t.t_in) << ','
        << format_double(t.t_out) << '\n';
}

inline std::vector<VehicleTrace> read_traces(std::istream& in) {
  std::vector<VehicleTrace> out;
  for_each_row(in, kTracesHeader, [&](const auto& f, std::size_t line) {
    VehicleTrace t;
    t.vehicle_id = std::string(f[0]);
    if (t.vehicle_id.empty()) throw ParseError(line, "empty vehicle_id");
    t.route_id = static_cast<int>(parse_int(f[1], line, "route_id"));
    t.t_in = parse_double(f[2], line, "t_in_s");
    t.t_out = parse_double(f[3], line, "t_out_s");
    if (t.t_out < t.t_in) throw ParseError(line, "t_out_s precedes t_in_s");
    out.push_back(std::move(t));
  });
  return out;
}

// ---------------------------------------------------------------------------
// detections.csv (several sensors per file, grouped by sensor_id in file order)
// ---------------------------------------------------------------------------

inline void write_detections(std::ostream& out, const std::vector<DetectionSet>& sets) {
  out << kDetectionsHeader << '\n';
  for (const auto& s : sets)
    for (const auto& d : s.sightings)
      out << s.sensor_id << ',' << to_string(s.kind) << ',' << d.spot_id << ','
          << d.token.value_or("") << ',' << format_double(d.t) << '\n';
}

inline std::vector<DetectionSet> read_detections(std::istream& in) {
  std::vector<DetectionSet> out;
  std::map<std::string, std::size_t, std::less<>> index;
  for_each_row(in, kDetectionsHeader, [&](const auto& f, std::size_t line) {
    auto kind = parse_sensor_kind(f[1]);
    if (!kind) throw SchemaError("line " + std::to_string(line) + ": unknown sensor kind '" + std::string(f[1]) + "'");
    auto it = index.find(f[0]);
    if (it == index.end()) {
      it = index.emplace(std::string(f[0]), out.size()).first;
      out.push_back({std::string(f[0]), *kind, {}});
    }
    auto& set = out[it->second];
    if (set.kind != *kind)
      throw SchemaError("line " + std::to_string(line) + ": sensor " + set.sensor_id + " changes kind");
    Sighting s;
    s.spot_id = static_cast<int>(parse_int(f[2], line, "spot_id"));
    if (*kind == SensorKind::count_only) {
      if (!f[3].empty()) throw SchemaError("line " + std::to_string(line) + ": count_only sighting carries a token");
    } else {
      if (f[3].empty()) throw SchemaError("line " + std::to_string(line) + ": tokenized sensor row without token");
      s.token = std::string(f[3]);
    }
    s.t = parse_double(f[4], line, "t_s");
    set.sightings.push_back(std::move(s));
  });
  return out;
}

// ---------------------------------------------------------------------------
// series.csv
// ---------------------------------------------------------------------------

struct NamedSeries {
  std::string id;
  SampledSeries series;
  friend bool operator==(const NamedSeries&, const NamedSeries&) = default;
};

inline void write_series(std::ostream& out, const std::vector<NamedSeries>& all) {
  out << kSeriesHeader << '\n';
  for (const auto& ns : all)
    for (std::size_t i = 0; i < ns.series.size(); ++i)
      out << ns.id << ',' << i << ',' << format_sample(ns.series[i]) << ','
          << to_string(ns.series.unit) << '\n';
}

// Every series in the file must cover all intervals of `grid` exactly once.
inline std::vector<NamedSeries> read_series(std::istream& in, const IntervalGrid& grid) {
  std::vector<NamedSeries> out;
  std::vector<std::vector<bool>> seen;
  std::map<std::string, std::size_t, std::less<>> index;
  const std::size_t n = grid.size();
  for_each_row(in, kSeriesHeader, [&](const auto& f, std::size_t line) {
    auto unit = parse_unit(f[3]);
    if (!unit) throw SchemaError("line " + std::to_string(line) + ": unknown unit '" + std::string(f[3]) + "'");
    auto it = index.find(f[0]);
    if (it == index.end()) {
      it = index.emplace(std::string(f[0]), out.size()).first;
      out.push_back({std::string(f[0]), SampledSeries(grid, *unit)});
      seen.emplace_back(n, false);
    }
    auto& ns = out[it->second];
    if (ns.series.unit != *unit)
      throw SchemaError("line " + std::to_string(line) + ": unit mismatch for series " + ns.id);
    auto idx = parse_int(f[1], line, "interval_index");
    if (idx < 0 || static_cast<std::size_t>(idx) >= n)
      throw ParseError(line, "interval_index " + std::to_string(idx) + " outside grid");
    auto&& mark = seen[it->second][static_cast<std::size_t>(idx)];
    if (mark) throw ParseError(line, "duplicate interval_index for series " + ns.id);
    mark = true;
    if (f[2] != kMissingLiteral) ns.series[static_cast<std::size_t>(idx)] = parse_double(f[2], line, "value");
  });
  for (std::size_t s = 0; s < out.size(); ++s)
    if (std::count(seen[s].begin(), seen[s].end(), true) != static_cast<long>(n))
      throw SchemaError("series " + out[s].id + " does not cover every interval");
  return out;
}

// ---------------------------------------------------------------------------
// loops.csv / phases.csv
// ---------------------------------------------------------------------------

inline void write_loops(std::ostream& out, const std::vector<LoopRecord>& loops) {
  out << kLoopsHeader << '\n';
  for (const auto& r : loops)
    out << r.detector_id << ',' << r.interval << ',' << r.count << ',' << format_double(r.occupancy) << '\n';
}

inline std::vector<LoopRecord> read_loops(std::istream& in) {
  std::vector<LoopRecord> out;
  for_each_row(in, kLoopsHeader, [&](const auto& f, std::size_t line) {
    LoopRecord r;
    r.detector_id = std::string(f[0]);
    auto idx = parse_int(f[1], line, "interval_index");
    auto count = parse_int(f[2], line, "count");
    if (idx < 0) throw ParseError(line, "negative interval_index");
    if (count < 0) throw ParseError(line, "negative count");
    r.interval = static_cast<std::size_t>(idx);
    r.count = static_cast<int>(count);
    r.occupancy = parse_double(f[3], line, "occupancy_pct");
    if (r.occupancy < 0.0 || r.occupancy > 100.0) throw ParseError(line, "occupancy_pct outside [0,100]");
    out.push_back(std::move(r));
  });
  return out;
}

inline void write_phases(std::ostream& out, const std::vector<PhaseLog>& logs) {
  out << kPhasesHeader << '\n';
  for (const auto& log : logs)
    for (const auto& tr : log.transitions)
      out << log.controller_id << ',' << format_double(tr.t) << ',' << to_string(tr.phase) << '\n';
}

inline std::vector<PhaseLog> read_phases(std::istream& in) {
  std::vector<PhaseLog> out;
  std::map<std::string, std::size_t, std::less<>> index;
  for_each_row(in, kPhasesHeader, [&](const auto& f, std::size_t line) {
    auto phase = parse_phase(f[2]);
    if (!phase) throw SchemaError("line " + std::to_string(line) + ": unknown phase '" + std::string(f[2]) + "'");
    auto it = index.find(f[0]);
    if (it == index.end()) {
      it = index.emplace(std::string(f[0]), out.size()).first;
      out.push_back({std::string(f[0]), {}});
    }
    auto& log = out[it->second];
    const double t = parse_double(f[1], line, "t_s");
    if (!log.transitions.empty()) {
      if (!(t > log.transitions.back().t)) throw ParseError(line, "phase timestamps not strictly increasing");
      if (log.transitions.back().phase == *phase) throw ParseError(line, "phases do not alternate");
    }
    log.transitions.push_back({t, *phase});
  });
  return out;
}

// ---------------------------------------------------------------------------
// Path helpers
// ---------------------------------------------------------------------------

inline std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  return in;
}

template <typename Writer>
void write_file(const std::filesystem::path& path, Writer&& writer) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  writer(out);
  if (!out) throw Error("write failed for " + path.string());
}

inline std::vector<VehicleTrace> read_traces(const std::filesystem::path& p) {
  auto in = open_in(p);
  return read_traces(in);
}
inline std::vector<DetectionSet> read_detections(const std::filesystem::path& p) {
  auto in = open_in(p);
  return read_detections(in);
}
inline std::vector<NamedSeries> read_series(const std::filesystem::path& p, const IntervalGrid& grid) {
  auto in = open_in(p);
  return read_series(in, grid);
}
inline std::vector<LoopRecord> read_loops(const std::filesystem::path& p) {
  auto in = open_in(p);
  return read_loops(in);
}
inline std::vector<PhaseLog> read_phases(const std::filesystem::path& p) {
  auto in = open_in(p);
  return read_phases(in);
}

inline void write_traces(const std::filesystem::path& p, const std::vector<VehicleTrace>& v) {
  write_file(p, [&](std::ostream& o) { write_traces(o, v); });
}
inline void write_detections(const std::filesystem::path& p, const std::vector<DetectionSet>& v) {
  write_file(p, [&](std::ostream& o) { write_detections(o, v); });
}
inline void write_series(const std::filesystem::path& p, const std::vector<NamedSeries>& v) {
  write_file(p, [&](std::ostream& o) { write_series(o, v); });
}
inline void write_loops(const std::filesystem::path& p, const std::vector<LoopRecord>& v) {
  write_file(p, [&](std::ostream& o) { write_loops(o, v); });
}
inline void write_phases(const std::filesystem::path& p, const std::vector<PhaseLog>& v) {
  write_file(p, [&](std::ostream& o) { write_phases(o, v); });
}

}  // namespace tse::csv
