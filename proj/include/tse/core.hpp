#pragma once

// Domain types shared by every stage of the toolkit: the interval grid,
// spots and routes, ground-truth traces, sampled series and detection sets.

#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace tse {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed input text. `line()` is 1-based; 0 when not tied to a line.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Well-formed input that violates a documented schema (unknown unit, bad header...).
struct SchemaError : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Interval grid
// ---------------------------------------------------------------------------

// Uniform partition of [start, start + horizon) into intervals of length `interval`.
struct IntervalGrid {
  double start = 0.0;
  double horizon = 7200.0;
  double interval = 60.0;

  IntervalGrid() = default;
  IntervalGrid(double start_s, double horizon_s, double interval_s)
      : start(start_s), horizon(horizon_s), interval(interval_s) {
    validate();
  }

  void validate() const {
    if (!(interval > 0.0) || !std::isfinite(interval))
      throw std::invalid_argument("interval length must be > 0");
    if (!(horizon >= 0.0) || !std::isfinite(horizon) || !std::isfinite(start))
      throw std::invalid_argument("horizon must be finite and >= 0");
    const double ratio = horizon / interval;
    if (std::abs(ratio - std::round(ratio)) > 1e-9 * std::max(1.0, ratio))
      throw std::invalid_argument("horizon must be an exact multiple of the interval length");
  }

  std::size_t size() const { return static_cast<std::size_t>(std::llround(horizon / interval)); }
  double end() const { return start + horizon; }
  bool contains(double t) const { return t >= start && t < end(); }
  double interval_start(std::size_t i) const { return start + static_cast<double>(i) * interval; }

  friend bool operator==(const IntervalGrid&, const IntervalGrid&) = default;
};

inline std::size_t interval_of(const IntervalGrid& grid, double t) {
  if (!grid.contains(t))
    throw std::out_of_range("timestamp " + std::to_string(t) + " outside grid horizon");
  auto idx = static_cast<std::size_t>(std::floor((t - grid.start) / grid.interval));
  // floor can land on size() for t just below end() after rounding
  return std::min(idx, grid.size() - 1);
}

// Same as interval_of but returns nullopt instead of throwing.
inline std::optional<std::size_t> try_interval_of(const IntervalGrid& grid, double t) {
  if (!grid.contains(t)) return std::nullopt;
  return interval_of(grid, t);
}

// ---------------------------------------------------------------------------
// Network description
// ---------------------------------------------------------------------------

enum class Approach { WB, EB, NB };

inline std::string_view to_string(Approach a) {
  switch (a) {
    case Approach::WB: return "WB";
    case Approach::EB: return "EB";
    case Approach::NB: return "NB";
  }
  return "?";
}

inline std::optional<Approach> parse_approach(std::string_view s) {
  if (s == "WB") return Approach::WB;
  if (s == "EB") return Approach::EB;
  if (s == "NB") return Approach::NB;
  return std::nullopt;
}

struct Spot {
  int id = 0;
  Approach approach = Approach::WB;
  std::string label;

  friend bool operator==(const Spot&, const Spot&) = default;
};

// A route runs entry_spot -> stop line -> exit_spot. `stop_line_fraction` is the
// share of free_flow_time spent before the stop line of the serving controller.
struct Route {
  int id = 0;
  int entry_spot = 0;
  int exit_spot = 0;
  double free_flow_time = 0.0;
  double stop_line_fraction = 0.5;

  friend bool operator==(const Route&, const Route&) = default;
};

// ---------------------------------------------------------------------------
// Ground truth and observations
// ---------------------------------------------------------------------------

struct VehicleTrace {
  std::string vehicle_id;
  int route_id = 0;
  double t_in = 0.0;
  double t_out = 0.0;

  double travel_time() const { return t_out - t_in; }
  friend bool operator==(const VehicleTrace&, const VehicleTrace&) = default;
};

enum class Unit { veh_per_h, seconds, dimensionless };

inline std::string_view to_string(Unit u) {
  switch (u) {
    case Unit::veh_per_h: return "veh_per_h";
    case Unit::seconds: return "seconds";
    case Unit::dimensionless: return "dimensionless";
  }
  return "?";
}

inline std::optional<Unit> parse_unit(std::string_view s) {
  if (s == "veh_per_h") return Unit::veh_per_h;
  if (s == "seconds") return Unit::seconds;
  if (s == "dimensionless") return Unit::dimensionless;
  return std::nullopt;
}

// std::nullopt is the MISSING marker.
using Sample = std::optional<double>;
inline constexpr std::nullopt_t missing = std::nullopt;

struct SampledSeries {
  IntervalGrid grid;
  std::vector<Sample> values;
  Unit unit = Unit::dimensionless;

  SampledSeries() = default;
  SampledSeries(IntervalGrid g, Unit u) : grid(g), values(g.size()), unit(u) {}
  SampledSeries(IntervalGrid g, std::vector<Sample> v, Unit u)
      : grid(g), values(std::move(v)), unit(u) {
    if (values.size() != grid.size())
      throw std::invalid_argument("series length does not match grid");
  }

  std::size_t size() const { return values.size(); }
  const Sample& operator[](std::size_t i) const { return values[i]; }
  Sample& operator[](std::size_t i) { return values[i]; }

  std::size_t missing_count() const {
    std::size_t n = 0;
    for (const auto& v : values) n += !v.has_value();
    return n;
  }

  friend bool operator==(const SampledSeries&, const SampledSeries&) = default;
};

inline void require_same_grid(const SampledSeries& a, const SampledSeries& b) {
  if (!(a.grid == b.grid) || a.size() != b.size())
    throw std::invalid_argument("series do not share a grid");
}

enum class SensorKind { count_only, plate, mac };

inline std::string_view to_string(SensorKind k) {
  switch (k) {
    case SensorKind::count_only: return "count_only";
    case SensorKind::plate: return "plate";
    case SensorKind::mac: return "mac";
  }
  return "?";
}

inline std::optional<SensorKind> parse_sensor_kind(std::string_view s) {
  if (s == "count_only") return SensorKind::count_only;
  if (s == "plate") return SensorKind::plate;
  if (s == "mac") return SensorKind::mac;
  return std::nullopt;
}

struct Sighting {
  int spot_id = 0;
  std::optional<std::string> token;
  double t = 0.0;

  friend bool operator==(const Sighting&, const Sighting&) = default;
};

struct DetectionSet {
  std::string sensor_id;
  SensorKind kind = SensorKind::count_only;
  std::vector<Sighting> sightings;

  friend bool operator==(const DetectionSet&, const DetectionSet&) = default;
};

// Timestamps are kept at millisecond resolution.
inline double quantize_ms(double t) { return std::round(t * 1000.0) / 1000.0; }
inline double ceil_ms(double t) { return std::ceil(t * 1000.0 - 1e-6) / 1000.0; }

inline const Route* find_route(const std::vector<Route>& routes, int id) {
  for (const auto& r : routes)
    if (r.id == id) return &r;
  return nullptr;
}

inline const Route& route_or_throw(const std::vector<Route>& routes, int id) {
  if (const auto* r = find_route(routes, id)) return *r;
  throw ConfigError("unknown route id " + std::to_string(id));
}

// One vehicle passing one spot. Every trace produces an entry and an exit crossing.
struct SpotCrossing {
  const VehicleTrace* trace = nullptr;
  int spot_id = 0;
  double t = 0.0;
  bool is_entry = true;
};

inline std::vector<SpotCrossing> spot_crossings(const std::vector<VehicleTrace>& traces,
                                                const std::vector<Route>& routes) {
  std::vector<SpotCrossing> out;
  out.reserve(traces.size() * 2);
  for (const auto& tr : traces) {
    const Route& r = route_or_throw(routes, tr.route_id);
    out.push_back({&tr, r.entry_spot, tr.t_in, true});
    out.push_back({&tr, r.exit_spot, tr.t_out, false});
  }
  return out;
}

}  // namespace tse
