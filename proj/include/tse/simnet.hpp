#pragma once

// Synthetic ground truth for a small signalized network: Poisson arrivals per
// route, a point-queue discharge at each route's controller, loop-detector
// aggregates and fixed-time signal phase logs.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tse/core.hpp"
#include "tse/random.hpp"

namespace tse {

// Piecewise-linear arrival rate, knots are (t_s, veh/h). Constant beyond the ends.
struct DemandProfile {
  std::vector<std::pair<double, double>> knots;

  double rate_at(double t) const {
    if (knots.empty()) return 0.0;
    if (t <= knots.front().first) return knots.front().second;
    if (t >= knots.back().first) return knots.back().second;
    auto it = std::upper_bound(knots.begin(), knots.end(), t,
                               [](double v, const auto& k) { return v < k.first; });
    const auto& [t1, r1] = *it;
    const auto& [t0, r0] = *(it - 1);
    if (t1 == t0) return r1;
    return r0 + (r1 - r0) * (t - t0) / (t1 - t0);
  }

  double max_rate() const {
    double m = 0.0;
    for (const auto& k : knots) m = std::max(m, k.second);
    return m;
  }

  friend bool operator==(const DemandProfile&, const DemandProfile&) = default;
};

struct RouteDemand {
  int route_id = 0;
  DemandProfile profile;
  friend bool operator==(const RouteDemand&, const RouteDemand&) = default;
};

enum class Phase { green, red };

inline std::string_view to_string(Phase p) { return p == Phase::green ? "GREEN" : "RED"; }

inline std::optional<Phase> parse_phase(std::string_view s) {
  if (s == "GREEN") return Phase::green;
  if (s == "RED") return Phase::red;
  return std::nullopt;
}

// Fixed-time plan: green during [offset + m*cycle, offset + m*cycle + green).
struct SignalPlan {
  std::string controller_id;
  double cycle = 90.0;
  double green = 45.0;
  double offset = 0.0;
  std::vector<int> served_routes;
  double saturation_headway = 2.0;

  void validate() const {
    if (!(green > 0.0 && green < cycle))
      throw ConfigError("signal " + controller_id + ": require 0 < green < cycle");
    if (!(saturation_headway > 0.0))
      throw ConfigError("signal " + controller_id + ": saturation_headway must be > 0");
  }

  // Position within the cycle, in [0, cycle).
  double cycle_position(double t) const {
    double u = std::fmod(t - offset, cycle);
    if (u < 0) u += cycle;
    return u;
  }

  bool is_green(double t) const { return cycle_position(t) < green; }

  // Earliest instant >= t at which the signal shows green.
  double next_green(double t) const {
    const double u = cycle_position(t);
    return u < green ? t : t + (cycle - u);
  }

  // Discharge capacity in veh/s.
  double capacity() const { return (green / cycle) / saturation_headway; }

  friend bool operator==(const SignalPlan&, const SignalPlan&) = default;
};

struct DetectorConfig {
  std::string detector_id;
  int route_id = 0;
  double position = 0.0;       // fraction of the route, in [0, 1]
  double occupied_time = 0.5;  // seconds the loop stays occupied per passage

  friend bool operator==(const DetectorConfig&, const DetectorConfig&) = default;
};

struct LoopRecord {
  std::string detector_id;
  std::size_t interval = 0;
  int count = 0;
  double occupancy = 0.0;  // percent

  friend bool operator==(const LoopRecord&, const LoopRecord&) = default;
};

struct PhaseTransition {
  double t = 0.0;
  Phase phase = Phase::green;
  friend bool operator==(const PhaseTransition&, const PhaseTransition&) = default;
};

struct PhaseLog {
  std::string controller_id;
  std::vector<PhaseTransition> transitions;

  // Phase in force at t; nullopt before the first transition.
  std::optional<Phase> phase_at(double t) const {
    auto it = std::upper_bound(transitions.begin(), transitions.end(), t,
                               [](double v, const PhaseTransition& p) { return v < p.t; });
    if (it == transitions.begin()) return std::nullopt;
    return (it - 1)->phase;
  }

  friend bool operator==(const PhaseLog&, const PhaseLog&) = default;
};

struct SensorParams {
  double count_detect_prob = 0.95;

  // Piecewise-constant plate recognition probability: per spot a list of
  // (from_t_s, prob) steps; spots without steps use `plate_recog_default`.
  double plate_recog_default = 0.7;
  std::map<int, std::vector<std::pair<double, double>>> plate_recog_steps;

  double mac_penetration = 0.05;
  std::size_t mac_smoothing_k = 0;
  double probe_rate = 0.05;
  double aggregate_bias = 1.0;
  double aggregate_ema_alpha = 0.05;

  std::uint64_t seed_count = 1;
  std::uint64_t seed_plate = 2;
  std::uint64_t seed_mac = 3;
  std::uint64_t seed_probe = 4;

  double plate_recog_prob(int spot, double t) const {
    auto it = plate_recog_steps.find(spot);
    if (it == plate_recog_steps.end() || it->second.empty()) return plate_recog_default;
    double p = plate_recog_default;
    for (const auto& [from, prob] : it->second) {
      if (t >= from) p = prob;
      else break;
    }
    return p;
  }

  void validate() const {
    auto prob_ok = [](double p) { return p >= 0.0 && p <= 1.0; };
    if (!prob_ok(count_detect_prob)) throw ConfigError("count_detect_prob outside [0,1]");
    if (!prob_ok(plate_recog_default)) throw ConfigError("plate_recog_default outside [0,1]");
    for (const auto& [spot, steps] : plate_recog_steps) {
      double prev = -std::numeric_limits<double>::infinity();
      for (const auto& [from, p] : steps) {
        if (!prob_ok(p))
          throw ConfigError("plate recognition probability outside [0,1] at spot " +
                            std::to_string(spot));
        if (!(from > prev))
          throw ConfigError("plate recognition steps not increasing at spot " +
                            std::to_string(spot));
        prev = from;
      }
    }
    if (!prob_ok(mac_penetration)) throw ConfigError("mac_penetration outside [0,1]");
    if (!prob_ok(probe_rate)) throw ConfigError("probe_rate outside [0,1]");
    if (!(aggregate_bias > 0.0)) throw ConfigError("aggregate_bias must be > 0");
    if (!(aggregate_ema_alpha > 0.0 && aggregate_ema_alpha <= 1.0))
      throw ConfigError("aggregate_ema_alpha must lie in (0,1]");
  }

  friend bool operator==(const SensorParams&, const SensorParams&) = default;
};

struct ScenarioConfig {
  IntervalGrid grid;
  std::vector<Spot> spots;
  std::vector<Route> routes;
  std::vector<RouteDemand> demand;
  std::vector<SignalPlan> signals;
  std::vector<DetectorConfig> detectors;
  SensorParams sensors;
  std::vector<int> experiment_routes;
  std::uint64_t seed = 42;

  const SignalPlan* controller_for(int route_id) const {
    for (const auto& s : signals)
      if (std::find(s.served_routes.begin(), s.served_routes.end(), route_id) !=
          s.served_routes.end())
        return &s;
    return nullptr;
  }

  const DemandProfile* demand_for(int route_id) const {
    for (const auto& d : demand)
      if (d.route_id == route_id) return &d.profile;
    return nullptr;
  }

  void validate() const {
    grid.validate();
    for (std::size_t i = 0; i < spots.size(); ++i)
      for (std::size_t j = i + 1; j < spots.size(); ++j)
        if (spots[i].id == spots[j].id)
          throw ConfigError("duplicate spot id " + std::to_string(spots[i].id));
    auto has_spot = [&](int id) {
      return std::any_of(spots.begin(), spots.end(), [&](const Spot& s) { return s.id == id; });
    };
    for (std::size_t i = 0; i < routes.size(); ++i) {
      const auto& r = routes[i];
      for (std::size_t j = i + 1; j < routes.size(); ++j)
        if (routes[j].id == r.id) throw ConfigError("duplicate route id " + std::to_string(r.id));
      if (!has_spot(r.entry_spot) || !has_spot(r.exit_spot))
        throw ConfigError("route " + std::to_string(r.id) + " references an unknown spot");
      if (r.entry_spot == r.exit_spot)
        throw ConfigError("route " + std::to_string(r.id) + ": entry_spot == exit_spot");
      if (!(r.free_flow_time > 0.0))
        throw ConfigError("route " + std::to_string(r.id) + ": free_flow_time must be > 0");
      if (!(r.stop_line_fraction >= 0.0 && r.stop_line_fraction <= 1.0))
        throw ConfigError("route " + std::to_string(r.id) + ": stop_line_fraction outside [0,1]");
    }
    for (const auto& d : demand) {
      if (!find_route(routes, d.route_id))
        throw ConfigError("demand references unknown route " + std::to_string(d.route_id));
      const auto& k = d.profile.knots;
      if (k.empty()) throw ConfigError("demand profile of route " + std::to_string(d.route_id) + " is empty");
      for (std::size_t i = 0; i < k.size(); ++i) {
        if (!(k[i].second >= 0.0) || !std::isfinite(k[i].second))
          throw ConfigError("negative arrival rate on route " + std::to_string(d.route_id));
        if (i > 0 && !(k[i].first >= k[i - 1].first))
          throw ConfigError("demand knots not sorted on route " + std::to_string(d.route_id));
      }
      if (k.front().first > grid.start || k.back().first < grid.end())
        throw ConfigError("demand profile of route " + std::to_string(d.route_id) +
                          " does not cover the horizon");
    }
    for (const auto& s : signals) {
      s.validate();
      for (int rid : s.served_routes)
        if (!find_route(routes, rid))
          throw ConfigError("signal " + s.controller_id + " serves unknown route " + std::to_string(rid));
    }
    for (const auto& d : detectors) {
      if (!find_route(routes, d.route_id))
        throw ConfigError("detector " + d.detector_id + " references unknown route");
      if (!(d.position >= 0.0 && d.position <= 1.0))
        throw ConfigError("detector " + d.detector_id + ": position outside [0,1]");
      if (!(d.occupied_time >= 0.0))
        throw ConfigError("detector " + d.detector_id + ": occupied_time must be >= 0");
    }
    for (int rid : experiment_routes)
      if (!find_route(routes, rid))
        throw ConfigError("experiment references unknown route " + std::to_string(rid));
    sensors.validate();
  }

  friend bool operator==(const ScenarioConfig&, const ScenarioConfig&) = default;
};

struct SimulationResult {
  std::vector<VehicleTrace> traces;
  std::vector<LoopRecord> loops;
  std::vector<PhaseLog> phases;
  std::vector<std::string> warnings;
  std::size_t arrivals_generated = 0;
};

// ---------------------------------------------------------------------------

// Arrival instants on [start, end) from a time-inhomogeneous Poisson process,
// generated by thinning a homogeneous process at the profile's peak rate.
inline std::vector<double> poisson_arrivals(const DemandProfile& profile, double start,
                                            double end, Rng& rng) {
  std::vector<double> out;
  const double lambda_max = profile.max_rate() / 3600.0;
  if (!(lambda_max > 0.0)) return out;
  double t = start;
  for (;;) {
    t += rng.exponential(lambda_max);
    if (t >= end) break;
    if (rng.uniform() * lambda_max < profile.rate_at(t) / 3600.0) out.push_back(t);
  }
  return out;
}

// Point queue with FIFO discharge at the saturation headway during green.
// `stop_arrivals` must be sorted; returns departure instants from the stop line.
inline std::vector<double> point_queue_departures(const std::vector<double>& stop_arrivals,
                                                  const SignalPlan* plan) {
  std::vector<double> out;
  out.reserve(stop_arrivals.size());
  std::optional<double> prev;
  for (double a : stop_arrivals) {
    if (!plan) {
      out.push_back(a);
      continue;
    }
    double d = a;
    if (prev) d = std::max(d, *prev + plan->saturation_headway);
    d = ceil_ms(plan->next_green(d));
    out.push_back(d);
    prev = d;
  }
  return out;
}

// Instant a vehicle passes `position` along its route, recovered from the trace.
inline double crossing_time(const VehicleTrace& tr, const Route& route, double position) {
  const double f = route.stop_line_fraction;
  if (position <= f) return tr.t_in + position * route.free_flow_time;
  return tr.t_out - (1.0 - position) * route.free_flow_time;
}

inline bool is_stop_bar(const DetectorConfig& det, const Route& route) {
  return std::abs(det.position - route.stop_line_fraction) < 1e-9;
}

// Actuation instants per detector, sorted ascending.
inline std::map<std::string, std::vector<double>> detector_actuations(
    const std::vector<VehicleTrace>& traces, const std::vector<Route>& routes,
    const std::vector<DetectorConfig>& detectors) {
  std::map<std::string, std::vector<double>> out;
  for (const auto& det : detectors) {
    auto& v = out[det.detector_id];
    const Route& r = route_or_throw(routes, det.route_id);
    for (const auto& tr : traces)
      if (tr.route_id == det.route_id) v.push_back(crossing_time(tr, r, det.position));
    std::sort(v.begin(), v.end());
  }
  return out;
}

// Per-interval counts and occupancy for every detector. Occupied spans are
// clipped to interval boundaries; occupancy is clamped to [0, 100].
inline std::vector<LoopRecord> loop_logs(const std::vector<VehicleTrace>& traces,
                                         const std::vector<Route>& routes,
                                         const std::vector<DetectorConfig>& detectors,
                                         const IntervalGrid& grid) {
  const std::size_t n = grid.size();
  std::vector<LoopRecord> out;
  out.reserve(detectors.size() * n);
  const auto actuations = detector_actuations(traces, routes, detectors);
  for (const auto& det : detectors) {
    std::vector<int> count(n, 0);
    std::vector<double> occupied(n, 0.0);
    for (double c : actuations.at(det.detector_id)) {
      if (auto i = try_interval_of(grid, c)) ++count[*i];
      const double lo = std::max(c, grid.start);
      const double hi = std::min(c + det.occupied_time, grid.end());
      if (!(hi > lo)) continue;
      auto first = interval_of(grid, lo);
      for (std::size_t i = first; i < n; ++i) {
        const double a = std::max(lo, grid.interval_start(i));
        const double b = std::min(hi, grid.interval_start(i) + grid.interval);
        if (b <= a) break;
        occupied[i] += b - a;
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      const double occ = std::clamp(100.0 * occupied[i] / grid.interval, 0.0, 100.0);
      out.push_back({det.detector_id, i, count[i], occ});
    }
  }
  return out;
}

// Transitions of a fixed-time plan over the grid. The first entry records the
// phase in force at grid.start; later entries are genuine onsets.
inline PhaseLog phase_log(const SignalPlan& plan, const IntervalGrid& grid) {
  PhaseLog log{plan.controller_id, {}};
  double t = grid.start;
  Phase current = plan.is_green(t) ? Phase::green : Phase::red;
  log.transitions.push_back({t, current});
  const double base = grid.start - plan.cycle_position(grid.start);
  for (long m = 0;; ++m) {
    const double g = base + static_cast<double>(m) * plan.cycle;
    const double r = g + plan.green;
    if (g >= grid.end()) break;
    if (g > grid.start) log.transitions.push_back({g, Phase::green});
    if (r > grid.start && r < grid.end()) log.transitions.push_back({r, Phase::red});
  }
  return log;
}

inline SimulationResult simulate(const ScenarioConfig& config) {
  config.validate();
  SimulationResult result;
  const auto& grid = config.grid;

  for (const auto& route : config.routes) {
    const DemandProfile* profile = config.demand_for(route.id);
    if (!profile) continue;
    Rng rng(stream_seed(config.seed, 0x5eed0000ULL + static_cast<std::uint64_t>(route.id)));
    auto arrivals = poisson_arrivals(*profile, grid.start, grid.end(), rng);
    for (auto& a : arrivals) a = quantize_ms(a);
    result.arrivals_generated += arrivals.size();

    const double upstream = route.stop_line_fraction * route.free_flow_time;
    const double downstream = route.free_flow_time - upstream;
    std::vector<double> at_stop;
    at_stop.reserve(arrivals.size());
    for (double a : arrivals) at_stop.push_back(a + upstream);

    const SignalPlan* plan = config.controller_for(route.id);
    const auto departures = point_queue_departures(at_stop, plan);
    for (std::size_t i = 0; i < arrivals.size(); ++i) {
      char id[32];
      std::snprintf(id, sizeof id, "r%d-%06zu", route.id, i);
      result.traces.push_back(
          {id, route.id, arrivals[i], ceil_ms(departures[i] + downstream)});
    }

    if (plan && !arrivals.empty() &&
        static_cast<double>(arrivals.size()) > plan->capacity() * grid.horizon) {
      result.warnings.push_back("route " + std::to_string(route.id) +
                                ": demand exceeds capacity of controller " +
                                plan->controller_id + " over the horizon; queue diverges");
    }
  }

  std::stable_sort(result.traces.begin(), result.traces.end(),
                   [](const VehicleTrace& a, const VehicleTrace& b) { return a.t_in < b.t_in; });
  result.loops = loop_logs(result.traces, config.routes, config.detectors, grid);
  for (const auto& s : config.signals) result.phases.push_back(phase_log(s, grid));
  return result;
}

}  // namespace tse
