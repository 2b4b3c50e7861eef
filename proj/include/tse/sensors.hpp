#pragma once

// Degrades ground-truth traces into the data sources compared against it:
// anonymous counts (thermal camera), plate tokens (ALPR), device tokens
// (WiFi/MAC re-identification), a probe-vehicle subset, and a smoothed
// aggregate travel-time feed.
//
// Every random decision is a keyed draw on (sensor seed, vehicle, spot), so
// changing one probability never reshuffles any other decision.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "tse/core.hpp"
#include "tse/random.hpp"
#include "tse/simnet.hpp"

namespace tse {

inline std::string make_token(std::string_view salt, std::string_view vehicle_id) {
  std::string key(salt);
  key += ':';
  key += vehicle_id;
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(key)));
  return std::string(salt.substr(0, 1)) + buf;
}

namespace detail {

inline std::string crossing_key(const SpotCrossing& c) {
  return c.trace->vehicle_id + (c.is_entry ? ":in:" : ":out:") + std::to_string(c.spot_id);
}

inline void sort_sightings(DetectionSet& set) {
  std::stable_sort(set.sightings.begin(), set.sightings.end(),
                   [](const Sighting& a, const Sighting& b) { return a.t < b.t; });
}

}  // namespace detail

inline DetectionSet emulate_counting_sensor(const std::vector<VehicleTrace>& traces,
                                            const std::vector<Route>& routes,
                                            const IntervalGrid& grid, const SensorParams& params,
                                            std::uint64_t seed, std::string sensor_id = "TC") {
  DetectionSet set{std::move(sensor_id), SensorKind::count_only, {}};
  const auto key_seed = stream_seed(seed, params.seed_count);
  for (const auto& c : spot_crossings(traces, routes)) {
    if (!grid.contains(c.t)) continue;
    if (keyed_uniform(key_seed, detail::crossing_key(c)) < params.count_detect_prob)
      set.sightings.push_back({c.spot_id, std::nullopt, c.t});
  }
  detail::sort_sightings(set);
  return set;
}

inline DetectionSet emulate_plate_sensor(const std::vector<VehicleTrace>& traces,
                                         const std::vector<Route>& routes,
                                         const IntervalGrid& grid, const SensorParams& params,
                                         std::uint64_t seed, std::string sensor_id = "LP") {
  DetectionSet set{std::move(sensor_id), SensorKind::plate, {}};
  const auto key_seed = stream_seed(seed, params.seed_plate);
  for (const auto& c : spot_crossings(traces, routes)) {
    if (!grid.contains(c.t)) continue;
    if (keyed_uniform(key_seed, detail::crossing_key(c)) < params.plate_recog_prob(c.spot_id, c.t))
      set.sightings.push_back({c.spot_id, make_token("plate", c.trace->vehicle_id), c.t});
  }
  detail::sort_sightings(set);
  return set;
}

// One draw per vehicle: a device carried at entry is still carried at exit.
inline DetectionSet emulate_mac_sensor(const std::vector<VehicleTrace>& traces,
                                       const std::vector<Route>& routes,
                                       const IntervalGrid& grid, const SensorParams& params,
                                       std::uint64_t seed, std::string sensor_id = "TC_WIFI") {
  DetectionSet set{std::move(sensor_id), SensorKind::mac, {}};
  const auto key_seed = stream_seed(seed, params.seed_mac);
  for (const auto& tr : traces) {
    if (!(keyed_uniform(key_seed, tr.vehicle_id) < params.mac_penetration)) continue;
    const Route& r = route_or_throw(routes, tr.route_id);
    const auto token = make_token("mac", tr.vehicle_id);
    if (grid.contains(tr.t_in)) set.sightings.push_back({r.entry_spot, token, tr.t_in});
    if (grid.contains(tr.t_out)) set.sightings.push_back({r.exit_spot, token, tr.t_out});
  }
  detail::sort_sightings(set);
  return set;
}

inline std::vector<VehicleTrace> emulate_probe_sample(const std::vector<VehicleTrace>& traces,
                                                      const SensorParams& params,
                                                      std::uint64_t seed) {
  std::vector<VehicleTrace> out;
  const auto key_seed = stream_seed(seed, params.seed_probe);
  for (const auto& tr : traces)
    if (keyed_uniform(key_seed, tr.vehicle_id) < params.probe_rate) out.push_back(tr);
  return out;
}

// output(t) = bias * EMA_alpha(input up to t). The EMA starts at the first
// observed value; MISSING inputs leave the state untouched and stay MISSING.
inline SampledSeries emulate_aggregate_provider(const SampledSeries& ground_truth_tt,
                                                const SensorParams& params) {
  SampledSeries out(ground_truth_tt.grid, ground_truth_tt.unit);
  std::optional<double> state;
  const double a = params.aggregate_ema_alpha;
  for (std::size_t i = 0; i < ground_truth_tt.size(); ++i) {
    const auto& x = ground_truth_tt[i];
    if (!x) continue;
    state = state ? a * *x + (1.0 - a) * *state : *x;
    out[i] = params.aggregate_bias * *state;
  }
  return out;
}

// Entry/exit sightings of the same token along a known route, expressed as
// traces keyed by token. Pairs whose exit precedes entry are counted in `rejected`.
struct MatchResult {
  std::vector<VehicleTrace> pairs;
  std::size_t rejected = 0;
};

inline MatchResult match_pairs(const DetectionSet& detections, const std::vector<Route>& routes) {
  MatchResult result;
  if (detections.kind == SensorKind::count_only) return result;
  std::map<std::string, std::vector<const Sighting*>> by_token;
  for (const auto& s : detections.sightings)
    if (s.token) by_token[*s.token].push_back(&s);
  for (const auto& [token, sightings] : by_token) {
    for (const auto& r : routes) {
      const Sighting* in = nullptr;
      const Sighting* out = nullptr;
      for (const auto* s : sightings) {
        if (s->spot_id == r.entry_spot && !in) in = s;
        if (s->spot_id == r.exit_spot && !out) out = s;
      }
      if (!in || !out) continue;
      if (out->t < in->t) {
        ++result.rejected;
        continue;
      }
      result.pairs.push_back({token, r.id, in->t, out->t});
    }
  }
  std::stable_sort(result.pairs.begin(), result.pairs.end(),
                   [](const VehicleTrace& a, const VehicleTrace& b) { return a.t_out < b.t_out; });
  return result;
}

// Per interval: sightings at `spot` / ground-truth crossings at `spot`;
// MISSING where no vehicle crossed.
inline SampledSeries matching_rate(const DetectionSet& detections,
                                   const std::vector<VehicleTrace>& traces,
                                   const std::vector<Route>& routes, int spot,
                                   const IntervalGrid& grid) {
  std::vector<double> detected(grid.size(), 0.0), truth(grid.size(), 0.0);
  for (const auto& s : detections.sightings)
    if (s.spot_id == spot)
      if (auto i = try_interval_of(grid, s.t)) detected[*i] += 1.0;
  for (const auto& c : spot_crossings(traces, routes))
    if (c.spot_id == spot)
      if (auto i = try_interval_of(grid, c.t)) truth[*i] += 1.0;
  SampledSeries out(grid, Unit::dimensionless);
  for (std::size_t i = 0; i < grid.size(); ++i)
    if (truth[i] > 0.0) out[i] = detected[i] / truth[i];
  return out;
}

}  // namespace tse
