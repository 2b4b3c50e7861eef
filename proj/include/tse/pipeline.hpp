#pragma once

// Flow and travel-time series derivation: per-interval counts scaled to veh/h,
// trailing moving average with a warm-up, per-interval mean travel time, and
// the flow-weighted trailing moving average of travel times.

#include <cstddef>
#include <vector>

#include "tse/core.hpp"

namespace tse {

enum class SmoothingKind { MA, WMA };

struct SmoothingSpec {
  std::size_t k = 10;
  SmoothingKind kind = SmoothingKind::WMA;
};

// q(t) = n / T, expressed in veh/h.
inline SampledSeries flow_from_counts(const std::vector<double>& counts, const IntervalGrid& grid) {
  SampledSeries out(grid, Unit::veh_per_h);
  for (std::size_t i = 0; i < grid.size(); ++i) out[i] = counts.at(i) * 3600.0 / grid.interval;
  return out;
}

inline SampledSeries flow_series(const DetectionSet& detections, int spot, const IntervalGrid& grid) {
  std::vector<double> counts(grid.size(), 0.0);
  for (const auto& s : detections.sightings)
    if (s.spot_id == spot)
      if (auto i = try_interval_of(grid, s.t)) counts[*i] += 1.0;
  return flow_from_counts(counts, grid);
}

inline SampledSeries flow_series(const std::vector<VehicleTrace>& traces,
                                 const std::vector<Route>& routes, int spot,
                                 const IntervalGrid& grid) {
  std::vector<double> counts(grid.size(), 0.0);
  for (const auto& c : spot_crossings(traces, routes))
    if (c.spot_id == spot)
      if (auto i = try_interval_of(grid, c.t)) counts[*i] += 1.0;
  return flow_from_counts(counts, grid);
}

// Mean of the k+1 samples t-k..t, skipping MISSING members. MISSING during the
// first k intervals and wherever the whole window is MISSING.
inline SampledSeries moving_average(const SampledSeries& series, std::size_t k) {
  SampledSeries out(series.grid, series.unit);
  for (std::size_t t = k; t < series.size(); ++t) {
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t j = t - k; j <= t; ++j)
      if (series[j]) {
        sum += *series[j];
        ++n;
      }
    if (n > 0) out[t] = sum / static_cast<double>(n);
  }
  return out;
}

// Σ w(t+i)·τ(t+i) / Σ w(t+i) over i = -k..0. Members with either side MISSING
// are skipped; MISSING during warm-up or when the weight sum is zero.
inline SampledSeries weighted_moving_average(const SampledSeries& tt, const SampledSeries& weights,
                                             std::size_t k) {
  require_same_grid(tt, weights);
  SampledSeries out(tt.grid, tt.unit);
  for (std::size_t t = k; t < tt.size(); ++t) {
    double num = 0.0, den = 0.0;
    for (std::size_t j = t - k; j <= t; ++j) {
      if (!tt[j] || !weights[j]) continue;
      num += *weights[j] * *tt[j];
      den += *weights[j];
    }
    if (den > 0.0) out[t] = num / den;
  }
  return out;
}

enum class IntervalAssignment { exit, entry };

struct TravelTimeDiagnostics {
  std::size_t used = 0;
  std::size_t rejected_negative = 0;
  std::size_t outside_horizon = 0;
};

struct TravelTimeResult {
  SampledSeries series;
  TravelTimeDiagnostics diagnostics;
};

// τ_r(t) = mean(t_out - t_in) over vehicles of `route_id` assigned to interval t
// (by exit timestamp unless told otherwise). MISSING when no vehicle is assigned.
inline TravelTimeResult travel_time_series(const std::vector<VehicleTrace>& records, int route_id,
                                           const IntervalGrid& grid,
                                           IntervalAssignment assign = IntervalAssignment::exit) {
  TravelTimeResult res{SampledSeries(grid, Unit::seconds), {}};
  std::vector<double> sum(grid.size(), 0.0);
  std::vector<std::size_t> n(grid.size(), 0);
  for (const auto& r : records) {
    if (r.route_id != route_id) continue;
    if (r.t_out < r.t_in) {
      ++res.diagnostics.rejected_negative;
      continue;
    }
    auto i = try_interval_of(grid, assign == IntervalAssignment::exit ? r.t_out : r.t_in);
    if (!i) {
      ++res.diagnostics.outside_horizon;
      continue;
    }
    sum[*i] += r.t_out - r.t_in;
    ++n[*i];
    ++res.diagnostics.used;
  }
  for (std::size_t i = 0; i < grid.size(); ++i)
    if (n[i] > 0) res.series[i] = sum[i] / static_cast<double>(n[i]);
  return res;
}

// Smoothed travel time of one route for one data source: the route's τ series
// weighted by that source's smoothed flow at the route's entry spot.
inline SampledSeries smoothed_travel_time(const SampledSeries& tt, const SampledSeries& entry_flow,
                                          std::size_t k) {
  return weighted_moving_average(tt, moving_average(entry_flow, k), k);
}

}  // namespace tse
