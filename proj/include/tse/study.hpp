#pragma once

// Stage orchestration shared by the command line and the acceptance runs:
// derive every source's flow and travel-time series from ground truth, then
// tabulate them against the ground-truth references.
//
// Series ids are "<quantity>/<source>/<variant>", e.g. q3/LP/ma or tau1/G/agg.

#include <map>
#include <string>
#include <vector>

#include "tse/core.hpp"
#include "tse/csv.hpp"
#include "tse/experiment.hpp"
#include "tse/metrics.hpp"
#include "tse/pipeline.hpp"
#include "tse/sensors.hpp"
#include "tse/simnet.hpp"

namespace tse {

inline std::string series_id(std::string_view quantity, std::string_view source, std::string_view variant) {
  std::string id(quantity);
  id += '/';
  id += source;
  id += '/';
  id += variant;
  return id;
}

inline std::string flow_quantity(int spot) { return "q" + std::to_string(spot); }
inline std::string tt_quantity(int route) { return "tau" + std::to_string(route); }

inline const SampledSeries* find_series(const std::vector<csv::NamedSeries>& all, std::string_view id) {
  for (const auto& s : all)
    if (s.id == id) return &s.series;
  return nullptr;
}

struct TravelTimeTally {
  int route_id = 0;
  std::string source;
  TravelTimeDiagnostics diag;
  std::size_t rejected_pairs = 0;  // token pairs whose exit sighting precedes entry
};

struct DeriveResult {
  std::vector<DetectionSet> detections;
  std::vector<csv::NamedSeries> series;
  std::vector<TravelTimeTally> tallies;
};

// Sensor ids: TC counts, LP plates, TC_WIFI devices (the camera's WiFi unit).
inline DeriveResult derive(const ScenarioConfig& config, const std::vector<VehicleTrace>& traces,
                           std::size_t k) {
  const auto& grid = config.grid;
  const auto& routes = config.routes;
  const auto& params = config.sensors;
  DeriveResult out;
  auto counts = emulate_counting_sensor(traces, routes, grid, params, config.seed);
  auto plates = emulate_plate_sensor(traces, routes, grid, params, config.seed);
  auto macs = emulate_mac_sensor(traces, routes, grid, params, config.seed);

  auto add = [&](std::string id, SampledSeries s) { out.series.push_back({std::move(id), std::move(s)}); };

  std::map<int, SampledSeries> gt_flow, lp_flow, tc_flow;
  for (const auto& spot : config.spots) {
    const auto q = flow_quantity(spot.id);
    gt_flow.emplace(spot.id, flow_series(traces, routes, spot.id, grid));
    lp_flow.emplace(spot.id, flow_series(plates, spot.id, grid));
    tc_flow.emplace(spot.id, flow_series(counts, spot.id, grid));
    add(series_id(q, "GT", "raw"), gt_flow.at(spot.id));
    add(series_id(q, "GT", "ma"), moving_average(gt_flow.at(spot.id), k));
    add(series_id(q, "LP", "ma"), moving_average(lp_flow.at(spot.id), k));
    add(series_id(q, "TC", "ma"), moving_average(tc_flow.at(spot.id), k));
    add(series_id(q, "LP", "rate"), matching_rate(plates, traces, routes, spot.id, grid));
  }

  const auto lp_pairs = match_pairs(plates, routes);
  const auto mac_pairs = match_pairs(macs, routes);
  for (const auto& r : routes) {
    const auto tau = tt_quantity(r.id);
    const auto gt = travel_time_series(traces, r.id, grid);
    const auto lp = travel_time_series(lp_pairs.pairs, r.id, grid);
    const auto tc = travel_time_series(mac_pairs.pairs, r.id, grid);
    out.tallies.push_back({r.id, "GT", gt.diagnostics, 0});
    out.tallies.push_back({r.id, "LP", lp.diagnostics, lp_pairs.rejected});
    out.tallies.push_back({r.id, "TC", tc.diagnostics, mac_pairs.rejected});

    const auto gt_wma = smoothed_travel_time(gt.series, gt_flow.at(r.entry_spot), k);
    add(series_id(tau, "GT", "raw"), gt.series);
    add(series_id(tau, "GT", "wma"), gt_wma);
    add(series_id(tau, "LP", "wma"), smoothed_travel_time(lp.series, lp_flow.at(r.entry_spot), k));
    // Sparse device matches get an extra moving average before weighting.
    const auto tc_raw = params.mac_smoothing_k > 0 ? moving_average(tc.series, params.mac_smoothing_k)
                                                   : tc.series;
    add(series_id(tau, "TC", "wma"), smoothed_travel_time(tc_raw, tc_flow.at(r.entry_spot), k));
    add(series_id(tau, "G", "agg"), emulate_aggregate_provider(gt_wma, params));
  }

  out.detections.push_back(std::move(counts));
  out.detections.push_back(std::move(plates));
  out.detections.push_back(std::move(macs));
  return out;
}

// Flow rows compare LP and TC moving averages against the ground-truth moving
// average; travel-time rows compare LP, TC and G against the ground-truth WMA.
// Throws SchemaError when a required series is absent.
inline AssessmentReport assess(const ScenarioConfig& config, const std::vector<csv::NamedSeries>& series) {
  auto need = [&](const std::string& id) -> const SampledSeries* {
    const auto* s = find_series(series, id);
    if (!s) throw SchemaError("series " + id + " is missing");
    return s;
  };
  std::vector<AssessmentInput> cells;
  for (const auto& spot : config.spots) {
    const auto q = flow_quantity(spot.id);
    const auto* truth = need(series_id(q, "GT", "ma"));
    cells.push_back({q, "LP", truth, need(series_id(q, "LP", "ma")), need(series_id(q, "LP", "rate"))});
    cells.push_back({q, "TC", truth, need(series_id(q, "TC", "ma")), nullptr});
  }
  for (const auto& r : config.routes) {
    const auto tau = tt_quantity(r.id);
    const auto* truth = need(series_id(tau, "GT", "wma"));
    cells.push_back({tau, "LP", truth, need(series_id(tau, "LP", "wma")), nullptr});
    cells.push_back({tau, "TC", truth, need(series_id(tau, "TC", "wma")), nullptr});
    cells.push_back({tau, "G", truth, need(series_id(tau, "G", "agg")), nullptr});
  }
  return assemble_report(cells);
}

// ---------------------------------------------------------------------------
// Plot families: long-format extracts in the series schema
// ---------------------------------------------------------------------------

enum class PlotFamily { flow, matching_rate, travel_time };

inline std::vector<csv::NamedSeries> plot_extract(const std::vector<csv::NamedSeries>& series, PlotFamily family) {
  std::vector<csv::NamedSeries> out;
  for (const auto& s : series) {
    const auto first = s.id.find('/');
    const auto last = s.id.rfind('/');
    if (first == std::string::npos || last == first) continue;
    const std::string_view id(s.id);
    const auto quantity = id.substr(0, first);
    const auto variant = id.substr(last + 1);
    const bool flow = quantity.starts_with("q");
    bool keep = false;
    switch (family) {
      case PlotFamily::flow: keep = flow && variant == "ma"; break;
      case PlotFamily::matching_rate: keep = flow && variant == "rate"; break;
      case PlotFamily::travel_time: keep = !flow && (variant == "wma" || variant == "agg"); break;
    }
    if (keep) out.push_back(s);
  }
  return out;
}

// The estimation overlay: truth, raw probe sample, baseline and final estimates.
inline std::vector<csv::NamedSeries> estimation_series(const ExperimentResult& r) {
  return {{"truth", r.truth}, {"sample", r.sample}, {"base", r.base_estimate}, {"final", r.final_estimate}};
}

}  // namespace tse
