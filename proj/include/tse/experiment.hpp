#pragma once

// Travel-time estimation experiment for one route: a baseline regression on
// the probe-sample travel time alone, a final regression extended by forward
// selection over loop and signal features, both fitted on the chronologically
// first share of observations and scored on the rest.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tse/core.hpp"
#include "tse/metrics.hpp"
#include "tse/mlr.hpp"
#include "tse/pipeline.hpp"
#include "tse/simnet.hpp"

namespace tse {

struct SplitSpec {
  double train_fraction = 0.70;

  // Number of leading observations used for training.
  std::size_t boundary(std::size_t n) const {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
      throw std::invalid_argument("train fraction must lie in (0,1)");
    if (n < 2) return n;
    const auto b = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
    return std::clamp<std::size_t>(b, 1, n - 1);
  }
};

inline constexpr std::string_view kProbeFeature = "probe_tt";

// Candidate features of a route: the probe travel time plus detector and
// signal features local to the route and its controller.
inline std::vector<FeatureSpec> default_feature_specs(const ScenarioConfig& config, int route_id,
                                                      std::size_t window) {
  std::vector<FeatureSpec> specs;
  specs.push_back({std::string(kProbeFeature), FeatureSource::probe_tt, Transform::log, 0, {}, {}});
  const Route& route = route_or_throw(config.routes, route_id);
  const SignalPlan* plan = config.controller_for(route_id);
  for (const auto& det : config.detectors) {
    if (det.route_id != route_id) continue;
    if (plan && is_stop_bar(det, route)) {
      specs.push_back({"headway_green:" + det.detector_id, FeatureSource::headway_green, Transform::log,
                       window, {det.detector_id}, plan->controller_id});
      specs.push_back({"progressed_flow:" + det.detector_id, FeatureSource::progressed_flow,
                       Transform::none, window, {det.detector_id}, {}});
    }
    specs.push_back({"avg_occupancy:" + det.detector_id, FeatureSource::avg_occupancy, Transform::none,
                     window, {det.detector_id}, {}});
  }
  if (plan)
    specs.push_back({"phase_count:" + plan->controller_id, FeatureSource::phase_count, Transform::log,
                     window, {}, plan->controller_id});
  return specs;
}

struct ExperimentOptions {
  int route_id = 3;
  std::size_t k = 10;
  SplitSpec split;
  // Smooth the probe predictor exactly like the response. Off by default: the
  // predictor is the per-interval probe mean.
  bool smooth_probe = false;
};

struct ExperimentInputs {
  const ScenarioConfig* config = nullptr;
  const std::vector<VehicleTrace>* traces = nullptr;
  const std::vector<VehicleTrace>* probe = nullptr;
  const std::vector<LoopRecord>* loops = nullptr;
  const std::vector<PhaseLog>* phases = nullptr;
};

struct ExperimentResult {
  int route_id = 0;
  RegressionModel baseline;
  RegressionModel final_model;
  std::vector<SelectionStep> selection;
  std::optional<double> sample_mape;
  std::optional<double> baseline_mape;
  std::optional<double> final_mape;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  std::vector<std::string> dropped_features;

  // Overlay series on the scenario grid.
  SampledSeries truth;
  SampledSeries sample;
  SampledSeries base_estimate;
  SampledSeries final_estimate;
};

// Smoothed travel time of `route_id` as seen through `traces`.
inline SampledSeries route_travel_time(const std::vector<VehicleTrace>& traces,
                                       const std::vector<Route>& routes, int route_id,
                                       const IntervalGrid& grid, std::size_t k) {
  const Route& r = route_or_throw(routes, route_id);
  const auto tt = travel_time_series(traces, route_id, grid).series;
  const auto flow = flow_series(traces, routes, r.entry_spot, grid);
  return smoothed_travel_time(tt, flow, k);
}

inline ExperimentResult run_experiment(const ExperimentInputs& in, const ExperimentOptions& opt) {
  const auto& config = *in.config;
  const auto& grid = config.grid;
  ExperimentResult res;
  res.route_id = opt.route_id;

  res.truth = route_travel_time(*in.traces, config.routes, opt.route_id, grid, opt.k);
  // Gaps in the probe predictor are imputed below like any other feature.
  res.sample = opt.smooth_probe
                   ? route_travel_time(*in.probe, config.routes, opt.route_id, grid, opt.k)
                   : travel_time_series(*in.probe, opt.route_id, grid).series;

  const auto actuations = detector_actuations(*in.traces, config.routes, config.detectors);
  FeatureInputs fin{in.loops, in.phases, &actuations, &res.sample};
  auto fm = extract_features(fin, grid, default_feature_specs(config, opt.route_id, opt.k));

  // Observations are intervals with a ground-truth response.
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < grid.size(); ++i)
    if (res.truth[i] && *res.truth[i] > 0.0) rows.push_back(i);
  const std::size_t n_train = opt.split.boundary(rows.size());
  res.n_train = n_train;
  res.n_test = rows.size() - n_train;
  if (n_train < 3)
    throw InsufficientDataError("route " + std::to_string(opt.route_id) + ": only " +
                                std::to_string(n_train) + " training observations");

  // Impute with the training mean; drop columns unobserved or flat in training.
  FeatureMatrix design{grid, {}};
  for (auto& col : fm.columns) {
    double sum = 0.0;
    std::size_t m = 0;
    for (std::size_t r = 0; r < n_train; ++r)
      if (const auto& v = col.values[rows[r]]) sum += *v, ++m;
    if (m == 0) {
      res.dropped_features.push_back(col.name);
      continue;
    }
    const double mean = sum / static_cast<double>(m);
    double spread = 0.0;
    for (std::size_t r = 0; r < n_train; ++r) {
      const double v = col.values[rows[r]].value_or(mean);
      spread = std::max(spread, std::abs(v - mean));
    }
    if (!(spread > 1e-12 * std::max(1.0, std::abs(mean)))) {
      res.dropped_features.push_back(col.name);
      continue;
    }
    FeatureColumn imputed{col.name, col.transform, std::vector<Sample>(grid.size())};
    for (std::size_t i : rows) imputed.values[i] = col.values[i].value_or(mean);
    design.columns.push_back(std::move(imputed));
  }

  std::vector<Sample> y_train(grid.size());
  for (std::size_t r = 0; r < n_train; ++r) y_train[rows[r]] = std::log(*res.truth[rows[r]]);

  std::vector<std::string> mandatory;
  if (design.find(kProbeFeature)) mandatory.emplace_back(kProbeFeature);

  res.baseline = fit_ols(design, mandatory, y_train);
  auto sel = forward_select(design, y_train, mandatory);
  res.final_model = std::move(sel.model);
  res.selection = std::move(sel.steps);
  res.baseline.route_id = res.final_model.route_id = opt.route_id;
  res.baseline.response_transform = res.final_model.response_transform = Transform::log;

  auto restrict_rows = [&](const SampledSeries& s) {
    SampledSeries out(grid, s.unit);
    for (std::size_t i : rows) out[i] = s[i];
    return out;
  };
  res.base_estimate = restrict_rows(predict(res.baseline, design));
  res.final_estimate = restrict_rows(predict(res.final_model, design));

  SampledSeries test_truth(grid, Unit::seconds);
  for (std::size_t r = n_train; r < rows.size(); ++r) test_truth[rows[r]] = res.truth[rows[r]];
  res.sample_mape = mape(test_truth, res.sample).percent;
  res.baseline_mape = mape(test_truth, res.base_estimate).percent;
  res.final_mape = mape(test_truth, res.final_estimate).percent;
  return res;
}

// ---------------------------------------------------------------------------
// Output tables
// ---------------------------------------------------------------------------

inline constexpr std::string_view kModelHeader = "route_id,feature,coefficient,transform";
inline constexpr std::string_view kExperimentHeader = "route_id,model,adj_r2,mape_pct";

// The intercept row's transform column records the response transform.
inline void write_models(std::ostream& out, const std::vector<RegressionModel>& models) {
  out << kModelHeader << '\n';
  for (const auto& m : models) {
    out << m.route_id << ',' << kInterceptName << ',' << csv::format_double(m.intercept) << ','
        << to_string(m.response_transform) << '\n';
    for (std::size_t j = 0; j < m.p(); ++j)
      out << m.route_id << ',' << m.features[j] << ',' << csv::format_double(m.coefficients[j]) << ','
          << to_string(m.feature_transforms[j]) << '\n';
  }
}

inline void write_experiment_report(std::ostream& out, const std::vector<ExperimentResult>& results) {
  out << kExperimentHeader << '\n';
  for (const auto& r : results) {
    out << r.route_id << ",sample,NA," << csv::format_sample(r.sample_mape) << '\n';
    out << r.route_id << ",base," << csv::format_double(r.baseline.quality.adj_r2) << ','
        << csv::format_sample(r.baseline_mape) << '\n';
    out << r.route_id << ",final," << csv::format_double(r.final_model.quality.adj_r2) << ','
        << csv::format_sample(r.final_mape) << '\n';
  }
}

}  // namespace tse
