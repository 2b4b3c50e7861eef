#pragma once

// Multiple linear regression for route travel times: feature extraction from
// loop-detector and signal logs, least squares via Householder QR, prediction
// with log back-transform, and forward selection on adjusted R².

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "tse/core.hpp"
#include "tse/metrics.hpp"
#include "tse/pipeline.hpp"
#include "tse/simnet.hpp"

namespace tse {

inline constexpr double kLogEpsilon = 0.1;

enum class Transform { none, log };

inline std::string_view to_string(Transform t) { return t == Transform::log ? "log" : "none"; }

enum class FeatureSource { probe_tt, headway_green, progressed_flow, avg_occupancy, phase_count };

struct FeatureSpec {
  std::string name;
  FeatureSource source = FeatureSource::probe_tt;
  Transform transform = Transform::none;
  std::size_t window = 0;              // trailing moving-average window (intervals)
  std::vector<std::string> detectors;  // loop-based sources
  std::string controller;              // headway_green gating and phase_count
};

struct FeatureColumn {
  std::string name;
  Transform transform = Transform::none;
  std::vector<Sample> values;
};

struct FeatureMatrix {
  IntervalGrid grid;
  std::vector<FeatureColumn> columns;

  std::size_t rows() const { return grid.size(); }

  const FeatureColumn* find(std::string_view name) const {
    for (const auto& c : columns)
      if (c.name == name) return &c;
    return nullptr;
  }
};

inline double apply_transform(Transform t, double x) {
  return t == Transform::log ? std::log(x + kLogEpsilon) : x;
}

// Inputs for feature extraction. Actuations are raw detector passage instants,
// loops and phases the logged aggregates.
struct FeatureInputs {
  const std::vector<LoopRecord>* loops = nullptr;
  const std::vector<PhaseLog>* phases = nullptr;
  const std::map<std::string, std::vector<double>>* actuations = nullptr;
  const SampledSeries* probe_tt = nullptr;
};

namespace detail {

inline const PhaseLog& phase_log_for(const std::vector<PhaseLog>& phases, const std::string& id) {
  for (const auto& p : phases)
    if (p.controller_id == id) return p;
  throw ConfigError("no phase log for controller '" + id + "'");
}

// Index of the transition in force at t, or -1 before the first one.
inline long transition_index(const PhaseLog& log, double t) {
  auto it = std::upper_bound(log.transitions.begin(), log.transitions.end(), t,
                             [](double v, const PhaseTransition& p) { return v < p.t; });
  return static_cast<long>(it - log.transitions.begin()) - 1;
}

inline std::vector<Sample> headway_green(const FeatureSpec& spec, const FeatureInputs& in,
                                         const IntervalGrid& grid) {
  if (!in.actuations || !in.phases) throw ConfigError("headway_green needs actuations and phases");
  const PhaseLog& log = phase_log_for(*in.phases, spec.controller);
  std::vector<double> sum(grid.size(), 0.0);
  std::vector<std::size_t> n(grid.size(), 0);
  for (const auto& det : spec.detectors) {
    auto it = in.actuations->find(det);
    if (it == in.actuations->end()) throw ConfigError("no actuations for detector '" + det + "'");
    const auto& act = it->second;
    for (std::size_t j = 1; j < act.size(); ++j) {
      const long a = transition_index(log, act[j - 1]);
      const long b = transition_index(log, act[j]);
      // both passages inside the same green phase
      if (a < 0 || a != b || log.transitions[static_cast<std::size_t>(a)].phase != Phase::green) continue;
      if (auto i = try_interval_of(grid, act[j])) {
        sum[*i] += act[j] - act[j - 1];
        ++n[*i];
      }
    }
  }
  std::vector<Sample> out(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i)
    if (n[i] > 0) out[i] = sum[i] / static_cast<double>(n[i]);
  return out;
}

inline std::map<std::string, std::vector<const LoopRecord*>> loops_by_detector(
    const std::vector<LoopRecord>& loops, const IntervalGrid& grid) {
  std::map<std::string, std::vector<const LoopRecord*>> out;
  for (const auto& r : loops) {
    auto& v = out[r.detector_id];
    if (v.empty()) v.resize(grid.size(), nullptr);
    if (r.interval < grid.size()) v[r.interval] = &r;
  }
  return out;
}

}  // namespace detail

inline FeatureMatrix extract_features(const FeatureInputs& in, const IntervalGrid& grid,
                                      const std::vector<FeatureSpec>& specs) {
  FeatureMatrix fm{grid, {}};
  const std::size_t n = grid.size();
  std::map<std::string, std::vector<const LoopRecord*>> by_det;
  if (in.loops) by_det = detail::loops_by_detector(*in.loops, grid);
  auto loop_series = [&](const std::string& det) -> const std::vector<const LoopRecord*>& {
    auto it = by_det.find(det);
    if (it == by_det.end()) throw ConfigError("no loop records for detector '" + det + "'");
    return it->second;
  };

  for (const auto& spec : specs) {
    std::vector<Sample> raw(n);
    switch (spec.source) {
      case FeatureSource::probe_tt:
        if (!in.probe_tt) throw ConfigError("probe_tt feature without a probe series");
        raw = in.probe_tt->values;
        break;
      case FeatureSource::headway_green:
        raw = detail::headway_green(spec, in, grid);
        break;
      case FeatureSource::progressed_flow:
        for (std::size_t i = 0; i < n; ++i) {
          double count = 0.0;
          bool any = false;
          for (const auto& det : spec.detectors)
            if (const auto* r = loop_series(det)[i]) count += r->count, any = true;
          if (any) raw[i] = count * 3600.0 / grid.interval;
        }
        break;
      case FeatureSource::avg_occupancy:
        for (std::size_t i = 0; i < n; ++i) {
          double occ = 0.0;
          std::size_t m = 0;
          for (const auto& det : spec.detectors)
            if (const auto* r = loop_series(det)[i]) occ += r->occupancy, ++m;
          if (m > 0) raw[i] = occ / static_cast<double>(m);
        }
        break;
      case FeatureSource::phase_count: {
        if (!in.phases) throw ConfigError("phase_count feature without phase logs");
        const PhaseLog& log = detail::phase_log_for(*in.phases, spec.controller);
        std::vector<double> count(n, 0.0);
        for (const auto& tr : log.transitions)
          if (auto i = try_interval_of(grid, tr.t)) count[*i] += 1.0;
        for (std::size_t i = 0; i < n; ++i) raw[i] = count[i];
        break;
      }
    }
    SampledSeries s(grid, std::move(raw), Unit::dimensionless);
    if (spec.window > 0) s = moving_average(s, spec.window);
    FeatureColumn col{spec.name, spec.transform, std::move(s.values)};
    for (auto& v : col.values)
      if (v) v = apply_transform(spec.transform, *v);
    fm.columns.push_back(std::move(col));
  }
  return fm;
}

// ---------------------------------------------------------------------------
// Least squares
// ---------------------------------------------------------------------------

class RankDeficientError : public Error {
 public:
  explicit RankDeficientError(std::vector<std::string> columns)
      : Error(message(columns)), columns_(std::move(columns)) {}
  const std::vector<std::string>& columns() const { return columns_; }

 private:
  static std::string message(const std::vector<std::string>& cols) {
    std::string m = "design matrix is rank deficient; linearly dependent column(s):";
    for (const auto& c : cols) m += " " + c;
    return m;
  }
  std::vector<std::string> columns_;
};

struct InsufficientDataError : Error {
  using Error::Error;
};

struct RegressionModel {
  int route_id = 0;
  double intercept = 0.0;
  std::vector<double> coefficients;
  std::vector<std::string> features;
  std::vector<Transform> feature_transforms;
  Transform response_transform = Transform::log;
  double residual_std = 0.0;
  FitQuality quality;

  std::size_t p() const { return coefficients.size(); }
};

inline constexpr std::string_view kInterceptName = "(intercept)";

// Minimizes ||y - b0 - X b||² by Householder QR of [1 | X]. Columns whose
// residual after projection on the preceding ones is below 1e-10 of their
// norm are reported together as a RankDeficientError.
inline RegressionModel fit_ols(const std::vector<std::vector<double>>& columns,
                               const std::vector<std::string>& names, const std::vector<double>& y) {
  const std::size_t n = y.size();
  const std::size_t p = columns.size();
  if (names.size() != p) throw std::invalid_argument("fit_ols: one name per column");
  for (const auto& c : columns)
    if (c.size() != n) throw std::invalid_argument("fit_ols: column length differs from response");
  if (n < p + 2)
    throw InsufficientDataError("fit_ols needs n > p + 1 (n=" + std::to_string(n) +
                                ", p=" + std::to_string(p) + ")");

  std::vector<std::vector<double>> a;
  a.reserve(p + 1);
  a.emplace_back(n, 1.0);
  for (const auto& c : columns) a.push_back(c);
  std::vector<double> qty = y;
  std::vector<std::string> all_names{std::string(kInterceptName)};
  all_names.insert(all_names.end(), names.begin(), names.end());

  std::vector<double> diag(p + 1, 0.0);
  std::vector<std::string> dependent;
  std::size_t r = 0;  // pivot row = number of accepted columns
  for (std::size_t j = 0; j <= p; ++j) {
    const double col_norm = std::sqrt(std::inner_product(a[j].begin(), a[j].end(), a[j].begin(), 0.0));
    double tail2 = 0.0;
    for (std::size_t i = r; i < n; ++i) tail2 += a[j][i] * a[j][i];
    const double tail = std::sqrt(tail2);
    if (col_norm == 0.0 || !(tail > 1e-10 * col_norm)) {
      dependent.push_back(all_names[j]);
      continue;
    }
    const double alpha = a[j][r] > 0 ? -tail : tail;
    std::vector<double> v(a[j].begin() + static_cast<long>(r), a[j].end());
    v[0] -= alpha;
    const double vv = std::inner_product(v.begin(), v.end(), v.begin(), 0.0);
    auto reflect = [&](std::vector<double>& x) {
      double dot = 0.0;
      for (std::size_t i = r; i < n; ++i) dot += v[i - r] * x[i];
      const double f = 2.0 * dot / vv;
      for (std::size_t i = r; i < n; ++i) x[i] -= f * v[i - r];
    };
    for (std::size_t c = j; c <= p; ++c) reflect(a[c]);
    reflect(qty);
    diag[j] = a[j][r];
    ++r;
  }
  if (!dependent.empty()) throw RankDeficientError(dependent);

  std::vector<double> beta(p + 1, 0.0);
  for (std::size_t jj = p + 1; jj-- > 0;) {
    double s = qty[jj];
    for (std::size_t c = jj + 1; c <= p; ++c) s -= a[c][jj] * beta[c];
    beta[jj] = s / diag[jj];
  }

  RegressionModel m;
  m.intercept = beta[0];
  m.coefficients.assign(beta.begin() + 1, beta.end());
  m.features = names;
  m.feature_transforms.assign(p, Transform::none);

  std::vector<double> fitted(n, m.intercept);
  for (std::size_t c = 0; c < p; ++c)
    for (std::size_t i = 0; i < n; ++i) fitted[i] += m.coefficients[c] * columns[c][i];
  double ss_res = 0.0;
  for (std::size_t i = 0; i < n; ++i) ss_res += (y[i] - fitted[i]) * (y[i] - fitted[i]);
  m.residual_std = std::sqrt(ss_res / static_cast<double>(n - p - 1));
  if (auto q = r2_and_adj(y, fitted, p)) m.quality = *q;
  else m.quality = FitQuality{1.0, 1.0, n, p};  // constant response fitted exactly
  return m;
}

// Rows of `x` (restricted to `names`) and `y` where everything is observed.
inline RegressionModel fit_ols(const FeatureMatrix& x, const std::vector<std::string>& names,
                               const std::vector<Sample>& y) {
  if (y.size() != x.rows()) throw std::invalid_argument("response length differs from feature rows");
  std::vector<const FeatureColumn*> cols;
  for (const auto& nm : names) {
    const auto* c = x.find(nm);
    if (!c) throw ConfigError("unknown feature '" + nm + "'");
    cols.push_back(c);
  }
  std::vector<std::vector<double>> data(cols.size());
  std::vector<double> yy;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (!y[i]) continue;
    if (std::any_of(cols.begin(), cols.end(), [&](const auto* c) { return !c->values[i]; })) continue;
    yy.push_back(*y[i]);
    for (std::size_t c = 0; c < cols.size(); ++c) data[c].push_back(*cols[c]->values[i]);
  }
  auto m = fit_ols(data, names, yy);
  for (std::size_t c = 0; c < cols.size(); ++c) m.feature_transforms[c] = cols[c]->transform;
  return m;
}

inline RegressionModel fit_ols(const FeatureMatrix& x, const std::vector<Sample>& y) {
  std::vector<std::string> names;
  for (const auto& c : x.columns) names.push_back(c.name);
  return fit_ols(x, names, y);
}

// ŷ = b0 + Σ b_j x_j, back-transformed with exp() for a log response.
// Rows missing any selected feature are MISSING.
inline SampledSeries predict(const RegressionModel& model, const FeatureMatrix& x) {
  std::vector<const FeatureColumn*> cols;
  for (const auto& nm : model.features) {
    const auto* c = x.find(nm);
    if (!c) throw ConfigError("model feature '" + nm + "' not present in feature matrix");
    cols.push_back(c);
  }
  SampledSeries out(x.grid, Unit::seconds);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double v = model.intercept;
    bool ok = true;
    for (std::size_t c = 0; c < cols.size() && ok; ++c) {
      if (!cols[c]->values[i]) ok = false;
      else v += model.coefficients[c] * *cols[c]->values[i];
    }
    if (!ok) continue;
    out[i] = model.response_transform == Transform::log ? std::exp(v) : v;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Forward selection
// ---------------------------------------------------------------------------

struct SelectionStep {
  std::string added;
  double adj_r2 = 0.0;
};

struct SelectionResult {
  RegressionModel model;
  std::vector<SelectionStep> steps;  // accepted additions in order
};

// Starts from `mandatory` and greedily adds the candidate with the largest
// adjusted R²; stops when no candidate improves it. Ties go to the candidate
// declared first. Candidates that make the design rank deficient are skipped.
// Only rows observed in y and in every column take part.
inline SelectionResult forward_select(const FeatureMatrix& x, const std::vector<Sample>& y,
                                      const std::vector<std::string>& mandatory) {
  std::vector<Sample> yy = y;
  for (std::size_t i = 0; i < yy.size(); ++i)
    for (const auto& c : x.columns)
      if (!c.values[i]) yy[i] = missing;

  SelectionResult res{fit_ols(x, mandatory, yy), {}};
  std::vector<std::string> selected = mandatory;
  std::vector<std::string> remaining;
  for (const auto& c : x.columns)
    if (std::find(selected.begin(), selected.end(), c.name) == selected.end()) remaining.push_back(c.name);

  const std::size_t n = static_cast<std::size_t>(std::count_if(yy.begin(), yy.end(), [](const Sample& v) { return v.has_value(); }));
  while (!remaining.empty() && n > selected.size() + 2) {
    std::optional<RegressionModel> best;
    std::size_t best_idx = 0;
    for (std::size_t k = 0; k < remaining.size(); ++k) {
      auto trial = selected;
      trial.push_back(remaining[k]);
      try {
        auto m = fit_ols(x, trial, yy);
        if (!best || m.quality.adj_r2 > best->quality.adj_r2) {
          best = std::move(m);
          best_idx = k;
        }
      } catch (const RankDeficientError&) {
      }
    }
    if (!best || !(best->quality.adj_r2 - res.model.quality.adj_r2 > 0.0)) break;
    selected.push_back(remaining[best_idx]);
    res.steps.push_back({remaining[best_idx], best->quality.adj_r2});
    remaining.erase(remaining.begin() + static_cast<long>(best_idx));
    res.model = std::move(*best);
  }
  return res;
}

}  // namespace tse
