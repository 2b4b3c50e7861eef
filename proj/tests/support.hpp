#pragma once

// Independent reference implementations and fixture generators for the test
// suites. The oracles deliberately avoid the library's code paths: windows are
// gathered into explicit vectors, intervals are found by scanning boundaries,
// and least squares goes through the normal equations.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "tse/tse.hpp"

namespace oracle {

using tse::Sample;

// Flow by scanning: count timestamps falling in [lo, hi) for every interval.
inline std::vector<double> flow_by_scan(const std::vector<double>& times, const tse::IntervalGrid& grid) {
  std::vector<double> out;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double lo = grid.start + static_cast<double>(i) * grid.interval;
    const double hi = grid.start + static_cast<double>(i + 1) * grid.interval;
    const auto n = std::count_if(times.begin(), times.end(), [&](double t) { return t >= lo && t < hi; });
    out.push_back(static_cast<double>(n) * 3600.0 / grid.interval);
  }
  return out;
}

// Moving average: gather the k+1 window members, drop MISSING, average.
inline std::vector<Sample> moving_average(const std::vector<Sample>& x, std::size_t k) {
  std::vector<Sample> out(x.size());
  for (std::size_t t = 0; t < x.size(); ++t) {
    if (t < k) continue;
    std::vector<double> window;
    for (std::size_t j = t - k; j <= t; ++j)
      if (x[j]) window.push_back(*x[j]);
    if (window.empty()) continue;
    out[t] = std::accumulate(window.begin(), window.end(), 0.0) / static_cast<double>(window.size());
  }
  return out;
}

// Weighted moving average: gather (weight, value) pairs of the window, drop incomplete pairs.
inline std::vector<Sample> weighted_moving_average(const std::vector<Sample>& tau,
                                                   const std::vector<Sample>& w, std::size_t k) {
  std::vector<Sample> out(tau.size());
  for (std::size_t t = k; t < tau.size(); ++t) {
    std::vector<std::pair<double, double>> pairs;
    for (std::size_t j = t - k; j <= t; ++j)
      if (tau[j] && w[j]) pairs.emplace_back(*w[j], *tau[j]);
    double num = 0.0, den = 0.0;
    for (const auto& [wi, ti] : pairs) {
      num += wi * ti;
      den += wi;
    }
    if (den > 0.0) out[t] = num / den;
  }
  return out;
}

// Travel time: for every interval, collect the durations of the vehicles whose exit
// falls inside it and average them.
inline std::vector<Sample> travel_time_by_grouping(const std::vector<tse::VehicleTrace>& records, int route,
                                                   const tse::IntervalGrid& grid) {
  std::vector<Sample> out(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double lo = grid.start + static_cast<double>(i) * grid.interval;
    const double hi = grid.start + static_cast<double>(i + 1) * grid.interval;
    std::vector<double> d;
    for (const auto& r : records)
      if (r.route_id == route && r.t_out >= r.t_in && r.t_out >= lo && r.t_out < hi) d.push_back(r.t_out - r.t_in);
    if (!d.empty()) out[i] = std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(d.size());
  }
  return out;
}

// Least squares through the normal equations (XᵀX)β = Xᵀy with an intercept,
// solved by Gauss-Jordan elimination with partial pivoting in long double.
inline std::vector<double> normal_equations(const std::vector<std::vector<double>>& cols,
                                            const std::vector<double>& y) {
  const std::size_t n = y.size(), m = cols.size() + 1;
  auto x = [&](std::size_t i, std::size_t j) -> long double { return j == 0 ? 1.0L : cols[j - 1][i]; };
  std::vector<std::vector<long double>> a(m, std::vector<long double>(m + 1, 0.0L));
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t c = 0; c < m; ++c)
      for (std::size_t i = 0; i < n; ++i) a[r][c] += x(i, r) * x(i, c);
    for (std::size_t i = 0; i < n; ++i) a[r][m] += x(i, r) * y[i];
  }
  for (std::size_t c = 0; c < m; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < m; ++r)
      if (std::fabs(a[r][c]) > std::fabs(a[piv][c])) piv = r;
    std::swap(a[c], a[piv]);
    for (std::size_t r = 0; r < m; ++r) {
      if (r == c) continue;
      const long double f = a[r][c] / a[c][c];
      for (std::size_t k = c; k <= m; ++k) a[r][k] -= f * a[c][k];
    }
  }
  std::vector<double> beta(m);
  for (std::size_t c = 0; c < m; ++c) beta[c] = static_cast<double>(a[c][m] / a[c][c]);
  return beta;
}

// Pearson via the raw-moment formula, a different algebraic route than the
// library's centred two-pass sums.
inline double pearson_moments(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  long double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sa += a[i];
    sb += b[i];
    saa += static_cast<long double>(a[i]) * a[i];
    sbb += static_cast<long double>(b[i]) * b[i];
    sab += static_cast<long double>(a[i]) * b[i];
  }
  const long double cov = sab - sa * sb / n;
  return static_cast<double>(cov / std::sqrt((saa - sa * sa / n) * (sbb - sb * sb / n)));
}

}  // namespace oracle

namespace fixture {

// Random series with roughly `missing_share` MISSING entries.
inline std::vector<tse::Sample> random_samples(std::mt19937_64& rng, std::size_t n, double missing_share,
                                               double lo = 0.0, double hi = 100.0) {
  std::uniform_real_distribution<double> u(0.0, 1.0), v(lo, hi);
  std::vector<tse::Sample> out(n);
  for (auto& x : out)
    if (u(rng) >= missing_share) x = v(rng);
  return out;
}

// Millisecond-resolution timestamps inside [grid.start, grid.end()), plus a
// few deliberately outside.
inline std::vector<double> random_times(std::mt19937_64& rng, const tse::IntervalGrid& grid, std::size_t n) {
  std::uniform_int_distribution<long> ms(static_cast<long>(grid.start * 1000) - 5000,
                                         static_cast<long>(grid.end() * 1000) + 5000);
  std::vector<double> out(n);
  for (auto& t : out) t = static_cast<double>(ms(rng)) / 1000.0;
  return out;
}

// Two-spot, one-route network used by the unit tests.
inline tse::ScenarioConfig small_network(double rate_veh_h = 600.0, std::uint64_t seed = 7) {
  tse::ScenarioConfig c;
  c.seed = seed;
  c.grid = tse::IntervalGrid(0.0, 3600.0, 60.0);
  c.spots = {{1, tse::Approach::WB, "in"}, {2, tse::Approach::WB, "out"}};
  c.routes = {{1, 1, 2, 100.0, 0.5}};
  c.demand = {{1, tse::DemandProfile{{{0.0, rate_veh_h}, {3600.0, rate_veh_h}}}}};
  c.signals = {{"C1", 90.0, 45.0, 0.0, {1}, 2.0}};
  c.detectors = {{"D1s", 1, 0.5, 0.8}, {"D1x", 1, 0.9, 0.6}};
  return c;
}

// Every sensor perfect and the aggregate feed an identity.
inline void make_sensors_perfect(tse::SensorParams& s) {
  s.count_detect_prob = 1.0;
  s.plate_recog_default = 1.0;
  s.plate_recog_steps.clear();
  s.mac_penetration = 1.0;
  s.mac_smoothing_k = 0;
  s.probe_rate = 1.0;
  s.aggregate_bias = 1.0;
  s.aggregate_ema_alpha = 1.0;
}

inline std::vector<tse::Sample> values(const tse::SampledSeries& s) { return s.values; }

// Scratch directory removed on destruction.
struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path = std::filesystem::temp_directory_path() /
           ("tse-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
};

}  // namespace fixture
