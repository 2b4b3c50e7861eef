#pragma once

// Agreement measures between a derived series and ground truth, and the
// assessment report that tabulates them per (quantity, source).

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tse/core.hpp"
#include "tse/csv.hpp"

namespace tse {

namespace detail {

inline std::vector<std::pair<double, double>> joint(std::span<const Sample> a, std::span<const Sample> b) {
  if (a.size() != b.size()) throw std::invalid_argument("series lengths differ");
  std::vector<std::pair<double, double>> out;
  out.reserve(a.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] && b[i]) out.emplace_back(*a[i], *b[i]);
  return out;
}

// Sample standard deviation treated as zero when it is negligible against the
// magnitude of the data (a flat series carrying rounding noise).
inline bool negligible_spread(double sd, double scale) { return sd <= 1e-10 * std::max(scale, 1e-300); }

}  // namespace detail

struct PccResult {
  std::optional<double> rho;  // nullopt is NA
  std::size_t n = 0;
};

// Pearson correlation over jointly observed indices. NA with fewer than two
// joint samples or when either side has zero spread.
inline PccResult pcc(std::span<const Sample> a, std::span<const Sample> b) {
  const auto pairs = detail::joint(a, b);
  PccResult res{std::nullopt, pairs.size()};
  if (pairs.size() < 2) return res;
  const double n = static_cast<double>(pairs.size());
  double ma = 0.0, mb = 0.0, scale_a = 0.0, scale_b = 0.0;
  for (const auto& [x, y] : pairs) {
    ma += x;
    mb += y;
    scale_a = std::max(scale_a, std::abs(x));
    scale_b = std::max(scale_b, std::abs(y));
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (const auto& [x, y] : pairs) {
    sab += (x - ma) * (y - mb);
    saa += (x - ma) * (x - ma);
    sbb += (y - mb) * (y - mb);
  }
  const double sd_a = std::sqrt(saa / (n - 1.0));
  const double sd_b = std::sqrt(sbb / (n - 1.0));
  if (detail::negligible_spread(sd_a, scale_a) || detail::negligible_spread(sd_b, scale_b)) return res;
  const double cov = sab / (n - 1.0);
  res.rho = std::clamp(cov / (sd_a * sd_b), -1.0, 1.0);
  return res;
}

inline PccResult pcc(const SampledSeries& a, const SampledSeries& b) {
  require_same_grid(a, b);
  return pcc(std::span<const Sample>(a.values), std::span<const Sample>(b.values));
}

struct MapeResult {
  std::optional<double> percent;  // nullopt is NA
  std::size_t n = 0;              // terms averaged
  std::size_t zero_excluded = 0;  // joint samples skipped because y == 0
};

// 100 · mean |y - ŷ| / |y| over joint indices with y != 0.
inline MapeResult mape(std::span<const Sample> y, std::span<const Sample> yhat) {
  MapeResult res;
  double sum = 0.0;
  for (const auto& [a, b] : detail::joint(y, yhat)) {
    if (a == 0.0) {
      ++res.zero_excluded;
      continue;
    }
    sum += std::abs(a - b) / std::abs(a);
    ++res.n;
  }
  if (res.n > 0) res.percent = 100.0 * sum / static_cast<double>(res.n);
  return res;
}

inline MapeResult mape(const SampledSeries& y, const SampledSeries& yhat) {
  require_same_grid(y, yhat);
  return mape(std::span<const Sample>(y.values), std::span<const Sample>(yhat.values));
}

struct FitQuality {
  double r2 = 0.0;
  double adj_r2 = 0.0;
  std::size_t n = 0;
  std::size_t p = 0;
};

inline double adjusted_r2(double r2, std::size_t n, std::size_t p) {
  return 1.0 - (1.0 - r2) * static_cast<double>(n - 1) / static_cast<double>(n - p - 1);
}

// R² = 1 - SSres/SStot over joint samples, adjusted for p predictors.
// nullopt when SStot == 0. Requires n >= p + 2.
inline std::optional<FitQuality> r2_and_adj(std::span<const Sample> y, std::span<const Sample> yhat,
                                            std::size_t p) {
  const auto pairs = detail::joint(y, yhat);
  const std::size_t n = pairs.size();
  if (n < p + 2)
    throw std::invalid_argument("r2_and_adj needs at least p + 2 joint samples");
  double mean = 0.0;
  for (const auto& pr : pairs) mean += pr.first;
  mean /= static_cast<double>(n);
  double ss_res = 0.0, ss_tot = 0.0;
  for (const auto& [a, b] : pairs) {
    ss_res += (a - b) * (a - b);
    ss_tot += (a - mean) * (a - mean);
  }
  if (!(ss_tot > 0.0)) return std::nullopt;
  const double r2 = 1.0 - ss_res / ss_tot;
  return FitQuality{r2, adjusted_r2(r2, n, p), n, p};
}

inline std::optional<FitQuality> r2_and_adj(const std::vector<double>& y, const std::vector<double>& yhat,
                                            std::size_t p) {
  std::vector<Sample> a(y.begin(), y.end()), b(yhat.begin(), yhat.end());
  return r2_and_adj(std::span<const Sample>(a), std::span<const Sample>(b), p);
}

// ---------------------------------------------------------------------------
// Assessment report
// ---------------------------------------------------------------------------

// Fixed source ordering of the report tables.
inline int source_rank(std::string_view source) {
  if (source == "LP") return 0;
  if (source == "TC") return 1;
  if (source == "G") return 2;
  return 3;
}

// Flow quantities (q*) before travel times (tau*), then by numeric suffix.
inline std::pair<int, long> quantity_rank(std::string_view q) {
  const int family = q.rfind("q", 0) == 0 ? 0 : 1;
  const auto digits = q.find_first_of("0123456789");
  long num = 0;
  if (digits != std::string_view::npos)
    std::from_chars(q.data() + digits, q.data() + q.size(), num);
  return {family, num};
}

// Mean of the observed samples; nullopt when all are MISSING.
inline std::optional<double> period_mean(const SampledSeries& s) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& v : s.values)
    if (v) {
      sum += *v;
      ++n;
    }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

struct ReportRow {
  std::string quantity;
  std::string source;
  std::optional<double> rho;
  std::optional<double> mape_pct;
  std::optional<double> match_rate_pct;
  std::size_t n_samples = 0;

  friend bool operator==(const ReportRow&, const ReportRow&) = default;
};

struct AssessmentReport {
  std::vector<ReportRow> rows;
  std::size_t mape_zero_excluded = 0;

  friend bool operator==(const AssessmentReport&, const AssessmentReport&) = default;
};

// One comparison cell: a derived series against its ground-truth reference.
struct AssessmentInput {
  std::string quantity;
  std::string source;
  const SampledSeries* truth = nullptr;
  const SampledSeries* estimate = nullptr;
  const SampledSeries* matching_rate = nullptr;  // optional
};

inline AssessmentReport assemble_report(const std::vector<AssessmentInput>& cells) {
  AssessmentReport report;
  for (const auto& c : cells) {
    ReportRow row{c.quantity, c.source, {}, {}, {}, 0};
    const auto r = pcc(*c.truth, *c.estimate);
    const auto m = mape(*c.truth, *c.estimate);
    row.rho = r.rho;
    row.n_samples = r.n;
    row.mape_pct = m.percent;
    report.mape_zero_excluded += m.zero_excluded;
    if (c.matching_rate)
      if (auto avg = period_mean(*c.matching_rate)) row.match_rate_pct = 100.0 * *avg;
    report.rows.push_back(std::move(row));
  }
  std::stable_sort(report.rows.begin(), report.rows.end(), [](const ReportRow& a, const ReportRow& b) {
    const auto qa = quantity_rank(a.quantity), qb = quantity_rank(b.quantity);
    if (qa != qb) return qa < qb;
    if (a.quantity != b.quantity) return a.quantity < b.quantity;
    return source_rank(a.source) < source_rank(b.source);
  });
  return report;
}

inline constexpr std::string_view kReportHeader = "quantity,source,rho,mape_pct,match_rate_pct,n_samples";

inline void write_report(std::ostream& out, const AssessmentReport& report) {
  out << kReportHeader << '\n';
  for (const auto& r : report.rows)
    out << r.quantity << ',' << r.source << ',' << csv::format_sample(r.rho) << ','
        << csv::format_sample(r.mape_pct) << ',' << csv::format_sample(r.match_rate_pct) << ','
        << r.n_samples << '\n';
}

inline AssessmentReport read_report(std::istream& in) {
  AssessmentReport report;
  auto opt = [](std::string_view s, std::size_t line, std::string_view f) -> std::optional<double> {
    if (s == csv::kMissingLiteral) return std::nullopt;
    return csv::parse_double(s, line, f);
  };
  csv::for_each_row(in, kReportHeader, [&](const auto& f, std::size_t line) {
    ReportRow r;
    r.quantity = std::string(f[0]);
    r.source = std::string(f[1]);
    r.rho = opt(f[2], line, "rho");
    r.mape_pct = opt(f[3], line, "mape_pct");
    r.match_rate_pct = opt(f[4], line, "match_rate_pct");
    const auto n = csv::parse_int(f[5], line, "n_samples");
    if (n < 0) throw ParseError(line, "negative n_samples");
    r.n_samples = static_cast<std::size_t>(n);
    report.rows.push_back(std::move(r));
  });
  return report;
}

}  // namespace tse
