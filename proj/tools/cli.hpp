#pragma once

// File-based pipeline behind the `tse` executable. Every stage reads its
// upstream artifacts from the run directory given by --out and writes its own
// artifacts next to them; nothing upstream is ever rewritten.
//
// Exit codes: 0 ok, 1 usage or other failure, 2 schema violation,
// 3 output directory not writable, 4 upstream artifact missing.

#include <openssl/evp.h>

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "tse/tse.hpp"

namespace tse::cli {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

inline constexpr std::string_view kToolVersion = "1.0.0";

enum ExitCode : int { ok = 0, failure = 1, schema = 2, unwritable = 3, missing_input = 4 };

struct Failure : std::runtime_error {
  ExitCode code;
  Failure(ExitCode c, const std::string& what) : std::runtime_error(what), code(c) {}
};

struct Options {
  std::optional<fs::path> config;
  std::optional<std::uint64_t> seed;
  fs::path out = "run";
  std::size_t k = 10;
  std::optional<double> probe_rate;
  std::optional<int> route;
  bool smooth_probe = false;
};

inline std::string sha256_hex(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Failure(failure, "cannot read " + path.string() + " for hashing");
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1)
    throw Failure(failure, "sha256 unavailable");
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), md, &len);
  static constexpr char hex[] = "0123456789abcdef";
  std::string s;
  for (unsigned int i = 0; i < len; ++i) {
    s += hex[md[i] >> 4];
    s += hex[md[i] & 0xf];
  }
  return s;
}

inline void ensure_writable_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir))
    throw Failure(unwritable, "output directory " + dir.string() + " is not writable");
  const auto probe = dir / ".tse-write-check";
  {
    std::ofstream f(probe);
    if (!f) throw Failure(unwritable, "output directory " + dir.string() + " is not writable");
  }
  fs::remove(probe, ec);
}

inline fs::path upstream(const Options& o, std::string_view name) {
  auto p = o.out / name;
  if (!fs::exists(p)) throw Failure(missing_input, "missing upstream artifact: " + p.string());
  return p;
}

template <typename Writer>
void write_out(const fs::path& p, Writer&& w) {
  try {
    csv::write_file(p, std::forward<Writer>(w));
  } catch (const Error& e) {
    throw Failure(unwritable, e.what());
  }
}

inline void write_json(const fs::path& p, const ojson& doc) {
  write_out(p, [&](std::ostream& o) { o << doc.dump(2) << '\n'; });
}

inline ojson artifact(const Options& o, std::string_view name) {
  return ojson{{"path", std::string(name)}, {"sha256", sha256_hex(o.out / name)}};
}

inline ojson stage_manifest(const Options& o, std::string_view command, const std::vector<std::string>& files) {
  ojson doc{{"tool", "tse"}, {"version", std::string(kToolVersion)}, {"command", std::string(command)},
            {"output_dir", o.out.generic_string()}};
  ojson list = ojson::array();
  for (const auto& f : files) list.push_back(artifact(o, f));
  doc["artifacts"] = std::move(list);
  return doc;
}

inline ScenarioConfig run_scenario(const Options& o) { return load_scenario(upstream(o, "scenario.json")); }

// ---------------------------------------------------------------------------
// Stages
// ---------------------------------------------------------------------------

inline void cmd_simulate(const Options& o) {
  auto config = o.config ? load_scenario(*o.config) : default_scenario();
  if (o.seed) config.seed = *o.seed;
  if (o.probe_rate) config.sensors.probe_rate = *o.probe_rate;
  config.validate();
  ensure_writable_dir(o.out);
  const auto sim = simulate(config);
  write_out(o.out / "traces.csv", [&](std::ostream& s) { csv::write_traces(s, sim.traces); });
  write_out(o.out / "loops.csv", [&](std::ostream& s) { csv::write_loops(s, sim.loops); });
  write_out(o.out / "phases.csv", [&](std::ostream& s) { csv::write_phases(s, sim.phases); });
  write_json(o.out / "scenario.json", scenario_to_json(config));

  ojson manifest{{"tool", "tse"},
                 {"version", std::string(kToolVersion)},
                 {"command", "simulate"},
                 {"scenario", o.config ? o.config->generic_string() : std::string("builtin:default")},
                 {"seed", config.seed},
                 {"output_dir", o.out.generic_string()}};
  manifest["datasets"] = ojson::array({artifact(o, "traces.csv"), artifact(o, "loops.csv"),
                                       artifact(o, "phases.csv")});
  manifest["scenario_file"] = artifact(o, "scenario.json");
  manifest["vehicles"] = sim.traces.size();
  manifest["warnings"] = sim.warnings;
  write_json(o.out / "manifest.json", manifest);
  for (const auto& w : sim.warnings) std::cerr << "warning: " << w << '\n';
}

inline void cmd_derive(const Options& o) {
  const auto config = run_scenario(o);
  const auto traces = csv::read_traces(upstream(o, "traces.csv"));
  ensure_writable_dir(o.out);
  const auto d = derive(config, traces, o.k);
  write_out(o.out / "detections.csv", [&](std::ostream& s) { csv::write_detections(s, d.detections); });
  write_out(o.out / "series.csv", [&](std::ostream& s) { csv::write_series(s, d.series); });

  ojson report{{"k", o.k}};
  ojson tallies = ojson::array();
  for (const auto& t : d.tallies)
    tallies.push_back({{"route_id", t.route_id},
                       {"source", t.source},
                       {"used", t.diag.used},
                       {"rejected_negative", t.diag.rejected_negative},
                       {"outside_horizon", t.diag.outside_horizon},
                       {"rejected_pairs", t.rejected_pairs}});
  report["travel_time"] = std::move(tallies);
  ojson missing = ojson::object();
  for (const auto& s : d.series) missing[s.id] = s.series.missing_count();
  report["missing_counts"] = std::move(missing);
  write_json(o.out / "derive_report.json", report);
  write_json(o.out / "derive.manifest.json",
             stage_manifest(o, "derive", {"detections.csv", "series.csv", "derive_report.json"}));
}

inline void cmd_assess(const Options& o) {
  const auto config = run_scenario(o);
  const auto series = csv::read_series(upstream(o, "series.csv"), config.grid);
  ensure_writable_dir(o.out);
  const auto report = assess(config, series);
  write_out(o.out / "report.csv", [&](std::ostream& s) { write_report(s, report); });
  ojson meta{{"rows", report.rows.size()},
             {"mape_zero_excluded", report.mape_zero_excluded},
             {"mape_zero_exclusion_applied", report.mape_zero_excluded > 0}};
  write_json(o.out / "report_meta.json", meta);
  write_json(o.out / "assess.manifest.json", stage_manifest(o, "assess", {"report.csv", "report_meta.json"}));
}

inline void cmd_estimate(const Options& o) {
  auto config = run_scenario(o);
  if (o.probe_rate) config.sensors.probe_rate = *o.probe_rate;
  config.sensors.validate();
  const auto traces = csv::read_traces(upstream(o, "traces.csv"));
  const auto loops = csv::read_loops(upstream(o, "loops.csv"));
  const auto phases = csv::read_phases(upstream(o, "phases.csv"));
  ensure_writable_dir(o.out);

  int route = 0;
  if (o.route)
    route = *o.route;
  else if (!config.experiment_routes.empty())
    route = config.experiment_routes.front();
  else
    throw ConfigError("no experiment route: pass --route or set experiment_routes");
  route_or_throw(config.routes, route);

  const auto probe = emulate_probe_sample(traces, config.sensors, config.seed);
  ExperimentOptions opt;
  opt.route_id = route;
  opt.k = o.k;
  opt.smooth_probe = o.smooth_probe;
  const auto res = run_experiment({&config, &traces, &probe, &loops, &phases}, opt);

  write_out(o.out / "model.csv", [&](std::ostream& s) { write_models(s, {res.final_model}); });
  write_out(o.out / "model_base.csv", [&](std::ostream& s) { write_models(s, {res.baseline}); });
  write_out(o.out / "experiment_report.csv", [&](std::ostream& s) { write_experiment_report(s, {res}); });
  write_out(o.out / "estimates.csv", [&](std::ostream& s) { csv::write_series(s, estimation_series(res)); });
  write_json(o.out / "estimate.manifest.json",
             stage_manifest(o, "estimate", {"model.csv", "model_base.csv", "experiment_report.csv", "estimates.csv"}));

  std::cout << "route " << route << ": sample MAPE " << csv::format_sample(res.sample_mape) << "%, base "
            << csv::format_sample(res.baseline_mape) << "%, final " << csv::format_sample(res.final_mape)
            << "%; adjR2 " << csv::format_double(res.baseline.quality.adj_r2) << " -> "
            << csv::format_double(res.final_model.quality.adj_r2) << '\n';
}

// Without derived series (or a scenario to give them a grid) every file is
// written header-only.
inline void cmd_plotdata(const Options& o) {
  ensure_writable_dir(o.out);
  std::vector<csv::NamedSeries> series, estimates;
  const auto scenario = o.out / "scenario.json";
  if (fs::exists(scenario)) {
    const auto grid = load_scenario(scenario).grid;
    if (fs::exists(o.out / "series.csv")) series = csv::read_series(o.out / "series.csv", grid);
    if (fs::exists(o.out / "estimates.csv")) estimates = csv::read_series(o.out / "estimates.csv", grid);
  }
  const std::vector<std::pair<std::string, std::vector<csv::NamedSeries>>> files = {
      {"plot_flow.csv", plot_extract(series, PlotFamily::flow)},
      {"plot_matching_rate.csv", plot_extract(series, PlotFamily::matching_rate)},
      {"plot_travel_time.csv", plot_extract(series, PlotFamily::travel_time)},
      {"plot_estimation.csv", estimates},
  };
  std::vector<std::string> names;
  for (const auto& [name, data] : files) {
    write_out(o.out / name, [&](std::ostream& s) { csv::write_series(s, data); });
    names.push_back(name);
  }
  write_json(o.out / "plotdata.manifest.json", stage_manifest(o, "plotdata", names));
}

inline void cmd_scenario(const Options& o) {
  auto config = o.config ? load_scenario(*o.config) : default_scenario();
  if (o.seed) config.seed = *o.seed;
  config.validate();
  std::cout << scenario_to_json(config).dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Entry point
// ---------------------------------------------------------------------------

inline int run(int argc, const char* const* argv, std::ostream& err = std::cerr) {
  CLI::App app{"Traffic state estimation toolkit: simulate, derive, assess, estimate, plotdata"};
  app.require_subcommand(1);
  Options o;
  std::string config, out = o.out.string();
  std::uint64_t seed = 0;
  double probe_rate = 0.0;
  int route = 0;
  auto* config_opt = app.add_option("--config", config, "scenario JSON (default: built-in scenario)");
  auto* seed_opt = app.add_option("--seed", seed, "override the scenario seed");
  app.add_option("--out", out, "run directory")->capture_default_str();
  app.add_option("--k", o.k, "smoothing window in intervals")->capture_default_str()->check(CLI::PositiveNumber);
  auto* probe_opt = app.add_option("--probe-rate", probe_rate, "probe-vehicle share")->check(CLI::Range(0.0, 1.0));
  auto* route_opt = app.add_option("--route", route, "experiment route (estimate)");
  app.add_flag("--probe-smoothing", o.smooth_probe, "smooth the probe predictor like the response (estimate)");

  struct Stage {
    const char* name;
    const char* help;
    void (*fn)(const Options&);
  };
  const Stage stages[] = {
      {"simulate", "generate ground truth, loop and phase logs", cmd_simulate},
      {"derive", "emulate sensors and derive flow and travel-time series", cmd_derive},
      {"assess", "tabulate rho and MAPE against ground truth", cmd_assess},
      {"estimate", "fit baseline and final travel-time models", cmd_estimate},
      {"plotdata", "emit long-format plot tables", cmd_plotdata},
      {"scenario", "print the effective scenario JSON", cmd_scenario},
  };
  std::vector<std::pair<CLI::App*, const Stage*>> subs;
  for (const auto& s : stages) subs.emplace_back(app.add_subcommand(s.name, s.help)->fallthrough(), &s);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, std::cout, err) == 0 ? ok : failure;
  }
  if (*config_opt) o.config = config;
  if (*seed_opt) o.seed = seed;
  if (*probe_opt) o.probe_rate = probe_rate;
  if (*route_opt) o.route = route;
  o.out = out;

  try {
    for (const auto& [sub, stage] : subs)
      if (sub->parsed()) stage->fn(o);
    return ok;
  } catch (const Failure& e) {
    err << "error: " << e.what() << '\n';
    return e.code;
  } catch (const ParseError& e) {
    err << "schema error: " << e.what() << '\n';
    return schema;
  } catch (const SchemaError& e) {
    err << "schema error: " << e.what() << '\n';
    return schema;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return schema;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return failure;
  }
}

}  // namespace tse::cli
