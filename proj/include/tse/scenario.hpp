#pragma once

// Scenario configuration document (JSON) and the built-in default scenario.
//
// Schema (all durations in seconds, rates in veh/h, unknown keys rejected):
//
//   seed                 unsigned integer
//   grid                 { start_s, horizon_s, interval_s }
//   spots[]              { id, approach: "WB"|"EB"|"NB", label }
//   routes[]             { id, entry_spot, exit_spot, free_flow_time_s, stop_line_fraction? }
//   demand[]             { route_id, profile: [[t_s, veh_per_h], ...] }
//   signals[]            { controller_id, cycle_s, green_s, offset_s, served_routes[], saturation_headway_s }
//   detectors[]          { detector_id, route_id, position, occupied_time_s }
//   sensors              { count_detect_prob, plate_recog_default,
//                          plate_recog_steps: { "<spot>": [[from_t_s, prob], ...] },
//                          mac_penetration, mac_smoothing_k, probe_rate,
//                          aggregate_bias, aggregate_ema_alpha,
//                          seed_offsets: { count, plate, mac, probe } }
//   experiment_routes    [route ids]
//
// Every section except `grid`, `spots` and `routes` is optional.

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "tse/core.hpp"
#include "tse/simnet.hpp"

namespace tse {

namespace detail {

using json = nlohmann::ordered_json;

inline void check_keys(const json& obj, const std::string& path, std::initializer_list<std::string_view> allowed) {
  if (!obj.is_object()) throw ConfigError(path + ": expected an object");
  for (const auto& [key, _] : obj.items())
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw ConfigError(path + "." + key + ": unknown key");
}

inline const json& require(const json& obj, const std::string& path, const char* key) {
  if (!obj.contains(key)) throw ConfigError(path + "." + key + ": required key missing");
  return obj.at(key);
}

inline double get_number(const json& obj, const std::string& path, const char* key) {
  const auto& v = require(obj, path, key);
  if (!v.is_number()) throw ConfigError(path + "." + key + ": expected a number");
  return v.get<double>();
}

inline double get_number_or(const json& obj, const std::string& path, const char* key, double dflt) {
  return obj.contains(key) ? get_number(obj, path, key) : dflt;
}

inline long long get_int(const json& obj, const std::string& path, const char* key) {
  const auto& v = require(obj, path, key);
  if (!v.is_number_integer()) throw ConfigError(path + "." + key + ": expected an integer");
  return v.get<long long>();
}

inline std::uint64_t get_uint_or(const json& obj, const std::string& path, const char* key, std::uint64_t dflt) {
  if (!obj.contains(key)) return dflt;
  const auto& v = obj.at(key);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
    throw ConfigError(path + "." + key + ": expected a non-negative integer");
  return v.get<std::uint64_t>();
}

inline std::string get_string(const json& obj, const std::string& path, const char* key) {
  const auto& v = require(obj, path, key);
  if (!v.is_string()) throw ConfigError(path + "." + key + ": expected a string");
  return v.get<std::string>();
}

inline const json& get_array(const json& obj, const std::string& path, const char* key) {
  const auto& v = require(obj, path, key);
  if (!v.is_array()) throw ConfigError(path + "." + key + ": expected an array");
  return v;
}

inline std::vector<std::pair<double, double>> get_pairs(const json& arr, const std::string& path) {
  if (!arr.is_array()) throw ConfigError(path + ": expected an array of [t_s, value] pairs");
  std::vector<std::pair<double, double>> out;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const auto& p = arr[i];
    if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number())
      throw ConfigError(path + "[" + std::to_string(i) + "]: expected [number, number]");
    out.emplace_back(p[0].get<double>(), p[1].get<double>());
  }
  return out;
}

}  // namespace detail

inline ScenarioConfig scenario_from_json(const nlohmann::ordered_json& doc) {
  using namespace detail;
  ScenarioConfig c;
  check_keys(doc, "$", {"seed", "grid", "spots", "routes", "demand", "signals", "detectors", "sensors",
                        "experiment_routes"});
  c.seed = get_uint_or(doc, "$", "seed", 42);

  const auto& g = require(doc, "$", "grid");
  check_keys(g, "$.grid", {"start_s", "horizon_s", "interval_s"});
  try {
    c.grid = IntervalGrid(get_number_or(g, "$.grid", "start_s", 0.0), get_number(g, "$.grid", "horizon_s"),
                          get_number_or(g, "$.grid", "interval_s", 60.0));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("$.grid: ") + e.what());
  }

  const auto& spots = get_array(doc, "$", "spots");
  for (std::size_t i = 0; i < spots.size(); ++i) {
    const auto path = "$.spots[" + std::to_string(i) + "]";
    check_keys(spots[i], path, {"id", "approach", "label"});
    Spot s;
    s.id = static_cast<int>(get_int(spots[i], path, "id"));
    const auto ap = get_string(spots[i], path, "approach");
    auto parsed = parse_approach(ap);
    if (!parsed) throw ConfigError(path + ".approach: expected WB, EB or NB");
    s.approach = *parsed;
    s.label = spots[i].contains("label") ? get_string(spots[i], path, "label") : std::string{};
    c.spots.push_back(std::move(s));
  }

  const auto& routes = get_array(doc, "$", "routes");
  for (std::size_t i = 0; i < routes.size(); ++i) {
    const auto path = "$.routes[" + std::to_string(i) + "]";
    check_keys(routes[i], path, {"id", "entry_spot", "exit_spot", "free_flow_time_s", "stop_line_fraction"});
    Route r;
    r.id = static_cast<int>(get_int(routes[i], path, "id"));
    r.entry_spot = static_cast<int>(get_int(routes[i], path, "entry_spot"));
    r.exit_spot = static_cast<int>(get_int(routes[i], path, "exit_spot"));
    r.free_flow_time = get_number(routes[i], path, "free_flow_time_s");
    r.stop_line_fraction = get_number_or(routes[i], path, "stop_line_fraction", 0.5);
    c.routes.push_back(r);
  }

  if (doc.contains("demand")) {
    const auto& demand = get_array(doc, "$", "demand");
    for (std::size_t i = 0; i < demand.size(); ++i) {
      const auto path = "$.demand[" + std::to_string(i) + "]";
      check_keys(demand[i], path, {"route_id", "profile"});
      RouteDemand d;
      d.route_id = static_cast<int>(get_int(demand[i], path, "route_id"));
      d.profile.knots = get_pairs(require(demand[i], path, "profile"), path + ".profile");
      c.demand.push_back(std::move(d));
    }
  }

  if (doc.contains("signals")) {
    const auto& signals = get_array(doc, "$", "signals");
    for (std::size_t i = 0; i < signals.size(); ++i) {
      const auto path = "$.signals[" + std::to_string(i) + "]";
      check_keys(signals[i], path,
                 {"controller_id", "cycle_s", "green_s", "offset_s", "served_routes", "saturation_headway_s"});
      SignalPlan s;
      s.controller_id = get_string(signals[i], path, "controller_id");
      s.cycle = get_number(signals[i], path, "cycle_s");
      s.green = get_number(signals[i], path, "green_s");
      s.offset = get_number_or(signals[i], path, "offset_s", 0.0);
      s.saturation_headway = get_number(signals[i], path, "saturation_headway_s");
      const auto& served = get_array(signals[i], path, "served_routes");
      for (const auto& v : served) {
        if (!v.is_number_integer()) throw ConfigError(path + ".served_routes: expected integers");
        s.served_routes.push_back(v.get<int>());
      }
      c.signals.push_back(std::move(s));
    }
  }

  if (doc.contains("detectors")) {
    const auto& dets = get_array(doc, "$", "detectors");
    for (std::size_t i = 0; i < dets.size(); ++i) {
      const auto path = "$.detectors[" + std::to_string(i) + "]";
      check_keys(dets[i], path, {"detector_id", "route_id", "position", "occupied_time_s"});
      DetectorConfig d;
      d.detector_id = get_string(dets[i], path, "detector_id");
      d.route_id = static_cast<int>(get_int(dets[i], path, "route_id"));
      d.position = get_number(dets[i], path, "position");
      d.occupied_time = get_number_or(dets[i], path, "occupied_time_s", 0.5);
      c.detectors.push_back(std::move(d));
    }
  }

  if (doc.contains("sensors")) {
    const auto& s = doc.at("sensors");
    const std::string path = "$.sensors";
    check_keys(s, path, {"count_detect_prob", "plate_recog_default", "plate_recog_steps", "mac_penetration",
                         "mac_smoothing_k", "probe_rate", "aggregate_bias", "aggregate_ema_alpha",
                         "seed_offsets"});
    auto& p = c.sensors;
    p.count_detect_prob = get_number_or(s, path, "count_detect_prob", p.count_detect_prob);
    p.plate_recog_default = get_number_or(s, path, "plate_recog_default", p.plate_recog_default);
    if (s.contains("plate_recog_steps")) {
      const auto& steps = s.at("plate_recog_steps");
      if (!steps.is_object()) throw ConfigError(path + ".plate_recog_steps: expected an object keyed by spot id");
      for (const auto& [key, arr] : steps.items()) {
        int spot = 0;
        auto [ptr, ec] = std::from_chars(key.data(), key.data() + key.size(), spot);
        if (ec != std::errc{} || ptr != key.data() + key.size())
          throw ConfigError(path + ".plate_recog_steps." + key + ": key must be a spot id");
        p.plate_recog_steps[spot] = get_pairs(arr, path + ".plate_recog_steps." + key);
      }
    }
    p.mac_penetration = get_number_or(s, path, "mac_penetration", p.mac_penetration);
    p.mac_smoothing_k = get_uint_or(s, path, "mac_smoothing_k", p.mac_smoothing_k);
    p.probe_rate = get_number_or(s, path, "probe_rate", p.probe_rate);
    p.aggregate_bias = get_number_or(s, path, "aggregate_bias", p.aggregate_bias);
    p.aggregate_ema_alpha = get_number_or(s, path, "aggregate_ema_alpha", p.aggregate_ema_alpha);
    if (s.contains("seed_offsets")) {
      const auto& so = s.at("seed_offsets");
      check_keys(so, path + ".seed_offsets", {"count", "plate", "mac", "probe"});
      p.seed_count = get_uint_or(so, path + ".seed_offsets", "count", p.seed_count);
      p.seed_plate = get_uint_or(so, path + ".seed_offsets", "plate", p.seed_plate);
      p.seed_mac = get_uint_or(so, path + ".seed_offsets", "mac", p.seed_mac);
      p.seed_probe = get_uint_or(so, path + ".seed_offsets", "probe", p.seed_probe);
    }
  }

  if (doc.contains("experiment_routes")) {
    for (const auto& v : get_array(doc, "$", "experiment_routes")) {
      if (!v.is_number_integer()) throw ConfigError("$.experiment_routes: expected integers");
      c.experiment_routes.push_back(v.get<int>());
    }
  }

  c.validate();
  return c;
}

inline nlohmann::ordered_json scenario_to_json(const ScenarioConfig& c) {
  using json = nlohmann::ordered_json;
  json doc;
  doc["seed"] = c.seed;
  doc["grid"] = {{"start_s", c.grid.start}, {"horizon_s", c.grid.horizon}, {"interval_s", c.grid.interval}};
  doc["spots"] = json::array();
  for (const auto& s : c.spots)
    doc["spots"].push_back({{"id", s.id}, {"approach", std::string(to_string(s.approach))}, {"label", s.label}});
  doc["routes"] = json::array();
  for (const auto& r : c.routes)
    doc["routes"].push_back({{"id", r.id},
                             {"entry_spot", r.entry_spot},
                             {"exit_spot", r.exit_spot},
                             {"free_flow_time_s", r.free_flow_time},
                             {"stop_line_fraction", r.stop_line_fraction}});
  auto pairs = [](const std::vector<std::pair<double, double>>& v) {
    json a = json::array();
    for (const auto& [x, y] : v) a.push_back({x, y});
    return a;
  };
  doc["demand"] = json::array();
  for (const auto& d : c.demand) doc["demand"].push_back({{"route_id", d.route_id}, {"profile", pairs(d.profile.knots)}});
  doc["signals"] = json::array();
  for (const auto& s : c.signals)
    doc["signals"].push_back({{"controller_id", s.controller_id},
                              {"cycle_s", s.cycle},
                              {"green_s", s.green},
                              {"offset_s", s.offset},
                              {"served_routes", s.served_routes},
                              {"saturation_headway_s", s.saturation_headway}});
  doc["detectors"] = json::array();
  for (const auto& d : c.detectors)
    doc["detectors"].push_back({{"detector_id", d.detector_id},
                                {"route_id", d.route_id},
                                {"position", d.position},
                                {"occupied_time_s", d.occupied_time}});
  const auto& p = c.sensors;
  json steps = json::object();
  for (const auto& [spot, v] : p.plate_recog_steps) steps[std::to_string(spot)] = pairs(v);
  doc["sensors"] = {{"count_detect_prob", p.count_detect_prob},
                    {"plate_recog_default", p.plate_recog_default},
                    {"plate_recog_steps", steps},
                    {"mac_penetration", p.mac_penetration},
                    {"mac_smoothing_k", p.mac_smoothing_k},
                    {"probe_rate", p.probe_rate},
                    {"aggregate_bias", p.aggregate_bias},
                    {"aggregate_ema_alpha", p.aggregate_ema_alpha},
                    {"seed_offsets",
                     {{"count", p.seed_count}, {"plate", p.seed_plate}, {"mac", p.seed_mac}, {"probe", p.seed_probe}}}};
  doc["experiment_routes"] = c.experiment_routes;
  return doc;
}

// Parses and validates; JSON syntax errors carry nlohmann's line/column text.
inline ScenarioConfig parse_scenario(std::string_view text) {
  nlohmann::ordered_json doc;
  try {
    doc = nlohmann::ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("scenario is not valid JSON: ") + e.what());
  }
  return scenario_from_json(doc);
}

inline ScenarioConfig load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

// Synthetic three-approach network with five fixed-time controllers and a
// demand peak around minute 105 of a two-hour horizon.
inline ScenarioConfig default_scenario() {
  ScenarioConfig c;
  c.seed = 42;
  c.grid = IntervalGrid(0.0, 7200.0, 60.0);
  c.spots = {{1, Approach::WB, "WB inbound"},  {2, Approach::WB, "WB outbound"},
             {3, Approach::EB, "EB inbound"},  {4, Approach::EB, "EB outbound"},
             {5, Approach::NB, "NB inbound"},  {6, Approach::NB, "NB outbound"}};
  c.routes = {{1, 1, 4, 150.0, 0.6}, {2, 1, 6, 110.0, 0.6}, {3, 3, 2, 160.0, 0.6},
              {4, 3, 6, 120.0, 0.6}, {5, 5, 2, 130.0, 0.6}, {6, 5, 4, 140.0, 0.6}};
  auto profile = [](double a, double b, double peak, double end) {
    return DemandProfile{{{0.0, a}, {3600.0, b}, {6300.0, peak}, {7200.0, end}}};
  };
  c.demand = {{1, profile(220, 300, 420, 320)}, {2, profile(15, 20, 25, 20)},
              {3, profile(250, 340, 560, 380)}, {4, profile(120, 150, 200, 160)},
              {5, profile(150, 200, 260, 200)}, {6, profile(30, 40, 50, 40)}};
  c.signals = {{"C1", 90.0, 40.0, 0.0, {1}, 2.2},
               {"C2", 90.0, 38.0, 20.0, {3}, 2.3},
               {"C3", 90.0, 30.0, 45.0, {5}, 2.2},
               {"C4", 90.0, 20.0, 10.0, {2, 6}, 2.5},
               {"C5", 90.0, 25.0, 60.0, {4}, 2.3}};
  for (const auto& r : c.routes) {
    const auto id = std::to_string(r.id);
    c.detectors.push_back({"D" + id + "a", r.id, 0.25, 0.6});
    c.detectors.push_back({"D" + id + "s", r.id, r.stop_line_fraction, 0.8});
    c.detectors.push_back({"D" + id + "x", r.id, 0.9, 0.6});
  }
  auto& s = c.sensors;
  s.count_detect_prob = 0.95;
  s.plate_recog_default = 0.72;
  s.plate_recog_steps[1] = {{0.0, 0.78}, {3600.0, 0.45}, {5400.0, 0.72}};
  s.plate_recog_steps[2] = {{0.0, 0.62}, {5400.0, 0.1}, {5700.0, 0.6}};
  s.plate_recog_steps[6] = {{0.0, 0.7}, {2400.0, 0.58}, {4800.0, 0.45}};
  s.mac_penetration = 0.05;
  s.mac_smoothing_k = 15;
  s.probe_rate = 0.05;
  s.aggregate_bias = 1.25;
  s.aggregate_ema_alpha = 0.05;
  c.experiment_routes = {3};
  c.validate();
  return c;
}

}  // namespace tse
