#ifndef UAVMEC_SCENARIO_IO_HPP
#define UAVMEC_SCENARIO_IO_HPP

#include <cmath>
#include <cstdint>
#include <fstream>
#include <random>
#include <set>
#include <stdexcept>
#include <string>

#include "json.hpp"
#include "uavmec/model.hpp"

// Scenario files: human-editable JSON. dB-valued channel quantities are
// converted to linear exactly once here (noise_power_db is read as dBW).
// Unknown keys are rejected with their full path. UEs missing cycles_per_bit
// get a seeded uniform draw from [500, 1500].

namespace uavmec {

namespace detail_io {

using nlohmann::json;

[[noreturn]] inline void fail(const std::string& path, const std::string& what) {
  throw std::invalid_argument(path + ": " + what);
}

inline void check_keys(const json& j, const std::string& path,
                       const std::set<std::string>& allowed) {
  if (!j.is_object()) fail(path, "expected an object");
  for (const auto& [key, _] : j.items())
    if (!allowed.count(key)) fail(path + "." + key, "unknown key");
}

inline double num(const json& j, const std::string& path, const char* key) {
  if (!j.contains(key)) fail(path + "." + key, "missing");
  if (!j[key].is_number()) fail(path + "." + key, "expected a number");
  return j[key].get<double>();
}

inline double num_or(const json& j, const char* key, double fallback) {
  return j.contains(key) ? j[key].get<double>() : fallback;
}

inline Vec2 point(const json& j, const std::string& path, const char* key,
                  const Vec2* fallback = nullptr) {
  if (!j.contains(key)) {
    if (fallback) return *fallback;
    fail(path + "." + key, "missing");
  }
  const auto& v = j[key];
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
    fail(path + "." + key, "expected [x, y]");
  return Vec2(v[0].get<double>(), v[1].get<double>());
}

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double lin) { return 10.0 * std::log10(lin); }

} // namespace detail_io

inline Scenario scenario_from_json(const nlohmann::json& j) {
  using detail_io::check_keys;
  using detail_io::fail;
  using detail_io::num;
  using detail_io::point;

  check_keys(j, "scenario", {"ues", "uav", "channel", "time", "budget", "seed"});
  Scenario s;
  if (j.contains("seed")) {
    const auto& js = j["seed"];
    if (!js.is_number_integer() ||
        (!js.is_number_unsigned() && js.get<long long>() < 0))
      fail("seed", "expected a non-negative integer");
    s.seed = js.get<std::uint64_t>();
  }

  if (!j.contains("ues") || !j["ues"].is_array() || j["ues"].empty())
    fail("ues", "expected a non-empty array");
  std::mt19937_64 rng(s.seed);
  int idx = 0;
  for (const auto& ju : j["ues"]) {
    const std::string path = "ues[" + std::to_string(idx) + "]";
    check_keys(ju, path, {"position", "min_bits", "cycles_per_bit"});
    UePoint ue;
    ue.id = ++idx;
    ue.position = point(ju, path, "position");
    ue.min_bits = detail_io::num_or(ju, "min_bits", 0.0);
    if (ju.contains("cycles_per_bit")) {
      ue.cycles_per_bit = ju["cycles_per_bit"].get<double>();
    } else {
      const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
      ue.cycles_per_bit = 500.0 + 1000.0 * u;
    }
    s.ues.push_back(ue);
  }

  if (!j.contains("uav")) fail("uav", "missing");
  const auto& ju = j["uav"];
  check_keys(ju, "uav",
             {"altitude", "weight", "v_max", "battery_J", "cpu_freq_hz",
              "switch_cap", "end_point", "start_point"});
  s.uav.altitude = num(ju, "uav", "altitude");
  s.uav.weight = num(ju, "uav", "weight");
  s.uav.v_max = num(ju, "uav", "v_max");
  s.uav.battery = num(ju, "uav", "battery_J");
  s.uav.cpu_freq = num(ju, "uav", "cpu_freq_hz");
  s.uav.switch_cap = num(ju, "uav", "switch_cap");
  const Vec2 origin(0.0, 0.0);
  s.uav.start_point = point(ju, "uav", "start_point", &origin);
  s.uav.end_point = point(ju, "uav", "end_point");

  if (!j.contains("channel")) fail("channel", "missing");
  const auto& jc = j["channel"];
  check_keys(jc, "channel", {"ref_gain_db", "noise_power_db", "bandwidth_hz"});
  s.channel.ref_gain = detail_io::db_to_linear(num(jc, "channel", "ref_gain_db"));
  s.channel.noise_power = detail_io::db_to_linear(num(jc, "channel", "noise_power_db"));
  s.channel.bandwidth = num(jc, "channel", "bandwidth_hz");

  if (!j.contains("time")) fail("time", "missing");
  const auto& jt = j["time"];
  check_keys(jt, "time", {"horizon_s", "slots"});
  s.time.horizon = num(jt, "time", "horizon_s");
  if (!jt.contains("slots") || !jt["slots"].is_number_integer())
    fail("time.slots", "expected an integer");
  s.time.slots = jt["slots"].get<int>();

  if (!j.contains("budget")) fail("budget", "missing");
  const auto& jb = j["budget"];
  check_keys(jb, "budget", {"energy_cap_J", "p_min_w"});
  s.budget.energy_cap = num(jb, "budget", "energy_cap_J");
  s.budget.p_min = num(jb, "budget", "p_min_w");

  s.validate();
  return s;
}

inline Scenario load_scenario(const std::string& path,
                              const std::uint64_t* seed_override = nullptr) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open scenario file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument("scenario parse error: " + std::string(e.what()));
  }
  if (seed_override) j["seed"] = *seed_override;
  return scenario_from_json(j);
}

inline nlohmann::json scenario_to_json(const Scenario& s) {
  nlohmann::json j;
  j["seed"] = s.seed;
  for (const auto& ue : s.ues) {
    nlohmann::json ju;
    ju["position"] = {ue.position.x(), ue.position.y()};
    ju["min_bits"] = ue.min_bits;
    ju["cycles_per_bit"] = ue.cycles_per_bit;
    j["ues"].push_back(ju);
  }
  j["uav"] = {{"altitude", s.uav.altitude},
              {"weight", s.uav.weight},
              {"v_max", s.uav.v_max},
              {"battery_J", s.uav.battery},
              {"cpu_freq_hz", s.uav.cpu_freq},
              {"switch_cap", s.uav.switch_cap},
              {"start_point", {s.uav.start_point.x(), s.uav.start_point.y()}},
              {"end_point", {s.uav.end_point.x(), s.uav.end_point.y()}}};
  j["channel"] = {{"ref_gain_db", detail_io::linear_to_db(s.channel.ref_gain)},
                  {"noise_power_db", detail_io::linear_to_db(s.channel.noise_power)},
                  {"bandwidth_hz", s.channel.bandwidth}};
  j["time"] = {{"horizon_s", s.time.horizon}, {"slots", s.time.slots}};
  j["budget"] = {{"energy_cap_J", s.budget.energy_cap}, {"p_min_w", s.budget.p_min}};
  return j;
}

inline void save_scenario(const Scenario& s, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write scenario file: " + path);
  out << scenario_to_json(s).dump(2) << "\n";
}

} // namespace uavmec

#endif // UAVMEC_SCENARIO_IO_HPP
