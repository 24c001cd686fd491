#pragma once

// JSON config and result formats. Scenario files accept powers as
// {"dbm": x} or {"watts": x} and noise as {"dbm_per_hz": x} or
// {"watts_per_hz": x}; everything is converted to linear units at load time
// and written back in linear units so round-trips are bit-exact.

#include <fstream>
#include <json.hpp>
#include <sstream>
#include <string>

#include "edgeshare/delay_model.hpp"
#include "edgeshare/optimizer.hpp"
#include "edgeshare/scenario.hpp"
#include "edgeshare/training_sim.hpp"

namespace edgeshare {

inline constexpr int kSpecVersion = 1;

namespace detail {

inline double parse_power(const nlohmann::json& j, const std::string& field) {
  if (j.is_number()) return j.get<double>();
  if (j.is_object()) {
    if (j.contains("watts")) return j["watts"].get<double>();
    if (j.contains("dbm")) return dbm_to_watts(j["dbm"].get<double>());
  }
  throw config_error("scenario: field " + field + " must be a number, {\"watts\":..} or {\"dbm\":..}");
}

inline double parse_psd(const nlohmann::json& j, const std::string& field) {
  if (j.is_number()) return j.get<double>();
  if (j.is_object()) {
    if (j.contains("watts_per_hz")) return j["watts_per_hz"].get<double>();
    if (j.contains("dbm_per_hz")) return dbm_to_watts(j["dbm_per_hz"].get<double>());
  }
  throw config_error("scenario: field " + field +
                     " must be a number, {\"watts_per_hz\":..} or {\"dbm_per_hz\":..}");
}

}  // namespace detail

inline nlohmann::json to_json(const Scenario& s) {
  nlohmann::json j;
  j["spec_version"] = kSpecVersion;
  j["params"] = {{"bandwidth_B", s.params.bandwidth_B},
                 {"noise_psd_n0", s.params.noise_psd_n0},
                 {"server_power_Ps", s.params.server_power_Ps},
                 {"model_bits_Q", s.params.model_bits_Q},
                 {"flops_per_sample_L", s.params.flops_per_sample_L},
                 {"local_iters_N", s.params.local_iters_N},
                 {"global_iters_M", s.params.global_iters_M},
                 {"sample_bits_a", s.params.sample_bits_a},
                 {"learning_rate_eta", s.params.learning_rate_eta}};
  j["devices"] = nlohmann::json::array();
  for (const auto& d : s.devices) {
    nlohmann::json jd = {{"id", d.id},
                         {"flops_per_cycle_C", d.flops_per_cycle_C},
                         {"cpu_freq_f", d.cpu_freq_f},
                         {"tx_power_P", d.tx_power_P},
                         {"gain_to_server_g", d.gain_to_server_g},
                         {"initial_samples", d.initial_samples}};
    if (!d.label_histogram.empty()) jd["label_histogram"] = d.label_histogram;
    j["devices"].push_back(jd);
  }
  j["d2d_gains"] = nlohmann::json::array();
  for (int i = 0; i < s.d2d.k; ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (int jj = 0; jj < s.d2d.k; ++jj) row.push_back(s.d2d.at(i, jj));
    j["d2d_gains"].push_back(row);
  }
  if (s.geometry) {
    j["geometry"] = nlohmann::json::array();
    for (const auto& p : *s.geometry) j["geometry"].push_back({p[0], p[1]});
  }
  return j;
}

inline Scenario scenario_from_json(const nlohmann::json& j) {
  if (!j.contains("spec_version") || j["spec_version"].get<int>() != kSpecVersion)
    throw config_error("scenario: missing or unsupported spec_version");
  Scenario s;
  const auto& p = j.at("params");
  s.params.bandwidth_B = p.at("bandwidth_B").get<double>();
  s.params.noise_psd_n0 = detail::parse_psd(p.at("noise_psd_n0"), "noise_psd_n0");
  s.params.server_power_Ps = detail::parse_power(p.at("server_power_Ps"), "server_power_Ps");
  s.params.model_bits_Q = p.at("model_bits_Q").get<double>();
  s.params.flops_per_sample_L = p.at("flops_per_sample_L").get<double>();
  s.params.local_iters_N = p.at("local_iters_N").get<int>();
  s.params.global_iters_M = p.at("global_iters_M").get<int>();
  s.params.sample_bits_a = p.at("sample_bits_a").get<double>();
  s.params.learning_rate_eta = p.at("learning_rate_eta").get<double>();

  for (const auto& jd : j.at("devices")) {
    DeviceProfile d;
    d.id = jd.at("id").get<int>();
    d.flops_per_cycle_C = jd.at("flops_per_cycle_C").get<double>();
    d.cpu_freq_f = jd.at("cpu_freq_f").get<double>();
    d.tx_power_P = detail::parse_power(jd.at("tx_power_P"), "tx_power_P");
    d.gain_to_server_g = jd.at("gain_to_server_g").get<double>();
    d.initial_samples = jd.at("initial_samples").get<std::int64_t>();
    if (jd.contains("label_histogram"))
      d.label_histogram = jd["label_histogram"].get<std::vector<std::int64_t>>();
    s.devices.push_back(std::move(d));
  }

  const auto& gm = j.at("d2d_gains");
  s.d2d.k = static_cast<int>(gm.size());
  for (const auto& row : gm)
    for (const auto& v : row) s.d2d.gains.push_back(v.get<double>());

  if (j.contains("geometry")) {
    std::vector<std::array<double, 2>> geo;
    for (const auto& p2 : j["geometry"]) geo.push_back({p2[0].get<double>(), p2[1].get<double>()});
    s.geometry = std::move(geo);
  }
  s.validate();
  return s;
}

inline void save_scenario(const Scenario& s, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw config_error("save_scenario: cannot open " + path);
  f << to_json(s).dump(2) << "\n";
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw config_error("load_scenario: cannot open " + path);
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw config_error(std::string("load_scenario: parse failure: ") + e.what());
  }
  return scenario_from_json(j);
}

inline nlohmann::json to_json(const SharingPlan& p) {
  return {{"k", p.k},          {"d", p.d},       {"b_d2d", p.b_d2d}, {"p_d2d", p.p_d2d},
          {"b_upload", p.b_upload}, {"tau1", p.tau1}, {"tau2", p.tau2},   {"objective", p.objective}};
}

inline SharingPlan plan_from_json(const nlohmann::json& j) {
  SharingPlan p;
  p.k = j.at("k").get<int>();
  p.d = j.at("d").get<std::vector<double>>();
  p.b_d2d = j.at("b_d2d").get<std::vector<double>>();
  p.p_d2d = j.at("p_d2d").get<std::vector<double>>();
  p.b_upload = j.at("b_upload").get<std::vector<double>>();
  p.tau1 = j.at("tau1").get<double>();
  p.tau2 = j.at("tau2").get<double>();
  p.objective = j.at("objective").get<double>();
  return p;
}

inline nlohmann::json to_json(const DelayBreakdown& d) {
  return {{"broadcast", d.broadcast}, {"compute", d.compute},         {"upload", d.upload},
          {"sharing", d.sharing},     {"aggregation", d.aggregation}, {"total", d.total}};
}

inline nlohmann::json to_json(const SolverReport& r) {
  return {{"converged", r.converged},
          {"iterations", r.iterations},
          {"final_duality_measure", r.final_duality_measure},
          {"max_constraint_violation", r.max_constraint_violation},
          {"message", r.message}};
}

inline nlohmann::json to_json(const OptimizationResult& r) {
  nlohmann::json j;
  j["scheme"] = scheme_name(r.scheme);
  j["objective_seconds"] = r.objective;
  j["plan"] = to_json(r.plan);
  j["delay"] = to_json(r.delay);
  j["report"] = to_json(r.report);
  j["tau1_profile"] = nlohmann::json::array();
  for (const auto& s : r.tau1_profile)
    j["tau1_profile"].push_back(
        {{"tau1", s.tau1}, {"objective", s.objective}, {"converged", s.converged}});
  return j;
}

inline std::string tau1_profile_csv(const OptimizationResult& r) {
  std::ostringstream os;
  os << "tau1,objective,converged\n";
  for (const auto& s : r.tau1_profile)
    os << nlohmann::json(s.tau1).dump() << "," << nlohmann::json(s.objective).dump() << ","
       << (s.converged ? "true" : "false") << "\n";
  return os.str();
}

inline std::string trace_csv(const TrainingTrace& t) {
  std::ostringstream os;
  os << "iteration,elapsed_seconds,global_loss,test_accuracy\n";
  for (const auto& row : t)
    os << row.iteration << "," << nlohmann::json(row.elapsed_seconds).dump() << ","
       << nlohmann::json(row.global_loss).dump() << "," << nlohmann::json(row.test_accuracy).dump()
       << "\n";
  return os.str();
}

}  // namespace edgeshare
