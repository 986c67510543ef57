#pragma once

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "dcmstep/errors.hpp"
#include "dcmstep/sim.hpp"

namespace dcmstep {

// ---------------------------------------------------------------------------
// number formatting: locale-independent via std::to_chars

/// Shortest representation that round-trips the double exactly.
inline std::string format_exact(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

/// Fixed 9 significant digits (trace CSV contract).
inline std::string format_sig9(double v) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 9);
  return std::string(buf, res.ptr);
}

// ---------------------------------------------------------------------------
// scenario text format: one `key = value` per line, dotted section names,
// '#' comments, unknown keys rejected.

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

inline double parse_number(std::string_view value, int line, const std::string& key) {
  double out = 0.0;
  const char* first = value.data();
  const char* last = value.data() + value.size();
  auto res = std::from_chars(first, last, out);
  if (res.ec != std::errc() || res.ptr != last) {
    throw ConfigError("line " + std::to_string(line) + ": invalid number '" +
                      std::string(value) + "' for key '" + key + "'");
  }
  return out;
}

inline int parse_int(std::string_view value, int line, const std::string& key) {
  const double d = parse_number(value, line, key);
  const int i = static_cast<int>(std::llround(d));
  if (std::abs(d - i) > 1e-9) {
    throw ConfigError("line " + std::to_string(line) + ": key '" + key +
                      "' expects an integer");
  }
  return i;
}

}  // namespace detail

inline SimConfig parse_scenario_text(const std::string& text) {
  SimConfig cfg;
  std::map<int, PushEvent> pushes;

  std::istringstream in(text);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    std::string_view sv(raw);
    if (auto hash = sv.find('#'); hash != std::string_view::npos) sv = sv.substr(0, hash);
    sv = detail::trim(sv);
    if (sv.empty()) continue;
    const auto eq = sv.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("line " + std::to_string(line) + ": expected 'key = value'");
    }
    const std::string key(detail::trim(sv.substr(0, eq)));
    const std::string_view value = detail::trim(sv.substr(eq + 1));
    if (key.empty() || value.empty()) {
      throw ConfigError("line " + std::to_string(line) + ": expected 'key = value'");
    }

    auto num = [&]() { return detail::parse_number(value, line, key); };
    auto integer = [&]() { return detail::parse_int(value, line, key); };
    auto bad_value = [&]() {
      return ConfigError("line " + std::to_string(line) + ": invalid value '" +
                         std::string(value) + "' for key '" + key + "'");
    };

    if (key == "model.com_height" || key == "model.gravity" || key == "model.mass" ||
        key == "model.pelvis_width") {
      double z0 = cfg.model.com_height, g = cfg.model.gravity;
      double m = cfg.model.mass, lp = cfg.model.pelvis_width;
      (key == "model.com_height"     ? z0
       : key == "model.gravity"      ? g
       : key == "model.mass"         ? m
                                     : lp) = num();
      try {
        cfg.model = ModelParams(z0, g, m, lp);
      } catch (const std::invalid_argument& e) {
        throw ConfigError("line " + std::to_string(line) + ": " + e.what());
      }
    } else if (key == "limits.L_min") {
      cfg.limits.l_min = num();
    } else if (key == "limits.L_max") {
      cfg.limits.l_max = num();
    } else if (key == "limits.W_min") {
      cfg.limits.w_min = num();
    } else if (key == "limits.W_max") {
      cfg.limits.w_max = num();
    } else if (key == "limits.T_min") {
      cfg.limits.t_min = num();
    } else if (key == "limits.T_max") {
      cfg.limits.t_max = num();
    } else if (key == "velocity.v_x") {
      cfg.velocity.vx = num();
    } else if (key == "velocity.v_y") {
      cfg.velocity.vy = num();
    } else if (key == "weights.alpha1") {
      cfg.weights.footprint_x = num();
    } else if (key == "weights.alpha2") {
      cfg.weights.footprint_y = num();
    } else if (key == "weights.alpha3") {
      cfg.weights.timing = num();
    } else if (key == "weights.alpha4") {
      cfg.weights.offset_x = num();
    } else if (key == "weights.alpha5") {
      cfg.weights.offset_y = num();
    } else if (key == "swing.z_des") {
      cfg.swing.apex_height = num();
    } else if (key == "swing.z_max") {
      cfg.swing.max_height = num();
    } else if (key == "swing.n_samples") {
      cfg.swing.n_samples = integer();
    } else if (key == "dt") {
      cfg.dt = num();
    } else if (key == "duration") {
      cfg.duration = num();
    } else if (key == "max_steps") {
      cfg.max_steps = integer();
    } else if (key == "controller_mode") {
      if (value == "adaptive") {
        cfg.mode = ControllerMode::adaptive;
      } else if (value == "fixed_timing") {
        cfg.mode = ControllerMode::fixed_timing;
      } else {
        throw bad_value();
      }
    } else if (key == "push_model") {
      if (value == "impulse") {
        cfg.push_model = PushModel::impulse;
      } else if (value == "distributed") {
        cfg.push_model = PushModel::distributed;
      } else {
        throw bad_value();
      }
    } else if (key == "initial_stance") {
      if (value == "left") {
        cfg.initial_stance = StanceSide::left;
      } else if (value == "right") {
        cfg.initial_stance = StanceSide::right;
      } else {
        throw bad_value();
      }
    } else if (key == "recovery.r_div") {
      cfg.recovery.divergence_radius = num();
    } else if (key == "recovery.eps_b") {
      cfg.recovery.offset_tol = num();
    } else if (key == "recovery.n_rec") {
      cfg.recovery.settle_steps = integer();
    } else if (key.rfind("pushes.", 0) == 0) {
      const std::string rest = key.substr(7);
      const auto dot = rest.find('.');
      if (dot == std::string::npos) {
        throw ConfigError("line " + std::to_string(line) + ": unknown key '" + key + "'");
      }
      int idx = 0;
      try {
        idx = std::stoi(rest.substr(0, dot));
      } catch (...) {
        throw ConfigError("line " + std::to_string(line) + ": bad push index in '" + key + "'");
      }
      const std::string field = rest.substr(dot + 1);
      PushEvent& ev = pushes[idx];
      if (field == "t") {
        ev.t_push = num();
      } else if (field == "force") {
        ev.force = num();
      } else if (field == "duration") {
        ev.duration = num();
      } else if (field == "theta") {
        ev.theta_deg = num();
      } else {
        throw ConfigError("line " + std::to_string(line) + ": unknown key '" + key + "'");
      }
    } else {
      throw ConfigError("line " + std::to_string(line) + ": unknown key '" + key + "'");
    }
  }

  for (auto& [idx, ev] : pushes) cfg.pushes.push_back(ev);
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("invalid configuration: ") + e.what());
  }
  return cfg;
}

inline SimConfig load_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario_text(buf.str());
}

/// Effective configuration, defaults filled, in the scenario file format.
/// Re-parsing the output reproduces the configuration exactly.
inline std::string serialize_scenario(const SimConfig& cfg) {
  std::ostringstream out;
  auto kv = [&](const char* key, const std::string& v) { out << key << " = " << v << "\n"; };
  auto kvn = [&](const char* key, double v) { kv(key, format_exact(v)); };
  kvn("model.com_height", cfg.model.com_height);
  kvn("model.gravity", cfg.model.gravity);
  kvn("model.mass", cfg.model.mass);
  kvn("model.pelvis_width", cfg.model.pelvis_width);
  kvn("limits.L_min", cfg.limits.l_min);
  kvn("limits.L_max", cfg.limits.l_max);
  kvn("limits.W_min", cfg.limits.w_min);
  kvn("limits.W_max", cfg.limits.w_max);
  kvn("limits.T_min", cfg.limits.t_min);
  kvn("limits.T_max", cfg.limits.t_max);
  kvn("velocity.v_x", cfg.velocity.vx);
  kvn("velocity.v_y", cfg.velocity.vy);
  kvn("weights.alpha1", cfg.weights.footprint_x);
  kvn("weights.alpha2", cfg.weights.footprint_y);
  kvn("weights.alpha3", cfg.weights.timing);
  kvn("weights.alpha4", cfg.weights.offset_x);
  kvn("weights.alpha5", cfg.weights.offset_y);
  kvn("swing.z_des", cfg.swing.apex_height);
  kvn("swing.z_max", cfg.swing.max_height);
  kv("swing.n_samples", std::to_string(cfg.swing.n_samples));
  kvn("dt", cfg.dt);
  kvn("duration", cfg.duration);
  kv("controller_mode", cfg.mode == ControllerMode::adaptive ? "adaptive" : "fixed_timing");
  kv("push_model", cfg.push_model == PushModel::impulse ? "impulse" : "distributed");
  kv("initial_stance", cfg.initial_stance == StanceSide::left ? "left" : "right");
  kv("max_steps", std::to_string(cfg.max_steps));
  kvn("recovery.r_div", cfg.recovery.divergence_radius);
  kvn("recovery.eps_b", cfg.recovery.offset_tol);
  kv("recovery.n_rec", std::to_string(cfg.recovery.settle_steps));
  for (size_t i = 0; i < cfg.pushes.size(); ++i) {
    const std::string p = "pushes." + std::to_string(i) + ".";
    kvn((p + "t").c_str(), cfg.pushes[i].t_push);
    kvn((p + "force").c_str(), cfg.pushes[i].force);
    kvn((p + "duration").c_str(), cfg.pushes[i].duration);
    kvn((p + "theta").c_str(), cfg.pushes[i].theta_deg);
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// built-in scenarios

inline SimConfig builtin_scenario(const std::string& name) {
  SimConfig cfg;
  if (name == "fig2a" || name == "fig2b") {
    cfg.velocity = VelocityCommand{1.0, 0.0};
    cfg.pushes = {PushEvent{1.4, 325.0, 0.1, -90.0}};
    cfg.mode = name == "fig2a" ? ControllerMode::fixed_timing : ControllerMode::adaptive;
    cfg.duration = 8.0;
  } else if (name == "nominal_1ms") {
    cfg.velocity = VelocityCommand{1.0, 0.0};
    cfg.duration = 7.0;
  } else if (name == "inplace") {
    cfg.velocity = VelocityCommand{0.0, 0.0};
    cfg.duration = 6.0;
  } else {
    throw ConfigError("unknown built-in scenario '" + name +
                      "' (available: fig2a, fig2b, nominal_1ms, inplace)");
  }
  return cfg;
}

// ---------------------------------------------------------------------------
// outputs

struct SummaryReport {
  bool recovered = false;
  bool diverged = false;
  int steps_total = 0;
  int steps_at_timing_bound = 0;
  double max_dcm_offset_error = 0.0;  // [m]
  double mean_velocity = 0.0;         // along the commanded heading [m/s]
  double end_time = 0.0;
  std::vector<StepRecord> steps;
};

inline SummaryReport build_summary(const Trace& tr, const RecoveryTolerances& tol) {
  SummaryReport s;
  s.recovered = is_recovered(tr, tol);
  s.diverged = tr.diverged;
  s.steps_total = static_cast<int>(tr.steps.size());
  s.end_time = tr.end_time;
  s.steps = tr.steps;
  for (const auto& st : tr.steps) {
    if (st.timing_at_lower_bound) ++s.steps_at_timing_bound;
    const Eigen::Vector2d& b_nom =
        ((st.stance_index + 1) % 2 == 0) ? tr.b_nom_even : tr.b_nom_odd;
    s.max_dcm_offset_error = std::max(s.max_dcm_offset_error, (st.b_end - b_nom).norm());
  }
  if (tr.steps.size() >= 2) {
    const auto& first = tr.steps.front();
    const auto& last = tr.steps.back();
    s.mean_velocity =
        tr.heading.dot(last.com_end - first.com_end) / (last.t_end - first.t_end);
  }
  return s;
}

inline void write_summary(std::ostream& out, const SummaryReport& s) {
  out << "recovered = " << (s.recovered ? "true" : "false") << "\n";
  out << "diverged = " << (s.diverged ? "true" : "false") << "\n";
  out << "steps_total = " << s.steps_total << "\n";
  out << "steps_at_timing_bound = " << s.steps_at_timing_bound << "\n";
  out << "max_dcm_offset_error = " << format_exact(s.max_dcm_offset_error) << "\n";
  out << "mean_velocity = " << format_exact(s.mean_velocity) << "\n";
  out << "end_time = " << format_exact(s.end_time) << "\n";
  for (size_t i = 0; i < s.steps.size(); ++i) {
    const auto& st = s.steps[i];
    const std::string p = "step." + std::to_string(i) + ".";
    out << p << "T = " << format_exact(st.duration) << "\n";
    out << p << "uT_x = " << format_exact(st.u_t.x()) << "\n";
    out << p << "uT_y = " << format_exact(st.u_t.y()) << "\n";
    out << p << "b_end_x = " << format_exact(st.b_end.x()) << "\n";
    out << p << "b_end_y = " << format_exact(st.b_end.y()) << "\n";
    out << p << "timing_bound = " << (st.timing_at_lower_bound ? "true" : "false") << "\n";
  }
}

inline constexpr const char* kTraceCsvHeader =
    "t,com_x,com_y,comd_x,comd_y,dcm_x,dcm_y,stance_x,stance_y,"
    "swing_x,swing_y,swing_z,plan_uT_x,plan_uT_y,plan_T,plan_b_x,plan_b_y,step_index";

inline void write_trace_csv(std::ostream& out, const Trace& tr) {
  out << kTraceCsvHeader << "\n";
  for (const auto& c : tr.cycles) {
    out << format_sig9(c.t) << ',' << format_sig9(c.com.x()) << ',' << format_sig9(c.com.y())
        << ',' << format_sig9(c.comd.x()) << ',' << format_sig9(c.comd.y()) << ','
        << format_sig9(c.dcm.x()) << ',' << format_sig9(c.dcm.y()) << ','
        << format_sig9(c.stance.x()) << ',' << format_sig9(c.stance.y()) << ','
        << format_sig9(c.swing.x()) << ',' << format_sig9(c.swing.y()) << ','
        << format_sig9(c.swing.z()) << ',' << format_sig9(c.plan_ut.x()) << ','
        << format_sig9(c.plan_ut.y()) << ',' << format_sig9(c.plan_duration) << ','
        << format_sig9(c.plan_b.x()) << ',' << format_sig9(c.plan_b.y()) << ','
        << c.step_index << "\n";
  }
}

}  // namespace dcmstep
