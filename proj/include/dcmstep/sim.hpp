#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "dcmstep/errors.hpp"
#include "dcmstep/lipm.hpp"
#include "dcmstep/nominal.hpp"
#include "dcmstep/qp.hpp"
#include "dcmstep/step_adapter.hpp"
#include "dcmstep/swing.hpp"

namespace dcmstep {

/// External disturbance: force applied over a short interval, at an angle
/// theta measured counterclockwise from the commanded heading (negative =
/// rightward).
struct PushEvent {
  double t_push = 0.0;     // [s]
  double force = 0.0;      // [N]
  double duration = 0.1;   // [s]
  double theta_deg = 0.0;  // [deg]
};

enum class ControllerMode { adaptive, fixed_timing };
enum class PushModel { impulse, distributed };
enum class StanceSide { left, right };

struct RecoveryTolerances {
  double divergence_radius = 2.0;  // DCM-to-stance distance [m]
  double offset_tol = 1e-3;        // end-of-step offset error [m]
  int settle_steps = 10;           // post-push step budget
};

struct SimConfig {
  ModelParams model = ModelParams::defaults();
  GaitLimits limits = GaitLimits::defaults();
  VelocityCommand velocity;
  AdapterWeights weights;
  SwingConfig swing;
  double dt = 1e-3;       // control cycle [s]
  double duration = 8.0;  // [s]
  std::vector<PushEvent> pushes;
  ControllerMode mode = ControllerMode::adaptive;
  PushModel push_model = PushModel::impulse;
  StanceSide initial_stance = StanceSide::left;
  int max_steps = 100000;
  RecoveryTolerances recovery;

  void validate() const {
    limits.validate();
    weights.validate();
    swing.validate();
    if (!(dt > 0.0)) throw std::invalid_argument("dt must be > 0");
    if (!(duration > 0.0)) throw std::invalid_argument("duration must be > 0");
    if (max_steps < 1) throw std::invalid_argument("max_steps must be >= 1");
    for (const auto& p : pushes) {
      if (!(p.duration > 0.0)) throw std::invalid_argument("pushes: duration must be > 0");
      if (!(p.force >= 0.0)) throw std::invalid_argument("pushes: force must be >= 0");
    }
  }

  /// Unit heading the push angle is measured from: the commanded velocity
  /// direction, or +x when stepping in place.
  Eigen::Vector2d heading() const {
    Eigen::Vector2d v{velocity.vx, velocity.vy};
    const double n = v.norm();
    return n > 0.0 ? Eigen::Vector2d(v / n) : Eigen::Vector2d(1.0, 0.0);
  }
};

/// Velocity impulse F*dt/m in the push direction; position unchanged.
inline ComState apply_push(const ComState& c, const PushEvent& e, const ModelParams& p,
                           const Eigen::Vector2d& heading) {
  const double th = e.theta_deg * M_PI / 180.0;
  const Eigen::Vector2d dir = Eigen::Rotation2Dd(th) * heading.normalized();
  ComState out = c;
  out.vel += dir * (e.force * e.duration / p.mass);
  return out;
}

struct SimState {
  double t_global = 0.0;
  double t_step = 0.0;
  ComState com;
  Footprint stance;
  Eigen::Vector3d swing_pos{0, 0, 0};
  Eigen::Vector3d swing_vel{0, 0, 0};
  Eigen::Vector3d swing_acc{0, 0, 0};
  AdaptedStep plan;
  int step_count = 0;
};

struct CycleRecord {
  double t;
  Eigen::Vector2d com, comd, dcm, stance;
  Eigen::Vector3d swing;
  Eigen::Vector2d plan_ut;
  double plan_duration;
  Eigen::Vector2d plan_b;
  int step_index;
};

struct StepRecord {
  int step_index;
  int stance_index;  // parity of the stance foot during the step
  double t_start, t_end;
  double duration;        // planned landing time within the step [s]
  Eigen::Vector2d u_t;    // footprint the step landed on
  Eigen::Vector2d b_end;  // DCM offset at the exchange, relative to u_t
  Eigen::Vector2d com_end;
  bool timing_at_lower_bound;
};

struct Trace {
  std::vector<CycleRecord> cycles;
  std::vector<StepRecord> steps;
  double t_nom = 0.0;
  Eigen::Vector2d b_nom_even{0, 0};  // nominal offset when the stance index is even
  Eigen::Vector2d b_nom_odd{0, 0};
  Eigen::Vector2d heading{1, 0};
  bool diverged = false;
  double end_time = 0.0;
  double last_push_time = -1.0;  // < 0 when no push was applied
};

/// Deterministic closed-loop simulation: exact LIPM plant, two-stage
/// controller at every control cycle, online swing replanning, instantaneous
/// support exchange at the adapted landing time (the cycle containing it is
/// split exactly, so realized step durations do not quantize to the dt grid).
class SimEngine {
 public:
  explicit SimEngine(const SimConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    nominal_ = nominal_gait(cfg_.velocity, cfg_.limits, cfg_.model);
    heading_ = cfg_.heading();

    state_.stance = Footprint{{0.0, 0.0}, cfg_.initial_stance == StanceSide::left ? 1 : 0};
    state_.com = periodic_orbit_start(nominal_, state_.stance, cfg_.model);
    state_.plan = nominal_plan();
    const Eigen::Vector2d prev_foot =
        state_.stance.pos - nominal_displacement(nominal_, state_.stance.index - 1, cfg_.model);
    state_.swing_pos << prev_foot.x(), prev_foot.y(), 0.0;
    rebuild_swing();

    trace_.t_nom = nominal_.t_nom;
    trace_.b_nom_even = nominal_dcm_offsets(nominal_, 0, cfg_.model);
    trace_.b_nom_odd = nominal_dcm_offsets(nominal_, 1, cfg_.model);
    trace_.heading = heading_;
    pending_pushes_ = cfg_.pushes;
    record_cycle();
  }

  const SimState& state() const { return state_; }
  const Trace& trace() const { return trace_; }
  const NominalGait& nominal() const { return nominal_; }

  /// One control cycle. Returns false once the run is over (diverged or
  /// step budget exhausted).
  bool step_cycle() {
    const double dt = cfg_.dt;
    const double cycle_start = state_.t_global;

    apply_pushes(cycle_start, dt);

    const Dcm xi = dcm_from_state(state_.com, cfg_.model);
    if ((xi.xi - state_.stance.pos).norm() > cfg_.recovery.divergence_radius) {
      trace_.diverged = true;
      trace_.end_time = cycle_start;
      return false;
    }

    if (state_.plan.duration - state_.t_step >= kTimingMargin - 1e-12) {
      StepContext ctx{xi, state_.stance, state_.t_step, nominal_, cfg_.limits, cfg_.model};
      state_.plan = cfg_.mode == ControllerMode::adaptive
                        ? adapt_step(ctx, cfg_.weights, solver_)
                        : fixed_timing_step(ctx, cfg_.weights, solver_);
      // An unchanged plan keeps the current polynomials: refitting from a
      // boundary state that lies on them reproduces them exactly.
      if (state_.plan.next_footprint.pos.x() != swing_target_.x() ||
          state_.plan.next_footprint.pos.y() != swing_target_.y() ||
          state_.plan.duration != swing_land_time_) {
        rebuild_swing();
      }
    }

    // Propagate the exact plant across the cycle, splitting at support
    // exchanges and impulse onsets so neither quantizes to the dt grid.
    double remaining = dt;
    double t_local = cycle_start;
    int guard = 0;
    while (remaining > 0.0) {
      if (++guard > 64) throw SolverFailure("event loop stalled within a cycle");
      double d_push = std::numeric_limits<double>::infinity();
      if (cfg_.push_model == PushModel::impulse) {
        for (const auto& pu : pending_pushes_) {
          d_push = std::min(d_push, std::max(0.0, pu.t_push - t_local));
        }
      }
      const double d_exchange = std::max(0.0, state_.plan.duration - state_.t_step);
      const double d = std::min({remaining, d_push, d_exchange});
      state_.com = propagate_com(state_.com, state_.stance, d, cfg_.model);
      t_local += d;
      remaining -= d;
      if (remaining < 1e-12) remaining = 0.0;
      state_.t_step += d;

      if (state_.t_step >= state_.plan.duration - 1e-12) {
        exchange_support(t_local);
        if (stopped_) {
          trace_.end_time = t_local;
          return false;
        }
      }
      if (cfg_.push_model == PushModel::impulse) {
        for (auto it = pending_pushes_.begin(); it != pending_pushes_.end();) {
          if (it->t_push <= t_local + 1e-12) {
            state_.com = apply_push(state_.com, *it, cfg_.model, heading_);
            trace_.last_push_time = std::max(trace_.last_push_time, it->t_push);
            it = pending_pushes_.erase(it);
          } else {
            ++it;
          }
        }
      }
    }
    state_.t_global = cycle_start + dt;

    const Polynomial::State sx = swing_x_.eval(state_.t_step);
    const Polynomial::State sy = swing_y_.eval(state_.t_step);
    const Polynomial::State sz = swing_z_.eval(state_.t_step);
    state_.swing_pos << sx.pos, sy.pos, sz.pos;
    state_.swing_vel << sx.vel, sy.vel, sz.vel;
    state_.swing_acc << sx.acc, sy.acc, sz.acc;

    record_cycle();
    trace_.end_time = state_.t_global;
    return true;
  }

  Trace run() {
    const long cycles = static_cast<long>(std::floor(cfg_.duration / cfg_.dt + 1e-9));
    for (long i = 0; i < cycles; ++i) {
      if (!step_cycle()) break;
    }
    return std::move(trace_);
  }

 private:
  AdaptedStep nominal_plan() const {
    AdaptedStep plan;
    plan.next_footprint =
        Footprint{state_.stance.pos + nominal_displacement(nominal_, state_.stance.index, cfg_.model),
                  state_.stance.index + 1};
    plan.tau = nominal_.tau_nom;
    plan.duration = nominal_.t_nom;
    plan.offset = DcmOffset{nominal_dcm_offsets(nominal_, state_.stance.index + 1, cfg_.model)};
    return plan;
  }

  // Impulses already due apply before the cycle's measurement; later onsets
  // within the cycle are handled time-exactly by the propagation event loop.
  void apply_pushes(double cycle_start, double dt) {
    for (auto it = pending_pushes_.begin(); it != pending_pushes_.end();) {
      if (cfg_.push_model == PushModel::impulse) {
        if (it->t_push <= cycle_start + 1e-12) {
          state_.com = apply_push(state_.com, *it, cfg_.model, heading_);
          trace_.last_push_time = std::max(trace_.last_push_time, it->t_push);
          it = pending_pushes_.erase(it);
          continue;
        }
      } else {
        const double lo = std::max(cycle_start, it->t_push);
        const double hi = std::min(cycle_start + dt, it->t_push + it->duration);
        if (hi > lo) {
          PushEvent part = *it;
          part.duration = hi - lo;
          state_.com = apply_push(state_.com, part, cfg_.model, heading_);
          trace_.last_push_time = std::max(trace_.last_push_time, it->t_push + it->duration);
        }
        if (cycle_start >= it->t_push + it->duration) {
          it = pending_pushes_.erase(it);
          continue;
        }
      }
      ++it;
    }
  }

  void exchange_support(double t_exchange) {
    const Dcm xi_end = dcm_from_state(state_.com, cfg_.model);
    StepRecord rec;
    rec.step_index = state_.step_count;
    rec.stance_index = state_.stance.index;
    rec.t_start = step_start_time_;
    rec.t_end = t_exchange;
    rec.duration = state_.plan.duration;
    rec.u_t = state_.plan.next_footprint.pos;
    rec.b_end = xi_end.xi - state_.plan.next_footprint.pos;
    rec.com_end = state_.com.pos;
    rec.timing_at_lower_bound = state_.plan.timing_at_lower_bound;
    trace_.steps.push_back(rec);

    const Eigen::Vector2d old_stance = state_.stance.pos;
    state_.stance = state_.plan.next_footprint;
    state_.step_count += 1;
    state_.t_step = 0.0;
    step_start_time_ = t_exchange;
    state_.swing_pos << old_stance.x(), old_stance.y(), 0.0;
    state_.swing_vel.setZero();
    state_.swing_acc.setZero();

    nominal_ = nominal_gait(cfg_.velocity, cfg_.limits, cfg_.model);
    state_.plan = nominal_plan();
    rebuild_swing();

    if (state_.step_count >= cfg_.max_steps) stopped_ = true;
  }

  void rebuild_swing() {
    const double t = state_.t_step;
    const double land = state_.plan.duration;
    swing_target_ = state_.plan.next_footprint.pos;
    swing_land_time_ = land;
    swing_x_ = horizontal_coeffs(SwingBoundary{t, state_.swing_pos.x(), state_.swing_vel.x(),
                                               state_.swing_acc.x(), land,
                                               state_.plan.next_footprint.pos.x()});
    swing_y_ = horizontal_coeffs(SwingBoundary{t, state_.swing_pos.y(), state_.swing_vel.y(),
                                               state_.swing_acc.y(), land,
                                               state_.plan.next_footprint.pos.y()});
    swing_z_ = vertical_coeffs(SwingBoundary{t, state_.swing_pos.z(), state_.swing_vel.z(),
                                             state_.swing_acc.z(), land, 0.0},
                               cfg_.swing, solver_);
  }

  void record_cycle() {
    CycleRecord r;
    r.t = state_.t_global;
    r.com = state_.com.pos;
    r.comd = state_.com.vel;
    r.dcm = dcm_from_state(state_.com, cfg_.model).xi;
    r.stance = state_.stance.pos;
    r.swing = state_.swing_pos;
    r.plan_ut = state_.plan.next_footprint.pos;
    r.plan_duration = state_.plan.duration;
    r.plan_b = state_.plan.offset.b;
    r.step_index = state_.step_count;
    trace_.cycles.push_back(r);
  }

  SimConfig cfg_;
  NominalGait nominal_{};
  Eigen::Vector2d heading_{1, 0};
  SimState state_;
  Trace trace_;
  QpSolver solver_;
  Polynomial swing_x_, swing_y_, swing_z_;
  Eigen::Vector2d swing_target_{0, 0};
  double swing_land_time_ = -1.0;
  std::vector<PushEvent> pending_pushes_;
  double step_start_time_ = 0.0;
  bool stopped_ = false;
};

inline Trace run_scenario(const SimConfig& cfg) { return SimEngine(cfg).run(); }

/// Recovery: never diverged, and within settle_steps after the last push
/// some step realizes the nominal end-of-step offset within offset_tol and
/// every later step keeps it.
inline bool is_recovered(const Trace& tr, const RecoveryTolerances& tol) {
  if (tr.diverged) return false;
  auto offset_error = [&](const StepRecord& s) {
    const Eigen::Vector2d& b_nom =
        ((s.stance_index + 1) % 2 == 0) ? tr.b_nom_even : tr.b_nom_odd;
    return (s.b_end - b_nom).norm();
  };
  if (tr.last_push_time < 0.0) return true;

  std::vector<size_t> post;
  for (size_t i = 0; i < tr.steps.size(); ++i) {
    if (tr.steps[i].t_end > tr.last_push_time) post.push_back(i);
  }
  if (post.empty()) return false;
  const size_t budget = std::min(post.size(), static_cast<size_t>(tol.settle_steps));
  for (size_t k = 0; k < budget; ++k) {
    bool ok = true;
    for (size_t j = k; j < post.size(); ++j) {
      if (offset_error(tr.steps[post[j]]) > tol.offset_tol) {
        ok = false;
        break;
      }
    }
    if (ok) return true;
  }
  return false;
}

struct SweepOptions {
  double force_max = 1500.0;   // [N] bisection bracket
  double resolution = 1.0;     // [N]
  double push_duration = 0.1;  // [s]
  int threads = 0;             // 0 = hardware concurrency
};

struct SweepPoint {
  double theta_deg;
  double f_max;
};

/// Largest recoverable push per direction, by bisection. Pushes hit at the
/// start of the third step, a left-stance step (initial stance is forced to
/// left). Evaluations are independent per direction and may run on several
/// threads; results are ordered by the theta list.
inline std::vector<SweepPoint> max_push_sweep(const SimConfig& base,
                                              const std::vector<double>& thetas,
                                              const SweepOptions& opt = {}) {
  SimConfig cfg = base;
  cfg.initial_stance = StanceSide::left;
  const NominalGait g = nominal_gait(cfg.velocity, cfg.limits, cfg.model);
  const double t_push = 2.0 * g.t_nom;
  cfg.duration = t_push + (cfg.recovery.settle_steps + 2) * g.t_nom + 0.1;

  auto f_max_at = [cfg, t_push, &opt](double theta) {
    auto recovered = [&](double force) {
      SimConfig c = cfg;
      c.pushes = {PushEvent{t_push, force, opt.push_duration, theta}};
      const Trace tr = run_scenario(c);
      return is_recovered(tr, c.recovery);
    };
    if (!recovered(0.0)) return 0.0;
    if (recovered(opt.force_max)) return opt.force_max;
    double lo = 0.0, hi = opt.force_max;
    while (hi - lo > opt.resolution) {
      const double mid = 0.5 * (lo + hi);
      (recovered(mid) ? lo : hi) = mid;
    }
    return lo;
  };

  std::vector<SweepPoint> out(thetas.size());
  unsigned n_threads = opt.threads > 0 ? static_cast<unsigned>(opt.threads)
                                       : std::max(1u, std::thread::hardware_concurrency());
  n_threads = std::min<unsigned>(n_threads, std::max<size_t>(thetas.size(), 1));
  if (n_threads <= 1) {
    for (size_t i = 0; i < thetas.size(); ++i) out[i] = {thetas[i], f_max_at(thetas[i])};
    return out;
  }
  std::atomic<size_t> next{0};
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < n_threads; ++w) {
    pool.emplace_back([&]() {
      while (true) {
        const size_t i = next.fetch_add(1);
        if (i >= thetas.size()) return;
        out[i] = {thetas[i], f_max_at(thetas[i])};
      }
    });
  }
  for (auto& th : pool) th.join();
  return out;
}

}  // namespace dcmstep
