#pragma once

#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

#include "dcmstep/errors.hpp"
#include "dcmstep/lipm.hpp"
#include "dcmstep/nominal.hpp"
#include "dcmstep/qp.hpp"

namespace dcmstep {

/// Objective weights of the per-cycle step adaptation QP. The DCM-offset
/// weights must dominate the others so the offset only deviates when no
/// feasible footprint/timing can realize it.
struct AdapterWeights {
  double footprint_x = 1.0;  // alpha1
  double footprint_y = 1.0;  // alpha2
  double timing = 5.0;       // alpha3
  double offset_x = 1e6;     // alpha4
  double offset_y = 1e6;     // alpha5

  void validate() const {
    if (!(footprint_x > 0.0 && footprint_y > 0.0 && timing > 0.0 && offset_x > 0.0 &&
          offset_y > 0.0)) {
      throw std::invalid_argument("weights: all alphas must be > 0");
    }
  }
};

/// Floor on the remaining swing-replanning window. The adapted landing time
/// never comes closer to the current step time than this, and the controller
/// freezes once the remaining time falls below it.
inline constexpr double kTimingMargin = 0.02;  // [s]

/// Inputs of one adaptation cycle.
struct StepContext {
  Dcm measured_dcm;
  Footprint stance;      // current point of contact; index parity = stance side
  double time_in_step;   // seconds since support exchange
  NominalGait nominal;
  GaitLimits limits;
  ModelParams model;
};

struct AdaptedStep {
  Footprint next_footprint;  // index = stance.index + 1
  double tau = 1.0;          // e^{w0 T}
  double duration = 0.0;     // T = ln(tau)/w0 [s]
  DcmOffset offset;          // end-of-step DCM offset relative to next_footprint
  double objective_value = 0.0;
  bool timing_at_lower_bound = false;
};

/// Five-variable QP over (u_Tx, u_Ty, tau, b_x, b_y): keep the gait as close
/// as possible to the nominal one subject to the per-axis landing equality
///   u_T - (xi_mea - u0) e^{-w0 t} tau + b = u0
/// and the gait boxes. The lateral box flips sign with the stance parity,
/// and the b target uses the landing foot's parity. With fix_timing, tau is
/// pinned to its nominal by an extra equality (the no-timing-adjustment
/// baseline).
inline QpProblem build_step_qp(const StepContext& ctx, const AdapterWeights& w,
                               bool fix_timing = false) {
  w.validate();
  ctx.limits.validate();
  if (!(ctx.time_in_step >= 0.0)) throw std::invalid_argument("time_in_step must be >= 0");
  if (!ctx.measured_dcm.xi.allFinite()) throw std::invalid_argument("measured DCM not finite");

  const ModelParams& p = ctx.model;
  const NominalGait& g = ctx.nominal;
  const int n = ctx.stance.index;
  const Eigen::Vector2d u0 = ctx.stance.pos;
  const Eigen::Vector2d disp = nominal_displacement(g, n, p);
  const Eigen::Vector2d b_tgt = nominal_dcm_offsets(g, n + 1, p);

  QpProblem qp(5);
  qp.target << u0.x() + disp.x(), u0.y() + disp.y(), g.tau_nom, b_tgt.x(), b_tgt.y();
  qp.weight << w.footprint_x, w.footprint_y, w.timing, w.offset_x, w.offset_y;

  const Eigen::Vector2d coef =
      (ctx.measured_dcm.xi - u0) * std::exp(-p.omega0 * ctx.time_in_step);
  Eigen::RowVectorXd row(5);
  row << 1.0, 0.0, -coef.x(), 1.0, 0.0;
  qp.add_equality(row, u0.x());
  row << 0.0, 1.0, -coef.y(), 0.0, 1.0;
  qp.add_equality(row, u0.y());
  if (fix_timing) {
    row << 0.0, 0.0, 1.0, 0.0, 0.0;
    qp.add_equality(row, g.tau_nom);
  }

  // Box rows in fixed order; the tau lower bound is row 5.
  qp.add_upper_bound(0, u0.x() + ctx.limits.l_max);
  qp.add_lower_bound(0, u0.x() + ctx.limits.l_min);
  if (n % 2 == 0) {
    qp.add_upper_bound(1, u0.y() + ctx.limits.w_max);
    qp.add_lower_bound(1, u0.y() + ctx.limits.w_min);
  } else {
    qp.add_upper_bound(1, u0.y() - ctx.limits.w_min);
    qp.add_lower_bound(1, u0.y() - ctx.limits.w_max);
  }
  const double t_lower = std::max(ctx.limits.t_min, ctx.time_in_step + kTimingMargin);
  qp.add_upper_bound(2, std::exp(p.omega0 * ctx.limits.t_max));
  qp.add_lower_bound(2, std::exp(p.omega0 * t_lower));
  return qp;
}

inline constexpr int kTauLowerBoundRow = 5;

namespace detail {

inline AdaptedStep solve_step_qp(const StepContext& ctx, const AdapterWeights& w,
                                 QpSolver& solver, bool fix_timing) {
  const QpProblem qp = build_step_qp(ctx, w, fix_timing);
  const QpSolution sol = solver.solve(qp);
  if (sol.status != QpStatus::optimal) {
    throw SolverFailure("step adaptation QP reported infeasible");
  }
  AdaptedStep out;
  out.next_footprint = Footprint{{sol.z(0), sol.z(1)}, ctx.stance.index + 1};
  out.tau = sol.z(2);
  out.duration = std::log(sol.z(2)) / ctx.model.omega0;
  out.offset = DcmOffset{{sol.z(3), sol.z(4)}};
  out.objective_value = sol.objective;
  for (int idx : sol.active_set) {
    if (idx == kTauLowerBoundRow) out.timing_at_lower_bound = true;
  }
  return out;
}

}  // namespace detail

/// Stage 2: adapt footprint, step duration and DCM offset to the measured
/// DCM. On the undisturbed nominal orbit this returns the nominal step
/// exactly. Requires time_in_step + kTimingMargin <= T_max.
inline AdaptedStep adapt_step(const StepContext& ctx, const AdapterWeights& w,
                              QpSolver& solver) {
  return detail::solve_step_qp(ctx, w, solver, false);
}

/// Baseline with the step duration pinned at its nominal value; only the
/// footprint and offset adapt. Requires time_in_step + kTimingMargin <= T_nom.
inline AdaptedStep fixed_timing_step(const StepContext& ctx, const AdapterWeights& w,
                                     QpSolver& solver) {
  return detail::solve_step_qp(ctx, w, solver, true);
}

}  // namespace dcmstep
