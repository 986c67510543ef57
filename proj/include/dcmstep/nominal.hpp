#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "dcmstep/errors.hpp"
#include "dcmstep/lipm.hpp"

namespace dcmstep {

/// Box bounds on the gait variables. L bounds are signed sagittal step
/// displacements; W bounds constrain the magnitude of the lateral
/// displacement of the swing foot relative to the stance foot (the sign
/// alternates with the stance side).
struct GaitLimits {
  double l_min, l_max;  // step length [m]
  double w_min, w_max;  // step width magnitude [m]
  double t_min, t_max;  // step duration [s]

  void validate() const {
    if (!(l_min < l_max)) throw std::invalid_argument("limits: L_min must be < L_max");
    if (!(w_min >= 0.0)) throw std::invalid_argument("limits: W_min must be >= 0");
    if (!(w_min < w_max)) throw std::invalid_argument("limits: W_min must be < W_max");
    if (!(t_min > 0.0)) throw std::invalid_argument("limits: T_min must be > 0");
    if (!(t_min < t_max)) throw std::invalid_argument("limits: T_min must be < T_max");
  }

  static GaitLimits defaults() { return GaitLimits{-0.5, 0.5, 0.1, 0.4, 0.2, 0.8}; }
};

struct VelocityCommand {
  double vx = 0.0;  // sagittal [m/s]
  double vy = 0.0;  // lateral [m/s]
};

/// Intersection of the per-variable timing bounds. Feasible iff lower <= upper.
struct TimingBounds {
  double lower;
  double upper;
  bool feasible() const { return lower <= upper; }
};

/// Stage-1 output: the gait a step-to-step periodic orbit realizes at the
/// commanded velocity.
struct NominalGait {
  double t_nom;    // [s]
  double l_nom;    // [m]
  double w_nom;    // [m], signed lateral progression per step
  double tau_nom;  // e^{w0 T_nom}
  double b_x_nom;  // [m]
  double b_y_nom;  // [m], value for an even stance index; flips sign part with parity
};

/// Combine duration bounds induced by the velocity command with the plain
/// timing bounds. A zero velocity component contributes no bounds.
inline TimingBounds timing_bounds(const VelocityCommand& v, const GaitLimits& lim) {
  lim.validate();
  double lo = lim.t_min;
  double hi = lim.t_max;
  if (v.vx != 0.0) {
    lo = std::max(lo, lim.l_min / std::abs(v.vx));
    hi = std::min(hi, lim.l_max / std::abs(v.vx));
  }
  if (v.vy != 0.0) {
    lo = std::max(lo, lim.w_min / std::abs(v.vy));
    hi = std::min(hi, lim.w_max / std::abs(v.vy));
  }
  return TimingBounds{lo, hi};
}

/// Nominal DCM offset for a step whose stance foot has the given index.
inline Eigen::Vector2d nominal_dcm_offsets(const NominalGait& g, int foot_index,
                                           const ModelParams& p) {
  const double sign = (foot_index % 2 == 0) ? 1.0 : -1.0;
  const double bx = g.l_nom / (g.tau_nom - 1.0);
  const double by = sign * p.pelvis_width / (1.0 + g.tau_nom) - g.w_nom / (1.0 - g.tau_nom);
  return {bx, by};
}

/// Nominal displacement from the stance foot to the next footprint.
inline Eigen::Vector2d nominal_displacement(const NominalGait& g, int foot_index,
                                            const ModelParams& p) {
  const double sign = (foot_index % 2 == 0) ? 1.0 : -1.0;
  return {g.l_nom, sign * p.pelvis_width + g.w_nom};
}

/// Pick the step timing in the middle of the feasible span and derive the
/// rest of the gait from it. Throws InfeasibleCommand when the span is empty.
inline NominalGait nominal_gait(const VelocityCommand& v, const GaitLimits& lim,
                                const ModelParams& p) {
  const TimingBounds tb = timing_bounds(v, lim);
  if (!tb.feasible()) {
    throw InfeasibleCommand("no step timing satisfies the gait bounds at vx=" +
                            std::to_string(v.vx) + " vy=" + std::to_string(v.vy));
  }
  NominalGait g;
  g.t_nom = 0.5 * (tb.lower + tb.upper);
  g.l_nom = v.vx * g.t_nom;
  g.w_nom = v.vy * g.t_nom;
  g.tau_nom = std::exp(p.omega0 * g.t_nom);
  const Eigen::Vector2d b = nominal_dcm_offsets(g, 0, p);
  g.b_x_nom = b.x();
  g.b_y_nom = b.y();
  return g;
}

/// CoM state that puts the step-to-step map exactly on the nominal periodic
/// orbit at the start of a step on the given stance foot. Derived from the
/// convergent component gamma = x - xd/w0, whose two-step fixed point is
/// gamma(n) - u0 = -(d(n)/tau + d(n+1)) / (1 - 1/tau^2) with d the nominal
/// displacement.
inline ComState periodic_orbit_start(const NominalGait& g, const Footprint& stance,
                                     const ModelParams& p) {
  const double sigma = 1.0 / g.tau_nom;
  const Eigen::Vector2d b = nominal_dcm_offsets(g, stance.index, p);
  const Eigen::Vector2d d0 = nominal_displacement(g, stance.index, p);
  const Eigen::Vector2d d1 = nominal_displacement(g, stance.index + 1, p);
  const Eigen::Vector2d gamma = -(d0 * sigma + d1) / (1.0 - sigma * sigma);
  ComState c;
  c.pos = stance.pos + 0.5 * (b + gamma);
  c.vel = 0.5 * p.omega0 * (b - gamma);
  return c;
}

}  // namespace dcmstep
