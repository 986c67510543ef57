#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "dcmstep/errors.hpp"
#include "dcmstep/qp.hpp"

namespace dcmstep {

/// Single-axis polynomial trajectory in step time. Coefficients multiply
/// powers of (t - origin); evaluation takes absolute step time within
/// [t_begin, t_end].
struct Polynomial {
  Eigen::VectorXd coeffs;
  double origin = 0.0;
  double t_begin = 0.0;
  double t_end = 0.0;

  struct State {
    double pos;
    double vel;
    double acc;
  };

  State eval(double t) const {
    if (t < t_begin - 1e-9 || t > t_end + 1e-9) {
      throw OutOfDomain("polynomial evaluated at t=" + std::to_string(t) +
                        " outside [" + std::to_string(t_begin) + ", " +
                        std::to_string(t_end) + "]");
    }
    const double s = t - origin;
    double p = coeffs(coeffs.size() - 1);
    double v = 0.0;
    double a = 0.0;
    for (int i = static_cast<int>(coeffs.size()) - 2; i >= 0; --i) {
      a = a * s + v;
      v = v * s + p;
      p = p * s + coeffs(i);
    }
    return State{p, v, 2.0 * a};
  }
};

/// Per-axis boundary data of one replanning cycle: the swing foot state at
/// the previous cycle and the landing condition at t_land.
struct SwingBoundary {
  double t_prev;     // [s] in step time
  double pos_prev;   // [m]
  double vel_prev;   // [m/s]
  double acc_prev;   // [m/s^2]
  double t_land;     // [s] adapted landing time
  double target;     // [m] landing position (0 for the vertical axis)
};

struct SwingConfig {
  double apex_height = 0.05;  // Z_des at mid-step [m]
  double max_height = 0.1;    // Z_max [m]
  int n_samples = 50;         // height-bound sample count on [0, T]

  void validate() const {
    if (!(apex_height > 0.0)) throw std::invalid_argument("swing: z_des must be > 0");
    if (!(apex_height <= max_height)) {
      throw std::invalid_argument("swing: z_des must be <= z_max");
    }
    if (n_samples < 2) throw std::invalid_argument("swing: n_samples must be >= 2");
  }
};

namespace detail {

inline void check_horizon(const SwingBoundary& b) {
  if (!(b.t_prev >= 0.0) || !(b.t_land > b.t_prev)) {
    throw std::invalid_argument("swing boundary requires 0 <= t_prev < t_land");
  }
  if (b.t_land - b.t_prev < 1e-4) {
    throw IllConditioned("swing replanning horizon below 1e-4 s");
  }
}

}  // namespace detail

/// Unique quintic matching (pos, vel, acc) at t_prev and (target, 0, 0) at
/// t_land, via the closed-form Hermite basis on the normalized horizon.
inline Polynomial horizontal_coeffs(const SwingBoundary& b) {
  detail::check_horizon(b);
  const double h = b.t_land - b.t_prev;
  const double d = b.target - b.pos_prev;
  const double v0 = b.vel_prev * h;
  const double a0 = b.acc_prev * h * h;

  Eigen::VectorXd k(6);
  k(0) = b.pos_prev;
  k(1) = v0;
  k(2) = 0.5 * a0;
  k(3) = 10.0 * d - 6.0 * v0 - 1.5 * a0;
  k(4) = -15.0 * d + 8.0 * v0 + 1.5 * a0;
  k(5) = 6.0 * d - 3.0 * v0 - 0.5 * a0;

  Polynomial poly;
  poly.coeffs.resize(6);
  double scale = 1.0;
  for (int i = 0; i < 6; ++i) {
    poly.coeffs(i) = k(i) / scale;
    scale *= h;
  }
  poly.origin = b.t_prev;
  poly.t_begin = b.t_prev;
  poly.t_end = b.t_land;
  return poly;
}

/// 9th-order vertical trajectory for the whole step: position, velocity and
/// acceleration pinned to the boundary state at t_prev and to (target, 0, 0)
/// at T, launching from rest on the ground at the first cycle of a step
/// (t_prev = 0); height sampled within [0, Z_max] over the remaining window
/// [t_prev, T]; apex pulled toward Z_des at T/2.
///
/// The pinned conditions are eliminated analytically: a quintic Hermite
/// interpolant provides the particular solution and the polynomials
/// (s-s_prev)^3 (1-s)^3 s^j, j=0..3, span the free directions exactly. The
/// QP runs over those four well-scaled coordinates, rotated so the
/// mid-height objective is diagonal. (Re-pinning the step-start conditions
/// on later cycles, as a literal reading would have it, makes the system
/// numerically rank deficient as soon as t_prev sits close to 0.)
inline Polynomial vertical_coeffs(const SwingBoundary& b, const SwingConfig& cfg,
                                  QpSolver& solver) {
  detail::check_horizon(b);
  cfg.validate();
  const double T = b.t_land;
  // A replan a sub-nanosecond into the step is the first cycle.
  const double s_prev = b.t_prev < 1e-9 ? 0.0 : b.t_prev / T;
  constexpr int kCoeffs = 10;  // degree 9
  constexpr int kFree = 4;

  if (s_prev == 0.0) {
    if (std::abs(b.pos_prev) > 1e-9 || std::abs(b.vel_prev) > 1e-9 ||
        std::abs(b.acc_prev) > 1e-9) {
      throw DegenerateProblem("step-start boundary state must be at rest on the ground");
    }
  }

  auto val_row = [&](double s) {
    Eigen::RowVectorXd r(kCoeffs);
    double sp = 1.0;
    for (int i = 0; i < kCoeffs; ++i) {
      r(i) = sp;
      sp *= s;
    }
    return r;
  };
  // convolution of coefficient vectors
  auto poly_mul = [](const Eigen::VectorXd& a, const Eigen::VectorXd& c) {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(a.size() + c.size() - 1);
    for (int i = 0; i < a.size(); ++i) {
      for (int j = 0; j < c.size(); ++j) out(i + j) += a(i) * c(j);
    }
    return out;
  };

  // Particular solution: quintic Hermite on [s_prev, 1] in u = (s - s_prev)/ds.
  const double ds = 1.0 - s_prev;
  const double d = b.target - b.pos_prev;
  const double v0 = b.vel_prev * T * ds;
  const double a0 = b.acc_prev * T * T * ds * ds;
  Eigen::VectorXd hermite(6);
  hermite << b.pos_prev, v0, 0.5 * a0, 10.0 * d - 6.0 * v0 - 1.5 * a0,
      -15.0 * d + 8.0 * v0 + 1.5 * a0, 6.0 * d - 3.0 * v0 - 0.5 * a0;
  Eigen::VectorXd shift(2);  // (s - s_prev)
  shift << -s_prev, 1.0;
  Eigen::VectorXd c_part = Eigen::VectorXd::Zero(kCoeffs);
  Eigen::VectorXd shift_pow(1);
  shift_pow << 1.0;
  double ds_pow = 1.0;
  for (int i = 0; i < 6; ++i) {
    c_part.head(shift_pow.size()) += (hermite(i) / ds_pow) * shift_pow;
    shift_pow = poly_mul(shift_pow, shift);
    ds_pow *= ds;
  }

  // Free directions: (s - s_prev)^3 (1 - s)^3 s^j, triple zeros at both nodes.
  Eigen::VectorXd one_minus(2);
  one_minus << 1.0, -1.0;
  const Eigen::VectorXd cubic_pair =
      poly_mul(poly_mul(poly_mul(shift, shift), shift),
               poly_mul(poly_mul(one_minus, one_minus), one_minus));
  Eigen::MatrixXd basis = Eigen::MatrixXd::Zero(kCoeffs, kFree);
  for (int j = 0; j < kFree; ++j) {
    basis.block(j, j, cubic_pair.size(), 1) += cubic_pair;
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> kqr(basis);
  Eigen::MatrixXd V = kqr.householderQ() * Eigen::MatrixXd::Identity(kCoeffs, kFree);
  const int k = kFree;

  // Rotate the free directions so Z(T/2) responds to the first coordinate only.
  const Eigen::RowVectorXd mid_row = val_row(0.5);
  Eigen::RowVectorXd g = mid_row * V;
  const double gnorm = g.norm();
  if (gnorm > 1e-12) {
    Eigen::HouseholderQR<Eigen::MatrixXd> gqr(g.transpose());
    const Eigen::MatrixXd Q = gqr.householderQ();
    V = (V * Q).eval();
    g = mid_row * V;  // now (±gnorm, 0, ..., 0)
  }

  QpProblem qp(k);
  const double m_part = mid_row.dot(c_part);
  if (std::abs(g(0)) > 1e-12) {
    qp.weight(0) = g(0) * g(0);
    qp.target(0) = (cfg.apex_height - m_part) / g(0);
  }
  for (int i = (std::abs(g(0)) > 1e-12 ? 1 : 0); i < k; ++i) {
    qp.weight(i) = 1e-6 * std::max(qp.weight(0), 1e-6);
    qp.target(i) = 0.0;  // stay near the min-norm interpolant
  }

  // Height band at the interior samples. The two endpoint samples are pinned
  // by the boundary conditions and carry no rows. A replan can start from a
  // state just outside the band (the previous polynomial only respected it
  // at its own samples), so the band widens to the boundary value over a
  // short launch window instead of going infeasible.
  const double lb_relax = std::min(0.0, b.pos_prev);
  const double ub_relax = std::max(cfg.max_height, b.pos_prev);
  const double launch_end = s_prev + 0.15 * (1.0 - s_prev);
  const int m_rows = 2 * (cfg.n_samples - 2);
  qp.ineq_rows.resize(m_rows, k);
  qp.ineq_rhs.resize(m_rows);
  for (int j = 1; j + 1 < cfg.n_samples; ++j) {
    const double s =
        s_prev + (1.0 - s_prev) * static_cast<double>(j) / (cfg.n_samples - 1);
    const Eigen::RowVectorXd rv = val_row(s) * V;
    const double base = val_row(s).dot(c_part);
    const bool launch = s <= launch_end;
    qp.ineq_rows.row(2 * (j - 1)) = rv;
    qp.ineq_rhs(2 * (j - 1)) = (launch ? ub_relax : cfg.max_height) - base;
    qp.ineq_rows.row(2 * (j - 1) + 1) = -rv;
    qp.ineq_rhs(2 * (j - 1) + 1) = base - (launch ? lb_relax : 0.0);
  }

  const QpSolution sol = solver.solve(qp);
  if (sol.status != QpStatus::optimal) {
    throw SolverFailure("vertical swing QP reported infeasible");
  }
  const Eigen::VectorXd c_scaled = c_part + V * sol.z;

  Polynomial poly;
  poly.coeffs.resize(kCoeffs);
  double scale = 1.0;
  for (int i = 0; i < kCoeffs; ++i) {
    poly.coeffs(i) = c_scaled(i) / scale;
    scale *= T;
  }
  poly.origin = 0.0;
  poly.t_begin = 0.0;
  poly.t_end = T;
  return poly;
}

}  // namespace dcmstep
