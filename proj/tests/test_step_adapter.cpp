#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "dcmstep/step_adapter.hpp"
#include "support/oracles.hpp"

using namespace dcmstep;

namespace {

ModelParams params() { return ModelParams::defaults(); }
GaitLimits limits() { return GaitLimits::defaults(); }

/// Context whose measured DCM lies exactly on the nominal orbit at time t.
StepContext orbit_context(const VelocityCommand& v, const Footprint& stance, double t,
                          const Eigen::Vector2d& dcm_error = {0.0, 0.0}) {
  const ModelParams p = params();
  const NominalGait g = nominal_gait(v, limits(), p);
  const Eigen::Vector2d xi =
      stance.pos + nominal_dcm_offsets(g, stance.index, p) * std::exp(p.omega0 * t) + dcm_error;
  return StepContext{Dcm{xi}, stance, t, g, limits(), p};
}

double equality_residual(const QpProblem& qp, const Eigen::VectorXd& z) {
  return (qp.eq_rows * z - qp.eq_rhs).lpNorm<Eigen::Infinity>();
}

}  // namespace

TEST(BuildStepQpTest, NominalPointSatisfiesEqualityOnOrbit) {
  const ModelParams p = params();
  for (int parity : {0, 1}) {
    for (double t : {0.0, 0.1, 0.25}) {
      const StepContext ctx = orbit_context(VelocityCommand{1, 0}, Footprint{{0.4, -0.1}, parity}, t);
      const QpProblem qp = build_step_qp(ctx, AdapterWeights{});
      Eigen::VectorXd z(5);
      const Eigen::Vector2d disp = nominal_displacement(ctx.nominal, parity, p);
      const Eigen::Vector2d b_next = nominal_dcm_offsets(ctx.nominal, parity + 1, p);
      z << ctx.stance.pos.x() + disp.x(), ctx.stance.pos.y() + disp.y(), ctx.nominal.tau_nom,
          b_next.x(), b_next.y();
      EXPECT_LE(equality_residual(qp, z), 1e-12) << "parity " << parity << " t " << t;
    }
  }
}

TEST(BuildStepQpTest, DcmOnContactZeroesTimingCoefficient) {
  const ModelParams p = params();
  const NominalGait g = nominal_gait(VelocityCommand{0, 0}, limits(), p);
  const Footprint stance{{0.2, 0.3}, 0};
  const StepContext ctx{Dcm{stance.pos}, stance, 0.0, g, limits(), p};
  const QpProblem qp = build_step_qp(ctx, AdapterWeights{});
  EXPECT_EQ(qp.eq_rows(0, 2), 0.0);
  EXPECT_EQ(qp.eq_rows(1, 2), 0.0);

  // equality reduces to u_T + b = u0
  QpSolver solver;
  const QpSolution s = solver.solve(qp);
  ASSERT_EQ(s.status, QpStatus::optimal);
  EXPECT_NEAR(s.z(0) + s.z(3), stance.pos.x(), 1e-9);
  EXPECT_NEAR(s.z(1) + s.z(4), stance.pos.y(), 1e-9);
}

TEST(BuildStepQpTest, TimingCoefficientDecaysWithinStep) {
  const Eigen::Vector2d err{0.08, -0.03};
  const StepContext c0 = orbit_context(VelocityCommand{1, 0}, Footprint{{0, 0}, 0}, 0.0, err);
  const ModelParams p = params();
  const NominalGait g = c0.nominal;
  for (double t : {0.05, 0.15, 0.3}) {
    // same measured DCM, later in the step
    const StepContext ct{c0.measured_dcm, c0.stance, t, g, limits(), p};
    const QpProblem q0 = build_step_qp(c0, AdapterWeights{});
    const QpProblem qt = build_step_qp(ct, AdapterWeights{});
    EXPECT_NEAR(qt.eq_rows(0, 2), q0.eq_rows(0, 2) * std::exp(-p.omega0 * t), 1e-14);
  }
}

TEST(AdaptStepTest, NominalFixedPointAtStepStart) {
  const ModelParams p = params();
  QpSolver solver;
  for (int parity : {0, 1}) {
    const Footprint stance{{1.2, 0.4}, parity};
    const StepContext ctx = orbit_context(VelocityCommand{1, 0}, stance, 0.0);
    const AdaptedStep step = adapt_step(ctx, AdapterWeights{}, solver);
    const Eigen::Vector2d disp = nominal_displacement(ctx.nominal, parity, p);
    EXPECT_LE((step.next_footprint.pos - (stance.pos + disp)).norm(), 1e-12);
    EXPECT_EQ(step.next_footprint.index, parity + 1);
    EXPECT_NEAR(step.duration, ctx.nominal.t_nom, 1e-12);
    EXPECT_NEAR(step.tau, ctx.nominal.tau_nom, 1e-12);
    EXPECT_LE((step.offset.b - nominal_dcm_offsets(ctx.nominal, parity + 1, p)).norm(), 1e-12);
    EXPECT_FALSE(step.timing_at_lower_bound);
    EXPECT_NEAR(step.objective_value, 0.0, 1e-15);
    // sagittal displacement: 0.35 forward; lateral: pelvis width toward the other side
    EXPECT_NEAR(step.next_footprint.pos.x() - stance.pos.x(), 0.35, 1e-9);
    EXPECT_NEAR(step.next_footprint.pos.y() - stance.pos.y(), (parity % 2 == 0 ? 0.2 : -0.2),
                1e-9);
  }
}

TEST(AdaptStepTest, NominalFixedPointMidStep) {
  QpSolver solver;
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const int parity = trial % 2;
    const VelocityCommand v{trial % 3 == 0 ? 0.0 : 1.0, 0.0};
    const NominalGait g = nominal_gait(v, limits(), params());
    const double t = unit(rng) * (g.t_nom - kTimingMargin);
    const Footprint stance{{unit(rng), unit(rng)}, parity};
    const StepContext ctx = orbit_context(v, stance, t);
    const AdaptedStep step = adapt_step(ctx, AdapterWeights{}, solver);
    const Eigen::Vector2d disp = nominal_displacement(g, parity, params());
    EXPECT_LE((step.next_footprint.pos - (stance.pos + disp)).norm(), 1e-9);
    EXPECT_NEAR(step.duration, g.t_nom, 1e-9);
  }
}

TEST(AdaptStepTest, SmallLateralErrorAbsorbedByFootprint) {
  const ModelParams p = params();
  QpSolver solver;
  const Footprint stance{{0, 0}, 0};
  const StepContext ctx =
      orbit_context(VelocityCommand{1, 0}, stance, 0.0, Eigen::Vector2d{0.0, 0.01});
  const AdaptedStep step = adapt_step(ctx, AdapterWeights{}, solver);
  const Eigen::Vector2d b_next = nominal_dcm_offsets(ctx.nominal, 1, p);
  EXPECT_LE((step.offset.b - b_next).norm(), 1e-6);
  // footprint moved laterally by roughly tau_nom * error
  const double shift = step.next_footprint.pos.y() -
                       (stance.pos.y() + nominal_displacement(ctx.nominal, 0, p).y());
  EXPECT_NEAR(shift, 0.01 * ctx.nominal.tau_nom, 2e-3);
}

TEST(AdaptStepTest, SeverePushPinsFootprintAndTiming) {
  const ModelParams p = params();
  QpSolver solver;
  for (int parity : {0, 1}) {
    const double side = parity % 2 == 0 ? 1.0 : -1.0;
    const Footprint stance{{0, 0}, parity};
    const StepContext ctx = orbit_context(VelocityCommand{1, 0}, stance, 0.0,
                                          Eigen::Vector2d{0.0, side * 0.2});
    const AdaptedStep step = adapt_step(ctx, AdapterWeights{}, solver);
    EXPECT_NEAR(step.next_footprint.pos.y(), stance.pos.y() + side * limits().w_max, 1e-9);
    EXPECT_TRUE(step.timing_at_lower_bound);
    EXPECT_NEAR(step.duration, limits().t_min, 1e-9);
    const Eigen::Vector2d b_next = nominal_dcm_offsets(ctx.nominal, parity + 1, p);
    EXPECT_GE((step.offset.b - b_next).norm(), 1e-3);
  }
}

TEST(FixedTimingStepTest, MatchesAdaptiveWhenUnperturbed) {
  QpSolver solver;
  const StepContext ctx = orbit_context(VelocityCommand{1, 0}, Footprint{{0, 0}, 1}, 0.0);
  const AdaptedStep a = adapt_step(ctx, AdapterWeights{}, solver);
  const AdaptedStep f = fixed_timing_step(ctx, AdapterWeights{}, solver);
  EXPECT_LE((a.next_footprint.pos - f.next_footprint.pos).norm(), 1e-12);
  EXPECT_NEAR(a.tau, f.tau, 1e-12);
}

TEST(FixedTimingStepTest, MidStepOffOrbitStillSolvable) {
  const ModelParams p = params();
  QpSolver solver;
  const NominalGait g = nominal_gait(VelocityCommand{1, 0}, limits(), p);
  const Footprint stance{{0, 0}, 0};
  // measured DCM equals the step-start orbit value although t > 0
  const Dcm xi{stance.pos + nominal_dcm_offsets(g, 0, p)};
  const StepContext ctx{xi, stance, 0.12, g, limits(), p};
  const AdaptedStep f = fixed_timing_step(ctx, AdapterWeights{}, solver);
  EXPECT_NEAR(f.tau, g.tau_nom, 1e-12);
  // returned point satisfies the landing equality
  const Eigen::Vector2d coef = (xi.xi - stance.pos) * std::exp(-p.omega0 * ctx.time_in_step);
  const Eigen::Vector2d resid =
      f.next_footprint.pos - coef * f.tau + f.offset.b - stance.pos;
  EXPECT_LE(resid.norm(), 1e-9);
}

TEST(StepAdapterInvariants, RandomizedContexts) {
  const ModelParams p = params();
  QpSolver solver;
  std::mt19937 rng(41);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const VelocityCommand commands[] = {{0, 0}, {1, 0}, {-0.5, 0}, {0.5, 0}, {0, 0.2}};
  for (int trial = 0; trial < 500; ++trial) {
    const VelocityCommand v = commands[trial % 5];
    const NominalGait g = nominal_gait(v, limits(), p);
    const int parity = trial % 2;
    const Footprint stance{{2.0 * unit(rng) - 1.0, 2.0 * unit(rng) - 1.0}, parity};
    const double t = unit(rng) * (g.t_nom - kTimingMargin);
    const Eigen::Vector2d err{0.6 * unit(rng) - 0.3, 0.6 * unit(rng) - 0.3};
    const StepContext ctx = orbit_context(v, stance, t, err);

    // (a) the QP is always feasible
    AdaptedStep a;
    ASSERT_NO_THROW(a = adapt_step(ctx, AdapterWeights{}, solver)) << "trial " << trial;
    AdaptedStep f;
    ASSERT_NO_THROW(f = fixed_timing_step(ctx, AdapterWeights{}, solver)) << "trial " << trial;

    // (c) timing freedom never hurts
    EXPECT_LE(a.objective_value, f.objective_value + 1e-9) << "trial " << trial;

    // (d) change-of-variable round trip
    EXPECT_NEAR(std::exp(p.omega0 * a.duration), a.tau, 1e-12 * a.tau);

    // displacement within the boxes
    const Eigen::Vector2d d = a.next_footprint.pos - stance.pos;
    EXPECT_GE(d.x(), limits().l_min - 1e-9);
    EXPECT_LE(d.x(), limits().l_max + 1e-9);
    const double lat = (parity % 2 == 0 ? 1.0 : -1.0) * d.y();
    EXPECT_GE(lat, limits().w_min - 1e-9);
    EXPECT_LE(lat, limits().w_max + 1e-9);
    EXPECT_GE(a.tau, std::exp(p.omega0 * std::max(limits().t_min, t + kTimingMargin)) - 1e-9);
    EXPECT_LE(a.tau, std::exp(p.omega0 * limits().t_max) + 1e-7);
  }
}

TEST(StepAdapterOracle, SolutionIsFeasibleAndBeatsIndependentProbes) {
  // Optimality certificate independent of the solver internals: the returned
  // point must be feasible and, with the offset eliminated through the
  // landing equality, beat every probed feasible point. The objective is
  // strictly convex, so beating dense local probes at several scales plus
  // random global probes certifies the optimum.
  const ModelParams p = params();
  QpSolver solver;
  std::mt19937 rng(47);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 40; ++trial) {
    const int parity = trial % 2;
    const Footprint stance{{0, 0}, parity};
    const Eigen::Vector2d err{0.5 * unit(rng) - 0.25, 0.5 * unit(rng) - 0.25};
    const double t = 0.2 * unit(rng);
    const StepContext ctx = orbit_context(VelocityCommand{1, 0}, stance, t, err);
    const AdapterWeights w;
    const AdaptedStep step = adapt_step(ctx, w, solver);

    const NominalGait& g = ctx.nominal;
    const Eigen::Vector2d coef =
        (ctx.measured_dcm.xi - stance.pos) * std::exp(-p.omega0 * t);
    const Eigen::Vector2d target_u = stance.pos + nominal_displacement(g, parity, p);
    const Eigen::Vector2d target_b = nominal_dcm_offsets(g, parity + 1, p);
    auto objective = [&](const Eigen::Vector3d& z) {
      // z = (uTx, uTy, tau); b eliminated through the landing equality
      const double bx = stance.pos.x() + coef.x() * z(2) - z(0);
      const double by = stance.pos.y() + coef.y() * z(2) - z(1);
      return w.footprint_x * std::pow(z(0) - target_u.x(), 2) +
             w.footprint_y * std::pow(z(1) - target_u.y(), 2) +
             w.timing * std::pow(z(2) - g.tau_nom, 2) +
             w.offset_x * std::pow(bx - target_b.x(), 2) +
             w.offset_y * std::pow(by - target_b.y(), 2);
    };
    Eigen::Vector3d lo, hi;
    lo(0) = stance.pos.x() + limits().l_min;
    hi(0) = stance.pos.x() + limits().l_max;
    if (parity % 2 == 0) {
      lo(1) = stance.pos.y() + limits().w_min;
      hi(1) = stance.pos.y() + limits().w_max;
    } else {
      lo(1) = stance.pos.y() - limits().w_max;
      hi(1) = stance.pos.y() - limits().w_min;
    }
    lo(2) = std::exp(p.omega0 * std::max(limits().t_min, t + kTimingMargin));
    hi(2) = std::exp(p.omega0 * limits().t_max);

    Eigen::Vector3d zs;
    zs << step.next_footprint.pos.x(), step.next_footprint.pos.y(), step.tau;
    for (int d = 0; d < 3; ++d) {
      EXPECT_GE(zs(d), lo(d) - 1e-9);
      EXPECT_LE(zs(d), hi(d) + 1e-9);
    }
    // returned offset matches the equality-eliminated one
    EXPECT_NEAR(step.offset.b.x(), stance.pos.x() + coef.x() * zs(2) - zs(0), 1e-9);
    EXPECT_NEAR(step.offset.b.y(), stance.pos.y() + coef.y() * zs(2) - zs(1), 1e-9);

    const double f_star = objective(zs);
    EXPECT_NEAR(f_star, step.objective_value, 1e-6 * (1.0 + f_star));

    auto clamp_box = [&](Eigen::Vector3d z) {
      for (int d = 0; d < 3; ++d) z(d) = std::clamp(z(d), lo(d), hi(d));
      return z;
    };
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int probe = 0; probe < 600; ++probe) {
      Eigen::Vector3d z;
      if (probe % 3 == 0) {  // global random probe
        for (int d = 0; d < 3; ++d) z(d) = lo(d) + unit(rng) * (hi(d) - lo(d));
      } else {  // local probe around the solver point
        const double scale = probe % 3 == 1 ? 1e-4 : 1e-2;
        Eigen::Vector3d dir{gauss(rng), gauss(rng), gauss(rng)};
        dir(2) *= hi(2) - lo(2);  // tau spans a much wider range
        z = clamp_box(zs + scale * dir);
      }
      EXPECT_GE(objective(z), f_star - 1e-9 * (1.0 + f_star))
          << "trial " << trial << " probe " << probe;
    }
  }
}
