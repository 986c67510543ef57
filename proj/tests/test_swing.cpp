#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "dcmstep/qp.hpp"
#include "dcmstep/swing.hpp"

using namespace dcmstep;

namespace {

Polynomial quadratic_t_squared() {
  // p(t) = t^2 on [0, 3]
  Polynomial p;
  p.coeffs.resize(3);
  p.coeffs << 0.0, 0.0, 1.0;
  p.t_begin = 0.0;
  p.t_end = 3.0;
  return p;
}

}  // namespace

TEST(PolynomialTest, EvalExamples) {
  Polynomial c;
  c.coeffs.resize(1);
  c.coeffs << 0.7;
  c.t_end = 1.0;
  const auto s = c.eval(0.4);
  EXPECT_EQ(s.pos, 0.7);
  EXPECT_EQ(s.vel, 0.0);
  EXPECT_EQ(s.acc, 0.0);

  const auto q = quadratic_t_squared().eval(2.0);
  EXPECT_DOUBLE_EQ(q.pos, 4.0);
  EXPECT_DOUBLE_EQ(q.vel, 4.0);
  EXPECT_DOUBLE_EQ(q.acc, 2.0);
}

TEST(PolynomialTest, EvalOutsideDomainThrows) {
  const Polynomial p = quadratic_t_squared();
  EXPECT_THROW(p.eval(-0.1), OutOfDomain);
  EXPECT_THROW(p.eval(3.1), OutOfDomain);
  EXPECT_NO_THROW(p.eval(3.0));
}

TEST(HorizontalTest, ConstantWhenAlreadyAtTarget) {
  const Polynomial p = horizontal_coeffs(SwingBoundary{0.0, 0.25, 0.0, 0.0, 0.4, 0.25});
  for (double t : {0.0, 0.13, 0.4}) {
    const auto s = p.eval(t);
    EXPECT_NEAR(s.pos, 0.25, 1e-12);
    EXPECT_NEAR(s.vel, 0.0, 1e-12);
    EXPECT_NEAR(s.acc, 0.0, 1e-12);
  }
}

TEST(HorizontalTest, RestToRestMidpoint) {
  const Polynomial p = horizontal_coeffs(SwingBoundary{0.0, 0.0, 0.0, 0.0, 1.0, 1.0});
  EXPECT_NEAR(p.eval(0.5).pos, 0.5, 1e-12);
}

TEST(HorizontalTest, BoundaryConditionsExact) {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const double t_prev = 0.3 * unit(rng);
    const double t_land = t_prev + 0.02 + 0.5 * unit(rng);
    const SwingBoundary b{t_prev,
                          unit(rng) - 0.5,
                          4.0 * unit(rng) - 2.0,
                          20.0 * unit(rng) - 10.0,
                          t_land,
                          unit(rng) - 0.5};
    const Polynomial p = horizontal_coeffs(b);
    const auto at_prev = p.eval(t_prev);
    EXPECT_NEAR(at_prev.pos, b.pos_prev, 1e-9);
    EXPECT_NEAR(at_prev.vel, b.vel_prev, 1e-9);
    EXPECT_NEAR(at_prev.acc, b.acc_prev, 1e-9);
    const auto at_land = p.eval(t_land);
    EXPECT_NEAR(at_land.pos, b.target, 1e-9);
    EXPECT_NEAR(at_land.vel, 0.0, 1e-9);
    EXPECT_NEAR(at_land.acc, 0.0, 1e-9);
  }
}

TEST(HorizontalTest, TinyHorizonRejected) {
  EXPECT_THROW(horizontal_coeffs(SwingBoundary{0.1, 0, 0, 0, 0.1 + 5e-5, 0.2}), IllConditioned);
  EXPECT_THROW(horizontal_coeffs(SwingBoundary{0.2, 0, 0, 0, 0.1, 0.2}), std::invalid_argument);
}

TEST(PolynomialTest, DerivativesMatchFiniteDifferences) {
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double h = 1e-6;
  for (int trial = 0; trial < 50; ++trial) {
    const SwingBoundary b{0.0,          unit(rng) - 0.5, 2.0 * unit(rng) - 1.0,
                          8.0 * unit(rng) - 4.0, 0.4 + 0.3 * unit(rng), unit(rng) - 0.5};
    const Polynomial p = horizontal_coeffs(b);
    const double t = 0.1 + 0.2 * unit(rng);
    const auto mid = p.eval(t);
    const double vel_fd = (p.eval(t + h).pos - p.eval(t - h).pos) / (2.0 * h);
    const double acc_fd = (p.eval(t + h).vel - p.eval(t - h).vel) / (2.0 * h);
    if (std::abs(mid.vel) > 1e-3) {
      EXPECT_LE(std::abs(vel_fd - mid.vel) / std::abs(mid.vel), 1e-6);
    }
    if (std::abs(mid.acc) > 1e-2) {
      EXPECT_LE(std::abs(acc_fd - mid.acc) / std::abs(mid.acc), 1e-6);
    }
  }
}

TEST(VerticalTest, FirstCycleHitsApexAndEndpoints) {
  QpSolver solver;
  const SwingConfig cfg;
  const double T = 0.35;
  const Polynomial p =
      vertical_coeffs(SwingBoundary{0.0, 0.0, 0.0, 0.0, T, 0.0}, cfg, solver);
  EXPECT_NEAR(p.eval(0.0).pos, 0.0, 1e-9);
  EXPECT_NEAR(p.eval(T).pos, 0.0, 1e-9);
  EXPECT_NEAR(p.eval(0.0).vel, 0.0, 1e-9);
  EXPECT_NEAR(p.eval(T).vel, 0.0, 1e-9);
  EXPECT_NEAR(p.eval(0.0).acc, 0.0, 1e-8);
  EXPECT_NEAR(p.eval(T).acc, 0.0, 1e-8);
  EXPECT_NEAR(p.eval(0.5 * T).pos, cfg.apex_height, 1e-6);
  for (int j = 0; j < cfg.n_samples; ++j) {
    const double t = T * j / (cfg.n_samples - 1);
    const double z = p.eval(t).pos;
    EXPECT_GE(z, -1e-9);
    EXPECT_LE(z, cfg.max_height + 1e-9);
  }
}

TEST(VerticalTest, MidStepReplanKeepsBoundaryAndLandingPinned) {
  QpSolver solver;
  const SwingConfig cfg;
  const double T0 = 0.4;
  const Polynomial first = vertical_coeffs(SwingBoundary{0.0, 0.0, 0.0, 0.0, T0, 0.0}, cfg, solver);
  const double t_now = 0.18;
  const auto s = first.eval(t_now);
  const double T1 = 0.3;  // landing moved earlier
  const Polynomial second =
      vertical_coeffs(SwingBoundary{t_now, s.pos, s.vel, s.acc, T1, 0.0}, cfg, solver);
  const auto land = second.eval(T1);
  EXPECT_NEAR(land.pos, 0.0, 1e-9);
  EXPECT_NEAR(land.vel, 0.0, 1e-9);
  EXPECT_NEAR(land.acc, 0.0, 1e-7);
  const auto cont = second.eval(t_now);
  EXPECT_NEAR(cont.pos, s.pos, 1e-9);
  EXPECT_NEAR(cont.vel, s.vel, 1e-9);
  EXPECT_NEAR(cont.acc, s.acc, 1e-7);
}

TEST(VerticalTest, InconsistentStepStartRejected) {
  QpSolver solver;
  // t_prev = 0 but a nonzero boundary position contradicts Z(0) = 0
  EXPECT_THROW(
      vertical_coeffs(SwingBoundary{0.0, 0.05, 0.0, 0.0, 0.4, 0.0}, SwingConfig{}, solver),
      DegenerateProblem);
}

TEST(SwingReplanTest, ContinuityAcrossScriptedChanges) {
  // 100 scripted target/timing changes; the replanned trajectories must
  // reproduce position, velocity and acceleration at the replan instant.
  QpSolver solver;
  const SwingConfig cfg;
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  int events = 0;
  while (events < 100) {
    // fresh step
    double t_land = 0.3 + 0.3 * unit(rng);
    double target_x = 0.4 * unit(rng);
    Polynomial px = horizontal_coeffs(SwingBoundary{0.0, 0.0, 0.0, 0.0, t_land, target_x});
    Polynomial pz = vertical_coeffs(SwingBoundary{0.0, 0.0, 0.0, 0.0, t_land, 0.0}, cfg, solver);
    double t = 0.0;
    for (int k = 0; k < 5 && events < 100; ++k) {
      t += 0.05 + 0.1 * unit(rng);
      if (t_land - t < 0.06) break;
      const auto sx = px.eval(t);
      const auto sz = pz.eval(t);
      // shrink or stretch the landing time by up to 30%, move the target
      const double scale = 0.7 + 0.6 * unit(rng);
      t_land = std::max(t + 0.05, t + (t_land - t) * scale);
      target_x += 0.1 * (unit(rng) - 0.5);
      const Polynomial nx =
          horizontal_coeffs(SwingBoundary{t, sx.pos, sx.vel, sx.acc, t_land, target_x});
      const Polynomial nz =
          vertical_coeffs(SwingBoundary{t, sz.pos, sz.vel, sz.acc, t_land, 0.0}, cfg, solver);
      const auto cx = nx.eval(t);
      EXPECT_NEAR(cx.pos, sx.pos, 1e-9);
      EXPECT_NEAR(cx.vel, sx.vel, 1e-9);
      EXPECT_NEAR(cx.acc, sx.acc, 1e-9);
      const auto cz = nz.eval(t);
      EXPECT_NEAR(cz.pos, sz.pos, 1e-9);
      EXPECT_NEAR(cz.vel, sz.vel, 1e-9);
      EXPECT_NEAR(cz.acc, sz.acc, 1e-7);
      // landing exactness after the change
      EXPECT_NEAR(nx.eval(t_land).pos, target_x, 1e-9);
      EXPECT_NEAR(nx.eval(t_land).vel, 0.0, 1e-9);
      px = nx;
      pz = nz;
      ++events;
    }
  }
}

TEST(SwingReplanTest, TimingShrinkDoesNotGroundTheFoot) {
  // Shrinking T by 30% mid-step must not make the height dip below ground
  // before landing.
  QpSolver solver;
  const SwingConfig cfg;
  for (double t_replan : {0.1, 0.18, 0.25}) {
    const double T0 = 0.5;
    const Polynomial first =
        vertical_coeffs(SwingBoundary{0.0, 0.0, 0.0, 0.0, T0, 0.0}, cfg, solver);
    const auto s = first.eval(t_replan);
    const double T1 = std::max(t_replan + 0.05, 0.7 * T0);
    const Polynomial replanned =
        vertical_coeffs(SwingBoundary{t_replan, s.pos, s.vel, s.acc, T1, 0.0}, cfg, solver);
    // The remaining flight path [t_replan, T1] never grounds the foot; the
    // max-height band is enforced at the QP samples, so between samples only
    // a small ripple is allowed.
    for (int j = 0; j <= 500; ++j) {
      const double t = t_replan + (T1 - t_replan) * j / 500.0;
      EXPECT_GE(replanned.eval(t).pos, -1e-6) << "t_replan " << t_replan << " t " << t;
      EXPECT_LE(replanned.eval(t).pos, cfg.max_height + 1e-3);
    }
    for (int j = 0; j < cfg.n_samples; ++j) {
      const double t = t_replan + (T1 - t_replan) * j / (cfg.n_samples - 1);
      EXPECT_LE(replanned.eval(t).pos, cfg.max_height + 1e-9);
    }
  }
}
