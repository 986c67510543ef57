#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dcmstep/errors.hpp"

namespace dcmstep {

/// Strictly convex diagonal-objective QP:
///
///   minimize    sum_i w_i (z_i - target_i)^2
///   subject to  eq_rows * z  = eq_rhs
///               ineq_rows * z <= ineq_rhs
///
/// All weights must be positive and equality rows linearly independent.
struct QpProblem {
  int n = 0;
  Eigen::VectorXd target;
  Eigen::VectorXd weight;
  Eigen::MatrixXd eq_rows;
  Eigen::VectorXd eq_rhs;
  Eigen::MatrixXd ineq_rows;
  Eigen::VectorXd ineq_rhs;

  QpProblem() = default;
  explicit QpProblem(int dim)
      : n(dim),
        target(Eigen::VectorXd::Zero(dim)),
        weight(Eigen::VectorXd::Ones(dim)),
        eq_rows(0, dim),
        eq_rhs(0),
        ineq_rows(0, dim),
        ineq_rhs(0) {}

  void add_equality(const Eigen::RowVectorXd& row, double rhs) {
    eq_rows.conservativeResize(eq_rows.rows() + 1, n);
    eq_rows.row(eq_rows.rows() - 1) = row;
    eq_rhs.conservativeResize(eq_rhs.size() + 1);
    eq_rhs(eq_rhs.size() - 1) = rhs;
  }

  void add_inequality(const Eigen::RowVectorXd& row, double rhs) {
    ineq_rows.conservativeResize(ineq_rows.rows() + 1, n);
    ineq_rows.row(ineq_rows.rows() - 1) = row;
    ineq_rhs.conservativeResize(ineq_rhs.size() + 1);
    ineq_rhs(ineq_rhs.size() - 1) = rhs;
  }

  /// z_var <= ub
  void add_upper_bound(int var, double ub) {
    Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(n);
    row(var) = 1.0;
    add_inequality(row, ub);
  }

  /// z_var >= lb
  void add_lower_bound(int var, double lb) {
    Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(n);
    row(var) = -1.0;
    add_inequality(row, -lb);
  }
};

enum class QpStatus { optimal, infeasible };

struct QpSolution {
  QpStatus status = QpStatus::optimal;
  Eigen::VectorXd z;
  std::vector<int> active_set;       // tight inequality row indices, ascending
  Eigen::VectorXd eq_multipliers;    // per equality row
  Eigen::VectorXd ineq_multipliers;  // per inequality row, zero for inactive
  double kkt_residual = 0.0;         // scaled stationarity residual
  double objective = 0.0;
};

/// Dual active-set solver for QpProblem. Starts from the unconstrained
/// minimum (the target vector), enforces the equalities with one KKT solve,
/// then adds violated inequalities one at a time, each step re-solving the
/// KKT system of the current working set. Constraint selection is most
/// violated first with ascending-index tie-breaks, so identical inputs give
/// bit-identical outputs. Primal infeasibility is certified when a violated
/// constraint admits neither a primal step nor a multiplier exchange.
///
/// Instances hold reusable workspace and are not safe for concurrent use;
/// run one instance per thread.
class QpSolver {
 public:
  static constexpr double kFeasTol = 1e-9;          // on unit-norm rows
  static constexpr double kStationarityTol = 1e-8;  // scaled

  QpSolution solve(const QpProblem& p) { return solve(p, {}); }

  /// warm_start lists inequality indices to try first (in order) when
  /// violated, before falling back to the most-violated rule.
  QpSolution solve(const QpProblem& p, std::span<const int> warm_start) {
    validate(p);
    const int n = p.n;
    const int me = static_cast<int>(p.eq_rows.rows());
    const int mi = static_cast<int>(p.ineq_rows.rows());

    if (me > 0) {
      Eigen::FullPivLU<Eigen::MatrixXd> lu(p.eq_rows);
      if (lu.rank() < me) {
        throw DegenerateProblem("equality rows are rank deficient");
      }
    }

    // Unit-norm copies of the inequality rows so violations and tolerances
    // are comparable across rows. Zero rows are inert or trivially infeasible.
    Ain_ = p.ineq_rows;
    bin_ = p.ineq_rhs;
    row_scale_.assign(mi, 1.0);
    std::vector<char> inert(mi, 0);
    for (int i = 0; i < mi; ++i) {
      const double nrm = Ain_.row(i).norm();
      if (nrm < 1e-14) {
        if (bin_(i) < -kFeasTol) return make_infeasible(p);
        inert[i] = 1;
      } else {
        Ain_.row(i) /= nrm;
        bin_(i) /= nrm;
        row_scale_[i] = nrm;
      }
    }

    const Eigen::VectorXd h = 2.0 * p.weight;  // diagonal Hessian
    Eigen::VectorXd x = p.target;
    Eigen::VectorXd lam_eq = Eigen::VectorXd::Zero(me);
    std::vector<int> act;
    std::vector<double> lam_act;

    // Solves the KKT system of the current working set. With solve_point,
    // returns the equality-constrained minimizer and its multipliers;
    // otherwise the step direction pair (p, q) for the candidate row.
    auto kkt = [&](const Eigen::VectorXd& rhs_top, const Eigen::VectorXd& rhs_bot,
                   Eigen::VectorXd& top, Eigen::VectorXd& bot) {
      const int ma = static_cast<int>(act.size());
      const int dim = n + me + ma;
      K_.setZero(dim, dim);
      K_.diagonal().head(n) = h;
      for (int r = 0; r < me; ++r) {
        K_.block(n + r, 0, 1, n) = p.eq_rows.row(r);
        K_.block(0, n + r, n, 1) = p.eq_rows.row(r).transpose();
      }
      for (int a = 0; a < ma; ++a) {
        K_.block(n + me + a, 0, 1, n) = Ain_.row(act[a]);
        K_.block(0, n + me + a, n, 1) = Ain_.row(act[a]).transpose();
      }
      rhs_.resize(dim);
      rhs_.head(n) = rhs_top;
      rhs_.tail(me + ma) = rhs_bot;
      sol_ = K_.partialPivLu().solve(rhs_);
      top = sol_.head(n);
      bot = sol_.tail(me + ma);
    };

    auto solve_point = [&]() {
      Eigen::VectorXd rhs_bot(me + act.size());
      rhs_bot.head(me) = p.eq_rhs;
      for (size_t a = 0; a < act.size(); ++a) rhs_bot(me + a) = bin_(act[a]);
      Eigen::VectorXd lams;
      kkt(h.cwiseProduct(p.target), rhs_bot, x, lams);
      lam_eq = lams.head(me);
      for (size_t a = 0; a < act.size(); ++a) lam_act[a] = lams(me + a);
    };

    if (me > 0) solve_point();

    auto violation = [&](int i) -> double {
      if (inert[i]) return -1.0;
      return Ain_.row(i).dot(x) - bin_(i);
    };
    auto is_active = [&](int i) {
      return std::find(act.begin(), act.end(), i) != act.end();
    };

    const int iter_cap = 100 + 20 * (mi + n);
    int iters = 0;
    std::vector<int> seeds(warm_start.begin(), warm_start.end());
    size_t seed_pos = 0;
    constexpr double inf = std::numeric_limits<double>::infinity();

    bool clean = false;
    for (int round = 0; round < 4 && !clean; ++round) {
      while (true) {
        if (++iters > iter_cap) {
          throw SolverFailure("active-set iteration budget exhausted");
        }
        int k = -1;
        while (seed_pos < seeds.size()) {
          const int s = seeds[seed_pos];
          if (s >= 0 && s < mi && !is_active(s) && violation(s) > kFeasTol) {
            k = s;
            break;
          }
          ++seed_pos;
        }
        if (k < 0) {
          double best = kFeasTol;
          for (int i = 0; i < mi; ++i) {
            if (is_active(i)) continue;
            const double v = violation(i);
            if (v > best) {
              best = v;
              k = i;
            }
          }
        }
        if (k < 0) break;  // all constraints satisfied

        const Eigen::VectorXd nk = Ain_.row(k).transpose();
        double mu = 0.0;
        while (true) {
          if (++iters > iter_cap) {
            throw SolverFailure("active-set iteration budget exhausted");
          }
          Eigen::VectorXd pdir, q;
          kkt(nk, Eigen::VectorXd::Zero(me + act.size()), pdir, q);
          const double nk_p = nk.dot(pdir);
          const bool has_primal = nk_p > 1e-12;

          double t1 = inf;
          int drop = -1;
          for (size_t a = 0; a < act.size(); ++a) {
            const double qa = q(me + a);
            if (qa > 1e-12) {
              const double ratio = lam_act[a] / qa;
              if (ratio < t1) {
                t1 = ratio;
                drop = static_cast<int>(a);
              }
            }
          }
          const double t2 = has_primal ? violation(k) / nk_p : inf;
          const double t = std::min(t1, t2);
          if (!(t < inf)) return make_infeasible(p);  // dual unbounded

          if (has_primal) x -= t * pdir;
          lam_eq -= t * q.head(me);
          for (size_t a = 0; a < act.size(); ++a) lam_act[a] -= t * q(me + a);
          mu += t;

          if (t2 <= t1) {
            act.push_back(k);
            lam_act.push_back(mu);
            break;
          }
          act.erase(act.begin() + drop);
          lam_act.erase(lam_act.begin() + drop);
        }
      }
      // Exact re-solve on the final working set removes the drift the
      // incremental updates accumulate. Re-enter the loop if it uncovered
      // a violation (rare).
      if (me > 0 || !act.empty()) solve_point();
      double worst = 0.0;
      for (int i = 0; i < mi; ++i) {
        if (!is_active(i)) worst = std::max(worst, violation(i));
      }
      clean = worst <= kFeasTol;
    }
    if (!clean) throw SolverFailure("polish could not restore feasibility");

    return make_solution(p, x, lam_eq, act, lam_act);
  }

 private:
  static void validate(const QpProblem& p) {
    if (p.n <= 0) throw std::invalid_argument("QpProblem: dimension must be positive");
    if (p.target.size() != p.n || p.weight.size() != p.n) {
      throw std::invalid_argument("QpProblem: target/weight size mismatch");
    }
    if (!(p.weight.array() > 0.0).all() || !p.weight.allFinite()) {
      throw std::invalid_argument("QpProblem: weights must be positive and finite");
    }
    if (!p.target.allFinite()) throw std::invalid_argument("QpProblem: target not finite");
    if (p.eq_rows.rows() != p.eq_rhs.size() || (p.eq_rows.rows() > 0 && p.eq_rows.cols() != p.n)) {
      throw std::invalid_argument("QpProblem: equality shape mismatch");
    }
    if (p.ineq_rows.rows() != p.ineq_rhs.size() ||
        (p.ineq_rows.rows() > 0 && p.ineq_rows.cols() != p.n)) {
      throw std::invalid_argument("QpProblem: inequality shape mismatch");
    }
    if (!p.eq_rows.allFinite() || !p.eq_rhs.allFinite() || !p.ineq_rows.allFinite() ||
        !p.ineq_rhs.allFinite()) {
      throw std::invalid_argument("QpProblem: constraints not finite");
    }
  }

  QpSolution make_infeasible(const QpProblem& p) {
    QpSolution s;
    s.status = QpStatus::infeasible;
    s.z = p.target;
    s.eq_multipliers = Eigen::VectorXd::Zero(p.eq_rows.rows());
    s.ineq_multipliers = Eigen::VectorXd::Zero(p.ineq_rows.rows());
    s.kkt_residual = std::numeric_limits<double>::quiet_NaN();
    s.objective = std::numeric_limits<double>::quiet_NaN();
    return s;
  }

  QpSolution make_solution(const QpProblem& p, const Eigen::VectorXd& x,
                           const Eigen::VectorXd& lam_eq, const std::vector<int>& act,
                           const std::vector<double>& lam_act) {
    QpSolution s;
    s.status = QpStatus::optimal;
    s.z = x;
    s.active_set = act;
    std::sort(s.active_set.begin(), s.active_set.end());
    s.eq_multipliers = lam_eq;
    s.ineq_multipliers = Eigen::VectorXd::Zero(p.ineq_rows.rows());
    for (size_t a = 0; a < act.size(); ++a) {
      // Multiplier reported against the caller's (unnormalized) row.
      s.ineq_multipliers(act[a]) = lam_act[a] / row_scale_[act[a]];
    }
    const Eigen::VectorXd grad = 2.0 * p.weight.cwiseProduct(x - p.target);
    Eigen::VectorXd r = grad;
    if (p.eq_rows.rows() > 0) r += p.eq_rows.transpose() * s.eq_multipliers;
    if (p.ineq_rows.rows() > 0) r += p.ineq_rows.transpose() * s.ineq_multipliers;
    const double scale = std::max(1.0, grad.lpNorm<Eigen::Infinity>());
    s.kkt_residual = r.lpNorm<Eigen::Infinity>() / scale;
    s.objective = p.weight.cwiseProduct((x - p.target).cwiseAbs2()).sum();
    return s;
  }

  // workspace
  Eigen::MatrixXd Ain_;
  Eigen::VectorXd bin_;
  std::vector<double> row_scale_;
  Eigen::MatrixXd K_;
  Eigen::VectorXd rhs_, sol_;
};

}  // namespace dcmstep
