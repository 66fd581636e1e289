#include "amorgs/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

namespace amorgs {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

Eigen::VectorXd project(const Eigen::VectorXd& x, const Bounds& bounds) {
    Eigen::VectorXd out = x;
    for (int i = 0; i < out.size(); ++i) {
        out[i] = std::clamp(out[i], bounds.lo[i], bounds.hi[i]);
    }
    return out;
}

/// Gradient with components pointing out of the box zeroed at active bounds.
Eigen::VectorXd projected_gradient(const Eigen::VectorXd& x, const Eigen::VectorXd& g,
                                   const Bounds& bounds, double active_tol = 1e-12) {
    Eigen::VectorXd pg = g;
    for (int i = 0; i < x.size(); ++i) {
        if (x[i] <= bounds.lo[i] + active_tol && g[i] > 0.0) pg[i] = 0.0;
        if (x[i] >= bounds.hi[i] - active_tol && g[i] < 0.0) pg[i] = 0.0;
    }
    return pg;
}

void check_finite(double v, const char* what) {
    if (!std::isfinite(v)) throw EvaluationError(std::string(what) + " is not finite");
}

void check_finite(const Eigen::VectorXd& v, const char* what) {
    if (!v.allFinite()) throw EvaluationError(std::string(what) + " is not finite");
}

struct BfgsResult {
    Eigen::VectorXd x;
    Eigen::VectorXd grad;
    double objective = 0.0;
    int iterations = 0;
    bool converged = false;
    bool line_search_failed = false;
};

/// Core projected BFGS loop shared by both entry points.
BfgsResult bfgs_loop(const ObjectiveFn& f, const GradientFn& grad, const Eigen::VectorXd& x0,
                     const Bounds& bounds, double tol, int max_iters, Clock::time_point t0,
                     double max_time_s, SolverTrace* trace) {
    constexpr double kArmijoC1 = 1e-4;
    constexpr int kMaxBacktracks = 40;

    BfgsResult res;
    res.x = project(x0, bounds);
    res.objective = f(res.x);
    check_finite(res.objective, "objective");
    res.grad = grad(res.x);
    check_finite(res.grad, "gradient");

    const int n = static_cast<int>(res.x.size());
    Eigen::MatrixXd hinv = Eigen::MatrixXd::Identity(n, n);

    for (int iter = 0; iter < max_iters; ++iter) {
        Eigen::VectorXd pg = projected_gradient(res.x, res.grad, bounds);
        if (pg.lpNorm<Eigen::Infinity>() <= tol) {
            res.converged = true;
            res.iterations = iter;
            return res;
        }
        if (seconds_since(t0) > max_time_s) {
            res.iterations = iter;
            return res;
        }

        Eigen::VectorXd dir = -(hinv * res.grad);
        if (dir.dot(res.grad) >= 0.0) dir = -pg;  // reset on non-descent direction

        double step = 1.0;
        double f_new = res.objective;
        Eigen::VectorXd x_new = res.x;
        bool accepted = false;
        for (int bt = 0; bt < kMaxBacktracks; ++bt) {
            x_new = project(res.x + step * dir, bounds);
            Eigen::VectorXd actual = x_new - res.x;
            if (actual.lpNorm<Eigen::Infinity>() == 0.0) {
                step *= 0.5;
                continue;
            }
            try {
                f_new = f(x_new);
                check_finite(f_new, "objective");
            } catch (const EvaluationError&) {
                step *= 0.5;  // unevaluable trial point: shrink like an Armijo reject
                continue;
            }
            if (f_new <= res.objective + kArmijoC1 * res.grad.dot(actual)) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            res.line_search_failed = true;
            res.iterations = iter + 1;
            return res;
        }

        Eigen::VectorXd g_new;
        try {
            g_new = grad(x_new);
            check_finite(g_new, "gradient");
        } catch (const EvaluationError&) {
            res.line_search_failed = true;  // differentiation probe left the domain
            res.iterations = iter + 1;
            return res;
        }
        Eigen::VectorXd s = x_new - res.x;
        Eigen::VectorXd y = g_new - res.grad;
        const double sy = s.dot(y);
        if (sy > 1e-12 * s.norm() * y.norm()) {
            const double rho = 1.0 / sy;
            Eigen::MatrixXd left = Eigen::MatrixXd::Identity(n, n) - rho * s * y.transpose();
            hinv = left * hinv * left.transpose() + rho * s * s.transpose();
        }
        res.x = x_new;
        res.objective = f_new;
        res.grad = g_new;
        if (trace) {
            trace->steps.push_back(
                {res.objective, res.grad.lpNorm<Eigen::Infinity>(), 0.0, step});
        }
    }
    res.iterations = max_iters;
    return res;
}

DecisionVector to_std(const Eigen::VectorXd& v) {
    return DecisionVector(v.data(), v.data() + v.size());
}

}  // namespace

void SolverConfig::validate() const {
    if (!(optimality_tol > 0.0) || !(feasibility_tol > 0.0))
        throw std::invalid_argument("solver: tolerances must be positive");
    if (max_major_iterations <= 0 || !(max_wall_time_s > 0.0))
        throw std::invalid_argument("solver: limits must be positive");
}

Eigen::MatrixXd fd_jacobian(const ConstraintFn& c, const Eigen::VectorXd& x) {
    Eigen::VectorXd c0 = c(x);
    Eigen::MatrixXd jac(c0.size(), x.size());
    Eigen::VectorXd xp = x;
    for (int i = 0; i < x.size(); ++i) {
        const double h = 1e-7 * (1.0 + std::abs(x[i]));
        xp[i] = x[i] + h;
        jac.col(i) = (c(xp) - c0) / h;
        xp[i] = x[i];
    }
    return jac;
}

SolveRecord minimize_unconstrained(const ObjectiveFn& f, const GradientFn& grad,
                                   const Eigen::VectorXd& x0, const Bounds& bounds,
                                   const SolverConfig& cfg, SolverTrace* trace) {
    cfg.validate();
    const auto t0 = Clock::now();
    SolveRecord rec;
    rec.x0 = to_std(x0);
    rec.lambda_star.clear();

    BfgsResult res = bfgs_loop(f, grad, x0, bounds, cfg.optimality_tol, cfg.max_major_iterations,
                               t0, cfg.max_wall_time_s, trace);
    rec.x_star = to_std(res.x);
    rec.objective = res.objective;
    rec.converged = res.converged;
    rec.iterations = res.iterations;
    rec.wall_time_s = seconds_since(t0);
    rec.constraint_norm = 0.0;
    if (trace) {
        trace->termination_reason = res.converged          ? "optimality"
                                    : res.line_search_failed ? "line-search failure"
                                                             : "iteration or time limit";
    }
    return rec;
}

SolveRecord minimize_constrained(const ObjectiveFn& f, const GradientFn& grad,
                                 const ConstraintFn& c, const JacobianFn& jac,
                                 const Eigen::VectorXd& x0, const Bounds& bounds,
                                 const SolverConfig& cfg, SolverTrace* trace) {
    cfg.validate();
    const auto t0 = Clock::now();

    SolveRecord rec;
    rec.x0 = to_std(x0);

    Eigen::VectorXd x = project(x0, bounds);
    Eigen::VectorXd cx;
    try {
        cx = c(x);
        check_finite(cx, "constraints");
    } catch (const EvaluationError&) {
        // unevaluable start: record as unconverged
        rec.x_star = to_std(x);
        rec.objective = std::numeric_limits<double>::quiet_NaN();
        rec.constraint_norm = std::numeric_limits<double>::quiet_NaN();
        rec.wall_time_s = seconds_since(t0);
        if (trace) trace->termination_reason = "constraint evaluation failed at x0";
        return rec;
    }

    const int m = static_cast<int>(cx.size());
    const int n = static_cast<int>(x.size());
    Eigen::VectorXd lambda = Eigen::VectorXd::Zero(m);
    rec.lambda_star.assign(m, 0.0);

    double rho = cfg.initial_penalty;
    std::string reason = "iteration limit";
    double objective = f(x);

    auto jacobian_at = [&](const Eigen::VectorXd& xe) {
        return jac ? jac(xe) : fd_jacobian(c, xe);
    };

    // Least-squares multipliers on the coordinates not pinned at a bound:
    // minimize ||(grad f + J^T lambda)_inactive||.
    auto ls_multipliers = [&](const Eigen::VectorXd& xe, const Eigen::VectorXd& ge,
                              const Eigen::MatrixXd& je) {
        std::vector<int> inactive;
        inactive.reserve(n);
        for (int i = 0; i < n; ++i)
            if (xe[i] > bounds.lo[i] + 1e-10 && xe[i] < bounds.hi[i] - 1e-10)
                inactive.push_back(i);
        Eigen::MatrixXd a(inactive.size(), m);
        Eigen::VectorXd b(inactive.size());
        for (std::size_t r = 0; r < inactive.size(); ++r) {
            a.row(r) = je.col(inactive[r]).transpose();
            b[r] = -ge[inactive[r]];
        }
        if (inactive.empty()) return Eigen::VectorXd::Zero(m).eval();
        return a.colPivHouseholderQr().solve(b).eval();
    };

    double lm_nu = 1e-3;
    int majors = 0;

    // One scale-aware Levenberg-Marquardt step on 0.5 ||c||^2 projected onto
    // the box. Returns false when no damping value yields a decrease of ||c||.
    auto lm_step = [&]() {
        Eigen::MatrixXd jx = jacobian_at(x);
        const Eigen::MatrixXd jtj = jx.transpose() * jx;
        const Eigen::VectorXd scale = jtj.diagonal().cwiseMax(1e-12);
        for (int attempt = 0; attempt < 30 && lm_nu <= 1e12; ++attempt) {
            Eigen::MatrixXd aug = jtj;
            aug.diagonal() += lm_nu * scale;
            const Eigen::VectorXd d = aug.ldlt().solve(-(jx.transpose() * cx));
            const Eigen::VectorXd xn = project(x + d, bounds);
            Eigen::VectorXd cn;
            try {
                cn = c(xn);
                check_finite(cn, "constraints");
            } catch (const EvaluationError&) {
                lm_nu *= 3.0;
                continue;
            }
            if (cn.norm() < cx.norm()) {
                x = xn;
                cx = cn;
                lm_nu = std::max(lm_nu * 0.5, 1e-12);
                return true;
            }
            lm_nu *= 3.0;
        }
        return false;
    };

    bool lm_stalled = false;
    for (; majors < cfg.max_major_iterations;) {
        if (seconds_since(t0) > cfg.max_wall_time_s) {
            reason = "wall-time limit";
            break;
        }
        const double cnorm = cx.lpNorm<Eigen::Infinity>();

        if (cnorm > cfg.feasibility_tol) {
            bool stepped;
            try {
                stepped = lm_step();
            } catch (const EvaluationError&) {
                reason = "jacobian evaluation failure";
                break;
            }
            ++majors;
            if (trace)
                trace->steps.push_back({f(x), 0.0, cx.lpNorm<Eigen::Infinity>(), stepped ? 1.0 : 0.0});
            if (!stepped) {
                if (lm_stalled) {
                    reason = "restoration stalled";
                    break;
                }
                lm_stalled = true;
                lm_nu = 1e-3;  // one reset before giving up
            } else {
                lm_stalled = false;
            }
            continue;
        }

        // Feasible: check first-order optimality with least-squares multipliers.
        Eigen::VectorXd gx;
        Eigen::MatrixXd jx;
        try {
            gx = grad(x);
            jx = jacobian_at(x);
        } catch (const EvaluationError&) {
            reason = "gradient evaluation failure";
            break;
        }
        lambda = ls_multipliers(x, gx, jx);
        lambda = lambda.cwiseMax(-cfg.lambda_max).cwiseMin(cfg.lambda_max);
        objective = f(x);
        const double stat =
            projected_gradient(x, gx + jx.transpose() * lambda, bounds).lpNorm<Eigen::Infinity>();
        if (trace) trace->steps.push_back({objective, stat, cnorm, 1.0});
        if (stat <= cfg.optimality_tol) {
            rec.converged = true;
            reason = "optimality";
            break;
        }

        // Objective-improvement step: augmented-Lagrangian inner solve seeded
        // with the least-squares multipliers.
        auto al_value = [&](const Eigen::VectorXd& xe) {
            Eigen::VectorXd ce = c(xe);
            check_finite(ce, "constraints");
            return f(xe) + lambda.dot(ce) + 0.5 * rho * ce.squaredNorm();
        };
        auto al_grad = [&](const Eigen::VectorXd& xe) {
            Eigen::VectorXd ce = c(xe);
            check_finite(ce, "constraints");
            Eigen::MatrixXd je = jacobian_at(xe);
            Eigen::VectorXd ge = grad(xe) + je.transpose() * (lambda + rho * ce);
            check_finite(ge, "gradient");
            return ge;
        };
        const double inner_tol = std::max(0.1 * stat, 0.5 * cfg.optimality_tol);
        BfgsResult inner;
        try {
            inner = bfgs_loop(al_value, al_grad, x, bounds, inner_tol, cfg.max_inner_iterations,
                              t0, cfg.max_wall_time_s, nullptr);
        } catch (const EvaluationError&) {
            reason = "repeated evaluation failure";
            break;
        }
        ++majors;

        // Restore feasibility after the AL move, then accept only if the
        // restored point actually lowers the objective; otherwise revert and
        // escalate the penalty so the next AL step hugs the manifold tighter.
        const Eigen::VectorXd x_feas = x;
        const Eigen::VectorXd c_feas = cx;
        x = inner.x;
        bool restored = true;
        try {
            cx = c(x);
            check_finite(cx, "constraints");
            // aim well below the tolerance so restoration noise does not mask
            // small objective improvements near convergence
            for (int r = 0; r < 100 && cx.lpNorm<Eigen::Infinity>() > 0.01 * cfg.feasibility_tol;
                 ++r)
                if (!lm_step()) break;
        } catch (const EvaluationError&) {
            restored = false;
        }
        restored = restored && cx.lpNorm<Eigen::Infinity>() <= cfg.feasibility_tol;
        const bool improved = restored && f(x) < objective - 1e-14 * (1.0 + std::abs(objective));
        if (!improved) {
            x = x_feas;
            cx = c_feas;
            if (rho >= 1e10) {
                reason = "no feasible descent";
                break;
            }
            rho = std::min(rho * 10.0, 1e10);
        }
        objective = f(x);
    }

    rec.x_star = to_std(x);
    rec.objective = objective;
    rec.iterations = majors;
    rec.wall_time_s = seconds_since(t0);
    rec.constraint_norm = cx.lpNorm<Eigen::Infinity>();
    rec.lambda_star = to_std(lambda);
    if (trace) trace->termination_reason = reason;
    return rec;
}

double kkt_residual(const Eigen::VectorXd& x, const Eigen::VectorXd& lambda,
                    const Eigen::VectorXd& grad_f, const Eigen::MatrixXd& jacobian,
                    const Bounds& bounds, double active_tol) {
    if (grad_f.size() != x.size() || jacobian.cols() != x.size() ||
        jacobian.rows() != lambda.size()) {
        throw std::invalid_argument("kkt_residual: shape mismatch");
    }
    Eigen::VectorXd stat = grad_f + jacobian.transpose() * lambda;
    double worst = 0.0;
    for (int i = 0; i < x.size(); ++i) {
        const bool at_lo = x[i] <= bounds.lo[i] + active_tol;
        const bool at_hi = x[i] >= bounds.hi[i] - active_tol;
        if (at_lo || at_hi) continue;
        worst = std::max(worst, std::abs(stat[i]));
    }
    return worst;
}

}  // namespace amorgs
