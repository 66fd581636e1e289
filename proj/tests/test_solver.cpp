#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "amorgs/solver.hpp"

using namespace amorgs;

namespace {

Bounds box(int n, double lo, double hi) {
    Bounds b;
    b.lo.assign(n, lo);
    b.hi.assign(n, hi);
    return b;
}

}  // namespace

TEST_CASE("unconstrained quadratic converges to the center") {
    const ObjectiveFn f = [](const Eigen::VectorXd& x) { return x.squaredNorm(); };
    const GradientFn g = [](const Eigen::VectorXd& x) { return (2.0 * x).eval(); };
    SolverConfig cfg;
    cfg.optimality_tol = 1e-10;
    Eigen::VectorXd x0(3);
    x0 << 4.0, -3.0, 2.0;
    const SolveRecord rec = minimize_unconstrained(f, g, x0, box(3, -10, 10), cfg);
    CHECK(rec.converged);
    for (double v : rec.x_star) CHECK(std::abs(v) < 1e-9);
    CHECK(rec.lambda_star.empty());
}

TEST_CASE("bound-constrained minimum lands on the active bound") {
    const ObjectiveFn f = [](const Eigen::VectorXd& x) { return (x.array() - 5.0).matrix().squaredNorm(); };
    const GradientFn g = [](const Eigen::VectorXd& x) { return (2.0 * (x.array() - 5.0)).matrix().eval(); };
    SolverConfig cfg;
    cfg.optimality_tol = 1e-8;
    Eigen::VectorXd x0(2);
    x0 << 0.0, 0.0;
    const SolveRecord rec = minimize_unconstrained(f, g, x0, box(2, -1, 1), cfg);
    CHECK(rec.converged);
    CHECK(rec.x_star[0] == doctest::Approx(1.0));
    CHECK(rec.x_star[1] == doctest::Approx(1.0));
}

TEST_CASE("analytic KKT point of the toy equality problem") {
    const ObjectiveFn f = [](const Eigen::VectorXd& x) { return x[0] * x[0]; };
    const GradientFn g = [](const Eigen::VectorXd& x) {
        return Eigen::VectorXd::Constant(1, 2.0 * x[0]).eval();
    };
    const ConstraintFn c = [](const Eigen::VectorXd& x) {
        return Eigen::VectorXd::Constant(1, x[0] - 1.0).eval();
    };
    SolverConfig cfg;
    cfg.optimality_tol = 1e-10;
    cfg.feasibility_tol = 1e-10;
    Eigen::VectorXd x0(1);
    x0 << 3.0;
    const SolveRecord rec = minimize_constrained(f, g, c, nullptr, x0, box(1, -10, 10), cfg);
    CHECK(rec.converged);
    CHECK(std::abs(rec.x_star[0] - 1.0) < 1e-8);
    CHECK(std::abs(rec.lambda_star[0] + 2.0) < 1e-8);
}

TEST_CASE("random equality QPs recover the closed-form KKT solution") {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> nd;
    const int n = 6, m = 2;
    for (int t = 0; t < 5; ++t) {
        Eigen::MatrixXd q = Eigen::MatrixXd::NullaryExpr(
            n, n, [&](Eigen::Index, Eigen::Index) { return nd(rng); });
        q = (q * q.transpose()).eval();
        q.diagonal().array() += n;
        const Eigen::VectorXd lin =
            Eigen::VectorXd::NullaryExpr(n, [&](Eigen::Index) { return nd(rng); });
        const Eigen::MatrixXd a = Eigen::MatrixXd::NullaryExpr(
            m, n, [&](Eigen::Index, Eigen::Index) { return nd(rng); });
        const Eigen::VectorXd rhs =
            Eigen::VectorXd::NullaryExpr(m, [&](Eigen::Index) { return nd(rng); });

        Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(n + m, n + m);
        kkt.topLeftCorner(n, n) = q;
        kkt.topRightCorner(n, m) = a.transpose();
        kkt.bottomLeftCorner(m, n) = a;
        Eigen::VectorXd kkt_rhs(n + m);
        kkt_rhs.head(n) = -lin;
        kkt_rhs.tail(m) = rhs;
        const Eigen::VectorXd sol = kkt.fullPivLu().solve(kkt_rhs);

        const ObjectiveFn f = [&](const Eigen::VectorXd& x) {
            return 0.5 * x.dot(q * x) + lin.dot(x);
        };
        const GradientFn g = [&](const Eigen::VectorXd& x) { return (q * x + lin).eval(); };
        const ConstraintFn c = [&](const Eigen::VectorXd& x) { return (a * x - rhs).eval(); };
        SolverConfig cfg;
        cfg.optimality_tol = 1e-6;
        cfg.feasibility_tol = 1e-8;
        const Eigen::VectorXd x0 =
            Eigen::VectorXd::NullaryExpr(n, [&](Eigen::Index) { return nd(rng); });
        const SolveRecord rec = minimize_constrained(f, g, c, nullptr, x0, box(n, -100, 100), cfg);
        CHECK(rec.converged);
        for (int i = 0; i < n; ++i) CHECK(std::abs(rec.x_star[i] - sol[i]) < 1e-6);
        for (int i = 0; i < m; ++i) CHECK(std::abs(rec.lambda_star[i] - sol[n + i]) < 1e-6);
        // independent re-check of the converged record
        const Eigen::Map<const Eigen::VectorXd> xs(rec.x_star.data(), n);
        const Eigen::Map<const Eigen::VectorXd> ls(rec.lambda_star.data(), m);
        CHECK(c(xs).lpNorm<Eigen::Infinity>() <= cfg.feasibility_tol);
        CHECK(kkt_residual(xs, ls, g(xs), a, box(n, -100, 100)) <= 10.0 * cfg.optimality_tol);
    }
}

TEST_CASE("identical inputs give identical records") {
    const ObjectiveFn f = [](const Eigen::VectorXd& x) { return std::pow(x[0] - 2.0, 4) + x[1] * x[1]; };
    const GradientFn g = [](const Eigen::VectorXd& x) {
        Eigen::VectorXd out(2);
        out << 4.0 * std::pow(x[0] - 2.0, 3), 2.0 * x[1];
        return out;
    };
    SolverConfig cfg;
    Eigen::VectorXd x0(2);
    x0 << -1.0, 3.0;
    const SolveRecord a = minimize_unconstrained(f, g, x0, box(2, -5, 5), cfg);
    const SolveRecord b = minimize_unconstrained(f, g, x0, box(2, -5, 5), cfg);
    CHECK(a.x_star == b.x_star);
    CHECK(a.iterations == b.iterations);
    CHECK(a.objective == b.objective);
}

TEST_CASE("looser optimality never needs more majors") {
    std::mt19937_64 rng(13);
    std::normal_distribution<double> nd;
    const int n = 4;
    Eigen::MatrixXd q = Eigen::MatrixXd::NullaryExpr(
        n, n, [&](Eigen::Index, Eigen::Index) { return nd(rng); });
    q = (q * q.transpose()).eval();
    q.diagonal().array() += n;
    const Eigen::MatrixXd a = Eigen::MatrixXd::NullaryExpr(
        1, n, [&](Eigen::Index, Eigen::Index) { return nd(rng); });
    const ObjectiveFn f = [&](const Eigen::VectorXd& x) { return 0.5 * x.dot(q * x) + x[0]; };
    const GradientFn g = [&](const Eigen::VectorXd& x) {
        Eigen::VectorXd out = q * x;
        out[0] += 1.0;
        return out;
    };
    const ConstraintFn c = [&](const Eigen::VectorXd& x) {
        return (a * x - Eigen::VectorXd::Ones(1)).eval();
    };
    Eigen::VectorXd x0 = Eigen::VectorXd::Constant(n, 2.0);
    SolverConfig loose, tight;
    loose.optimality_tol = 1e-2;
    tight.optimality_tol = 1e-3;
    loose.feasibility_tol = tight.feasibility_tol = 1e-8;
    const SolveRecord rl = minimize_constrained(f, g, c, nullptr, x0, box(n, -50, 50), loose);
    const SolveRecord rt = minimize_constrained(f, g, c, nullptr, x0, box(n, -50, 50), tight);
    CHECK(rl.converged);
    CHECK(rt.converged);
    CHECK(rl.iterations <= rt.iterations);
}

TEST_CASE("unevaluable regions are treated as rejected steps") {
    // objective blows up left of x = 0; the solver must stay in the valid half
    const ObjectiveFn f = [](const Eigen::VectorXd& x) {
        if (x[0] < 0.0) throw EvaluationError("bad region");
        return (x[0] - 0.5) * (x[0] - 0.5);
    };
    const GradientFn g = [](const Eigen::VectorXd& x) {
        if (x[0] < 0.0) throw EvaluationError("bad region");
        return Eigen::VectorXd::Constant(1, 2.0 * (x[0] - 0.5)).eval();
    };
    SolverConfig cfg;
    cfg.optimality_tol = 1e-8;
    Eigen::VectorXd x0(1);
    x0 << 4.0;
    const SolveRecord rec = minimize_unconstrained(f, g, x0, box(1, -10, 10), cfg);
    CHECK(rec.converged);
    CHECK(rec.x_star[0] == doctest::Approx(0.5));
}

TEST_CASE("unconverged runs report data instead of throwing") {
    const ObjectiveFn f = [](const Eigen::VectorXd& x) { return x[0]; };
    const GradientFn g = [](const Eigen::VectorXd&) {
        return Eigen::VectorXd::Constant(1, 1.0).eval();
    };
    const ConstraintFn c = [](const Eigen::VectorXd& x) {
        // infeasible: x^2 + 1 = 0 has no real solution
        return Eigen::VectorXd::Constant(1, x[0] * x[0] + 1.0).eval();
    };
    SolverConfig cfg;
    cfg.max_major_iterations = 50;
    Eigen::VectorXd x0(1);
    x0 << 2.0;
    const SolveRecord rec = minimize_constrained(f, g, c, nullptr, x0, box(1, -5, 5), cfg);
    CHECK_FALSE(rec.converged);
    CHECK(rec.constraint_norm >= 1.0);
}
