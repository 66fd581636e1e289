#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "amorgs/dejong.hpp"
#include "amorgs/runtime.hpp"

using namespace amorgs;

TEST_CASE("family shape and bounds") {
    const DeJongFamily fam = default_dejong_family();
    CHECK(fam.minima_count() == 8);
    CHECK(fam.bounds.lo == std::vector<double>{-50.0, -50.0});
    CHECK(fam.bounds.hi == std::vector<double>{50.0, 50.0});

    const ProblemFamily pf = dejong_problem_family();
    CHECK(pf.dimension == 2);
    CHECK(pf.equality_constraint_count == 0);
    CHECK(pf.alpha_range[0] == 0.0);
    CHECK(pf.alpha_range[1] == doctest::Approx(M_PI / 2.0));
}

TEST_CASE("rotation maps template columns and preserves lengths") {
    DeJongFamily fam = default_dejong_family(0.0);
    const auto at0 = rotated_minima(fam);
    for (int i = 0; i < fam.minima_count(); ++i) {
        CHECK(at0[i][0] == doctest::Approx(fam.template_columns[i][0]));
        CHECK(at0[i][1] == doctest::Approx(fam.template_columns[i][1]));
    }
    fam.alpha = 0.7;
    const auto rotated = rotated_minima(fam);
    for (int i = 0; i < fam.minima_count(); ++i) {
        const double r0 = std::hypot(at0[i][0], at0[i][1]);
        const double r1 = std::hypot(rotated[i][0], rotated[i][1]);
        CHECK(r1 == doctest::Approx(r0).epsilon(1e-12));
    }
}

TEST_CASE("objective is finite everywhere with a plateau far out") {
    const DeJongFamily fam = default_dejong_family();
    CHECK(std::isfinite(dejong_objective({1e12, -1e12}, fam)));
    CHECK(dejong_objective({200.0, 200.0}, fam) == doctest::Approx(500.0).epsilon(1e-2));
    // near a minimum the value drops close to 1
    const auto minima = refined_minima(fam);
    for (const auto& m : minima) CHECK(dejong_objective(m, fam) < 1.2);
}

TEST_CASE("gradient matches central differences") {
    DeJongFamily fam = default_dejong_family(0.9);
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-50.0, 50.0);
    const double h = 1e-6;
    double worst = 0.0;
    for (int t = 0; t < 1000; ++t) {
        const std::array<double, 2> x{u(rng), u(rng)};
        const auto g = dejong_gradient(x, fam);
        for (int i = 0; i < 2; ++i) {
            auto xp = x, xm = x;
            xp[i] += h;
            xm[i] -= h;
            const double fd = (dejong_objective(xp, fam) - dejong_objective(xm, fam)) / (2 * h);
            // absolute floor 1.0: on the plateau the true gradient underflows
            // and the central difference is pure cancellation noise
            const double denom = std::max({1.0, std::abs(fd), std::abs(g[i])});
            worst = std::max(worst, std::abs(g[i] - fd) / denom);
        }
    }
    CHECK(worst < 1e-5);
}

TEST_CASE("refined minima are stationary points near the rotated columns") {
    for (double alpha : {0.0, 0.3, 1.1, M_PI / 2.0}) {
        const DeJongFamily fam = default_dejong_family(alpha);
        const auto columns = rotated_minima(fam);
        const auto minima = refined_minima(fam);
        REQUIRE(minima.size() == columns.size());
        for (std::size_t i = 0; i < minima.size(); ++i) {
            const auto g = dejong_gradient(minima[i], fam);
            CHECK(std::abs(g[0]) < 1e-9);
            CHECK(std::abs(g[1]) < 1e-9);
            // the polish stays within the column's own foxhole
            CHECK(std::hypot(minima[i][0] - columns[i][0], minima[i][1] - columns[i][1]) < 1.0);
        }
    }
}

TEST_CASE("refined minima are solver fixed points") {
    const FamilyRuntime rt = make_dejong_runtime();
    SolverConfig cfg;
    cfg.optimality_tol = 1e-6;
    const double alpha = 0.4;
    const DeJongFamily fam = default_dejong_family(alpha);
    for (const auto& m : refined_minima(fam)) {
        const SolveRecord rec = rt.solve(alpha, {m[0], m[1]}, cfg);
        CHECK(rec.converged);
        CHECK(rec.iterations <= 2);
        CHECK(std::hypot(rec.x_star[0] - m[0], rec.x_star[1] - m[1]) < 1e-6);
    }
}

TEST_CASE("solver started near a minimum stays in its basin") {
    const FamilyRuntime rt = make_dejong_runtime();
    SolverConfig cfg;
    cfg.optimality_tol = 1e-8;
    cfg.max_major_iterations = 500;
    std::mt19937_64 rng(5);
    std::normal_distribution<double> n;
    for (double alpha : {0.0, 0.8}) {
        const DeJongFamily fam = default_dejong_family(alpha);
        for (const auto& m : refined_minima(fam)) {
            Eigen::Vector2d d(n(rng), n(rng));
            d = d / d.norm() * 0.9;
            const SolveRecord rec = rt.solve(alpha, {m[0] + d[0], m[1] + d[1]}, cfg);
            CHECK(rec.converged);
            // overlapping foxholes carry secondary stationary points ~0.3 from
            // the main bottom, so assert same-foxhole capture, not exact return
            CHECK(std::hypot(rec.x_star[0] - m[0], rec.x_star[1] - m[1]) < 0.5);
        }
    }
}
