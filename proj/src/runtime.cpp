#include "amorgs/runtime.hpp"

#include <stdexcept>

namespace amorgs {

FamilyRuntime make_dejong_runtime() {
    FamilyRuntime rt;
    rt.family = dejong_problem_family();
    rt.solve = [](double alpha, const DecisionVector& x0, const SolverConfig& cfg) {
        if (x0.size() != 2) throw std::invalid_argument("dejong solve: expected 2-d guess");
        DeJongFamily fam = default_dejong_family(alpha);
        auto f = [&fam](const Eigen::VectorXd& x) {
            return dejong_objective({x[0], x[1]}, fam);
        };
        auto g = [&fam](const Eigen::VectorXd& x) {
            const auto grad = dejong_gradient({x[0], x[1]}, fam);
            return Eigen::Vector2d{grad[0], grad[1]};
        };
        SolveRecord rec = minimize_unconstrained(f, g, Eigen::Vector2d{x0[0], x0[1]},
                                                 fam.bounds, cfg);
        rec.alpha = alpha;
        rec.x0 = x0;
        return rec;
    };
    return rt;
}

FamilyRuntime make_cr3bp_runtime(const SystemConstants& constants,
                                 const BoundaryConditions& boundary,
                                 const ShootingFamilyConfig& shooting, double ode_rel_tol,
                                 double ode_abs_tol) {
    constants.validate();
    boundary.validate();
    shooting.validate();
    FamilyRuntime rt;
    rt.family = shooting_problem_family(shooting, constants);
    rt.solve = [constants, boundary, shooting, ode_rel_tol, ode_abs_tol](
                   double alpha, const DecisionVector& x0, const SolverConfig& cfg) {
        const int dim = shooting.segment_count * 3 + 4;
        if (static_cast<int>(x0.size()) != dim)
            throw std::invalid_argument("cr3bp solve: dimension mismatch");
        auto f = [](const Eigen::VectorXd& x) { return -x[3]; };
        auto g = [dim](const Eigen::VectorXd&) {
            Eigen::VectorXd grad = Eigen::VectorXd::Zero(dim);
            grad[3] = -1.0;
            return grad;
        };
        auto c = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd {
            Eigen::Matrix<double, 7, 1> d;
            try {
                d = defect(ShootingVector::unflatten(x), boundary, alpha, constants,
                           ode_rel_tol, ode_abs_tol);
            } catch (const PropagationError& e) {
                throw EvaluationError(e.what());
            }
            d[6] /= constants.m0_kg;
            return d;
        };
        SolveRecord rec = minimize_constrained(
            f, g, c, JacobianFn{}, Eigen::Map<const Eigen::VectorXd>(x0.data(), dim),
            shooting_bounds(shooting, constants), cfg);
        rec.alpha = alpha;
        rec.x0 = x0;
        return rec;
    };
    return rt;
}

}  // namespace amorgs
