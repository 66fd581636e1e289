#ifndef AMORGS_SOLVER_HPP
#define AMORGS_SOLVER_HPP

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "amorgs/problem.hpp"

namespace amorgs {

/// Thrown when the objective or a constraint cannot be evaluated (NaN, failed
/// propagation). The solvers treat it as a rejected step or unconverged run.
class EvaluationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct SolverConfig {
    double optimality_tol = 1e-6;
    double feasibility_tol = 1e-3;
    int max_major_iterations = 1000;
    double max_wall_time_s = 500.0;
    bool project_bounds = true;

    // augmented-Lagrangian internals
    int max_inner_iterations = 200;
    double initial_penalty = 10.0;
    double lambda_max = 1e6;

    void validate() const;
};

struct SolverTrace {
    struct Step {
        double objective;
        double gradient_norm;
        double constraint_norm;
        double step_size;
    };
    std::vector<Step> steps;
    std::string termination_reason;
};

using ObjectiveFn = std::function<double(const Eigen::VectorXd&)>;
using GradientFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
using ConstraintFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
using JacobianFn = std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>;

/// Forward-difference Jacobian of c at x, step 1e-7 * (1 + |x_i|) per column.
Eigen::MatrixXd fd_jacobian(const ConstraintFn& c, const Eigen::VectorXd& x);

/// BFGS with backtracking Armijo line search and projection onto the box.
/// Converged iff the projected gradient inf-norm <= optimality_tol. Line-search
/// failure yields an unconverged record, not an exception.
SolveRecord minimize_unconstrained(const ObjectiveFn& f, const GradientFn& grad,
                                   const Eigen::VectorXd& x0, const Bounds& bounds,
                                   const SolverConfig& cfg, SolverTrace* trace = nullptr);

/// Staged equality-constrained solver. While infeasible it runs scale-aware
/// Levenberg-Marquardt restoration steps on 0.5||c||^2 projected onto the box.
/// At feasible points it estimates least-squares multipliers, declares
/// optimality when the projected Lagrangian gradient <= optimality_tol, and
/// otherwise takes an augmented-Lagrangian projected-BFGS step to improve the
/// objective. `jac` may be empty; forward differences are used then.
/// Iterations count major iterations (restoration or AL steps).
SolveRecord minimize_constrained(const ObjectiveFn& f, const GradientFn& grad,
                                 const ConstraintFn& c, const JacobianFn& jac,
                                 const Eigen::VectorXd& x0, const Bounds& bounds,
                                 const SolverConfig& cfg, SolverTrace* trace = nullptr);

/// ||grad_f + J^T lambda||_inf restricted to coordinates not at an active bound.
double kkt_residual(const Eigen::VectorXd& x, const Eigen::VectorXd& lambda,
                    const Eigen::VectorXd& grad_f, const Eigen::MatrixXd& jacobian,
                    const Bounds& bounds, double active_tol = 1e-10);

}  // namespace amorgs

#endif
