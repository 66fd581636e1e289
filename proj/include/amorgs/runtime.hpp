#ifndef AMORGS_RUNTIME_HPP
#define AMORGS_RUNTIME_HPP

#include <functional>

#include "amorgs/dejong.hpp"
#include "amorgs/problem.hpp"
#include "amorgs/shooting.hpp"
#include "amorgs/solver.hpp"

namespace amorgs {

/// A problem family bound to its local solver: everything the pipeline needs
/// to turn an initial guess at some alpha into a SolveRecord.
struct FamilyRuntime {
    ProblemFamily family;
    std::function<SolveRecord(double alpha, const DecisionVector& x0, const SolverConfig&)> solve;
};

/// 2-D rotated foxhole landscape solved by projected BFGS.
FamilyRuntime make_dejong_runtime();

/// 64-D shooting transcription solved by the augmented-Lagrangian loop with
/// finite-difference constraint Jacobians. The mass defect component is
/// scaled by 1/m0 so all seven constraints are O(1).
FamilyRuntime make_cr3bp_runtime(const SystemConstants& constants,
                                 const BoundaryConditions& boundary,
                                 const ShootingFamilyConfig& shooting,
                                 double ode_rel_tol = 1e-10, double ode_abs_tol = 1e-10);

}  // namespace amorgs

#endif
