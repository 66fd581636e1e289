#ifndef AMORGS_DEJONG_HPP
#define AMORGS_DEJONG_HPP

#include <array>
#include <vector>

#include "amorgs/problem.hpp"

namespace amorgs {

/// Rotated De Jong's 5th function family. Columns of rotate(alpha) * template_matrix
/// are the local minima; alpha in [0, pi/2] rotates the template.
struct DeJongFamily {
    /// 2 x n template matrix, column-major flattened as n (x, y) pairs.
    std::vector<std::array<double, 2>> template_columns;
    double alpha = 0.0;
    Bounds bounds;  // defaults to [-50, 50]^2

    int minima_count() const { return static_cast<int>(template_columns.size()); }
};

/// The eight-column template used throughout: two clusters of four minima.
DeJongFamily default_dejong_family(double alpha = 0.0);

ProblemFamily dejong_problem_family();

/// Columns of R(alpha) * A.
std::vector<std::array<double, 2>> rotated_minima(const DeJongFamily& family);

/// J(x) = (0.002 + sum_i 1 / (1 + dx1^6 + dx2^6))^-1, finite everywhere
/// (denominators clamped so the plateau value stays ~500 for |x| >> bounds).
double dejong_objective(const std::array<double, 2>& x, const DeJongFamily& family);

/// Analytic gradient of dejong_objective.
std::array<double, 2> dejong_gradient(const std::array<double, 2>& x, const DeJongFamily& family);

/// Exact local minimizers of the objective. Each template column is only an
/// approximate minimizer: neighboring foxhole terms offset the true minimum by
/// ~0.2 within a cluster. Newton-polished from the rotated columns until
/// ||grad||_inf <= tol.
std::vector<std::array<double, 2>> refined_minima(const DeJongFamily& family, double tol = 1e-10);

}  // namespace amorgs

#endif
