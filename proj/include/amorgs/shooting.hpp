#ifndef AMORGS_SHOOTING_HPP
#define AMORGS_SHOOTING_HPP

#include <vector>

#include <Eigen/Dense>

#include "amorgs/cr3bp.hpp"
#include "amorgs/problem.hpp"

namespace amorgs {

/// One spherical control entry: azimuth in [0, 2pi], elevation in
/// [-pi/2, pi/2], magnitude in [0, T_max].
struct SphericalControl {
    double azimuth = 0.0;
    double elevation = 0.0;
    double magnitude = 0.0;
};

/// Decision variables of the forward-backward shooting NLP:
/// x = (tau_s, tau_i, tau_f, m_f, u_1..u_N), dimension 3N + 4.
struct ShootingVector {
    double tau_s = 0.0;  // shooting time, TU
    double tau_i = 0.0;  // initial coast, TU
    double tau_f = 0.0;  // final coast, TU
    double m_f = 0.0;    // final mass, kg
    std::vector<SphericalControl> controls;

    int segments() const { return static_cast<int>(controls.size()); }
    Eigen::VectorXd flatten() const;
    static ShootingVector unflatten(const Eigen::VectorXd& x);
};

/// Departure state (post-spiral, mass = m0_kg) and arrival 6-state (manifold
/// arc point), both synodic DU / DU-per-TU.
struct BoundaryConditions {
    SpacecraftState xi0;                  // mass field holds m0_kg
    Eigen::Matrix<double, 6, 1> xif_state;  // position + velocity only

    void validate() const;
};

/// Fixed transcription parameters. N must be even.
struct ShootingFamilyConfig {
    int segment_count = 20;
    double tau_s_max = 40.0;
    double coast_max = 15.0;
    double m_f_min = 350.0;
    double m_f_max = 450.0;

    void validate() const;
};

ControlVector spherical_to_cartesian(const SphericalControl& entry);

/// Coast tau_i, then N/2 thrust segments of dt = tau_s / N; state at the
/// midpoint t = tau_i + tau_s/2.
SpacecraftState forward_arc(const ShootingVector& x, const BoundaryConditions& bc, double alpha,
                            const SystemConstants& constants, double rel_tol = 1e-10,
                            double abs_tol = 1e-10);

/// From (xif_state, m_f) at t_f backward through the final coast and segments
/// u_N, u_{N-1}, ...; state at the same midpoint. Mass grows backward.
SpacecraftState backward_arc(const ShootingVector& x, const BoundaryConditions& bc, double alpha,
                             const SystemConstants& constants, double rel_tol = 1e-10,
                             double abs_tol = 1e-10);

/// c(x) = backward midpoint - forward midpoint: 3 position (DU), 3 velocity
/// (DU/TU), 1 mass (kg). Zero iff the trajectory is continuous.
Eigen::Matrix<double, 7, 1> defect(const ShootingVector& x, const BoundaryConditions& bc,
                                   double alpha, const SystemConstants& constants,
                                   double rel_tol = 1e-10, double abs_tol = 1e-10);

/// Minimum-fuel objective J = -m_f.
double shooting_objective(const ShootingVector& x);

/// Per-variable box for the flattened decision vector.
Bounds shooting_bounds(const ShootingFamilyConfig& cfg, const SystemConstants& constants);

ProblemFamily shooting_problem_family(const ShootingFamilyConfig& cfg,
                                      const SystemConstants& constants);

/// A boundary-condition pair with a known feasible solution. xi0 is a
/// near-circular prograde orbit around the primary at r = 0.5 DU; xif is the
/// endpoint of forward-simulating the reference schedule (coast, N constant
/// burns, coast), so defect(reference) is integration error only.
struct ReferenceProblem {
    BoundaryConditions boundary;
    ShootingVector reference;
};

ReferenceProblem default_reference_problem(const SystemConstants& constants,
                                           const ShootingFamilyConfig& cfg, double alpha = 1.0);

}  // namespace amorgs

#endif
