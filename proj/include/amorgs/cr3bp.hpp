#ifndef AMORGS_CR3BP_HPP
#define AMORGS_CR3BP_HPP

#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace amorgs {

/// Thrown when a trajectory approaches a primary or the step size underflows.
class PropagationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Earth-Moon CR3BP constants. Positions and velocities are nondimensional
/// (DU, TU); mass stays in kilograms. tu_s is frozen, not recomputed.
struct SystemConstants {
    double mu = 0.01215;        // mass parameter m2/(m1+m2)
    double isp_s = 1000.0;      // specific impulse, seconds
    double g0 = 9.80665;        // standard gravity, m/s^2
    double t_max_N = 1.0;       // maximum thrust, newtons
    double du_km = 384400.0;    // distance unit
    double tu_s = 375190.26;    // time unit, sqrt(du^3 / G(m1+m2))
    double m0_kg = 1000.0;      // initial wet mass (700 fuel + 300 dry)
    double dry_mass_kg = 300.0;

    void validate() const;

    /// (N / kg) -> DU/TU^2
    double accel_to_du_tu2() const { return tu_s * tu_s / (du_km * 1e3); }
};

/// Position/velocity in the synodic frame (DU, DU/TU) plus mass in kg.
struct SpacecraftState {
    Eigen::Vector3d q = Eigen::Vector3d::Zero();
    Eigen::Vector3d v = Eigen::Vector3d::Zero();
    double m = 0.0;

    Eigen::Matrix<double, 7, 1> pack() const;
    static SpacecraftState unpack(const Eigen::Matrix<double, 7, 1>& y);
};

/// Thrust vector in synodic Cartesian coordinates, newtons.
using ControlVector = Eigen::Vector3d;

/// One constant-thrust span of a control schedule.
struct ControlSegment {
    ControlVector u = ControlVector::Zero();
    double duration = 0.0;  // TU, >= 0
};

/// Distances to the primary and secondary.
std::pair<double, double> distances(const Eigen::Vector3d& q, double mu);

/// Effective potential U = (q1^2+q2^2)/2 + (1-mu)/r1 + mu/r2. Throws
/// std::domain_error at a primary.
double effective_potential(const Eigen::Vector3d& q, double mu);

Eigen::Vector3d effective_potential_gradient(const Eigen::Vector3d& q, double mu);

/// Ballistic dynamics: qddot = -2 zhat x qdot + grad U, mass constant.
Eigen::Matrix<double, 7, 1> natural_field(const SpacecraftState& state,
                                          const SystemConstants& constants);

/// Adds alpha * u / m thrust acceleration and mdot = -alpha |u| / (Isp g0),
/// converted to DU/TU^2 and kg/TU.
Eigen::Matrix<double, 7, 1> controlled_field(const SpacecraftState& state,
                                             const ControlVector& u, double alpha,
                                             const SystemConstants& constants);

/// Adaptive Dormand-Prince 5(4) over a piecewise-constant control schedule,
/// restarting at every segment boundary. Negative durations integrate backward
/// in time. Throws PropagationError near a primary (r < 1e-6 DU) or on step
/// underflow.
SpacecraftState propagate(const SpacecraftState& state,
                          const std::vector<ControlSegment>& schedule, double alpha,
                          const SystemConstants& constants, double rel_tol = 1e-10,
                          double abs_tol = 1e-10);

/// Jacobi constant C = 2 U(q) - |v|^2; conserved under the natural flow only.
double jacobi_constant(const SpacecraftState& state, const SystemConstants& constants);

/// x-coordinate of the collinear equilibrium between the primaries, found by
/// bisection of dU/dq1 on (-mu, 1-mu) to 1e-14.
double l1_position(double mu);

}  // namespace amorgs

#endif
