#include "amorgs/shooting.hpp"

#include <cmath>
#include <stdexcept>

namespace amorgs {

Eigen::VectorXd ShootingVector::flatten() const {
    Eigen::VectorXd x(3 * controls.size() + 4);
    x[0] = tau_s;
    x[1] = tau_i;
    x[2] = tau_f;
    x[3] = m_f;
    for (std::size_t i = 0; i < controls.size(); ++i) {
        x[4 + 3 * i] = controls[i].azimuth;
        x[5 + 3 * i] = controls[i].elevation;
        x[6 + 3 * i] = controls[i].magnitude;
    }
    return x;
}

ShootingVector ShootingVector::unflatten(const Eigen::VectorXd& x) {
    if ((x.size() - 4) % 3 != 0 || x.size() < 4)
        throw std::invalid_argument("shooting vector length must be 3N + 4");
    ShootingVector v;
    v.tau_s = x[0];
    v.tau_i = x[1];
    v.tau_f = x[2];
    v.m_f = x[3];
    v.controls.resize((x.size() - 4) / 3);
    for (std::size_t i = 0; i < v.controls.size(); ++i) {
        v.controls[i] = {x[4 + 3 * i], x[5 + 3 * i], x[6 + 3 * i]};
    }
    return v;
}

void BoundaryConditions::validate() const {
    if (!xi0.pack().allFinite() || !xif_state.allFinite())
        throw std::invalid_argument("boundary conditions must be finite");
}

void ShootingFamilyConfig::validate() const {
    if (segment_count < 2 || segment_count % 2 != 0)
        throw std::invalid_argument("segment count must be even and >= 2");
    if (!(m_f_min <= m_f_max) || !(tau_s_max > 0.0) || !(coast_max >= 0.0))
        throw std::invalid_argument("bad shooting family bounds");
}

ControlVector spherical_to_cartesian(const SphericalControl& entry) {
    const double ca = std::cos(entry.azimuth);
    const double sa = std::sin(entry.azimuth);
    const double ce = std::cos(entry.elevation);
    const double se = std::sin(entry.elevation);
    return entry.magnitude * ControlVector(ce * ca, ce * sa, se);
}

SpacecraftState forward_arc(const ShootingVector& x, const BoundaryConditions& bc, double alpha,
                            const SystemConstants& constants, double rel_tol, double abs_tol) {
    const int n = x.segments();
    const double dt = n > 0 ? x.tau_s / n : 0.0;
    std::vector<ControlSegment> schedule;
    schedule.push_back({ControlVector::Zero(), x.tau_i});
    for (int j = 0; j < n / 2; ++j) {
        schedule.push_back({spherical_to_cartesian(x.controls[j]), dt});
    }
    return propagate(bc.xi0, schedule, alpha, constants, rel_tol, abs_tol);
}

SpacecraftState backward_arc(const ShootingVector& x, const BoundaryConditions& bc, double alpha,
                             const SystemConstants& constants, double rel_tol, double abs_tol) {
    const int n = x.segments();
    const double dt = n > 0 ? x.tau_s / n : 0.0;
    SpacecraftState terminal;
    terminal.q = bc.xif_state.segment<3>(0);
    terminal.v = bc.xif_state.segment<3>(3);
    terminal.m = x.m_f;
    std::vector<ControlSegment> schedule;
    schedule.push_back({ControlVector::Zero(), -x.tau_f});
    // controls u_N, u_{N-1}, ..., u_{N/2+1}, each integrated backward
    for (int j = 0; j < n / 2; ++j) {
        schedule.push_back({spherical_to_cartesian(x.controls[n - 1 - j]), -dt});
    }
    return propagate(terminal, schedule, alpha, constants, rel_tol, abs_tol);
}

Eigen::Matrix<double, 7, 1> defect(const ShootingVector& x, const BoundaryConditions& bc,
                                   double alpha, const SystemConstants& constants,
                                   double rel_tol, double abs_tol) {
    const SpacecraftState fwd = forward_arc(x, bc, alpha, constants, rel_tol, abs_tol);
    const SpacecraftState bwd = backward_arc(x, bc, alpha, constants, rel_tol, abs_tol);
    return bwd.pack() - fwd.pack();
}

double shooting_objective(const ShootingVector& x) { return -x.m_f; }

Bounds shooting_bounds(const ShootingFamilyConfig& cfg, const SystemConstants& constants) {
    cfg.validate();
    Bounds b;
    const int dim = 3 * cfg.segment_count + 4;
    b.lo.resize(dim);
    b.hi.resize(dim);
    b.lo[0] = 0.0;
    b.hi[0] = cfg.tau_s_max;
    b.lo[1] = b.lo[2] = 0.0;
    b.hi[1] = b.hi[2] = cfg.coast_max;
    b.lo[3] = cfg.m_f_min;
    b.hi[3] = cfg.m_f_max;
    for (int i = 0; i < cfg.segment_count; ++i) {
        b.lo[4 + 3 * i] = 0.0;
        b.hi[4 + 3 * i] = 2.0 * M_PI;
        b.lo[5 + 3 * i] = -M_PI / 2.0;
        b.hi[5 + 3 * i] = M_PI / 2.0;
        b.lo[6 + 3 * i] = 0.0;
        b.hi[6 + 3 * i] = constants.t_max_N;
    }
    return b;
}

ProblemFamily shooting_problem_family(const ShootingFamilyConfig& cfg,
                                      const SystemConstants& constants) {
    ProblemFamily fam;
    fam.name = "cr3bp";
    fam.dimension = 3 * cfg.segment_count + 4;
    fam.bounds = shooting_bounds(cfg, constants);
    fam.equality_constraint_count = 7;
    fam.alpha_range = {0.1, 1.0};
    return fam;
}

ReferenceProblem default_reference_problem(const SystemConstants& constants,
                                           const ShootingFamilyConfig& cfg, double alpha) {
    cfg.validate();
    ReferenceProblem ref;

    SpacecraftState xi0;
    const double r = 0.5;
    xi0.q = {r - constants.mu, 0.0, 0.0};
    // circular speed about the primary, minus the frame rotation
    xi0.v = {0.0, std::sqrt((1.0 - constants.mu) / r) - r, 0.0};
    xi0.m = constants.m0_kg;

    ShootingVector x;
    x.tau_i = 2.0;
    x.tau_s = 16.0;
    x.tau_f = 2.0;
    x.controls.reserve(cfg.segment_count);

    // Burns alternating along / against the velocity at each segment start:
    // energy gains cancel over segment pairs, so fuel drains into the m_f box
    // while the reference stays within ~1.5 DU of the primaries.
    const double mag = 0.95 * constants.t_max_N;
    const double dt = x.tau_s / cfg.segment_count;
    SpacecraftState state = propagate(xi0, {{ControlVector::Zero(), x.tau_i}}, alpha, constants,
                                      1e-12, 1e-12);
    for (int s = 0; s < cfg.segment_count; ++s) {
        double az = std::atan2(state.v.y(), state.v.x()) + (s % 2 ? M_PI : 0.0);
        while (az < 0.0) az += 2.0 * M_PI;
        while (az >= 2.0 * M_PI) az -= 2.0 * M_PI;
        const SphericalControl c{az, 0.0, mag};
        x.controls.push_back(c);
        state = propagate(state, {{spherical_to_cartesian(c), dt}}, alpha, constants, 1e-12,
                          1e-12);
    }
    const SpacecraftState end = propagate(state, {{ControlVector::Zero(), x.tau_f}}, alpha,
                                          constants, 1e-12, 1e-12);

    x.m_f = end.m;
    ref.boundary.xi0 = xi0;
    ref.boundary.xif_state << end.q, end.v;
    ref.reference = x;
    return ref;
}

}  // namespace amorgs
