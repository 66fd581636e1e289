#include "amorgs/cr3bp.hpp"

#include <cmath>

namespace amorgs {

namespace {
constexpr double kSingularityRadius = 1e-6;  // DU

void check_not_singular(const Eigen::Vector3d& q, double mu) {
    auto [r1, r2] = distances(q, mu);
    if (r1 < kSingularityRadius || r2 < kSingularityRadius)
        throw PropagationError("trajectory entered the singularity guard radius");
}
}  // namespace

void SystemConstants::validate() const {
    if (!(mu > 0.0 && mu < 0.5)) throw std::invalid_argument("constants: mu must be in (0, 0.5)");
    if (!(isp_s > 0.0)) throw std::invalid_argument("constants: isp_s must be positive");
    if (t_max_N < 0.0) throw std::invalid_argument("constants: t_max_N must be >= 0");
    if (!(tu_s > 0.0) || !(du_km > 0.0)) throw std::invalid_argument("constants: bad units");
}

Eigen::Matrix<double, 7, 1> SpacecraftState::pack() const {
    Eigen::Matrix<double, 7, 1> y;
    y << q, v, m;
    return y;
}

SpacecraftState SpacecraftState::unpack(const Eigen::Matrix<double, 7, 1>& y) {
    SpacecraftState s;
    s.q = y.segment<3>(0);
    s.v = y.segment<3>(3);
    s.m = y[6];
    return s;
}

std::pair<double, double> distances(const Eigen::Vector3d& q, double mu) {
    const double r1 = std::sqrt((q[0] + mu) * (q[0] + mu) + q[1] * q[1] + q[2] * q[2]);
    const double r2 =
        std::sqrt((q[0] - (1.0 - mu)) * (q[0] - (1.0 - mu)) + q[1] * q[1] + q[2] * q[2]);
    return {r1, r2};
}

double effective_potential(const Eigen::Vector3d& q, double mu) {
    auto [r1, r2] = distances(q, mu);
    if (r1 == 0.0 || r2 == 0.0) throw std::domain_error("effective_potential: at a primary");
    return 0.5 * (q[0] * q[0] + q[1] * q[1]) + (1.0 - mu) / r1 + mu / r2;
}

Eigen::Vector3d effective_potential_gradient(const Eigen::Vector3d& q, double mu) {
    auto [r1, r2] = distances(q, mu);
    if (r1 == 0.0 || r2 == 0.0) throw std::domain_error("effective_potential: at a primary");
    const double c1 = (1.0 - mu) / (r1 * r1 * r1);
    const double c2 = mu / (r2 * r2 * r2);
    Eigen::Vector3d g;
    g[0] = q[0] - c1 * (q[0] + mu) - c2 * (q[0] - (1.0 - mu));
    g[1] = q[1] - c1 * q[1] - c2 * q[1];
    g[2] = -c1 * q[2] - c2 * q[2];
    return g;
}

Eigen::Matrix<double, 7, 1> natural_field(const SpacecraftState& state,
                                          const SystemConstants& constants) {
    check_not_singular(state.q, constants.mu);
    Eigen::Vector3d coriolis(2.0 * state.v[1], -2.0 * state.v[0], 0.0);  // -2 zhat x v
    Eigen::Vector3d acc = coriolis + effective_potential_gradient(state.q, constants.mu);
    Eigen::Matrix<double, 7, 1> dy;
    dy << state.v, acc, 0.0;
    return dy;
}

Eigen::Matrix<double, 7, 1> controlled_field(const SpacecraftState& state,
                                             const ControlVector& u, double alpha,
                                             const SystemConstants& constants) {
    if (!(state.m > 0.0)) throw std::domain_error("controlled_field: nonpositive mass");
    Eigen::Matrix<double, 7, 1> dy = natural_field(state, constants);
    const double thrust_N = u.norm();
    if (thrust_N > 0.0 && alpha != 0.0) {
        dy.segment<3>(3) += (alpha / state.m) * constants.accel_to_du_tu2() * u;
        dy[6] = -alpha * thrust_N / (constants.isp_s * constants.g0) * constants.tu_s;
    }
    return dy;
}

namespace {

// Dormand-Prince 5(4) tableau
constexpr double kA[7][6] = {
    {},
    {1.0 / 5},
    {3.0 / 40, 9.0 / 40},
    {44.0 / 45, -56.0 / 15, 32.0 / 9},
    {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729},
    {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656},
    {35.0 / 384, 0.0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84}};
constexpr double kB5[7] = {35.0 / 384,      0.0,  500.0 / 1113, 125.0 / 192,
                           -2187.0 / 6784, 11.0 / 84, 0.0};
constexpr double kB4[7] = {5179.0 / 57600,  0.0,           7571.0 / 16695, 393.0 / 640,
                           -92097.0 / 339200, 187.0 / 2100, 1.0 / 40};

using State7 = Eigen::Matrix<double, 7, 1>;

State7 field(const State7& y, const ControlVector& u, double alpha,
             const SystemConstants& constants) {
    return controlled_field(SpacecraftState::unpack(y), u, alpha, constants);
}

/// One control segment with adaptive embedded RK steps. `duration` may be
/// negative (backward integration).
State7 integrate_segment(State7 y, const ControlVector& u, double duration, double alpha,
                         const SystemConstants& constants, double rel_tol, double abs_tol) {
    if (duration == 0.0) return y;
    const double dir = duration > 0.0 ? 1.0 : -1.0;
    const double t_end = duration;
    double t = 0.0;
    double h = dir * std::min(0.05, std::abs(duration));

    State7 k[7];
    while (dir * (t_end - t) > 0.0) {
        if (std::abs(h) > std::abs(t_end - t)) h = t_end - t;
        if (std::abs(h) < 1e-15) throw PropagationError("step size underflow");

        k[0] = field(y, u, alpha, constants);
        for (int stage = 1; stage < 7; ++stage) {
            State7 yi = y;
            for (int j = 0; j < stage; ++j) yi += h * kA[stage][j] * k[j];
            k[stage] = field(yi, u, alpha, constants);
        }
        State7 y5 = y;
        State7 y4 = y;
        for (int j = 0; j < 7; ++j) {
            y5 += h * kB5[j] * k[j];
            y4 += h * kB4[j] * k[j];
        }

        double err = 0.0;
        for (int i = 0; i < 7; ++i) {
            const double scale = abs_tol + rel_tol * std::max(std::abs(y[i]), std::abs(y5[i]));
            err = std::max(err, std::abs(y5[i] - y4[i]) / scale);
        }

        if (err <= 1.0) {
            t += h;
            y = y5;
        }
        const double factor = std::clamp(0.9 * std::pow(err > 0.0 ? err : 1e-16, -0.2), 0.2, 5.0);
        h *= factor;
    }
    return y;
}

}  // namespace

SpacecraftState propagate(const SpacecraftState& state,
                          const std::vector<ControlSegment>& schedule, double alpha,
                          const SystemConstants& constants, double rel_tol, double abs_tol) {
    if (!(rel_tol > 0.0) || !(abs_tol > 0.0))
        throw std::invalid_argument("propagate: tolerances must be positive");
    State7 y = state.pack();
    for (const auto& seg : schedule) {
        y = integrate_segment(y, seg.u, seg.duration, alpha, constants, rel_tol, abs_tol);
    }
    return SpacecraftState::unpack(y);
}

double jacobi_constant(const SpacecraftState& state, const SystemConstants& constants) {
    return 2.0 * effective_potential(state.q, constants.mu) - state.v.squaredNorm();
}

double l1_position(double mu) {
    if (!(mu > 0.0 && mu < 0.5)) throw std::invalid_argument("l1_position: mu out of range");
    auto dudx = [mu](double x) {
        return effective_potential_gradient(Eigen::Vector3d(x, 0.0, 0.0), mu)[0];
    };
    // dU/dx is strictly increasing on (-mu, 1-mu): -inf at the Earth side,
    // +inf at the Moon side, single root = L1
    double lo = -mu + 1e-9;
    double hi = 1.0 - mu - 1e-9;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (dudx(mid) > 0.0) {
            hi = mid;
        } else {
            lo = mid;
        }
        if (hi - lo < 1e-15) break;
    }
    return 0.5 * (lo + hi);
}

}  // namespace amorgs
