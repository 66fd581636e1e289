#include "amorgs/dejong.hpp"

#include <cmath>

namespace amorgs {

namespace {
constexpr double kDenominatorClamp = 1e300;

inline double pow6(double v) {
    double v2 = v * v;
    double v3 = v2 * v;
    double r = v3 * v3;
    return r < kDenominatorClamp ? r : kDenominatorClamp;
}
}  // namespace

DeJongFamily default_dejong_family(double alpha) {
    DeJongFamily f;
    f.template_columns = {{-32.0, 32.0}, {-32.0, 28.0}, {-28.0, 32.0}, {-28.0, 28.0},
                          {12.0, -12.0}, {12.0, -18.0}, {18.0, -12.0}, {18.0, -18.0}};
    f.alpha = alpha;
    f.bounds.lo = {-50.0, -50.0};
    f.bounds.hi = {50.0, 50.0};
    return f;
}

ProblemFamily dejong_problem_family() {
    ProblemFamily fam;
    fam.name = "dejong";
    fam.dimension = 2;
    fam.bounds.lo = {-50.0, -50.0};
    fam.bounds.hi = {50.0, 50.0};
    fam.equality_constraint_count = 0;
    fam.alpha_range = {0.0, M_PI / 2.0};
    return fam;
}

std::vector<std::array<double, 2>> rotated_minima(const DeJongFamily& family) {
    const double c = std::cos(family.alpha);
    const double s = std::sin(family.alpha);
    std::vector<std::array<double, 2>> out;
    out.reserve(family.template_columns.size());
    for (const auto& col : family.template_columns) {
        out.push_back({c * col[0] - s * col[1], s * col[0] + c * col[1]});
    }
    return out;
}

double dejong_objective(const std::array<double, 2>& x, const DeJongFamily& family) {
    const auto minima = rotated_minima(family);
    double sum = 0.002;
    for (const auto& m : minima) {
        sum += 1.0 / (1.0 + pow6(x[0] - m[0]) + pow6(x[1] - m[1]));
    }
    return 1.0 / sum;
}

std::array<double, 2> dejong_gradient(const std::array<double, 2>& x, const DeJongFamily& family) {
    const auto minima = rotated_minima(family);
    double sum = 0.002;
    double dsum0 = 0.0;
    double dsum1 = 0.0;
    for (const auto& m : minima) {
        const double a = x[0] - m[0];
        const double b = x[1] - m[1];
        const double a6 = pow6(a);
        const double b6 = pow6(b);
        const double denom = 1.0 + a6 + b6;
        sum += 1.0 / denom;
        // d/da of 1/denom; zero at a = 0 and where the clamp froze the term
        if (a != 0.0 && a6 < kDenominatorClamp) dsum0 -= 6.0 * (a6 / a) / (denom * denom);
        if (b != 0.0 && b6 < kDenominatorClamp) dsum1 -= 6.0 * (b6 / b) / (denom * denom);
    }
    const double j = 1.0 / sum;
    return {-j * j * dsum0, -j * j * dsum1};
}

std::vector<std::array<double, 2>> refined_minima(const DeJongFamily& family, double tol) {
    std::vector<std::array<double, 2>> out = rotated_minima(family);
    for (auto& x : out) {
        for (int iter = 0; iter < 500; ++iter) {
            const auto g = dejong_gradient(x, family);
            if (std::max(std::abs(g[0]), std::abs(g[1])) <= tol) break;
            const double h = 1e-5;
            auto gx0 = dejong_gradient({x[0] + h, x[1]}, family);
            auto gx1 = dejong_gradient({x[0] - h, x[1]}, family);
            auto gy0 = dejong_gradient({x[0], x[1] + h}, family);
            auto gy1 = dejong_gradient({x[0], x[1] - h}, family);
            const double hxx = (gx0[0] - gx1[0]) / (2 * h);
            const double hxy = 0.5 * ((gx0[1] - gx1[1]) + (gy0[0] - gy1[0])) / (2 * h);
            const double hyy = (gy0[1] - gy1[1]) / (2 * h);
            const double det = hxx * hyy - hxy * hxy;
            double dx, dy;
            if (det > 1e-12 && hxx > 0.0) {
                dx = -(hyy * g[0] - hxy * g[1]) / det;
                dy = -(-hxy * g[0] + hxx * g[1]) / det;
            } else {
                // Between a column and the true bottom the own foxhole term is
                // 6th-order flat: the gradient is the tiny neighbor slope and
                // the Hessian indefinite. A raw -g step would crawl, so take a
                // fixed-length descent step until Newton's region is reached.
                const double gn = std::hypot(g[0], g[1]);
                dx = -g[0] / gn * 0.05;
                dy = -g[1] / gn * 0.05;
            }
            const double norm = std::hypot(dx, dy);
            if (norm > 0.5) {
                dx *= 0.5 / norm;
                dy *= 0.5 / norm;
            }
            // backtrack to a strict-descent step; near the bottom f-differences
            // hit machine precision, so tiny Newton steps pass unconditionally
            const bool tiny = std::hypot(dx, dy) < 1e-6;
            const double f0 = dejong_objective(x, family);
            double t = 1.0;
            std::array<double, 2> xn{x[0] + dx, x[1] + dy};
            for (int ls = 0; ls < 40 && dejong_objective(xn, family) >= f0; ++ls) {
                t *= 0.5;
                xn = {x[0] + t * dx, x[1] + t * dy};
            }
            if (dejong_objective(xn, family) >= f0) {
                if (!tiny) break;
                xn = {x[0] + dx, x[1] + dy};
            }
            x = xn;
        }
    }
    return out;
}

}  // namespace amorgs
