#include "amorgs/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <stdexcept>

namespace amorgs {

double time_of_flight(const ShootingVector& x) { return x.tau_s + x.tau_i + x.tau_f; }

double time_of_flight(const Eigen::Vector3d& tau) { return tau.sum(); }

std::vector<double> converged_time_of_flights(const SolutionDataset& dataset) {
    std::vector<double> tofs;
    for (const SolveRecord& rec : dataset.records) {
        if (!rec.converged) continue;
        if (rec.x_star.size() < 3)
            throw std::invalid_argument("time_of_flight: record has no time block");
        tofs.push_back(rec.x_star[0] + rec.x_star[1] + rec.x_star[2]);
    }
    return tofs;
}

Eigen::Matrix3d HyperplaneFrame::rotation() {
    Eigen::Matrix3d r;
    r.row(0) = Eigen::RowVector3d(1.0, -1.0, 0.0) / std::sqrt(2.0);
    r.row(1) = Eigen::RowVector3d(1.0, 1.0, -2.0) / std::sqrt(6.0);
    r.row(2) = Eigen::RowVector3d(1.0, 1.0, 1.0) / std::sqrt(3.0);
    return r;
}

bool hyperplane_membership(const Eigen::Vector3d& tau, const HyperplaneFrame& frame) {
    return std::abs(tau.sum() - frame.T) <= frame.delta;
}

Eigen::Vector3d to_hyperplane_coords(const Eigen::Vector3d& tau, const HyperplaneFrame&) {
    return HyperplaneFrame::rotation() * tau;
}

HyperplaneFrame nearest_frame(const std::vector<double>& mode_tofs, const Eigen::Vector3d& tau,
                              double delta) {
    if (mode_tofs.empty()) throw std::invalid_argument("nearest_frame: no modes");
    const double tof = tau.sum();
    double best = mode_tofs.front();
    for (double t : mode_tofs)
        if (std::abs(tof - t) < std::abs(tof - best)) best = t;
    return HyperplaneFrame{best, delta};
}

int default_mode_min_count(std::size_t n) {
    return std::max<int>(5, static_cast<int>(0.002 * static_cast<double>(n)));
}

std::vector<double> detect_modes(const std::vector<double>& tofs, double bin_width,
                                 int min_count) {
    if (tofs.empty()) throw std::invalid_argument("detect_modes: empty sample");
    if (bin_width <= 0.0) throw std::invalid_argument("detect_modes: bin_width <= 0");
    const double t0 = *std::min_element(tofs.begin(), tofs.end());
    const double t1 = *std::max_element(tofs.begin(), tofs.end());
    const int bins = static_cast<int>(std::floor((t1 - t0) / bin_width)) + 1;

    std::vector<int> count(bins, 0);
    std::vector<double> sum(bins, 0.0);
    for (double t : tofs) {
        const int b = std::min(bins - 1, static_cast<int>(std::floor((t - t0) / bin_width)));
        ++count[b];
        sum[b] += t;
    }

    auto at = [&](int b) { return (b < 0 || b >= bins) ? 0 : count[b]; };
    std::vector<double> modes;
    for (int b = 0; b < bins; ++b) {
        if (count[b] < min_count) continue;
        if (count[b] <= at(b - 1) || count[b] <= at(b + 1)) continue;
        double c = 0.0, s = 0.0;
        for (int k = std::max(0, b - 1); k <= std::min(bins - 1, b + 1); ++k) {
            c += count[k];
            s += sum[k];
        }
        modes.push_back(s / c);
    }
    return modes;
}

std::vector<double> detect_modes(const SolutionDataset& dataset, double bin_width,
                                 int min_count) {
    return detect_modes(converged_time_of_flights(dataset), bin_width, min_count);
}

std::vector<std::pair<double, double>> moving_average(const std::vector<double>& tofs,
                                                      const std::vector<double>& objectives,
                                                      double window) {
    if (window <= 0.0) throw std::invalid_argument("moving_average: window <= 0");
    if (tofs.size() != objectives.size())
        throw std::invalid_argument("moving_average: length mismatch");
    if (tofs.empty()) return {};
    const double t0 = *std::min_element(tofs.begin(), tofs.end());
    const double t1 = *std::max_element(tofs.begin(), tofs.end());
    const double step = window / 5.0;
    const double half = window / 2.0;

    std::vector<std::pair<double, double>> curve;
    for (double center = t0; center <= t1 + 0.5 * step; center += step) {
        double s = 0.0;
        int n = 0;
        for (std::size_t i = 0; i < tofs.size(); ++i) {
            if (std::abs(tofs[i] - center) <= half) {
                s += objectives[i];
                ++n;
            }
        }
        if (n > 0) curve.emplace_back(center, s / n);
    }
    return curve;
}

std::vector<std::pair<double, double>> moving_average(const SolutionDataset& dataset,
                                                      double window) {
    std::vector<double> tofs, objectives;
    for (const SolveRecord& rec : dataset.records) {
        if (!rec.converged) continue;
        if (rec.x_star.size() < 3)
            throw std::invalid_argument("moving_average: record has no time block");
        tofs.push_back(rec.x_star[0] + rec.x_star[1] + rec.x_star[2]);
        objectives.push_back(rec.objective);
    }
    return moving_average(tofs, objectives, window);
}

FunnelLabeling funnel_cluster(const std::vector<Eigen::Vector2d>& points, double eps,
                              int min_pts) {
    if (eps <= 0.0) throw std::invalid_argument("funnel_cluster: eps <= 0");
    const int n = static_cast<int>(points.size());
    constexpr int kUnvisited = -2, kNoise = -1;
    std::vector<int> label(n, kUnvisited);

    auto neighbors = [&](int i) {
        std::vector<int> nb;
        for (int j = 0; j < n; ++j)
            if ((points[j] - points[i]).norm() <= eps) nb.push_back(j);
        return nb;
    };

    int next_cluster = 0;
    for (int i = 0; i < n; ++i) {
        if (label[i] != kUnvisited) continue;
        auto nb = neighbors(i);
        if (static_cast<int>(nb.size()) < min_pts) {
            label[i] = kNoise;
            continue;
        }
        const int cluster = next_cluster++;
        label[i] = cluster;
        std::deque<int> frontier(nb.begin(), nb.end());
        while (!frontier.empty()) {
            const int j = frontier.front();
            frontier.pop_front();
            if (label[j] == kNoise) label[j] = cluster;  // border point
            if (label[j] != kUnvisited) continue;
            label[j] = cluster;
            auto nbj = neighbors(j);
            if (static_cast<int>(nbj.size()) >= min_pts)
                frontier.insert(frontier.end(), nbj.begin(), nbj.end());
        }
    }

    // Canonical labels: clusters renumbered by centroid lexicographic order,
    // so the labeling is invariant to input permutation.
    std::vector<Eigen::Vector2d> centroid(next_cluster, Eigen::Vector2d::Zero());
    std::vector<int> size(next_cluster, 0);
    for (int i = 0; i < n; ++i) {
        if (label[i] < 0) continue;
        centroid[label[i]] += points[i];
        ++size[label[i]];
    }
    std::vector<int> order(next_cluster);
    for (int c = 0; c < next_cluster; ++c) {
        centroid[c] /= std::max(1, size[c]);
        order[c] = c;
    }
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (centroid[a].x() != centroid[b].x()) return centroid[a].x() < centroid[b].x();
        return centroid[a].y() < centroid[b].y();
    });
    std::vector<int> rank(next_cluster);
    for (int r = 0; r < next_cluster; ++r) rank[order[r]] = r;
    for (int i = 0; i < n; ++i)
        if (label[i] >= 0) label[i] = rank[label[i]];

    FunnelLabeling out;
    out.labels = std::move(label);
    out.cluster_count = next_cluster;
    out.eps = eps;
    out.min_pts = min_pts;
    return out;
}

ControlStatistics control_statistics(const std::vector<ShootingVector>& records) {
    if (records.size() < 2)
        throw std::invalid_argument("control_statistics: need at least 2 records");
    const int segments = records.front().segments();
    for (const ShootingVector& r : records)
        if (r.segments() != segments)
            throw std::invalid_argument("control_statistics: segment count mismatch");

    const double n = static_cast<double>(records.size());
    ControlStatistics stats;
    stats.mean = Eigen::MatrixXd::Zero(3, segments);
    stats.ci_half_width = Eigen::MatrixXd::Zero(3, segments);
    Eigen::MatrixXd sq = Eigen::MatrixXd::Zero(3, segments);
    for (const ShootingVector& r : records) {
        for (int s = 0; s < segments; ++s) {
            const ControlVector u = spherical_to_cartesian(r.controls[s]);
            stats.mean.col(s) += u;
            sq.col(s) += u.cwiseProduct(u);
        }
    }
    stats.mean /= n;
    for (int s = 0; s < segments; ++s) {
        for (int a = 0; a < 3; ++a) {
            const double var =
                std::max(0.0, (sq(a, s) - n * stats.mean(a, s) * stats.mean(a, s)) / (n - 1.0));
            stats.ci_half_width(a, s) = 1.96 * std::sqrt(var / n);
        }
    }
    return stats;
}

}  // namespace amorgs
