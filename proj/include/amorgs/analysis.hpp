#ifndef AMORGS_ANALYSIS_HPP
#define AMORGS_ANALYSIS_HPP

#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "amorgs/problem.hpp"
#include "amorgs/shooting.hpp"

namespace amorgs {

/// Total time-of-flight tau_s + tau_i + tau_f (TU).
double time_of_flight(const ShootingVector& x);
double time_of_flight(const Eigen::Vector3d& tau);

/// TOF of every converged record with a (tau_s, tau_i, tau_f, ...) layout.
std::vector<double> converged_time_of_flights(const SolutionDataset& dataset);

/// The solution hyperplane |‖tau‖_1 − T| <= delta, with a fixed orthonormal
/// frame: in-plane (1,-1,0)/sqrt2 and (1,1,-2)/sqrt6, normal (1,1,1)/sqrt3.
struct HyperplaneFrame {
    double T = 0.0;
    double delta = 0.25;

    /// Rows are (e1, e2, n); orthogonal by construction.
    static Eigen::Matrix3d rotation();
};

bool hyperplane_membership(const Eigen::Vector3d& tau, const HyperplaneFrame& frame);

/// tau' = R tau: two in-plane coordinates followed by the normal coordinate.
Eigen::Vector3d to_hyperplane_coords(const Eigen::Vector3d& tau, const HyperplaneFrame& frame);

/// Frame of the mode nearest in |TOF - T|. Throws on empty mode list.
HyperplaneFrame nearest_frame(const std::vector<double>& mode_tofs, const Eigen::Vector3d& tau,
                              double delta = 0.25);

/// Default core threshold for mode detection: max(5, 0.2% of n).
int default_mode_min_count(std::size_t n);

/// Histogram modes of the TOF sample: bins of `bin_width` anchored at the
/// sample minimum; a mode is a strict local maximum with count >= min_count;
/// the reported T is the count-weighted mean of the bin and its neighbors.
std::vector<double> detect_modes(const std::vector<double>& tofs, double bin_width,
                                 int min_count);
std::vector<double> detect_modes(const SolutionDataset& dataset, double bin_width,
                                 int min_count);

/// Sliding-window mean of `objective` against `tof`: centers step window/5
/// from the sample min to max, window half-width window/2, empty centers
/// omitted. Returns (center, mean) pairs.
std::vector<std::pair<double, double>> moving_average(const std::vector<double>& tofs,
                                                      const std::vector<double>& objectives,
                                                      double window);
std::vector<std::pair<double, double>> moving_average(const SolutionDataset& dataset,
                                                      double window);

/// Density-based funnel labels over in-plane points; -1 marks noise. Labels
/// are canonicalized by cluster-centroid lexicographic order, so the result
/// is invariant to input permutation.
struct FunnelLabeling {
    std::vector<int> labels;
    int cluster_count = 0;
    double eps = 0.0;
    int min_pts = 0;
};

FunnelLabeling funnel_cluster(const std::vector<Eigen::Vector2d>& points, double eps,
                              int min_pts);

/// Per-segment Cartesian control mean and 95% half-width (1.96 s/sqrt(n)).
/// Rows are the 3 thrust axes, columns the N segments. Throws when fewer than
/// two records are given.
struct ControlStatistics {
    Eigen::MatrixXd mean;
    Eigen::MatrixXd ci_half_width;
};

ControlStatistics control_statistics(const std::vector<ShootingVector>& records);

}  // namespace amorgs

#endif
