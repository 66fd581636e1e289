#ifndef AMORGS_PROBLEM_HPP
#define AMORGS_PROBLEM_HPP

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace amorgs {

/// One decision vector of a problem family, stored dense.
using DecisionVector = std::vector<double>;

/// Per-variable [lo, hi] box.
struct Bounds {
    std::vector<double> lo;
    std::vector<double> hi;

    std::size_t dimension() const { return lo.size(); }
    bool contains(const DecisionVector& x, double slack = 0.0) const;
    /// Euclidean length of the box diagonal.
    double diagonal() const;
    void validate() const;  // throws std::invalid_argument on lo > hi
};

/// Static description of a parameterized NLP family P_{alpha}.
struct ProblemFamily {
    std::string name;
    int dimension = 0;
    Bounds bounds;
    int equality_constraint_count = 0;
    std::array<double, 2> alpha_range{0.0, 0.0};

    void validate() const;
};

/// Everything one local-solver run produced.
struct SolveRecord {
    double alpha = 0.0;
    DecisionVector x0;
    DecisionVector x_star;
    std::vector<double> lambda_star;  // zero vector when the solver has no estimate
    double objective = 0.0;
    bool converged = false;
    int iterations = 0;  // major iterations
    double wall_time_s = 0.0;
    double constraint_norm = 0.0;
};

/// A curated collection of solve records sharing one family.
struct SolutionDataset {
    std::vector<SolveRecord> records;
    std::string family;
    std::string provenance;  // curation config digest

    bool empty() const { return records.empty(); }
    std::size_t size() const { return records.size(); }
};

/// Strictly increasing quality levels beta_0 < ... < beta_N.
struct QualityThresholds {
    std::vector<double> levels;
    void validate() const;  // throws on non-monotone levels
};

/// Converged records with objective <= beta.
SolutionDataset filter_by_quality(const SolutionDataset& dataset, double beta);

/// Disjoint partition: record goes to the smallest j with objective <= beta_j.
/// The union of the N+1 parts equals filter_by_quality(dataset, beta_N).
std::vector<SolutionDataset> partition_by_thresholds(const SolutionDataset& dataset,
                                                     const QualityThresholds& thresholds);

/// Euclidean proxy for the diversity metric. Throws on dimension mismatch.
double diversity_distance(const DecisionVector& a, const DecisionVector& b);

/// Greedy eta-diverse subset, admitting records in ascending-objective order.
/// Every retained pair is > eta apart; no skipped record could be re-added.
SolutionDataset diverse_subset(const SolutionDataset& dataset, double eta);

/// Minimum pairwise distance within the dataset (eta^- of the diversity problem).
double eta_minus(const SolutionDataset& dataset);

/// True iff the record converged within k majors to within tol of target.
bool k_neighborhood_membership(const SolveRecord& record, const DecisionVector& target,
                               int k, double tol);

/// Monte-Carlo estimate of the k-neighborhood weight of `target`:
/// member count / total records. Requires uniform-seeded records.
double estimate_neighborhood_weight(const SolutionDataset& dataset,
                                    const DecisionVector& target, int k, double tol);

/// JSON Lines persistence, one record per line, full round-trip float precision.
void save_jsonl(const SolutionDataset& dataset, const std::string& path);
SolutionDataset load_jsonl(const std::string& path);
void append_jsonl(const SolveRecord& record, std::ostream& out);
SolveRecord record_from_json_line(const std::string& line);

/// Count complete lines in an existing JSONL file (resume support).
std::size_t count_jsonl_lines(const std::string& path);

}  // namespace amorgs

#endif
