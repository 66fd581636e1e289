#include "amorgs/problem.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace amorgs {

using nlohmann::json;

bool Bounds::contains(const DecisionVector& x, double slack) const {
    if (x.size() != lo.size()) return false;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i] < lo[i] - slack || x[i] > hi[i] + slack) return false;
    }
    return true;
}

double Bounds::diagonal() const {
    double s = 0.0;
    for (std::size_t i = 0; i < lo.size(); ++i) s += (hi[i] - lo[i]) * (hi[i] - lo[i]);
    return std::sqrt(s);
}

void Bounds::validate() const {
    if (lo.size() != hi.size()) throw std::invalid_argument("bounds: lo/hi size mismatch");
    for (std::size_t i = 0; i < lo.size(); ++i) {
        if (!(lo[i] <= hi[i])) throw std::invalid_argument("bounds: lo > hi at index " + std::to_string(i));
    }
}

void ProblemFamily::validate() const {
    if (dimension < 1) throw std::invalid_argument("family: dimension must be >= 1");
    bounds.validate();
    if (bounds.dimension() != static_cast<std::size_t>(dimension))
        throw std::invalid_argument("family: bounds dimension mismatch");
}

void QualityThresholds::validate() const {
    for (std::size_t j = 1; j < levels.size(); ++j) {
        if (!(levels[j - 1] < levels[j]))
            throw std::invalid_argument("thresholds must be strictly increasing");
    }
}

SolutionDataset filter_by_quality(const SolutionDataset& dataset, double beta) {
    SolutionDataset out;
    out.family = dataset.family;
    out.provenance = dataset.provenance;
    for (const auto& r : dataset.records) {
        if (r.converged && r.objective <= beta) out.records.push_back(r);
    }
    return out;
}

std::vector<SolutionDataset> partition_by_thresholds(const SolutionDataset& dataset,
                                                     const QualityThresholds& thresholds) {
    thresholds.validate();
    if (thresholds.levels.empty()) throw std::invalid_argument("thresholds: empty level list");
    std::vector<SolutionDataset> parts(thresholds.levels.size());
    for (auto& p : parts) {
        p.family = dataset.family;
        p.provenance = dataset.provenance;
    }
    for (const auto& r : dataset.records) {
        if (!r.converged) continue;
        for (std::size_t j = 0; j < thresholds.levels.size(); ++j) {
            if (r.objective <= thresholds.levels[j]) {
                parts[j].records.push_back(r);
                break;
            }
        }
    }
    return parts;
}

double diversity_distance(const DecisionVector& a, const DecisionVector& b) {
    if (a.size() != b.size()) throw std::invalid_argument("diversity_distance: dimension mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

double eta_minus(const SolutionDataset& dataset) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < dataset.records.size(); ++i) {
        for (std::size_t j = i + 1; j < dataset.records.size(); ++j) {
            best = std::min(best, diversity_distance(dataset.records[i].x_star,
                                                     dataset.records[j].x_star));
        }
    }
    return best;
}

SolutionDataset diverse_subset(const SolutionDataset& dataset, double eta) {
    if (!(eta > 0.0)) throw std::invalid_argument("diverse_subset: eta must be positive");
    std::vector<std::size_t> order(dataset.records.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return dataset.records[a].objective < dataset.records[b].objective;
    });
    SolutionDataset out;
    out.family = dataset.family;
    out.provenance = dataset.provenance;
    for (std::size_t idx : order) {
        const auto& cand = dataset.records[idx];
        bool ok = true;
        for (const auto& kept : out.records) {
            if (diversity_distance(cand.x_star, kept.x_star) <= eta) {
                ok = false;
                break;
            }
        }
        if (ok) out.records.push_back(cand);
    }
    return out;
}

bool k_neighborhood_membership(const SolveRecord& record, const DecisionVector& target,
                               int k, double tol) {
    if (k < 0) throw std::invalid_argument("k_neighborhood_membership: k must be >= 0");
    if (!record.converged) return false;
    if (record.iterations > k) return false;
    return diversity_distance(record.x_star, target) <= tol;
}

double estimate_neighborhood_weight(const SolutionDataset& dataset,
                                    const DecisionVector& target, int k, double tol) {
    if (dataset.empty()) throw std::invalid_argument("estimate_neighborhood_weight: empty dataset");
    std::size_t count = 0;
    for (const auto& r : dataset.records) {
        if (k_neighborhood_membership(r, target, k, tol)) ++count;
    }
    return static_cast<double>(count) / static_cast<double>(dataset.size());
}

namespace {

json record_to_json(const SolveRecord& r) {
    return json{{"alpha", r.alpha},
                {"x0", r.x0},
                {"x_star", r.x_star},
                {"lambda_star", r.lambda_star},
                {"objective", r.objective},
                {"converged", r.converged},
                {"iterations", r.iterations},
                {"wall_time_s", r.wall_time_s},
                {"constraint_norm", r.constraint_norm}};
}

}  // namespace

void append_jsonl(const SolveRecord& record, std::ostream& out) {
    out << record_to_json(record).dump() << '\n';
}

SolveRecord record_from_json_line(const std::string& line) {
    json j = json::parse(line);
    SolveRecord r;
    r.alpha = j.at("alpha").get<double>();
    r.x0 = j.at("x0").get<DecisionVector>();
    r.x_star = j.at("x_star").get<DecisionVector>();
    r.lambda_star = j.at("lambda_star").get<std::vector<double>>();
    r.objective = j.at("objective").get<double>();
    r.converged = j.at("converged").get<bool>();
    r.iterations = j.at("iterations").get<int>();
    r.wall_time_s = j.at("wall_time_s").get<double>();
    r.constraint_norm = j.at("constraint_norm").get<double>();
    return r;
}

void save_jsonl(const SolutionDataset& dataset, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_jsonl: cannot open " + path);
    for (const auto& r : dataset.records) append_jsonl(r, out);
}

SolutionDataset load_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_jsonl: cannot open " + path);
    SolutionDataset ds;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        ds.records.push_back(record_from_json_line(line));
    }
    return ds;
}

std::size_t count_jsonl_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) return 0;
    std::size_t n = 0;
    std::string line;
    while (std::getline(in, line)) {
        if (in.eof() && !line.empty()) break;  // torn final line, no newline
        if (!line.empty()) ++n;
    }
    return n;
}

}  // namespace amorgs
