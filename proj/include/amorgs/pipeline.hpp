#ifndef AMORGS_PIPELINE_HPP
#define AMORGS_PIPELINE_HPP

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "amorgs/generative.hpp"
#include "amorgs/problem.hpp"
#include "amorgs/runtime.hpp"

namespace amorgs {

struct CurationConfig {
    std::vector<double> alpha_list;
    int samples_per_alpha = 100;
    /// Optional per-alpha sample counts (same length as alpha_list); overrides
    /// samples_per_alpha when non-empty.
    std::vector<int> per_alpha_counts;
    SolverConfig solver;
    std::uint64_t seed = 0;
    int worker_count = 1;

    int count_for(std::size_t alpha_index) const;
    std::size_t total_samples() const;
    void validate(const ProblemFamily& family) const;
};

enum class AblationMode {
    Uniform,
    CvaeTimeMassUniformControl,
    UniformTimeMassLstmControl,
    VanillaCvae,
    Amorgs,
};

AblationMode ablation_mode_from_string(const std::string& name);
std::string ablation_mode_name(AblationMode mode);
std::vector<AblationMode> all_ablation_modes();

/// The trained models a warm-start mode may draw on; only the ones a mode
/// actually uses need to be present.
struct ModelSet {
    const CvaeModel* cvae = nullptr;      // time-and-mass (or full x on De Jong)
    const LstmModel* lstm = nullptr;      // control sequence
    const CvaeModel* vanilla = nullptr;   // full-vector single-Gaussian baseline
};

/// Deterministic per-task seed: the same (master seed, alpha index, sample
/// index) triple yields the same stream regardless of scheduling.
std::uint64_t task_seed(std::uint64_t master, std::uint64_t alpha_index,
                        std::uint64_t sample_index);

/// Independent uniform draw per coordinate within the family box.
DecisionVector uniform_guess(const ProblemFamily& family, std::mt19937_64& rng);

/// One initial guess per the mode's mixture of samplers. Throws
/// std::invalid_argument when a required model is missing.
DecisionVector draw_guess(const FamilyRuntime& runtime, double alpha, AblationMode mode,
                          const ModelSet& models, std::mt19937_64& rng);

/// Multi-start curation: for each alpha, independent uniform guesses solved by
/// the family solver; every outcome recorded. When `persist_path` is set,
/// records append to the JSONL file as they complete (in task order) and an
/// interrupted run resumes from the persisted line count.
SolutionDataset curate(const FamilyRuntime& runtime, const CurationConfig& config,
                       const std::string& persist_path = "");

/// n mode-sampled guesses at one alpha, each solved; all outcomes recorded.
/// The dataset provenance carries the mode tag.
SolutionDataset warmstart(const FamilyRuntime& runtime, double alpha, AblationMode mode,
                          const ModelSet& models, int n, const SolverConfig& solver_cfg,
                          std::uint64_t seed, int worker_count = 1);

struct ModeStats {
    AblationMode mode = AblationMode::Uniform;
    int total = 0;
    int converged = 0;
    double converged_pct = 0.0;
    // solve-time statistics over converged runs only; NaN when none converged
    double time_mean = 0.0;
    double time_min = 0.0;
    double time_p25 = 0.0;
    double time_p50 = 0.0;
    /// Converged within the wall-clock cap, as a percentage of total.
    double capped_converged_pct = 0.0;
    std::vector<double> solve_times_converged;
    double mean_iterations_converged = 0.0;
};

struct BenchmarkReport {
    double alpha = 0.0;
    double time_cap_s = 0.0;
    std::vector<ModeStats> modes;
};

/// Quantile by linear interpolation on the sorted sample.
double quantile(std::vector<double> values, double p);

BenchmarkReport benchmark(const FamilyRuntime& runtime, double alpha,
                          const std::vector<AblationMode>& modes, const ModelSet& models, int n,
                          const SolverConfig& solver_cfg, double time_cap_s, std::uint64_t seed,
                          int worker_count = 1);

/// Training setup for the quality-filtered dataset. The LSTM block only
/// applies to families with a control sequence.
struct TrainSetup {
    CvaeSpec cvae_spec;
    Normalization cvae_norm;
    TrainConfig cvae_cfg;
    bool with_lstm = false;
    LstmSpec lstm_spec;
    Normalization cond_norm;
    double magnitude_max = 1.0;
    TrainConfig lstm_cfg;
    std::uint64_t init_seed = 1;
};

struct TrainedModels {
    CvaeModel cvae;
    std::optional<LstmModel> lstm;
    TrainHistory cvae_history;
    TrainHistory lstm_history;
};

/// filter_by_quality at beta, then train the CVAE (and LSTM when configured)
/// on the retained records. Throws std::invalid_argument naming beta when the
/// filtered set is empty.
TrainedModels beta_filter_and_train(const SolutionDataset& dataset, double beta,
                                    const TrainSetup& setup);

}  // namespace amorgs

#endif
