#ifndef AMORGS_CONFIG_HPP
#define AMORGS_CONFIG_HPP

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "amorgs/generative.hpp"
#include "amorgs/pipeline.hpp"
#include "amorgs/runtime.hpp"

namespace amorgs {

/// Everything a run needs, parsed from a JSON file or the equivalent
/// TOML-style sections-and-keys file; validated before any work starts.
struct RunConfig {
    std::string family;  // "dejong" | "cr3bp"
    std::uint64_t seed = 0;
    std::string out_dir = "out";
    int workers = 0;  // 0 = AMORGS_WORKERS env or hardware concurrency

    // curation block
    std::vector<double> alpha_list;
    int samples_per_alpha = 100;
    std::vector<int> per_alpha_counts;

    SolverConfig solver;
    double beta = 0.0;

    // training block
    TrainConfig cvae_train;
    TrainConfig lstm_train;
    bool paper_architecture = false;
    std::uint64_t model_init_seed = 1;

    // benchmark block
    int bench_n = 200;
    double time_cap_s = 0.0;  // 0 = uncapped
    std::vector<std::string> bench_modes;
    std::vector<double> bench_alphas;

    // analysis block
    double bin_width = 0.25;
    double delta = 0.25;
    int min_count = 0;  // 0 = auto
    std::vector<double> ma_windows{1.0, 0.5, 0.25, 0.05, 0.01};
    double funnel_eps = 1.0;
    int funnel_min_pts = 5;

    // cr3bp block
    SystemConstants constants;
    BoundaryConditions boundary;
    ShootingFamilyConfig shooting;

    void validate() const;
    /// Worker count after env/hardware resolution.
    int resolve_workers() const;
};

/// Minimal TOML-style reader (sections, scalars, flat arrays) producing the
/// same document shape as the JSON form.
nlohmann::json toml_subset_to_json(const std::string& text);

RunConfig run_config_from_json(const nlohmann::json& j);
/// Dispatches on content: files starting with '{' parse as JSON, anything
/// else as the TOML subset.
RunConfig load_run_config(const std::string& path);

FamilyRuntime build_runtime(const RunConfig& config);
CurationConfig build_curation(const RunConfig& config);
TrainSetup build_train_setup(const RunConfig& config);
/// Architecture for the vanilla-cvae ablation baseline over the full vector.
CvaeSpec build_vanilla_spec(const RunConfig& config);
Normalization full_vector_normalization(const RunConfig& config);

/// FNV-1a 64-bit digest of a byte string, hex encoded (provenance sidecars).
std::string fnv1a_hex(const std::string& bytes);
std::string file_digest(const std::string& path);

}  // namespace amorgs

#endif
