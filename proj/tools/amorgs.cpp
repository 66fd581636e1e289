#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "amorgs/analysis.hpp"
#include "amorgs/config.hpp"
#include "amorgs/nn/checkpoint.hpp"
#include "amorgs/pipeline.hpp"

namespace fs = std::filesystem;
using namespace amorgs;

namespace {

constexpr const char* kToolVersion = "1.0.0";

// exit codes: 0 success, 2 config error, 3 data error, 4 model-compatibility
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ModelError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CommonArgs {
    std::string config_path;
    std::string out_override;
    std::optional<std::uint64_t> seed_override;
    int workers_override = 0;
    bool paper_architecture = false;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "run configuration file (JSON or key/value sections)")
        ->required();
    cmd->add_option("--out", args.out_override, "output directory (overrides config)");
    cmd->add_option("--seed", args.seed_override, "master seed (overrides config)");
    cmd->add_option("--workers", args.workers_override,
                    "worker pool size (overrides config and AMORGS_WORKERS)");
    cmd->add_flag("--paper-architecture", args.paper_architecture,
                  "use the full-width network tables instead of the 4x-reduced desk scale");
}

RunConfig load_config(const CommonArgs& args) {
    RunConfig cfg = load_run_config(args.config_path);
    if (!args.out_override.empty()) cfg.out_dir = args.out_override;
    if (args.seed_override) cfg.seed = *args.seed_override;
    if (args.workers_override > 0) cfg.workers = args.workers_override;
    if (args.paper_architecture) cfg.paper_architecture = true;
    fs::create_directories(cfg.out_dir);
    return cfg;
}

void write_sidecar(const std::string& artifact_path, const CommonArgs& args, const RunConfig& cfg,
                   const std::string& command, const nlohmann::json& inputs) {
    nlohmann::json side{{"tool_version", kToolVersion},
                        {"command", command},
                        {"config_digest", file_digest(args.config_path)},
                        {"seed", cfg.seed},
                        {"inputs", inputs}};
    std::ofstream out(artifact_path + ".provenance.json");
    out << side.dump(2) << "\n";
}

SolutionDataset load_dataset(const std::string& path) {
    if (!fs::exists(path)) throw DataError("dataset not found: " + path);
    SolutionDataset ds = load_jsonl(path);
    if (ds.empty()) throw DataError("dataset is empty: " + path);
    return ds;
}

nlohmann::json load_checkpoint_file(const std::string& path) {
    if (!fs::exists(path)) throw ModelError("checkpoint not found: " + path);
    return nn::read_checkpoint(path);
}

void check_family(const nlohmann::json& ckpt, const RunConfig& cfg) {
    const auto& meta = ckpt.at("training_metadata");
    if (meta.contains("family") && meta.at("family").get<std::string>() != cfg.family)
        throw ModelError("checkpoint family '" + meta.at("family").get<std::string>() +
                         "' does not match configured family '" + cfg.family + "'");
}

int cmd_curate(const CommonArgs& args) {
    const RunConfig cfg = load_config(args);
    const FamilyRuntime runtime = build_runtime(cfg);
    CurationConfig cu = build_curation(cfg);
    const std::string path = cfg.out_dir + "/dataset.jsonl";
    const SolutionDataset ds = curate(runtime, cu, path);
    write_sidecar(path, args, cfg, "curate", {{"records", ds.size()}});
    std::cout << "curated " << ds.size() << " records -> " << path << "\n";
    return 0;
}

int cmd_filter(const CommonArgs& args, const std::string& data_path) {
    const RunConfig cfg = load_config(args);
    const std::string in_path = data_path.empty() ? cfg.out_dir + "/dataset.jsonl" : data_path;
    const SolutionDataset ds = load_dataset(in_path);
    SolutionDataset kept = filter_by_quality(ds, cfg.beta);
    const std::string path = cfg.out_dir + "/filtered.jsonl";
    save_jsonl(kept, path);
    write_sidecar(path, args, cfg, "filter",
                  {{"dataset", file_digest(in_path)}, {"beta", cfg.beta}, {"kept", kept.size()}});
    std::cout << "kept " << kept.size() << " / " << ds.size() << " records at beta = " << cfg.beta
              << " -> " << path << "\n";
    return 0;
}

int cmd_train(const CommonArgs& args, const std::string& data_path, bool with_vanilla) {
    const RunConfig cfg = load_config(args);
    const std::string in_path = data_path.empty() ? cfg.out_dir + "/dataset.jsonl" : data_path;
    const SolutionDataset ds = load_dataset(in_path);
    const TrainSetup setup = build_train_setup(cfg);

    TrainedModels models;
    try {
        models = beta_filter_and_train(ds, cfg.beta, setup);
    } catch (const std::invalid_argument& e) {
        throw DataError(e.what());
    }
    const nlohmann::json meta{{"family", cfg.family},
                              {"beta", cfg.beta},
                              {"dataset_digest", file_digest(in_path)},
                              {"dataset_provenance", ds.provenance},
                              {"final_loss", models.cvae_history.loss_per_epoch.back()}};
    const std::string cvae_path = cfg.out_dir + "/cvae.json";
    nn::write_checkpoint(models.cvae.checkpoint(meta), cvae_path);
    write_sidecar(cvae_path, args, cfg, "train", {{"dataset", file_digest(in_path)}});
    std::cout << "cvae checkpoint -> " << cvae_path << "\n";
    if (models.lstm) {
        nlohmann::json lmeta = meta;
        lmeta["final_loss"] = models.lstm_history.loss_per_epoch.back();
        const std::string lstm_path = cfg.out_dir + "/lstm.json";
        nn::write_checkpoint(models.lstm->checkpoint(lmeta), lstm_path);
        write_sidecar(lstm_path, args, cfg, "train", {{"dataset", file_digest(in_path)}});
        std::cout << "lstm checkpoint -> " << lstm_path << "\n";
    }

    const bool need_vanilla =
        with_vanilla || std::count(cfg.bench_modes.begin(), cfg.bench_modes.end(), "vanilla-cvae");
    if (need_vanilla) {
        const SolutionDataset kept = filter_by_quality(ds, cfg.beta);
        CvaeModel vanilla;
        vanilla.spec = build_vanilla_spec(cfg);
        vanilla.norm = full_vector_normalization(cfg);
        vanilla.init(cfg.model_init_seed + 2);
        std::vector<CvaeSample> rows;
        for (const SolveRecord& rec : kept.records)
            rows.push_back({Eigen::Map<const Eigen::VectorXd>(
                                rec.x_star.data(), static_cast<Eigen::Index>(rec.x_star.size())),
                            rec.alpha});
        const TrainHistory h = train_cvae(vanilla, rows, cfg.cvae_train);
        nlohmann::json vmeta = meta;
        vmeta["final_loss"] = h.loss_per_epoch.back();
        const std::string vpath = cfg.out_dir + "/vanilla.json";
        nn::write_checkpoint(vanilla.checkpoint(vmeta), vpath);
        write_sidecar(vpath, args, cfg, "train", {{"dataset", file_digest(in_path)}});
        std::cout << "vanilla checkpoint -> " << vpath << "\n";
    }
    return 0;
}

struct LoadedModels {
    std::optional<CvaeModel> cvae;
    std::optional<LstmModel> lstm;
    std::optional<CvaeModel> vanilla;

    ModelSet set() const {
        ModelSet m;
        if (cvae) m.cvae = &*cvae;
        if (lstm) m.lstm = &*lstm;
        if (vanilla) m.vanilla = &*vanilla;
        return m;
    }
};

LoadedModels load_models(const RunConfig& cfg) {
    LoadedModels m;
    const std::string cvae_path = cfg.out_dir + "/cvae.json";
    const std::string lstm_path = cfg.out_dir + "/lstm.json";
    const std::string vanilla_path = cfg.out_dir + "/vanilla.json";
    if (fs::exists(cvae_path)) {
        const nlohmann::json j = load_checkpoint_file(cvae_path);
        check_family(j, cfg);
        m.cvae = CvaeModel::from_checkpoint(j);
    }
    if (fs::exists(lstm_path)) {
        const nlohmann::json j = load_checkpoint_file(lstm_path);
        check_family(j, cfg);
        m.lstm = LstmModel::from_checkpoint(j);
    }
    if (fs::exists(vanilla_path)) {
        const nlohmann::json j = load_checkpoint_file(vanilla_path);
        check_family(j, cfg);
        m.vanilla = CvaeModel::from_checkpoint(j);
    }
    return m;
}

std::vector<AblationMode> resolve_modes(const RunConfig& cfg, const std::string& cli_modes) {
    std::vector<std::string> names = cfg.bench_modes;
    if (!cli_modes.empty()) {
        names.clear();
        std::istringstream ss(cli_modes);
        std::string item;
        while (std::getline(ss, item, ',')) names.push_back(item);
    }
    std::vector<AblationMode> modes;
    if (names.empty()) return all_ablation_modes();
    for (const std::string& n : names) modes.push_back(ablation_mode_from_string(n));
    return modes;
}

std::string csv_escape(double v) {
    std::ostringstream out;
    out.precision(17);
    out << v;
    return out.str();
}

int cmd_sample(const CommonArgs& args, double alpha, int n) {
    const RunConfig cfg = load_config(args);
    const LoadedModels models = load_models(cfg);
    if (!models.cvae) throw ModelError("sample: no cvae checkpoint in " + cfg.out_dir);
    std::mt19937_64 rng(cfg.seed);
    const auto samples = sample_cvae(*models.cvae, alpha, n, rng);
    const std::string path = cfg.out_dir + "/samples.csv";
    std::ofstream out(path);
    for (const Eigen::VectorXd& s : samples) {
        Eigen::VectorXd full = s;
        std::vector<std::array<double, 3>> controls;
        if (models.lstm && cfg.family == "cr3bp")
            controls = lstm_forward(*models.lstm, s.head<4>(), alpha);
        for (int i = 0; i < full.size(); ++i) out << (i ? "," : "") << csv_escape(full[i]);
        for (const auto& c : controls) out << "," << csv_escape(c[0]) << "," << csv_escape(c[1])
                                           << "," << csv_escape(c[2]);
        out << "\n";
    }
    write_sidecar(path, args, cfg, "sample", {{"alpha", alpha}, {"n", n}});
    std::cout << n << " samples at alpha = " << alpha << " -> " << path << "\n";
    return 0;
}

double effective_cap(const RunConfig& cfg, double cli_cap) {
    const double cap = cli_cap > 0.0 ? cli_cap : cfg.time_cap_s;
    return cap > 0.0 ? cap : std::numeric_limits<double>::infinity();
}

int cmd_warmstart(const CommonArgs& args, const std::string& cli_modes, double cli_alpha, int cli_n) {
    const RunConfig cfg = load_config(args);
    const FamilyRuntime runtime = build_runtime(cfg);
    const LoadedModels models = load_models(cfg);
    const std::vector<AblationMode> modes = resolve_modes(cfg, cli_modes);
    std::vector<double> alphas = cfg.bench_alphas;
    if (cli_alpha >= 0.0) alphas = {cli_alpha};
    if (alphas.empty()) throw DataError("warmstart: no alpha given (benchmark.alphas or --alpha)");
    const int n = cli_n > 0 ? cli_n : cfg.bench_n;

    for (double alpha : alphas) {
        for (AblationMode mode : modes) {
            SolutionDataset ds;
            try {
                ds = warmstart(runtime, alpha, mode, models.set(), n, cfg.solver,
                               task_seed(cfg.seed, 97, static_cast<std::uint64_t>(mode)),
                               cfg.resolve_workers());
            } catch (const std::invalid_argument& e) {
                throw ModelError(e.what());
            }
            std::ostringstream name;
            name << cfg.out_dir << "/warmstart_" << ablation_mode_name(mode) << "_alpha" << alpha
                 << ".jsonl";
            save_jsonl(ds, name.str());
            write_sidecar(name.str(), args, cfg, "warmstart",
                          {{"alpha", alpha}, {"mode", ablation_mode_name(mode)}, {"n", n}});
            int converged = 0;
            for (const auto& r : ds.records) converged += r.converged;
            std::cout << ablation_mode_name(mode) << " alpha=" << alpha << ": " << converged << "/"
                      << n << " converged -> " << name.str() << "\n";
        }
    }
    return 0;
}

int cmd_bench(const CommonArgs& args, const std::string& cli_modes, double cli_alpha, int cli_n,
              double cli_cap) {
    const RunConfig cfg = load_config(args);
    const FamilyRuntime runtime = build_runtime(cfg);
    const LoadedModels models = load_models(cfg);
    const std::vector<AblationMode> modes = resolve_modes(cfg, cli_modes);
    std::vector<double> alphas = cfg.bench_alphas;
    if (cli_alpha >= 0.0) alphas = {cli_alpha};
    if (alphas.empty()) throw DataError("bench: no alpha given (benchmark.alphas or --alpha)");
    const int n = cli_n > 0 ? cli_n : cfg.bench_n;
    const double cap = effective_cap(cfg, cli_cap);

    for (double alpha : alphas) {
        BenchmarkReport report;
        try {
            report = benchmark(runtime, alpha, modes, models.set(), n, cfg.solver, cap, cfg.seed,
                               cfg.resolve_workers());
        } catch (const std::invalid_argument& e) {
            throw ModelError(e.what());
        }
        std::ostringstream name;
        name << cfg.out_dir << "/bench_alpha" << alpha << ".csv";
        std::ofstream out(name.str());
        out << "mode,statistic,value\n";
        for (const ModeStats& s : report.modes) {
            const std::string m = ablation_mode_name(s.mode);
            out << m << ",converged_pct," << csv_escape(s.converged_pct) << "\n";
            out << m << ",time_mean_s," << csv_escape(s.time_mean) << "\n";
            out << m << ",time_min_s," << csv_escape(s.time_min) << "\n";
            out << m << ",time_p25_s," << csv_escape(s.time_p25) << "\n";
            out << m << ",time_p50_s," << csv_escape(s.time_p50) << "\n";
            out << m << ",capped_converged_pct," << csv_escape(s.capped_converged_pct) << "\n";
            out << m << ",mean_major_iterations," << csv_escape(s.mean_iterations_converged)
                << "\n";
        }
        write_sidecar(name.str(), args, cfg, "bench",
                      {{"alpha", alpha}, {"n", n}, {"time_cap_s", cap}});
        std::cout << "benchmark alpha=" << alpha << " -> " << name.str() << "\n";
    }
    return 0;
}

int cmd_analyze(const CommonArgs& args, const std::string& data_path) {
    const RunConfig cfg = load_config(args);
    const std::string in_path = data_path.empty() ? cfg.out_dir + "/dataset.jsonl" : data_path;
    const SolutionDataset ds = load_dataset(in_path);

    std::vector<double> tofs, objectives;
    std::vector<ShootingVector> vectors;
    try {
        for (const SolveRecord& rec : ds.records) {
            if (!rec.converged) continue;
            const ShootingVector x = ShootingVector::unflatten(Eigen::Map<const Eigen::VectorXd>(
                rec.x_star.data(), static_cast<Eigen::Index>(rec.x_star.size())));
            vectors.push_back(x);
            tofs.push_back(time_of_flight(x));
            objectives.push_back(rec.objective);
        }
    } catch (const std::invalid_argument& e) {
        throw DataError(std::string("analyze: dataset has no shooting layout: ") + e.what());
    }
    if (tofs.empty()) throw DataError("analyze: no converged records in " + in_path);

    const int min_count = cfg.min_count > 0 ? cfg.min_count : default_mode_min_count(tofs.size());
    const std::vector<double> modes = detect_modes(tofs, cfg.bin_width, min_count);
    {
        std::ofstream out(cfg.out_dir + "/modes.csv");
        out << "mode_tof_TU\n";
        for (double t : modes) out << csv_escape(t) << "\n";
    }
    {
        std::ofstream out(cfg.out_dir + "/hyperplane_coords.csv");
        out << "tau1_prime,tau2_prime,tau_normal,nearest_mode_T,member\n";
        for (const ShootingVector& x : vectors) {
            const Eigen::Vector3d tau{x.tau_s, x.tau_i, x.tau_f};
            HyperplaneFrame frame{modes.empty() ? tau.sum() : 0.0, cfg.delta};
            if (!modes.empty()) frame = nearest_frame(modes, tau, cfg.delta);
            const Eigen::Vector3d p = to_hyperplane_coords(tau, frame);
            out << csv_escape(p[0]) << "," << csv_escape(p[1]) << "," << csv_escape(p[2]) << ","
                << csv_escape(frame.T) << "," << (hyperplane_membership(tau, frame) ? 1 : 0)
                << "\n";
        }
    }
    for (double window : cfg.ma_windows) {
        const auto curve = moving_average(tofs, objectives, window);
        std::ostringstream name;
        name << cfg.out_dir << "/moving_average_w" << window << ".csv";
        std::ofstream out(name.str());
        out << "tof_center_TU,mean_objective\n";
        for (const auto& [c, v] : curve) out << csv_escape(c) << "," << csv_escape(v) << "\n";
    }
    {
        std::vector<Eigen::Vector2d> points;
        for (const ShootingVector& x : vectors) {
            const Eigen::Vector3d tau{x.tau_s, x.tau_i, x.tau_f};
            const Eigen::Vector3d p = to_hyperplane_coords(tau, HyperplaneFrame{0.0, cfg.delta});
            points.emplace_back(p[0], p[1]);
        }
        const FunnelLabeling labels = funnel_cluster(points, cfg.funnel_eps, cfg.funnel_min_pts);
        std::ofstream out(cfg.out_dir + "/funnels.csv");
        out << "tau1_prime,tau2_prime,funnel\n";
        for (std::size_t i = 0; i < points.size(); ++i)
            out << csv_escape(points[i].x()) << "," << csv_escape(points[i].y()) << ","
                << labels.labels[i] << "\n";
    }
    if (vectors.size() >= 2) {
        const ControlStatistics stats = control_statistics(vectors);
        std::ofstream out(cfg.out_dir + "/control_stats.csv");
        out << "segment,axis,mean_N,ci95_half_width_N\n";
        for (int s = 0; s < stats.mean.cols(); ++s)
            for (int a = 0; a < 3; ++a)
                out << s << "," << "xyz"[a] << "," << csv_escape(stats.mean(a, s)) << ","
                    << csv_escape(stats.ci_half_width(a, s)) << "\n";
    }
    write_sidecar(cfg.out_dir + "/modes.csv", args, cfg, "analyze",
                  {{"dataset", file_digest(in_path)}});
    std::cout << "analysis artifacts -> " << cfg.out_dir << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"amortized global search: curation, generative warm-start, benchmark, analysis"};
    app.require_subcommand(1);

    CommonArgs curate_args, filter_args, train_args, sample_args, warm_args, bench_args,
        analyze_args;
    std::string filter_data, train_data, analyze_data, warm_modes, bench_modes;
    bool train_vanilla = false;
    double sample_alpha = 0.0, warm_alpha = -1.0, bench_alpha = -1.0, bench_cap = 0.0;
    int sample_n = 1000, warm_n = 0, bench_n = 0;

    auto* curate = app.add_subcommand("curate", "multi-start data curation into JSONL");
    add_common(curate, curate_args);

    auto* filter = app.add_subcommand("filter", "quality filter at the configured beta");
    add_common(filter, filter_args);
    filter->add_option("--data", filter_data, "dataset path (default <out>/dataset.jsonl)");

    auto* train = app.add_subcommand("train", "train the generative models on filtered data");
    add_common(train, train_args);
    train->add_option("--data", train_data, "dataset path (default <out>/dataset.jsonl)");
    train->add_flag("--vanilla", train_vanilla, "also train the full-vector single-Gaussian baseline");

    auto* sample = app.add_subcommand("sample", "draw decision-vector samples at one alpha");
    add_common(sample, sample_args);
    sample->add_option("--alpha", sample_alpha, "conditioning parameter")->required();
    sample->add_option("--n", sample_n, "sample count (default 1000)");

    auto* warm = app.add_subcommand("warmstart", "mode-seeded solves at held-out alphas");
    add_common(warm, warm_args);
    warm->add_option("--modes", warm_modes, "comma-separated mode list (default all five)");
    warm->add_option("--alpha", warm_alpha, "single alpha (overrides benchmark.alphas)");
    warm->add_option("--n", warm_n, "guesses per mode (default benchmark n, 200)");

    auto* bench = app.add_subcommand("bench", "five-way ablation benchmark with CSV report");
    add_common(bench, bench_args);
    bench->add_option("--modes", bench_modes, "comma-separated mode list (default all five)");
    bench->add_option("--alpha", bench_alpha, "single alpha (overrides benchmark.alphas)");
    bench->add_option("--n", bench_n, "guesses per mode (default benchmark n, 200)");
    bench->add_option("--time-cap-s", bench_cap, "wall-clock cap for the capped percentage");

    auto* analyze = app.add_subcommand("analyze", "modes, hyperplanes, funnels, control stats");
    add_common(analyze, analyze_args);
    analyze->add_option("--data", analyze_data, "dataset path (default <out>/dataset.jsonl)");

    try {
        app.parse(argc, argv);
        if (curate->parsed()) return cmd_curate(curate_args);
        if (filter->parsed()) return cmd_filter(filter_args, filter_data);
        if (train->parsed()) return cmd_train(train_args, train_data, train_vanilla);
        if (sample->parsed()) return cmd_sample(sample_args, sample_alpha, sample_n);
        if (warm->parsed()) return cmd_warmstart(warm_args, warm_modes, warm_alpha, warm_n);
        if (bench->parsed()) return cmd_bench(bench_args, bench_modes, bench_alpha, bench_n,
                                              bench_cap);
        if (analyze->parsed()) return cmd_analyze(analyze_args, analyze_data);
        return 2;
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const ModelError& e) {
        std::cerr << "model error: " << e.what() << "\n";
        return 4;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
