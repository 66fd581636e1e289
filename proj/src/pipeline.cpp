#include "amorgs/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace amorgs {

namespace {

std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Runs `task` for indices [first, total) on a bounded pool and hands results
/// to `sink` strictly in index order, so persistence and aggregation are
/// independent of scheduling.
void run_ordered(std::size_t first, std::size_t total, int workers,
                 const std::function<SolveRecord(std::size_t)>& task,
                 const std::function<void(std::size_t, const SolveRecord&)>& sink) {
    workers = std::max(1, workers);
    std::vector<std::optional<SolveRecord>> done(total >= first ? total - first : 0);
    std::atomic<std::size_t> next{first};
    std::mutex mu;
    std::size_t flushed = first;
    std::exception_ptr failure;

    auto work = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= total) return;
            try {
                SolveRecord rec = task(i);
                std::lock_guard<std::mutex> lk(mu);
                done[i - first] = std::move(rec);
                while (flushed < total && done[flushed - first]) {
                    sink(flushed, *done[flushed - first]);
                    done[flushed - first].reset();
                    ++flushed;
                }
            } catch (...) {
                std::lock_guard<std::mutex> lk(mu);
                if (!failure) failure = std::current_exception();
                next.store(total);
                return;
            }
        }
    };

    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

void clamp_to_bounds(DecisionVector& x, const Bounds& bounds) {
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::clamp(x[i], bounds.lo[i], bounds.hi[i]);
}

void require_model(const void* model, const char* which, AblationMode mode) {
    if (!model)
        throw std::invalid_argument("mode '" + ablation_mode_name(mode) + "' needs a " + which +
                                    " model");
}

}  // namespace

int CurationConfig::count_for(std::size_t alpha_index) const {
    if (!per_alpha_counts.empty()) return per_alpha_counts.at(alpha_index);
    return samples_per_alpha;
}

std::size_t CurationConfig::total_samples() const {
    std::size_t total = 0;
    for (std::size_t i = 0; i < alpha_list.size(); ++i) total += count_for(i);
    return total;
}

void CurationConfig::validate(const ProblemFamily& family) const {
    if (alpha_list.empty()) throw std::invalid_argument("curation: empty alpha list");
    if (samples_per_alpha < 1) throw std::invalid_argument("curation: samples_per_alpha < 1");
    if (!per_alpha_counts.empty() && per_alpha_counts.size() != alpha_list.size())
        throw std::invalid_argument("curation: per-alpha count list length mismatch");
    for (int c : per_alpha_counts)
        if (c < 1) throw std::invalid_argument("curation: per-alpha count < 1");
    for (double a : alpha_list)
        if (a < family.alpha_range[0] || a > family.alpha_range[1])
            throw std::invalid_argument("curation: alpha outside family range");
    solver.validate();
}

AblationMode ablation_mode_from_string(const std::string& name) {
    if (name == "uniform") return AblationMode::Uniform;
    if (name == "cvae-time-mass+uniform-control") return AblationMode::CvaeTimeMassUniformControl;
    if (name == "uniform-time-mass+lstm-control") return AblationMode::UniformTimeMassLstmControl;
    if (name == "vanilla-cvae") return AblationMode::VanillaCvae;
    if (name == "amorgs") return AblationMode::Amorgs;
    throw std::invalid_argument("unknown ablation mode: " + name);
}

std::string ablation_mode_name(AblationMode mode) {
    switch (mode) {
        case AblationMode::Uniform: return "uniform";
        case AblationMode::CvaeTimeMassUniformControl: return "cvae-time-mass+uniform-control";
        case AblationMode::UniformTimeMassLstmControl: return "uniform-time-mass+lstm-control";
        case AblationMode::VanillaCvae: return "vanilla-cvae";
        case AblationMode::Amorgs: return "amorgs";
    }
    throw std::invalid_argument("unknown ablation mode enum");
}

std::vector<AblationMode> all_ablation_modes() {
    return {AblationMode::Uniform, AblationMode::CvaeTimeMassUniformControl,
            AblationMode::UniformTimeMassLstmControl, AblationMode::VanillaCvae,
            AblationMode::Amorgs};
}

std::uint64_t task_seed(std::uint64_t master, std::uint64_t alpha_index,
                        std::uint64_t sample_index) {
    return splitmix64(splitmix64(splitmix64(master) ^ alpha_index) ^ sample_index);
}

DecisionVector uniform_guess(const ProblemFamily& family, std::mt19937_64& rng) {
    DecisionVector x(family.dimension);
    for (int i = 0; i < family.dimension; ++i) {
        std::uniform_real_distribution<double> dist(family.bounds.lo[i], family.bounds.hi[i]);
        x[i] = dist(rng);
    }
    return x;
}

DecisionVector draw_guess(const FamilyRuntime& runtime, double alpha, AblationMode mode,
                          const ModelSet& models, std::mt19937_64& rng) {
    const ProblemFamily& family = runtime.family;
    const int dim = family.dimension;
    DecisionVector x;

    auto uniform_tail = [&](DecisionVector head) {
        DecisionVector full = uniform_guess(family, rng);
        std::copy(head.begin(), head.end(), full.begin());
        return full;
    };
    auto cvae_head = [&](const CvaeModel& model) {
        if (model.spec.x_dim > dim)
            throw std::invalid_argument("cvae dimension exceeds family dimension");
        const Eigen::VectorXd s = sample_cvae(model, alpha, 1, rng).front();
        return DecisionVector(s.data(), s.data() + s.size());
    };
    auto fill_controls = [&](DecisionVector full) {
        if (dim < 4 || (dim - 4) % 3 != 0)
            throw std::invalid_argument("family has no control block for the LSTM");
        const Eigen::Vector4d tm{full[0], full[1], full[2], full[3]};
        const auto controls = lstm_forward(*models.lstm, tm, alpha);
        if (static_cast<int>(controls.size()) * 3 != dim - 4)
            throw std::invalid_argument("lstm sequence length does not match the family");
        for (std::size_t s = 0; s < controls.size(); ++s)
            for (int k = 0; k < 3; ++k) full[4 + 3 * s + k] = controls[s][k];
        return full;
    };

    switch (mode) {
        case AblationMode::Uniform:
            x = uniform_guess(family, rng);
            break;
        case AblationMode::CvaeTimeMassUniformControl:
            require_model(models.cvae, "cvae", mode);
            x = uniform_tail(cvae_head(*models.cvae));
            break;
        case AblationMode::UniformTimeMassLstmControl:
            require_model(models.lstm, "lstm", mode);
            x = fill_controls(uniform_guess(family, rng));
            break;
        case AblationMode::VanillaCvae:
            require_model(models.vanilla, "vanilla-cvae", mode);
            if (models.vanilla->spec.x_dim != dim)
                throw std::invalid_argument("vanilla-cvae must model the full decision vector");
            x = cvae_head(*models.vanilla);
            break;
        case AblationMode::Amorgs: {
            require_model(models.cvae, "cvae", mode);
            DecisionVector head = cvae_head(*models.cvae);
            if (static_cast<int>(head.size()) == dim) {
                x = std::move(head);
            } else {
                require_model(models.lstm, "lstm", mode);
                x = fill_controls(uniform_tail(std::move(head)));
            }
            break;
        }
    }
    clamp_to_bounds(x, family.bounds);
    return x;
}

SolutionDataset curate(const FamilyRuntime& runtime, const CurationConfig& config,
                       const std::string& persist_path) {
    config.validate(runtime.family);

    // Global task index -> (alpha index, sample index) via prefix sums.
    std::vector<std::size_t> prefix{0};
    for (std::size_t a = 0; a < config.alpha_list.size(); ++a)
        prefix.push_back(prefix.back() + static_cast<std::size_t>(config.count_for(a)));
    const std::size_t total = prefix.back();

    SolutionDataset dataset;
    dataset.family = runtime.family.name;
    {
        std::ostringstream prov;
        prov << "curate family=" << runtime.family.name << " seed=" << config.seed
             << " alphas=" << config.alpha_list.size() << " total=" << total;
        dataset.provenance = prov.str();
    }

    std::size_t skip = 0;
    std::ofstream out;
    if (!persist_path.empty()) {
        if (std::filesystem::exists(persist_path)) {
            // keep only complete lines: a torn final line (interrupted write)
            // is dropped and its record recomputed
            std::string kept;
            {
                std::ifstream in(persist_path);
                std::string line;
                while (std::getline(in, line)) {
                    if (in.eof() && !line.empty()) break;
                    if (line.empty()) continue;
                    dataset.records.push_back(record_from_json_line(line));
                    kept += line;
                    kept += '\n';
                }
            }
            skip = dataset.records.size();
            if (skip > total) throw std::invalid_argument("curate: persisted file larger than run");
            std::ofstream rewrite(persist_path, std::ios::trunc);
            rewrite << kept;
        }
        out.open(persist_path, std::ios::app);
        if (!out) throw std::runtime_error("curate: cannot open " + persist_path);
    }

    auto task = [&](std::size_t g) {
        const auto it = std::upper_bound(prefix.begin(), prefix.end(), g);
        const std::size_t ai = static_cast<std::size_t>(it - prefix.begin()) - 1;
        const std::size_t si = g - prefix[ai];
        std::mt19937_64 rng(task_seed(config.seed, ai, si));
        const DecisionVector x0 = uniform_guess(runtime.family, rng);
        return runtime.solve(config.alpha_list[ai], x0, config.solver);
    };
    auto sink = [&](std::size_t, const SolveRecord& rec) {
        if (out.is_open()) {
            append_jsonl(rec, out);
            out.flush();
        }
        dataset.records.push_back(rec);
    };
    run_ordered(skip, total, config.worker_count, task, sink);
    return dataset;
}

SolutionDataset warmstart(const FamilyRuntime& runtime, double alpha, AblationMode mode,
                          const ModelSet& models, int n, const SolverConfig& solver_cfg,
                          std::uint64_t seed, int worker_count) {
    if (n < 1) throw std::invalid_argument("warmstart: n < 1");
    solver_cfg.validate();
    // Surface missing-model errors before any solve starts.
    {
        std::mt19937_64 probe(task_seed(seed, 0, 0));
        (void)draw_guess(runtime, alpha, mode, models, probe);
    }

    SolutionDataset dataset;
    dataset.family = runtime.family.name;
    {
        std::ostringstream prov;
        prov << "warmstart mode=" << ablation_mode_name(mode) << " alpha=" << alpha
             << " seed=" << seed << " n=" << n;
        dataset.provenance = prov.str();
    }

    auto task = [&](std::size_t i) {
        std::mt19937_64 rng(task_seed(seed, 0, i));
        const DecisionVector x0 = draw_guess(runtime, alpha, mode, models, rng);
        return runtime.solve(alpha, x0, solver_cfg);
    };
    auto sink = [&](std::size_t, const SolveRecord& rec) { dataset.records.push_back(rec); };
    run_ordered(0, static_cast<std::size_t>(n), worker_count, task, sink);
    return dataset;
}

double quantile(std::vector<double> values, double p) {
    if (values.empty()) throw std::invalid_argument("quantile: empty sample");
    if (p < 0.0 || p > 1.0) throw std::invalid_argument("quantile: p outside [0, 1]");
    std::sort(values.begin(), values.end());
    const double pos = p * static_cast<double>(values.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = static_cast<std::size_t>(std::ceil(pos));
    const double w = pos - static_cast<double>(lo);
    return (1.0 - w) * values[lo] + w * values[hi];
}

BenchmarkReport benchmark(const FamilyRuntime& runtime, double alpha,
                          const std::vector<AblationMode>& modes, const ModelSet& models, int n,
                          const SolverConfig& solver_cfg, double time_cap_s, std::uint64_t seed,
                          int worker_count) {
    if (n < 1) throw std::invalid_argument("benchmark: n < 1");
    BenchmarkReport report;
    report.alpha = alpha;
    report.time_cap_s = time_cap_s;
    for (std::size_t m = 0; m < modes.size(); ++m) {
        const SolutionDataset ds = warmstart(runtime, alpha, modes[m], models, n, solver_cfg,
                                             task_seed(seed, m + 1, 0), worker_count);
        ModeStats stats;
        stats.mode = modes[m];
        stats.total = n;
        double iter_sum = 0.0;
        int capped = 0;
        for (const SolveRecord& rec : ds.records) {
            if (!rec.converged) continue;
            ++stats.converged;
            iter_sum += rec.iterations;
            stats.solve_times_converged.push_back(rec.wall_time_s);
            if (rec.wall_time_s <= time_cap_s) ++capped;
        }
        stats.converged_pct = 100.0 * stats.converged / n;
        stats.capped_converged_pct = 100.0 * capped / n;
        if (stats.converged > 0) {
            stats.time_mean = std::accumulate(stats.solve_times_converged.begin(),
                                              stats.solve_times_converged.end(), 0.0) /
                              stats.converged;
            stats.time_min = *std::min_element(stats.solve_times_converged.begin(),
                                               stats.solve_times_converged.end());
            stats.time_p25 = quantile(stats.solve_times_converged, 0.25);
            stats.time_p50 = quantile(stats.solve_times_converged, 0.50);
            stats.mean_iterations_converged = iter_sum / stats.converged;
        } else {
            const double nan = std::numeric_limits<double>::quiet_NaN();
            stats.time_mean = stats.time_min = stats.time_p25 = stats.time_p50 = nan;
            stats.mean_iterations_converged = nan;
        }
        report.modes.push_back(std::move(stats));
    }
    return report;
}

TrainedModels beta_filter_and_train(const SolutionDataset& dataset, double beta,
                                    const TrainSetup& setup) {
    const SolutionDataset filtered = filter_by_quality(dataset, beta);
    if (filtered.empty()) {
        std::ostringstream msg;
        msg << "beta filter retained no records at beta = " << beta;
        throw std::invalid_argument(msg.str());
    }

    TrainedModels out;
    out.cvae.spec = setup.cvae_spec;
    out.cvae.norm = setup.cvae_norm;
    out.cvae.init(setup.init_seed);

    const int x_dim = setup.cvae_spec.x_dim;
    std::vector<CvaeSample> cvae_data;
    cvae_data.reserve(filtered.size());
    for (const SolveRecord& rec : filtered.records) {
        if (static_cast<int>(rec.x_star.size()) < x_dim)
            throw std::invalid_argument("beta_filter_and_train: record narrower than x_dim");
        CvaeSample s;
        s.x = Eigen::Map<const Eigen::VectorXd>(rec.x_star.data(), x_dim);
        s.alpha = rec.alpha;
        cvae_data.push_back(std::move(s));
    }
    out.cvae_history = train_cvae(out.cvae, cvae_data, setup.cvae_cfg);

    if (setup.with_lstm) {
        LstmModel lstm;
        lstm.spec = setup.lstm_spec;
        lstm.cond_norm = setup.cond_norm;
        lstm.magnitude_max = setup.magnitude_max;
        lstm.init(setup.init_seed + 1);
        const int n = lstm.spec.seq_len;
        std::vector<LstmSample> lstm_data;
        lstm_data.reserve(filtered.size());
        for (const SolveRecord& rec : filtered.records) {
            if (static_cast<int>(rec.x_star.size()) != 4 + 3 * n)
                throw std::invalid_argument("beta_filter_and_train: record has no control block");
            LstmSample s;
            s.time_mass = Eigen::Map<const Eigen::Vector4d>(rec.x_star.data());
            s.alpha = rec.alpha;
            s.controls.resize(n);
            for (int k = 0; k < n; ++k)
                s.controls[k] = {rec.x_star[4 + 3 * k], rec.x_star[5 + 3 * k],
                                 rec.x_star[6 + 3 * k]};
            lstm_data.push_back(std::move(s));
        }
        out.lstm_history = train_lstm(lstm, lstm_data, setup.lstm_cfg);
        out.lstm = std::move(lstm);
    }
    return out;
}

}  // namespace amorgs
