#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "amorgs/pipeline.hpp"
#include "amorgs/runtime.hpp"

using namespace amorgs;

namespace {

CurationConfig small_curation() {
    CurationConfig cfg;
    cfg.alpha_list = {0.0, 0.5};
    cfg.samples_per_alpha = 12;
    cfg.solver.optimality_tol = 1e-6;
    cfg.solver.max_major_iterations = 200;
    cfg.seed = 42;
    return cfg;
}

CvaeModel trained_dejong_cvae(const FamilyRuntime& rt, const SolutionDataset& data) {
    TrainSetup setup;
    setup.cvae_spec = CvaeSpec::dejong();
    setup.cvae_norm.lo = rt.family.bounds.lo;
    setup.cvae_norm.hi = rt.family.bounds.hi;
    setup.cvae_cfg.epochs = 5;
    setup.cvae_cfg.batch_size = 16;
    setup.cvae_cfg.seed = 3;
    setup.init_seed = 1;
    return beta_filter_and_train(data, 10.0, setup).cvae;
}

}  // namespace

TEST_CASE("ablation mode names round trip") {
    for (const AblationMode m : all_ablation_modes()) {
        CHECK(ablation_mode_from_string(ablation_mode_name(m)) == m);
    }
    CHECK(ablation_mode_from_string("amorgs") == AblationMode::Amorgs);
    CHECK(ablation_mode_from_string("cvae-time-mass+uniform-control") ==
          AblationMode::CvaeTimeMassUniformControl);
    CHECK_THROWS_AS(ablation_mode_from_string("random"), std::invalid_argument);
    CHECK(all_ablation_modes().size() == 5);
}

TEST_CASE("task seeds separate alpha and sample indices") {
    const std::uint64_t base = task_seed(7, 0, 0);
    CHECK(task_seed(7, 0, 0) == base);
    CHECK(task_seed(7, 0, 1) != base);
    CHECK(task_seed(7, 1, 0) != base);
    CHECK(task_seed(8, 0, 0) != base);
    CHECK(task_seed(7, 1, 0) != task_seed(7, 0, 1));
}

TEST_CASE("uniform guesses stay inside the family box and differ per draw") {
    const FamilyRuntime rt = make_dejong_runtime();
    std::mt19937_64 rng(5);
    DecisionVector prev;
    for (int i = 0; i < 100; ++i) {
        const DecisionVector g = uniform_guess(rt.family, rng);
        REQUIRE(static_cast<int>(g.size()) == rt.family.dimension);
        CHECK(rt.family.bounds.contains(g));
        CHECK(g != prev);
        prev = g;
    }
}

TEST_CASE("curation is deterministic and worker-count independent") {
    const FamilyRuntime rt = make_dejong_runtime();
    CurationConfig cfg = small_curation();
    const SolutionDataset a = curate(rt, cfg);
    REQUIRE(a.size() == cfg.total_samples());
    CHECK(a.family == rt.family.name);

    cfg.worker_count = 3;
    const SolutionDataset b = curate(rt, cfg);
    REQUIRE(b.size() == a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a.records[i].x0 == b.records[i].x0);
        CHECK(a.records[i].x_star == b.records[i].x_star);
        CHECK(a.records[i].objective == b.records[i].objective);
        CHECK(a.records[i].alpha == b.records[i].alpha);
    }
}

TEST_CASE("per-alpha counts override the flat sample count") {
    CurationConfig cfg = small_curation();
    cfg.per_alpha_counts = {3, 9};
    CHECK(cfg.count_for(0) == 3);
    CHECK(cfg.count_for(1) == 9);
    CHECK(cfg.total_samples() == 12);
    cfg.per_alpha_counts = {3};
    const FamilyRuntime rt = make_dejong_runtime();
    CHECK_THROWS_AS(cfg.validate(rt.family), std::invalid_argument);
}

TEST_CASE("interrupted curation resumes from the persisted line count") {
    const FamilyRuntime rt = make_dejong_runtime();
    const CurationConfig cfg = small_curation();
    const std::string path = "test_pipeline_resume.jsonl";
    std::filesystem::remove(path);

    const SolutionDataset full = curate(rt, cfg, path);
    REQUIRE(count_jsonl_lines(path) == full.size());

    // Truncate to 7 complete lines plus one torn line, then resume.
    std::vector<std::string> lines;
    {
        std::ifstream in(path);
        std::string line;
        while (std::getline(in, line)) lines.push_back(line);
    }
    {
        std::ofstream out(path, std::ios::trunc);
        for (int i = 0; i < 7; ++i) out << lines[i] << '\n';
        out << lines[7].substr(0, lines[7].size() / 2);  // no newline: torn write
    }
    const SolutionDataset resumed = curate(rt, cfg, path);
    REQUIRE(resumed.size() == full.size());
    for (std::size_t i = 0; i < full.size(); ++i) {
        CHECK(resumed.records[i].x0 == full.records[i].x0);
        CHECK(resumed.records[i].x_star == full.records[i].x_star);
    }
    std::filesystem::remove(path);
}

TEST_CASE("draw_guess covers every mode on dejong and respects the box") {
    const FamilyRuntime rt = make_dejong_runtime();
    const SolutionDataset data = curate(rt, small_curation());
    const CvaeModel cvae = trained_dejong_cvae(rt, data);
    ModelSet models;
    models.cvae = &cvae;
    models.vanilla = &cvae;

    std::mt19937_64 rng(9);
    for (const AblationMode mode :
         {AblationMode::Uniform, AblationMode::VanillaCvae, AblationMode::Amorgs}) {
        for (int i = 0; i < 20; ++i) {
            const DecisionVector g = draw_guess(rt, 0.5, mode, models, rng);
            REQUIRE(static_cast<int>(g.size()) == rt.family.dimension);
            CHECK(rt.family.bounds.contains(g, 1e-9));
        }
    }

    ModelSet empty;
    CHECK_THROWS_AS(draw_guess(rt, 0.5, AblationMode::Amorgs, empty, rng),
                    std::invalid_argument);
    CHECK_NOTHROW(draw_guess(rt, 0.5, AblationMode::Uniform, empty, rng));
}

TEST_CASE("beta filter and train rejects an empty filtered set by beta value") {
    const FamilyRuntime rt = make_dejong_runtime();
    const SolutionDataset data = curate(rt, small_curation());
    TrainSetup setup;
    setup.cvae_spec = CvaeSpec::dejong();
    setup.cvae_norm.lo = rt.family.bounds.lo;
    setup.cvae_norm.hi = rt.family.bounds.hi;
    setup.cvae_cfg.epochs = 1;
    CHECK_THROWS_WITH_AS(beta_filter_and_train(data, -1e9, setup),
                         doctest::Contains("-1e+09"), std::invalid_argument);
}

TEST_CASE("warmstart solves n mode-sampled guesses and tags provenance") {
    const FamilyRuntime rt = make_dejong_runtime();
    SolverConfig scfg;
    scfg.optimality_tol = 1e-6;
    scfg.max_major_iterations = 100;
    const SolutionDataset ds =
        warmstart(rt, 0.5, AblationMode::Uniform, ModelSet{}, 15, scfg, 4);
    REQUIRE(ds.size() == 15);
    CHECK(ds.provenance.find("uniform") != std::string::npos);
    for (const SolveRecord& r : ds.records) {
        CHECK(r.alpha == 0.5);
        CHECK(rt.family.bounds.contains(r.x0));
    }
}

TEST_CASE("quantile interpolates linearly on the sorted sample") {
    std::vector<double> v{4.0, 1.0, 3.0, 2.0};
    CHECK(quantile(v, 0.0) == doctest::Approx(1.0));
    CHECK(quantile(v, 1.0) == doctest::Approx(4.0));
    CHECK(quantile(v, 0.5) == doctest::Approx(2.5));
    CHECK(quantile(v, 0.25) == doctest::Approx(1.75));
    CHECK(quantile({5.0}, 0.7) == doctest::Approx(5.0));
}

TEST_CASE("benchmark reports per-mode stats with a monotone time cap") {
    const FamilyRuntime rt = make_dejong_runtime();
    SolverConfig scfg;
    scfg.optimality_tol = 1e-6;
    scfg.max_major_iterations = 100;
    const std::vector<AblationMode> modes{AblationMode::Uniform};

    const BenchmarkReport tight = benchmark(rt, 0.5, modes, ModelSet{}, 30, scfg, 1e-9, 11);
    const BenchmarkReport loose = benchmark(rt, 0.5, modes, ModelSet{}, 30, scfg, 1e9, 11);
    REQUIRE(tight.modes.size() == 1);
    REQUIRE(loose.modes.size() == 1);
    const ModeStats& t = tight.modes[0];
    const ModeStats& l = loose.modes[0];
    CHECK(t.total == 30);
    CHECK(l.converged > 0);
    CHECK(l.converged_pct == doctest::Approx(100.0 * l.converged / 30.0));
    // Identical seeds: the same solves ran, only the cap classification moves.
    CHECK(t.converged == l.converged);
    CHECK(t.capped_converged_pct <= l.capped_converged_pct);
    CHECK(l.capped_converged_pct <= l.converged_pct);
    CHECK(l.time_min <= l.time_p25);
    CHECK(l.time_p25 <= l.time_p50);
    CHECK(static_cast<int>(l.solve_times_converged.size()) == l.converged);
    CHECK(l.mean_iterations_converged > 0.0);
}
