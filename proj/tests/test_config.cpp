#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "amorgs/config.hpp"

using namespace amorgs;

namespace {

const char* kTomlText = R"(# run setup
family = "dejong"
seed = 42
workers = 2

[curation]
alpha_list = [0.0, 0.5, 1.0]
samples_per_alpha = 50

[solver]
optimality_tol = 1e-6
max_major_iterations = 200

[training.cvae]
epochs = 10
lr = 0.001
eta_kl = 1e-4

[benchmark]
n = 100
modes = ["uniform", "amorgs"]
alphas = [1.0471975511965976]

[analysis]
bin_width = 0.25
ma_windows = [1.0, 0.5]
)";

const char* kJsonText = R"({
  "family": "dejong",
  "seed": 42,
  "workers": 2,
  "curation": {"alpha_list": [0.0, 0.5, 1.0], "samples_per_alpha": 50},
  "solver": {"optimality_tol": 1e-6, "max_major_iterations": 200},
  "training": {"cvae": {"epochs": 10, "lr": 0.001, "eta_kl": 1e-4}},
  "benchmark": {"n": 100, "modes": ["uniform", "amorgs"], "alphas": [1.0471975511965976]},
  "analysis": {"bin_width": 0.25, "ma_windows": [1.0, 0.5]}
})";

std::string write_temp(const std::string& name, const std::string& text) {
    std::ofstream out(name);
    out << text;
    return name;
}

}  // namespace

TEST_CASE("toml subset and json forms load to the same config") {
    const std::string tp = write_temp("test_config.toml", kTomlText);
    const std::string jp = write_temp("test_config.json", kJsonText);
    const RunConfig a = load_run_config(tp);
    const RunConfig b = load_run_config(jp);
    std::filesystem::remove(tp);
    std::filesystem::remove(jp);

    CHECK(a.family == b.family);
    CHECK(a.seed == b.seed);
    CHECK(a.workers == b.workers);
    CHECK(a.alpha_list == b.alpha_list);
    CHECK(a.samples_per_alpha == b.samples_per_alpha);
    CHECK(a.solver.optimality_tol == b.solver.optimality_tol);
    CHECK(a.solver.max_major_iterations == b.solver.max_major_iterations);
    CHECK(a.cvae_train.epochs == b.cvae_train.epochs);
    CHECK(a.cvae_train.lr == b.cvae_train.lr);
    CHECK(a.cvae_train.eta_kl == b.cvae_train.eta_kl);
    CHECK(a.bench_n == b.bench_n);
    CHECK(a.bench_modes == b.bench_modes);
    CHECK(a.bench_alphas == b.bench_alphas);
    CHECK(a.ma_windows == b.ma_windows);
    CHECK(a.bin_width == b.bin_width);
}

TEST_CASE("toml parser handles comments, strings, booleans, and arrays") {
    const nlohmann::json doc = toml_subset_to_json(
        "name = \"hello\" # trailing comment\nflag = true\n[sec.sub]\nxs = [1, 2.5, 3]\n");
    CHECK(doc.at("name") == "hello");
    CHECK(doc.at("flag") == true);
    CHECK(doc.at("sec").at("sub").at("xs") == nlohmann::json({1, 2.5, 3}));
    CHECK_THROWS_AS(toml_subset_to_json("key value-without-equals\n"), std::invalid_argument);
    CHECK_THROWS_AS(toml_subset_to_json("[unterminated\n"), std::invalid_argument);
    CHECK_THROWS_AS(toml_subset_to_json("x = not_a_value\n"), std::invalid_argument);
}

TEST_CASE("per-family beta defaults with explicit override") {
    RunConfig d = run_config_from_json({{"family", "dejong"}});
    CHECK(d.beta == doctest::Approx(1.5));
    RunConfig c = run_config_from_json({{"family", "cr3bp"}});
    CHECK(c.beta == doctest::Approx(-415.0));
    RunConfig o = run_config_from_json({{"family", "dejong"}, {"beta", 2.25}});
    CHECK(o.beta == doctest::Approx(2.25));
}

TEST_CASE("validation rejects bad fields") {
    CHECK_THROWS_AS(run_config_from_json({{"family", "rosenbrock"}}), std::invalid_argument);
    CHECK_THROWS_AS(
        run_config_from_json({{"family", "dejong"}, {"curation", {{"samples_per_alpha", 0}}}}),
        std::invalid_argument);
    CHECK_THROWS_AS(
        run_config_from_json({{"family", "dejong"}, {"benchmark", {{"modes", {"bogus"}}}}}),
        std::invalid_argument);
    CHECK_THROWS_AS(
        run_config_from_json({{"family", "dejong"}, {"analysis", {{"bin_width", -1.0}}}}),
        std::invalid_argument);
    CHECK_THROWS_AS(
        run_config_from_json({{"family", "dejong"}, {"solver", {{"optimality_tol", -1e-6}}}}),
        std::invalid_argument);
}

TEST_CASE("curation defaults depend on the family") {
    const RunConfig d = run_config_from_json({{"family", "dejong"}});
    const CurationConfig cd = build_curation(d);
    REQUIRE(cd.alpha_list.size() == 11);
    CHECK(cd.alpha_list.front() == doctest::Approx(0.0));
    CHECK(cd.alpha_list.back() == doctest::Approx(M_PI / 2.0));

    const RunConfig c = run_config_from_json({{"family", "cr3bp"}});
    const CurationConfig cc = build_curation(c);
    REQUIRE(cc.alpha_list.size() == 12);
    CHECK(std::is_sorted(cc.alpha_list.begin(), cc.alpha_list.end()));
    CHECK(std::count(cc.alpha_list.begin(), cc.alpha_list.end(), 0.13) == 1);
    CHECK(std::count(cc.alpha_list.begin(), cc.alpha_list.end(), 0.16) == 1);
}

TEST_CASE("train setup wiring per family") {
    const RunConfig d = run_config_from_json({{"family", "dejong"}});
    const TrainSetup sd = build_train_setup(d);
    CHECK(!sd.with_lstm);
    CHECK(sd.cvae_spec.x_dim == 2);
    CHECK(sd.cvae_norm.lo.size() == 2);

    const RunConfig c = run_config_from_json({{"family", "cr3bp"}});
    const TrainSetup sc = build_train_setup(c);
    CHECK(sc.with_lstm);
    CHECK(sc.cvae_spec.x_dim == 4);
    CHECK(sc.lstm_spec.seq_len == c.shooting.segment_count);
    CHECK(sc.cond_norm.dimension() == 5);
    CHECK(sc.magnitude_max == c.constants.t_max_N);

    const CvaeSpec vanilla = build_vanilla_spec(c);
    CHECK(vanilla.component_count == 1);
    CHECK(vanilla.x_dim == 3 * c.shooting.segment_count + 4);
    const Normalization full = full_vector_normalization(c);
    CHECK(full.dimension() == vanilla.x_dim);
}

TEST_CASE("fnv1a matches published vectors") {
    CHECK(fnv1a_hex("") == "cbf29ce484222325");
    CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
    CHECK(fnv1a_hex("foobar") == "85944171f73967e8");
}

TEST_CASE("file digest hashes the byte content") {
    const std::string p = write_temp("test_config_digest.txt", "foobar");
    CHECK(file_digest(p) == "85944171f73967e8");
    std::filesystem::remove(p);
    CHECK_THROWS_AS(file_digest("no_such_file_anywhere.bin"), std::invalid_argument);
}

TEST_CASE("worker resolution prefers explicit count then the environment") {
    RunConfig c = run_config_from_json({{"family", "dejong"}, {"workers", 3}});
    CHECK(c.resolve_workers() == 3);
    c.workers = 0;
    setenv("AMORGS_WORKERS", "5", 1);
    CHECK(c.resolve_workers() == 5);
    unsetenv("AMORGS_WORKERS");
    CHECK(c.resolve_workers() >= 1);
}
