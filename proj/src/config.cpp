#include "amorgs/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace amorgs {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

nlohmann::json parse_toml_value(const std::string& raw) {
    const std::string v = trim(raw);
    if (v.empty()) throw std::invalid_argument("config: empty value");
    if (v.front() == '"') {
        if (v.size() < 2 || v.back() != '"')
            throw std::invalid_argument("config: unterminated string: " + v);
        return v.substr(1, v.size() - 2);
    }
    if (v == "true") return true;
    if (v == "false") return false;
    if (v.front() == '[') {
        if (v.back() != ']') throw std::invalid_argument("config: unterminated array: " + v);
        nlohmann::json arr = nlohmann::json::array();
        std::string body = v.substr(1, v.size() - 2);
        std::string item;
        std::istringstream ss(body);
        while (std::getline(ss, item, ',')) {
            item = trim(item);
            if (!item.empty()) arr.push_back(parse_toml_value(item));
        }
        return arr;
    }
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument("");
        if (d == static_cast<double>(static_cast<long long>(d)) && v.find_first_of(".eE") ==
            std::string::npos)
            return static_cast<long long>(d);
        return d;
    } catch (...) {
        throw std::invalid_argument("config: cannot parse value: " + v);
    }
}

template <typename T>
void read_if(const nlohmann::json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

nlohmann::json toml_subset_to_json(const std::string& text) {
    nlohmann::json doc = nlohmann::json::object();
    nlohmann::json* section = &doc;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw std::invalid_argument("config: bad section: " + line);
            std::string path = trim(line.substr(1, line.size() - 2));
            section = &doc;
            std::istringstream ps(path);
            std::string part;
            while (std::getline(ps, part, '.')) section = &((*section)[trim(part)]);
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw std::invalid_argument("config: expected key = value: " + line);
        (*section)[trim(line.substr(0, eq))] = parse_toml_value(line.substr(eq + 1));
    }
    return doc;
}

void RunConfig::validate() const {
    if (family != "dejong" && family != "cr3bp")
        throw std::invalid_argument("config: unknown family '" + family + "'");
    solver.validate();
    cvae_train.validate();
    if (family == "cr3bp") {
        lstm_train.validate();
        constants.validate();
        shooting.validate();
        boundary.validate();
    }
    if (samples_per_alpha < 1) throw std::invalid_argument("config: samples_per_alpha < 1");
    if (bench_n < 1) throw std::invalid_argument("config: benchmark n < 1");
    if (time_cap_s < 0.0) throw std::invalid_argument("config: time_cap_s < 0");
    if (bin_width <= 0.0 || delta <= 0.0)
        throw std::invalid_argument("config: analysis widths must be positive");
    for (const std::string& m : bench_modes) (void)ablation_mode_from_string(m);
}

int RunConfig::resolve_workers() const {
    if (workers > 0) return workers;
    if (const char* env = std::getenv("AMORGS_WORKERS")) {
        const int w = std::atoi(env);
        if (w > 0) return w;
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

RunConfig run_config_from_json(const nlohmann::json& j) {
    RunConfig c;
    c.family = j.at("family").get<std::string>();
    read_if(j, "seed", c.seed);
    read_if(j, "out_dir", c.out_dir);
    read_if(j, "workers", c.workers);

    if (j.contains("curation")) {
        const auto& cu = j.at("curation");
        read_if(cu, "alpha_list", c.alpha_list);
        read_if(cu, "samples_per_alpha", c.samples_per_alpha);
        read_if(cu, "per_alpha_counts", c.per_alpha_counts);
    }
    if (j.contains("solver")) {
        const auto& s = j.at("solver");
        read_if(s, "optimality_tol", c.solver.optimality_tol);
        read_if(s, "feasibility_tol", c.solver.feasibility_tol);
        read_if(s, "max_major_iterations", c.solver.max_major_iterations);
        read_if(s, "max_wall_time_s", c.solver.max_wall_time_s);
        read_if(s, "max_inner_iterations", c.solver.max_inner_iterations);
        read_if(s, "initial_penalty", c.solver.initial_penalty);
    }
    c.beta = (c.family == "dejong") ? 1.5 : -415.0;
    read_if(j, "beta", c.beta);

    if (j.contains("training")) {
        const auto& t = j.at("training");
        auto read_train = [](const nlohmann::json& tj, TrainConfig& cfg) {
            read_if(tj, "epochs", cfg.epochs);
            read_if(tj, "batch_size", cfg.batch_size);
            read_if(tj, "lr", cfg.lr);
            read_if(tj, "eta_kl", cfg.eta_kl);
            read_if(tj, "seed", cfg.seed);
        };
        if (t.contains("cvae")) read_train(t.at("cvae"), c.cvae_train);
        if (t.contains("lstm")) read_train(t.at("lstm"), c.lstm_train);
        read_if(t, "paper_architecture", c.paper_architecture);
        read_if(t, "init_seed", c.model_init_seed);
    }
    if (j.contains("benchmark")) {
        const auto& b = j.at("benchmark");
        read_if(b, "n", c.bench_n);
        read_if(b, "time_cap_s", c.time_cap_s);
        read_if(b, "modes", c.bench_modes);
        read_if(b, "alphas", c.bench_alphas);
    }
    if (j.contains("analysis")) {
        const auto& a = j.at("analysis");
        read_if(a, "bin_width", c.bin_width);
        read_if(a, "delta", c.delta);
        read_if(a, "min_count", c.min_count);
        read_if(a, "ma_windows", c.ma_windows);
        read_if(a, "funnel_eps", c.funnel_eps);
        read_if(a, "funnel_min_pts", c.funnel_min_pts);
    }

    if (c.family == "cr3bp") {
        const nlohmann::json cr = j.contains("cr3bp") ? j.at("cr3bp") : nlohmann::json::object();
        if (cr.contains("constants")) {
            const auto& k = cr.at("constants");
            read_if(k, "mu", c.constants.mu);
            read_if(k, "isp_s", c.constants.isp_s);
            read_if(k, "t_max_N", c.constants.t_max_N);
            read_if(k, "du_km", c.constants.du_km);
            read_if(k, "tu_s", c.constants.tu_s);
            read_if(k, "m0_kg", c.constants.m0_kg);
            read_if(k, "dry_mass_kg", c.constants.dry_mass_kg);
        }
        read_if(cr, "segments", c.shooting.segment_count);
        if (cr.contains("boundary")) {
            const auto& b = cr.at("boundary");
            const auto q = b.at("xi0_q").get<std::vector<double>>();
            const auto v = b.at("xi0_v").get<std::vector<double>>();
            const auto xif = b.at("xif").get<std::vector<double>>();
            if (q.size() != 3 || v.size() != 3 || xif.size() != 6)
                throw std::invalid_argument("config: boundary vectors must be 3/3/6 long");
            c.boundary.xi0.q = Eigen::Vector3d(q.data());
            c.boundary.xi0.v = Eigen::Vector3d(v.data());
            c.boundary.xi0.m = c.constants.m0_kg;
            read_if(b, "xi0_m", c.boundary.xi0.m);
            c.boundary.xif_state = Eigen::Map<const Eigen::Matrix<double, 6, 1>>(xif.data());
        } else {
            c.boundary = default_reference_problem(c.constants, c.shooting).boundary;
        }
    }
    c.validate();
    return c;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("config: cannot open " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    const std::string text = buf.str();
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) throw std::invalid_argument("config: empty file " + path);
    nlohmann::json doc = (text[first] == '{') ? nlohmann::json::parse(text)
                                              : toml_subset_to_json(text);
    return run_config_from_json(doc);
}

FamilyRuntime build_runtime(const RunConfig& config) {
    if (config.family == "dejong") return make_dejong_runtime();
    return make_cr3bp_runtime(config.constants, config.boundary, config.shooting);
}

CurationConfig build_curation(const RunConfig& config) {
    CurationConfig cu;
    cu.alpha_list = config.alpha_list;
    cu.samples_per_alpha = config.samples_per_alpha;
    cu.per_alpha_counts = config.per_alpha_counts;
    cu.solver = config.solver;
    cu.seed = config.seed;
    cu.worker_count = config.resolve_workers();
    if (cu.alpha_list.empty()) {
        // family defaults: 11 evenly spaced rotations / the thrust grid
        if (config.family == "dejong") {
            for (int i = 0; i <= 10; ++i) cu.alpha_list.push_back(i * M_PI / 20.0);
        } else {
            for (int i = 1; i <= 10; ++i) cu.alpha_list.push_back(i / 10.0);
            cu.alpha_list.push_back(0.13);
            cu.alpha_list.push_back(0.16);
            std::sort(cu.alpha_list.begin(), cu.alpha_list.end());
        }
    }
    return cu;
}

TrainSetup build_train_setup(const RunConfig& config) {
    TrainSetup setup;
    setup.cvae_cfg = config.cvae_train;
    setup.lstm_cfg = config.lstm_train;
    setup.init_seed = config.model_init_seed;
    if (config.family == "dejong") {
        setup.cvae_spec = CvaeSpec::dejong();
        const DeJongFamily fam = default_dejong_family();
        setup.cvae_norm.lo = fam.bounds.lo;
        setup.cvae_norm.hi = fam.bounds.hi;
        setup.with_lstm = false;
        return setup;
    }
    setup.cvae_spec = CvaeSpec::cr3bp(config.paper_architecture);
    setup.cvae_norm.lo = {0.0, 0.0, 0.0, config.shooting.m_f_min};
    setup.cvae_norm.hi = {config.shooting.tau_s_max, config.shooting.coast_max,
                          config.shooting.coast_max, config.shooting.m_f_max};
    setup.with_lstm = true;
    setup.lstm_spec = LstmSpec::cr3bp(config.paper_architecture);
    setup.lstm_spec.seq_len = config.shooting.segment_count;
    const ProblemFamily fam = shooting_problem_family(config.shooting, config.constants);
    setup.cond_norm.lo = setup.cvae_norm.lo;
    setup.cond_norm.hi = setup.cvae_norm.hi;
    setup.cond_norm.lo.push_back(fam.alpha_range[0]);
    setup.cond_norm.hi.push_back(fam.alpha_range[1]);
    setup.magnitude_max = config.constants.t_max_N;
    return setup;
}

CvaeSpec build_vanilla_spec(const RunConfig& config) {
    if (config.family == "dejong") {
        CvaeSpec s = CvaeSpec::dejong();
        s.component_count = 1;
        s.gmm_w.clear();
        s.gmm_mu.clear();
        s.gmm_logvar.clear();
        s.validate();
        return s;
    }
    CvaeSpec s = CvaeSpec::vanilla_cr3bp(config.paper_architecture);
    const int dim = 3 * config.shooting.segment_count + 4;
    if (dim != s.x_dim) {
        s.x_dim = dim;
        s.embed_x.front() = dim;
        s.decode_x.back() = dim;
        s.validate();
    }
    return s;
}

Normalization full_vector_normalization(const RunConfig& config) {
    Normalization n;
    if (config.family == "dejong") {
        const DeJongFamily fam = default_dejong_family();
        n.lo = fam.bounds.lo;
        n.hi = fam.bounds.hi;
    } else {
        const Bounds b = shooting_bounds(config.shooting, config.constants);
        n.lo = b.lo;
        n.hi = b.hi;
    }
    return n;
}

std::string fnv1a_hex(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    std::ostringstream out;
    out << std::hex << h;
    return out.str();
}

std::string file_digest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::invalid_argument("digest: cannot open " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return fnv1a_hex(buf.str());
}

}  // namespace amorgs
