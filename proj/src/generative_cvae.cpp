#include "amorgs/generative.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

#include "amorgs/nn/checkpoint.hpp"

namespace amorgs {

namespace {

constexpr double kLogTwoPi = 1.8378770664093454836;

std::vector<int> shrink_hidden(std::vector<int> widths, int factor) {
    for (std::size_t i = 1; i + 1 < widths.size(); ++i) widths[i] /= factor;
    return widths;
}

}  // namespace

Eigen::VectorXd Normalization::normalize(const Eigen::VectorXd& x) const {
    if (x.size() != dimension()) throw std::invalid_argument("normalize: dimension mismatch");
    Eigen::VectorXd u(x.size());
    for (int i = 0; i < x.size(); ++i) u[i] = (x[i] - lo[i]) / (hi[i] - lo[i]);
    return u;
}

Eigen::VectorXd Normalization::denormalize(const Eigen::VectorXd& u) const {
    if (u.size() != dimension()) throw std::invalid_argument("denormalize: dimension mismatch");
    Eigen::VectorXd x(u.size());
    for (int i = 0; i < u.size(); ++i) x[i] = lo[i] + u[i] * (hi[i] - lo[i]);
    return x;
}

void CvaeSpec::validate() const {
    if (x_dim <= 0 || latent_dim <= 0 || component_count <= 0)
        throw std::invalid_argument("CvaeSpec: dimensions must be positive");
    auto head = [](const std::vector<int>& w, const char* name) {
        if (w.size() < 2) throw std::invalid_argument(std::string("CvaeSpec: ") + name + " too short");
    };
    head(embed_x, "embed_x");
    head(embed_alpha, "embed_alpha");
    head(encode_trunk, "encode_trunk");
    head(encode_mu, "encode_mu");
    head(encode_logvar, "encode_logvar");
    head(embed_z, "embed_z");
    head(decode_x, "decode_x");
    if (embed_x.front() != x_dim) throw std::invalid_argument("CvaeSpec: embed_x input != x_dim");
    if (embed_alpha.front() != 1) throw std::invalid_argument("CvaeSpec: embed_alpha input != 1");
    if (encode_trunk.front() != embed_x.back() + embed_alpha.back())
        throw std::invalid_argument("CvaeSpec: encode_trunk input width mismatch");
    if (encode_mu.front() != encode_trunk.back() || encode_logvar.front() != encode_trunk.back())
        throw std::invalid_argument("CvaeSpec: posterior head input width mismatch");
    if (encode_mu.back() != latent_dim || encode_logvar.back() != latent_dim)
        throw std::invalid_argument("CvaeSpec: posterior head output != latent_dim");
    if (embed_z.front() != latent_dim) throw std::invalid_argument("CvaeSpec: embed_z input != latent_dim");
    if (decode_x.front() != embed_z.back() + embed_alpha.back())
        throw std::invalid_argument("CvaeSpec: decode_x input width mismatch");
    if (decode_x.back() != x_dim) throw std::invalid_argument("CvaeSpec: decode_x output != x_dim");
    const bool learned = !gmm_w.empty();
    if (learned) {
        if (gmm_w.back() != component_count)
            throw std::invalid_argument("CvaeSpec: gmm_w output != component_count");
        if (gmm_mu.back() != component_count * latent_dim ||
            gmm_logvar.back() != component_count * latent_dim)
            throw std::invalid_argument("CvaeSpec: gmm moment head output != K * latent_dim");
    } else if (component_count != 1) {
        throw std::invalid_argument("CvaeSpec: fixed standard-normal prior requires K = 1");
    }
}

nlohmann::json CvaeSpec::to_json() const {
    return {{"x_dim", x_dim},
            {"latent_dim", latent_dim},
            {"component_count", component_count},
            {"embed_x", embed_x},
            {"embed_alpha", embed_alpha},
            {"encode_trunk", encode_trunk},
            {"encode_mu", encode_mu},
            {"encode_logvar", encode_logvar},
            {"embed_z", embed_z},
            {"decode_x", decode_x},
            {"gmm_w", gmm_w},
            {"gmm_mu", gmm_mu},
            {"gmm_logvar", gmm_logvar}};
}

CvaeSpec CvaeSpec::from_json(const nlohmann::json& j) {
    CvaeSpec s;
    s.x_dim = j.at("x_dim").get<int>();
    s.latent_dim = j.at("latent_dim").get<int>();
    s.component_count = j.at("component_count").get<int>();
    s.embed_x = j.at("embed_x").get<std::vector<int>>();
    s.embed_alpha = j.at("embed_alpha").get<std::vector<int>>();
    s.encode_trunk = j.at("encode_trunk").get<std::vector<int>>();
    s.encode_mu = j.at("encode_mu").get<std::vector<int>>();
    s.encode_logvar = j.at("encode_logvar").get<std::vector<int>>();
    s.embed_z = j.at("embed_z").get<std::vector<int>>();
    s.decode_x = j.at("decode_x").get<std::vector<int>>();
    s.gmm_w = j.at("gmm_w").get<std::vector<int>>();
    s.gmm_mu = j.at("gmm_mu").get<std::vector<int>>();
    s.gmm_logvar = j.at("gmm_logvar").get<std::vector<int>>();
    s.validate();
    return s;
}

CvaeSpec CvaeSpec::dejong() {
    CvaeSpec s;
    s.x_dim = 2;
    s.latent_dim = 2;
    s.component_count = 2;
    s.embed_x = {2, 32, 64, 64};
    s.embed_alpha = {1, 32, 64, 64};
    s.encode_trunk = {128, 64, 64};
    s.encode_mu = {64, 32, 2};
    s.encode_logvar = {64, 32, 2};
    s.embed_z = {2, 32, 64, 64};
    s.decode_x = {128, 64, 64, 2};
    s.gmm_w = {1, 512, 512, 512, 2};
    s.gmm_mu = {1, 512, 512, 512, 4};
    s.gmm_logvar = {1, 512, 512, 512, 4};
    s.validate();
    return s;
}

CvaeSpec CvaeSpec::cr3bp(bool paper_scale) {
    const int f = paper_scale ? 1 : 4;
    CvaeSpec s;
    s.x_dim = 4;
    s.latent_dim = 4;
    s.component_count = 20;
    s.embed_x = shrink_hidden({4, 1024, 1024, 1024, 1024 / f}, f);
    s.embed_alpha = shrink_hidden({1, 256, 256, 256, 256 / f}, f);
    s.encode_trunk = shrink_hidden({1280 / f, 512, 512, 512, 128 / f}, f);
    s.encode_mu = shrink_hidden({128 / f, 128, 128, 4}, f);
    s.encode_logvar = shrink_hidden({128 / f, 128, 128, 4}, f);
    s.embed_z = shrink_hidden({4, 1024, 1024, 1024, 1024 / f}, f);
    s.decode_x = shrink_hidden({1280 / f, 512, 512, 512, 4}, f);
    s.gmm_w = shrink_hidden({1, 512, 512, 512, 20}, f);
    s.gmm_mu = shrink_hidden({1, 512, 512, 512, 80}, f);
    s.gmm_logvar = shrink_hidden({1, 512, 512, 512, 80}, f);
    s.validate();
    return s;
}

CvaeSpec CvaeSpec::vanilla_cr3bp(bool paper_scale) {
    const int f = paper_scale ? 1 : 4;
    CvaeSpec s;
    s.x_dim = 64;
    s.latent_dim = 64;
    s.component_count = 1;
    s.embed_x = shrink_hidden({64, 1024, 1024, 1024, 1024 / f}, f);
    s.embed_alpha = shrink_hidden({1, 256, 256, 256, 256 / f}, f);
    s.encode_trunk = shrink_hidden({1280 / f, 512, 512, 512, 128 / f}, f);
    s.encode_mu = shrink_hidden({128 / f, 128, 128, 64}, f);
    s.encode_logvar = shrink_hidden({128 / f, 128, 128, 64}, f);
    s.embed_z = shrink_hidden({64, 1024, 1024, 1024, 1024 / f}, f);
    s.decode_x = shrink_hidden({1280 / f, 512, 512, 512, 64}, f);
    s.validate();
    return s;
}

void CvaeModel::init(std::uint64_t seed) {
    spec.validate();
    rng_seed = seed;
    store = nn::ParamStore{};
    std::mt19937_64 rng(seed);
    auto make = [&](nn::Mlp& m, const std::vector<int>& widths, nn::Activation final_act) {
        m.spec = nn::MlpSpec{widths, nn::Activation::LeakyRelu, final_act};
        m.init(store, rng);
    };
    make(embed_x, spec.embed_x, nn::Activation::LeakyRelu);
    make(embed_alpha, spec.embed_alpha, nn::Activation::LeakyRelu);
    make(encode_trunk, spec.encode_trunk, nn::Activation::LeakyRelu);
    make(encode_mu, spec.encode_mu, nn::Activation::Identity);
    make(encode_logvar, spec.encode_logvar, nn::Activation::Identity);
    make(embed_z, spec.embed_z, nn::Activation::LeakyRelu);
    make(decode_x, spec.decode_x, nn::Activation::Sigmoid);
    if (!spec.gmm_w.empty()) {
        make(gmm_w, spec.gmm_w, nn::Activation::Identity);
        make(gmm_mu, spec.gmm_mu, nn::Activation::Identity);
        make(gmm_logvar, spec.gmm_logvar, nn::Activation::Identity);
    }
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> CvaeModel::encode(const Eigen::VectorXd& x_norm,
                                                              double alpha) const {
    if (x_norm.size() != spec.x_dim) throw std::invalid_argument("encode: dimension mismatch");
    if (x_norm.minCoeff() < -0.1 || x_norm.maxCoeff() > 1.1)
        throw std::invalid_argument("encode: un-normalized input detected");
    nn::Tape tape(store);
    const int xb = tape.input(x_norm);
    const int an = tape.input(Eigen::MatrixXd::Constant(1, 1, alpha));
    const int trunk = encode_trunk.forward(
        tape, tape.concat_rows({embed_x.forward(tape, xb), embed_alpha.forward(tape, an)}));
    const Eigen::VectorXd mu = tape.value(encode_mu.forward(tape, trunk));
    const Eigen::VectorXd logvar = tape.value(encode_logvar.forward(tape, trunk));
    return {mu, (0.5 * logvar.array()).exp().matrix()};
}

GmmParams CvaeModel::gmm_prior(double alpha) const {
    const int k = spec.component_count;
    const int l = spec.latent_dim;
    GmmParams p;
    if (spec.gmm_w.empty()) {
        p.weights = Eigen::VectorXd::Ones(1);
        p.means = Eigen::MatrixXd::Zero(l, 1);
        p.sigmas = Eigen::MatrixXd::Ones(l, 1);
        return p;
    }
    nn::Tape tape(store);
    const int an = tape.input(Eigen::MatrixXd::Constant(1, 1, alpha));
    const Eigen::VectorXd logits = tape.value(gmm_w.forward(tape, an));
    const Eigen::VectorXd mu = tape.value(gmm_mu.forward(tape, an));
    const Eigen::VectorXd logvar = tape.value(gmm_logvar.forward(tape, an));
    const double m = logits.maxCoeff();
    Eigen::VectorXd w = (logits.array() - m).exp();
    p.weights = w / w.sum();
    p.means.resize(l, k);
    p.sigmas.resize(l, k);
    for (int i = 0; i < k; ++i) {
        p.means.col(i) = mu.segment(i * l, l);
        p.sigmas.col(i) = (0.5 * logvar.segment(i * l, l).array()).exp();
    }
    return p;
}

Eigen::VectorXd CvaeModel::decode(const Eigen::VectorXd& z, double alpha) const {
    if (z.size() != spec.latent_dim) throw std::invalid_argument("decode: dimension mismatch");
    nn::Tape tape(store);
    const int zn = tape.input(z);
    const int an = tape.input(Eigen::MatrixXd::Constant(1, 1, alpha));
    return tape.value(decode_x.forward(
        tape, tape.concat_rows({embed_z.forward(tape, zn), embed_alpha.forward(tape, an)})));
}

Eigen::VectorXd reparameterize(const Eigen::VectorXd& mu, const Eigen::VectorXd& sigma,
                               const Eigen::VectorXd& xi) {
    if (mu.size() != sigma.size() || mu.size() != xi.size())
        throw std::invalid_argument("reparameterize: dimension mismatch");
    return mu + sigma.cwiseProduct(xi);
}

void TrainConfig::validate() const {
    if (epochs <= 0 || batch_size <= 0 || lr <= 0.0 || eta_kl < 0.0)
        throw std::invalid_argument("TrainConfig: invalid settings");
}

CvaeLoss cvae_elbo_loss(const CvaeModel& model, const Eigen::MatrixXd& x_norm,
                        const Eigen::RowVectorXd& alphas, const Eigen::MatrixXd& noise,
                        double eta_kl, bool with_grad) {
    const int b = static_cast<int>(x_norm.cols());
    const int k = model.spec.component_count;
    const int l = model.spec.latent_dim;
    if (b == 0) throw std::invalid_argument("cvae_elbo_loss: empty batch");
    if (x_norm.rows() != model.spec.x_dim || alphas.cols() != b || noise.rows() != l ||
        noise.cols() != b)
        throw std::invalid_argument("cvae_elbo_loss: dimension mismatch");

    const bool same_alpha = (alphas.array() == alphas(0)).all();
    nn::Tape tape(model.store);
    auto bc = [&](int node) { return (same_alpha && b > 1) ? tape.broadcast_cols(node, b) : node; };

    const int xb = tape.input(x_norm);
    const int an = tape.input(same_alpha ? Eigen::MatrixXd::Constant(1, 1, alphas(0))
                                         : Eigen::MatrixXd(alphas));
    const int ea = bc(model.embed_alpha.forward(tape, an));
    const int trunk = model.encode_trunk.forward(
        tape, tape.concat_rows({model.embed_x.forward(tape, xb), ea}));
    const int mu_q = model.encode_mu.forward(tape, trunk);
    const int logvar_q = model.encode_logvar.forward(tape, trunk);
    const int sigma_q = tape.exp(tape.scale(logvar_q, 0.5));
    const int zn = tape.add(mu_q, tape.hadamard(sigma_q, tape.input(noise)));
    const int xhat = model.decode_x.forward(
        tape, tape.concat_rows({model.embed_z.forward(tape, zn), ea}));
    const int recon = tape.mean_all(tape.square(tape.sub(xhat, xb)));

    int log_w, mu_p, logvar_p;
    if (model.spec.gmm_w.empty()) {
        log_w = tape.input(Eigen::MatrixXd::Zero(1, b));
        mu_p = tape.input(Eigen::MatrixXd::Zero(l, b));
        logvar_p = tape.input(Eigen::MatrixXd::Zero(l, b));
    } else {
        log_w = bc(tape.log_softmax_rows(model.gmm_w.forward(tape, an)));
        mu_p = bc(model.gmm_mu.forward(tape, an));
        logvar_p = bc(model.gmm_logvar.forward(tape, an));
    }

    std::vector<int> log_resp(k), kl_terms(k);
    for (int i = 0; i < k; ++i) {
        const int mu_i = tape.slice_rows(mu_p, i * l, l);
        const int lv_i = tape.slice_rows(logvar_p, i * l, l);
        const int inv_var = tape.exp(tape.scale(lv_i, -1.0));
        const int quad = tape.hadamard(tape.square(tape.sub(zn, mu_i)), inv_var);
        const int log_n = tape.scale(tape.colsum(tape.add(tape.add_scalar(lv_i, kLogTwoPi), quad)),
                                     -0.5);
        log_resp[i] = tape.add(tape.slice_rows(log_w, i, 1), log_n);
        const int trace = tape.add(tape.sub(lv_i, logvar_q), tape.exp(tape.sub(logvar_q, lv_i)));
        const int shift = tape.hadamard(tape.square(tape.sub(mu_q, mu_i)), inv_var);
        kl_terms[i] = tape.scale(tape.colsum(tape.add_scalar(tape.add(trace, shift), -1.0)), 0.5);
    }
    const int log_gamma = tape.log_softmax_rows(tape.concat_rows(log_resp));
    const int gamma = tape.exp(log_gamma);
    const int inner = tape.add(tape.concat_rows(kl_terms), tape.sub(log_gamma, log_w));
    const int kl = tape.mean_all(tape.colsum(tape.hadamard(gamma, inner)));
    const int loss = tape.add(recon, tape.scale(kl, eta_kl));
    if (with_grad) tape.backward(loss);
    return {tape.value(loss)(0, 0), tape.value(recon)(0, 0), tape.value(kl)(0, 0)};
}

TrainHistory train_cvae(CvaeModel& model, const std::vector<CvaeSample>& data,
                        const TrainConfig& cfg) {
    cfg.validate();
    if (data.empty()) throw std::invalid_argument("train_cvae: empty dataset");

    Eigen::MatrixXd x_all(model.spec.x_dim, static_cast<int>(data.size()));
    std::unordered_map<double, std::vector<int>> by_alpha;
    for (std::size_t i = 0; i < data.size(); ++i) {
        x_all.col(static_cast<int>(i)) = model.norm.normalize(data[i].x);
        by_alpha[data[i].alpha].push_back(static_cast<int>(i));
    }

    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    nn::AdamState adam;
    adam.lr = cfg.lr;
    TrainHistory hist;
    hist.loss_per_epoch.reserve(cfg.epochs);

    // Stable group order so training is reproducible across runs.
    std::vector<double> alphas_sorted;
    for (const auto& [a, _] : by_alpha) alphas_sorted.push_back(a);
    std::sort(alphas_sorted.begin(), alphas_sorted.end());

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::vector<std::pair<double, std::vector<int>>> batches;
        for (double a : alphas_sorted) {
            auto& idx = by_alpha[a];
            std::shuffle(idx.begin(), idx.end(), rng);
            for (std::size_t s = 0; s < idx.size(); s += cfg.batch_size) {
                const std::size_t e = std::min(idx.size(), s + cfg.batch_size);
                batches.emplace_back(a, std::vector<int>(idx.begin() + s, idx.begin() + e));
            }
        }
        std::shuffle(batches.begin(), batches.end(), rng);

        double loss_sum = 0.0;
        std::size_t n_rows = 0;
        for (const auto& [a, idx] : batches) {
            const int b = static_cast<int>(idx.size());
            Eigen::MatrixXd xb(model.spec.x_dim, b);
            for (int c = 0; c < b; ++c) xb.col(c) = x_all.col(idx[c]);
            Eigen::MatrixXd noise(model.spec.latent_dim, b);
            for (int r = 0; r < noise.rows(); ++r)
                for (int c = 0; c < b; ++c) noise(r, c) = normal(rng);
            model.store.zero_grads();
            const CvaeLoss loss = cvae_elbo_loss(model, xb, Eigen::RowVectorXd::Constant(b, a),
                                                 noise, cfg.eta_kl, true);
            nn::adam_step(adam, model.store.values(), model.store.grads());
            loss_sum += loss.total * b;
            n_rows += b;
        }
        hist.loss_per_epoch.push_back(loss_sum / static_cast<double>(n_rows));
    }
    return hist;
}

std::vector<Eigen::VectorXd> sample_cvae(const CvaeModel& model, double alpha, int n,
                                         std::mt19937_64& rng) {
    const GmmParams prior = model.gmm_prior(alpha);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<Eigen::VectorXd> out;
    out.reserve(n);
    for (int s = 0; s < n; ++s) {
        const double u = unif(rng);
        int comp = 0;
        double cum = 0.0;
        for (int i = 0; i < prior.weights.size(); ++i) {
            cum += prior.weights[i];
            if (u <= cum) {
                comp = i;
                break;
            }
            comp = i;
        }
        Eigen::VectorXd xi(model.spec.latent_dim);
        for (int r = 0; r < xi.size(); ++r) xi[r] = normal(rng);
        const Eigen::VectorXd z = reparameterize(prior.means.col(comp), prior.sigmas.col(comp), xi);
        out.push_back(model.norm.denormalize(model.decode(z, alpha)));
    }
    return out;
}

nlohmann::json CvaeModel::checkpoint(const nlohmann::json& training_metadata) const {
    nlohmann::json arch = spec.to_json();
    arch["normalization"] = {{"lo", norm.lo}, {"hi", norm.hi}};
    return nn::make_checkpoint("cvae", arch, store.values(), rng_seed, training_metadata);
}

CvaeModel CvaeModel::from_checkpoint(const nlohmann::json& j) {
    if (j.at("model_kind").get<std::string>() != "cvae")
        throw std::invalid_argument("checkpoint: not a cvae model");
    CvaeModel m;
    const auto& arch = j.at("architecture");
    m.spec = CvaeSpec::from_json(arch);
    m.norm.lo = arch.at("normalization").at("lo").get<std::vector<double>>();
    m.norm.hi = arch.at("normalization").at("hi").get<std::vector<double>>();
    m.init(j.at("rng_seed").get<std::uint64_t>());
    std::vector<double> values = nn::base64_decode_doubles(j.at("parameters").get<std::string>());
    if (values.size() != m.store.size())
        throw std::invalid_argument("checkpoint: parameter count mismatch");
    m.store.values() = std::move(values);
    return m;
}

}  // namespace amorgs
