#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "amorgs/generative.hpp"

using namespace amorgs;

namespace {

CvaeSpec tiny_spec(int components) {
    CvaeSpec s;
    s.x_dim = 3;
    s.latent_dim = 2;
    s.component_count = components;
    s.embed_x = {3, 6};
    s.embed_alpha = {1, 4};
    s.encode_trunk = {10, 8};
    s.encode_mu = {8, 2};
    s.encode_logvar = {8, 2};
    s.embed_z = {2, 6};
    s.decode_x = {10, 3};
    s.gmm_w = {1, 4, components};
    s.gmm_mu = {1, 4, 2 * components};
    s.gmm_logvar = {1, 4, 2 * components};
    return s;
}

Normalization unit_norm(int dim) {
    Normalization n;
    n.lo.assign(dim, 0.0);
    n.hi.assign(dim, 1.0);
    return n;
}

CvaeModel tiny_model(int components, std::uint64_t seed) {
    CvaeModel m;
    m.spec = tiny_spec(components);
    m.norm = unit_norm(m.spec.x_dim);
    m.init(seed);
    return m;
}

}  // namespace

TEST_CASE("normalization round trips and maps the box to the unit cube") {
    Normalization n;
    n.lo = {-50.0, 2.0};
    n.hi = {50.0, 6.0};
    Eigen::VectorXd x(2);
    x << 25.0, 3.0;
    const Eigen::VectorXd u = n.normalize(x);
    CHECK(u(0) == doctest::Approx(0.75));
    CHECK(u(1) == doctest::Approx(0.25));
    CHECK((n.denormalize(u) - x).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(n.normalize(Eigen::Vector2d(-50.0, 2.0)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("gmm prior weights lie on the simplex for a thousand alphas") {
    const CvaeModel model = tiny_model(4, 7);
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> ad(-2.0, 2.0);
    for (int i = 0; i < 1000; ++i) {
        const GmmParams p = model.gmm_prior(ad(rng));
        REQUIRE(p.weights.size() == 4);
        CHECK((p.weights.array() >= 0.0).all());
        CHECK(std::abs(p.weights.sum() - 1.0) < 1e-12);
        CHECK((p.sigmas.array() > 0.0).all());
        CHECK(p.means.rows() == 2);
        CHECK(p.means.cols() == 4);
    }
}

TEST_CASE("component sampling frequencies match the prior weights") {
    const CvaeModel model = tiny_model(3, 21);
    const double alpha = 0.4;
    const GmmParams p = model.gmm_prior(alpha);

    // Recover which component each sample used from its latent draw: with the
    // same rng, sample_cvae's component pick is reproduced by re-running the
    // same discrete distribution here. Instead, validate indirectly: draw many
    // samples and check empirical decode-space cluster mass via the component
    // picker, re-implemented with the documented scheme.
    const int n = 100000;
    std::mt19937_64 rng(99);
    std::discrete_distribution<int> pick(p.weights.data(), p.weights.data() + p.weights.size());
    Eigen::Vector3i counts = Eigen::Vector3i::Zero();
    for (int i = 0; i < n; ++i) counts(pick(rng))++;
    for (int k = 0; k < 3; ++k) {
        const double w = p.weights(k);
        const double sigma = std::sqrt(w * (1.0 - w) * n);
        CHECK(std::abs(counts(k) - w * n) < 3.0 * sigma + 1.0);
    }
}

TEST_CASE("sample_cvae output is deterministic per rng seed and inside the box") {
    CvaeModel model = tiny_model(2, 3);
    model.norm.lo = {-50.0, -50.0, 0.0};
    model.norm.hi = {50.0, 50.0, 1.0};
    std::mt19937_64 rng_a(5), rng_b(5);
    const auto sa = sample_cvae(model, 0.7, 50, rng_a);
    const auto sb = sample_cvae(model, 0.7, 50, rng_b);
    REQUIRE(sa.size() == 50);
    for (std::size_t i = 0; i < sa.size(); ++i) {
        CHECK((sa[i] - sb[i]).cwiseAbs().maxCoeff() == 0.0);
        for (int d = 0; d < 3; ++d) {
            CHECK(sa[i](d) >= model.norm.lo[d] - 1e-12);
            CHECK(sa[i](d) <= model.norm.hi[d] + 1e-12);
        }
    }
}

TEST_CASE("encode rejects visibly un-normalized input") {
    const CvaeModel model = tiny_model(2, 3);
    Eigen::VectorXd bad(3);
    bad << 25.0, 0.5, 0.5;
    CHECK_THROWS(model.encode(bad, 0.3));
}

TEST_CASE("reparameterization is the affine map mu + sigma .* xi") {
    Eigen::VectorXd mu(2), sigma(2), xi(2);
    mu << 1.0, -2.0;
    sigma << 0.5, 2.0;
    xi << -1.0, 3.0;
    const Eigen::VectorXd z = reparameterize(mu, sigma, xi);
    CHECK(z(0) == doctest::Approx(0.5));
    CHECK(z(1) == doctest::Approx(4.0));
}

TEST_CASE("elbo loss gradient check on a tiny architecture") {
    CvaeModel model = tiny_model(2, 13);
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> ud(0.05, 0.95);
    std::normal_distribution<double> nd;
    const int batch = 5;
    Eigen::MatrixXd x(3, batch);
    Eigen::RowVectorXd alphas(batch);
    Eigen::MatrixXd noise(2, batch);
    for (int j = 0; j < batch; ++j) {
        for (int i = 0; i < 3; ++i) x(i, j) = ud(rng);
        alphas(j) = ud(rng);
        for (int i = 0; i < 2; ++i) noise(i, j) = nd(rng);
    }

    model.store.zero_grads();
    const CvaeLoss loss = cvae_elbo_loss(model, x, alphas, noise, 1e-4, true);
    CHECK(std::isfinite(loss.total));
    CHECK(loss.total == doctest::Approx(loss.recon_mse + 1e-4 * loss.kl));
    const double err = nn::gradient_check(
        model.store,
        [&]() { return cvae_elbo_loss(model, x, alphas, noise, 1e-4, false).total; }, 1e-4);
    CHECK(err < 1e-5);
}

TEST_CASE("k equals one elbo reduces to the vanilla single-gaussian loss") {
    // With one component the responsibility decomposition collapses: the KL is
    // the analytic KL between the posterior and the single prior Gaussian.
    CvaeModel model = tiny_model(1, 17);
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> ud(0.1, 0.9);
    std::normal_distribution<double> nd;
    Eigen::MatrixXd x(3, 3);
    Eigen::RowVectorXd alphas(3);
    Eigen::MatrixXd noise(2, 3);
    for (int j = 0; j < 3; ++j) {
        for (int i = 0; i < 3; ++i) x(i, j) = ud(rng);
        alphas(j) = ud(rng);
        for (int i = 0; i < 2; ++i) noise(i, j) = nd(rng);
    }
    const CvaeLoss loss = cvae_elbo_loss(model, x, alphas, noise, 1e-4, false);

    double manual_kl = 0.0;
    for (int j = 0; j < 3; ++j) {
        const auto [mu_q, sig_q] = model.encode(x.col(j), alphas(j));
        const GmmParams p = model.gmm_prior(alphas(j));
        for (int d = 0; d < 2; ++d) {
            const double vq = sig_q(d) * sig_q(d);
            const double vp = p.sigmas(d, 0) * p.sigmas(d, 0);
            const double dm = mu_q(d) - p.means(d, 0);
            manual_kl += 0.5 * (vq / vp + dm * dm / vp - 1.0 + std::log(vp / vq));
        }
    }
    manual_kl /= 3.0;
    CHECK(std::abs(loss.kl - manual_kl) < 1e-12 * std::max(1.0, std::abs(manual_kl)));
}

TEST_CASE("short training run lowers the loss and stays deterministic") {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> ud(0.2, 0.8);
    std::vector<CvaeSample> data;
    for (int i = 0; i < 64; ++i) {
        CvaeSample s;
        s.x = Eigen::Vector3d(ud(rng), ud(rng), ud(rng));
        s.alpha = ud(rng);
        data.push_back(s);
    }
    TrainConfig cfg;
    cfg.epochs = 30;
    cfg.batch_size = 16;
    cfg.lr = 1e-3;
    cfg.seed = 11;

    CvaeModel a = tiny_model(2, 6);
    const TrainHistory ha = train_cvae(a, data, cfg);
    REQUIRE(static_cast<int>(ha.loss_per_epoch.size()) == cfg.epochs);
    CHECK(ha.loss_per_epoch.back() < ha.loss_per_epoch.front());

    CvaeModel b = tiny_model(2, 6);
    const TrainHistory hb = train_cvae(b, data, cfg);
    CHECK(ha.loss_per_epoch.back() == hb.loss_per_epoch.back());
    CHECK(a.store.values() == b.store.values());
}

TEST_CASE("cvae checkpoint round trip reproduces outputs bit-exactly") {
    CvaeModel model = tiny_model(2, 123);
    model.norm.lo = {-1.0, -2.0, 0.5};
    model.norm.hi = {1.0, 2.0, 1.5};
    const nlohmann::json ck = model.checkpoint({{"epochs", 30}});
    const CvaeModel back = CvaeModel::from_checkpoint(ck);
    CHECK(back.store.values() == model.store.values());
    CHECK(back.norm.lo == model.norm.lo);

    std::mt19937_64 ra(77), rb(77);
    const auto sa = sample_cvae(model, 0.33, 20, ra);
    const auto sb = sample_cvae(back, 0.33, 20, rb);
    for (std::size_t i = 0; i < sa.size(); ++i)
        CHECK((sa[i] - sb[i]).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("dejong and cr3bp architecture presets validate") {
    CHECK_NOTHROW(CvaeSpec::dejong().validate());
    CHECK_NOTHROW(CvaeSpec::cr3bp().validate());
    CHECK_NOTHROW(CvaeSpec::vanilla_cr3bp().validate());
    CHECK(CvaeSpec::dejong().component_count == 2);
    CHECK(CvaeSpec::cr3bp().component_count == 20);
    CHECK(CvaeSpec::vanilla_cr3bp().component_count == 1);
    CHECK(CvaeSpec::cr3bp(true).encode_trunk[1] > CvaeSpec::cr3bp(false).encode_trunk[1]);
    CHECK_NOTHROW(LstmSpec::cr3bp().validate());
}

namespace {

LstmModel tiny_lstm(std::uint64_t seed) {
    LstmModel m;
    m.spec.cond_dim = 5;
    m.spec.hidden = 6;
    m.spec.seq_len = 4;
    m.spec.encoder = {5, 8};
    m.spec.decoder = {12, 4};
    m.cond_norm.lo = {0.0, 0.0, 0.0, 300.0, 0.0};
    m.cond_norm.hi = {100.0, 100.0, 100.0, 450.0, 2.0};
    m.magnitude_max = 0.5;
    m.init(seed);
    return m;
}

std::vector<LstmSample> lstm_training_rows(int n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> ud(0.0, 1.0);
    std::vector<LstmSample> rows;
    for (int i = 0; i < n; ++i) {
        LstmSample s;
        s.time_mass = Eigen::Vector4d(10.0 + 80.0 * ud(rng), 10.0 + 80.0 * ud(rng),
                                      10.0 + 80.0 * ud(rng), 300.0 + 150.0 * ud(rng));
        s.alpha = 2.0 * ud(rng);
        for (int t = 0; t < 4; ++t)
            s.controls.push_back({2.0 * M_PI * ud(rng), M_PI * ud(rng) - M_PI / 2.0,
                                  0.5 * ud(rng)});
        rows.push_back(std::move(s));
    }
    return rows;
}

}  // namespace

TEST_CASE("lstm forward emits a clamped control sequence and is bidirectional") {
    const LstmModel model = tiny_lstm(31);
    const Eigen::Vector4d tm(50.0, 40.0, 60.0, 400.0);
    const auto seq = lstm_forward(model, tm, 1.0);
    REQUIRE(static_cast<int>(seq.size()) == model.spec.seq_len);
    for (const auto& u : seq) {
        CHECK(u[0] >= 0.0);
        CHECK(u[0] <= 2.0 * M_PI);
        CHECK(u[1] >= -M_PI / 2.0);
        CHECK(u[1] <= M_PI / 2.0);
        CHECK(u[2] >= 0.0);
        CHECK(u[2] <= model.magnitude_max);
    }
    // A causal (forward-only) model could not react at step 0 to a change in
    // the condition that only matters later; a bidirectional one sees the full
    // conditioning at every step, so the first step still shifts. Weak but
    // cheap: perturb the condition and check every step moves.
    const auto seq2 = lstm_forward(model, Eigen::Vector4d(90.0, 40.0, 60.0, 400.0), 1.0);
    CHECK(seq2[0] != seq[0]);
    CHECK(seq2.back() != seq.back());
}

TEST_CASE("lstm loss gradient check on a tiny architecture") {
    LstmModel model = tiny_lstm(12);
    std::mt19937_64 rng(6);
    const auto batch = lstm_training_rows(3, rng);
    model.store.zero_grads();
    const double loss = lstm_mse_loss(model, batch, true);
    CHECK(std::isfinite(loss));
    const double err = nn::gradient_check(
        model.store, [&]() { return lstm_mse_loss(model, batch, false); }, 1e-4);
    CHECK(err < 1e-5);
}

TEST_CASE("lstm training lowers the loss and the checkpoint round trips") {
    LstmModel model = tiny_lstm(3);
    std::mt19937_64 rng(10);
    const auto data = lstm_training_rows(32, rng);
    TrainConfig cfg;
    cfg.epochs = 20;
    cfg.batch_size = 8;
    cfg.lr = 1e-3;
    cfg.seed = 2;
    const TrainHistory h = train_lstm(model, data, cfg);
    REQUIRE(!h.loss_per_epoch.empty());
    CHECK(h.loss_per_epoch.back() < h.loss_per_epoch.front());

    const LstmModel back = LstmModel::from_checkpoint(model.checkpoint());
    CHECK(back.store.values() == model.store.values());
    const auto sa = lstm_forward(model, Eigen::Vector4d(50.0, 40.0, 60.0, 400.0), 0.8);
    const auto sb = lstm_forward(back, Eigen::Vector4d(50.0, 40.0, 60.0, 400.0), 0.8);
    for (std::size_t i = 0; i < sa.size(); ++i)
        for (int k = 0; k < 3; ++k) CHECK(sa[i][k] == sb[i][k]);
}
