#ifndef AMORGS_GENERATIVE_HPP
#define AMORGS_GENERATIVE_HPP

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "amorgs/nn/tape.hpp"
#include "amorgs/problem.hpp"

namespace amorgs {

/// Per-dimension min-max scaling of model inputs/outputs to [0, 1]. A model
/// is unusable without its normalization, so it travels in the checkpoint.
struct Normalization {
    std::vector<double> lo;
    std::vector<double> hi;

    Eigen::VectorXd normalize(const Eigen::VectorXd& x) const;
    Eigen::VectorXd denormalize(const Eigen::VectorXd& u) const;
    int dimension() const { return static_cast<int>(lo.size()); }
};

/// Architecture of the CVAE with conditional GMM prior. Width lists follow
/// the [in, h1, ..., out] convention.
struct CvaeSpec {
    int x_dim = 4;
    int latent_dim = 4;
    int component_count = 20;  // K; 1 = vanilla single-Gaussian prior
    std::vector<int> embed_x;
    std::vector<int> embed_alpha;
    std::vector<int> encode_trunk;
    std::vector<int> encode_mu;
    std::vector<int> encode_logvar;
    std::vector<int> embed_z;
    std::vector<int> decode_x;
    std::vector<int> gmm_w;
    std::vector<int> gmm_mu;
    std::vector<int> gmm_logvar;

    void validate() const;
    nlohmann::json to_json() const;
    static CvaeSpec from_json(const nlohmann::json& j);

    /// The De Jong architecture (K = 2, latent 2), used verbatim.
    static CvaeSpec dejong();
    /// The transfer-problem architecture (K = 20, latent 4); widths shrink 4x
    /// at desk scale unless paper_scale.
    static CvaeSpec cr3bp(bool paper_scale = false);
    /// Single-Gaussian baseline over the full 64-dim decision vector.
    static CvaeSpec vanilla_cr3bp(bool paper_scale = false);
};

/// GMM prior parameters at one alpha. Columns index components.
struct GmmParams {
    Eigen::VectorXd weights;   // K, sums to 1
    Eigen::MatrixXd means;     // latent_dim x K
    Eigen::MatrixXd sigmas;    // latent_dim x K, standard deviations
};

struct CvaeModel {
    CvaeSpec spec;
    Normalization norm;
    std::uint64_t rng_seed = 0;
    mutable nn::ParamStore store;
    nn::Mlp embed_x, embed_alpha, encode_trunk, encode_mu, encode_logvar;
    nn::Mlp embed_z, decode_x, gmm_w, gmm_mu, gmm_logvar;

    void init(std::uint64_t seed);

    /// Gaussian posterior parameters (mean, stddev). Throws when the input is
    /// visibly un-normalized (outside [-0.1, 1.1]).
    std::pair<Eigen::VectorXd, Eigen::VectorXd> encode(const Eigen::VectorXd& x_norm,
                                                       double alpha) const;
    GmmParams gmm_prior(double alpha) const;
    /// Decoder output in [0, 1]^x_dim (sigmoid head).
    Eigen::VectorXd decode(const Eigen::VectorXd& z, double alpha) const;

    nlohmann::json checkpoint(const nlohmann::json& training_metadata = {}) const;
    static CvaeModel from_checkpoint(const nlohmann::json& j);
};

/// z = mu + sigma .* xi
Eigen::VectorXd reparameterize(const Eigen::VectorXd& mu, const Eigen::VectorXd& sigma,
                               const Eigen::VectorXd& xi);

struct TrainConfig {
    double eta_kl = 1e-4;  // KL weight in the ELBO
    int epochs = 1200;
    int batch_size = 64;
    double lr = 1e-3;
    std::uint64_t seed = 0;

    void validate() const;
};

struct CvaeLoss {
    double total = 0.0;       // minimized: recon_mse + eta_kl * kl
    double recon_mse = 0.0;
    double kl = 0.0;
    double elbo() const { return -total; }
};

/// Single-sample ELBO loss over a batch. x_norm is x_dim x B in [0, 1],
/// alphas 1 x B, noise latent_dim x B standard normal. When with_grad,
/// gradients accumulate into the model store (zeroed first by the caller).
/// The KL term uses the responsibility decomposition at the sampled latent,
/// analytic per diagonal-Gaussian component.
CvaeLoss cvae_elbo_loss(const CvaeModel& model, const Eigen::MatrixXd& x_norm,
                        const Eigen::RowVectorXd& alphas, const Eigen::MatrixXd& noise,
                        double eta_kl, bool with_grad = false);

/// One (x, alpha) training row.
struct CvaeSample {
    Eigen::VectorXd x;  // raw units; normalized internally
    double alpha = 0.0;
};

struct TrainHistory {
    std::vector<double> loss_per_epoch;  // total loss, minimized
};

/// Adam training of the ELBO; deterministic per cfg.seed. Batches group rows
/// sharing one alpha so the conditional heads evaluate once per batch.
TrainHistory train_cvae(CvaeModel& model, const std::vector<CvaeSample>& data,
                        const TrainConfig& cfg);

/// n denormalized samples: component pick ~ w(alpha), z ~ N(mu_i, Sigma_i),
/// decode, denormalize.
std::vector<Eigen::VectorXd> sample_cvae(const CvaeModel& model, double alpha, int n,
                                         std::mt19937_64& rng);

/// Bidirectional LSTM emitting the control sequence conditioned on
/// (tau_s, tau_i, tau_f, m_f, alpha). Azimuth is regressed as a
/// (sin, cos) pair, so the per-step decoder emits 4 values for 3 controls.
struct LstmSpec {
    int cond_dim = 5;
    int hidden = 64;
    int seq_len = 20;
    std::vector<int> encoder;  // cond_dim -> embedding
    std::vector<int> decoder;  // 2 * hidden -> 4

    void validate() const;
    nlohmann::json to_json() const;
    static LstmSpec from_json(const nlohmann::json& j);
    static LstmSpec cr3bp(bool paper_scale = false);
};

struct LstmModel {
    LstmSpec spec;
    Normalization cond_norm;   // (tau_s, tau_i, tau_f, m_f, alpha)
    double magnitude_max = 1.0;  // denormalization for the control magnitude
    std::uint64_t rng_seed = 0;
    mutable nn::ParamStore store;
    nn::Mlp encoder, decoder;
    nn::ParamRef wx_f, wh_f, b_f;  // forward cell, gate order [i f g o]
    nn::ParamRef wx_b, wh_b, b_b;  // backward cell

    void init(std::uint64_t seed);

    nlohmann::json checkpoint(const nlohmann::json& training_metadata = {}) const;
    static LstmModel from_checkpoint(const nlohmann::json& j);
};

/// Deterministic control sequence for one condition vector
/// (tau_s, tau_i, tau_f, m_f) at alpha; outputs clamped into the control box.
std::vector<std::array<double, 3>> lstm_forward(const LstmModel& model,
                                                const Eigen::Vector4d& time_mass, double alpha);

/// One LSTM training row: condition plus the target control sequence
/// (azimuth, elevation, magnitude per segment).
struct LstmSample {
    Eigen::Vector4d time_mass;
    double alpha = 0.0;
    std::vector<std::array<double, 3>> controls;
};

/// MSE loss over the encoded targets for a batch; gradients accumulate into
/// the store when with_grad.
double lstm_mse_loss(const LstmModel& model, const std::vector<LstmSample>& batch,
                     bool with_grad = false);

TrainHistory train_lstm(LstmModel& model, const std::vector<LstmSample>& data,
                        const TrainConfig& cfg);

}  // namespace amorgs

#endif
