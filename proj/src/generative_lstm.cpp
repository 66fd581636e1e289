#include "amorgs/generative.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "amorgs/nn/checkpoint.hpp"

namespace amorgs {

namespace {

constexpr double kPi = 3.14159265358979323846;

/// Per-segment target encoding; the azimuth is a (sin, cos) pair so the
/// regression never straddles the 0 / 2 pi seam.
Eigen::Vector4d encode_control(const std::array<double, 3>& c, double magnitude_max) {
    return {std::sin(c[0]), std::cos(c[0]), (c[1] + kPi / 2.0) / kPi, c[2] / magnitude_max};
}

std::array<double, 3> decode_control(const Eigen::Vector4d& y, double magnitude_max) {
    double az = std::atan2(y[0], y[1]);
    if (az < 0.0) az += 2.0 * kPi;
    const double el = std::clamp(y[2], 0.0, 1.0) * kPi - kPi / 2.0;
    const double mag = std::clamp(y[3], 0.0, 1.0) * magnitude_max;
    return {az, el, mag};
}

struct LstmCellRefs {
    const nn::ParamRef& wx;
    const nn::ParamRef& wh;
    const nn::ParamRef& b;
};

/// Unrolls one direction over `steps` timesteps; the encoded condition is the
/// input at every step. Returns the hidden node per step in time order.
std::vector<int> unroll(nn::Tape& tape, const LstmCellRefs& cell, int encoded, int hidden,
                        int batch, int steps, bool reverse) {
    int h = tape.input(Eigen::MatrixXd::Zero(hidden, batch));
    int c = tape.input(Eigen::MatrixXd::Zero(hidden, batch));
    std::vector<int> hs(steps);
    for (int s = 0; s < steps; ++s) {
        const int pre = tape.add(tape.affine(cell.wx, cell.b, encoded), tape.matmul(cell.wh, h));
        const int gi = tape.activation(tape.slice_rows(pre, 0, hidden), nn::Activation::Sigmoid);
        const int gf = tape.activation(tape.slice_rows(pre, hidden, hidden), nn::Activation::Sigmoid);
        const int gg = tape.activation(tape.slice_rows(pre, 2 * hidden, hidden), nn::Activation::Tanh);
        const int go = tape.activation(tape.slice_rows(pre, 3 * hidden, hidden), nn::Activation::Sigmoid);
        c = tape.add(tape.hadamard(gf, c), tape.hadamard(gi, gg));
        h = tape.hadamard(go, tape.activation(c, nn::Activation::Tanh));
        hs[reverse ? steps - 1 - s : s] = h;
    }
    return hs;
}

/// Full bidirectional graph: 4 * seq_len x batch of encoded control targets.
int lstm_graph(nn::Tape& tape, const LstmModel& model, const Eigen::MatrixXd& cond_norm) {
    const int batch = static_cast<int>(cond_norm.cols());
    const int encoded = model.encoder.forward(tape, tape.input(cond_norm));
    const LstmCellRefs fwd{model.wx_f, model.wh_f, model.b_f};
    const LstmCellRefs bwd{model.wx_b, model.wh_b, model.b_b};
    const auto h_fwd = unroll(tape, fwd, encoded, model.spec.hidden, batch, model.spec.seq_len, false);
    const auto h_bwd = unroll(tape, bwd, encoded, model.spec.hidden, batch, model.spec.seq_len, true);
    std::vector<int> outputs(model.spec.seq_len);
    for (int s = 0; s < model.spec.seq_len; ++s)
        outputs[s] = model.decoder.forward(tape, tape.concat_rows({h_fwd[s], h_bwd[s]}));
    return tape.concat_rows(outputs);
}

}  // namespace

void LstmSpec::validate() const {
    if (cond_dim <= 0 || hidden <= 0 || seq_len <= 0)
        throw std::invalid_argument("LstmSpec: dimensions must be positive");
    if (encoder.size() < 2 || decoder.size() < 2)
        throw std::invalid_argument("LstmSpec: encoder/decoder too short");
    if (encoder.front() != cond_dim)
        throw std::invalid_argument("LstmSpec: encoder input != cond_dim");
    if (decoder.front() != 2 * hidden)
        throw std::invalid_argument("LstmSpec: decoder input != 2 * hidden");
    if (decoder.back() != 4)
        throw std::invalid_argument("LstmSpec: decoder must emit 4 values per step");
}

nlohmann::json LstmSpec::to_json() const {
    return {{"cond_dim", cond_dim}, {"hidden", hidden},   {"seq_len", seq_len},
            {"encoder", encoder},   {"decoder", decoder}};
}

LstmSpec LstmSpec::from_json(const nlohmann::json& j) {
    LstmSpec s;
    s.cond_dim = j.at("cond_dim").get<int>();
    s.hidden = j.at("hidden").get<int>();
    s.seq_len = j.at("seq_len").get<int>();
    s.encoder = j.at("encoder").get<std::vector<int>>();
    s.decoder = j.at("decoder").get<std::vector<int>>();
    s.validate();
    return s;
}

LstmSpec LstmSpec::cr3bp(bool paper_scale) {
    const int f = paper_scale ? 1 : 4;
    LstmSpec s;
    s.hidden = 256 / f;
    s.encoder = {5, 512 / f, 512 / f, 512 / f};
    s.decoder = {512 / f, 512 / f, 512 / f, 4};
    s.validate();
    return s;
}

void LstmModel::init(std::uint64_t seed) {
    spec.validate();
    rng_seed = seed;
    store = nn::ParamStore{};
    std::mt19937_64 rng(seed);
    encoder.spec = nn::MlpSpec{spec.encoder, nn::Activation::LeakyRelu, nn::Activation::LeakyRelu};
    encoder.init(store, rng);
    const int e = encoder.out_dim();
    const int h = spec.hidden;
    auto cell = [&](nn::ParamRef& wx, nn::ParamRef& wh, nn::ParamRef& b) {
        wx = store.add(4 * h, e);
        wh = store.add(4 * h, h);
        b = store.add(4 * h, 1);
        store.init_glorot(wx, rng);
        store.init_glorot(wh, rng);
        store.init_zero(b);
    };
    cell(wx_f, wh_f, b_f);
    cell(wx_b, wh_b, b_b);
    decoder.spec = nn::MlpSpec{spec.decoder, nn::Activation::LeakyRelu, nn::Activation::Identity};
    decoder.init(store, rng);
}

std::vector<std::array<double, 3>> lstm_forward(const LstmModel& model,
                                                const Eigen::Vector4d& time_mass, double alpha) {
    Eigen::VectorXd cond(5);
    cond << time_mass, alpha;
    nn::Tape tape(model.store);
    const Eigen::MatrixXd y = tape.value(lstm_graph(tape, model, model.cond_norm.normalize(cond)));
    std::vector<std::array<double, 3>> controls(model.spec.seq_len);
    for (int s = 0; s < model.spec.seq_len; ++s)
        controls[s] = decode_control(y.block<4, 1>(4 * s, 0), model.magnitude_max);
    return controls;
}

double lstm_mse_loss(const LstmModel& model, const std::vector<LstmSample>& batch,
                     bool with_grad) {
    if (batch.empty()) throw std::invalid_argument("lstm_mse_loss: empty batch");
    const int b = static_cast<int>(batch.size());
    const int n = model.spec.seq_len;
    Eigen::MatrixXd cond(5, b), target(4 * n, b);
    for (int c = 0; c < b; ++c) {
        if (static_cast<int>(batch[c].controls.size()) != n)
            throw std::invalid_argument("lstm_mse_loss: sequence length mismatch");
        Eigen::VectorXd raw(5);
        raw << batch[c].time_mass, batch[c].alpha;
        cond.col(c) = model.cond_norm.normalize(raw);
        for (int s = 0; s < n; ++s)
            target.block<4, 1>(4 * s, c) = encode_control(batch[c].controls[s], model.magnitude_max);
    }
    nn::Tape tape(model.store);
    const int loss = tape.mean_all(tape.square(tape.sub(lstm_graph(tape, model, cond),
                                                        tape.input(target))));
    if (with_grad) tape.backward(loss);
    return tape.value(loss)(0, 0);
}

TrainHistory train_lstm(LstmModel& model, const std::vector<LstmSample>& data,
                        const TrainConfig& cfg) {
    cfg.validate();
    if (data.empty()) throw std::invalid_argument("train_lstm: empty dataset");
    std::mt19937_64 rng(cfg.seed);
    nn::AdamState adam;
    adam.lr = cfg.lr;
    TrainHistory hist;
    hist.loss_per_epoch.reserve(cfg.epochs);
    std::vector<int> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0.0;
        for (std::size_t s = 0; s < order.size(); s += cfg.batch_size) {
            const std::size_t e = std::min(order.size(), s + cfg.batch_size);
            std::vector<LstmSample> batch(e - s);
            for (std::size_t i = s; i < e; ++i) batch[i - s] = data[order[i]];
            model.store.zero_grads();
            const double loss = lstm_mse_loss(model, batch, true);
            nn::adam_step(adam, model.store.values(), model.store.grads());
            loss_sum += loss * static_cast<double>(batch.size());
        }
        hist.loss_per_epoch.push_back(loss_sum / static_cast<double>(data.size()));
    }
    return hist;
}

nlohmann::json LstmModel::checkpoint(const nlohmann::json& training_metadata) const {
    nlohmann::json arch = spec.to_json();
    arch["cond_normalization"] = {{"lo", cond_norm.lo}, {"hi", cond_norm.hi}};
    arch["magnitude_max"] = magnitude_max;
    return nn::make_checkpoint("lstm", arch, store.values(), rng_seed, training_metadata);
}

LstmModel LstmModel::from_checkpoint(const nlohmann::json& j) {
    if (j.at("model_kind").get<std::string>() != "lstm")
        throw std::invalid_argument("checkpoint: not an lstm model");
    LstmModel m;
    const auto& arch = j.at("architecture");
    m.spec = LstmSpec::from_json(arch);
    m.cond_norm.lo = arch.at("cond_normalization").at("lo").get<std::vector<double>>();
    m.cond_norm.hi = arch.at("cond_normalization").at("hi").get<std::vector<double>>();
    m.magnitude_max = arch.at("magnitude_max").get<double>();
    m.init(j.at("rng_seed").get<std::uint64_t>());
    std::vector<double> values = nn::base64_decode_doubles(j.at("parameters").get<std::string>());
    if (values.size() != m.store.size())
        throw std::invalid_argument("checkpoint: parameter count mismatch");
    m.store.values() = std::move(values);
    return m;
}

}  // namespace amorgs
