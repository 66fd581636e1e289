#include "amorgs/nn/tape.hpp"

#include <cmath>
#include <stdexcept>

namespace amorgs::nn {

Activation activation_from_string(const std::string& name) {
    if (name == "identity") return Activation::Identity;
    if (name == "leaky-relu") return Activation::LeakyRelu;
    if (name == "sigmoid") return Activation::Sigmoid;
    if (name == "tanh") return Activation::Tanh;
    throw std::invalid_argument("unknown activation: " + name);
}

std::string activation_name(Activation a) {
    switch (a) {
        case Activation::Identity: return "identity";
        case Activation::LeakyRelu: return "leaky-relu";
        case Activation::Sigmoid: return "sigmoid";
        case Activation::Tanh: return "tanh";
    }
    return "identity";
}

namespace {
constexpr double kLeakySlope = 0.01;
}

Eigen::MatrixXd apply_activation(const Eigen::MatrixXd& x, Activation a) {
    switch (a) {
        case Activation::Identity:
            return x;
        case Activation::LeakyRelu:
            return x.unaryExpr([](double v) { return v > 0.0 ? v : kLeakySlope * v; });
        case Activation::Sigmoid:
            return x.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
        case Activation::Tanh:
            return x.array().tanh().matrix();
    }
    return x;
}

Eigen::MatrixXd activation_derivative(const Eigen::MatrixXd& x, Activation a) {
    switch (a) {
        case Activation::Identity:
            return Eigen::MatrixXd::Ones(x.rows(), x.cols());
        case Activation::LeakyRelu:
            return x.unaryExpr([](double v) { return v > 0.0 ? 1.0 : kLeakySlope; });
        case Activation::Sigmoid: {
            Eigen::MatrixXd s = apply_activation(x, Activation::Sigmoid);
            return (s.array() * (1.0 - s.array())).matrix();
        }
        case Activation::Tanh: {
            Eigen::MatrixXd t = x.array().tanh().matrix();
            return (1.0 - t.array().square()).matrix();
        }
    }
    return Eigen::MatrixXd::Ones(x.rows(), x.cols());
}

ParamRef ParamStore::add(int rows, int cols) {
    ParamRef p{static_cast<int>(values_.size()), rows, cols};
    values_.resize(values_.size() + static_cast<std::size_t>(rows) * cols, 0.0);
    grads_.resize(values_.size(), 0.0);
    return p;
}

Eigen::Map<const Eigen::MatrixXd> ParamStore::value(const ParamRef& p) const {
    return {values_.data() + p.offset, p.rows, p.cols};
}

Eigen::Map<Eigen::MatrixXd> ParamStore::value(const ParamRef& p) {
    return {values_.data() + p.offset, p.rows, p.cols};
}

Eigen::Map<Eigen::MatrixXd> ParamStore::grad(const ParamRef& p) {
    return {grads_.data() + p.offset, p.rows, p.cols};
}

void ParamStore::zero_grads() { std::fill(grads_.begin(), grads_.end(), 0.0); }

void ParamStore::init_glorot(const ParamRef& p, std::mt19937_64& rng) {
    const double limit = std::sqrt(6.0 / (p.rows + p.cols));
    auto m = value(p);
    for (int c = 0; c < p.cols; ++c) {
        for (int r = 0; r < p.rows; ++r) {
            // portable uniform in [0, 1) from the raw 64-bit stream
            const double u = (rng() >> 11) * 0x1.0p-53;
            m(r, c) = (2.0 * u - 1.0) * limit;
        }
    }
}

void ParamStore::init_zero(const ParamRef& p) { value(p).setZero(); }

int Tape::push(Node n) {
    n.grad = Eigen::MatrixXd::Zero(n.value.rows(), n.value.cols());
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
}

int Tape::input(Eigen::MatrixXd v) {
    Node n;
    n.op = Op::Input;
    n.value = std::move(v);
    return push(std::move(n));
}

int Tape::affine(const ParamRef& w, const ParamRef& b, int x) {
    const auto& xv = nodes_[x].value;
    if (w.cols != xv.rows()) throw std::invalid_argument("affine: shape mismatch");
    if (b.rows != w.rows || b.cols != 1) throw std::invalid_argument("affine: bad bias shape");
    Node n;
    n.op = Op::Affine;
    n.parents = {x};
    n.w = w;
    n.b = b;
    n.value = store_.value(w) * xv;
    n.value.colwise() += store_.value(b).col(0);
    return push(std::move(n));
}

int Tape::matmul(const ParamRef& w, int x) {
    const auto& xv = nodes_[x].value;
    if (w.cols != xv.rows()) throw std::invalid_argument("matmul: shape mismatch");
    Node n;
    n.op = Op::Matmul;
    n.parents = {x};
    n.w = w;
    n.value = store_.value(w) * xv;
    return push(std::move(n));
}

int Tape::activation(int x, Activation a) {
    Node n;
    n.op = Op::Act;
    n.parents = {x};
    n.act = a;
    n.value = apply_activation(nodes_[x].value, a);
    return push(std::move(n));
}

int Tape::add(int a, int b) {
    if (nodes_[a].value.rows() != nodes_[b].value.rows() ||
        nodes_[a].value.cols() != nodes_[b].value.cols())
        throw std::invalid_argument("add: shape mismatch");
    Node n;
    n.op = Op::Add;
    n.parents = {a, b};
    n.value = nodes_[a].value + nodes_[b].value;
    return push(std::move(n));
}

int Tape::sub(int a, int b) {
    if (nodes_[a].value.rows() != nodes_[b].value.rows() ||
        nodes_[a].value.cols() != nodes_[b].value.cols())
        throw std::invalid_argument("sub: shape mismatch");
    Node n;
    n.op = Op::Sub;
    n.parents = {a, b};
    n.value = nodes_[a].value - nodes_[b].value;
    return push(std::move(n));
}

int Tape::hadamard(int a, int b) {
    if (nodes_[a].value.rows() != nodes_[b].value.rows() ||
        nodes_[a].value.cols() != nodes_[b].value.cols())
        throw std::invalid_argument("hadamard: shape mismatch");
    Node n;
    n.op = Op::Hadamard;
    n.parents = {a, b};
    n.value = nodes_[a].value.cwiseProduct(nodes_[b].value);
    return push(std::move(n));
}

int Tape::scale(int x, double s) {
    Node n;
    n.op = Op::Scale;
    n.parents = {x};
    n.aux = s;
    n.value = s * nodes_[x].value;
    return push(std::move(n));
}

int Tape::add_scalar(int x, double s) {
    Node n;
    n.op = Op::AddScalar;
    n.parents = {x};
    n.aux = s;
    n.value = nodes_[x].value.array() + s;
    return push(std::move(n));
}

int Tape::exp(int x) {
    Node n;
    n.op = Op::Exp;
    n.parents = {x};
    n.value = nodes_[x].value.array().exp().matrix();
    return push(std::move(n));
}

int Tape::log(int x) {
    Node n;
    n.op = Op::Log;
    n.parents = {x};
    n.value = nodes_[x].value.array().log().matrix();
    return push(std::move(n));
}

int Tape::square(int x) {
    Node n;
    n.op = Op::Square;
    n.parents = {x};
    n.value = nodes_[x].value.array().square().matrix();
    return push(std::move(n));
}

int Tape::concat_rows(const std::vector<int>& xs) {
    if (xs.empty()) throw std::invalid_argument("concat_rows: empty list");
    const auto cols = nodes_[xs[0]].value.cols();
    Eigen::Index rows = 0;
    for (int x : xs) {
        if (nodes_[x].value.cols() != cols) throw std::invalid_argument("concat_rows: batch mismatch");
        rows += nodes_[x].value.rows();
    }
    Node n;
    n.op = Op::ConcatRows;
    n.parents = xs;
    n.value.resize(rows, cols);
    Eigen::Index at = 0;
    for (int x : xs) {
        n.value.middleRows(at, nodes_[x].value.rows()) = nodes_[x].value;
        at += nodes_[x].value.rows();
    }
    return push(std::move(n));
}

int Tape::slice_rows(int x, int start, int len) {
    if (start < 0 || len <= 0 || start + len > nodes_[x].value.rows())
        throw std::invalid_argument("slice_rows: out of range");
    Node n;
    n.op = Op::SliceRows;
    n.parents = {x};
    n.start = start;
    n.len = len;
    n.value = nodes_[x].value.middleRows(start, len);
    return push(std::move(n));
}

int Tape::broadcast_cols(int x, int ncols) {
    if (nodes_[x].value.cols() != 1) throw std::invalid_argument("broadcast_cols: expects one column");
    Node n;
    n.op = Op::BroadcastCols;
    n.parents = {x};
    n.value = nodes_[x].value.replicate(1, ncols);
    return push(std::move(n));
}

int Tape::colsum(int x) {
    Node n;
    n.op = Op::ColSum;
    n.parents = {x};
    n.value = nodes_[x].value.colwise().sum();
    return push(std::move(n));
}

int Tape::sum_all(int x) {
    Node n;
    n.op = Op::SumAll;
    n.parents = {x};
    n.value = Eigen::MatrixXd::Constant(1, 1, nodes_[x].value.sum());
    return push(std::move(n));
}

int Tape::mean_all(int x) {
    Node n;
    n.op = Op::MeanAll;
    n.parents = {x};
    n.value = Eigen::MatrixXd::Constant(1, 1, nodes_[x].value.mean());
    return push(std::move(n));
}

int Tape::log_softmax_rows(int x) {
    const auto& v = nodes_[x].value;
    Node n;
    n.op = Op::LogSoftmaxRows;
    n.parents = {x};
    n.value.resize(v.rows(), v.cols());
    for (Eigen::Index c = 0; c < v.cols(); ++c) {
        const double mx = v.col(c).maxCoeff();
        const double lse = mx + std::log((v.col(c).array() - mx).exp().sum());
        n.value.col(c) = v.col(c).array() - lse;
    }
    return push(std::move(n));
}

void Tape::backward(int loss) {
    if (nodes_[loss].value.rows() != 1 || nodes_[loss].value.cols() != 1)
        throw std::invalid_argument("backward: loss must be scalar");
    if (!nodes_[loss].value.allFinite())
        throw std::runtime_error("backward: loss is not finite");
    nodes_[loss].grad(0, 0) = 1.0;

    for (int i = loss; i >= 0; --i) {
        Node& n = nodes_[i];
        if (n.grad.isZero(0.0)) continue;
        const Eigen::MatrixXd& g = n.grad;
        switch (n.op) {
            case Op::Input:
                break;
            case Op::Affine:
            case Op::Matmul: {
                const auto& xv = nodes_[n.parents[0]].value;
                store_.grad(n.w) += g * xv.transpose();
                if (n.op == Op::Affine) store_.grad(n.b).col(0) += g.rowwise().sum();
                nodes_[n.parents[0]].grad += store_.value(n.w).transpose() * g;
                break;
            }
            case Op::Act:
                nodes_[n.parents[0]].grad +=
                    g.cwiseProduct(activation_derivative(nodes_[n.parents[0]].value, n.act));
                break;
            case Op::Add:
                nodes_[n.parents[0]].grad += g;
                nodes_[n.parents[1]].grad += g;
                break;
            case Op::Sub:
                nodes_[n.parents[0]].grad += g;
                nodes_[n.parents[1]].grad -= g;
                break;
            case Op::Hadamard:
                nodes_[n.parents[0]].grad += g.cwiseProduct(nodes_[n.parents[1]].value);
                nodes_[n.parents[1]].grad += g.cwiseProduct(nodes_[n.parents[0]].value);
                break;
            case Op::Scale:
                nodes_[n.parents[0]].grad += n.aux * g;
                break;
            case Op::AddScalar:
                nodes_[n.parents[0]].grad += g;
                break;
            case Op::Exp:
                nodes_[n.parents[0]].grad += g.cwiseProduct(n.value);
                break;
            case Op::Log:
                nodes_[n.parents[0]].grad +=
                    g.cwiseQuotient(nodes_[n.parents[0]].value);
                break;
            case Op::Square:
                nodes_[n.parents[0]].grad += 2.0 * g.cwiseProduct(nodes_[n.parents[0]].value);
                break;
            case Op::ConcatRows: {
                Eigen::Index at = 0;
                for (int p : n.parents) {
                    nodes_[p].grad += g.middleRows(at, nodes_[p].value.rows());
                    at += nodes_[p].value.rows();
                }
                break;
            }
            case Op::SliceRows:
                nodes_[n.parents[0]].grad.middleRows(n.start, n.len) += g;
                break;
            case Op::BroadcastCols:
                nodes_[n.parents[0]].grad += g.rowwise().sum();
                break;
            case Op::ColSum:
                nodes_[n.parents[0]].grad +=
                    Eigen::MatrixXd::Ones(nodes_[n.parents[0]].value.rows(), 1) * g;
                break;
            case Op::SumAll:
                nodes_[n.parents[0]].grad.array() += g(0, 0);
                break;
            case Op::MeanAll:
                nodes_[n.parents[0]].grad.array() += g(0, 0) / nodes_[n.parents[0]].value.size();
                break;
            case Op::LogSoftmaxRows: {
                Eigen::MatrixXd soft = n.value.array().exp().matrix();
                Eigen::RowVectorXd colsums = g.colwise().sum();
                nodes_[n.parents[0]].grad += g - soft * colsums.asDiagonal();
                break;
            }
        }
    }
}

void Mlp::init(ParamStore& store, std::mt19937_64& rng) {
    if (spec.widths.size() < 2) throw std::invalid_argument("mlp: needs at least two widths");
    weights.clear();
    biases.clear();
    for (std::size_t i = 0; i + 1 < spec.widths.size(); ++i) {
        ParamRef w = store.add(spec.widths[i + 1], spec.widths[i]);
        ParamRef b = store.add(spec.widths[i + 1], 1);
        store.init_glorot(w, rng);
        store.init_zero(b);
        weights.push_back(w);
        biases.push_back(b);
    }
}

int Mlp::forward(Tape& tape, int x) const {
    int h = x;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        h = tape.affine(weights[i], biases[i], h);
        const bool last = (i + 1 == weights.size());
        const Activation a = last ? spec.final_act : spec.hidden;
        if (a != Activation::Identity) h = tape.activation(h, a);
    }
    return h;
}

void adam_step(AdamState& state, std::vector<double>& params, const std::vector<double>& grads) {
    if (params.size() != grads.size()) throw std::invalid_argument("adam_step: shape mismatch");
    if (state.m.size() != params.size()) {
        state.m.assign(params.size(), 0.0);
        state.v.assign(params.size(), 0.0);
    }
    ++state.step;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grads[i];
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * grads[i] * grads[i];
        const double mhat = state.m[i] / bc1;
        const double vhat = state.v[i] / bc2;
        params[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
    }
}

double gradient_check(ParamStore& store, const std::function<double()>& loss, double h,
                      std::size_t max_checked) {
    std::vector<double> analytic = store.grads();
    std::vector<std::size_t> indices;
    if (store.size() <= max_checked) {
        indices.resize(store.size());
        for (std::size_t i = 0; i < indices.size(); ++i) indices[i] = i;
    } else {
        std::mt19937_64 rng(0xA110C8ull);
        for (std::size_t i = 0; i < max_checked; ++i) indices.push_back(rng() % store.size());
    }
    double worst = 0.0;
    for (std::size_t idx : indices) {
        const double saved = store.values()[idx];
        store.values()[idx] = saved + h;
        const double fp = loss();
        store.values()[idx] = saved - h;
        const double fm = loss();
        store.values()[idx] = saved;
        const double numeric = (fp - fm) / (2.0 * h);
        const double denom = std::max({1e-8, std::abs(numeric), std::abs(analytic[idx])});
        worst = std::max(worst, std::abs(numeric - analytic[idx]) / denom);
    }
    return worst;
}

}  // namespace amorgs::nn
