#ifndef AMORGS_NN_TAPE_HPP
#define AMORGS_NN_TAPE_HPP

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace amorgs::nn {

enum class Activation { Identity, LeakyRelu, Sigmoid, Tanh };

Activation activation_from_string(const std::string& name);
std::string activation_name(Activation a);

/// A view into the flat parameter storage: a rows x cols matrix at `offset`.
struct ParamRef {
    int offset = 0;
    int rows = 0;
    int cols = 0;
    int size() const { return rows * cols; }
};

/// Flat 64-bit parameter storage with matching gradient accumulators.
class ParamStore {
public:
    ParamRef add(int rows, int cols);

    Eigen::Map<const Eigen::MatrixXd> value(const ParamRef& p) const;
    Eigen::Map<Eigen::MatrixXd> value(const ParamRef& p);
    Eigen::Map<Eigen::MatrixXd> grad(const ParamRef& p);

    std::vector<double>& values() { return values_; }
    const std::vector<double>& values() const { return values_; }
    std::vector<double>& grads() { return grads_; }
    std::size_t size() const { return values_.size(); }

    void zero_grads();

    /// Glorot-uniform weights in +-sqrt(6 / (fan_in + fan_out)).
    void init_glorot(const ParamRef& p, std::mt19937_64& rng);
    void init_zero(const ParamRef& p);

private:
    std::vector<double> values_;
    std::vector<double> grads_;
};

/// Reverse-mode tape over matrix-valued nodes. Columns are batch samples;
/// parameters broadcast across columns. backward() accumulates into the
/// ParamStore gradients, so zero_grads() before each loss evaluation.
class Tape {
public:
    explicit Tape(ParamStore& store) : store_(store) {}

    int input(Eigen::MatrixXd v);
    int affine(const ParamRef& w, const ParamRef& b, int x);  // W x + b 1^T
    int matmul(const ParamRef& w, int x);
    int activation(int x, Activation a);
    int add(int a, int b);
    int sub(int a, int b);
    int hadamard(int a, int b);
    int scale(int x, double s);
    int add_scalar(int x, double s);
    int exp(int x);
    int log(int x);
    int square(int x);
    int concat_rows(const std::vector<int>& xs);
    int slice_rows(int x, int start, int len);
    int broadcast_cols(int x, int ncols);  // R x 1 -> R x ncols
    int colsum(int x);                     // R x B -> 1 x B
    int sum_all(int x);                    // -> 1 x 1
    int mean_all(int x);                   // -> 1 x 1
    int log_softmax_rows(int x);           // per-column softmax over rows

    const Eigen::MatrixXd& value(int node) const { return nodes_[node].value; }
    const Eigen::MatrixXd& grad(int node) const { return nodes_[node].grad; }

    /// Reverse sweep from a 1x1 loss node. Throws on non-scalar loss or
    /// non-finite values anywhere in the graph.
    void backward(int loss);

private:
    enum class Op {
        Input, Affine, Matmul, Act, Add, Sub, Hadamard, Scale, AddScalar,
        Exp, Log, Square, ConcatRows, SliceRows, BroadcastCols, ColSum,
        SumAll, MeanAll, LogSoftmaxRows
    };
    struct Node {
        Op op;
        std::vector<int> parents;
        Eigen::MatrixXd value;
        Eigen::MatrixXd grad;
        ParamRef w, b;
        Activation act = Activation::Identity;
        double aux = 0.0;
        int start = 0, len = 0;
    };
    int push(Node n);

    ParamStore& store_;
    std::vector<Node> nodes_;
};

Eigen::MatrixXd apply_activation(const Eigen::MatrixXd& x, Activation a);
Eigen::MatrixXd activation_derivative(const Eigen::MatrixXd& x, Activation a);

/// Fully connected stack. widths = [in, h1, ..., out] as in the architecture
/// tables; `hidden` applies to every layer but the last, `final` to the last.
struct MlpSpec {
    std::vector<int> widths;
    Activation hidden = Activation::LeakyRelu;
    Activation final_act = Activation::Identity;
};

struct Mlp {
    MlpSpec spec;
    std::vector<ParamRef> weights;
    std::vector<ParamRef> biases;

    void init(ParamStore& store, std::mt19937_64& rng);
    int forward(Tape& tape, int x) const;
    int in_dim() const { return spec.widths.front(); }
    int out_dim() const { return spec.widths.back(); }
};

/// Bias-corrected Adam over the flat parameter vector.
struct AdamState {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    long step = 0;
    std::vector<double> m;
    std::vector<double> v;
};

void adam_step(AdamState& state, std::vector<double>& params, const std::vector<double>& grads);

/// Central-difference check of store gradients against `loss`, which must
/// evaluate the loss at the store's current parameters WITHOUT touching the
/// gradients. Analytic gradients must already be accumulated in the store.
/// Parameters above `max_checked` are subsampled with a fixed seed.
/// Returns the max relative error max(|a - n|) / max(1e-8, |a|, |n|).
double gradient_check(ParamStore& store, const std::function<double()>& loss, double h = 1e-5,
                      std::size_t max_checked = 10000);

}  // namespace amorgs::nn

#endif
