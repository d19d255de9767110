#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace madb {

/// Fully connected layer; weights are row-major (outputs x inputs).
struct DenseLayer {
    std::size_t inputs = 0;
    std::size_t outputs = 0;
    std::vector<double> weights;
    std::vector<double> biases;

    friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

class Gradients;

/// Feed-forward network: ReLU on hidden layers, linear output.
class Mlp {
public:
    /// Post-activation values per layer; values[0] is the input.
    struct Activations {
        std::vector<std::vector<double>> values;
    };

    Mlp() = default;
    /// Zero-initialized parameters.
    explicit Mlp(std::vector<std::size_t> dims);
    /// Uniform init in +-sqrt(6 / (fan_in + fan_out)), zero biases.
    Mlp(std::vector<std::size_t> dims, std::uint64_t seed);

    const std::vector<std::size_t>& dims() const { return dims_; }
    std::size_t input_size() const { return dims_.front(); }
    std::size_t output_size() const { return dims_.back(); }
    std::vector<DenseLayer>& layers() { return layers_; }
    const std::vector<DenseLayer>& layers() const { return layers_; }

    std::vector<double> forward(std::span<const double> input) const;
    Activations forward_trace(std::span<const double> input) const;

    /// Batched variant: each column of `inputs` is one sample.
    struct BatchActivations {
        std::vector<Eigen::MatrixXd> values;
    };
    BatchActivations forward_batch(const Eigen::MatrixXd& inputs) const;
    /// output_grads is outputs x batch; gradients are summed over the batch.
    void backward_batch(const BatchActivations& acts, const Eigen::MatrixXd& output_grads, Gradients& grads) const;

    /// Accumulates dLoss/dparams into `grads` given dLoss/doutput.
    void backward(const Activations& acts, std::span<const double> output_grad, Gradients& grads) const;

    std::size_t parameter_count() const;
    /// Flat parameter view: per layer, weights then biases.
    double parameter(std::size_t index) const;
    void set_parameter(std::size_t index, double value);
    bool finite() const;

    /// Text format: "mlp <n_layers+1>", the dims, then each layer's weights and
    /// biases in row-major order as hex floats (bit-exact round trip).
    void save(std::ostream& out) const;
    static Mlp load(std::istream& in);

    friend bool operator==(const Mlp&, const Mlp&) = default;

private:
    void check_input(std::span<const double> input) const;

    std::vector<std::size_t> dims_;
    std::vector<DenseLayer> layers_;
};

/// Same shapes as an Mlp's parameters.
class Gradients {
public:
    explicit Gradients(const Mlp& net);

    std::vector<std::vector<double>> weights;
    std::vector<std::vector<double>> biases;

    void scale(double factor);
    void clear();
    bool finite() const;
    std::size_t size() const;
    double flat(std::size_t index) const;
};

double mse_loss(std::span<const double> pred, std::span<const double> target);

/// Exact gradients of mse_loss(net(input), target).
Gradients backward(const Mlp& net, std::span<const double> input, std::span<const double> target);

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Bias-corrected Adam moments for one network.
class Adam {
public:
    Adam(const Mlp& net, AdamConfig config);

    /// Throws TrainingError on non-finite gradients; the network is left untouched then.
    void step(Mlp& net, const Gradients& grads);
    std::size_t steps() const { return t_; }
    const AdamConfig& config() const { return config_; }

private:
    AdamConfig config_;
    std::size_t t_ = 0;
    std::vector<std::vector<double>> m_w_, v_w_, m_b_, v_b_;
};

}  // namespace madb
