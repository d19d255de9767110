#include "madb/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "madb/errors.hpp"
#include "madb/random.hpp"

namespace madb {

Mlp::Mlp(std::vector<std::size_t> dims) : dims_(std::move(dims)) {
    if (dims_.size() < 2) throw ContractViolation("mlp needs at least input and output sizes");
    for (auto d : dims_)
        if (d == 0) throw ContractViolation("mlp layer of width 0");
    for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
        DenseLayer layer;
        layer.inputs = dims_[l];
        layer.outputs = dims_[l + 1];
        layer.weights.assign(layer.inputs * layer.outputs, 0.0);
        layer.biases.assign(layer.outputs, 0.0);
        layers_.push_back(std::move(layer));
    }
}

Mlp::Mlp(std::vector<std::size_t> dims, std::uint64_t seed) : Mlp(std::move(dims)) {
    Rng rng(seed);
    for (auto& layer : layers_) {
        const double limit = std::sqrt(6.0 / static_cast<double>(layer.inputs + layer.outputs));
        for (auto& w : layer.weights) w = rng.uniform(-limit, limit);
    }
}

void Mlp::check_input(std::span<const double> input) const {
    if (dims_.empty() || input.size() != dims_.front())
        throw ContractViolation("mlp input has length " + std::to_string(input.size()) + ", expected " +
                                std::to_string(dims_.empty() ? 0 : dims_.front()));
}

Mlp::Activations Mlp::forward_trace(std::span<const double> input) const {
    check_input(input);
    Activations acts;
    acts.values.reserve(layers_.size() + 1);
    acts.values.emplace_back(input.begin(), input.end());
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const auto& layer = layers_[l];
        const auto& x = acts.values.back();
        std::vector<double> y(layer.outputs);
        const bool hidden = l + 1 < layers_.size();
        for (std::size_t o = 0; o < layer.outputs; ++o) {
            const double* w = layer.weights.data() + o * layer.inputs;
            double sum = layer.biases[o];
            for (std::size_t i = 0; i < layer.inputs; ++i) sum += w[i] * x[i];
            y[o] = hidden && sum < 0.0 ? 0.0 : sum;
        }
        acts.values.push_back(std::move(y));
    }
    return acts;
}

std::vector<double> Mlp::forward(std::span<const double> input) const {
    auto acts = forward_trace(input);
    return std::move(acts.values.back());
}

void Mlp::backward(const Activations& acts, std::span<const double> output_grad, Gradients& grads) const {
    if (acts.values.size() != layers_.size() + 1) throw ContractViolation("activations do not match network depth");
    if (output_grad.size() != output_size()) throw ContractViolation("output gradient has the wrong length");
    std::vector<double> delta(output_grad.begin(), output_grad.end());
    for (std::size_t l = layers_.size(); l-- > 0;) {
        const auto& layer = layers_[l];
        const auto& x = acts.values[l];
        auto& gw = grads.weights[l];
        auto& gb = grads.biases[l];
        std::vector<double> prev(l > 0 ? layer.inputs : 0, 0.0);
        for (std::size_t o = 0; o < layer.outputs; ++o) {
            const double d = delta[o];
            if (d == 0.0) continue;
            gb[o] += d;
            double* g = gw.data() + o * layer.inputs;
            for (std::size_t i = 0; i < layer.inputs; ++i) g[i] += d * x[i];
            if (l > 0) {
                const double* w = layer.weights.data() + o * layer.inputs;
                for (std::size_t i = 0; i < layer.inputs; ++i) prev[i] += w[i] * d;
            }
        }
        if (l > 0) {
            // ReLU derivative: zero where the hidden unit was inactive.
            for (std::size_t i = 0; i < prev.size(); ++i)
                if (x[i] <= 0.0) prev[i] = 0.0;
            delta = std::move(prev);
        }
    }
}

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

}  // namespace

Mlp::BatchActivations Mlp::forward_batch(const Eigen::MatrixXd& inputs) const {
    if (dims_.empty() || static_cast<std::size_t>(inputs.rows()) != dims_.front())
        throw ContractViolation("mlp batch input has the wrong row count");
    BatchActivations acts;
    acts.values.reserve(layers_.size() + 1);
    acts.values.push_back(inputs);
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const auto& layer = layers_[l];
        const Eigen::Map<const RowMajor> w(layer.weights.data(), static_cast<Eigen::Index>(layer.outputs),
                                           static_cast<Eigen::Index>(layer.inputs));
        const Eigen::Map<const Eigen::VectorXd> b(layer.biases.data(), static_cast<Eigen::Index>(layer.outputs));
        Eigen::MatrixXd y = w * acts.values.back();
        y.colwise() += b;
        if (l + 1 < layers_.size()) y = y.cwiseMax(0.0);
        acts.values.push_back(std::move(y));
    }
    return acts;
}

void Mlp::backward_batch(const BatchActivations& acts, const Eigen::MatrixXd& output_grads, Gradients& grads) const {
    if (acts.values.size() != layers_.size() + 1) throw ContractViolation("activations do not match network depth");
    if (static_cast<std::size_t>(output_grads.rows()) != output_size() ||
        output_grads.cols() != acts.values.front().cols())
        throw ContractViolation("output gradient batch has the wrong shape");
    Eigen::MatrixXd delta = output_grads;
    for (std::size_t l = layers_.size(); l-- > 0;) {
        const auto& layer = layers_[l];
        const auto& x = acts.values[l];
        Eigen::Map<RowMajor> gw(grads.weights[l].data(), static_cast<Eigen::Index>(layer.outputs),
                                static_cast<Eigen::Index>(layer.inputs));
        Eigen::Map<Eigen::VectorXd> gb(grads.biases[l].data(), static_cast<Eigen::Index>(layer.outputs));
        gw.noalias() += delta * x.transpose();
        gb += delta.rowwise().sum();
        if (l > 0) {
            const Eigen::Map<const RowMajor> w(layer.weights.data(), static_cast<Eigen::Index>(layer.outputs),
                                               static_cast<Eigen::Index>(layer.inputs));
            Eigen::MatrixXd prev = w.transpose() * delta;
            // ReLU derivative: zero where the hidden unit was inactive.
            delta = (x.array() > 0.0).select(prev, 0.0);
        }
    }
}

std::size_t Mlp::parameter_count() const {
    std::size_t n = 0;
    for (const auto& layer : layers_) n += layer.weights.size() + layer.biases.size();
    return n;
}

double Mlp::parameter(std::size_t index) const {
    for (const auto& layer : layers_) {
        if (index < layer.weights.size()) return layer.weights[index];
        index -= layer.weights.size();
        if (index < layer.biases.size()) return layer.biases[index];
        index -= layer.biases.size();
    }
    throw ContractViolation("parameter index out of range");
}

void Mlp::set_parameter(std::size_t index, double value) {
    for (auto& layer : layers_) {
        if (index < layer.weights.size()) {
            layer.weights[index] = value;
            return;
        }
        index -= layer.weights.size();
        if (index < layer.biases.size()) {
            layer.biases[index] = value;
            return;
        }
        index -= layer.biases.size();
    }
    throw ContractViolation("parameter index out of range");
}

bool Mlp::finite() const {
    for (const auto& layer : layers_) {
        for (double w : layer.weights)
            if (!std::isfinite(w)) return false;
        for (double b : layer.biases)
            if (!std::isfinite(b)) return false;
    }
    return true;
}

void Mlp::save(std::ostream& out) const {
    out << "mlp " << dims_.size() << '\n';
    for (std::size_t i = 0; i < dims_.size(); ++i) out << (i ? " " : "") << dims_[i];
    out << '\n' << std::hexfloat;
    for (const auto& layer : layers_) {
        for (std::size_t i = 0; i < layer.weights.size(); ++i) out << (i ? " " : "") << layer.weights[i];
        out << '\n';
        for (std::size_t i = 0; i < layer.biases.size(); ++i) out << (i ? " " : "") << layer.biases[i];
        out << '\n';
    }
    out << std::defaultfloat;
}

Mlp Mlp::load(std::istream& in) {
    std::string magic;
    std::size_t n = 0;
    if (!(in >> magic >> n) || magic != "mlp" || n < 2) throw ContractViolation("not an mlp checkpoint");
    std::vector<std::size_t> dims(n);
    for (auto& d : dims)
        if (!(in >> d)) throw ContractViolation("truncated mlp header");
    Mlp net(dims);
    // operator>> does not parse hex floats portably; strtod does.
    auto read = [&in]() {
        std::string token;
        if (!(in >> token)) throw ContractViolation("truncated mlp parameters");
        char* end = nullptr;
        const double v = std::strtod(token.c_str(), &end);
        if (end == token.c_str()) throw ContractViolation("bad mlp parameter '" + token + "'");
        return v;
    };
    for (auto& layer : net.layers_) {
        for (auto& w : layer.weights) w = read();
        for (auto& b : layer.biases) b = read();
    }
    return net;
}

Gradients::Gradients(const Mlp& net) {
    for (const auto& layer : net.layers()) {
        weights.emplace_back(layer.weights.size(), 0.0);
        biases.emplace_back(layer.biases.size(), 0.0);
    }
}

void Gradients::scale(double factor) {
    for (auto& w : weights)
        for (auto& x : w) x *= factor;
    for (auto& b : biases)
        for (auto& x : b) x *= factor;
}

void Gradients::clear() {
    for (auto& w : weights) std::fill(w.begin(), w.end(), 0.0);
    for (auto& b : biases) std::fill(b.begin(), b.end(), 0.0);
}

bool Gradients::finite() const {
    for (const auto& w : weights)
        for (double x : w)
            if (!std::isfinite(x)) return false;
    for (const auto& b : biases)
        for (double x : b)
            if (!std::isfinite(x)) return false;
    return true;
}

std::size_t Gradients::size() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) n += weights[l].size() + biases[l].size();
    return n;
}

double Gradients::flat(std::size_t index) const {
    for (std::size_t l = 0; l < weights.size(); ++l) {
        if (index < weights[l].size()) return weights[l][index];
        index -= weights[l].size();
        if (index < biases[l].size()) return biases[l][index];
        index -= biases[l].size();
    }
    throw ContractViolation("gradient index out of range");
}

double mse_loss(std::span<const double> pred, std::span<const double> target) {
    if (pred.size() != target.size() || pred.empty()) throw ContractViolation("mse_loss length mismatch");
    double sum = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - target[i];
        sum += d * d;
    }
    return sum / static_cast<double>(pred.size());
}

Gradients backward(const Mlp& net, std::span<const double> input, std::span<const double> target) {
    const auto acts = net.forward_trace(input);
    const auto& pred = acts.values.back();
    if (target.size() != pred.size()) throw ContractViolation("target length mismatch");
    std::vector<double> grad(pred.size());
    const double n = static_cast<double>(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) grad[i] = 2.0 * (pred[i] - target[i]) / n;
    Gradients grads(net);
    net.backward(acts, grad, grads);
    return grads;
}

Adam::Adam(const Mlp& net, AdamConfig config) : config_(config) {
    for (const auto& layer : net.layers()) {
        m_w_.emplace_back(layer.weights.size(), 0.0);
        v_w_.emplace_back(layer.weights.size(), 0.0);
        m_b_.emplace_back(layer.biases.size(), 0.0);
        v_b_.emplace_back(layer.biases.size(), 0.0);
    }
}

void Adam::step(Mlp& net, const Gradients& grads) {
    if (grads.weights.size() != m_w_.size()) throw ContractViolation("gradient shape does not match optimizer state");
    if (!grads.finite()) throw TrainingError("non-finite gradient");
    ++t_;
    const double b1 = config_.beta1;
    const double b2 = config_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    const double lr = config_.learning_rate;
    const double eps = config_.epsilon;
    auto update = [&](std::vector<double>& param, const std::vector<double>& g, std::vector<double>& m,
                      std::vector<double>& v) {
        for (std::size_t i = 0; i < param.size(); ++i) {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            param[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
        }
    };
    auto& layers = net.layers();
    for (std::size_t l = 0; l < layers.size(); ++l) {
        update(layers[l].weights, grads.weights[l], m_w_[l], v_w_[l]);
        update(layers[l].biases, grads.biases[l], m_b_[l], v_b_[l]);
    }
}

}  // namespace madb
