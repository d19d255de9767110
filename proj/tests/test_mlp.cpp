#include <doctest.h>

#include <cmath>
#include <sstream>

#include "madb/errors.hpp"
#include "madb/mlp.hpp"
#include "madb/random.hpp"
#include "oracles.hpp"

using namespace madb;

namespace {

std::vector<double> random_vector(Rng& rng, std::size_t n, double scale = 1.0) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.uniform(-scale, scale);
    return v;
}

Mlp random_net(std::vector<std::size_t> dims, std::uint64_t seed) {
    Mlp net(std::move(dims), seed);
    // Non-zero biases so the bias paths are exercised too.
    Rng rng(seed + 1000);
    for (auto& l : net.layers())
        for (auto& b : l.biases) b = rng.uniform(-0.5, 0.5);
    return net;
}

double sum_squares(const Mlp& net) {
    double s = 0.0;
    for (std::size_t i = 0; i < net.parameter_count(); ++i) s += net.parameter(i) * net.parameter(i);
    return s;
}

}  // namespace

TEST_CASE("zero network outputs zero") {
    const Mlp net({4, 6, 2});
    CHECK(net.forward(std::vector<double>{1, -2, 3, 0.5}) == std::vector<double>{0, 0});
}

TEST_CASE("identity layer") {
    Mlp net({3, 3});
    auto& l = net.layers()[0];
    for (std::size_t i = 0; i < 3; ++i) l.weights[i * 3 + i] = 1.0;
    const std::vector<double> x{-1.5, 0.25, 7};
    CHECK(net.forward(x) == x);
}

TEST_CASE("forward matches the loop oracle") {
    Rng rng(3);
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const Mlp net = random_net({6, 9, 5, 3}, seed);
        const auto x = random_vector(rng, 6);
        const auto got = net.forward(x);
        const auto want = oracle::forward_loops(net, x);
        for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
    }
}

TEST_CASE("mse_loss") {
    CHECK(mse_loss(std::vector<double>{1, 2}, std::vector<double>{1, 2}) == 0.0);
    CHECK(mse_loss(std::vector<double>{2}, std::vector<double>{0}) == 4.0);
    Rng rng(5);
    for (int t = 0; t < 20; ++t) {
        const auto a = random_vector(rng, 7), b = random_vector(rng, 7);
        double s = 0.0;
        for (std::size_t i = 0; i < 7; ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
        CHECK(mse_loss(a, b) == doctest::Approx(s / 7.0).epsilon(1e-14));
    }
    CHECK_THROWS_AS(mse_loss(std::vector<double>{1}, std::vector<double>{1, 2}), ContractViolation);
}

TEST_CASE("backward at the target is zero") {
    const Mlp net = random_net({5, 7, 3}, 2);
    const std::vector<double> x{0.1, -0.3, 0.5, 0.9, -1};
    const auto g = backward(net, x, net.forward(x));
    for (std::size_t i = 0; i < g.size(); ++i) CHECK(g.flat(i) == 0.0);
}

TEST_CASE("output bias gradient is 2(pred - target)/dim") {
    const Mlp net = random_net({5, 7, 3}, 4);
    const std::vector<double> x{0.2, 0.1, -0.4, 0.3, 0.7};
    const std::vector<double> target{1, -1, 0.5};
    const auto pred = net.forward(x);
    const auto g = backward(net, x, target);
    for (std::size_t i = 0; i < 3; ++i) CHECK(g.biases.back()[i] == doctest::Approx(2.0 * (pred[i] - target[i]) / 3.0));
}

TEST_CASE("gradients match central finite differences") {
    Rng rng(17);
    double worst = 0.0;
    for (std::uint64_t trial = 0; trial < 100; ++trial) {
        const Mlp net = random_net({5, 7, 3}, 100 + trial);
        const auto check = oracle::gradient_check(net, random_vector(rng, 5), random_vector(rng, 3));
        CHECK(check.parameters == 5 * 7 + 7 + 7 * 3 + 3);
        worst = std::max(worst, check.max_relative_error);
    }
    CHECK(worst < 1e-4);
}

TEST_CASE("batched forward and backward agree with the per-sample path") {
    Rng rng(23);
    const Mlp net = random_net({5, 8, 6, 3}, 9);
    const std::size_t batch = 6;
    Eigen::MatrixXd inputs(5, batch), out_grads(3, batch);
    for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(batch); ++j) {
        for (Eigen::Index i = 0; i < 5; ++i) inputs(i, j) = rng.uniform(-1, 1);
        for (Eigen::Index i = 0; i < 3; ++i) out_grads(i, j) = rng.uniform(-1, 1);
    }
    const auto acts = net.forward_batch(inputs);
    Gradients batched(net), summed(net);
    net.backward_batch(acts, out_grads, batched);
    for (std::size_t j = 0; j < batch; ++j) {
        std::vector<double> x(5), g(3);
        for (std::size_t i = 0; i < 5; ++i) x[i] = inputs(i, j);
        for (std::size_t i = 0; i < 3; ++i) g[i] = out_grads(i, j);
        const auto single = net.forward(x);
        for (std::size_t i = 0; i < 3; ++i) CHECK(acts.values.back()(i, j) == doctest::Approx(single[i]).epsilon(1e-12));
        net.backward(net.forward_trace(x), g, summed);
    }
    for (std::size_t i = 0; i < batched.size(); ++i)
        CHECK(batched.flat(i) == doctest::Approx(summed.flat(i)).epsilon(1e-12));
}

TEST_CASE("adam with zero gradients leaves parameters alone") {
    Mlp net = random_net({3, 4, 2}, 6);
    const Mlp before = net;
    Adam adam(net, AdamConfig{});
    Gradients zero(net);
    adam.step(net, zero);
    CHECK(net == before);
}

TEST_CASE("first adam step moves each parameter by about lr against the gradient") {
    Mlp net = random_net({2, 3}, 8);
    const Mlp before = net;
    AdamConfig cfg;
    cfg.learning_rate = 0.01;
    Adam adam(net, cfg);
    Gradients g(net);
    Rng rng(1);
    for (auto& w : g.weights)
        for (auto& x : w) x = rng.uniform(-2, 2);
    for (auto& b : g.biases)
        for (auto& x : b) x = rng.uniform(-2, 2);
    adam.step(net, g);
    for (std::size_t i = 0; i < net.parameter_count(); ++i) {
        const double delta = net.parameter(i) - before.parameter(i);
        CHECK(delta == doctest::Approx(-0.01 * g.flat(i) / (std::abs(g.flat(i)) + 1e-8)).epsilon(1e-6));
    }
}

TEST_CASE("adam minimizes a quadratic") {
    // f(w) = |w|^2 over every parameter, gradient 2w.
    Mlp net = random_net({4, 5}, 12);
    const double start = sum_squares(net);
    AdamConfig cfg;
    cfg.learning_rate = 0.05;
    Adam adam(net, cfg);
    for (int step = 0; step < 100; ++step) {
        Gradients g(net);
        std::size_t k = 0;
        for (std::size_t l = 0; l < g.weights.size(); ++l) {
            for (auto& x : g.weights[l]) x = 2.0 * net.parameter(k++);
            for (auto& x : g.biases[l]) x = 2.0 * net.parameter(k++);
        }
        adam.step(net, g);
    }
    CHECK(adam.steps() == 100);
    CHECK(sum_squares(net) <= 0.1 * start);
}

TEST_CASE("adam refuses non-finite gradients") {
    Mlp net = random_net({2, 2}, 1);
    const Mlp before = net;
    Adam adam(net, AdamConfig{});
    Gradients g(net);
    g.weights[0][0] = std::nan("");
    CHECK_THROWS_AS(adam.step(net, g), TrainingError);
    CHECK(net == before);
}

TEST_CASE("save and load are bit exact") {
    const Mlp net = random_net({5, 7, 3}, 31);
    std::stringstream s;
    net.save(s);
    CHECK(Mlp::load(s) == net);
}

TEST_CASE("input length is checked") {
    const Mlp net({3, 2});
    CHECK_THROWS_AS(net.forward(std::vector<double>{1, 2}), ContractViolation);
}
