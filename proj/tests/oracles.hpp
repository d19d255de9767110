#pragma once

// Independent reference implementations the library is checked against.

#include <algorithm>
#include <cmath>
#include <limits>
#include <list>
#include <vector>

#include "madb/buffer_pool.hpp"
#include "madb/cost_model.hpp"
#include "madb/mlp.hpp"
#include "madb/random.hpp"

namespace madb::oracle {

// Plain list scanned linearly, most recent at the back.
struct ReferenceLru {
    std::size_t capacity;
    std::list<BlockId> items;

    bool access(BlockId b) {
        for (auto it = items.begin(); it != items.end(); ++it)
            if (*it == b) {
                items.erase(it);
                items.push_back(b);
                return true;
            }
        if (items.size() == capacity) items.pop_front();
        items.push_back(b);
        return false;
    }
};

// Skewed toward low block numbers so hits actually happen.
inline std::vector<BlockId> random_trace(std::size_t n, const std::vector<std::size_t>& widths, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<BlockId> trace;
    for (std::size_t i = 0; i < n; ++i) {
        const auto r = rng.below(widths.size());
        const auto w = widths[r];
        const auto b = rng.bernoulli(0.7) ? rng.below(std::min<std::uint64_t>(w, 8)) : rng.below(w);
        trace.push_back({static_cast<std::uint32_t>(r), static_cast<std::uint32_t>(b)});
    }
    return trace;
}

struct BruteOrder {
    double cost = std::numeric_limits<double>::infinity();
    std::vector<std::size_t> order;
};

// Every permutation in lexicographic order, keeping connected ones; the first
// minimum is the lexicographic tie-break.
inline BruteOrder brute_force_order(const Query& q, const Catalog& cat, const CostConstants& c) {
    BruteOrder best;
    auto order = q.relation_ids();
    std::sort(order.begin(), order.end());
    do {
        if (!is_connected_order(q, order)) continue;
        const double cost = cache_agnostic_cost(q, make_plan(q, order, cat, c), cat, c);
        if (cost < best.cost) {
            best.cost = cost;
            best.order = order;
        }
    } while (std::next_permutation(order.begin(), order.end()));
    return best;
}

struct GradientCheck {
    double max_relative_error = 0.0;
    std::size_t parameters = 0;
};

// Central differences of mse_loss(net(input), target) against backward().
// Entries where both gradients are below `floor` are compared absolutely.
inline GradientCheck gradient_check(Mlp net, const std::vector<double>& input, const std::vector<double>& target,
                                    double step = 1e-5, double floor = 1e-7) {
    const Gradients analytic = backward(net, input, target);
    GradientCheck out;
    out.parameters = net.parameter_count();
    for (std::size_t i = 0; i < out.parameters; ++i) {
        const double orig = net.parameter(i);
        net.set_parameter(i, orig + step);
        const double up = mse_loss(net.forward(input), target);
        net.set_parameter(i, orig - step);
        const double down = mse_loss(net.forward(input), target);
        net.set_parameter(i, orig);
        const double numeric = (up - down) / (2.0 * step);
        const double a = analytic.flat(i);
        const double scale = std::max(std::abs(a), std::abs(numeric));
        const double err = scale < floor ? std::abs(a - numeric) : std::abs(a - numeric) / scale;
        out.max_relative_error = std::max(out.max_relative_error, err);
    }
    return out;
}

// y = act(W x + b) evaluated with explicit loops over the saved layers.
inline std::vector<double> forward_loops(const Mlp& net, std::vector<double> x) {
    const auto& layers = net.layers();
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& L = layers[l];
        std::vector<double> y(L.outputs);
        for (std::size_t o = 0; o < L.outputs; ++o) {
            double s = L.biases[o];
            for (std::size_t i = 0; i < L.inputs; ++i) s += L.weights[o * L.inputs + i] * x[i];
            y[o] = (l + 1 < layers.size()) ? std::max(0.0, s) : s;
        }
        x = std::move(y);
    }
    return x;
}

}  // namespace madb::oracle
