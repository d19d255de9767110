#include "madb/agents.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>

#include "madb/errors.hpp"

namespace madb {

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity_ == 0) throw ConfigError("replay capacity must be positive");
}

void ReplayBuffer::push(Transition t) {
    if (items_.size() < capacity_) {
        items_.push_back(std::move(t));
    } else {
        items_[next_] = std::move(t);
    }
    next_ = (next_ + 1) % capacity_;
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t batch, Rng& rng) const {
    const std::size_t n = items_.size();
    const std::size_t k = std::min(batch, n);
    // Floyd's algorithm: k distinct indices from [0, n).
    std::vector<std::size_t> picked;
    picked.reserve(k);
    for (std::size_t j = n - k; j < n; ++j) {
        const auto t = static_cast<std::size_t>(rng.below(j + 1));
        if (std::find(picked.begin(), picked.end(), t) == picked.end()) picked.push_back(t);
        else picked.push_back(j);
    }
    return picked;
}

namespace {

std::vector<std::size_t> layer_dims(std::size_t input, const std::vector<std::size_t>& hidden, std::size_t output) {
    std::vector<std::size_t> dims{input};
    dims.insert(dims.end(), hidden.begin(), hidden.end());
    dims.push_back(output);
    return dims;
}

void check_mask(const ActionMask& mask, std::size_t actions) {
    if (mask.size() != actions) throw ContractViolation("action mask has the wrong length");
    if (std::none_of(mask.begin(), mask.end(), [](std::uint8_t m) { return m != 0; }))
        throw ContractViolation("action mask has no valid action");
}

std::vector<std::vector<std::size_t>> gather_indices(std::size_t input_size, std::size_t actions,
                                                     const std::optional<ActionSharing>& sharing) {
    if (!sharing) return {};
    if (sharing->rows.empty()) throw ConfigError("action sharing needs at least one row group");
    std::vector<std::uint8_t> in_rows(input_size, 0);
    for (const auto& g : sharing->rows) {
        if (g.length == 0 || g.offset + actions * g.length > input_size)
            throw ConfigError("action row group does not fit the observation");
        std::fill_n(in_rows.begin() + static_cast<std::ptrdiff_t>(g.offset), actions * g.length, std::uint8_t{1});
    }
    std::vector<std::size_t> context;
    for (std::size_t i = 0; i < input_size; ++i)
        if (!sharing->exclude_rows || !in_rows[i]) context.push_back(i);
    std::vector<std::vector<std::size_t>> out(actions, context);
    for (std::size_t k = 0; k < actions; ++k)
        for (const auto& g : sharing->rows)
            for (std::size_t j = 0; j < g.length; ++j) out[k].push_back(g.offset + k * g.length + j);
    return out;
}

std::size_t network_input(const std::vector<std::vector<std::size_t>>& gather, std::size_t input_size,
                          const std::optional<ActionSharing>& sharing) {
    if (!sharing) return input_size;
    return gather.front().size() + (sharing->one_hot ? gather.size() : 0);
}

}  // namespace

QAgent::QAgent(std::size_t input_size, std::size_t num_actions, AgentConfig config, std::uint64_t seed,
               std::optional<ActionSharing> sharing)
    : config_(std::move(config)),
      input_size_(input_size),
      num_actions_(num_actions),
      sharing_(std::move(sharing)),
      gather_(gather_indices(input_size, num_actions, sharing_)),
      online_(layer_dims(network_input(gather_, input_size, sharing_), config_.hidden_layers, sharing_ ? 1 : num_actions),
              derive_seed(seed, 1)),
      target_(online_),
      adam_(online_, AdamConfig{config_.learning_rate, 0.9, 0.999, 1e-8}),
      replay_(config_.replay_capacity),
      rng_(derive_seed(seed, 2)),
      epsilon_(config_.epsilon_start) {
    if (!(config_.gamma >= 0.0 && config_.gamma < 1.0)) throw ConfigError("gamma must lie in [0,1)");
    if (config_.epsilon_start < 0.0 || config_.epsilon_start > 1.0 || config_.epsilon_min < 0.0 ||
        config_.epsilon_min > 1.0)
        throw ConfigError("epsilon must lie in [0,1]");
    if (config_.batch_size == 0) throw ConfigError("batch size must be positive");
    if (config_.target_sync_period == 0) throw ConfigError("target sync period must be positive");
}

Eigen::MatrixXd QAgent::network_inputs(const Eigen::MatrixXd& observations) const {
    if (!sharing_) return observations;
    const auto actions = static_cast<Eigen::Index>(num_actions_);
    const auto width = static_cast<Eigen::Index>(gather_.front().size());
    const Eigen::Index rows = width + (sharing_->one_hot ? actions : 0);
    Eigen::MatrixXd in = Eigen::MatrixXd::Zero(rows, observations.cols() * actions);
    for (Eigen::Index b = 0; b < observations.cols(); ++b)
        for (Eigen::Index k = 0; k < actions; ++k) {
            const Eigen::Index c = b * actions + k;
            const auto& idx = gather_[static_cast<std::size_t>(k)];
            for (Eigen::Index i = 0; i < width; ++i) in(i, c) = observations(static_cast<Eigen::Index>(idx[static_cast<std::size_t>(i)]), b);
            if (sharing_->one_hot) in(width + k, c) = 1.0;
        }
    return in;
}

Eigen::MatrixXd QAgent::action_values(const Eigen::MatrixXd& outputs, Eigen::Index batch) const {
    if (!sharing_) return outputs;
    return Eigen::Map<const Eigen::MatrixXd>(outputs.data(), static_cast<Eigen::Index>(num_actions_), batch);
}

std::vector<double> QAgent::q_values(std::span<const double> observation) const {
    if (observation.size() != input_size_) throw ContractViolation("observation has the wrong length");
    if (!sharing_) return online_.forward(observation);
    const Eigen::Map<const Eigen::VectorXd> obs(observation.data(), static_cast<Eigen::Index>(observation.size()));
    const auto out = action_values(online_.forward_batch(network_inputs(obs)).values.back(), 1);
    return {out.data(), out.data() + out.size()};
}

std::size_t QAgent::greedy_action(std::span<const double> observation, const ActionMask& mask) const {
    check_mask(mask, num_actions());
    const auto q = q_values(observation);
    std::size_t best = num_actions();
    for (std::size_t a = 0; a < q.size(); ++a)
        if (mask[a] && (best == num_actions() || q[a] > q[best])) best = a;
    return best;
}

std::size_t QAgent::select_action(std::span<const double> observation, const ActionMask& mask, double epsilon) {
    check_mask(mask, num_actions());
    if (rng_.uniform() < epsilon) {
        const auto valid = static_cast<std::uint64_t>(std::count_if(mask.begin(), mask.end(), [](auto m) { return m != 0; }));
        auto pick = rng_.below(valid);
        for (std::size_t a = 0; a < mask.size(); ++a)
            if (mask[a] && pick-- == 0) return a;
    }
    return greedy_action(observation, mask);
}

void QAgent::decay_epsilon() { epsilon_ = std::max(config_.epsilon_min, epsilon_ * config_.epsilon_decay); }

namespace {

Eigen::MatrixXd stack_states(std::span<const Transition* const> batch, std::size_t dim, bool next) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(batch.size()));
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const auto& s = next ? batch[i]->next_state : batch[i]->state;
        if (s.size() != dim) throw ContractViolation("transition state has the wrong length");
        m.col(static_cast<Eigen::Index>(i)) = Eigen::Map<const Eigen::VectorXd>(s.data(), static_cast<Eigen::Index>(dim));
    }
    return m;
}

}  // namespace

std::vector<double> QAgent::td_targets(std::span<const Transition* const> batch) const {
    std::vector<const Transition*> live;
    for (const Transition* t : batch)
        if (!t->terminal) {
            check_mask(t->next_mask, num_actions());
            live.push_back(t);
        }
    Eigen::MatrixXd next_q;
    if (!live.empty())
        next_q = action_values(target_.forward_batch(network_inputs(stack_states(live, input_size(), true))).values.back(),
                               static_cast<Eigen::Index>(live.size()));
    std::vector<double> targets;
    targets.reserve(batch.size());
    std::size_t col = 0;
    for (const Transition* t : batch) {
        double y = t->reward;
        if (!t->terminal) {
            double best = -std::numeric_limits<double>::infinity();
            for (std::size_t a = 0; a < num_actions(); ++a)
                if (t->next_mask[a]) best = std::max(best, next_q(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(col)));
            ++col;
            y += config_.gamma * best;
        }
        if (!std::isfinite(y)) throw TrainingError("non-finite TD target");
        targets.push_back(y);
    }
    return targets;
}

double QAgent::td_update(std::span<const Transition* const> batch) {
    if (batch.empty()) throw ContractViolation("td_update on an empty batch");
    for (const Transition* t : batch)
        if (t->action >= num_actions()) throw ContractViolation("transition action out of range");
    const auto targets = td_targets(batch);
    const double scale = 1.0 / static_cast<double>(batch.size());
    const auto acts = online_.forward_batch(network_inputs(stack_states(batch, input_size(), false)));
    const auto q = action_values(acts.values.back(), static_cast<Eigen::Index>(batch.size()));
    Eigen::MatrixXd out_grad = Eigen::MatrixXd::Zero(q.rows(), q.cols());
    double loss = 0.0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const Transition& t = *batch[i];
        const auto c = static_cast<Eigen::Index>(i);
        const auto act = static_cast<Eigen::Index>(t.action);
        const double err = q(act, c) - targets[i];
        loss += err * err * scale;
        out_grad(act, c) = 2.0 * err * scale;
        if (t.demonstration && config_.demo_margin_weight > 0.0 && t.mask.size() == num_actions()) {
            // max_a [Q(s,a) + margin * (a != expert)] - Q(s, expert)
            Eigen::Index best = act;
            double best_v = q(act, c);
            for (std::size_t a = 0; a < num_actions(); ++a) {
                if (!t.mask[a] || a == t.action) continue;
                const double v = q(static_cast<Eigen::Index>(a), c) + config_.demo_margin;
                if (v > best_v) {
                    best_v = v;
                    best = static_cast<Eigen::Index>(a);
                }
            }
            if (best != act) {
                loss += config_.demo_margin_weight * (best_v - q(act, c)) * scale;
                out_grad(best, c) += config_.demo_margin_weight * scale;
                out_grad(act, c) -= config_.demo_margin_weight * scale;
            }
        }
    }
    Gradients grads(online_);
    if (sharing_) {
        const Eigen::Map<const Eigen::MatrixXd> flat(out_grad.data(), 1, out_grad.size());
        online_.backward_batch(acts, flat, grads);
    } else {
        online_.backward_batch(acts, out_grad, grads);
    }
    adam_.step(online_, grads);
    ++updates_;
    if (++since_sync_ >= config_.target_sync_period) sync_target();
    return loss;
}

std::optional<double> QAgent::train_step() {
    if (replay_.size() < config_.batch_size) return std::nullopt;
    const auto idx = replay_.sample_indices(config_.batch_size, rng_);
    std::vector<const Transition*> batch;
    batch.reserve(idx.size());
    for (auto i : idx) batch.push_back(&replay_.at(i));
    return td_update(batch);
}

void QAgent::sync_target() {
    target_ = online_;
    since_sync_ = 0;
}

void QAgent::load(std::istream& in) {
    Mlp net = Mlp::load(in);
    if (net.dims() != online_.dims()) throw ContractViolation("checkpoint shape does not match agent");
    online_ = std::move(net);
    adam_ = Adam(online_, adam_.config());
    sync_target();
}

double scheduler_reward(const ExecutionResult& result) { return result.hit_ratio(); }

double optimizer_reward(double latency, double reference_latency) {
    if (!(reference_latency > 0.0)) throw ContractViolation("reference latency must be positive");
    return std::clamp(-(latency / reference_latency), -1.0, 0.0);
}

}  // namespace madb
