#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "madb/cost_model.hpp"
#include "madb/mlp.hpp"
#include "madb/random.hpp"

namespace madb {

using ActionMask = std::vector<std::uint8_t>;

struct Transition {
    std::vector<double> state;
    /// Valid actions in `state`; only needed for demonstration margins.
    ActionMask mask;
    std::size_t action = 0;
    double reward = 0.0;
    std::vector<double> next_state;
    ActionMask next_mask;
    bool terminal = false;
    /// Taken by the expert; adds the large-margin imitation term in td_update.
    bool demonstration = false;
};

/// Ring buffer of transitions with uniform sampling (no repeats within a batch).
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity);

    void push(Transition t);
    std::size_t size() const { return items_.size(); }
    std::size_t capacity() const { return capacity_; }
    const Transition& at(std::size_t i) const { return items_.at(i); }
    /// min(batch, size) distinct indices, uniformly drawn.
    std::vector<std::size_t> sample_indices(std::size_t batch, Rng& rng) const;

private:
    std::size_t capacity_;
    std::size_t next_ = 0;
    std::vector<Transition> items_;
};

struct AgentConfig {
    std::vector<std::size_t> hidden_layers{128, 128};
    /// Step size of the network optimizer (the alpha of the Q-update).
    double learning_rate = 1e-3;
    double gamma = 0.9;
    double epsilon_start = 1.0;
    double epsilon_min = 0.05;
    double epsilon_decay = 0.995;
    std::size_t batch_size = 32;
    std::size_t replay_capacity = 10000;
    std::size_t target_sync_period = 200;
    /// Gradient updates per environment step once the replay holds a batch.
    std::size_t updates_per_step = 1;
    /// Weight of the large-margin term on demonstration transitions.
    double demo_margin_weight = 1.0;
    /// Margin added to non-expert actions in that term.
    double demo_margin = 0.05;
};

/// Weight sharing across actions: one network scores each action from the
/// shared context plus that action's own rows of the observation. Action k
/// reads [offset + k * length, offset + (k + 1) * length) of every row group.
struct ActionSharing {
    struct Rows {
        std::size_t offset = 0;
        std::size_t length = 0;
    };
    std::vector<Rows> rows;
    /// Drop the row groups from the shared context.
    bool exclude_rows = false;
    /// Append a one-hot action id to the network input.
    bool one_hot = false;
};

/// Deep Q-learning agent with an online and a target network.
class QAgent {
public:
    QAgent(std::size_t input_size, std::size_t num_actions, AgentConfig config, std::uint64_t seed,
           std::optional<ActionSharing> sharing = std::nullopt);

    std::size_t input_size() const { return input_size_; }
    std::size_t num_actions() const { return num_actions_; }
    const std::optional<ActionSharing>& action_sharing() const { return sharing_; }
    const AgentConfig& config() const { return config_; }

    std::vector<double> q_values(std::span<const double> observation) const;
    /// Highest-valued valid action; ties go to the lowest index.
    std::size_t greedy_action(std::span<const double> observation, const ActionMask& mask) const;
    /// Epsilon-greedy over valid actions.
    std::size_t select_action(std::span<const double> observation, const ActionMask& mask, double epsilon);

    double epsilon() const { return epsilon_; }
    void set_epsilon(double epsilon) { epsilon_ = epsilon; }
    /// Multiplicative decay, floored at epsilon_min.
    void decay_epsilon();

    void remember(Transition t) { replay_.push(std::move(t)); }
    const ReplayBuffer& replay() const { return replay_; }

    /// y = r (terminal) or r + gamma * max over valid next actions of target Q.
    std::vector<double> td_targets(std::span<const Transition* const> batch) const;
    /// One Adam step on the batch's mean squared TD error; returns that loss.
    double td_update(std::span<const Transition* const> batch);
    /// Samples a batch and updates, if the replay holds a full batch.
    std::optional<double> train_step();

    void sync_target();
    std::size_t updates() const { return updates_; }
    std::size_t updates_since_sync() const { return since_sync_; }

    const Mlp& online() const { return online_; }
    const Mlp& target() const { return target_; }
    Mlp& mutable_online() { return online_; }

    /// Online network only; loading also syncs the target.
    void save(std::ostream& out) const { online_.save(out); }
    void load(std::istream& in);

private:
    /// Network inputs for a batch of observations (one column each).
    Eigen::MatrixXd network_inputs(const Eigen::MatrixXd& observations) const;
    /// Network outputs rearranged to actions x batch.
    Eigen::MatrixXd action_values(const Eigen::MatrixXd& outputs, Eigen::Index batch) const;

    AgentConfig config_;
    std::size_t input_size_;
    std::size_t num_actions_;
    std::optional<ActionSharing> sharing_;
    /// Observation indices feeding the network for each action.
    std::vector<std::vector<std::size_t>> gather_;
    Mlp online_;
    Mlp target_;
    Adam adam_;
    ReplayBuffer replay_;
    Rng rng_;
    double epsilon_;
    std::size_t updates_ = 0;
    std::size_t since_sync_ = 0;
};

using SchedulerAgent = QAgent;
using OptimizerAgent = QAgent;

/// Buffer hit ratio of the query's run (0 when it requested nothing).
double scheduler_reward(const ExecutionResult& result);

/// -(latency / reference), clipped to [-1, 0].
double optimizer_reward(double latency, double reference_latency);

}  // namespace madb
