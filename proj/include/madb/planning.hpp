#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "madb/agents.hpp"
#include "madb/catalog.hpp"
#include "madb/cost_model.hpp"
#include "madb/encoding.hpp"
#include "madb/expert.hpp"

namespace madb {

/// Fixed environment facts the optimizer agent's MDP is built from.
struct PlanningContext {
    const Catalog* catalog = nullptr;
    const CostConstants* constants = nullptr;
    EncodingConfig encoding;
    SharingMode mode = SharingMode::full;
    double reference_latency = 1.0;
};

/// What the optimizer remembers about the previously executed query.
struct PlanHistory {
    Grid last_plan;
    double last_plan_cost = 0.0;

    static PlanHistory empty(std::size_t num_relations) { return {Grid(num_relations, num_relations - 1), 0.0}; }
    void record(std::span<const std::size_t> order, double latency, const PlanningContext& ctx);
};

/// The optimizer picks one relation per action. With nothing joined yet any
/// query relation is valid (it becomes order[0]); afterwards only unjoined
/// relations adjacent to the prefix are.
ActionMask optimizer_action_mask(const Query& query, std::span<const std::size_t> partial, std::size_t num_relations);

std::vector<double> optimizer_observation(const PlanningContext& ctx, const Query& query,
                                          std::span<const std::size_t> partial, const PlanHistory& history,
                                          const std::optional<BufferShare>& share);

/// Per-action rewards of an executed order: action 0 pays the first scan,
/// action k pays the level-k join.
std::vector<double> optimizer_step_rewards(const ExecutionResult& result, double reference_latency);

/// One transition per action of `order`, the last one terminal.
std::vector<Transition> optimizer_transitions(const PlanningContext& ctx, const Query& query,
                                              std::span<const std::size_t> order, const ExecutionResult& result,
                                              const PlanHistory& history, const std::optional<BufferShare>& share,
                                              bool demonstration);

/// Builds an order action by action with the agent's epsilon-greedy policy.
std::vector<std::size_t> plan_with_agent(const PlanningContext& ctx, QAgent& agent, const Query& query,
                                         const PlanHistory& history, const std::optional<BufferShare>& share,
                                         double epsilon);

struct DemonstrationSettings {
    std::size_t epochs = 0;
    std::size_t pool_capacity = 1;
};

/// Executes the expert's plan for every query (one pool threaded through the
/// sequence), stores each expert action as a demonstration transition with its
/// measured reward, then runs `epochs` passes of td_update over them.
/// Returns the number of demonstration transitions stored.
std::size_t pretrain_from_demonstrations(QAgent& agent, const PlanningContext& ctx, std::span<const Query> queries,
                                         const DemonstrationSettings& settings);

/// Buffer encoding plus the query's block probabilities, as sent to the optimizer.
BufferShare make_buffer_share(const Grid& buffer, const Query& query, const PlanningContext& ctx);

}  // namespace madb
