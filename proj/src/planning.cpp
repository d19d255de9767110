#include "madb/planning.hpp"

#include <algorithm>
#include <iostream>

#include "madb/errors.hpp"

namespace madb {

void PlanHistory::record(std::span<const std::size_t> order, double latency, const PlanningContext& ctx) {
    last_plan = encode_join_levels(order, ctx.catalog->size());
    last_plan_cost = std::clamp(latency / ctx.reference_latency, 0.0, 1.0);
}

ActionMask optimizer_action_mask(const Query& query, std::span<const std::size_t> partial, std::size_t num_relations) {
    ActionMask mask(num_relations, 0);
    for (const auto& qr : query.relations) {
        const auto id = qr.relation_id;
        if (id >= num_relations) throw ContractViolation("relation id out of range");
        if (std::find(partial.begin(), partial.end(), id) != partial.end()) continue;
        if (partial.empty()) {
            mask[id] = 1;
            continue;
        }
        for (auto p : partial)
            if (query.edge_selectivity(p, id)) {
                mask[id] = 1;
                break;
            }
    }
    return mask;
}

std::vector<double> optimizer_observation(const PlanningContext& ctx, const Query& query,
                                          std::span<const std::size_t> partial, const PlanHistory& history,
                                          const std::optional<BufferShare>& share) {
    const auto rel = relations_vector(query, ctx.catalog->size());
    OptimizerInputs inputs;
    inputs.partial_order = partial;
    inputs.last_plan = &history.last_plan;
    inputs.last_plan_cost = history.last_plan_cost;
    inputs.relations = rel;
    return assemble_optimizer_obs(inputs, share, ctx.mode, ctx.catalog->size(), ctx.encoding);
}

std::vector<double> optimizer_step_rewards(const ExecutionResult& result, double reference_latency) {
    std::vector<double> rewards{optimizer_reward(result.first_scan_latency, reference_latency)};
    for (double c : result.per_join_latencies) rewards.push_back(optimizer_reward(c, reference_latency));
    return rewards;
}

std::vector<Transition> optimizer_transitions(const PlanningContext& ctx, const Query& query,
                                              std::span<const std::size_t> order, const ExecutionResult& result,
                                              const PlanHistory& history, const std::optional<BufferShare>& share,
                                              bool demonstration) {
    const std::size_t r = ctx.catalog->size();
    const auto rewards = optimizer_step_rewards(result, ctx.reference_latency);
    if (rewards.size() != order.size()) throw ContractViolation("execution result does not match the order");
    std::vector<Transition> out;
    out.reserve(order.size());
    auto state = optimizer_observation(ctx, query, order.first(0), history, share);
    for (std::size_t k = 0; k < order.size(); ++k) {
        Transition t;
        t.mask = optimizer_action_mask(query, order.first(k), r);
        t.state = std::move(state);
        t.action = order[k];
        t.reward = rewards[k];
        t.terminal = k + 1 == order.size();
        t.next_state = optimizer_observation(ctx, query, order.first(k + 1), history, share);
        t.next_mask = t.terminal ? ActionMask(r, 0) : optimizer_action_mask(query, order.first(k + 1), r);
        t.demonstration = demonstration;
        state = t.next_state;
        out.push_back(std::move(t));
    }
    return out;
}

std::vector<std::size_t> plan_with_agent(const PlanningContext& ctx, QAgent& agent, const Query& query,
                                         const PlanHistory& history, const std::optional<BufferShare>& share,
                                         double epsilon) {
    std::vector<std::size_t> order;
    while (order.size() < query.num_relations()) {
        const auto obs = optimizer_observation(ctx, query, order, history, share);
        const auto mask = optimizer_action_mask(query, order, ctx.catalog->size());
        order.push_back(agent.select_action(obs, mask, epsilon));
    }
    return order;
}

BufferShare make_buffer_share(const Grid& buffer, const Query& query, const PlanningContext& ctx) {
    return {buffer, encode_query_block_probs(query, *ctx.catalog, ctx.encoding.downsample_width, *ctx.constants)};
}

std::size_t pretrain_from_demonstrations(QAgent& agent, const PlanningContext& ctx, std::span<const Query> queries,
                                         const DemonstrationSettings& settings) {
    if (settings.epochs == 0) return 0;
    const Catalog& catalog = *ctx.catalog;
    BufferPool pool(settings.pool_capacity, catalog);
    PlanHistory history = PlanHistory::empty(catalog.size());
    std::vector<Transition> demos;
    for (const auto& query : queries) {
        try {
            const auto choice = dp_best_order(query, catalog, *ctx.constants);
            std::optional<BufferShare> share;
            if (ctx.mode != SharingMode::no_sharing)
                share = make_buffer_share(encode_buffer(snapshot_bitmap(pool, catalog), ctx.encoding.downsample_width),
                                          query, ctx);
            const auto plan = make_plan(query, choice.order, catalog, *ctx.constants);
            const auto result = execute(query, plan, catalog, pool, *ctx.constants);
            auto ts = optimizer_transitions(ctx, query, choice.order, result, history, share, true);
            demos.insert(demos.end(), std::make_move_iterator(ts.begin()), std::make_move_iterator(ts.end()));
            history.record(choice.order, result.total_latency, ctx);
        } catch (const PlanningError& e) {
            std::cerr << "warning: skipping demonstration query " << query.query_id << ": " << e.what() << '\n';
        }
    }
    if (demos.empty()) return 0;

    Rng rng(derive_seed(demos.size(), 0xde05));
    std::vector<std::size_t> idx(demos.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    const std::size_t batch = agent.config().batch_size;
    std::vector<const Transition*> mb;
    for (std::size_t epoch = 0; epoch < settings.epochs; ++epoch) {
        rng.shuffle(idx.begin(), idx.end());
        for (std::size_t start = 0; start < idx.size(); start += batch) {
            mb.clear();
            for (std::size_t i = start; i < std::min(idx.size(), start + batch); ++i) mb.push_back(&demos[idx[i]]);
            agent.td_update(mb);
        }
    }
    const std::size_t count = demos.size();
    for (auto& t : demos) agent.remember(std::move(t));
    return count;
}

}  // namespace madb
