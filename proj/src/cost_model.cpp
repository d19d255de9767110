#include "madb/cost_model.hpp"

#include <algorithm>
#include <numeric>

#include "madb/errors.hpp"

namespace madb {

AccessMethod choose_access_method(const QueryRelation& qr, const Relation& relation, const CostConstants& constants) {
    if (!relation.has_index || qr.block_probs.empty()) return AccessMethod::full_scan;
    const double mean =
        std::accumulate(qr.block_probs.begin(), qr.block_probs.end(), 0.0) / static_cast<double>(qr.block_probs.size());
    return mean < constants.index_scan_mean_threshold ? AccessMethod::index_scan : AccessMethod::full_scan;
}

bool is_connected_order(const Query& query, std::span<const std::size_t> order) {
    for (std::size_t k = 1; k < order.size(); ++k) {
        bool linked = false;
        for (std::size_t i = 0; i < k && !linked; ++i) linked = query.edge_selectivity(order[i], order[k]).has_value();
        if (!linked) return false;
    }
    return true;
}

void validate_plan(const Query& query, const JoinPlan& plan, const Catalog& catalog) {
    if (plan.order.size() != query.num_relations())
        throw PlanningError("plan for query " + std::to_string(query.query_id) + " does not cover every relation");
    if (plan.access_methods.size() != plan.order.size()) throw PlanningError("access methods not parallel to order");
    std::vector<std::size_t> sorted = plan.order;
    std::sort(sorted.begin(), sorted.end());
    if (sorted != query.relation_ids()) throw PlanningError("plan order is not a permutation of the query relations");
    if (!is_connected_order(query, plan.order)) throw PlanningError("plan order contains a cross product");
    for (std::size_t i = 0; i < plan.order.size(); ++i)
        if (plan.access_methods[i] == AccessMethod::index_scan && !catalog.relation(plan.order[i]).has_index)
            throw PlanningError("index scan on unindexed relation " + catalog.relation(plan.order[i]).name);
}

JoinPlan make_plan(const Query& query, std::vector<std::size_t> order, const Catalog& catalog,
                   const CostConstants& constants) {
    JoinPlan plan;
    plan.query_id = query.query_id;
    plan.order = std::move(order);
    for (std::size_t id : plan.order) {
        if (!query.contains(id)) throw PlanningError("relation " + std::to_string(id) + " not in query");
        plan.access_methods.push_back(choose_access_method(query.relation(id), catalog.relation(id), constants));
    }
    validate_plan(query, plan, catalog);
    return plan;
}

std::vector<BlockId> relation_block_trace(const QueryRelation& qr, const Relation& relation, AccessMethod method,
                                          const CostConstants& constants) {
    std::vector<BlockId> trace;
    const auto rel = static_cast<std::uint32_t>(relation.id);
    if (method == AccessMethod::full_scan) {
        trace.reserve(relation.num_blocks);
        for (std::size_t j = 0; j < relation.num_blocks; ++j) trace.push_back({rel, static_cast<std::uint32_t>(j)});
        return trace;
    }
    if (!relation.has_index) throw PlanningError("index scan on unindexed relation " + relation.name);
    for (std::size_t j = 0; j < relation.index_blocks; ++j)
        trace.push_back({rel, static_cast<std::uint32_t>(relation.num_blocks + j)});
    for (std::size_t j = 0; j < relation.num_blocks && j < qr.block_probs.size(); ++j)
        if (qr.block_probs[j] >= constants.index_block_threshold) trace.push_back({rel, static_cast<std::uint32_t>(j)});
    return trace;
}

std::vector<BlockId> plan_block_trace(const Query& query, const JoinPlan& plan, const Catalog& catalog,
                                      const CostConstants& constants) {
    validate_plan(query, plan, catalog);
    std::vector<BlockId> trace;
    for (std::size_t i = 0; i < plan.order.size(); ++i) {
        const auto part = relation_block_trace(query.relation(plan.order[i]), catalog.relation(plan.order[i]),
                                               plan.access_methods[i], constants);
        trace.insert(trace.end(), part.begin(), part.end());
    }
    return trace;
}

double cardinality_estimate(const Query& query, std::span<const std::size_t> prefix, const Catalog& catalog,
                            const CostConstants& constants) {
    if (prefix.empty()) throw PlanningError("empty join prefix");
    const std::vector<std::size_t> nodes(prefix.begin(), prefix.end());
    if (!is_connected(nodes, query.edges)) throw PlanningError("disconnected join prefix");
    for (std::size_t id : prefix)
        if (!query.contains(id)) throw PlanningError("relation " + std::to_string(id) + " not in query");
    // Relations in id order so a set's estimate does not depend on join order.
    double card = 1.0;
    for (const auto& qr : query.relations) {
        if (std::find(prefix.begin(), prefix.end(), qr.relation_id) == prefix.end()) continue;
        card *= static_cast<double>(catalog.relation(qr.relation_id).num_blocks) * constants.rows_per_block *
                qr.base_selectivity;
    }
    for (const auto& e : query.edges) {
        const bool l = std::find(prefix.begin(), prefix.end(), e.left) != prefix.end();
        const bool r = std::find(prefix.begin(), prefix.end(), e.right) != prefix.end();
        if (l && r) card *= e.selectivity;
    }
    return card;
}

ExecutionResult execute(const Query& query, const JoinPlan& plan, const Catalog& catalog, BufferPool& pool,
                        const CostConstants& constants) {
    validate_plan(query, plan, catalog);
    ExecutionResult result;
    for (std::size_t i = 0; i < plan.order.size(); ++i) {
        const auto id = plan.order[i];
        double level_cost = 0.0;
        for (const auto& b : relation_block_trace(query.relation(id), catalog.relation(id), plan.access_methods[i], constants)) {
            const auto outcome = pool.access(b);
            result.trace.push_back(b);
            result.outcomes.push_back(outcome);
            if (outcome == AccessOutcome::hit) {
                ++result.buffer_hits;
                level_cost += constants.hit_cost;
            } else {
                level_cost += constants.miss_cost;
            }
        }
        if (i == 0) {
            result.first_scan_latency = level_cost;
        } else {
            const std::span<const std::size_t> prefix(plan.order.data(), i + 1);
            level_cost += constants.join_cpu_cost * cardinality_estimate(query, prefix, catalog, constants);
            result.per_join_latencies.push_back(level_cost);
        }
    }
    result.block_requests = result.trace.size();
    result.total_latency = result.first_scan_latency;
    for (double c : result.per_join_latencies) result.total_latency += c;
    return result;
}

double cache_agnostic_cost(const Query& query, const JoinPlan& plan, const Catalog& catalog,
                           const CostConstants& constants) {
    validate_plan(query, plan, catalog);
    double cost = 0.0;
    for (std::size_t i = 0; i < plan.order.size(); ++i) {
        const auto id = plan.order[i];
        cost += constants.miss_cost *
                static_cast<double>(
                    relation_block_trace(query.relation(id), catalog.relation(id), plan.access_methods[i], constants).size());
    }
    for (std::size_t k = 1; k < plan.order.size(); ++k) {
        const std::span<const std::size_t> prefix(plan.order.data(), k + 1);
        cost += constants.join_cpu_cost * cardinality_estimate(query, prefix, catalog, constants);
    }
    return cost;
}

double reference_latency(const Catalog& catalog, const CostConstants& constants) {
    return constants.miss_cost * static_cast<double>(catalog.total_blocks());
}

}  // namespace madb
