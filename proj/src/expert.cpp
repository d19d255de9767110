#include "madb/expert.hpp"

#include <limits>
#include <optional>

#include "madb/errors.hpp"

namespace madb {

ExpertPlanChoice dp_best_order(const Query& query, const Catalog& catalog, const CostConstants& constants) {
    const auto ids = query.relation_ids();
    const std::size_t n = ids.size();
    if (n < 1 || n > 20) throw PlanningError("expert supports 1..20 relations");
    if (!is_connected(ids, query.edges)) throw PlanningError("query " + std::to_string(query.query_id) + " is disconnected");

    // Scan cost does not depend on order; seeding every path with it makes the
    // floating-point accumulation identical to cache_agnostic_cost.
    double scan_total = 0.0;
    for (std::size_t id : ids) {
        const auto& qr = query.relation(id);
        const auto& rel = catalog.relation(id);
        const auto method = choose_access_method(qr, rel, constants);
        scan_total += constants.miss_cost * static_cast<double>(relation_block_trace(qr, rel, method, constants).size());
    }

    struct Entry {
        double cost = 0.0;
        std::vector<std::size_t> order;
    };
    const std::size_t full = (std::size_t{1} << n) - 1;
    std::vector<std::optional<Entry>> best(full + 1);
    for (std::size_t i = 0; i < n; ++i) best[std::size_t{1} << i] = Entry{scan_total, {ids[i]}};

    auto members = [&](std::size_t mask) {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < n; ++i)
            if (mask & (std::size_t{1} << i)) out.push_back(ids[i]);
        return out;
    };

    for (std::size_t mask = 1; mask <= full; ++mask) {
        if ((mask & (mask - 1)) == 0) continue;
        const auto nodes = members(mask);
        if (!is_connected(nodes, query.edges)) continue;
        const double cpu = constants.join_cpu_cost * cardinality_estimate(query, nodes, catalog, constants);
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t bit = std::size_t{1} << i;
            if (!(mask & bit) || !best[mask ^ bit]) continue;
            const auto& prev = *best[mask ^ bit];
            bool adjacent = false;
            for (std::size_t p : prev.order) adjacent = adjacent || query.edge_selectivity(p, ids[i]).has_value();
            if (!adjacent) continue;
            Entry cand{prev.cost + cpu, prev.order};
            cand.order.push_back(ids[i]);
            auto& slot = best[mask];
            if (!slot || cand.cost < slot->cost || (cand.cost == slot->cost && cand.order < slot->order))
                slot = std::move(cand);
        }
    }
    if (!best[full]) throw PlanningError("no connected left-deep order for query " + std::to_string(query.query_id));
    return {query.query_id, best[full]->order, best[full]->cost};
}

std::size_t fcfs_schedule(std::span<const QueuedQuery> queue) {
    if (queue.empty()) throw ContractViolation("fcfs_schedule on empty queue");
    std::size_t slot = 0;
    for (std::size_t i = 1; i < queue.size(); ++i)
        if (queue[i].arrival < queue[slot].arrival) slot = i;
    return slot;
}

}  // namespace madb
