#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "madb/catalog.hpp"
#include "madb/cost_model.hpp"

namespace madb {

struct ExpertPlanChoice {
    std::size_t query_id = 0;
    std::vector<std::size_t> order;
    double estimated_cost = 0.0;
};

/// Classical cost-based join ordering: subset dynamic programming over
/// connected left-deep orders, priced with cache_agnostic_cost. Among
/// equal-cost orders the lexicographically smallest wins.
ExpertPlanChoice dp_best_order(const Query& query, const Catalog& catalog, const CostConstants& constants);

/// A query waiting in the scheduler queue; arrival is its position in the stream.
struct QueuedQuery {
    Query query;
    std::size_t arrival = 0;
};

/// Slot of the earliest-arrived query.
std::size_t fcfs_schedule(std::span<const QueuedQuery> queue);

}  // namespace madb
