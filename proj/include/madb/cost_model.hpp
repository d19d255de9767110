#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "madb/buffer_pool.hpp"
#include "madb/catalog.hpp"

namespace madb {

/// Abstract cost units for the execution model.
struct CostConstants {
    double hit_cost = 1.0;
    double miss_cost = 10.0;
    double join_cpu_cost = 0.001;  // per estimated output row
    double rows_per_block = 100.0;
    /// Index scans read a base block iff its access probability >= this.
    double index_block_threshold = 0.5;
    /// Index scan chosen iff the relation is indexed and its mean access probability < this.
    double index_scan_mean_threshold = 0.3;
};

enum class AccessMethod : std::uint8_t { full_scan, index_scan };

/// Left-deep join plan. order[0] and order[1] form the level-1 join;
/// order[k] joins at level k. access_methods is parallel to order.
struct JoinPlan {
    std::size_t query_id = 0;
    std::vector<std::size_t> order;
    std::vector<AccessMethod> access_methods;
};

struct ExecutionResult {
    double total_latency = 0.0;
    /// Block cost of order[0].
    double first_scan_latency = 0.0;
    /// One entry per join level: block cost of the joined relation plus CPU cost.
    std::vector<double> per_join_latencies;
    std::size_t block_requests = 0;
    std::size_t buffer_hits = 0;
    std::vector<BlockId> trace;
    std::vector<AccessOutcome> outcomes;

    double hit_ratio() const {
        return block_requests == 0 ? 0.0 : static_cast<double>(buffer_hits) / static_cast<double>(block_requests);
    }
};

/// Fixed access-method rule; not learned.
AccessMethod choose_access_method(const QueryRelation& qr, const Relation& relation, const CostConstants& constants);

/// Builds a plan for `order` with access methods from choose_access_method. Throws PlanningError if invalid.
JoinPlan make_plan(const Query& query, std::vector<std::size_t> order, const Catalog& catalog,
                   const CostConstants& constants);

/// Every prefix of `order` is connected in the query's join graph.
bool is_connected_order(const Query& query, std::span<const std::size_t> order);

/// Throws PlanningError unless plan is a connected left-deep permutation with executable access methods.
void validate_plan(const Query& query, const JoinPlan& plan, const Catalog& catalog);

std::vector<BlockId> relation_block_trace(const QueryRelation& qr, const Relation& relation, AccessMethod method,
                                          const CostConstants& constants);

std::vector<BlockId> plan_block_trace(const Query& query, const JoinPlan& plan, const Catalog& catalog,
                                      const CostConstants& constants);

/// Base cardinality product of the prefix times every selectivity internal to it.
double cardinality_estimate(const Query& query, std::span<const std::size_t> prefix, const Catalog& catalog,
                            const CostConstants& constants);

/// Runs the plan against the pool. The plan is validated before any block is touched.
ExecutionResult execute(const Query& query, const JoinPlan& plan, const Catalog& catalog, BufferPool& pool,
                        const CostConstants& constants);

/// Latency with every block priced as a miss (the cost a cache-blind optimizer sees).
/// Summed as scan costs in order, then join CPU terms level by level.
double cache_agnostic_cost(const Query& query, const JoinPlan& plan, const Catalog& catalog,
                           const CostConstants& constants);

/// Cold-scan cost of every base and index block in the catalog.
double reference_latency(const Catalog& catalog, const CostConstants& constants);

}  // namespace madb
