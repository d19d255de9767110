#include <doctest.h>

#include <algorithm>
#include <list>
#include <numeric>

#include "madb/buffer_pool.hpp"
#include "madb/cost_model.hpp"
#include "madb/errors.hpp"
#include "support.hpp"

using namespace madb;
using test::make_catalog;
using test::make_query;

namespace {

CostConstants no_cpu() {
    CostConstants c;
    c.join_cpu_cost = 0.0;
    return c;
}

// Cost of a trace replayed through a plain-list LRU starting from `resident`
// (least recent first).
double replay_cost(const std::vector<BlockId>& trace, std::list<BlockId> resident, std::size_t cap,
                   const CostConstants& c) {
    double cost = 0.0;
    for (const auto& b : trace) {
        auto it = std::find(resident.begin(), resident.end(), b);
        if (it != resident.end()) {
            resident.erase(it);
            cost += c.hit_cost;
        } else {
            if (resident.size() == cap) resident.pop_front();
            cost += c.miss_cost;
        }
        resident.push_back(b);
    }
    return cost;
}

}  // namespace

TEST_CASE("full scan trace of a single relation") {
    const Catalog cat = make_catalog({5, 3});
    const Query q = make_query(cat, {0}, {});
    const auto plan = make_plan(q, {0}, cat, CostConstants{});
    CHECK(plan.access_methods[0] == AccessMethod::full_scan);
    const auto trace = plan_block_trace(q, plan, cat, CostConstants{});
    REQUIRE(trace.size() == 5);
    for (std::uint32_t j = 0; j < 5; ++j) CHECK(trace[j] == BlockId{0, j});
}

TEST_CASE("two-relation trace is left then right") {
    const Catalog cat = make_catalog({2, 3});
    const Query q = make_query(cat, {0, 1}, {{0, 1, 0.1}});
    const auto trace = plan_block_trace(q, make_plan(q, {1, 0}, cat, CostConstants{}), cat, CostConstants{});
    CHECK(trace == std::vector<BlockId>{{1, 0}, {1, 1}, {1, 2}, {0, 0}, {0, 1}});
}

TEST_CASE("index scan reads index blocks then base blocks at or above threshold") {
    const Catalog cat = make_catalog({6, 1}, {2, 0});
    CostConstants c;
    QueryRelation qr{0, 1.0, {1.0, 0.1, 0.5, 0.49, 0.0, 0.9}};

    // Uniform probability 1.0: mean is above the index threshold, but a
    // forced index scan reads everything.
    QueryRelation ones{0, 1.0, std::vector<double>(6, 1.0)};
    CHECK(choose_access_method(ones, cat.relation(0), c) == AccessMethod::full_scan);
    const auto forced = relation_block_trace(ones, cat.relation(0), AccessMethod::index_scan, c);
    CHECK(forced == std::vector<BlockId>{{0, 6}, {0, 7}, {0, 0}, {0, 1}, {0, 2}, {0, 3}, {0, 4}, {0, 5}});

    // Oracle: enumerate the threshold rule directly.
    std::vector<BlockId> expect{{0, 6}, {0, 7}};
    for (std::uint32_t j = 0; j < qr.block_probs.size(); ++j)
        if (qr.block_probs[j] >= c.index_block_threshold) expect.push_back({0, j});
    CHECK(relation_block_trace(qr, cat.relation(0), AccessMethod::index_scan, c) == expect);

    QueryRelation sparse{0, 1.0, {0.9, 0.1, 0.1, 0.1, 0.1, 0.1}};
    CHECK(choose_access_method(sparse, cat.relation(0), c) == AccessMethod::index_scan);
    const Catalog plain = make_catalog({6, 1});
    CHECK(choose_access_method(sparse, plain.relation(0), c) == AccessMethod::full_scan);
}

TEST_CASE("execute: all-hit and cold scans") {
    const Catalog cat = make_catalog({20, 1});
    const Query q = make_query(cat, {0}, {});
    const auto c = no_cpu();
    const auto plan = make_plan(q, {0}, cat, c);

    BufferPool cold(100, cat);
    const auto first = execute(q, plan, cat, cold, c);
    CHECK(first.total_latency == 200.0);
    CHECK(first.buffer_hits == 0);
    CHECK(first.block_requests == 20);

    const auto warm = execute(q, plan, cat, cold, c);
    CHECK(warm.total_latency == static_cast<double>(warm.block_requests) * 1.0);
    CHECK(warm.hit_ratio() == 1.0);
}

TEST_CASE("execute equals an independent trace replay") {
    const Catalog cat = make_catalog({12, 9, 15}, {2, 0, 3});
    const Query q = make_query(cat, {0, 1, 2}, {{0, 1, 0.01}, {1, 2, 0.002}}, 0.4, 0.7);
    CostConstants c;
    BufferPool pool(14, cat);
    // Warm the pool with an unrelated pattern first.
    for (std::uint32_t j = 0; j < 9; ++j) pool.access({1, j});
    for (std::uint32_t j = 0; j < 6; ++j) pool.access({2, j});
    const auto before = pool.lru_order();

    const auto plan = make_plan(q, {1, 0, 2}, cat, c);
    const auto trace = plan_block_trace(q, plan, cat, c);
    const auto result = execute(q, plan, cat, pool, c);
    CHECK(result.trace == trace);

    double cpu = 0.0;
    for (std::size_t k = 2; k <= 3; ++k)
        cpu += c.join_cpu_cost * cardinality_estimate(q, std::span(plan.order.data(), k), cat, c);
    const double expect = replay_cost(trace, {before.begin(), before.end()}, 14, c) + cpu;
    CHECK(result.total_latency == doctest::Approx(expect).epsilon(1e-12));
    CHECK(result.per_join_latencies.size() == 2);
    CHECK(result.first_scan_latency +
              std::accumulate(result.per_join_latencies.begin(), result.per_join_latencies.end(), 0.0) ==
          result.total_latency);
}

TEST_CASE("cardinality estimates") {
    CostConstants c;
    c.rows_per_block = 100.0;
    const Catalog cat = make_catalog({1, 1, 3});
    const Query one = make_query(cat, {0}, {});
    CHECK(cardinality_estimate(one, std::vector<std::size_t>{0}, cat, c) == 100.0);

    const Query two = make_query(cat, {0, 1}, {{0, 1, 0.01}});
    CHECK(cardinality_estimate(two, std::vector<std::size_t>{0, 1}, cat, c) == doctest::Approx(100.0));

    const Query chain = make_query(cat, {0, 1, 2}, {{0, 1, 0.5}, {1, 2, 0.02}, {0, 2, 0.1}}, 1.0, 0.5);
    double brute = 1.0;
    for (std::size_t id : {0, 1, 2}) brute *= cat.relation(id).num_blocks * 100.0 * 0.5;
    for (const auto& e : chain.edges) brute *= e.selectivity;
    CHECK(cardinality_estimate(chain, std::vector<std::size_t>{2, 0, 1}, cat, c) == doctest::Approx(brute));
    CHECK_THROWS_AS(cardinality_estimate(make_query(cat, {0, 1, 2}, {{0, 1, 0.5}, {1, 2, 0.5}}),
                                         std::vector<std::size_t>{0, 2}, cat, c),
                    PlanningError);
}

TEST_CASE("invalid plans are rejected before touching the pool") {
    const Catalog cat = make_catalog({4, 4, 4});
    const Query q = make_query(cat, {0, 1, 2}, {{0, 1, 0.1}, {1, 2, 0.1}});
    BufferPool pool(10, cat);
    JoinPlan cross{0, {0, 2, 1}, {AccessMethod::full_scan, AccessMethod::full_scan, AccessMethod::full_scan}};
    CHECK_THROWS_AS(execute(q, cross, cat, pool, CostConstants{}), PlanningError);
    JoinPlan missing{0, {0, 1}, {AccessMethod::full_scan, AccessMethod::full_scan}};
    CHECK_THROWS_AS(execute(q, missing, cat, pool, CostConstants{}), PlanningError);
    JoinPlan no_index{0, {0, 1, 2}, {AccessMethod::index_scan, AccessMethod::full_scan, AccessMethod::full_scan}};
    CHECK_THROWS_AS(execute(q, no_index, cat, pool, CostConstants{}), PlanningError);
    CHECK(pool.counters().requests() == 0);
    CHECK(is_connected_order(q, std::vector<std::size_t>{1, 0, 2}));
    CHECK_FALSE(is_connected_order(q, std::vector<std::size_t>{0, 2, 1}));
}

TEST_CASE("cache-agnostic cost prices every block as a miss") {
    const Catalog cat = make_catalog({3, 4});
    const Query q = make_query(cat, {0, 1}, {{0, 1, 0.001}});
    CostConstants c;
    const auto plan = make_plan(q, {0, 1}, cat, c);
    const double cpu = c.join_cpu_cost * 300.0 * 400.0 * 0.001;
    CHECK(cache_agnostic_cost(q, plan, cat, c) == doctest::Approx(70.0 + cpu));
    BufferPool cold(100, cat);
    CHECK(execute(q, plan, cat, cold, c).total_latency == doctest::Approx(cache_agnostic_cost(q, plan, cat, c)));
    CHECK(reference_latency(cat, c) == 70.0);
}
