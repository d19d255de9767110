#include <doctest.h>

#include <algorithm>

#include "madb/catalog.hpp"
#include "madb/cost_model.hpp"
#include "madb/expert.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace madb;

using oracle::brute_force_order;

TEST_CASE("two relations: lower id first") {
    const Catalog cat = test::make_catalog({10, 10});
    const Query q = test::make_query(cat, {0, 1}, {{0, 1, 0.1}});
    const auto choice = dp_best_order(q, cat, CostConstants{});
    CHECK(choice.order == std::vector<std::size_t>{0, 1});
}

TEST_CASE("four-relation chain with one selective edge") {
    const Catalog cat = test::make_catalog({40, 30, 50, 20});
    const Query q = test::make_query(cat, {0, 1, 2, 3}, {{0, 1, 0.5}, {1, 2, 1e-5}, {2, 3, 0.3}});
    const CostConstants c;
    const auto dp = dp_best_order(q, cat, c);
    const auto bf = brute_force_order(q, cat, c);
    CHECK(dp.order == bf.order);
    CHECK(dp.estimated_cost == bf.cost);
    // The selective pair is joined first.
    CHECK(std::is_permutation(dp.order.begin(), dp.order.begin() + 2, std::vector<std::size_t>{1, 2}.begin()));
}

TEST_CASE("DP matches brute force on generated queries") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        CatalogConfig cc;
        cc.seed = seed;
        const Catalog cat = build_catalog(cc);
        const auto qs = sample_queries(generate_templates(cat, 16, seed), cat, 20, seed);
        const CostConstants c;
        for (const auto& q : qs) {
            const auto dp = dp_best_order(q, cat, c);
            const auto bf = brute_force_order(q, cat, c);
            CHECK(dp.estimated_cost == bf.cost);
            CHECK(dp.order == bf.order);
        }
    }
}

TEST_CASE("fcfs picks the earliest arrival") {
    const Catalog cat = test::make_catalog({1, 1});
    const Query q = test::make_query(cat, {0}, {});
    std::vector<QueuedQuery> queue{{q, 4}, {q, 1}, {q, 2}};
    CHECK(fcfs_schedule(queue) == 1);
    queue.erase(queue.begin() + 1);
    CHECK(fcfs_schedule(queue) == 1);
    CHECK(fcfs_schedule(std::vector<QueuedQuery>{{q, 9}}) == 0);
}
