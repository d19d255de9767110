#include <doctest.h>

#include <set>
#include <sstream>

#include "madb/errors.hpp"
#include "madb/expert.hpp"
#include "madb/orchestrator.hpp"

using namespace madb;

namespace {

ExperimentSettings small_settings() {
    ExperimentSettings s;
    s.scheduler_agent.hidden_layers = {16};
    s.optimizer_agent.hidden_layers = {16};
    s.scheduler_agent.batch_size = s.optimizer_agent.batch_size = 8;
    s.test_queries = 12;
    s.demo_epochs = 1;
    return s;
}

std::string metrics_csv(const RunResult& r) {
    std::ostringstream out;
    write_metrics_header(out);
    write_metrics_rows(out, r);
    write_summary_header(out);
    write_summary_row(out, r);
    write_training_log_header(out);
    write_training_log(out, r);
    return out.str();
}

}  // namespace

TEST_CASE("nolearning runs FIFO with expert plans") {
    const auto settings = small_settings();
    const auto env = Environment::build(settings, 3, 10);
    BufferPool pool(env.pool_capacity, env.catalog);
    World world(env, settings, LoopSetup{}, nullptr, nullptr, pool);
    world.load_stream(env.test_queries);
    std::size_t expected_id = env.test_queries.front().query_id;
    while (!world.done()) {
        const auto head = world.queue().front().query;
        const auto rec = world.step();
        CHECK(rec.slot == 0);
        CHECK(rec.query_id == expected_id++);
        CHECK(rec.order == dp_best_order(head, env.catalog, settings.costs).order);
        CHECK(rec.plan_cost == rec.expert_cost);
    }
}

TEST_CASE("a single queued query is the only valid slot") {
    const auto settings = small_settings();
    const auto env = Environment::build(settings, 4, 10);
    auto sched = make_scheduler_agent(settings, env.catalog.size(), SharingMode::full, 1);
    auto opt = make_optimizer_agent(settings, env.catalog.size(), SharingMode::full, 2);
    for (int rep = 0; rep < 5; ++rep) {
        BufferPool pool(env.pool_capacity, env.catalog);
        LoopSetup setup{SchedulerPolicy::agent, OptimizerPolicy::agent, SharingMode::full, false, 1.0};
        World world(env, settings, setup, sched.get(), opt.get(), pool);
        world.load_stream({env.test_queries.front()});
        CHECK(world.step().slot == 0);
        CHECK(world.done());
    }
}

TEST_CASE("cold start shares all-zero plan features") {
    const auto settings = small_settings();
    const auto env = Environment::build(settings, 5, 10);
    const std::size_t r = env.catalog.size();
    auto sched = make_scheduler_agent(settings, r, SharingMode::full, 1);
    auto opt = make_optimizer_agent(settings, r, SharingMode::full, 2);
    BufferPool pool(env.pool_capacity, env.catalog);
    LoopSetup setup{SchedulerPolicy::agent, OptimizerPolicy::agent, SharingMode::full, true, std::nullopt};
    World world(env, settings, setup, sched.get(), opt.get(), pool);
    world.load_stream(env.test_queries);
    world.step();
    const auto layout = scheduler_layout(r, settings.encoding, SharingMode::full);
    const auto& obs = world.last_scheduler_observation();
    REQUIRE(obs.size() == layout.size);
    for (const char* name : {"last_plan", "previous_plan"}) {
        const auto* seg = layout.find(name);
        for (std::size_t i = 0; i < seg->length; ++i) CHECK(obs[seg->offset + i] == 0.0);
    }

    // The optimizer saw this step's buffer encoding.
    const auto olayout = optimizer_layout(r, settings.encoding, SharingMode::full);
    const auto* buf = olayout.find("buffer");
    const auto& last = world.last_buffer_encoding();
    REQUIRE_FALSE(world.last_optimizer_observations().empty());
    for (const auto& o : world.last_optimizer_observations())
        CHECK(std::vector<double>(o.begin() + buf->offset, o.begin() + buf->offset + buf->length) == last.values);

    // Second step: the first plan is now shared.
    world.step();
    const auto& obs2 = world.last_scheduler_observation();
    const auto* lp = layout.find("last_plan");
    double mass = 0.0;
    for (std::size_t i = 0; i < lp->length; ++i) mass += obs2[lp->offset + i];
    CHECK(mass > 0.0);
}

TEST_CASE("no-sharing observations carry no shared segments") {
    const auto settings = small_settings();
    const auto env = Environment::build(settings, 6, 10);
    const std::size_t r = env.catalog.size();
    auto sched = make_scheduler_agent(settings, r, SharingMode::no_sharing, 1);
    auto opt = make_optimizer_agent(settings, r, SharingMode::no_sharing, 2);
    BufferPool pool(env.pool_capacity, env.catalog);
    LoopSetup setup{SchedulerPolicy::agent, OptimizerPolicy::agent, SharingMode::no_sharing, false, 0.0};
    World world(env, settings, setup, sched.get(), opt.get(), pool);
    world.load_stream(env.test_queries);
    world.step();
    CHECK(world.last_scheduler_observation().size() == scheduler_layout(r, settings.encoding, SharingMode::no_sharing).size);
    for (const auto& o : world.last_optimizer_observations())
        CHECK(o.size() == optimizer_layout(r, settings.encoding, SharingMode::no_sharing).size);
    CHECK(sched->input_size() < scheduler_layout(r, settings.encoding, SharingMode::full).size);
}

TEST_CASE("every arrival executes exactly once and pool counters only grow") {
    const auto settings = small_settings();
    const auto env = Environment::build(settings, 7, 30);
    auto sched = make_scheduler_agent(settings, env.catalog.size(), SharingMode::full, 1);
    auto opt = make_optimizer_agent(settings, env.catalog.size(), SharingMode::full, 2);
    BufferPool pool(env.pool_capacity, env.catalog);
    LoopSetup setup{SchedulerPolicy::agent, OptimizerPolicy::agent, SharingMode::full, true, std::nullopt};
    World world(env, settings, setup, sched.get(), opt.get(), pool);
    world.load_stream(env.train_queries);
    std::set<std::size_t> ids;
    std::uint64_t last_requests = 0;
    std::size_t steps = 0;
    while (!world.done()) {
        const auto before = world.queue().size();
        const auto rec = world.step();
        ++steps;
        CHECK(ids.insert(rec.query_id).second);
        CHECK(pool.counters().requests() >= last_requests);
        last_requests = pool.counters().requests();
        CHECK(world.queue().size() <= settings.encoding.queue_capacity);
        CHECK(world.queue().size() + 1 >= before);
    }
    CHECK(steps == env.train_queries.size());
    CHECK(ids.size() == env.train_queries.size());
}

TEST_CASE("untrained MADB and NOLEARNING both give complete finite metrics") {
    const auto settings = small_settings();
    for (RunMode mode : {RunMode::madb, RunMode::nolearning}) {
        RunSpec spec{mode, mode == RunMode::madb ? SharingMode::full : SharingMode::no_sharing, 2, 0};
        const auto r = run_experiment(settings, spec);
        REQUIRE(r.test.records.size() == settings.test_queries);
        double total = 0.0, plan = 0.0;
        std::uint64_t requests = 0;
        for (const auto& rec : r.test.records) {
            CHECK(std::isfinite(rec.latency));
            CHECK(rec.hit_ratio >= 0.0);
            CHECK(rec.hit_ratio <= 1.0);
            total += rec.latency;
            plan += rec.plan_cost;
            requests += rec.block_requests;
        }
        CHECK(r.test.total_latency == total);
        CHECK(r.test.total_plan_cost == plan);
        CHECK(r.test.block_requests == requests);
    }
}

TEST_CASE("runs are bit-for-bit repeatable") {
    auto settings = small_settings();
    for (RunMode mode : {RunMode::madb, RunMode::pl_nosharing, RunMode::iso_nosharing}) {
        RunSpec spec{mode, mode == RunMode::madb ? SharingMode::full : SharingMode::no_sharing, 9, 15};
        CHECK(metrics_csv(run_experiment(settings, spec)) == metrics_csv(run_experiment(settings, spec)));
    }
}

TEST_CASE("baselines refuse sharing") {
    RunSpec spec{RunMode::pl_nosharing, SharingMode::full, 1, 5};
    CHECK_THROWS_AS(run_experiment(small_settings(), spec), ConfigError);
}

TEST_CASE("isolated training yields no-sharing checkpoints") {
    const auto settings = small_settings();
    const auto env = Environment::build(settings, 8, 12);
    const auto ck = train_isolated(env, settings, 8);
    const std::size_t r = env.catalog.size();
    auto sched = make_scheduler_agent(settings, r, SharingMode::no_sharing, 0);
    auto opt = make_optimizer_agent(settings, r, SharingMode::no_sharing, 0);
    std::istringstream s(ck.scheduler), o(ck.optimizer);
    sched->load(s);
    opt->load(o);
    std::ostringstream s2, o2;
    sched->save(s2);
    opt->save(o2);
    CHECK(s2.str() == ck.scheduler);
    CHECK(o2.str() == ck.optimizer);
    CHECK(sched->input_size() == scheduler_layout(r, settings.encoding, SharingMode::no_sharing).size);
    CHECK(ck.scheduler_training.records.size() == env.train_queries.size());
    CHECK(ck.optimizer_training.records.size() == env.train_queries.size());
    // The optimizer's partner was FIFO: queries run in arrival order.
    for (std::size_t i = 0; i < ck.optimizer_training.records.size(); ++i)
        CHECK(ck.optimizer_training.records[i].query_id == env.train_queries[i].query_id);
}

TEST_CASE("run ids and mode names") {
    RunSpec spec{RunMode::pl_nosharing, SharingMode::no_sharing, 3, 150};
    CHECK(spec.run_id() == "pl_nosharing_no_sharing_s3_n150");
    for (auto m : {RunMode::madb, RunMode::pl_nosharing, RunMode::iso_nosharing, RunMode::nolearning})
        CHECK(parse_run_mode(to_string(m)) == m);
}
