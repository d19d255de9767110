#include "madb/orchestrator.hpp"

#include <cstdio>
#include <numeric>
#include <ostream>
#include <sstream>

#include "madb/errors.hpp"

namespace madb {

namespace {

enum Stream : std::uint64_t {
    kCatalog = 11,
    kTemplates = 12,
    kSplit = 13,
    kTrain = 14,
    kTest = 15,
    kScheduler = 16,
    kOptimizer = 17,
    kIsoScheduler = 18,
    kIsoOptimizer = 19,
};

double mean(const std::vector<double>& xs) {
    if (xs.empty()) return 0.0;
    return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

}  // namespace

std::string_view to_string(RunMode mode) {
    switch (mode) {
        case RunMode::madb: return "madb";
        case RunMode::pl_nosharing: return "pl_nosharing";
        case RunMode::iso_nosharing: return "iso_nosharing";
        case RunMode::nolearning: return "nolearning";
    }
    return "unknown";
}

RunMode parse_run_mode(std::string_view text) {
    for (auto m : {RunMode::madb, RunMode::pl_nosharing, RunMode::iso_nosharing, RunMode::nolearning})
        if (text == to_string(m)) return m;
    throw ConfigError("unknown run mode '" + std::string(text) + "'");
}

SharingMode default_sharing(RunMode mode) {
    return mode == RunMode::madb ? SharingMode::full : SharingMode::no_sharing;
}

ExperimentSettings::ExperimentSettings() {
    scheduler_agent.gamma = 0.5;
    optimizer_agent.gamma = 0.99;
    scheduler_agent.updates_per_step = 2;
    optimizer_agent.updates_per_step = 2;
    optimizer_agent.demo_margin = 0.2;
}

std::string RunSpec::run_id() const {
    std::ostringstream id;
    id << to_string(mode) << '_' << to_string(sharing) << "_s" << seed << "_n" << train_size;
    return id.str();
}

void EpisodeLog::add(EpisodeRecord record) {
    total_latency += record.latency;
    total_plan_cost += record.plan_cost;
    total_expert_cost += record.expert_cost;
    block_requests += record.block_requests;
    buffer_hits += record.buffer_hits;
    records.push_back(std::move(record));
}

double EpisodeLog::mean_hit_ratio() const {
    if (records.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& r : records) sum += r.hit_ratio;
    return sum / static_cast<double>(records.size());
}

Environment Environment::build(const ExperimentSettings& settings, std::uint64_t seed, std::size_t train_size) {
    Environment env;
    CatalogConfig cc = settings.catalog;
    cc.seed = derive_seed(seed, kCatalog);
    env.catalog = build_catalog(cc);
    WorkloadConfig wc = settings.workload;
    wc.rows_per_block = settings.costs.rows_per_block;
    const auto templates = generate_templates(env.catalog, wc.num_templates, derive_seed(seed, kTemplates), wc);
    auto split = split_workload(templates, settings.workload.train_fraction, derive_seed(seed, kSplit));
    env.train_templates = std::move(split.train);
    env.test_templates = std::move(split.test);
    env.train_queries = sample_queries(env.train_templates, env.catalog, train_size, derive_seed(seed, kTrain), 0);
    env.test_queries =
        sample_queries(env.test_templates, env.catalog, settings.test_queries, derive_seed(seed, kTest), 1000000);
    env.pool_capacity = default_pool_capacity(env.catalog, settings.pool_fraction);
    env.reference_latency = madb::reference_latency(env.catalog, settings.costs);
    return env;
}

World::World(const Environment& env, const ExperimentSettings& settings, LoopSetup setup, QAgent* scheduler,
             QAgent* optimizer, BufferPool& pool)
    : env_(env),
      settings_(settings),
      setup_(setup),
      scheduler_(scheduler),
      optimizer_(optimizer),
      pool_(pool),
      history_(PlanHistory::empty(env.catalog.size())),
      plan_share_{Grid(env.catalog.size(), env.catalog.size() - 1), Grid(env.catalog.size(), env.catalog.size() - 1)} {
    if (setup_.scheduler == SchedulerPolicy::agent && scheduler_ == nullptr)
        throw ContractViolation("agent scheduling requested without a scheduler agent");
    if (setup_.optimizer == OptimizerPolicy::agent && optimizer_ == nullptr)
        throw ContractViolation("agent planning requested without an optimizer agent");
    planning_.catalog = &env_.catalog;
    planning_.constants = &settings_.costs;
    planning_.encoding = settings_.encoding;
    planning_.mode = setup_.sharing;
    planning_.reference_latency = env_.reference_latency;
}

void World::load_stream(const std::vector<Query>& stream) {
    stream_.insert(stream_.end(), stream.begin(), stream.end());
    refill();
}

void World::refill() {
    while (queue_.size() < settings_.encoding.queue_capacity && next_arrival_ < stream_.size()) {
        queue_.push_back({stream_[next_arrival_], next_arrival_});
        ++next_arrival_;
    }
}

std::vector<double> World::scheduler_observation(const Grid& buffer) const {
    std::vector<const Query*> slots;
    for (const auto& q : queue_) slots.push_back(&q.query);
    std::optional<PlanShare> share;
    if (setup_.sharing != SharingMode::no_sharing) share = plan_share_;
    return assemble_scheduler_obs(buffer, slots, share, setup_.sharing, env_.catalog, settings_.encoding,
                                  settings_.costs);
}

EpisodeRecord World::step() {
    if (queue_.empty()) throw ContractViolation("step on an empty queue");
    const Catalog& catalog = env_.catalog;
    const std::size_t width = settings_.encoding.downsample_width;
    EpisodeRecord rec;
    rec.step = steps_++;

    // (1)-(2) scheduler observes buffer, queue and the optimizer's share, then picks a slot.
    last_buffer_ = encode_buffer(snapshot_bitmap(pool_, catalog), width);
    last_sched_obs_.clear();
    ActionMask slot_mask(settings_.encoding.queue_capacity, 0);
    for (std::size_t k = 0; k < queue_.size(); ++k) slot_mask[k] = 1;
    if (setup_.scheduler == SchedulerPolicy::agent) {
        last_sched_obs_ = scheduler_observation(last_buffer_);
        const double eps = setup_.epsilon.value_or(scheduler_->epsilon());
        rec.scheduler_epsilon = eps;
        rec.slot = scheduler_->select_action(last_sched_obs_, slot_mask, eps);
    } else {
        rec.slot = fcfs_schedule(std::vector<QueuedQuery>(queue_.begin(), queue_.end()));
    }
    const Query query = queue_[rec.slot].query;
    queue_.erase(queue_.begin() + static_cast<std::ptrdiff_t>(rec.slot));

    // (3) optimizer builds the join order, seeing the scheduler's state of this step.
    std::optional<BufferShare> buffer_share;
    if (setup_.sharing != SharingMode::no_sharing) buffer_share = make_buffer_share(last_buffer_, query, planning_);
    const auto expert = dp_best_order(query, catalog, settings_.costs);
    last_opt_obs_.clear();
    if (setup_.optimizer == OptimizerPolicy::agent) {
        const double eps = setup_.epsilon.value_or(optimizer_->epsilon());
        rec.optimizer_epsilon = eps;
        rec.order = plan_with_agent(planning_, *optimizer_, query, history_, buffer_share, eps);
    } else {
        rec.order = expert.order;
    }

    // (4) execute against the shared pool.
    const auto plan = make_plan(query, rec.order, catalog, settings_.costs);
    const auto result = execute(query, plan, catalog, pool_, settings_.costs);
    rec.query_id = query.query_id;
    rec.template_id = query.template_id;
    rec.latency = result.total_latency;
    rec.hit_ratio = result.hit_ratio();
    rec.block_requests = result.block_requests;
    rec.buffer_hits = result.buffer_hits;
    rec.plan_cost = cache_agnostic_cost(query, plan, catalog, settings_.costs);
    rec.expert_cost = expert.estimated_cost;
    rec.scheduler_reward = scheduler_reward(result);

    if (setup_.optimizer == OptimizerPolicy::agent) {
        auto ts = optimizer_transitions(planning_, query, rec.order, result, history_, buffer_share, false);
        for (const auto& t : ts) {
            rec.optimizer_reward += t.reward;
            last_opt_obs_.push_back(t.state);
        }
        if (setup_.learn)
            for (auto& t : ts) optimizer_->remember(std::move(t));
    }

    // Optimizer's share for the next scheduling decision.
    plan_share_.previous_plan = std::move(plan_share_.last_plan);
    plan_share_.last_plan = encode_join_levels(rec.order, catalog.size());
    history_.record(rec.order, result.total_latency, planning_);

    // (7) refill, then (5) the scheduler's transition into the post-execution state.
    refill();
    if (setup_.scheduler == SchedulerPolicy::agent && setup_.learn) {
        Transition t;
        t.state = last_sched_obs_;
        t.mask = slot_mask;
        t.action = rec.slot;
        t.reward = rec.scheduler_reward;
        t.terminal = queue_.empty();
        if (t.terminal) {
            t.next_state.assign(last_sched_obs_.size(), 0.0);
            t.next_mask.assign(settings_.encoding.queue_capacity, 0);
        } else {
            t.next_state = scheduler_observation(encode_buffer(snapshot_bitmap(pool_, catalog), width));
            t.next_mask.assign(settings_.encoding.queue_capacity, 0);
            for (std::size_t k = 0; k < queue_.size(); ++k) t.next_mask[k] = 1;
        }
        scheduler_->remember(std::move(t));
    }

    // (6) replay training.
    if (setup_.learn) {
        if (setup_.scheduler == SchedulerPolicy::agent) {
            for (std::size_t u = 0; u < scheduler_->config().updates_per_step; ++u)
                if (auto loss = scheduler_->train_step()) rec.scheduler_losses.push_back(*loss);
            scheduler_->decay_epsilon();
        }
        if (setup_.optimizer == OptimizerPolicy::agent) {
            for (std::size_t u = 0; u < optimizer_->config().updates_per_step; ++u)
                if (auto loss = optimizer_->train_step()) rec.optimizer_losses.push_back(*loss);
            optimizer_->decay_epsilon();
        }
    }
    return rec;
}

EpisodeLog World::run() {
    EpisodeLog log;
    while (!done()) log.add(step());
    return log;
}

std::unique_ptr<QAgent> make_scheduler_agent(const ExperimentSettings& settings, std::size_t num_relations,
                                             SharingMode sharing, std::uint64_t seed) {
    const auto layout = scheduler_layout(num_relations, settings.encoding, sharing);
    std::optional<ActionSharing> slots;
    if (settings.scheduler_slot_sharing) {
        const Segment* first = layout.find("queue[0]");
        slots = ActionSharing{{{first->offset, first->length}}, true, false};
    }
    return std::make_unique<QAgent>(layout.size, settings.encoding.queue_capacity, settings.scheduler_agent, seed,
                                    std::move(slots));
}

std::unique_ptr<QAgent> make_optimizer_agent(const ExperimentSettings& settings, std::size_t num_relations,
                                             SharingMode sharing, std::uint64_t seed) {
    const auto layout = optimizer_layout(num_relations, settings.encoding, sharing);
    std::optional<ActionSharing> rows;
    if (settings.optimizer_relation_sharing) {
        rows = ActionSharing{{}, false, true};
        // Every per-relation matrix contributes that relation's row.
        for (const auto& seg : layout.segments)
            if (seg.name != "last_plan_cost") rows->rows.push_back({seg.offset, seg.length / num_relations});
    }
    return std::make_unique<QAgent>(layout.size, num_relations, settings.optimizer_agent, seed, std::move(rows));
}

namespace {

PlanningContext planning_context(const Environment& env, const ExperimentSettings& settings, SharingMode sharing) {
    PlanningContext ctx;
    ctx.catalog = &env.catalog;
    ctx.constants = &settings.costs;
    ctx.encoding = settings.encoding;
    ctx.mode = sharing;
    ctx.reference_latency = env.reference_latency;
    return ctx;
}

std::size_t pretrain(QAgent& optimizer, const Environment& env, const ExperimentSettings& settings, SharingMode sharing) {
    if (env.train_queries.empty()) return 0;
    const auto ctx = planning_context(env, settings, sharing);
    return pretrain_from_demonstrations(optimizer, ctx, env.train_queries, {settings.demo_epochs, env.pool_capacity});
}

EpisodeLog evaluate(const Environment& env, const ExperimentSettings& settings, LoopSetup setup, QAgent* scheduler,
                    QAgent* optimizer) {
    BufferPool pool(env.pool_capacity, env.catalog);
    setup.learn = settings.learn_during_eval && setup.learn;
    World world(env, settings, setup, scheduler, optimizer, pool);
    world.load_stream(env.test_queries);
    return world.run();
}

}  // namespace

IsolatedCheckpoints train_isolated(const Environment& env, const ExperimentSettings& settings, std::uint64_t seed) {
    const std::size_t r = env.catalog.size();
    IsolatedCheckpoints out;

    auto scheduler = make_scheduler_agent(settings, r, SharingMode::no_sharing, derive_seed(seed, kIsoScheduler));
    {
        BufferPool pool(env.pool_capacity, env.catalog);
        LoopSetup setup{SchedulerPolicy::agent, OptimizerPolicy::expert, SharingMode::no_sharing, true, std::nullopt};
        World world(env, settings, setup, scheduler.get(), nullptr, pool);
        world.load_stream(env.train_queries);
        out.scheduler_training = world.run();
    }
    auto optimizer = make_optimizer_agent(settings, r, SharingMode::no_sharing, derive_seed(seed, kIsoOptimizer));
    pretrain(*optimizer, env, settings, SharingMode::no_sharing);
    {
        BufferPool pool(env.pool_capacity, env.catalog);
        LoopSetup setup{SchedulerPolicy::fcfs, OptimizerPolicy::agent, SharingMode::no_sharing, true, std::nullopt};
        World world(env, settings, setup, nullptr, optimizer.get(), pool);
        world.load_stream(env.train_queries);
        out.optimizer_training = world.run();
    }
    std::ostringstream s, o;
    scheduler->save(s);
    optimizer->save(o);
    out.scheduler = s.str();
    out.optimizer = o.str();
    return out;
}

RunResult run_experiment(const ExperimentSettings& settings, const RunSpec& spec) {
    if (spec.mode != RunMode::madb && spec.sharing != SharingMode::no_sharing)
        throw ConfigError(std::string(to_string(spec.mode)) + " runs without sharing");
    const Environment env = Environment::build(settings, spec.seed, spec.train_size);
    const std::size_t r = env.catalog.size();
    RunResult result;
    result.spec = spec;

    const double eval_eps_s = settings.scheduler_agent.epsilon_min;
    const double eval_eps_o = settings.optimizer_agent.epsilon_min;

    switch (spec.mode) {
        case RunMode::nolearning: {
            LoopSetup setup{SchedulerPolicy::fcfs, OptimizerPolicy::expert, SharingMode::no_sharing, false, std::nullopt};
            result.test = evaluate(env, settings, setup, nullptr, nullptr);
            break;
        }
        case RunMode::madb:
        case RunMode::pl_nosharing: {
            auto scheduler = make_scheduler_agent(settings, r, spec.sharing, derive_seed(spec.seed, kScheduler));
            auto optimizer = make_optimizer_agent(settings, r, spec.sharing, derive_seed(spec.seed, kOptimizer));
            result.demonstrations = pretrain(*optimizer, env, settings, spec.sharing);
            {
                BufferPool pool(env.pool_capacity, env.catalog);
                LoopSetup setup{SchedulerPolicy::agent, OptimizerPolicy::agent, spec.sharing, true, std::nullopt};
                World world(env, settings, setup, scheduler.get(), optimizer.get(), pool);
                world.load_stream(env.train_queries);
                result.training = world.run();
            }
            scheduler->set_epsilon(eval_eps_s);
            optimizer->set_epsilon(eval_eps_o);
            LoopSetup setup{SchedulerPolicy::agent, OptimizerPolicy::agent, spec.sharing, true, std::nullopt};
            result.test = evaluate(env, settings, setup, scheduler.get(), optimizer.get());
            break;
        }
        case RunMode::iso_nosharing: {
            const auto checkpoints = train_isolated(env, settings, spec.seed);
            result.training = checkpoints.scheduler_training;
            for (const auto& rec : checkpoints.optimizer_training.records) result.training.add(rec);
            auto scheduler = make_scheduler_agent(settings, r, SharingMode::no_sharing, derive_seed(spec.seed, kScheduler));
            auto optimizer = make_optimizer_agent(settings, r, SharingMode::no_sharing, derive_seed(spec.seed, kOptimizer));
            std::istringstream s(checkpoints.scheduler), o(checkpoints.optimizer);
            scheduler->load(s);
            optimizer->load(o);
            scheduler->set_epsilon(eval_eps_s);
            optimizer->set_epsilon(eval_eps_o);
            // Frozen models: no learning even if learn_during_eval is set.
            LoopSetup setup{SchedulerPolicy::agent, OptimizerPolicy::agent, SharingMode::no_sharing, false, std::nullopt};
            result.test = evaluate(env, settings, setup, scheduler.get(), optimizer.get());
            break;
        }
    }
    return result;
}

std::string format_order(const std::vector<std::size_t>& order) {
    std::string s;
    for (std::size_t i = 0; i < order.size(); ++i) s += (i ? "-" : "") + std::to_string(order[i]);
    return s;
}

std::string format_number(double value) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", value);
    return buf;
}

void write_metrics_header(std::ostream& out) {
    out << "run_id,mode,sharing,seed,train_size,query_id,latency,hit_ratio,plan_order\n";
}

void write_metrics_rows(std::ostream& out, const RunResult& result) {
    const auto& s = result.spec;
    for (const auto& rec : result.test.records)
        out << s.run_id() << ',' << to_string(s.mode) << ',' << to_string(s.sharing) << ',' << s.seed << ','
            << s.train_size << ',' << rec.query_id << ',' << format_number(rec.latency) << ','
            << format_number(rec.hit_ratio) << ',' << format_order(rec.order) << '\n';
}

void write_summary_header(std::ostream& out) {
    out << "run_id,mode,sharing,seed,train_size,queries,total_latency,mean_hit_ratio,mean_plan_cost,mean_expert_cost\n";
}

void write_summary_row(std::ostream& out, const RunResult& result) {
    const auto& s = result.spec;
    const auto& t = result.test;
    const double n = t.records.empty() ? 1.0 : static_cast<double>(t.records.size());
    out << s.run_id() << ',' << to_string(s.mode) << ',' << to_string(s.sharing) << ',' << s.seed << ','
        << s.train_size << ',' << t.records.size() << ',' << format_number(t.total_latency) << ','
        << format_number(t.mean_hit_ratio()) << ',' << format_number(t.total_plan_cost / n) << ','
        << format_number(t.total_expert_cost / n) << '\n';
}

void write_training_log_header(std::ostream& out) { out << "run_id,phase,agent,episode,step,epsilon,reward,loss\n"; }

void write_training_log(std::ostream& out, const RunResult& result) {
    const auto id = result.spec.run_id();
    auto emit = [&](const char* phase, const EpisodeLog& log) {
        for (const auto& rec : log.records) {
            out << id << ',' << phase << ",scheduler,0," << rec.step << ',' << format_number(rec.scheduler_epsilon) << ','
                << format_number(rec.scheduler_reward) << ',' << format_number(mean(rec.scheduler_losses)) << '\n';
            out << id << ',' << phase << ",optimizer,0," << rec.step << ','
                << format_number(rec.optimizer_epsilon) << ',' << format_number(rec.optimizer_reward) << ','
                << format_number(mean(rec.optimizer_losses)) << '\n';
        }
    };
    emit("train", result.training);
    emit("test", result.test);
}

}  // namespace madb
