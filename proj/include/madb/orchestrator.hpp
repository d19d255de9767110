#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "madb/agents.hpp"
#include "madb/buffer_pool.hpp"
#include "madb/catalog.hpp"
#include "madb/cost_model.hpp"
#include "madb/encoding.hpp"
#include "madb/expert.hpp"
#include "madb/planning.hpp"
#include "madb/random.hpp"

namespace madb {

enum class RunMode { madb, pl_nosharing, iso_nosharing, nolearning };

std::string_view to_string(RunMode mode);
RunMode parse_run_mode(std::string_view text);
/// FULL for MADB, NO_SHARING for every baseline.
SharingMode default_sharing(RunMode mode);

/// Everything that defines a run except mode, seed and training size.
struct ExperimentSettings {
    CatalogConfig catalog;
    WorkloadConfig workload;
    CostConstants costs;
    EncodingConfig encoding;
    AgentConfig scheduler_agent;
    AgentConfig optimizer_agent;
    /// Pool capacity as a fraction of all catalog blocks.
    double pool_fraction = 0.10;
    std::size_t test_queries = 40;
    /// Passes over the expert demonstrations before concurrent training.
    std::size_t demo_epochs = 10;
    /// Score every queue slot with one shared network instead of one output
    /// head per slot.
    bool scheduler_slot_sharing = true;
    /// Score every candidate relation with one shared network fed that
    /// relation's rows and a one-hot id.
    bool optimizer_relation_sharing = true;
    /// Keep updating networks while processing the test workload.
    bool learn_during_eval = false;

    ExperimentSettings();
};

struct RunSpec {
    RunMode mode = RunMode::madb;
    SharingMode sharing = SharingMode::full;
    std::uint64_t seed = 1;
    std::size_t train_size = 0;

    std::string run_id() const;
};

/// One executed query.
struct EpisodeRecord {
    std::size_t step = 0;
    std::size_t query_id = 0;
    std::size_t template_id = 0;
    std::size_t slot = 0;
    std::vector<std::size_t> order;
    double latency = 0.0;
    double hit_ratio = 0.0;
    std::size_t block_requests = 0;
    std::size_t buffer_hits = 0;
    /// Cache-agnostic cost of the chosen order and of the expert's order.
    double plan_cost = 0.0;
    double expert_cost = 0.0;
    double scheduler_reward = 0.0;
    double optimizer_reward = 0.0;
    std::vector<double> scheduler_losses;
    std::vector<double> optimizer_losses;
    double scheduler_epsilon = 0.0;
    double optimizer_epsilon = 0.0;
};

struct EpisodeLog {
    std::vector<EpisodeRecord> records;
    double total_latency = 0.0;
    double total_plan_cost = 0.0;
    double total_expert_cost = 0.0;
    std::size_t block_requests = 0;
    std::size_t buffer_hits = 0;

    void add(EpisodeRecord record);
    double mean_hit_ratio() const;
};

/// Static facts of one run's environment.
struct Environment {
    Catalog catalog;
    std::vector<QueryTemplate> train_templates;
    std::vector<QueryTemplate> test_templates;
    std::vector<Query> train_queries;
    std::vector<Query> test_queries;
    std::size_t pool_capacity = 1;
    double reference_latency = 1.0;

    static Environment build(const ExperimentSettings& settings, std::uint64_t seed, std::size_t train_size);
};

enum class SchedulerPolicy { agent, fcfs };
enum class OptimizerPolicy { agent, expert };

/// Who decides, who learns, and what each agent observes during a pass.
struct LoopSetup {
    SchedulerPolicy scheduler = SchedulerPolicy::fcfs;
    OptimizerPolicy optimizer = OptimizerPolicy::expert;
    SharingMode sharing = SharingMode::no_sharing;
    bool learn = false;
    /// Fixed exploration rate; nullopt means each agent's decaying epsilon.
    std::optional<double> epsilon;
};

/// The cooperative execution loop over one query stream: queue window,
/// shared buffer pool, information exchange between the two agents, reward
/// routing and replay training.
class World {
public:
    World(const Environment& env, const ExperimentSettings& settings, LoopSetup setup, QAgent* scheduler,
          QAgent* optimizer, BufferPool& pool);

    /// Queues the stream; the window is filled FIFO as slots free up.
    void load_stream(const std::vector<Query>& stream);
    bool done() const { return queue_.empty(); }
    EpisodeRecord step();
    EpisodeLog run();

    const std::deque<QueuedQuery>& queue() const { return queue_; }
    /// Observations captured in the most recent step (empty when no agent acted).
    const std::vector<double>& last_scheduler_observation() const { return last_sched_obs_; }
    const std::vector<std::vector<double>>& last_optimizer_observations() const { return last_opt_obs_; }
    const Grid& last_buffer_encoding() const { return last_buffer_; }
    const PlanShare& plan_share() const { return plan_share_; }

private:
    std::vector<double> scheduler_observation(const Grid& buffer) const;
    void refill();

    const Environment& env_;
    const ExperimentSettings& settings_;
    LoopSetup setup_;
    QAgent* scheduler_;
    QAgent* optimizer_;
    BufferPool& pool_;
    PlanningContext planning_;
    PlanHistory history_;
    PlanShare plan_share_;
    std::deque<QueuedQuery> queue_;
    std::vector<Query> stream_;
    std::size_t next_arrival_ = 0;
    std::size_t steps_ = 0;
    std::vector<double> last_sched_obs_;
    std::vector<std::vector<double>> last_opt_obs_;
    Grid last_buffer_;
};

std::unique_ptr<QAgent> make_scheduler_agent(const ExperimentSettings& settings, std::size_t num_relations,
                                             SharingMode sharing, std::uint64_t seed);
std::unique_ptr<QAgent> make_optimizer_agent(const ExperimentSettings& settings, std::size_t num_relations,
                                             SharingMode sharing, std::uint64_t seed);

/// Frozen ISO_NOSHARING agents, serialized.
struct IsolatedCheckpoints {
    std::string scheduler;
    std::string optimizer;
    EpisodeLog scheduler_training;
    EpisodeLog optimizer_training;
};

/// Scheduler trained against expert plans, optimizer trained against FIFO
/// scheduling; separate pools, no sharing.
IsolatedCheckpoints train_isolated(const Environment& env, const ExperimentSettings& settings, std::uint64_t seed);

struct RunResult {
    RunSpec spec;
    EpisodeLog training;
    EpisodeLog test;
    std::size_t demonstrations = 0;
};

/// Trains per mode on the run's training stream, then processes the test
/// stream from a cold pool with frozen exploration (and learning, unless
/// learn_during_eval).
RunResult run_experiment(const ExperimentSettings& settings, const RunSpec& spec);

/// run_id,mode,sharing,seed,train_size,query_id,latency,hit_ratio,plan_order
void write_metrics_header(std::ostream& out);
void write_metrics_rows(std::ostream& out, const RunResult& result);
/// run_id,mode,sharing,seed,train_size,queries,total_latency,mean_hit_ratio,mean_plan_cost,mean_expert_cost
void write_summary_header(std::ostream& out);
void write_summary_row(std::ostream& out, const RunResult& result);
/// run_id,phase,agent,episode,step,epsilon,reward,loss
void write_training_log_header(std::ostream& out);
void write_training_log(std::ostream& out, const RunResult& result);

std::string format_order(const std::vector<std::size_t>& order);
std::string format_number(double value);

}  // namespace madb
