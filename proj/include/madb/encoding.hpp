#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "madb/buffer_pool.hpp"
#include "madb/catalog.hpp"
#include "madb/cost_model.hpp"

namespace madb {

/// Which cross-agent features each agent observes.
enum class SharingMode { full, no_sharing, marl2_dif_scheduler, marl3_dif_optimizer };

std::string_view to_string(SharingMode mode);
SharingMode parse_sharing_mode(std::string_view text);

struct EncodingConfig {
    /// Width F of every downsampled bitmap / probability row.
    std::size_t downsample_width = 8;
    /// Fixed number of scheduler queue slots.
    std::size_t queue_capacity = 10;
};

/// Dense row-major matrix of features.
struct Grid {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;

    Grid() = default;
    Grid(std::size_t r, std::size_t c) : rows(r), cols(c), values(r * c, 0.0) {}

    double& at(std::size_t r, std::size_t c) { return values[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
    friend bool operator==(const Grid&, const Grid&) = default;
};

/// Splits the row into F contiguous windows (the first len % F windows one
/// element longer) and returns each window's mean. Rows shorter than F are
/// right-padded with zeros first.
std::vector<double> downsample_moving_average(std::span<const double> row, std::size_t width);

/// R x (R-1) join-level matrix of a (possibly partial) left-deep order.
/// Column k-1 marks the level-k join: every relation in order[0..k] holds k
/// there. Values are divided by R-1.
Grid encode_join_levels(std::span<const std::size_t> order, std::size_t num_relations);

/// Downsampled buffer bitmap, R x F.
Grid encode_buffer(const Bitmap& bitmap, std::size_t width);

/// R x F block-access probabilities of the query. A row covers base blocks
/// then index blocks (probability 1 when the relation is index-scanned).
Grid encode_query_block_probs(const Query& query, const Catalog& catalog, std::size_t width,
                              const CostConstants& constants);

/// Length-R 0/1 vector of the query's relations.
std::vector<double> relations_vector(const Query& query, std::size_t num_relations);

/// What the optimizer hands the scheduler: the two most recent executed orders.
struct PlanShare {
    Grid last_plan;
    Grid previous_plan;
};

/// What the scheduler hands the optimizer for the query being planned.
struct BufferShare {
    Grid buffer;
    Grid query_blocks;
};

struct Segment {
    std::string name;
    std::size_t offset = 0;
    std::size_t length = 0;
};

/// Named feature blocks, in concatenation order.
struct ObservationLayout {
    std::vector<Segment> segments;
    std::size_t size = 0;

    const Segment* find(std::string_view name) const;
    void add(std::string name, std::size_t length);
};

/// buffer | queue[0..Q) | [last_plan | previous_plan]
ObservationLayout scheduler_layout(std::size_t num_relations, const EncodingConfig& config, SharingMode mode);

/// last_plan (or last_plan_cost) | relations | partial_order | [buffer | query_blocks]
ObservationLayout optimizer_layout(std::size_t num_relations, const EncodingConfig& config, SharingMode mode);

/// Empty slots may be passed as nullptr; queue.size() must not exceed the slot count.
std::vector<double> assemble_scheduler_obs(const Grid& buffer, std::span<const Query* const> queue,
                                           const std::optional<PlanShare>& share, SharingMode mode,
                                           const Catalog& catalog, const EncodingConfig& config,
                                           const CostConstants& constants);

struct OptimizerInputs {
    std::span<const std::size_t> partial_order;
    const Grid* last_plan = nullptr;
    /// Last executed plan's latency over the reference latency, in [0,1].
    double last_plan_cost = 0.0;
    std::span<const double> relations;
};

std::vector<double> assemble_optimizer_obs(const OptimizerInputs& inputs, const std::optional<BufferShare>& share,
                                           SharingMode mode, std::size_t num_relations, const EncodingConfig& config);

/// JSON description of both layouts for one mode.
void write_layout_schema(std::ostream& out, std::size_t num_relations, const EncodingConfig& config, SharingMode mode);

}  // namespace madb
