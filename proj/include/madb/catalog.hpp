#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace madb {

// ---------------------------------------------------------------------------
// Schema
// ---------------------------------------------------------------------------

struct CatalogConfig {
    std::size_t num_relations = 8;
    std::size_t min_blocks = 20;
    std::size_t max_blocks = 100;
    double index_probability = 1.0;
    /// index_blocks = ceil(index_fraction * num_blocks) for indexed relations.
    double index_fraction = 0.1;
    std::uint64_t seed = 7;
};

struct Relation {
    std::size_t id = 0;
    std::string name;
    std::size_t num_blocks = 1;
    bool has_index = false;
    std::size_t index_blocks = 0;

    /// Row width in the buffer bitmap: base blocks followed by index blocks.
    std::size_t width() const { return num_blocks + index_blocks; }

    friend bool operator==(const Relation&, const Relation&) = default;
};

class Catalog {
public:
    Catalog() = default;
    explicit Catalog(std::vector<Relation> relations);

    std::size_t size() const { return relations_.size(); }
    const Relation& relation(std::size_t id) const { return relations_.at(id); }
    const std::vector<Relation>& relations() const { return relations_; }
    std::size_t total_blocks() const;
    std::vector<std::size_t> row_widths() const;

    friend bool operator==(const Catalog&, const Catalog&) = default;

private:
    std::vector<Relation> relations_;
};

Catalog build_catalog(const CatalogConfig& config);

// ---------------------------------------------------------------------------
// Workload
// ---------------------------------------------------------------------------

enum class ProfileKind { uniform, prefix_heavy };

/// Distribution of block-access probabilities over one relation.
///   uniform:      p_j = level
///   prefix_heavy: p_j = (j + 1)^(-skew), so block 0 always has p = 1
struct AccessProfile {
    ProfileKind kind = ProfileKind::uniform;
    double level = 1.0;
    double skew = 1.0;
    /// Instances rescale level/skew by a factor drawn from [1/(1+jitter), 1+jitter].
    double jitter = 0.0;

    friend bool operator==(const AccessProfile&, const AccessProfile&) = default;
};

struct JoinEdge {
    std::size_t left = 0;
    std::size_t right = 0;
    double selectivity = 1.0;

    friend bool operator==(const JoinEdge&, const JoinEdge&) = default;
};

struct TemplateRelation {
    std::size_t relation_id = 0;
    double base_selectivity = 1.0;
    AccessProfile profile;

    friend bool operator==(const TemplateRelation&, const TemplateRelation&) = default;
};

struct QueryTemplate {
    std::size_t template_id = 0;
    std::vector<TemplateRelation> relations;  // sorted by relation_id
    std::vector<JoinEdge> edges;

    friend bool operator==(const QueryTemplate&, const QueryTemplate&) = default;
};

struct QueryRelation {
    std::size_t relation_id = 0;
    double base_selectivity = 1.0;
    /// One probability per base block of the relation.
    std::vector<double> block_probs;

    friend bool operator==(const QueryRelation&, const QueryRelation&) = default;
};

struct Query {
    std::size_t query_id = 0;
    std::size_t template_id = 0;
    std::vector<QueryRelation> relations;  // sorted by relation_id
    std::vector<JoinEdge> edges;
    std::uint64_t seed = 0;

    std::size_t num_relations() const { return relations.size(); }
    bool contains(std::size_t relation_id) const;
    const QueryRelation& relation(std::size_t relation_id) const;
    std::vector<std::size_t> relation_ids() const;
    /// Selectivity of the edge between a and b, if one exists.
    std::optional<double> edge_selectivity(std::size_t a, std::size_t b) const;

    friend bool operator==(const Query&, const Query&) = default;
};

struct WorkloadConfig {
    std::size_t num_templates = 16;
    std::size_t min_query_relations = 2;
    std::size_t max_query_relations = 5;
    double prefix_heavy_fraction = 1.0;
    double skew_min = 0.5;
    double skew_max = 2.0;
    double uniform_level_min = 0.3;
    double uniform_level_max = 1.0;
    /// Each relation draws a join weight log-uniform over a range spanning
    /// join_weight_spread; a pair's selectivity is w_a * w_b / (rows of the
    /// larger side), clamped to 1. Weights are then scaled together so the
    /// geometric mean over all pairs of the unfiltered join output is
    /// join_output_rows.
    double join_weight_spread = 1000.0;
    double join_output_rows = 1e4;
    /// Rows per block used to size the selectivities; match the cost model.
    double rows_per_block = 100.0;
    /// Base selectivity = mean block access probability of the profile, so a
    /// filter that touches few blocks also yields few rows. When false it is
    /// drawn uniformly from [base_selectivity_min, base_selectivity_max].
    bool selectivity_from_profile = false;
    double base_selectivity_min = 0.5;
    double base_selectivity_max = 1.0;
    /// If a template's full join result would exceed this many rows, its base
    /// selectivities are scaled down evenly until it does not. 0 disables.
    double max_result_rows = 1e5;
    double extra_edge_probability = 0.2;
    double instance_jitter = 0.25;
    double train_fraction = 0.75;
};

/// Draws n_templates connected join graphs over the catalog. Join
/// selectivities are a property of the relation pair (one table per seed),
/// so the same pair joins identically in every template.
std::vector<QueryTemplate> generate_templates(const Catalog& catalog, std::size_t n_templates,
                                              std::uint64_t seed, const WorkloadConfig& config = {});

Query instantiate_query(const QueryTemplate& tmpl, const Catalog& catalog, std::uint64_t instance_seed,
                        std::size_t query_id = 0);

/// Block probabilities for one relation under a profile, without jitter.
std::vector<double> profile_probabilities(const AccessProfile& profile, std::size_t num_blocks);

struct WorkloadSplit {
    std::vector<QueryTemplate> train;
    std::vector<QueryTemplate> test;
};

/// Disjoint split by template. Train side gets round(n * train_fraction).
WorkloadSplit split_workload(const std::vector<QueryTemplate>& templates, double train_fraction,
                             std::uint64_t seed);

/// Draws `count` query instances round-robin-free: each picks a template
/// uniformly and a fresh instance seed. Query ids start at first_id.
std::vector<Query> sample_queries(const std::vector<QueryTemplate>& templates, const Catalog& catalog,
                                  std::size_t count, std::uint64_t seed, std::size_t first_id = 0);

bool is_connected(const std::vector<std::size_t>& nodes, const std::vector<JoinEdge>& edges);

/// One line per query: id, template, relations, edges, seed (tab separated).
void write_workload(std::ostream& out, const std::vector<Query>& queries);

}  // namespace madb
