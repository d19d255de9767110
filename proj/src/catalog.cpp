#include "madb/catalog.hpp"

#include <algorithm>
#include <numeric>
#include <cmath>
#include <map>
#include <ostream>
#include <queue>

#include "madb/errors.hpp"
#include "madb/random.hpp"

namespace madb {

namespace {

enum Stream : std::uint64_t { kCatalog = 1, kPairSelectivity = 2, kTemplates = 3, kSplit = 4, kSample = 5 };

std::size_t pair_index(std::size_t a, std::size_t b, std::size_t n) {
    if (a > b) std::swap(a, b);
    return a * n + b;
}

}  // namespace

Catalog::Catalog(std::vector<Relation> relations) : relations_(std::move(relations)) {
    if (relations_.size() < 2) throw ConfigError("catalog needs at least 2 relations");
    for (std::size_t i = 0; i < relations_.size(); ++i) {
        const auto& r = relations_[i];
        if (r.id != i) throw ConfigError("relation ids must be 0..R-1 in order");
        if (r.num_blocks < 1) throw ConfigError("relation " + r.name + " has no blocks");
        if (r.index_blocks > r.num_blocks) throw ConfigError("index larger than relation " + r.name);
        if (r.has_index != (r.index_blocks > 0)) throw ConfigError("index flag mismatch on " + r.name);
        for (std::size_t j = 0; j < i; ++j)
            if (relations_[j].name == r.name) throw ConfigError("duplicate relation name " + r.name);
    }
}

std::size_t Catalog::total_blocks() const {
    std::size_t total = 0;
    for (const auto& r : relations_) total += r.width();
    return total;
}

std::vector<std::size_t> Catalog::row_widths() const {
    std::vector<std::size_t> widths;
    widths.reserve(relations_.size());
    for (const auto& r : relations_) widths.push_back(r.width());
    return widths;
}

Catalog build_catalog(const CatalogConfig& config) {
    if (config.num_relations < 2) throw ConfigError("num_relations must be >= 2");
    if (config.min_blocks < 1 || config.min_blocks > config.max_blocks)
        throw ConfigError("block range must satisfy 1 <= min <= max");
    if (config.index_probability < 0.0 || config.index_probability > 1.0)
        throw ConfigError("index_probability must lie in [0,1]");
    if (config.index_fraction <= 0.0 || config.index_fraction > 1.0)
        throw ConfigError("index_fraction must lie in (0,1]");

    Rng rng(derive_seed(config.seed, kCatalog));
    std::vector<Relation> relations;
    for (std::size_t i = 0; i < config.num_relations; ++i) {
        Relation r;
        r.id = i;
        r.name = "r" + std::to_string(i);
        r.num_blocks = rng.between(config.min_blocks, config.max_blocks);
        r.has_index = rng.bernoulli(config.index_probability);
        if (r.has_index) {
            r.index_blocks = static_cast<std::size_t>(std::ceil(config.index_fraction * static_cast<double>(r.num_blocks)));
            r.index_blocks = std::clamp<std::size_t>(r.index_blocks, 1, r.num_blocks);
        }
        relations.push_back(std::move(r));
    }
    return Catalog(std::move(relations));
}

bool Query::contains(std::size_t relation_id) const {
    return std::any_of(relations.begin(), relations.end(),
                       [&](const QueryRelation& r) { return r.relation_id == relation_id; });
}

const QueryRelation& Query::relation(std::size_t relation_id) const {
    for (const auto& r : relations)
        if (r.relation_id == relation_id) return r;
    throw ContractViolation("relation " + std::to_string(relation_id) + " not in query " + std::to_string(query_id));
}

std::vector<std::size_t> Query::relation_ids() const {
    std::vector<std::size_t> ids;
    ids.reserve(relations.size());
    for (const auto& r : relations) ids.push_back(r.relation_id);
    return ids;
}

std::optional<double> Query::edge_selectivity(std::size_t a, std::size_t b) const {
    for (const auto& e : edges)
        if ((e.left == a && e.right == b) || (e.left == b && e.right == a)) return e.selectivity;
    return std::nullopt;
}

bool is_connected(const std::vector<std::size_t>& nodes, const std::vector<JoinEdge>& edges) {
    if (nodes.empty()) return false;
    std::vector<std::size_t> seen{nodes.front()};
    std::queue<std::size_t> frontier;
    frontier.push(nodes.front());
    auto in_nodes = [&](std::size_t v) { return std::find(nodes.begin(), nodes.end(), v) != nodes.end(); };
    while (!frontier.empty()) {
        const std::size_t v = frontier.front();
        frontier.pop();
        for (const auto& e : edges) {
            std::size_t w;
            if (e.left == v) w = e.right;
            else if (e.right == v) w = e.left;
            else continue;
            if (!in_nodes(w) || std::find(seen.begin(), seen.end(), w) != seen.end()) continue;
            seen.push_back(w);
            frontier.push(w);
        }
    }
    return seen.size() == nodes.size();
}

std::vector<QueryTemplate> generate_templates(const Catalog& catalog, std::size_t n_templates, std::uint64_t seed,
                                              const WorkloadConfig& config) {
    if (n_templates < 1) throw ConfigError("n_templates must be >= 1");
    const std::size_t r = catalog.size();
    const std::size_t max_rel = std::min(config.max_query_relations, r);
    if (config.min_query_relations < 2 || config.min_query_relations > max_rel)
        throw ConfigError("query relation range must satisfy 2 <= min <= min(max, R)");
    if (!(config.join_weight_spread >= 1.0 && std::isfinite(config.join_weight_spread)))
        throw ConfigError("join_weight_spread must be finite and >= 1");
    if (!(config.join_output_rows > 0.0 && std::isfinite(config.join_output_rows)))
        throw ConfigError("join_output_rows must be positive");
    if (!(config.rows_per_block > 0.0)) throw ConfigError("rows_per_block must be positive");
    if (!(config.base_selectivity_min > 0.0 && config.base_selectivity_min <= config.base_selectivity_max &&
          config.base_selectivity_max <= 1.0))
        throw ConfigError("base selectivity range must lie in (0,1]");
    if (!(config.max_result_rows >= 0.0)) throw ConfigError("max_result_rows must be >= 0");

    // Schema-level join selectivity per relation pair.
    Rng pair_rng(derive_seed(seed, kPairSelectivity));
    std::vector<double> log_w(r);
    for (auto& w : log_w) w = pair_rng.uniform(0.0, std::log(config.join_weight_spread));
    auto rows = [&](std::size_t i) { return config.rows_per_block * static_cast<double>(catalog.relation(i).num_blocks); };
    // log of |a join b| = rows_a * rows_b * w_a * w_b / max(rows_a, rows_b), before scaling.
    double log_out = 0.0;
    std::size_t pairs = 0;
    for (std::size_t a = 0; a < r; ++a)
        for (std::size_t b = a + 1; b < r; ++b, ++pairs)
            log_out += std::log(std::min(rows(a), rows(b))) + log_w[a] + log_w[b];
    const double shift = (std::log(config.join_output_rows) - log_out / static_cast<double>(pairs)) / 2.0;
    std::vector<double> pair_sel(r * r, 1.0);
    for (std::size_t a = 0; a < r; ++a)
        for (std::size_t b = a + 1; b < r; ++b)
            pair_sel[pair_index(a, b, r)] =
                std::min(1.0, std::exp(log_w[a] + log_w[b] + 2.0 * shift) / std::max(rows(a), rows(b)));

    Rng rng(derive_seed(seed, kTemplates));
    std::vector<QueryTemplate> templates;
    templates.reserve(n_templates);
    for (std::size_t t = 0; t < n_templates; ++t) {
        QueryTemplate tmpl;
        tmpl.template_id = t;
        const std::size_t n = rng.between(config.min_query_relations, max_rel);

        std::vector<std::size_t> ids(r);
        for (std::size_t i = 0; i < r; ++i) ids[i] = i;
        rng.shuffle(ids.begin(), ids.end());
        ids.resize(n);

        // Random spanning tree in draw order, then optional chords.
        for (std::size_t i = 1; i < n; ++i) {
            const std::size_t parent = ids[rng.below(i)];
            tmpl.edges.push_back({std::min(parent, ids[i]), std::max(parent, ids[i]), 0.0});
        }
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) {
                const std::size_t a = std::min(ids[i], ids[j]);
                const std::size_t b = std::max(ids[i], ids[j]);
                const bool present = std::any_of(tmpl.edges.begin(), tmpl.edges.end(),
                                                 [&](const JoinEdge& e) { return e.left == a && e.right == b; });
                if (!present && rng.bernoulli(config.extra_edge_probability)) tmpl.edges.push_back({a, b, 0.0});
            }
        for (auto& e : tmpl.edges) e.selectivity = pair_sel[pair_index(e.left, e.right, r)];
        std::sort(tmpl.edges.begin(), tmpl.edges.end(),
                  [](const JoinEdge& x, const JoinEdge& y) { return std::pair(x.left, x.right) < std::pair(y.left, y.right); });

        std::sort(ids.begin(), ids.end());
        for (std::size_t id : ids) {
            TemplateRelation tr;
            tr.relation_id = id;
            tr.base_selectivity = rng.uniform(config.base_selectivity_min, config.base_selectivity_max);
            if (rng.bernoulli(config.prefix_heavy_fraction)) {
                tr.profile.kind = ProfileKind::prefix_heavy;
                tr.profile.skew = rng.uniform(config.skew_min, config.skew_max);
            } else {
                tr.profile.kind = ProfileKind::uniform;
                tr.profile.level = rng.uniform(config.uniform_level_min, config.uniform_level_max);
            }
            tr.profile.jitter = config.instance_jitter;
            if (config.selectivity_from_profile) {
                const auto probs = profile_probabilities(tr.profile, catalog.relation(id).num_blocks);
                const double mean = std::accumulate(probs.begin(), probs.end(), 0.0) / static_cast<double>(probs.size());
                tr.base_selectivity = std::clamp(mean, config.base_selectivity_min, config.base_selectivity_max);
            }
            tmpl.relations.push_back(tr);
        }
        if (config.max_result_rows > 0.0) {
            double log_result = 0.0;
            for (const auto& tr : tmpl.relations) log_result += std::log(rows(tr.relation_id) * tr.base_selectivity);
            for (const auto& e : tmpl.edges) log_result += std::log(e.selectivity);
            const double excess = log_result - std::log(config.max_result_rows);
            if (excess > 0.0) {
                const double factor = std::exp(-excess / static_cast<double>(n));
                for (auto& tr : tmpl.relations) tr.base_selectivity *= factor;
            }
        }
        templates.push_back(std::move(tmpl));
    }
    return templates;
}

std::vector<double> profile_probabilities(const AccessProfile& profile, std::size_t num_blocks) {
    std::vector<double> probs(num_blocks);
    for (std::size_t j = 0; j < num_blocks; ++j) {
        double p;
        if (profile.kind == ProfileKind::uniform) {
            p = profile.level;
        } else if (std::isinf(profile.skew)) {
            p = j == 0 ? 1.0 : 0.0;
        } else {
            p = std::pow(static_cast<double>(j + 1), -profile.skew);
        }
        probs[j] = std::clamp(p, 0.0, 1.0);
    }
    return probs;
}

Query instantiate_query(const QueryTemplate& tmpl, const Catalog& catalog, std::uint64_t instance_seed,
                        std::size_t query_id) {
    std::vector<std::size_t> ids;
    for (const auto& tr : tmpl.relations) {
        if (tr.relation_id >= catalog.size()) throw ContractViolation("template references unknown relation");
        ids.push_back(tr.relation_id);
    }
    if (ids.size() < 1 || !is_connected(ids, tmpl.edges)) throw ContractViolation("template join graph not connected");

    Rng rng(instance_seed);
    Query q;
    q.query_id = query_id;
    q.template_id = tmpl.template_id;
    q.edges = tmpl.edges;
    q.seed = instance_seed;
    for (const auto& tr : tmpl.relations) {
        AccessProfile profile = tr.profile;
        if (profile.jitter > 0.0) {
            const double span = std::log1p(profile.jitter);
            const double factor = std::exp(rng.uniform(-span, span));
            if (profile.kind == ProfileKind::uniform) profile.level = std::min(1.0, profile.level * factor);
            else profile.skew *= factor;
        }
        QueryRelation qr;
        qr.relation_id = tr.relation_id;
        qr.base_selectivity = tr.base_selectivity;
        qr.block_probs = profile_probabilities(profile, catalog.relation(tr.relation_id).num_blocks);
        q.relations.push_back(std::move(qr));
    }
    return q;
}

WorkloadSplit split_workload(const std::vector<QueryTemplate>& templates, double train_fraction, std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("train_fraction must lie in (0,1)");
    const std::size_t n = templates.size();
    const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
    if (n_train == 0 || n_train >= n) throw ConfigError("workload split leaves one side empty");

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(derive_seed(seed, kSplit));
    rng.shuffle(order.begin(), order.end());
    std::sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    std::sort(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());

    WorkloadSplit split;
    for (std::size_t i = 0; i < n; ++i) (i < n_train ? split.train : split.test).push_back(templates[order[i]]);
    return split;
}

std::vector<Query> sample_queries(const std::vector<QueryTemplate>& templates, const Catalog& catalog,
                                  std::size_t count, std::uint64_t seed, std::size_t first_id) {
    if (templates.empty() && count > 0) throw ConfigError("cannot sample queries from zero templates");
    Rng rng(derive_seed(seed, kSample));
    std::vector<Query> queries;
    queries.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const auto& tmpl = templates[rng.below(templates.size())];
        queries.push_back(instantiate_query(tmpl, catalog, rng.next_u64(), first_id + i));
    }
    return queries;
}

void write_workload(std::ostream& out, const std::vector<Query>& queries) {
    out << "# query_id\ttemplate_id\trelations\tedges\tseed\n";
    for (const auto& q : queries) {
        out << q.query_id << '\t' << q.template_id << '\t';
        for (std::size_t i = 0; i < q.relations.size(); ++i) out << (i ? "," : "") << q.relations[i].relation_id;
        out << '\t';
        for (std::size_t i = 0; i < q.edges.size(); ++i) {
            const auto& e = q.edges[i];
            out << (i ? "," : "") << e.left << '-' << e.right << ':' << e.selectivity;
        }
        out << '\t' << q.seed << '\n';
    }
}

}  // namespace madb
