#include "madb/encoding.hpp"

#include <algorithm>
#include <ostream>

#include <json.hpp>

#include "madb/errors.hpp"

namespace madb {

std::string_view to_string(SharingMode mode) {
    switch (mode) {
        case SharingMode::full: return "full";
        case SharingMode::no_sharing: return "no_sharing";
        case SharingMode::marl2_dif_scheduler: return "marl2_dif_scheduler";
        case SharingMode::marl3_dif_optimizer: return "marl3_dif_optimizer";
    }
    return "unknown";
}

SharingMode parse_sharing_mode(std::string_view text) {
    for (auto m : {SharingMode::full, SharingMode::no_sharing, SharingMode::marl2_dif_scheduler,
                   SharingMode::marl3_dif_optimizer})
        if (text == to_string(m)) return m;
    throw ConfigError("unknown sharing mode '" + std::string(text) + "'");
}

std::vector<double> downsample_moving_average(std::span<const double> row, std::size_t width) {
    if (width < 1) throw ConfigError("downsample width must be >= 1");
    if (row.empty()) throw ContractViolation("downsample of an empty row");
    std::vector<double> padded(row.begin(), row.end());
    if (padded.size() < width) padded.resize(width, 0.0);

    const std::size_t base = padded.size() / width;
    const std::size_t longer = padded.size() % width;
    std::vector<double> out(width);
    std::size_t pos = 0;
    for (std::size_t k = 0; k < width; ++k) {
        const std::size_t len = base + (k < longer ? 1 : 0);
        double sum = 0.0;
        for (std::size_t i = 0; i < len; ++i) sum += padded[pos + i];
        out[k] = sum / static_cast<double>(len);
        pos += len;
    }
    return out;
}

Grid encode_join_levels(std::span<const std::size_t> order, std::size_t num_relations) {
    if (num_relations < 2) throw ContractViolation("join-level matrix needs R >= 2");
    if (order.size() > num_relations) throw ContractViolation("order longer than the relation count");
    Grid grid(num_relations, num_relations - 1);
    const double scale = 1.0 / static_cast<double>(num_relations - 1);
    for (std::size_t level = 1; level < order.size(); ++level)
        for (std::size_t i = 0; i <= level; ++i) {
            if (order[i] >= num_relations) throw ContractViolation("relation id out of range in order");
            grid.at(order[i], level - 1) = static_cast<double>(level) * scale;
        }
    return grid;
}

Grid encode_buffer(const Bitmap& bitmap, std::size_t width) {
    Grid grid(bitmap.size(), width);
    std::vector<double> row;
    for (std::size_t i = 0; i < bitmap.size(); ++i) {
        row.assign(bitmap[i].begin(), bitmap[i].end());
        const auto ds = downsample_moving_average(row, width);
        std::copy(ds.begin(), ds.end(), grid.values.begin() + static_cast<std::ptrdiff_t>(i * width));
    }
    return grid;
}

Grid encode_query_block_probs(const Query& query, const Catalog& catalog, std::size_t width,
                              const CostConstants& constants) {
    Grid grid(catalog.size(), width);
    for (const auto& qr : query.relations) {
        const auto& rel = catalog.relation(qr.relation_id);
        std::vector<double> row(qr.block_probs.begin(), qr.block_probs.end());
        row.resize(rel.num_blocks, 0.0);
        const double index_p = choose_access_method(qr, rel, constants) == AccessMethod::index_scan ? 1.0 : 0.0;
        row.resize(rel.width(), index_p);
        const auto ds = downsample_moving_average(row, width);
        std::copy(ds.begin(), ds.end(), grid.values.begin() + static_cast<std::ptrdiff_t>(qr.relation_id * width));
    }
    return grid;
}

std::vector<double> relations_vector(const Query& query, std::size_t num_relations) {
    std::vector<double> v(num_relations, 0.0);
    for (const auto& qr : query.relations) {
        if (qr.relation_id >= num_relations) throw ContractViolation("relation id out of range");
        v[qr.relation_id] = 1.0;
    }
    return v;
}

const Segment* ObservationLayout::find(std::string_view name) const {
    for (const auto& s : segments)
        if (s.name == name) return &s;
    return nullptr;
}

void ObservationLayout::add(std::string name, std::size_t length) {
    segments.push_back({std::move(name), size, length});
    size += length;
}

namespace {

bool scheduler_gets_share(SharingMode mode) { return mode != SharingMode::no_sharing; }
bool optimizer_gets_share(SharingMode mode) { return mode != SharingMode::no_sharing; }

void append(std::vector<double>& out, std::span<const double> values) { out.insert(out.end(), values.begin(), values.end()); }

void expect_grid(const Grid& g, std::size_t rows, std::size_t cols, const char* what) {
    if (g.rows != rows || g.cols != cols || g.values.size() != rows * cols)
        throw ContractViolation(std::string(what) + " has the wrong shape");
}

}  // namespace

ObservationLayout scheduler_layout(std::size_t num_relations, const EncodingConfig& config, SharingMode mode) {
    const std::size_t r = num_relations;
    const std::size_t f = config.downsample_width;
    ObservationLayout layout;
    layout.add("buffer", r * f);
    const std::size_t slot = mode == SharingMode::marl2_dif_scheduler ? r : r * f;
    for (std::size_t k = 0; k < config.queue_capacity; ++k) layout.add("queue[" + std::to_string(k) + "]", slot);
    if (scheduler_gets_share(mode)) {
        layout.add("last_plan", r * (r - 1));
        layout.add("previous_plan", r * (r - 1));
    }
    return layout;
}

ObservationLayout optimizer_layout(std::size_t num_relations, const EncodingConfig& config, SharingMode mode) {
    const std::size_t r = num_relations;
    const std::size_t f = config.downsample_width;
    ObservationLayout layout;
    if (mode == SharingMode::marl3_dif_optimizer) layout.add("last_plan_cost", 1);
    else layout.add("last_plan", r * (r - 1));
    layout.add("relations", r);
    layout.add("partial_order", r * (r - 1));
    if (optimizer_gets_share(mode)) {
        layout.add("buffer", r * f);
        layout.add("query_blocks", r * f);
    }
    return layout;
}

std::vector<double> assemble_scheduler_obs(const Grid& buffer, std::span<const Query* const> queue,
                                           const std::optional<PlanShare>& share, SharingMode mode,
                                           const Catalog& catalog, const EncodingConfig& config,
                                           const CostConstants& constants) {
    const std::size_t r = catalog.size();
    const std::size_t f = config.downsample_width;
    if (queue.empty()) throw ContractViolation("scheduler observation of an empty queue");
    if (queue.size() > config.queue_capacity) throw ContractViolation("queue exceeds slot capacity");
    if (scheduler_gets_share(mode) != share.has_value())
        throw ContractViolation("plan share presence does not match sharing mode " + std::string(to_string(mode)));
    expect_grid(buffer, r, f, "buffer encoding");

    const auto layout = scheduler_layout(r, config, mode);
    std::vector<double> obs;
    obs.reserve(layout.size);
    append(obs, buffer.values);
    const std::size_t slot = mode == SharingMode::marl2_dif_scheduler ? r : r * f;
    for (std::size_t k = 0; k < config.queue_capacity; ++k) {
        const Query* q = k < queue.size() ? queue[k] : nullptr;
        if (q == nullptr) {
            obs.insert(obs.end(), slot, 0.0);
        } else if (mode == SharingMode::marl2_dif_scheduler) {
            append(obs, relations_vector(*q, r));
        } else {
            append(obs, encode_query_block_probs(*q, catalog, f, constants).values);
        }
    }
    if (share) {
        expect_grid(share->last_plan, r, r - 1, "last plan");
        expect_grid(share->previous_plan, r, r - 1, "previous plan");
        append(obs, share->last_plan.values);
        append(obs, share->previous_plan.values);
    }
    if (obs.size() != layout.size) throw ContractViolation("scheduler observation length mismatch");
    return obs;
}

std::vector<double> assemble_optimizer_obs(const OptimizerInputs& inputs, const std::optional<BufferShare>& share,
                                           SharingMode mode, std::size_t num_relations, const EncodingConfig& config) {
    const std::size_t r = num_relations;
    const std::size_t f = config.downsample_width;
    if (optimizer_gets_share(mode) != share.has_value())
        throw ContractViolation("buffer share presence does not match sharing mode " + std::string(to_string(mode)));
    if (inputs.relations.size() != r) throw ContractViolation("relations vector has the wrong length");

    const auto layout = optimizer_layout(r, config, mode);
    std::vector<double> obs;
    obs.reserve(layout.size);
    if (mode == SharingMode::marl3_dif_optimizer) {
        obs.push_back(std::clamp(inputs.last_plan_cost, 0.0, 1.0));
    } else {
        if (inputs.last_plan == nullptr) throw ContractViolation("last plan matrix missing");
        expect_grid(*inputs.last_plan, r, r - 1, "last plan");
        append(obs, inputs.last_plan->values);
    }
    append(obs, inputs.relations);
    append(obs, encode_join_levels(inputs.partial_order, r).values);
    if (share) {
        expect_grid(share->buffer, r, f, "shared buffer");
        expect_grid(share->query_blocks, r, f, "shared query blocks");
        append(obs, share->buffer.values);
        append(obs, share->query_blocks.values);
    }
    if (obs.size() != layout.size) throw ContractViolation("optimizer observation length mismatch");
    return obs;
}

void write_layout_schema(std::ostream& out, std::size_t num_relations, const EncodingConfig& config, SharingMode mode) {
    auto describe = [](const ObservationLayout& layout) {
        nlohmann::ordered_json segs = nlohmann::ordered_json::array();
        for (const auto& s : layout.segments)
            segs.push_back({{"name", s.name}, {"offset", s.offset}, {"length", s.length}});
        return nlohmann::ordered_json{{"size", layout.size}, {"segments", segs}};
    };
    nlohmann::ordered_json doc;
    doc["sharing_mode"] = std::string(to_string(mode));
    doc["relations"] = num_relations;
    doc["downsample_width"] = config.downsample_width;
    doc["queue_capacity"] = config.queue_capacity;
    doc["scheduler"] = describe(scheduler_layout(num_relations, config, mode));
    doc["optimizer"] = describe(optimizer_layout(num_relations, config, mode));
    out << doc.dump(2) << '\n';
}

}  // namespace madb
