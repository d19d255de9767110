#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <list>
#include <span>
#include <unordered_map>
#include <vector>

#include "madb/catalog.hpp"

namespace madb {

/// Block address: base blocks occupy [0, num_blocks), index blocks follow.
struct BlockId {
    std::uint32_t relation = 0;
    std::uint32_t block = 0;

    friend auto operator<=>(const BlockId&, const BlockId&) = default;
};

enum class AccessOutcome : std::uint8_t { miss, hit };

struct PoolCounters {
    std::uint64_t hits = 0;
    std::uint64_t misses = 0;

    std::uint64_t requests() const { return hits + misses; }
    friend bool operator==(const PoolCounters&, const PoolCounters&) = default;
};

using Bitmap = std::vector<std::vector<std::uint8_t>>;

/// Fixed-capacity block cache with strict LRU eviction.
class BufferPool {
public:
    BufferPool(std::size_t capacity, std::vector<std::size_t> row_widths);
    BufferPool(std::size_t capacity, const Catalog& catalog) : BufferPool(capacity, catalog.row_widths()) {}

    BufferPool(const BufferPool& other);
    BufferPool& operator=(const BufferPool& other);
    BufferPool(BufferPool&&) noexcept = default;
    BufferPool& operator=(BufferPool&&) noexcept = default;

    AccessOutcome access(BlockId block);
    bool contains(BlockId block) const;
    bool valid(BlockId block) const;

    std::size_t capacity() const { return capacity_; }
    std::size_t size() const { return recency_.size(); }
    const PoolCounters& counters() const { return counters_; }
    const std::vector<std::size_t>& row_widths() const { return widths_; }

    /// Resident blocks from least to most recently used.
    std::vector<BlockId> lru_order() const;

    /// Drops every resident block; counters are left alone.
    void evict_all();

private:
    void rebuild_index();
    static std::uint64_t key(BlockId b) { return (std::uint64_t{b.relation} << 32) | b.block; }

    std::size_t capacity_;
    std::vector<std::size_t> widths_;
    std::list<BlockId> recency_;  // front = most recent
    std::unordered_map<std::uint64_t, std::list<BlockId>::iterator> index_;
    PoolCounters counters_;
};

/// Hits over requests in the window between two counter snapshots; 0 for an empty window.
double hit_ratio_of_run(const PoolCounters& before, const PoolCounters& after);

/// B[i][j] = 1 iff block j of relation i is resident. Row i has width
/// num_blocks + index_blocks of relation i.
Bitmap snapshot_bitmap(const BufferPool& pool, const Catalog& catalog);

/// Default capacity: `fraction` of all catalog blocks, at least one block.
std::size_t default_pool_capacity(const Catalog& catalog, double fraction = 0.10);

/// Line-delimited `relation_id,block_index,hit|miss`.
void write_access_trace(std::ostream& out, std::span<const BlockId> trace, std::span<const AccessOutcome> outcomes);

}  // namespace madb
