#include "madb/buffer_pool.hpp"

#include <cmath>
#include <ostream>

#include "madb/errors.hpp"

namespace madb {

BufferPool::BufferPool(std::size_t capacity, std::vector<std::size_t> row_widths)
    : capacity_(capacity), widths_(std::move(row_widths)) {
    if (capacity_ == 0) throw ConfigError("buffer pool capacity must be positive");
    index_.reserve(capacity_ * 2);
}

BufferPool::BufferPool(const BufferPool& other)
    : capacity_(other.capacity_), widths_(other.widths_), recency_(other.recency_), counters_(other.counters_) {
    rebuild_index();
}

BufferPool& BufferPool::operator=(const BufferPool& other) {
    if (this != &other) {
        capacity_ = other.capacity_;
        widths_ = other.widths_;
        recency_ = other.recency_;
        counters_ = other.counters_;
        rebuild_index();
    }
    return *this;
}

// Iterators into the source list are not valid here; re-point them.
void BufferPool::rebuild_index() {
    index_.clear();
    for (auto it = recency_.begin(); it != recency_.end(); ++it) index_.emplace(key(*it), it);
}

bool BufferPool::valid(BlockId block) const {
    return block.relation < widths_.size() && block.block < widths_[block.relation];
}

bool BufferPool::contains(BlockId block) const { return index_.count(key(block)) != 0; }

AccessOutcome BufferPool::access(BlockId block) {
    if (!valid(block))
        throw ContractViolation("block (" + std::to_string(block.relation) + "," + std::to_string(block.block) +
                                ") outside catalog");
    const auto k = key(block);
    if (auto it = index_.find(k); it != index_.end()) {
        recency_.splice(recency_.begin(), recency_, it->second);
        ++counters_.hits;
        return AccessOutcome::hit;
    }
    if (recency_.size() == capacity_) {
        index_.erase(key(recency_.back()));
        recency_.pop_back();
    }
    recency_.push_front(block);
    index_.emplace(k, recency_.begin());
    ++counters_.misses;
    return AccessOutcome::miss;
}

std::vector<BlockId> BufferPool::lru_order() const { return {recency_.rbegin(), recency_.rend()}; }

void BufferPool::evict_all() {
    recency_.clear();
    index_.clear();
}

double hit_ratio_of_run(const PoolCounters& before, const PoolCounters& after) {
    if (after.hits < before.hits || after.misses < before.misses)
        throw ContractViolation("counter window runs backwards");
    const auto hits = after.hits - before.hits;
    const auto total = hits + (after.misses - before.misses);
    if (total == 0) return 0.0;
    return static_cast<double>(hits) / static_cast<double>(total);
}

Bitmap snapshot_bitmap(const BufferPool& pool, const Catalog& catalog) {
    Bitmap bitmap(catalog.size());
    for (std::size_t i = 0; i < catalog.size(); ++i) bitmap[i].assign(catalog.relation(i).width(), 0);
    for (const auto& b : pool.lru_order())
        if (b.relation < bitmap.size() && b.block < bitmap[b.relation].size()) bitmap[b.relation][b.block] = 1;
    return bitmap;
}

std::size_t default_pool_capacity(const Catalog& catalog, double fraction) {
    if (!(fraction > 0.0 && fraction <= 1.0)) throw ConfigError("pool fraction must lie in (0,1]");
    const auto blocks = std::llround(fraction * static_cast<double>(catalog.total_blocks()));
    return static_cast<std::size_t>(std::max<long long>(1, blocks));
}

void write_access_trace(std::ostream& out, std::span<const BlockId> trace, std::span<const AccessOutcome> outcomes) {
    if (trace.size() != outcomes.size()) throw ContractViolation("trace and outcome lengths differ");
    for (std::size_t i = 0; i < trace.size(); ++i)
        out << trace[i].relation << ',' << trace[i].block << ',' << (outcomes[i] == AccessOutcome::hit ? "hit" : "miss")
            << '\n';
}

}  // namespace madb
