#pragma once

#include <string>
#include <vector>

#include "madb/catalog.hpp"

namespace madb::test {

// Relation i gets blocks[i] base blocks and index[i] index blocks.
inline Catalog make_catalog(const std::vector<std::size_t>& blocks, const std::vector<std::size_t>& index = {}) {
    std::vector<Relation> rels;
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        Relation r;
        r.id = i;
        r.name = "t" + std::to_string(i);
        r.num_blocks = blocks[i];
        r.index_blocks = i < index.size() ? index[i] : 0;
        r.has_index = r.index_blocks > 0;
        rels.push_back(r);
    }
    return Catalog(std::move(rels));
}

// Every listed relation with access probability p on each block.
inline Query make_query(const Catalog& cat, const std::vector<std::size_t>& ids, const std::vector<JoinEdge>& edges,
                        double p = 1.0, double base_selectivity = 1.0, std::size_t query_id = 0) {
    Query q;
    q.query_id = query_id;
    for (std::size_t id : ids) {
        QueryRelation qr;
        qr.relation_id = id;
        qr.base_selectivity = base_selectivity;
        qr.block_probs.assign(cat.relation(id).num_blocks, p);
        q.relations.push_back(qr);
    }
    q.edges = edges;
    return q;
}

}  // namespace madb::test
