#pragma once

// Entity graph: candidate-mention nodes found by string matching, plus
// within-document and cross-document undirected edges.

#include "bag/data.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <stdexcept>
#include <string>
#include <vector>

namespace bag {

enum class Relation { WITHIN_DOC = 0, CROSS_DOC = 1 };
inline constexpr int kNumRelations = 2;

struct Mention {
    int candidate_index = 0;
    int doc_index = 0;
    int start = 0;  // half-open token span [start, end)
    int end = 0;

    friend bool operator==(const Mention&, const Mention&) = default;
};

struct Edge {
    int i = 0;  // i < j
    int j = 0;
    Relation rel = Relation::WITHIN_DOC;

    friend bool operator==(const Edge&, const Edge&) = default;
    friend auto operator<=>(const Edge&, const Edge&) = default;
};

struct EntityGraph {
    std::vector<Mention> nodes;
    std::vector<Edge> edges;
    // neighbors[rel][i] lists every j adjacent to i through rel, both directions.
    std::vector<std::vector<std::vector<int>>> neighbors;

    int node_count() const { return static_cast<int>(nodes.size()); }
    bool empty() const { return nodes.empty(); }

    void rebuild_neighbors() {
        neighbors.assign(kNumRelations,
                         std::vector<std::vector<int>>(nodes.size()));
        for (const Edge& e : edges) {
            auto& nl = neighbors[static_cast<std::size_t>(e.rel)];
            nl[static_cast<std::size_t>(e.i)].push_back(e.j);
            nl[static_cast<std::size_t>(e.j)].push_back(e.i);
        }
    }

    // Total neighbor count of node i across relations.
    int degree(int i) const {
        int c = 0;
        for (const auto& nl : neighbors) c += static_cast<int>(nl[static_cast<std::size_t>(i)].size());
        return c;
    }
};

// Every token-span occurrence of every candidate in one document. Different
// candidates may overlap; occurrences of one candidate are the left-to-right
// maximal non-overlapping matches. Sorted by (start, candidate_index).
inline std::vector<Mention> find_mentions(const Document& doc,
                                          const std::vector<TokenList>& cand_toks) {
    TokenList lower = lower_tokens(doc.tokens);
    std::vector<Mention> out;
    for (std::size_t k = 0; k < cand_toks.size(); ++k) {
        const TokenList& ct = cand_toks[k];
        if (ct.empty()) continue;
        std::size_t pos = 0;
        while (pos + ct.size() <= lower.size()) {
            if (std::equal(ct.begin(), ct.end(), lower.begin() + static_cast<long>(pos))) {
                out.push_back(Mention{static_cast<int>(k), doc.doc_id,
                                      static_cast<int>(pos),
                                      static_cast<int>(pos + ct.size())});
                pos += ct.size();
            } else {
                ++pos;
            }
        }
    }
    std::sort(out.begin(), out.end(), [](const Mention& a, const Mention& b) {
        return std::tie(a.start, a.candidate_index) <
               std::tie(b.start, b.candidate_index);
    });
    return out;
}

// Nodes are mentions in document order, truncated to node_cap. A node pair in
// the same document gets WITHIN_DOC; a same-candidate pair in different
// documents gets CROSS_DOC. A same-candidate pair within one document is
// WITHIN_DOC only.
inline EntityGraph build_graph(const Sample& sample, int node_cap = 500) {
    if (node_cap < 1) throw std::invalid_argument("build_graph: node_cap must be >= 1");
    std::vector<TokenList> cand_toks;
    cand_toks.reserve(sample.candidates.size());
    for (const auto& c : sample.candidates) cand_toks.push_back(candidate_tokens(c));

    EntityGraph g;
    for (const auto& doc : sample.supports) {
        for (const Mention& m : find_mentions(doc, cand_toks)) {
            if (g.node_count() >= node_cap) break;
            g.nodes.push_back(m);
        }
        if (g.node_count() >= node_cap) break;
    }
    for (int i = 0; i < g.node_count(); ++i)
        for (int j = i + 1; j < g.node_count(); ++j) {
            const Mention& a = g.nodes[static_cast<std::size_t>(i)];
            const Mention& b = g.nodes[static_cast<std::size_t>(j)];
            if (a.doc_index == b.doc_index)
                g.edges.push_back(Edge{i, j, Relation::WITHIN_DOC});
            else if (a.candidate_index == b.candidate_index)
                g.edges.push_back(Edge{i, j, Relation::CROSS_DOC});
        }
    g.rebuild_neighbors();
    return g;
}

inline nlohmann::json graph_to_json(const EntityGraph& g) {
    nlohmann::json out;
    out["nodes"] = nlohmann::json::array();
    for (const Mention& m : g.nodes)
        out["nodes"].push_back({{"cand", m.candidate_index},
                                {"doc", m.doc_index},
                                {"start", m.start},
                                {"end", m.end}});
    out["edges"] = nlohmann::json::array();
    for (const Edge& e : g.edges)
        out["edges"].push_back(nlohmann::json::array(
            {e.i, e.j, e.rel == Relation::WITHIN_DOC ? "within" : "cross"}));
    return out;
}

inline EntityGraph graph_from_json(const nlohmann::json& j) {
    EntityGraph g;
    for (const auto& n : j.at("nodes"))
        g.nodes.push_back(Mention{n.at("cand").get<int>(), n.at("doc").get<int>(),
                                  n.at("start").get<int>(), n.at("end").get<int>()});
    for (const auto& e : j.at("edges")) {
        std::string rel = e.at(2).get<std::string>();
        if (rel != "within" && rel != "cross")
            throw std::invalid_argument("graph_from_json: unknown relation " + rel);
        g.edges.push_back(Edge{e.at(0).get<int>(), e.at(1).get<int>(),
                               rel == "within" ? Relation::WITHIN_DOC
                                               : Relation::CROSS_DOC});
    }
    g.rebuild_neighbors();
    return g;
}

}  // namespace bag
