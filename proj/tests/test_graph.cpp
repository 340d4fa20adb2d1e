#include <gtest/gtest.h>

#include "bag/graph.hpp"
#include "bag/synthetic.hpp"

#include <algorithm>
#include <random>
#include <set>

using namespace bag;

namespace {

Sample make_sample(const std::vector<std::string>& docs,
                   const std::vector<std::string>& candidates) {
    Sample s;
    s.id = "t";
    s.query_tokens = {"q"};
    for (std::size_t i = 0; i < docs.size(); ++i)
        s.supports.push_back(Document{static_cast<int>(i), tokenize(docs[i])});
    s.candidates = candidates;
    return s;
}

std::vector<TokenList> cand_toks(const std::vector<std::string>& cands) {
    std::vector<TokenList> out;
    for (const auto& c : cands) out.push_back(candidate_tokens(c));
    return out;
}

TEST(FindMentions, SingleExactMatch) {
    Document doc{0, tokenize("kepahiang is a regency in bengkulu")};
    auto m = find_mentions(doc, cand_toks({"indonesia", "bengkulu"}));
    ASSERT_EQ(m.size(), 1u);
    EXPECT_EQ(m[0], (Mention{1, 0, 5, 6}));
}

TEST(FindMentions, OverlapBetweenDifferentCandidatesAllowed) {
    Document doc{0, tokenize("new york city")};
    auto m = find_mentions(doc, cand_toks({"new york", "york"}));
    ASSERT_EQ(m.size(), 2u);
    EXPECT_EQ(m[0], (Mention{0, 0, 0, 2}));
    EXPECT_EQ(m[1], (Mention{1, 0, 1, 2}));
}

TEST(FindMentions, CaseInsensitive) {
    Document doc{3, tokenize("Bengkulu is here")};
    auto m = find_mentions(doc, cand_toks({"bengkulu"}));
    ASSERT_EQ(m.size(), 1u);
    EXPECT_EQ(m[0].doc_index, 3);
}

// Exhaustive (position, candidate) scan with the same within-candidate
// non-overlap policy.
std::vector<Mention> brute_force_mentions(const Document& doc,
                                          const std::vector<TokenList>& cands) {
    TokenList low = lower_tokens(doc.tokens);
    std::vector<Mention> out;
    for (std::size_t k = 0; k < cands.size(); ++k) {
        std::size_t next_free = 0;
        for (std::size_t pos = 0; pos + cands[k].size() <= low.size(); ++pos) {
            if (cands[k].empty() || pos < next_free) continue;
            if (std::equal(cands[k].begin(), cands[k].end(), low.begin() + static_cast<long>(pos))) {
                out.push_back(Mention{static_cast<int>(k), doc.doc_id,
                                      static_cast<int>(pos),
                                      static_cast<int>(pos + cands[k].size())});
                next_free = pos + cands[k].size();
            }
        }
    }
    std::sort(out.begin(), out.end(), [](const Mention& a, const Mention& b) {
        return std::tie(a.start, a.candidate_index) < std::tie(b.start, b.candidate_index);
    });
    return out;
}

TEST(FindMentions, MatchesBruteForceOnRandomCorpora) {
    std::mt19937_64 rng(99);
    const std::vector<std::string> vocab = {"a", "b", "c", "d", "e"};
    for (int trial = 0; trial < 300; ++trial) {
        std::uniform_int_distribution<int> len(1, 30), nc(1, 5), clen(1, 3), pick(0, 4);
        Document doc{0, {}};
        int L = len(rng);
        for (int i = 0; i < L; ++i) doc.tokens.push_back(vocab[static_cast<std::size_t>(pick(rng))]);
        std::vector<TokenList> cands;
        int K = nc(rng);
        for (int k = 0; k < K; ++k) {
            TokenList c;
            int cl = clen(rng);
            for (int i = 0; i < cl; ++i) c.push_back(vocab[static_cast<std::size_t>(pick(rng))]);
            cands.push_back(c);
        }
        EXPECT_EQ(find_mentions(doc, cands), brute_force_mentions(doc, cands));
    }
}

TEST(BuildGraph, CrossDocumentEdgeForSameCandidate) {
    EntityGraph g = build_graph(make_sample({"a b", "b c"}, {"b"}));
    ASSERT_EQ(g.node_count(), 2);
    ASSERT_EQ(g.edges.size(), 1u);
    EXPECT_EQ(g.edges[0], (Edge{0, 1, Relation::CROSS_DOC}));
}

TEST(BuildGraph, SameCandidateTwiceInOneDocumentIsWithinDocOnly) {
    EntityGraph g = build_graph(make_sample({"a b a"}, {"a"}));
    ASSERT_EQ(g.node_count(), 2);
    ASSERT_EQ(g.edges.size(), 1u);
    EXPECT_EQ(g.edges[0], (Edge{0, 1, Relation::WITHIN_DOC}));
}

TEST(BuildGraph, EmptyGraphMarker) {
    EntityGraph g = build_graph(make_sample({"x y"}, {"z"}));
    EXPECT_TRUE(g.empty());
}

TEST(BuildGraph, TruncationKeepsFirstMentionsInDocumentOrder) {
    EntityGraph g = build_graph(make_sample({"a a a", "a a"}, {"a"}), 4);
    ASSERT_EQ(g.node_count(), 4);
    EXPECT_EQ(g.nodes[3].doc_index, 1);
    for (const Edge& e : g.edges) EXPECT_LT(e.j, 4);
}

// Brute-force evaluation of the two edge rules over all node pairs.
std::set<Edge> brute_force_edges(const std::vector<Mention>& nodes,
                                 const std::vector<TokenList>& cands) {
    std::set<Edge> out;
    for (int i = 0; i < static_cast<int>(nodes.size()); ++i)
        for (int j = i + 1; j < static_cast<int>(nodes.size()); ++j) {
            const Mention& a = nodes[static_cast<std::size_t>(i)];
            const Mention& b = nodes[static_cast<std::size_t>(j)];
            if (a.doc_index == b.doc_index)
                out.insert(Edge{i, j, Relation::WITHIN_DOC});
            else if (cands[static_cast<std::size_t>(a.candidate_index)] ==
                     cands[static_cast<std::size_t>(b.candidate_index)])
                out.insert(Edge{i, j, Relation::CROSS_DOC});
        }
    return out;
}

TEST(BuildGraph, EdgesMatchBruteForceOnRandomCorpora) {
    std::mt19937_64 rng(7);
    const std::vector<std::string> vocab = {"a", "b", "c", "d"};
    for (int trial = 0; trial < 300; ++trial) {
        std::uniform_int_distribution<int> nd(1, 3), len(1, 8), nc(1, 4), pick(0, 3);
        std::vector<std::string> docs;
        int D = nd(rng);
        for (int d = 0; d < D; ++d) {
            std::string doc;
            int L = len(rng);
            for (int i = 0; i < L; ++i) {
                if (i) doc += ' ';
                doc += vocab[static_cast<std::size_t>(pick(rng))];
            }
            docs.push_back(doc);
        }
        std::vector<std::string> cands;
        int K = nc(rng);
        for (int k = 0; k < K; ++k) cands.push_back(vocab[static_cast<std::size_t>(pick(rng))]);
        std::sort(cands.begin(), cands.end());
        cands.erase(std::unique(cands.begin(), cands.end()), cands.end());

        Sample s = make_sample(docs, cands);
        EntityGraph g = build_graph(s);
        std::set<Edge> expect = brute_force_edges(g.nodes, cand_toks(cands));
        EXPECT_EQ(std::set<Edge>(g.edges.begin(), g.edges.end()), expect);

        for (const Mention& m : g.nodes)
            EXPECT_LT(m.candidate_index, static_cast<int>(cands.size()));
    }
}

TEST(BuildGraph, AddingDocumentNeverRemovesNodes) {
    Sample s = make_sample({"a b", "b c"}, {"a", "b", "c"});
    int before = build_graph(s).node_count();
    s.supports.push_back(Document{2, tokenize("c a")});
    EXPECT_GE(build_graph(s).node_count(), before);
}

TEST(BuildGraph, DocumentPermutationPreservesEdgeMultiset) {
    auto samples = generate_synthetic({.n_samples = 5, .seed = 21});
    for (Sample s : samples) {
        EntityGraph g1 = build_graph(s);
        std::reverse(s.supports.begin(), s.supports.end());
        for (std::size_t i = 0; i < s.supports.size(); ++i)
            s.supports[i].doc_id = static_cast<int>(i);
        EntityGraph g2 = build_graph(s);
        ASSERT_EQ(g1.node_count(), g2.node_count());

        // Induced relabeling: match nodes by (candidate, original doc, span).
        std::multiset<std::tuple<int, int, int, Relation>> e1, e2;
        auto key = [](const EntityGraph& g, int n, std::size_t ndocs, bool flipped) {
            const Mention& m = g.nodes[static_cast<std::size_t>(n)];
            int doc = flipped ? static_cast<int>(ndocs) - 1 - m.doc_index : m.doc_index;
            return std::make_tuple(m.candidate_index, doc, m.start);
        };
        for (const Edge& e : g1.edges) {
            auto a = key(g1, e.i, s.supports.size(), false);
            auto b = key(g1, e.j, s.supports.size(), false);
            if (b < a) std::swap(a, b);
            e1.insert({std::get<0>(a) * 1000 + std::get<1>(a) * 10 + std::get<2>(a),
                       std::get<0>(b) * 1000 + std::get<1>(b) * 10 + std::get<2>(b), 0, e.rel});
        }
        for (const Edge& e : g2.edges) {
            auto a = key(g2, e.i, s.supports.size(), true);
            auto b = key(g2, e.j, s.supports.size(), true);
            if (b < a) std::swap(a, b);
            e2.insert({std::get<0>(a) * 1000 + std::get<1>(a) * 10 + std::get<2>(a),
                       std::get<0>(b) * 1000 + std::get<1>(b) * 10 + std::get<2>(b), 0, e.rel});
        }
        EXPECT_EQ(e1, e2);
    }
}

TEST(GraphJson, RoundTrip) {
    auto samples = generate_synthetic({.n_samples = 3, .seed = 2});
    for (const Sample& s : samples) {
        EntityGraph g = build_graph(s);
        EntityGraph back = graph_from_json(graph_to_json(g));
        EXPECT_EQ(g.nodes, back.nodes);
        EXPECT_EQ(g.edges, back.edges);
    }
}

}  // namespace
