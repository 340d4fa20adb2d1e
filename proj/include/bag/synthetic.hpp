#pragma once

// Desk-scale synthetic multi-hop dataset generator. Each sample hides one
// valid relation chain across documents among complete distractor chains
// (same relations, different head) and head-sharing broken facts, so the
// gold answer is only recoverable by following the chain.

#include "bag/data.hpp"

#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace bag {

struct SyntheticConfig {
    int n_entities = 20;
    int n_relations = 6;
    int n_distractor_docs = 2;  // extra noise documents beyond chain/head-share docs
    int n_candidates = 5;
    int hops = 2;
    int n_samples = 1000;
    std::uint64_t seed = 0;

    void validate() const {
        if (hops < 1) throw std::invalid_argument("synthetic: hops must be >= 1");
        if (n_candidates < 2) throw std::invalid_argument("synthetic: n_candidates must be >= 2");
        if (n_candidates > n_entities)
            throw std::invalid_argument("synthetic: n_candidates must be <= n_entities");
        if (n_samples < 1) throw std::invalid_argument("synthetic: n_samples must be >= 1");
        if (n_distractor_docs < 0)
            throw std::invalid_argument("synthetic: n_distractor_docs must be >= 0");
    }
};

namespace detail {

inline std::string base26(int i, int width) {
    std::string s(static_cast<std::size_t>(width), 'a');
    for (int k = width - 1; k >= 0; --k) {
        s[static_cast<std::size_t>(k)] = static_cast<char>('a' + i % 26);
        i /= 26;
    }
    return s;
}

inline std::string entity_name(int i) { return "Ent" + base26(i, 2); }
inline std::string relation_name(int i) { return "rel" + base26(i, 2); }

}  // namespace detail

inline std::vector<Sample> generate_synthetic(const SyntheticConfig& cfg) {
    cfg.validate();
    const int hops = cfg.hops;
    if (cfg.n_candidates < hops + 1)
        throw std::invalid_argument("synthetic: n_candidates < hops + 1, gold chain does not fit");
    if (cfg.n_relations < hops)
        throw std::invalid_argument("synthetic: n_relations < hops");

    // The gold head is a candidate (so it gets a graph node reachable from
    // the query entity); each chain then contributes `hops` candidates
    // (intermediates + tail).
    const int n_chains_d = std::max(0, (cfg.n_candidates - 1 - hops) / hops);
    const int n_extra = cfg.n_candidates - 1 - hops * (1 + n_chains_d);
    const int n_noise = cfg.n_distractor_docs;
    const int entities_needed =
        (1 + n_chains_d) * (hops + 1) + n_extra + 2 * n_noise;
    if (entities_needed > cfg.n_entities)
        throw std::invalid_argument(
            "synthetic: infeasible configuration, needs " +
            std::to_string(entities_needed) + " entities but pool has " +
            std::to_string(cfg.n_entities));

    std::mt19937_64 rng(cfg.seed);
    std::vector<Sample> out;
    out.reserve(static_cast<std::size_t>(cfg.n_samples));

    for (int si = 0; si < cfg.n_samples; ++si) {
        std::vector<int> ents(static_cast<std::size_t>(cfg.n_entities));
        std::iota(ents.begin(), ents.end(), 0);
        std::shuffle(ents.begin(), ents.end(), rng);
        std::vector<int> rels(static_cast<std::size_t>(cfg.n_relations));
        std::iota(rels.begin(), rels.end(), 0);
        std::shuffle(rels.begin(), rels.end(), rng);

        std::size_t ei = 0;
        auto next_ent = [&]() { return ents[ei++]; };

        // chains[0] is the gold chain; entity lists are head, mid..., tail.
        std::vector<std::vector<int>> chains;
        for (int c = 0; c < 1 + n_chains_d; ++c) {
            std::vector<int> chain;
            for (int h = 0; h <= hops; ++h) chain.push_back(next_ent());
            chains.push_back(std::move(chain));
        }
        const int head = chains[0][0];
        const int gold_tail = chains[0].back();

        std::vector<std::string> docs;
        for (const auto& chain : chains)
            for (int h = 0; h < hops; ++h)
                docs.push_back(detail::entity_name(chain[static_cast<std::size_t>(h)]) + " " +
                               detail::relation_name(rels[static_cast<std::size_t>(h)]) + " " +
                               detail::entity_name(chain[static_cast<std::size_t>(h) + 1]));

        // Head-sharing broken facts: reuse the gold head with a relation that
        // is not the chain's first hop.
        std::vector<int> extra_targets;
        for (int x = 0; x < n_extra; ++x) {
            int tgt = next_ent();
            extra_targets.push_back(tgt);
            if (cfg.n_relations < 2)
                throw std::invalid_argument(
                    "synthetic: head-share distractors need >= 2 relations");
            int rel = rels[static_cast<std::size_t>(1 + x % (cfg.n_relations - 1))];
            docs.push_back(detail::entity_name(head) + " " + detail::relation_name(rel) +
                           " " + detail::entity_name(tgt));
        }

        // Pure noise facts over fresh entities.
        for (int x = 0; x < n_noise; ++x) {
            int a = next_ent(), b = next_ent();
            int rel = rels[static_cast<std::size_t>(
                std::uniform_int_distribution<int>(0, cfg.n_relations - 1)(rng))];
            docs.push_back(detail::entity_name(a) + " " + detail::relation_name(rel) +
                           " " + detail::entity_name(b));
        }

        std::vector<int> cand_ents;
        cand_ents.push_back(head);
        for (const auto& chain : chains)
            for (int h = 1; h <= hops; ++h) cand_ents.push_back(chain[static_cast<std::size_t>(h)]);
        for (int tgt : extra_targets) cand_ents.push_back(tgt);
        std::shuffle(cand_ents.begin(), cand_ents.end(), rng);
        std::shuffle(docs.begin(), docs.end(), rng);

        std::string rel_composite = detail::relation_name(rels[0]);
        for (int h = 1; h < hops; ++h) rel_composite += "_" + detail::relation_name(rels[static_cast<std::size_t>(h)]);

        nlohmann::json rec;
        rec["id"] = "synth-" + std::to_string(cfg.seed) + "-" + std::to_string(si);
        rec["query"] = rel_composite + " " + to_lower(detail::entity_name(head));
        rec["supports"] = docs;
        nlohmann::json cands = nlohmann::json::array();
        for (int e : cand_ents) cands.push_back(to_lower(detail::entity_name(e)));
        rec["candidates"] = cands;
        rec["answer"] = to_lower(detail::entity_name(gold_tail));
        out.push_back(sample_from_json(rec));
    }
    return out;
}

}  // namespace bag
