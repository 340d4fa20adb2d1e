#pragma once

// Gated relational graph convolution: neighbor propagation with per-relation
// weights, a sigmoid gate blending tanh(update) with the previous state, and
// an L-layer stack sharing one parameter set.

#include "bag/autodiff.hpp"
#include "bag/graph.hpp"

#include <stdexcept>
#include <vector>

namespace bag {

struct RgcnVars {
    ad::Var W_within;  // d x d
    ad::Var W_cross;   // d x d (alias of W_within when edge types are ablated)
    ad::Var W0;        // d x d
    ad::Var gate_W;    // 2d x d
    ad::Var gate_b;    // 1 x d
};

struct RgcnOptions {
    // Normalization constant: total neighbor count |N_i| by default, or the
    // per-relation count |N_i^r| when true.
    bool per_relation_norm = false;
};

namespace detail {

inline ad::Mat adjacency(const EntityGraph& g, Relation rel) {
    const int T = g.node_count();
    ad::Mat A = ad::Mat::Zero(T, T);
    const auto& nl = g.neighbors[static_cast<std::size_t>(rel)];
    for (int i = 0; i < T; ++i)
        for (int j : nl[static_cast<std::size_t>(i)]) A(i, j) = 1.0;
    return A;
}

}  // namespace detail

// u_i = sum_r sum_{j in N_i^r} (1/c) W_r h_j + W0 h_i. Isolated nodes keep
// only the self term.
inline ad::Var rgcn_propagate(ad::Tape& t, ad::Var h, const EntityGraph& g,
                              const RgcnVars& p, const RgcnOptions& opt = {}) {
    const int T = g.node_count();
    if (t.val(h).rows() != T)
        throw std::invalid_argument("rgcn_propagate: state row count != node count");

    ad::Var u = t.matmul(h, p.W0);
    const ad::Var W_rel[kNumRelations] = {p.W_within, p.W_cross};
    for (int r = 0; r < kNumRelations; ++r) {
        ad::Mat A = detail::adjacency(g, static_cast<Relation>(r));
        if (A.cwiseAbs().sum() == 0.0) continue;
        ad::Mat norm = ad::Mat::Zero(T, T);
        for (int i = 0; i < T; ++i) {
            int c = opt.per_relation_norm
                        ? static_cast<int>(g.neighbors[static_cast<std::size_t>(r)]
                                               [static_cast<std::size_t>(i)].size())
                        : g.degree(i);
            if (c > 0) norm.row(i) = A.row(i) / static_cast<double>(c);
        }
        u = t.add(u, t.matmul(t.leaf(std::move(norm)), t.matmul(h, W_rel[r])));
    }
    return u;
}

// w = sigmoid(f_s(concat(u, h))); h_next = w .* tanh(u) + (1 - w) .* h.
inline ad::Var rgcn_gate_update(ad::Tape& t, ad::Var u, ad::Var h, const RgcnVars& p) {
    ad::Var w = t.sigmoid_(
        t.add_rowvec(t.matmul(t.concat_cols({u, h}), p.gate_W), p.gate_b));
    return t.add(t.cwise_mul(w, t.tanh_(u)),
                 t.cwise_mul(t.one_minus(w), h));
}

inline ad::Var rgcn_stack(ad::Tape& t, ad::Var h0, const EntityGraph& g,
                          const RgcnVars& p, int layers, const RgcnOptions& opt = {}) {
    if (layers < 0) throw std::invalid_argument("rgcn_stack: negative layer count");
    ad::Var h = h0;
    for (int l = 0; l < layers; ++l) {
        ad::Var u = rgcn_propagate(t, h, g, p, opt);
        h = rgcn_gate_update(t, u, h, p);
    }
    return h;
}

}  // namespace bag
