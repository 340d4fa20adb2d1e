#pragma once

// Bi-directional attention between graph nodes and the query. The GCN output
// enters only the similarity matrix; everything else consumes the original
// node features.

#include "bag/autodiff.hpp"

#include <stdexcept>
#include <vector>

namespace bag {

struct SimilarityVars {
    // f_a as a 3d -> d linear map, stored as the three d x d blocks acting on
    // h, q and h .* q, plus the bias row.
    ad::Var W_h;
    ad::Var W_q;
    ad::Var W_hq;
    ad::Var b;  // 1 x d
};

// S[t, m] = mean over output coordinates of f_a(concat(h[t], q[m], h[t] .* q[m])).
// Expanded algebraically: rowmean(h W_h) broadcast down columns, plus
// rowmean(q W_q) broadcast across rows, plus (h .* w) q^T with
// w = rowmean(W_hq), plus mean(b).
inline ad::Var attention_similarity(ad::Tape& t, ad::Var h_gcn, ad::Var f_q,
                                    const SimilarityVars& p) {
    if (t.val(h_gcn).cols() != t.val(f_q).cols())
        throw std::invalid_argument("attention_similarity: width mismatch");
    const Eigen::Index T = t.val(h_gcn).rows();
    const Eigen::Index M = t.val(f_q).rows();
    ad::Var h_part = t.tile_cols(t.rowwise_mean(t.matmul(h_gcn, p.W_h)), M);
    ad::Var q_part = t.transpose(t.tile_cols(t.rowwise_mean(t.matmul(f_q, p.W_q)), T));
    ad::Var w = t.transpose(t.rowwise_mean(p.W_hq));  // 1 x d
    ad::Var cross = t.matmul(t.cwise_mul(h_gcn, t.tile_rows(w, T)), t.transpose(f_q));
    ad::Var bias_mean = t.rowwise_mean(p.b);  // 1 x 1
    return t.add_scalar(t.add(t.add(h_part, q_part), cross), bias_mean);
}

// Each row of S softmax-normalized over the M query positions, then applied
// to the query features: every output row is a convex combination of f_q rows.
inline ad::Var node_to_query(ad::Tape& t, ad::Var S, ad::Var f_q) {
    if (t.val(f_q).rows() == 0)
        throw std::invalid_argument("node_to_query: empty query");
    return t.matmul(t.softmax_rows(S), f_q);
}

// BiDAF-style query-to-context analogue: per-node best query similarity,
// softmax over nodes, weighted sum of the pre-GCN node features, tiled T times.
inline ad::Var query_to_node(ad::Tape& t, ad::Var S, ad::Var f_n) {
    const Eigen::Index T = t.val(f_n).rows();
    if (T == 0) throw std::invalid_argument("query_to_node: empty graph");
    ad::Var m = t.rowwise_max(S);  // T x 1
    ad::Var beta = t.masked_softmax_col(m, std::vector<char>(static_cast<std::size_t>(T), 0));
    ad::Var summary = t.matmul(t.transpose(beta), f_n);  // 1 x d
    return t.tile_rows(summary, T);
}

// concat(f_n, a_n2q, f_n .* a_n2q, f_n .* a_q2n) per row; width 4d.
inline ad::Var attention_fuse(ad::Tape& t, ad::Var f_n, ad::Var a_n2q, ad::Var a_q2n) {
    return t.concat_cols({f_n, a_n2q, t.cwise_mul(f_n, a_n2q), t.cwise_mul(f_n, a_q2n)});
}

inline ad::Var bi_attention(ad::Tape& t, ad::Var h_gcn, ad::Var f_n, ad::Var f_q,
                            const SimilarityVars& p) {
    ad::Var S = attention_similarity(t, h_gcn, f_q, p);
    return attention_fuse(t, f_n, node_to_query(t, S, f_q), query_to_node(t, S, f_n));
}

}  // namespace bag
