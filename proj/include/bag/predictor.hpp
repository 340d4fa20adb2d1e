#pragma once

// Output layer: per-node scoring FFN, softmax over nodes, candidate
// aggregation by summing mention probabilities, negative log likelihood.

#include "bag/autodiff.hpp"

#include <stdexcept>
#include <vector>

namespace bag {

struct PredictorVars {
    ad::Var W1;  // in x hidden
    ad::Var b1;  // 1 x hidden
    ad::Var W2;  // hidden x 1
    ad::Var b2;  // 1 x 1
    // Optional strict variant: tanh on the final scalar too.
    bool tanh_on_output = false;
};

// logit_t = layer2(tanh(layer1(rep[t]))), one scalar per node (T x 1).
inline ad::Var node_scores(ad::Tape& t, ad::Var rep, const PredictorVars& p) {
    ad::Var hidden = t.tanh_(t.add_rowvec(t.matmul(rep, p.W1), p.b1));
    ad::Var logits = t.add_rowvec(t.matmul(hidden, p.W2), p.b2);
    return p.tanh_on_output ? t.tanh_(logits) : logits;
}

struct CandidateDistribution {
    ad::Var node_probs;  // T x 1, masked slots exactly 0
    ad::Var probs;       // K x 1, sums of mention probabilities
};

// Softmax over non-padded nodes, then candidate k's probability is the sum of
// probabilities of its mentions. Candidates without mentions get exactly 0.
inline CandidateDistribution candidate_distribution(ad::Tape& t, ad::Var logits,
                                                    const std::vector<int>& node_candidate,
                                                    int n_candidates,
                                                    const std::vector<char>& pad_mask) {
    const Eigen::Index T = t.val(logits).rows();
    if (static_cast<Eigen::Index>(node_candidate.size()) != T ||
        static_cast<Eigen::Index>(pad_mask.size()) != T)
        throw std::invalid_argument("candidate_distribution: length mismatch");
    bool any = false;
    for (char m : pad_mask) any |= !m;
    if (!any) throw std::invalid_argument("candidate_distribution: no non-padded nodes");

    ad::Var node_probs = t.masked_softmax_col(logits, pad_mask);
    ad::Mat assign = ad::Mat::Zero(n_candidates, T);
    for (Eigen::Index i = 0; i < T; ++i) {
        if (pad_mask[static_cast<std::size_t>(i)]) continue;
        int k = node_candidate[static_cast<std::size_t>(i)];
        if (k < 0 || k >= n_candidates)
            throw std::invalid_argument("candidate_distribution: candidate index out of range");
        assign(k, i) = 1.0;
    }
    ad::Var probs = t.matmul(t.leaf(std::move(assign)), node_probs);
    return {node_probs, probs};
}

struct NllResult {
    ad::Var loss;       // valid only when answerable
    bool answerable = false;
};

// -log p(gold). A gold candidate with zero mentioned probability mass is
// flagged unanswerable instead of producing an infinite loss.
inline NllResult nll_loss(ad::Tape& t, const CandidateDistribution& dist, int gold) {
    if (gold < 0 || gold >= t.val(dist.probs).rows())
        throw std::invalid_argument("nll_loss: gold index out of range");
    if (t.val(dist.probs)(gold, 0) <= 0.0) return {ad::Var{}, false};
    return {t.scale(t.log_(t.entry(dist.probs, gold, 0)), -1.0), true};
}

}  // namespace bag
