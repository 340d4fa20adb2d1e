#pragma once

// Bidirectional LSTM query encoder, built on the autodiff tape.
// Standard cell: input/forget/output sigmoid gates, tanh candidate.

#include "bag/autodiff.hpp"

#include <stdexcept>
#include <vector>

namespace bag {

struct LstmDirVars {
    ad::Var Wx;  // in x 4h, gate column order [i f g o]
    ad::Var Wh;  // h x 4h
    ad::Var b;   // 1 x 4h
};

// One direction over X (M x in), outputs M x h in original time order.
inline ad::Var lstm_direction(ad::Tape& t, ad::Var X, const LstmDirVars& p,
                              int hidden, bool reversed) {
    const Eigen::Index steps = t.val(X).rows();
    if (steps == 0) throw std::invalid_argument("lstm: empty sequence");
    ad::Var h = t.leaf(ad::Mat::Zero(1, hidden));
    ad::Var c = t.leaf(ad::Mat::Zero(1, hidden));
    std::vector<ad::Var> outputs(static_cast<std::size_t>(steps));
    for (Eigen::Index s = 0; s < steps; ++s) {
        Eigen::Index step = reversed ? steps - 1 - s : s;
        ad::Var x = t.row(X, step);
        ad::Var z = t.add_rowvec(t.add(t.matmul(x, p.Wx), t.matmul(h, p.Wh)), p.b);
        ad::Var i = t.sigmoid_(t.cols(z, 0, hidden));
        ad::Var f = t.sigmoid_(t.cols(z, hidden, hidden));
        ad::Var g = t.tanh_(t.cols(z, 2 * hidden, hidden));
        ad::Var o = t.sigmoid_(t.cols(z, 3 * hidden, hidden));
        c = t.add(t.cwise_mul(f, c), t.cwise_mul(i, g));
        h = t.cwise_mul(o, t.tanh_(c));
        outputs[static_cast<std::size_t>(step)] = h;
    }
    return t.concat_rows(outputs);
}

struct BiLstmLayerVars {
    LstmDirVars fwd;
    LstmDirVars bwd;
};

// Stacked bidirectional layers; each layer consumes the previous layer's
// concatenated output. Result is M x (2 * hidden).
inline ad::Var bilstm(ad::Tape& t, ad::Var X,
                      const std::vector<BiLstmLayerVars>& layers, int hidden) {
    ad::Var cur = X;
    for (const auto& layer : layers) {
        ad::Var f = lstm_direction(t, cur, layer.fwd, hidden, false);
        ad::Var b = lstm_direction(t, cur, layer.bwd, hidden, true);
        cur = t.concat_cols({f, b});
    }
    return cur;
}

}  // namespace bag
