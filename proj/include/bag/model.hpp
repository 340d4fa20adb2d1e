#pragma once

// Whole-model assembly: sample preprocessing into constant feature matrices,
// the named parameter store, ablation wiring and the differentiable forward.

#include "bag/attention.hpp"
#include "bag/autodiff.hpp"
#include "bag/config.hpp"
#include "bag/data.hpp"
#include "bag/features.hpp"
#include "bag/graph.hpp"
#include "bag/lstm.hpp"
#include "bag/predictor.hpp"
#include "bag/rgcn.hpp"

#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace bag {

enum class Variant {
    FULL,
    NO_ATTENTION,
    SINGLE_ATTENTION,
    NO_GCN,
    NO_EDGE_TYPE,
    NO_TAGS,
    NO_TAGS_NO_CTX,
};

inline constexpr Variant kAllVariants[] = {
    Variant::FULL,          Variant::NO_ATTENTION, Variant::SINGLE_ATTENTION,
    Variant::NO_GCN,        Variant::NO_EDGE_TYPE, Variant::NO_TAGS,
    Variant::NO_TAGS_NO_CTX};

inline std::string variant_name(Variant v) {
    switch (v) {
        case Variant::FULL: return "full";
        case Variant::NO_ATTENTION: return "no_attention";
        case Variant::SINGLE_ATTENTION: return "single_attention";
        case Variant::NO_GCN: return "no_gcn";
        case Variant::NO_EDGE_TYPE: return "no_edge_type";
        case Variant::NO_TAGS: return "no_tags";
        case Variant::NO_TAGS_NO_CTX: return "no_tags_no_ctx";
    }
    throw std::logic_error("unknown variant");
}

inline Variant parse_variant(const std::string& s) {
    for (Variant v : kAllVariants)
        if (variant_name(v) == s) return v;
    throw std::invalid_argument("unknown ablation variant \"" + s + "\"");
}

inline bool variant_uses_tags(Variant v) {
    return v != Variant::NO_TAGS && v != Variant::NO_TAGS_NO_CTX;
}
inline bool variant_uses_ctx(Variant v) { return v != Variant::NO_TAGS_NO_CTX; }
inline bool variant_uses_gcn(Variant v) {
    return v != Variant::NO_GCN && v != Variant::NO_ATTENTION;
}

// One sample preprocessed into constants the forward pass consumes.
struct EncodedSample {
    std::string id;
    EntityGraph graph;
    Mat node_raw;  // T x (token + ctx): span-averaged token and contextual rows
    std::vector<int> node_ner, node_pos;  // first-token tag ids per node
    Mat query_emb;                        // M x token
    std::vector<int> query_ner, query_pos;
    std::vector<int> node_candidate;
    int n_candidates = 0;
    int gold = -1;

    bool has_nodes() const { return !graph.empty(); }
    bool gold_mentioned() const {
        for (int c : node_candidate)
            if (c == gold) return true;
        return false;
    }
    bool trainable() const { return has_nodes() && gold >= 0 && gold_mentioned(); }
};

// Span-average the per-document token/contextual rows for every graph node.
inline Mat average_span_features(const EntityGraph& graph,
                                 const std::vector<Mat>& doc_feats) {
    if (doc_feats.empty()) return Mat(0, 0);
    Mat out(graph.node_count(), doc_feats[0].cols());
    for (int n = 0; n < graph.node_count(); ++n) {
        const Mention& m = graph.nodes[static_cast<std::size_t>(n)];
        const Mat& feats = doc_feats[static_cast<std::size_t>(m.doc_index)];
        if (m.start < 0 || m.end > feats.rows() || m.start >= m.end)
            throw std::invalid_argument("average_span_features: span outside document");
        Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(feats.cols());
        for (int tkn = m.start; tkn < m.end; ++tkn) acc += feats.row(tkn);
        out.row(n) = acc / static_cast<double>(m.end - m.start);
    }
    return out;
}

inline EncodedSample encode_sample(const Sample& sample, const TrainConfig& cfg,
                                   const EmbeddingProvider& tokens,
                                   const ContextualProvider& ctx,
                                   const TagSource& tags = {}) {
    EncodedSample es;
    es.id = sample.id;
    es.graph = build_graph(sample, cfg.node_cap);
    es.n_candidates = static_cast<int>(sample.candidates.size());
    es.gold = sample.answer_index;

    std::vector<Mat> doc_feats;
    doc_feats.reserve(sample.supports.size());
    for (const auto& doc : sample.supports) {
        Mat tok = embed_tokens(doc.tokens, tokens);
        Mat con = ctx.contextual(doc);
        Mat both(tok.rows(), tok.cols() + con.cols());
        both << tok, con;
        doc_feats.push_back(std::move(both));
    }
    es.node_raw = es.graph.empty() ? Mat(0, cfg.dims.token + cfg.dims.ctx)
                                   : average_span_features(es.graph, doc_feats);
    for (const Mention& m : es.graph.nodes) {
        auto [ner, pos] = tags.tags(sample.supports[static_cast<std::size_t>(m.doc_index)]);
        es.node_ner.push_back(static_cast<int>(ner[static_cast<std::size_t>(m.start)]));
        es.node_pos.push_back(static_cast<int>(pos[static_cast<std::size_t>(m.start)]));
        es.node_candidate.push_back(m.candidate_index);
    }

    TokenList query = sample.query_tokens;
    if (query.empty()) throw std::invalid_argument("encode_sample: empty query in " + sample.id);
    if (static_cast<int>(query.size()) > cfg.query_cap)
        query.resize(static_cast<std::size_t>(cfg.query_cap));
    es.query_emb = embed_tokens(query, tokens);
    auto [qner, qpos] = tag_tokens(query);
    for (std::size_t i = 0; i < query.size(); ++i) {
        es.query_ner.push_back(static_cast<int>(qner[i]));
        es.query_pos.push_back(static_cast<int>(qpos[i]));
    }
    return es;
}

class ParamStore {
public:
    Mat& add(const std::string& name, Eigen::Index rows, Eigen::Index cols) {
        if (index_.count(name)) throw std::logic_error("duplicate parameter " + name);
        index_[name] = static_cast<int>(names_.size());
        names_.push_back(name);
        tensors_.push_back(Mat::Zero(rows, cols));
        return tensors_.back();
    }
    bool has(const std::string& name) const { return index_.count(name) > 0; }
    int find(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) throw std::out_of_range("no parameter " + name);
        return it->second;
    }
    Mat& at(const std::string& name) { return tensors_[static_cast<std::size_t>(find(name))]; }
    const Mat& at(const std::string& name) const {
        return tensors_[static_cast<std::size_t>(find(name))];
    }
    std::size_t size() const { return names_.size(); }
    const std::vector<std::string>& names() const { return names_; }
    std::vector<Mat>& tensors() { return tensors_; }
    const std::vector<Mat>& tensors() const { return tensors_; }

private:
    std::vector<std::string> names_;
    std::vector<Mat> tensors_;
    std::unordered_map<std::string, int> index_;
};

class Model {
public:
    Model(TrainConfig cfg, Variant variant) : cfg_(std::move(cfg)), variant_(variant) {
        cfg_.validate();
        build_params();
    }

    const TrainConfig& config() const { return cfg_; }
    Variant variant() const { return variant_; }
    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }

    // Feature width d: encoded width plus the tag embedding widths.
    int feature_dim() const {
        return cfg_.dims.enc +
               (variant_uses_tags(variant_) ? cfg_.dims.ner + cfg_.dims.pos : 0);
    }
    int raw_width() const {
        return cfg_.dims.token + (variant_uses_ctx(variant_) ? cfg_.dims.ctx : 0);
    }
    int predictor_input_dim() const {
        switch (variant_) {
            case Variant::NO_ATTENTION:
            case Variant::SINGLE_ATTENTION: return 2 * feature_dim();
            default: return 4 * feature_dim();
        }
    }

    // Glorot-uniform weights, zero biases, LSTM forget-gate bias 1.0.
    void init_params(std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        for (std::size_t i = 0; i < params_.size(); ++i) {
            const std::string& name = params_.names()[i];
            Mat& m = params_.tensors()[i];
            bool bias = name.ends_with(".b") || name.ends_with(".b1") ||
                        name.ends_with(".b2") || name.ends_with("gate_b");
            if (bias) {
                m.setZero();
            } else {
                double limit = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
                std::uniform_real_distribution<double> uni(-limit, limit);
                for (Eigen::Index r = 0; r < m.rows(); ++r)
                    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = uni(rng);
            }
        }
        const int hidden = cfg_.dims.enc / 2;
        for (const std::string& name : params_.names())
            if (name.starts_with("lstm.") && name.ends_with(".b"))
                params_.at(name).middleCols(hidden, hidden).setConstant(1.0);
    }

    struct Forward {
        ad::Var f_n;         // pre-GCN node features, T x d
        ad::Var f_q;         // query features, M x d
        ad::Var h_gcn;       // GCN output (or f_n when the stack is bypassed)
        ad::Var rep;         // predictor input
        ad::Var logits;      // T x 1
        CandidateDistribution dist;
        ad::Var loss;        // valid only when answerable
        bool answerable = false;
        std::unordered_map<std::string, ad::Var> param_vars;
    };

    Forward forward(ad::Tape& t, const EncodedSample& es, bool training = false,
                    std::mt19937_64* dropout_rng = nullptr) const {
        if (es.graph.empty())
            throw std::invalid_argument("forward: empty entity graph for sample " + es.id);
        Forward fw;
        std::unordered_map<std::string, ad::Var>& pv = fw.param_vars;
        for (std::size_t i = 0; i < params_.size(); ++i)
            pv[params_.names()[i]] = t.leaf(params_.tensors()[i]);

        const int d = feature_dim();
        const int hidden = cfg_.dims.enc / 2;
        const int T = es.graph.node_count();

        // Query: 2-layer BiLSTM over token embeddings, then tag embeddings.
        ad::Var q_emb = t.leaf(es.query_emb);
        std::vector<BiLstmLayerVars> lstm_layers;
        for (int l = 0; l < 2; ++l) {
            std::string base = "lstm." + std::to_string(l) + ".";
            lstm_layers.push_back(BiLstmLayerVars{
                LstmDirVars{pv.at(base + "f.Wx"), pv.at(base + "f.Wh"), pv.at(base + "f.b")},
                LstmDirVars{pv.at(base + "b.Wx"), pv.at(base + "b.Wh"), pv.at(base + "b.b")}});
        }
        ad::Var q_enc = bilstm(t, q_emb, lstm_layers, hidden);
        fw.f_q = with_tags(t, pv, q_enc, es.query_ner, es.query_pos);

        // Nodes: span-averaged raw features through the linear encoder.
        ad::Var raw = t.leaf(es.node_raw.leftCols(raw_width()));
        ad::Var n_enc = t.tanh_(t.add_rowvec(t.matmul(raw, pv.at("node_enc.W")),
                                             pv.at("node_enc.b")));
        fw.f_n = with_tags(t, pv, n_enc, es.node_ner, es.node_pos);

        ad::Var gcn_in = fw.f_n;
        if (training && cfg_.dropout > 0.0 && variant_uses_gcn(variant_)) {
            if (!dropout_rng)
                throw std::invalid_argument("forward: training mode needs a dropout RNG");
            std::bernoulli_distribution keep(1.0 - cfg_.dropout);
            Mat mask(T, d);
            for (Eigen::Index r = 0; r < mask.rows(); ++r)
                for (Eigen::Index c = 0; c < mask.cols(); ++c)
                    mask(r, c) = keep(*dropout_rng) ? 1.0 / (1.0 - cfg_.dropout) : 0.0;
            gcn_in = t.cwise_mul(fw.f_n, t.leaf(std::move(mask)));
        }

        if (variant_uses_gcn(variant_)) {
            bool shared = variant_ == Variant::NO_EDGE_TYPE;
            RgcnVars rv{pv.at(shared ? "rgcn.W_rel" : "rgcn.W_within"),
                        pv.at(shared ? "rgcn.W_rel" : "rgcn.W_cross"),
                        pv.at("rgcn.W0"), pv.at("rgcn.gate_W"), pv.at("rgcn.gate_b")};
            fw.h_gcn = rgcn_stack(t, gcn_in, es.graph, rv, cfg_.layers,
                                  RgcnOptions{cfg_.per_relation_norm});
        } else {
            fw.h_gcn = fw.f_n;
        }

        switch (variant_) {
            case Variant::NO_ATTENTION: {
                Mat pool = Mat::Constant(1, t.val(fw.f_q).rows(),
                                         1.0 / static_cast<double>(t.val(fw.f_q).rows()));
                ad::Var q_mean = t.matmul(t.leaf(std::move(pool)), fw.f_q);
                fw.rep = t.concat_cols({fw.f_n, t.tile_rows(q_mean, T)});
                break;
            }
            case Variant::SINGLE_ATTENTION: {
                ad::Var S = t.matmul(t.matmul(fw.h_gcn, pv.at("attn.Wa")),
                                     t.transpose(fw.f_q));
                fw.rep = t.concat_cols({fw.f_n, t.matmul(t.softmax_rows(S), fw.f_q)});
                break;
            }
            default: {
                SimilarityVars sv{pv.at("attn.W_h"), pv.at("attn.W_q"),
                                  pv.at("attn.W_hq"), pv.at("attn.b")};
                fw.rep = bi_attention(t, fw.h_gcn, fw.f_n, fw.f_q, sv);
                break;
            }
        }

        PredictorVars out{pv.at("out.W1"), pv.at("out.b1"), pv.at("out.W2"),
                          pv.at("out.b2"), cfg_.tanh_on_output};
        fw.logits = node_scores(t, fw.rep, out);
        fw.dist = candidate_distribution(t, fw.logits, es.node_candidate,
                                         es.n_candidates,
                                         std::vector<char>(static_cast<std::size_t>(T), 0));
        if (es.gold >= 0) {
            NllResult nll = nll_loss(t, fw.dist, es.gold);
            fw.loss = nll.loss;
            fw.answerable = nll.answerable;
        }
        return fw;
    }

    // Argmax candidate of a forward pass; ties resolve to the lowest index.
    static int predict(const ad::Tape& t, const Forward& fw) {
        Eigen::Index best;
        t.val(fw.dist.probs).col(0).maxCoeff(&best);
        return static_cast<int>(best);
    }

private:
    ad::Var with_tags(ad::Tape& t, const std::unordered_map<std::string, ad::Var>& pv,
                      ad::Var enc, const std::vector<int>& ner,
                      const std::vector<int>& pos) const {
        if (!variant_uses_tags(variant_)) return enc;
        return t.concat_cols({enc, t.gather_rows(pv.at("tags.ner"), ner),
                              t.gather_rows(pv.at("tags.pos"), pos)});
    }

    void build_params() {
        const int d = feature_dim();
        const int hidden = cfg_.dims.enc / 2;
        if (variant_uses_tags(variant_)) {
            params_.add("tags.ner", kNumNerTags, cfg_.dims.ner);
            params_.add("tags.pos", kNumPosTags, cfg_.dims.pos);
        }
        params_.add("node_enc.W", raw_width(), cfg_.dims.enc);
        params_.add("node_enc.b", 1, cfg_.dims.enc);
        for (int l = 0; l < 2; ++l) {
            int in = l == 0 ? cfg_.dims.token : 2 * hidden;
            for (const char* dir : {"f", "b"}) {
                std::string base = "lstm." + std::to_string(l) + "." + dir + ".";
                params_.add(base + "Wx", in, 4 * hidden);
                params_.add(base + "Wh", hidden, 4 * hidden);
                params_.add(base + "b", 1, 4 * hidden);
            }
        }
        if (variant_uses_gcn(variant_)) {
            if (variant_ == Variant::NO_EDGE_TYPE) {
                params_.add("rgcn.W_rel", d, d);
            } else {
                params_.add("rgcn.W_within", d, d);
                params_.add("rgcn.W_cross", d, d);
            }
            params_.add("rgcn.W0", d, d);
            params_.add("rgcn.gate_W", 2 * d, d);
            params_.add("rgcn.gate_b", 1, d);
        }
        if (variant_ == Variant::SINGLE_ATTENTION) {
            params_.add("attn.Wa", d, d);
        } else if (variant_ != Variant::NO_ATTENTION) {
            params_.add("attn.W_h", d, d);
            params_.add("attn.W_q", d, d);
            params_.add("attn.W_hq", d, d);
            params_.add("attn.b", 1, d);
        }
        params_.add("out.W1", predictor_input_dim(), cfg_.dims.ffn_hidden);
        params_.add("out.b1", 1, cfg_.dims.ffn_hidden);
        params_.add("out.W2", cfg_.dims.ffn_hidden, 1);
        params_.add("out.b2", 1, 1);
    }

    TrainConfig cfg_;
    Variant variant_;
    ParamStore params_;
};

}  // namespace bag
