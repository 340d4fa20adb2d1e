#pragma once

// Multi-level feature sources: token embeddings, contextual embeddings and
// the NER/POS tagger. Hash-seeded providers make desk-scale runs
// self-contained; file-backed providers accept real pretrained vectors.

#include "bag/data.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <cstdint>
#include <fstream>
#include <memory>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace bag {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

namespace detail {

inline std::uint64_t fnv1a(const std::string& s, std::uint64_t h = 1469598103934665603ULL) {
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

inline Vec seeded_unit_vector(std::uint64_t seed, int dim) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Vec v(dim);
    for (int i = 0; i < dim; ++i) v(i) = normal(rng);
    double n = v.norm();
    if (n == 0.0) v(0) = 1.0; else v /= n;
    return v;
}

}  // namespace detail

class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    virtual int dim() const = 0;
    virtual Vec lookup(const std::string& token) const = 0;
};

// Deterministic pseudorandom unit vectors keyed by the lower-cased token.
class HashEmbedding final : public EmbeddingProvider {
public:
    HashEmbedding(int dim, std::uint64_t seed) : dim_(dim), seed_(seed) {}
    int dim() const override { return dim_; }
    Vec lookup(const std::string& token) const override {
        return detail::seeded_unit_vector(
            detail::fnv1a(to_lower(token)) ^ seed_, dim_);
    }

private:
    int dim_;
    std::uint64_t seed_;
};

// word2vec text convention: one line per token, "token v1 v2 ... vdim".
// Unknown tokens map to the zero vector.
class FileEmbedding final : public EmbeddingProvider {
public:
    explicit FileEmbedding(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("embedding file unreadable: " + path);
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            std::istringstream ls(line);
            std::string tok;
            ls >> tok;
            std::vector<double> vals;
            double x;
            while (ls >> x) vals.push_back(x);
            if (vals.empty()) throw std::runtime_error("embedding file: bad line in " + path);
            if (dim_ == 0) dim_ = static_cast<int>(vals.size());
            if (static_cast<int>(vals.size()) != dim_)
                throw std::runtime_error("embedding file: inconsistent dimension in " + path);
            Vec v(dim_);
            for (int i = 0; i < dim_; ++i) v(i) = vals[static_cast<std::size_t>(i)];
            table_[to_lower(tok)] = std::move(v);
        }
        if (dim_ == 0) throw std::runtime_error("embedding file empty: " + path);
    }
    int dim() const override { return dim_; }
    Vec lookup(const std::string& token) const override {
        auto it = table_.find(to_lower(token));
        return it == table_.end() ? Vec::Zero(dim_) : it->second;
    }

private:
    int dim_ = 0;
    std::unordered_map<std::string, Vec> table_;
};

inline Mat embed_tokens(const TokenList& tokens, const EmbeddingProvider& provider) {
    Mat out(static_cast<Eigen::Index>(tokens.size()), provider.dim());
    for (std::size_t i = 0; i < tokens.size(); ++i)
        out.row(static_cast<Eigen::Index>(i)) = provider.lookup(tokens[i]).transpose();
    return out;
}

class ContextualProvider {
public:
    virtual ~ContextualProvider() = default;
    virtual int dim() const = 0;
    // Per-token contextual vectors for the whole document.
    virtual Mat contextual(const Document& doc) const = 0;
};

// Stand-in for a pretrained contextual encoder: each token's vector is a
// seeded hash of the token plus its +-2 neighbors at their offsets.
class HashContextual final : public ContextualProvider {
public:
    HashContextual(int dim, std::uint64_t seed) : dim_(dim), seed_(seed) {}
    int dim() const override { return dim_; }
    Mat contextual(const Document& doc) const override {
        Mat out(static_cast<Eigen::Index>(doc.tokens.size()), dim_);
        for (int t = 0; t < static_cast<int>(doc.tokens.size()); ++t) {
            std::uint64_t h = seed_;
            for (int off = -2; off <= 2; ++off) {
                int p = t + off;
                if (p < 0 || p >= static_cast<int>(doc.tokens.size())) continue;
                std::string key = std::to_string(off) + "|" +
                                  to_lower(doc.tokens[static_cast<std::size_t>(p)]);
                h ^= detail::fnv1a(key) * static_cast<std::uint64_t>(off + 7);
            }
            out.row(t) = detail::seeded_unit_vector(h, dim_).transpose();
        }
        return out;
    }

private:
    int dim_;
    std::uint64_t seed_;
};

// JSON-lines, one object per document: {"doc_id": int, "vectors": [[...], ...]}.
class FileContextual final : public ContextualProvider {
public:
    explicit FileContextual(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("contextual file unreadable: " + path);
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            nlohmann::json rec = nlohmann::json::parse(line);
            auto vecs = rec.at("vectors").get<std::vector<std::vector<double>>>();
            if (vecs.empty()) continue;
            if (dim_ == 0) dim_ = static_cast<int>(vecs[0].size());
            Mat m(static_cast<Eigen::Index>(vecs.size()), dim_);
            for (std::size_t i = 0; i < vecs.size(); ++i)
                for (int j = 0; j < dim_; ++j)
                    m(static_cast<Eigen::Index>(i), j) = vecs[i][static_cast<std::size_t>(j)];
            table_[rec.at("doc_id").get<int>()] = std::move(m);
        }
    }
    int dim() const override { return dim_; }
    Mat contextual(const Document& doc) const override {
        auto it = table_.find(doc.doc_id);
        if (it == table_.end())
            throw std::runtime_error("contextual file: no vectors for document " +
                                     std::to_string(doc.doc_id));
        if (it->second.rows() != static_cast<Eigen::Index>(doc.tokens.size()))
            throw std::runtime_error("contextual file: token count mismatch for document " +
                                     std::to_string(doc.doc_id));
        return it->second;
    }

private:
    int dim_ = 0;
    std::unordered_map<int, Mat> table_;
};

// Rule-based tagger stub. NER: ENT for purely alphabetic capitalized tokens,
// NUM for digit-bearing tokens, O otherwise. POS: NUM / FUNC (closed list) /
// ADV ("-ly") / VERB ("-ing", "-ed", "-ize", "-ise") / NOUN.
enum class NerTag { O = 0, ENT = 1, NUM = 2 };
enum class PosTag { NOUN = 0, FUNC = 1, VERB = 2, ADV = 3, NUM = 4 };
inline constexpr int kNumNerTags = 3;
inline constexpr int kNumPosTags = 5;

namespace detail {

inline bool has_digit(const std::string& t) {
    for (unsigned char c : t)
        if (std::isdigit(c)) return true;
    return false;
}

inline bool all_alpha(const std::string& t) {
    if (t.empty()) return false;
    for (unsigned char c : t)
        if (!std::isalpha(c)) return false;
    return true;
}

inline bool ends_with(const std::string& t, const std::string& suf) {
    return t.size() > suf.size() && t.compare(t.size() - suf.size(), suf.size(), suf) == 0;
}

inline const std::unordered_map<std::string, int>& function_words() {
    static const std::unordered_map<std::string, int> words = [] {
        std::unordered_map<std::string, int> w;
        for (const char* s :
             {"the", "a",  "an",  "of",  "in",  "on",   "at",   "to",  "and",
              "or",  "is", "are", "was", "were", "be",  "been", "by",  "with",
              "for", "from", "as", "that", "this", "it", "its",  "not", "but",
              "into", "than", "then", "which", "who", "whose", "what"})
            w[s] = 1;
        return w;
    }();
    return words;
}

}  // namespace detail

inline std::pair<std::vector<NerTag>, std::vector<PosTag>> tag_tokens(const TokenList& tokens) {
    std::vector<NerTag> ner;
    std::vector<PosTag> pos;
    ner.reserve(tokens.size());
    pos.reserve(tokens.size());
    for (const auto& t : tokens) {
        if (detail::has_digit(t))
            ner.push_back(NerTag::NUM);
        else if (detail::all_alpha(t) && std::isupper(static_cast<unsigned char>(t[0])))
            ner.push_back(NerTag::ENT);
        else
            ner.push_back(NerTag::O);

        std::string low = to_lower(t);
        if (detail::has_digit(t))
            pos.push_back(PosTag::NUM);
        else if (detail::function_words().count(low))
            pos.push_back(PosTag::FUNC);
        else if (detail::ends_with(low, "ly"))
            pos.push_back(PosTag::ADV);
        else if (detail::ends_with(low, "ing") || detail::ends_with(low, "ed") ||
                 detail::ends_with(low, "ize") || detail::ends_with(low, "ise"))
            pos.push_back(PosTag::VERB);
        else
            pos.push_back(PosTag::NOUN);
    }
    return {std::move(ner), std::move(pos)};
}

// File-backed tags: JSON-lines {"doc_id": int, "ner": [...], "pos": [...]}
// with integer tag ids. Falls back to the rule-based tagger per document.
class TagSource {
public:
    TagSource() = default;
    explicit TagSource(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("tag file unreadable: " + path);
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            nlohmann::json rec = nlohmann::json::parse(line);
            table_[rec.at("doc_id").get<int>()] = {
                rec.at("ner").get<std::vector<int>>(),
                rec.at("pos").get<std::vector<int>>()};
        }
    }

    std::pair<std::vector<NerTag>, std::vector<PosTag>> tags(const Document& doc) const {
        auto it = table_.find(doc.doc_id);
        if (it == table_.end()) return tag_tokens(doc.tokens);
        std::vector<NerTag> ner;
        std::vector<PosTag> pos;
        for (int v : it->second.first) ner.push_back(static_cast<NerTag>(v));
        for (int v : it->second.second) pos.push_back(static_cast<PosTag>(v));
        if (ner.size() != doc.tokens.size() || pos.size() != doc.tokens.size())
            throw std::runtime_error("tag file: token count mismatch for document " +
                                     std::to_string(doc.doc_id));
        return {std::move(ner), std::move(pos)};
    }

private:
    std::unordered_map<int, std::pair<std::vector<int>, std::vector<int>>> table_;
};

}  // namespace bag
