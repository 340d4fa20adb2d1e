#pragma once

// Samples, WIKIHOP-format JSON I/O and the candidate mask transform.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace bag {

using TokenList = std::vector<std::string>;

inline std::string to_lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

// Punctuation characters become their own tokens, then the text is split on
// whitespace. Case is preserved here; matching and embedding lookups lower-case
// at the point of use.
inline TokenList tokenize(const std::string& text) {
    std::string spaced;
    spaced.reserve(text.size() * 2);
    for (char c : text) {
        bool punct = std::ispunct(static_cast<unsigned char>(c)) && c != '_';
        if (punct) {
            spaced.push_back(' ');
            spaced.push_back(c);
            spaced.push_back(' ');
        } else {
            spaced.push_back(c);
        }
    }
    TokenList out;
    std::istringstream in(spaced);
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

inline TokenList lower_tokens(const TokenList& toks) {
    TokenList out;
    out.reserve(toks.size());
    for (const auto& t : toks) out.push_back(to_lower(t));
    return out;
}

struct Document {
    int doc_id = 0;
    TokenList tokens;
};

struct Sample {
    std::string id;
    TokenList query_tokens;             // relation tokens then head-entity tokens
    std::vector<Document> supports;
    std::vector<std::string> candidates;  // display strings
    int answer_index = -1;                // -1 when unlabeled

    bool labeled() const { return answer_index >= 0; }
};

// Candidate string as a normalized token sequence used for matching.
inline TokenList candidate_tokens(const std::string& candidate) {
    return lower_tokens(tokenize(candidate));
}

// The query field is a relation (underscores joining its words) followed by
// the head entity, e.g. "country kepahiang" or "located_in_the kepahiang".
inline TokenList split_query(const std::string& query) {
    TokenList out;
    TokenList words = tokenize(query);
    for (std::size_t w = 0; w < words.size(); ++w) {
        if (w == 0) {
            std::string part;
            std::istringstream in(words[w]);
            while (std::getline(in, part, '_'))
                if (!part.empty()) out.push_back(to_lower(part));
        } else {
            out.push_back(to_lower(words[w]));
        }
    }
    return out;
}

struct LoadError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline Sample sample_from_json(const nlohmann::json& rec) {
    if (!rec.is_object() || !rec.contains("id") || !rec.contains("query") ||
        !rec.contains("supports") || !rec.contains("candidates"))
        throw LoadError("malformed record: " +
                        (rec.is_object() && rec.contains("id")
                             ? rec["id"].get<std::string>()
                             : std::string("<no id>")));
    Sample s;
    s.id = rec["id"].get<std::string>();
    s.query_tokens = split_query(rec["query"].get<std::string>());
    int doc_id = 0;
    for (const auto& sup : rec["supports"]) {
        Document d;
        d.doc_id = doc_id++;
        d.tokens = tokenize(sup.get<std::string>());
        if (d.tokens.empty())
            throw LoadError("empty support document in record " + s.id);
        s.supports.push_back(std::move(d));
    }
    if (s.supports.empty()) throw LoadError("record " + s.id + " has no supports");
    for (const auto& c : rec["candidates"])
        s.candidates.push_back(c.get<std::string>());
    if (rec.contains("answer") && !rec["answer"].is_null()) {
        std::string ans = to_lower(rec["answer"].get<std::string>());
        for (std::size_t i = 0; i < s.candidates.size(); ++i)
            if (to_lower(s.candidates[i]) == ans) {
                s.answer_index = static_cast<int>(i);
                break;
            }
        if (s.answer_index < 0)
            throw LoadError("record " + s.id + ": answer \"" +
                            rec["answer"].get<std::string>() +
                            "\" not among candidates");
    }
    return s;
}

inline nlohmann::json sample_to_json(const Sample& s) {
    nlohmann::json rec;
    rec["id"] = s.id;
    std::string query;
    for (std::size_t i = 0; i < s.query_tokens.size(); ++i) {
        if (i) query += ' ';
        query += s.query_tokens[i];
    }
    rec["query"] = query;
    rec["supports"] = nlohmann::json::array();
    for (const auto& d : s.supports) {
        std::string text;
        for (std::size_t i = 0; i < d.tokens.size(); ++i) {
            if (i) text += ' ';
            text += d.tokens[i];
        }
        rec["supports"].push_back(text);
    }
    rec["candidates"] = s.candidates;
    if (s.answer_index >= 0) rec["answer"] = s.candidates[static_cast<std::size_t>(s.answer_index)];
    return rec;
}

inline std::vector<Sample> samples_from_json(const nlohmann::json& arr) {
    if (!arr.is_array()) throw LoadError("expected a JSON array of records");
    std::vector<Sample> out;
    out.reserve(arr.size());
    for (const auto& rec : arr) out.push_back(sample_from_json(rec));
    return out;
}

inline std::vector<Sample> load_wikihop(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw LoadError("cannot open " + path);
    nlohmann::json arr;
    try {
        in >> arr;
    } catch (const nlohmann::json::exception& e) {
        throw LoadError(path + ": " + e.what());
    }
    return samples_from_json(arr);
}

inline void save_wikihop(const std::vector<Sample>& samples, const std::string& path) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& s : samples) arr.push_back(sample_to_json(s));
    std::ofstream out(path);
    if (!out) throw LoadError("cannot write " + path);
    out << arr.dump(1) << '\n';
}

// Replaces every maximal occurrence of candidate k in the supports with the
// single token __MASKk__ (k 1-based). Longer candidates win at a position;
// the scan then continues after the replaced span.
inline Sample apply_mask(const Sample& sample) {
    Sample out = sample;
    std::vector<TokenList> cand_toks;
    cand_toks.reserve(sample.candidates.size());
    for (const auto& c : sample.candidates) cand_toks.push_back(candidate_tokens(c));

    // Candidate order at each position: longest first, then candidate index.
    std::vector<std::size_t> order(cand_toks.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return cand_toks[a].size() > cand_toks[b].size();
    });

    for (auto& doc : out.supports) {
        TokenList lower = lower_tokens(doc.tokens);
        TokenList replaced;
        std::size_t pos = 0;
        while (pos < lower.size()) {
            bool matched = false;
            for (std::size_t k : order) {
                const TokenList& ct = cand_toks[k];
                if (ct.empty() || pos + ct.size() > lower.size()) continue;
                if (std::equal(ct.begin(), ct.end(), lower.begin() + static_cast<long>(pos))) {
                    replaced.push_back("__MASK" + std::to_string(k + 1) + "__");
                    pos += ct.size();
                    matched = true;
                    break;
                }
            }
            if (!matched) {
                replaced.push_back(doc.tokens[pos]);
                ++pos;
            }
        }
        doc.tokens = std::move(replaced);
    }
    for (std::size_t k = 0; k < out.candidates.size(); ++k)
        out.candidates[k] = "__MASK" + std::to_string(k + 1) + "__";
    return out;
}

}  // namespace bag
