#pragma once

// Training/model configuration with reference defaults, JSON round-trip and a
// flat key=value config-file reader (precedence: flags > file > defaults).

#include <nlohmann/json.hpp>

#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace bag {

struct Dims {
    int token = 300;      // pretrained token embedding width
    int ctx = 1024;       // contextual embedding width
    int enc = 512;        // encoded width d-hat (node encoder = BiLSTM output)
    int ner = 8;
    int pos = 8;
    int ffn_hidden = 256;
};

struct TrainConfig {
    double lr0 = 2e-4;
    int halve_every = 5;
    int batch_size = 32;
    int epochs = 50;
    double dropout = 0.2;
    int node_cap = 500;
    int query_cap = 25;
    int layers = 5;  // GCN stack depth L
    Dims dims;
    std::uint64_t seed = 0;
    bool per_relation_norm = false;  // original R-GCN normalization variant
    bool tanh_on_output = false;     // strict variant: tanh on the final scalar

    void validate() const {
        if (lr0 <= 0 || halve_every < 1 || batch_size < 1 || epochs < 0 ||
            dropout < 0 || dropout >= 1 || node_cap < 1 || query_cap < 1 ||
            layers < 0 || dims.token < 1 || dims.ctx < 1 || dims.enc < 2 ||
            dims.ner < 1 || dims.pos < 1 || dims.ffn_hidden < 1)
            throw std::invalid_argument("invalid training configuration");
        if (dims.enc % 2 != 0)
            throw std::invalid_argument("dims.enc must be even (two LSTM directions)");
    }
};

inline void to_json(nlohmann::json& j, const Dims& d) {
    j = {{"token", d.token}, {"ctx", d.ctx},           {"enc", d.enc},
         {"ner", d.ner},     {"pos", d.pos},           {"ffn_hidden", d.ffn_hidden}};
}

inline void from_json(const nlohmann::json& j, Dims& d) {
    j.at("token").get_to(d.token);
    j.at("ctx").get_to(d.ctx);
    j.at("enc").get_to(d.enc);
    j.at("ner").get_to(d.ner);
    j.at("pos").get_to(d.pos);
    j.at("ffn_hidden").get_to(d.ffn_hidden);
}

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
    j = {{"lr0", c.lr0},
         {"halve_every", c.halve_every},
         {"batch_size", c.batch_size},
         {"epochs", c.epochs},
         {"dropout", c.dropout},
         {"node_cap", c.node_cap},
         {"query_cap", c.query_cap},
         {"layers", c.layers},
         {"dims", c.dims},
         {"seed", c.seed},
         {"per_relation_norm", c.per_relation_norm},
         {"tanh_on_output", c.tanh_on_output}};
}

inline void from_json(const nlohmann::json& j, TrainConfig& c) {
    j.at("lr0").get_to(c.lr0);
    j.at("halve_every").get_to(c.halve_every);
    j.at("batch_size").get_to(c.batch_size);
    j.at("epochs").get_to(c.epochs);
    j.at("dropout").get_to(c.dropout);
    j.at("node_cap").get_to(c.node_cap);
    j.at("query_cap").get_to(c.query_cap);
    j.at("layers").get_to(c.layers);
    j.at("dims").get_to(c.dims);
    j.at("seed").get_to(c.seed);
    j.at("per_relation_norm").get_to(c.per_relation_norm);
    j.at("tanh_on_output").get_to(c.tanh_on_output);
}

// Flat "key = value" file; '#' starts a comment; unknown keys are rejected.
inline void apply_config_line(TrainConfig& c, const std::string& key, const std::string& value) {
    auto as_int = [&] { return std::stoi(value); };
    auto as_u64 = [&] { return static_cast<std::uint64_t>(std::stoull(value)); };
    auto as_double = [&] { return std::stod(value); };
    auto as_bool = [&] {
        if (value == "true" || value == "1") return true;
        if (value == "false" || value == "0") return false;
        throw std::invalid_argument("config: bad boolean for " + key);
    };
    if (key == "lr0") c.lr0 = as_double();
    else if (key == "halve_every") c.halve_every = as_int();
    else if (key == "batch_size") c.batch_size = as_int();
    else if (key == "epochs") c.epochs = as_int();
    else if (key == "dropout") c.dropout = as_double();
    else if (key == "node_cap") c.node_cap = as_int();
    else if (key == "query_cap") c.query_cap = as_int();
    else if (key == "layers") c.layers = as_int();
    else if (key == "token_dim") c.dims.token = as_int();
    else if (key == "ctx_dim") c.dims.ctx = as_int();
    else if (key == "enc_dim") c.dims.enc = as_int();
    else if (key == "ner_dim") c.dims.ner = as_int();
    else if (key == "pos_dim") c.dims.pos = as_int();
    else if (key == "ffn_hidden") c.dims.ffn_hidden = as_int();
    else if (key == "seed") c.seed = as_u64();
    else if (key == "per_relation_norm") c.per_relation_norm = as_bool();
    else if (key == "tanh_on_output") c.tanh_on_output = as_bool();
    else throw std::invalid_argument("config: unknown key \"" + key + "\"");
}

inline TrainConfig load_config_file(const std::string& path, TrainConfig base = {}) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file " + path);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        auto trim = [](std::string s) {
            auto b = s.find_first_not_of(" \t\r");
            auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument(path + ":" + std::to_string(lineno) +
                                        ": expected key=value");
        apply_config_line(base, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return base;
}

}  // namespace bag
