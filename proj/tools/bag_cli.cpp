// bag: command-line front end for graph building, synthetic data generation,
// training, evaluation, prediction, the ablation matrix and gradient checks.

#include "bag/checkpoint.hpp"
#include "bag/synthetic.hpp"
#include "bag/trainer.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <memory>
#include <thread>

namespace {

using namespace bag;

constexpr int kRuntimeError = 1;  // CLI11 reserves its own codes for usage errors

struct CommonOpts {
    std::string config_path;
    std::string embeddings_path;   // word2vec text; hash provider when empty
    std::string contextual_path;   // JSONL per-document vectors; hash when empty
    std::string tags_path;         // JSONL tags; rule-based tagger when empty
    bool mask = false;
    int workers = 1;
    // Flag overrides, applied after the config file (precedence flags > file > defaults).
    std::optional<std::uint64_t> seed;
    std::optional<int> epochs;
    std::optional<double> lr;
    std::optional<std::string> ablation;
};

void add_common(CLI::App* cmd, CommonOpts& o, bool with_training_flags) {
    cmd->add_option("--config", o.config_path, "key=value config file");
    cmd->add_option("--seed", o.seed, "override config seed");
    cmd->add_flag("--mask", o.mask, "replace candidate spans with mask tokens");
    cmd->add_option("--workers", o.workers, "parallel sample preprocessing threads")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--embeddings", o.embeddings_path, "token embedding file (word2vec text)");
    cmd->add_option("--contextual", o.contextual_path, "contextual vector file (JSONL)");
    cmd->add_option("--tags", o.tags_path, "NER/POS tag file (JSONL)");
    if (with_training_flags) {
        cmd->add_option("--epochs", o.epochs, "override config epochs");
        cmd->add_option("--lr", o.lr, "override config initial learning rate");
        cmd->add_option("--ablation", o.ablation,
                        "variant: full | no_attention | single_attention | no_gcn | "
                        "no_edge_type | no_tags | no_tags_no_ctx");
    }
}

TrainConfig effective_config(const CommonOpts& o) {
    TrainConfig cfg;
    if (!o.config_path.empty()) cfg = load_config_file(o.config_path);
    if (o.seed) cfg.seed = *o.seed;
    if (o.epochs) cfg.epochs = *o.epochs;
    if (o.lr) cfg.lr0 = *o.lr;
    cfg.validate();
    return cfg;
}

Variant effective_variant(const CommonOpts& o) {
    return o.ablation ? parse_variant(*o.ablation) : Variant::FULL;
}

struct Providers {
    std::unique_ptr<EmbeddingProvider> tokens;
    std::unique_ptr<ContextualProvider> ctx;
    TagSource tags;
};

Providers make_providers(const CommonOpts& o, const TrainConfig& cfg) {
    Providers p;
    if (o.embeddings_path.empty())
        p.tokens = std::make_unique<HashEmbedding>(cfg.dims.token, cfg.seed + 1);
    else
        p.tokens = std::make_unique<FileEmbedding>(o.embeddings_path);
    if (o.contextual_path.empty())
        p.ctx = std::make_unique<HashContextual>(cfg.dims.ctx, cfg.seed + 2);
    else
        p.ctx = std::make_unique<FileContextual>(o.contextual_path);
    if (!o.tags_path.empty()) p.tags = TagSource(o.tags_path);
    if (p.tokens->dim() != cfg.dims.token || p.ctx->dim() != cfg.dims.ctx)
        throw std::runtime_error("provider width does not match configured dims");
    return p;
}

std::vector<Sample> load_samples(const std::string& path, bool mask) {
    auto samples = load_wikihop(path);
    if (mask)
        for (Sample& s : samples) s = apply_mask(s);
    return samples;
}

std::vector<EncodedSample> encode_dataset(const std::vector<Sample>& samples,
                                          const TrainConfig& cfg, const Providers& p,
                                          int workers) {
    std::vector<EncodedSample> out(samples.size());
    workers = std::max(1, std::min<int>(workers, static_cast<int>(samples.size())));
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = static_cast<std::size_t>(w); i < samples.size();
                     i += static_cast<std::size_t>(workers))
                    out[i] = encode_sample(samples[i], cfg, *p.tokens, *p.ctx, p.tags);
            } catch (...) {
                errors[static_cast<std::size_t>(w)] = std::current_exception();
            }
        });
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return out;
}

// Every artifact gets a sidecar recording how it was produced.
void write_meta(const std::string& out_path, const TrainConfig& cfg,
                const nlohmann::json& extra = nlohmann::json::object()) {
    nlohmann::json meta = {{"config", cfg}};
    for (auto it = extra.begin(); it != extra.end(); ++it) meta[it.key()] = it.value();
    std::ofstream f(out_path + ".meta.json");
    if (!f) throw std::runtime_error("cannot write " + out_path + ".meta.json");
    f << meta.dump(2) << "\n";
}

void write_metrics_csv(const std::string& path, const std::vector<EpochMetrics>& metrics) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write metrics file " + path);
    f << "epoch,lr,train_loss,dev_accuracy\n";
    for (const auto& m : metrics)
        f << m.epoch << "," << m.lr << "," << m.train_loss << "," << m.dev_accuracy << "\n";
}

int cmd_build_graph(const CommonOpts& o, const std::string& data, const std::string& out) {
    TrainConfig cfg = effective_config(o);
    nlohmann::json graphs = nlohmann::json::array();
    for (const Sample& s : load_samples(data, o.mask))
        graphs.push_back({{"id", s.id}, {"graph", graph_to_json(build_graph(s, cfg.node_cap))}});
    std::ofstream f(out);
    if (!f) throw std::runtime_error("cannot write " + out);
    f << graphs.dump(2) << "\n";
    write_meta(out, cfg, {{"source", data}, {"masked", o.mask}});
    std::cout << "wrote " << graphs.size() << " graphs to " << out << "\n";
    return 0;
}

int cmd_synth(const CommonOpts& o, SyntheticConfig scfg, const std::string& out) {
    TrainConfig cfg = effective_config(o);
    scfg.seed = cfg.seed;
    auto samples = generate_synthetic(scfg);
    if (o.mask)
        for (Sample& s : samples) s = apply_mask(s);
    save_wikihop(samples, out);
    write_meta(out, cfg,
               {{"synthetic",
                 {{"n_entities", scfg.n_entities},
                  {"n_relations", scfg.n_relations},
                  {"n_distractor_docs", scfg.n_distractor_docs},
                  {"n_candidates", scfg.n_candidates},
                  {"hops", scfg.hops},
                  {"n_samples", scfg.n_samples},
                  {"seed", scfg.seed}}},
                {"masked", o.mask}});
    std::cout << "wrote " << samples.size() << " samples to " << out << "\n";
    return 0;
}

int cmd_train(const CommonOpts& o, const std::string& data, const std::string& dev,
              const std::string& out, const std::string& metrics_path) {
    TrainConfig cfg = effective_config(o);
    Variant variant = effective_variant(o);
    Providers p = make_providers(o, cfg);
    auto train_set = encode_dataset(load_samples(data, o.mask), cfg, p, o.workers);
    std::vector<EncodedSample> dev_set;
    if (!dev.empty()) dev_set = encode_dataset(load_samples(dev, o.mask), cfg, p, o.workers);

    Model model(cfg, variant);
    model.init_params(cfg.seed);
    AdamState adam(model.params());
    std::mt19937_64 shuffle_rng(cfg.seed), dropout_rng(cfg.seed + 1);
    auto metrics = train(model, adam, train_set, dev_set, shuffle_rng, dropout_rng);

    save_checkpoint(make_checkpoint(model, adam, cfg.epochs, shuffle_rng, dropout_rng), out);
    write_meta(out, cfg, {{"variant", variant_name(variant)}, {"train_data", data}});
    if (!metrics_path.empty()) {
        write_metrics_csv(metrics_path, metrics);
        write_meta(metrics_path, cfg, {{"variant", variant_name(variant)}});
    }
    if (!metrics.empty())
        std::cout << "final train loss " << metrics.back().train_loss << ", dev accuracy "
                  << metrics.back().dev_accuracy << "\n";
    std::cout << "wrote checkpoint " << out << "\n";
    return 0;
}

int cmd_evaluate(const CommonOpts& o, const std::string& model_path, const std::string& data) {
    Checkpoint ck = load_checkpoint(model_path);
    Model model = model_from_checkpoint(ck);
    Providers p = make_providers(o, model.config());
    auto samples = encode_dataset(load_samples(data, o.mask), model.config(), p, o.workers);
    std::cout << "accuracy " << evaluate(model, samples).accuracy << " on " << samples.size()
              << " samples\n";
    return 0;
}

int cmd_predict(const CommonOpts& o, const std::string& model_path, const std::string& data,
                const std::string& out) {
    Checkpoint ck = load_checkpoint(model_path);
    Model model = model_from_checkpoint(ck);
    Providers p = make_providers(o, model.config());
    auto samples = encode_dataset(load_samples(data, o.mask), model.config(), p, o.workers);

    std::ofstream f(out);
    if (!f) throw std::runtime_error("cannot write " + out);
    for (const EncodedSample& es : samples) {
        nlohmann::json rec = {{"id", es.id}};
        if (es.has_nodes()) {
            ad::Tape tape;
            Model::Forward fw = model.forward(tape, es);
            rec["predicted_candidate"] = Model::predict(tape, fw);
            std::vector<double> probs;
            for (Eigen::Index k = 0; k < tape.val(fw.dist.probs).rows(); ++k)
                probs.push_back(tape.val(fw.dist.probs)(k, 0));
            rec["probs"] = probs;
        } else {
            rec["predicted_candidate"] = -1;
            rec["probs"] = nlohmann::json::array();
        }
        f << rec.dump() << "\n";
    }
    write_meta(out, model.config(), {{"variant", variant_name(model.variant())}});
    std::cout << "wrote predictions for " << samples.size() << " samples to " << out << "\n";
    return 0;
}

int cmd_ablate(const CommonOpts& o, const std::string& data, const std::string& dev,
               const std::string& out) {
    TrainConfig cfg = effective_config(o);
    Providers p = make_providers(o, cfg);
    auto train_set = encode_dataset(load_samples(data, o.mask), cfg, p, o.workers);
    auto dev_set = dev.empty() ? train_set
                               : encode_dataset(load_samples(dev, o.mask), cfg, p, o.workers);

    std::ostringstream table;
    table << "variant,final_train_loss,accuracy\n";
    for (Variant v : kAllVariants) {
        Model model(cfg, v);
        model.init_params(cfg.seed);
        AdamState adam(model.params());
        std::mt19937_64 shuffle_rng(cfg.seed), dropout_rng(cfg.seed + 1);
        auto metrics = train(model, adam, train_set, {}, shuffle_rng, dropout_rng);
        double acc = evaluate(model, dev_set).accuracy;
        table << variant_name(v) << ","
              << (metrics.empty() ? 0.0 : metrics.back().train_loss) << "," << acc << "\n";
        std::cout << variant_name(v) << ": accuracy " << acc << "\n";
    }
    if (!out.empty()) {
        std::ofstream f(out);
        if (!f) throw std::runtime_error("cannot write " + out);
        f << table.str();
        write_meta(out, cfg, {{"train_data", data}});
    }
    return 0;
}

int cmd_gradcheck(const CommonOpts& o, const std::string& dims) {
    TrainConfig cfg = effective_config(o);
    if (dims == "small") {
        cfg.dims = Dims{6, 4, 8, 2, 2, 8};
        cfg.layers = 2;
        cfg.node_cap = 6;
        cfg.query_cap = 5;
    } else if (dims != "config") {
        throw std::runtime_error("gradcheck: --dims must be small or config");
    }
    Providers p = make_providers(o, cfg);
    std::vector<EncodedSample> data;
    for (const Sample& s : generate_synthetic({.n_candidates = 3, .n_samples = 2,
                                               .seed = cfg.seed + 3}))
        data.push_back(encode_sample(s, cfg, *p.tokens, *p.ctx, p.tags));

    double worst = 0.0;
    std::vector<Variant> variants;
    if (o.ablation) variants.push_back(parse_variant(*o.ablation));
    else variants.assign(std::begin(kAllVariants), std::end(kAllVariants));
    for (Variant v : variants) {
        Model model(cfg, v);
        model.init_params(cfg.seed);
        double rel = grad_check(model.params(), model_loss_fn(model, data), 20, 3e-4,
                                cfg.seed + 4);
        std::cout << variant_name(v) << ": max relative error " << rel << "\n";
        worst = std::max(worst, rel);
    }
    std::cout << "overall max relative error " << worst << "\n";
    return worst < 1e-4 ? 0 : kRuntimeError;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"BAG: bi-directional attention entity graph convolutional network"};
    app.require_subcommand(1);

    std::string data, dev, out, model_path, metrics_path, dims = "small";
    SyntheticConfig scfg;

    CommonOpts o_graph;
    auto* c_graph = app.add_subcommand("build-graph", "build entity graphs from a dataset");
    c_graph->add_option("--data", data, "input dataset (JSON)")->required();
    c_graph->add_option("--out", out, "output graph file")->required();
    add_common(c_graph, o_graph, false);

    CommonOpts o_synth;
    auto* c_synth = app.add_subcommand("synth", "generate a synthetic multi-hop dataset");
    c_synth->add_option("--out", out, "output dataset (JSON)")->required();
    c_synth->add_option("--samples", scfg.n_samples, "sample count");
    c_synth->add_option("--entities", scfg.n_entities, "entity pool size");
    c_synth->add_option("--relations", scfg.n_relations, "relation pool size");
    c_synth->add_option("--candidates", scfg.n_candidates, "candidates per sample");
    c_synth->add_option("--hops", scfg.hops, "chain length");
    c_synth->add_option("--distractors", scfg.n_distractor_docs, "noise documents");
    add_common(c_synth, o_synth, false);

    CommonOpts o_train;
    auto* c_train = app.add_subcommand("train", "train a model");
    c_train->add_option("--data", data, "training dataset")->required();
    c_train->add_option("--dev", dev, "development dataset");
    c_train->add_option("--out", out, "output checkpoint")->required();
    c_train->add_option("--metrics", metrics_path, "per-epoch metrics CSV");
    add_common(c_train, o_train, true);

    CommonOpts o_eval;
    auto* c_eval = app.add_subcommand("evaluate", "evaluate a checkpoint");
    c_eval->add_option("--model", model_path, "checkpoint file")->required();
    c_eval->add_option("--data", data, "evaluation dataset")->required();
    add_common(c_eval, o_eval, false);

    CommonOpts o_pred;
    auto* c_pred = app.add_subcommand("predict", "write per-sample predictions");
    c_pred->add_option("--model", model_path, "checkpoint file")->required();
    c_pred->add_option("--data", data, "input dataset")->required();
    c_pred->add_option("--out", out, "output JSON-lines file")->required();
    add_common(c_pred, o_pred, false);

    CommonOpts o_ablate;
    auto* c_ablate = app.add_subcommand("ablate", "train and compare all seven variants");
    c_ablate->add_option("--data", data, "training dataset")->required();
    c_ablate->add_option("--dev", dev, "evaluation dataset (defaults to --data)");
    c_ablate->add_option("--out", out, "comparison table CSV");
    add_common(c_ablate, o_ablate, true);

    CommonOpts o_gc;
    auto* c_gc = app.add_subcommand("gradcheck", "finite-difference gradient check");
    c_gc->add_option("--dims", dims, "small | config (use configured dims)");
    add_common(c_gc, o_gc, true);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*c_graph) return cmd_build_graph(o_graph, data, out);
        if (*c_synth) return cmd_synth(o_synth, scfg, out);
        if (*c_train) return cmd_train(o_train, data, dev, out, metrics_path);
        if (*c_eval) return cmd_evaluate(o_eval, model_path, data);
        if (*c_pred) return cmd_predict(o_pred, model_path, data, out);
        if (*c_ablate) return cmd_ablate(o_ablate, data, dev, out);
        if (*c_gc) return cmd_gradcheck(o_gc, dims);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kRuntimeError;
    }
    return 0;
}
