#pragma once

// Training loop (Adam with epoch-halved learning rate), evaluation, and the
// finite-difference gradient check harness.

#include "bag/model.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

namespace bag {

inline double learning_rate(double lr0, int halve_every, int epoch) {
    return lr0 * std::pow(2.0, -static_cast<double>(epoch / halve_every));
}

struct AdamState {
    std::vector<Mat> m, v;
    long step = 0;

    explicit AdamState(const ParamStore& params) {
        for (const Mat& t : params.tensors()) {
            m.push_back(Mat::Zero(t.rows(), t.cols()));
            v.push_back(Mat::Zero(t.rows(), t.cols()));
        }
    }
};

inline void adam_step(ParamStore& params, const std::vector<Mat>& grads,
                      AdamState& state, double lr, double beta1 = 0.9,
                      double beta2 = 0.999, double eps = 1e-8) {
    if (grads.size() != params.size())
        throw std::invalid_argument("adam_step: gradient count mismatch");
    ++state.step;
    double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
    double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * grads[i];
        state.v[i] = beta2 * state.v[i].array().matrix() +
                     (1.0 - beta2) * grads[i].array().square().matrix();
        Mat mhat = state.m[i] / bc1;
        Mat vhat = state.v[i] / bc2;
        params.tensors()[i] -=
            lr * (mhat.array() / (vhat.array().sqrt() + eps)).matrix();
    }
}

struct BatchGrads {
    double loss_sum = 0.0;
    int n_used = 0;
    std::vector<Mat> grads;  // d(loss_sum)/d(param), aligned with the store
};

// Summed loss and gradients over the answerable samples of a batch.
inline BatchGrads batch_loss_and_grads(const Model& model,
                                       const std::vector<EncodedSample>& batch,
                                       bool training = false,
                                       std::mt19937_64* dropout_rng = nullptr) {
    BatchGrads out;
    for (const Mat& t : model.params().tensors())
        out.grads.push_back(Mat::Zero(t.rows(), t.cols()));
    for (const EncodedSample& es : batch) {
        if (!es.trainable()) continue;
        ad::Tape tape;
        Model::Forward fw = model.forward(tape, es, training, dropout_rng);
        if (!fw.answerable) continue;
        double loss = tape.val(fw.loss)(0, 0);
        if (!std::isfinite(loss)) throw std::runtime_error("non-finite loss");
        tape.backward(fw.loss);
        out.loss_sum += loss;
        ++out.n_used;
        for (std::size_t i = 0; i < model.params().size(); ++i)
            out.grads[i] += tape.grad(fw.param_vars.at(model.params().names()[i]));
    }
    return out;
}

struct EpochMetrics {
    int epoch = 0;
    double lr = 0.0;
    double train_loss = 0.0;
    double dev_accuracy = 0.0;
};

struct EvalResult {
    double accuracy = 0.0;
    std::vector<int> predictions;  // -1 for samples with no usable graph
};

inline EvalResult evaluate(const Model& model, const std::vector<EncodedSample>& samples) {
    EvalResult out;
    int correct = 0, labeled = 0;
    for (const EncodedSample& es : samples) {
        int pred = -1;
        if (es.has_nodes()) {
            ad::Tape tape;
            Model::Forward fw = model.forward(tape, es, false, nullptr);
            pred = Model::predict(tape, fw);
        }
        out.predictions.push_back(pred);
        if (es.gold >= 0) {
            ++labeled;
            if (pred == es.gold) ++correct;
        }
    }
    out.accuracy = labeled ? static_cast<double>(correct) / labeled : 0.0;
    return out;
}

// Mini-batch Adam on the mean batch loss; shuffling, dropout and
// initialization all derive from cfg.seed, so a rerun is bit-identical.
inline std::vector<EpochMetrics> train(Model& model, AdamState& adam,
                                       const std::vector<EncodedSample>& train_set,
                                       const std::vector<EncodedSample>& dev_set,
                                       std::mt19937_64& shuffle_rng,
                                       std::mt19937_64& dropout_rng,
                                       int first_epoch = 0) {
    const TrainConfig& cfg = model.config();
    bool any = false;
    for (const EncodedSample& es : train_set) any |= es.trainable();
    if (!any) throw std::runtime_error("train: every sample is unanswerable");

    std::vector<EpochMetrics> metrics;
    std::vector<std::size_t> order(train_set.size());

    for (int epoch = first_epoch; epoch < cfg.epochs; ++epoch) {
        double lr = learning_rate(cfg.lr0, cfg.halve_every, epoch);
        // Shuffle from the identity order so a resumed run replays the same
        // epoch permutations as an uninterrupted one.
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        double loss_sum = 0.0;
        int n_used = 0;
        for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(cfg.batch_size)) {
            std::vector<EncodedSample> batch;
            for (std::size_t i = b;
                 i < std::min(order.size(), b + static_cast<std::size_t>(cfg.batch_size)); ++i)
                batch.push_back(train_set[order[i]]);
            BatchGrads bg = batch_loss_and_grads(model, batch, true, &dropout_rng);
            if (bg.n_used == 0) continue;
            for (Mat& g : bg.grads) g /= static_cast<double>(bg.n_used);
            adam_step(model.params(), bg.grads, adam, lr);
            loss_sum += bg.loss_sum;
            n_used += bg.n_used;
        }
        EpochMetrics em;
        em.epoch = epoch;
        em.lr = lr;
        em.train_loss = n_used ? loss_sum / n_used : 0.0;
        em.dev_accuracy = dev_set.empty() ? 0.0 : evaluate(model, dev_set).accuracy;
        metrics.push_back(em);
    }
    return metrics;
}

// Compares analytic gradients against central finite differences at
// probe_count randomly chosen scalar parameters. corrupt_scale != 1 injects a
// known fault into the analytic side to verify harness sensitivity.
template <class LossAndGrads>
double grad_check(ParamStore& params, LossAndGrads&& loss_and_grads,
                  int probe_count, double step, std::uint64_t seed,
                  double corrupt_scale = 1.0) {
    auto [base_loss, grads] = loss_and_grads();
    if (!std::isfinite(base_loss)) throw std::runtime_error("grad_check: non-finite loss");

    std::vector<std::size_t> offsets;  // cumulative element counts
    std::size_t total = 0;
    for (const Mat& t : params.tensors()) {
        offsets.push_back(total);
        total += static_cast<std::size_t>(t.size());
    }
    if (total == 0) throw std::runtime_error("grad_check: no parameters");

    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, total - 1);
    double max_rel = 0.0;
    for (int p = 0; p < probe_count; ++p) {
        std::size_t flat = pick(rng);
        std::size_t ti = offsets.size() - 1;
        while (offsets[ti] > flat) --ti;
        Mat& tensor = params.tensors()[ti];
        Eigen::Index e = static_cast<Eigen::Index>(flat - offsets[ti]);
        Eigen::Index r = e % tensor.rows();
        Eigen::Index c = e / tensor.rows();

        double saved = tensor(r, c);
        tensor(r, c) = saved + step;
        double up = loss_and_grads().first;
        tensor(r, c) = saved - step;
        double down = loss_and_grads().first;
        tensor(r, c) = saved;

        double fd = (up - down) / (2.0 * step);
        double an = grads[ti](r, c) * corrupt_scale;
        double denom = std::max({std::abs(fd), std::abs(an), 1e-8});
        max_rel = std::max(max_rel, std::abs(an - fd) / denom);
    }
    return max_rel;
}

// Convenience closure: summed loss over a fixed batch (dropout off).
inline auto model_loss_fn(const Model& model, const std::vector<EncodedSample>& batch) {
    return [&model, &batch]() {
        BatchGrads bg = batch_loss_and_grads(model, batch, false, nullptr);
        if (bg.n_used == 0) throw std::runtime_error("grad_check: no answerable samples");
        return std::make_pair(bg.loss_sum, std::move(bg.grads));
    };
}

}  // namespace bag
