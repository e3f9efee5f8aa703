#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "signet/common.hpp"
#include "signet/layers.hpp"
#include "signet/metrics.hpp"
#include "signet/optim.hpp"
#include "signet/rng.hpp"
#include "signet/tensor.hpp"

namespace signet {

/// One training example: a flat feature row and an integer label.
struct Sample {
    std::vector<float> features;
    std::size_t label = 0;
};

struct TrainConfig {
    std::size_t epochs = 50;
    std::size_t batch_size = 16;
    double learning_rate = 1e-3;
    std::uint64_t seed = 0;
    std::vector<std::size_t> input_shape;  // per-sample shape, e.g. {3, 32, 32}
    std::size_t classes = 2;
    /// Optional early stop once the training split reaches this accuracy
    /// (checked after each epoch); 0 disables it.
    double stop_at_train_accuracy = 0.0;
};

struct EpochRow {
    std::size_t epoch = 0;
    std::string split;
    double loss = 0.0;
    std::optional<double> precision, recall, f1, accuracy;
};

struct TrainHistory {
    std::vector<EpochRow> rows;

    /// Comma-separated rows: epoch, split, loss, precision, recall, f1, accuracy.
    std::string to_csv() const {
        std::string out = "epoch,split,loss,precision,recall,f1,accuracy\n";
        char buf[160];
        for (const auto& r : rows) {
            auto fm = [](const std::optional<double>& v) -> std::string {
                if (!v) return "undefined";
                char b[32];
                std::snprintf(b, sizeof(b), "%.6f", *v);
                return b;
            };
            std::snprintf(buf, sizeof(buf), "%zu,%s,%.6f,", r.epoch, r.split.c_str(), r.loss);
            out += buf;
            out += fm(r.precision) + "," + fm(r.recall) + "," + fm(r.f1) + "," + fm(r.accuracy) + "\n";
        }
        return out;
    }
};

namespace detail {

inline Tensor batch_tensor(const std::vector<Sample>& set, const std::vector<std::size_t>& idx,
                           std::size_t lo, std::size_t hi, const std::vector<std::size_t>& shape) {
    std::size_t n = hi - lo;
    std::size_t per = shape_size(shape);
    std::vector<std::size_t> full = {n};
    full.insert(full.end(), shape.begin(), shape.end());
    Tensor batch = Tensor::zeros(full);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& s = set[idx[lo + i]];
        require(s.features.size() == per, "train: sample feature length " +
                                              std::to_string(s.features.size()) + " does not fill shape " +
                                              shape_str(shape));
        std::copy(s.features.begin(), s.features.end(), batch.data().begin() + i * per);
    }
    return batch;
}

}  // namespace detail

/// Predictions over a sample set in eval mode (no recording).
template <class Model>
std::vector<std::size_t> predict(Model& model, const std::vector<Sample>& set,
                                 const std::vector<std::size_t>& shape, std::size_t batch_size = 32) {
    NoGradScope<float> frozen;
    std::vector<std::size_t> preds;
    preds.reserve(set.size());
    std::vector<std::size_t> idx(set.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    for (std::size_t lo = 0; lo < set.size(); lo += batch_size) {
        std::size_t hi = std::min(set.size(), lo + batch_size);
        Tensor batch = detail::batch_tensor(set, idx, lo, hi, shape);
        Tensor logits = model.forward(batch, Mode::Eval, nullptr);
        for (std::size_t r = 0; r < hi - lo; ++r) preds.push_back(argmax_row(logits, r));
    }
    return preds;
}

/// Mean cross-entropy and metric row for one split.
template <class Model>
EpochRow evaluate_split(Model& model, const std::vector<Sample>& set, const TrainConfig& cfg,
                        std::size_t epoch, const std::string& split) {
    EpochRow row;
    row.epoch = epoch;
    row.split = split;
    {
        NoGradScope<float> frozen;
        double loss_acc = 0.0;
        std::vector<std::size_t> idx(set.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        for (std::size_t lo = 0; lo < set.size(); lo += cfg.batch_size) {
            std::size_t hi = std::min(set.size(), lo + cfg.batch_size);
            Tensor batch = detail::batch_tensor(set, idx, lo, hi, cfg.input_shape);
            Tensor logits = model.forward(batch, Mode::Eval, nullptr);
            std::vector<std::size_t> labels;
            for (std::size_t i = lo; i < hi; ++i) labels.push_back(set[idx[i]].label);
            loss_acc += static_cast<double>(cross_entropy(logits, labels).item()) *
                        static_cast<double>(hi - lo);
        }
        row.loss = loss_acc / static_cast<double>(set.size());
    }
    auto preds = predict(model, set, cfg.input_shape, cfg.batch_size);
    std::vector<std::size_t> labels(set.size());
    for (std::size_t i = 0; i < set.size(); ++i) labels[i] = set[i].label;
    ConfusionMatrix cm = confusion(preds, labels, cfg.classes);
    if (cfg.classes == 2) {
        BinaryMetrics m = metrics(cm);
        row.precision = m.precision;
        row.recall = m.recall;
        row.f1 = m.f1;
        row.accuracy = m.accuracy;
    } else {
        MacroMetrics m = macro_metrics(cm);
        row.precision = m.precision;
        row.recall = m.recall;
        row.f1 = m.f1;
        row.accuracy = m.accuracy;
    }
    return row;
}

/// Deterministic mini-batch training with Adam and per-epoch Table-1 style
/// metrics. Retains the best-validation-accuracy parameters, which are
/// restored into the model before returning.
template <class Model>
TrainHistory train(Model& model, const std::vector<Sample>& train_set,
                   const std::vector<Sample>& val_set, const TrainConfig& cfg) {
    require(!train_set.empty(), "train: training set is empty");
    require(!val_set.empty(), "train: validation set is empty");
    require(!cfg.input_shape.empty(), "train: input shape not configured");
    for (const auto& s : train_set)
        require(s.label < cfg.classes, "train: label " + std::to_string(s.label) + " out of range [0," +
                                           std::to_string(cfg.classes) + ")");

    AdamConfig ac;
    ac.learning_rate = cfg.learning_rate;
    AdamState opt = AdamState::make(model.params, ac);
    Rng root(cfg.seed, 101);

    TrainHistory history;
    double best_val_acc = -1.0;
    auto best_params = model.params.snapshot();

    std::vector<std::size_t> idx(train_set.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        Rng eporder = root.fork(epoch);
        eporder.shuffle(idx);
        Rng dropout_rng = root.fork(1000 + epoch);
        for (std::size_t lo = 0, bi = 0; lo < idx.size(); lo += cfg.batch_size, ++bi) {
            std::size_t hi = std::min(idx.size(), lo + cfg.batch_size);
            Tensor batch = detail::batch_tensor(train_set, idx, lo, hi, cfg.input_shape);
            std::vector<std::size_t> labels;
            for (std::size_t i = lo; i < hi; ++i) labels.push_back(train_set[idx[i]].label);

            Tape tape;
            TapeScope<float> scope(tape);
            Tensor logits = model.forward(batch, Mode::Train, &dropout_rng);
            Tensor loss = cross_entropy(logits, labels);
            if (!std::isfinite(loss.item()))
                throw std::runtime_error("train: non-finite loss at epoch " + std::to_string(epoch) +
                                         ", batch " + std::to_string(bi));
            model.params.zero_grad();
            backward(tape, loss);
            adam_step(model.params, opt);
        }

        EpochRow tr = evaluate_split(model, train_set, cfg, epoch, "train");
        EpochRow va = evaluate_split(model, val_set, cfg, epoch, "validation");
        history.rows.push_back(tr);
        history.rows.push_back(va);
        if (va.accuracy && *va.accuracy > best_val_acc) {
            best_val_acc = *va.accuracy;
            best_params = model.params.snapshot();
        }
        if (cfg.stop_at_train_accuracy > 0.0 && tr.accuracy &&
            *tr.accuracy >= cfg.stop_at_train_accuracy)
            break;
    }
    model.params.restore(best_params);
    return history;
}

}  // namespace signet
