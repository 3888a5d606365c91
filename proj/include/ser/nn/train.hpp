#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "ser/nn/adam.hpp"
#include "ser/nn/network.hpp"

namespace ser::nn {

struct TrainConfig {
    double learning_rate = 0.001;
    int epochs = 0;  // 0 -> per-architecture default
    int batch_size = 8;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    std::uint64_t seed = 42;
    int threads = 1;

    AdamConfig adam() const { return {learning_rate, beta1, beta2, adam_eps}; }
};

// Table-of-training-parameters defaults: 500 for the CNN, 80 for the LSTM,
// 200 for the hybrid. Matched on the architecture name.
inline int default_epochs(const std::string& arch_name) {
    if (arch_name.find("cnn-lstm") != std::string::npos ||
        arch_name.find("cnn_lstm") != std::string::npos) {
        return 200;
    }
    if (arch_name.find("lstm") != std::string::npos) return 80;
    return 500;
}

// Preprocessed samples ready for a specific architecture input.
template <typename T>
struct Dataset {
    std::vector<Tensor<T>> inputs;  // each [C, L], one sample
    std::vector<int> labels;        // class indices in [0, n_classes)

    std::size_t size() const { return inputs.size(); }
};

struct EpochStats {
    double train_loss = 0.0;
    double valid_accuracy = 0.0;  // percent
};

using TrainHistory = std::vector<EpochStats>;

template <typename T>
struct LossResult {
    double loss = 0.0;
    Tensor<T> grad_logits;  // (probs - onehot) / B, for the fused softmax path
};

// Categorical cross-entropy on probabilities with a 1e-12 floor.
template <typename T>
LossResult<T> cross_entropy_loss(const Tensor<T>& probs, const std::vector<int>& labels) {
    require_rank(probs, 2, "cross_entropy");
    const std::size_t B = probs.dim(0), K = probs.dim(1);
    if (labels.size() != B) throw EvalError("cross_entropy: batch/label size mismatch");

    LossResult<T> out;
    out.grad_logits = Tensor<T>({B, K});
    double loss = 0.0;
    for (std::size_t b = 0; b < B; ++b) {
        const int label = labels[b];
        if (label < 0 || static_cast<std::size_t>(label) >= K) {
            throw LabelError("cross_entropy: label " + std::to_string(label) + " out of range");
        }
        const double p = std::max(static_cast<double>(probs.at2(b, static_cast<std::size_t>(label))),
                                  1e-12);
        loss -= std::log(p);
        for (std::size_t k = 0; k < K; ++k) {
            const double onehot = static_cast<std::size_t>(label) == k ? 1.0 : 0.0;
            out.grad_logits.at2(b, k) =
                static_cast<T>((static_cast<double>(probs.at2(b, k)) - onehot) /
                               static_cast<double>(B));
        }
    }
    out.loss = loss / static_cast<double>(B);
    return out;
}

template <typename T>
Tensor<T> stack_batch(const Dataset<T>& data, const std::vector<std::size_t>& ids) {
    if (ids.empty()) throw ConfigError("empty batch");
    std::vector<std::size_t> shape = data.inputs[ids[0]].shape;
    std::vector<std::size_t> batched;
    batched.push_back(ids.size());
    batched.insert(batched.end(), shape.begin(), shape.end());
    Tensor<T> out(batched);
    const std::size_t stride = data.inputs[ids[0]].size();
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const auto& sample = data.inputs[ids[i]];
        if (sample.shape != shape) throw ShapeError("batch holds mixed sample shapes");
        std::copy(sample.data.begin(), sample.data.end(), out.data.begin() + i * stride);
    }
    return out;
}

// Evaluation-mode argmax; ties break toward the lowest class id.
template <typename T>
int predict_row(const Tensor<T>& probs, std::size_t row) {
    const std::size_t K = probs.dim(1);
    int best = 0;
    T best_p = probs.at2(row, 0);
    for (std::size_t k = 1; k < K; ++k) {
        if (probs.at2(row, k) > best_p) {
            best_p = probs.at2(row, k);
            best = static_cast<int>(k);
        }
    }
    return best;
}

template <typename T>
struct Prediction {
    int label = 0;
    std::vector<T> probabilities;
};

template <typename T>
Prediction<T> predict(Network<T>& net, const Tensor<T>& sample, int threads = 1) {
    std::vector<std::size_t> shape;
    shape.push_back(1);
    shape.insert(shape.end(), sample.shape.begin(), sample.shape.end());
    Tensor<T> batch;
    batch.shape = shape;
    batch.data = sample.data;
    Tensor<T> probs = net.forward(batch, /*training=*/false, nullptr, threads);
    Prediction<T> out;
    out.label = predict_row(probs, 0);
    out.probabilities.assign(probs.data.begin(), probs.data.end());
    return out;
}

template <typename T>
double evaluate_accuracy(Network<T>& net, const Dataset<T>& data, int threads = 1,
                         int batch_size = 32) {
    if (data.size() == 0) return 0.0;
    std::size_t correct = 0;
    std::vector<std::size_t> ids;
    for (std::size_t start = 0; start < data.size(); start += batch_size) {
        ids.clear();
        for (std::size_t i = start; i < std::min(data.size(), start + batch_size); ++i) {
            ids.push_back(i);
        }
        Tensor<T> probs = net.forward(stack_batch(data, ids), false, nullptr, threads);
        for (std::size_t r = 0; r < ids.size(); ++r) {
            if (predict_row(probs, r) == data.labels[ids[r]]) ++correct;
        }
    }
    return 100.0 * static_cast<double>(correct) / static_cast<double>(data.size());
}

// One pass over the training set: seeded shuffle, fixed-size mini-batches
// (the trailing partial batch is kept), fused softmax/cross-entropy
// gradient, one Adam step per batch. Returns the mean per-sample loss.
template <typename T>
double train_epoch(Network<T>& net, AdamState<T>& adam, const Dataset<T>& data,
                   const TrainConfig& cfg, int epoch_index, Rng& dropout_rng) {
    if (data.size() == 0) throw ConfigError("training set is empty");
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng = Rng::substream(cfg.seed, 0x5f0000 + static_cast<std::uint64_t>(epoch_index));
    shuffle_rng.shuffle(order);

    double loss_sum = 0.0;
    const std::size_t bs = static_cast<std::size_t>(cfg.batch_size);
    for (std::size_t start = 0; start < order.size(); start += bs) {
        std::vector<std::size_t> ids(order.begin() + start,
                                     order.begin() + std::min(order.size(), start + bs));
        Tensor<T> batch = stack_batch(data, ids);
        std::vector<int> labels;
        for (auto i : ids) labels.push_back(data.labels[i]);

        net.zero_grad();
        Tensor<T> probs = net.forward(batch, /*training=*/true, &dropout_rng, cfg.threads);
        auto loss = cross_entropy_loss(probs, labels);
        net.backward_fused(loss.grad_logits, cfg.threads);
        adam_step(net, adam, cfg.adam());
        loss_sum += loss.loss * static_cast<double>(ids.size());
    }
    return loss_sum / static_cast<double>(data.size());
}

template <typename T>
struct TrainResult {
    Network<T> net;
    AdamState<T> adam;
    TrainHistory history;
    Rng rng;

    TrainResult(const Arch& arch, std::uint64_t seed) : net(arch), rng(seed) {}
};

// Full fixed-epoch run per the published training parameters; no early
// stopping. valid_set may be empty.
template <typename T>
TrainResult<T> train(const Arch& arch, const TrainConfig& cfg, const Dataset<T>& train_set,
                     const Dataset<T>& valid_set) {
    if (train_set.size() == 0) throw ConfigError("training set is empty");
    const int epochs = cfg.epochs > 0 ? cfg.epochs : default_epochs(arch.name);

    TrainResult<T> result(arch, cfg.seed);
    result.net.init(cfg.seed);
    result.adam = AdamState<T>::init_for(result.net);
    result.rng = Rng::substream(cfg.seed, 0xd09);

    for (int e = 0; e < epochs; ++e) {
        EpochStats stats;
        stats.train_loss = train_epoch(result.net, result.adam, train_set, cfg, e, result.rng);
        stats.valid_accuracy =
            valid_set.size() ? evaluate_accuracy(result.net, valid_set, cfg.threads) : 0.0;
        result.history.push_back(stats);
    }
    return result;
}

// Central-difference check of every layer's analytic gradients on a fixed
// batch. Samples up to max_per_param indices per parameter tensor; returns
// the max relative error  |a - n| / max(1e-8, |a| + |n|).
template <typename T>
double gradient_check(Network<T>& net, const Tensor<T>& batch, const std::vector<int>& labels,
                      std::uint64_t seed, double h = 1e-5, int max_per_param = 100) {
    auto loss_of = [&]() {
        Tensor<T> probs = net.forward(batch, /*training=*/true, nullptr, 1);
        return cross_entropy_loss(probs, labels).loss;
    };

    net.zero_grad();
    Tensor<T> probs = net.forward(batch, /*training=*/true, nullptr, 1);
    auto loss = cross_entropy_loss(probs, labels);
    net.backward_fused(loss.grad_logits, 1);

    Rng rng = Rng::substream(seed, 0x6c);
    double worst = 0.0;
    for (auto& p : net.parameters()) {
        const std::size_t n = p.value->size();
        std::vector<std::size_t> picks;
        if (n <= static_cast<std::size_t>(max_per_param)) {
            picks.resize(n);
            std::iota(picks.begin(), picks.end(), std::size_t{0});
        } else {
            for (int i = 0; i < max_per_param; ++i) picks.push_back(rng.bounded(n));
        }
        for (auto k : picks) {
            const T saved = p.value->data[k];
            p.value->data[k] = saved + static_cast<T>(h);
            const double up = loss_of();
            p.value->data[k] = saved - static_cast<T>(h);
            const double down = loss_of();
            p.value->data[k] = saved;
            const double numeric = (up - down) / (2.0 * h);
            const double analytic = static_cast<double>(p.grad->data[k]);
            const double err = std::abs(analytic - numeric) /
                               std::max(1e-8, std::abs(analytic) + std::abs(numeric));
            worst = std::max(worst, err);
        }
    }
    return worst;
}

}  // namespace ser::nn
