#pragma once

#include <memory>

#include "ser/nn/arch.hpp"
#include "ser/nn/layers.hpp"

namespace ser::nn {

// Layer stack assembled from an Arch. Owns parameters, gradients and the
// forward caches; one instance processes one batch at a time.
template <typename T>
class Network {
public:
    explicit Network(const Arch& arch) : arch_(arch) {
        validate_arch(arch);
        for (const auto& spec : arch.layers) layers_.push_back(make_layer(spec));
    }

    Network(const Network& other) : Network(other.arch_) {
        init(0);
        auto dst = parameters();
        auto src = const_cast<Network&>(other).parameters();
        for (std::size_t i = 0; i < dst.size(); ++i) *dst[i].value = *src[i].value;
        auto dbuf = buffers();
        auto sbuf = const_cast<Network&>(other).buffers();
        for (std::size_t i = 0; i < dbuf.size(); ++i) *dbuf[i].value = *sbuf[i].value;
    }
    Network& operator=(const Network&) = delete;
    Network(Network&&) noexcept = default;
    Network& operator=(Network&&) noexcept = default;

    // Allocates parameters and draws initial values; deterministic per seed.
    void init(std::uint64_t seed) {
        Rng rng = Rng::substream(seed, 0x1417);
        auto shape = input_sample_shape(arch_.input);
        for (auto& layer : layers_) {
            layer->init(shape, rng);
            shape = layer->output_shape(shape);
        }
        if (shape != std::vector<std::size_t>{static_cast<std::size_t>(arch_.n_classes)}) {
            throw ConfigError("arch output shape " + shape_string(shape) + " does not match " +
                              std::to_string(arch_.n_classes) + " classes");
        }
    }

    // batch is [B, C, L] (or [B, F] for flat inputs); returns [B, n_classes]
    // class probabilities. rng drives dropout and is only touched in
    // training mode.
    Tensor<T> forward(const Tensor<T>& batch, bool training, Rng* rng, int threads = 1) {
        Tensor<T> a = batch;
        for (auto& layer : layers_) a = layer->forward(a, training, rng, threads);
        return a;
    }

    // Standard chain through every layer, starting from d(loss)/d(probs).
    Tensor<T> backward(const Tensor<T>& grad_probs, int threads = 1) {
        Tensor<T> g = grad_probs;
        for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) {
            g = (*it)->backward(g, threads);
        }
        return g;
    }

    // Fused softmax + cross-entropy path: the gradient is with respect to
    // the logits, so the softmax layer itself is skipped.
    Tensor<T> backward_fused(const Tensor<T>& grad_logits, int threads = 1) {
        Tensor<T> g = grad_logits;
        for (auto it = layers_.rbegin() + 1; it != layers_.rend(); ++it) {
            g = (*it)->backward(g, threads);
        }
        return g;
    }

    void zero_grad() {
        for (auto& layer : layers_) layer->zero_grad();
    }

    std::vector<ParamRef<T>> parameters() {
        std::vector<ParamRef<T>> out;
        for (std::size_t i = 0; i < layers_.size(); ++i) {
            layers_[i]->collect_params(param_prefix(i), out);
        }
        return out;
    }

    std::vector<ParamRef<T>> buffers() {
        std::vector<ParamRef<T>> out;
        for (std::size_t i = 0; i < layers_.size(); ++i) {
            layers_[i]->collect_buffers(param_prefix(i), out);
        }
        return out;
    }

    const Arch& arch() const { return arch_; }
    std::vector<std::size_t> input_shape() const { return input_sample_shape(arch_.input); }

    // Walks the per-sample shape through the stack without allocating any
    // parameters; throws if a layer cannot accept its input.
    static std::vector<std::size_t> compute_output_shape(const Arch& arch) {
        Network<T> probe(arch);
        auto shape = input_sample_shape(arch.input);
        for (const auto& layer : probe.layers_) shape = layer->output_shape(shape);
        return shape;
    }

private:
    std::string param_prefix(std::size_t i) const {
        char buf[8];
        std::snprintf(buf, sizeof buf, "L%02zu", i);
        return std::string(buf) + "." + layers_[i]->name();
    }

    static std::unique_ptr<Layer<T>> make_layer(const LayerSpec& spec) {
        switch (spec.type) {
            case LayerSpec::Type::conv1d:
                return std::make_unique<Conv1dLayer<T>>(spec.filters, spec.kernel, spec.stride);
            case LayerSpec::Type::relu:
                return std::make_unique<ReluLayer<T>>();
            case LayerSpec::Type::batchnorm:
                return std::make_unique<BatchNormLayer<T>>(spec.momentum, spec.eps);
            case LayerSpec::Type::dropout:
                return std::make_unique<DropoutLayer<T>>(spec.rate);
            case LayerSpec::Type::dense:
                return std::make_unique<DenseLayer<T>>(spec.units);
            case LayerSpec::Type::lstm:
                return std::make_unique<LstmLayer<T>>(spec.units, spec.return_sequences);
            case LayerSpec::Type::flatten:
                return std::make_unique<FlattenLayer<T>>();
            case LayerSpec::Type::softmax:
                return std::make_unique<SoftmaxLayer<T>>();
        }
        throw ConfigError("unknown layer type");
    }

    Arch arch_;
    std::vector<std::unique_ptr<Layer<T>>> layers_;
};

}  // namespace ser::nn
