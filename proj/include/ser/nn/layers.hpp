#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "ser/nn/tensor.hpp"
#include "ser/parallel.hpp"
#include "ser/rng.hpp"

namespace ser::nn {

template <typename T>
struct ParamRef {
    std::string name;
    Tensor<T>* value;
    Tensor<T>* grad;  // null for buffers
};

// One network stage. Layers cache whatever forward state backward needs, so
// a layer instance handles one batch at a time; parallelism lives inside the
// per-element loops and keeps a fixed accumulation order.
template <typename T>
class Layer {
public:
    virtual ~Layer() = default;
    virtual std::string name() const = 0;

    // Per-sample shape transform ([C, L] or [F], no batch dimension).
    virtual std::vector<std::size_t> output_shape(const std::vector<std::size_t>& in) const = 0;

    virtual void init(const std::vector<std::size_t>& in_shape, Rng& rng) = 0;
    virtual Tensor<T> forward(const Tensor<T>& x, bool training, Rng* rng, int threads) = 0;
    virtual Tensor<T> backward(const Tensor<T>& grad_out, int threads) = 0;

    virtual void collect_params(const std::string&, std::vector<ParamRef<T>>&) {}
    virtual void collect_buffers(const std::string&, std::vector<ParamRef<T>>&) {}
    virtual void zero_grad() {}
};

namespace detail {

template <typename T>
void he_uniform(Tensor<T>& t, std::size_t fan_in, Rng& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (auto& v : t.data) v = static_cast<T>(rng.uniform(-bound, bound));
}

template <typename T>
void glorot_uniform(Tensor<T>& t, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (auto& v : t.data) v = static_cast<T>(rng.uniform(-bound, bound));
}

template <typename T>
T sigmoid(T x) {
    return T(1) / (T(1) + std::exp(-x));
}

}  // namespace detail

// Valid (no padding) 1-d convolution over the time axis.
// x [B, Cin, L] -> y [B, F, (L - K)/stride + 1]; weights [F, Cin, K].
template <typename T>
class Conv1dLayer : public Layer<T> {
public:
    Conv1dLayer(int filters, int kernel, int stride)
        : filters_(filters), kernel_(kernel), stride_(stride) {
        if (filters < 1 || kernel < 1 || stride < 1) {
            throw ConfigError("conv1d needs filters, kernel, stride >= 1");
        }
    }

    std::string name() const override { return "conv1d"; }

    std::vector<std::size_t> output_shape(const std::vector<std::size_t>& in) const override {
        if (in.size() != 2) throw ShapeError("conv1d: input must be [C, L], got " + shape_string(in));
        if (in[1] < static_cast<std::size_t>(kernel_)) {
            throw ShapeError("conv1d: input length " + std::to_string(in[1]) +
                             " shorter than kernel " + std::to_string(kernel_));
        }
        const std::size_t out_len = (in[1] - static_cast<std::size_t>(kernel_)) /
                                        static_cast<std::size_t>(stride_) +
                                    1;
        return {static_cast<std::size_t>(filters_), out_len};
    }

    void init(const std::vector<std::size_t>& in_shape, Rng& rng) override {
        in_channels_ = in_shape[0];
        w_ = Tensor<T>({static_cast<std::size_t>(filters_), in_channels_,
                        static_cast<std::size_t>(kernel_)});
        b_ = Tensor<T>({static_cast<std::size_t>(filters_)});
        gw_ = w_.zeros_like();
        gb_ = b_.zeros_like();
        detail::he_uniform(w_, in_channels_ * static_cast<std::size_t>(kernel_), rng);
    }

    Tensor<T> forward(const Tensor<T>& x, bool /*training*/, Rng*, int threads) override {
        require_rank(x, 3, "conv1d");
        if (x.dim(1) != in_channels_) {
            throw ShapeError("conv1d: expected " + std::to_string(in_channels_) +
                             " input channels, got " + std::to_string(x.dim(1)));
        }
        x_ = x;
        const std::size_t B = x.dim(0), C = x.dim(1), L = x.dim(2);
        const std::size_t K = static_cast<std::size_t>(kernel_);
        const std::size_t S = static_cast<std::size_t>(stride_);
        if (L < K) throw ShapeError("conv1d: input length shorter than kernel");
        const std::size_t Lo = (L - K) / S + 1;
        const std::size_t F = static_cast<std::size_t>(filters_);

        Tensor<T> y({B, F, Lo});
        parallel_for(B * F, threads, [&](std::size_t bf) {
            const std::size_t b = bf / F, f = bf % F;
            const T* wf = w_.ptr() + f * C * K;
            T* yrow = y.ptr() + (b * F + f) * Lo;
            const T bias = b_.data[f];
            for (std::size_t t = 0; t < Lo; ++t) yrow[t] = bias;
            for (std::size_t c = 0; c < C; ++c) {
                const T* xrow = x.ptr() + (b * C + c) * L;
                for (std::size_t k = 0; k < K; ++k) {
                    const T wv = wf[c * K + k];
                    for (std::size_t t = 0; t < Lo; ++t) yrow[t] += wv * xrow[t * S + k];
                }
            }
        });
        return y;
    }

    Tensor<T> backward(const Tensor<T>& gy, int threads) override {
        const std::size_t B = x_.dim(0), C = x_.dim(1), L = x_.dim(2);
        const std::size_t F = static_cast<std::size_t>(filters_);
        const std::size_t K = static_cast<std::size_t>(kernel_);
        const std::size_t S = static_cast<std::size_t>(stride_);
        const std::size_t Lo = gy.dim(2);

        // Each filter owns its weight/bias slice; accumulation over (b, t)
        // stays in a fixed order for any thread count.
        parallel_for(F, threads, [&](std::size_t f) {
            T* gwf = gw_.ptr() + f * C * K;
            T gbias = 0;
            for (std::size_t b = 0; b < B; ++b) {
                const T* grow = gy.ptr() + (b * F + f) * Lo;
                for (std::size_t t = 0; t < Lo; ++t) gbias += grow[t];
                for (std::size_t c = 0; c < C; ++c) {
                    const T* xrow = x_.ptr() + (b * C + c) * L;
                    for (std::size_t k = 0; k < K; ++k) {
                        T acc = 0;
                        for (std::size_t t = 0; t < Lo; ++t) acc += grow[t] * xrow[t * S + k];
                        gwf[c * K + k] += acc;
                    }
                }
            }
            gb_.data[f] += gbias;
        });

        Tensor<T> gx({B, C, L});
        parallel_for(B * C, threads, [&](std::size_t bc) {
            const std::size_t b = bc / C, c = bc % C;
            T* gxrow = gx.ptr() + (b * C + c) * L;
            for (std::size_t f = 0; f < F; ++f) {
                const T* grow = gy.ptr() + (b * F + f) * Lo;
                const T* wf = w_.ptr() + (f * C + c) * K;
                for (std::size_t t = 0; t < Lo; ++t) {
                    const T g = grow[t];
                    for (std::size_t k = 0; k < K; ++k) gxrow[t * S + k] += g * wf[k];
                }
            }
        });
        return gx;
    }

    void collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) override {
        out.push_back({prefix + ".w", &w_, &gw_});
        out.push_back({prefix + ".b", &b_, &gb_});
    }

    void zero_grad() override {
        gw_.fill(T(0));
        gb_.fill(T(0));
    }

private:
    int filters_, kernel_, stride_;
    std::size_t in_channels_ = 0;
    Tensor<T> w_, b_, gw_, gb_, x_;
};

template <typename T>
class ReluLayer : public Layer<T> {
public:
    std::string name() const override { return "relu"; }

    std::vector<std::size_t> output_shape(const std::vector<std::size_t>& in) const override {
        return in;
    }

    void init(const std::vector<std::size_t>&, Rng&) override {}

    Tensor<T> forward(const Tensor<T>& x, bool, Rng*, int threads) override {
        mask_.assign(x.size(), false);
        Tensor<T> y = x;
        parallel_for(x.size(), threads, [&](std::size_t i) {
            if (x.data[i] > T(0)) {
                mask_[i] = true;
            } else {
                y.data[i] = T(0);
            }
        });
        return y;
    }

    Tensor<T> backward(const Tensor<T>& gy, int threads) override {
        Tensor<T> gx = gy;
        parallel_for(gy.size(), threads, [&](std::size_t i) {
            if (!mask_[i]) gx.data[i] = T(0);
        });
        return gx;
    }

private:
    std::vector<char> mask_;
};

// Normalizes per channel over (batch, time) for [B, C, L] input and per
// feature over the batch for [B, F]. Batch statistics in training mode,
// running statistics in evaluation mode.
template <typename T>
class BatchNormLayer : public Layer<T> {
public:
    BatchNormLayer(double momentum, double eps) : momentum_(momentum), eps_(eps) {
        if (momentum <= 0.0 || momentum >= 1.0) throw ConfigError("batchnorm momentum in (0,1)");
        if (eps <= 0.0) throw ConfigError("batchnorm eps must be positive");
    }

    std::string name() const override { return "batchnorm"; }

    std::vector<std::size_t> output_shape(const std::vector<std::size_t>& in) const override {
        return in;
    }

    void init(const std::vector<std::size_t>& in_shape, Rng&) override {
        channels_ = in_shape[0];
        gamma_ = Tensor<T>({channels_});
        beta_ = Tensor<T>({channels_});
        ggamma_ = gamma_.zeros_like();
        gbeta_ = beta_.zeros_like();
        running_mean_ = Tensor<T>({channels_});
        running_var_ = Tensor<T>({channels_});
        gamma_.fill(T(1));
        running_var_.fill(T(1));
    }

    Tensor<T> forward(const Tensor<T>& x, bool training, Rng*, int threads) override {
        if (x.rank() != 2 && x.rank() != 3) throw ShapeError("batchnorm: rank 2 or 3 input");
        const std::size_t C = x.rank() == 3 ? x.dim(1) : x.dim(1);
        if (C != channels_) {
            throw ShapeError("batchnorm: expected " + std::to_string(channels_) +
                             " channels, got " + std::to_string(C));
        }
        x_shape_ = x.shape;
        const std::size_t B = x.dim(0);
        const std::size_t L = x.rank() == 3 ? x.dim(2) : 1;
        const std::size_t N = B * L;

        xhat_ = Tensor<T>(x.shape);
        inv_std_.assign(C, T(0));
        mean_.assign(C, T(0));
        Tensor<T> y(x.shape);

        parallel_for(C, threads, [&](std::size_t c) {
            T mean = 0, var = 0;
            if (training) {
                for (std::size_t b = 0; b < B; ++b) {
                    const T* row = x.ptr() + (b * C + c) * L;
                    for (std::size_t l = 0; l < L; ++l) mean += row[l];
                }
                mean /= static_cast<T>(N);
                for (std::size_t b = 0; b < B; ++b) {
                    const T* row = x.ptr() + (b * C + c) * L;
                    for (std::size_t l = 0; l < L; ++l) {
                        const T d = row[l] - mean;
                        var += d * d;
                    }
                }
                var /= static_cast<T>(N);
                running_mean_.data[c] = static_cast<T>((1.0 - momentum_) * running_mean_.data[c] +
                                                       momentum_ * mean);
                running_var_.data[c] = static_cast<T>((1.0 - momentum_) * running_var_.data[c] +
                                                      momentum_ * var);
            } else {
                mean = running_mean_.data[c];
                var = running_var_.data[c];
            }
            const T inv = T(1) / std::sqrt(var + static_cast<T>(eps_));
            mean_[c] = mean;
            inv_std_[c] = inv;
            const T g = gamma_.data[c], bt = beta_.data[c];
            for (std::size_t b = 0; b < B; ++b) {
                const T* row = x.ptr() + (b * C + c) * L;
                T* xh = xhat_.ptr() + (b * C + c) * L;
                T* yrow = y.ptr() + (b * C + c) * L;
                for (std::size_t l = 0; l < L; ++l) {
                    xh[l] = (row[l] - mean) * inv;
                    yrow[l] = g * xh[l] + bt;
                }
            }
        });
        return y;
    }

    Tensor<T> backward(const Tensor<T>& gy, int threads) override {
        const std::size_t B = x_shape_[0];
        const std::size_t C = channels_;
        const std::size_t L = x_shape_.size() == 3 ? x_shape_[2] : 1;
        const std::size_t N = B * L;

        Tensor<T> gx(x_shape_);
        parallel_for(C, threads, [&](std::size_t c) {
            T sum_g = 0, sum_gx = 0;
            for (std::size_t b = 0; b < B; ++b) {
                const T* grow = gy.ptr() + (b * C + c) * L;
                const T* xh = xhat_.ptr() + (b * C + c) * L;
                for (std::size_t l = 0; l < L; ++l) {
                    sum_g += grow[l];
                    sum_gx += grow[l] * xh[l];
                }
            }
            ggamma_.data[c] += sum_gx;
            gbeta_.data[c] += sum_g;
            const T scale = gamma_.data[c] * inv_std_[c] / static_cast<T>(N);
            for (std::size_t b = 0; b < B; ++b) {
                const T* grow = gy.ptr() + (b * C + c) * L;
                const T* xh = xhat_.ptr() + (b * C + c) * L;
                T* gxr = gx.ptr() + (b * C + c) * L;
                for (std::size_t l = 0; l < L; ++l) {
                    gxr[l] = scale * (static_cast<T>(N) * grow[l] - sum_g - xh[l] * sum_gx);
                }
            }
        });
        return gx;
    }

    void collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) override {
        out.push_back({prefix + ".gamma", &gamma_, &ggamma_});
        out.push_back({prefix + ".beta", &beta_, &gbeta_});
    }

    void collect_buffers(const std::string& prefix, std::vector<ParamRef<T>>& out) override {
        out.push_back({prefix + ".running_mean", &running_mean_, nullptr});
        out.push_back({prefix + ".running_var", &running_var_, nullptr});
    }

    void zero_grad() override {
        ggamma_.fill(T(0));
        gbeta_.fill(T(0));
    }

private:
    double momentum_, eps_;
    std::size_t channels_ = 0;
    Tensor<T> gamma_, beta_, ggamma_, gbeta_, running_mean_, running_var_, xhat_;
    std::vector<T> inv_std_, mean_;
    std::vector<std::size_t> x_shape_;
};

// Inverted dropout: training zeroes a rate fraction and scales survivors by
// 1/(1-rate); evaluation is the identity. Mask draws are serial so the
// stream does not depend on the thread count.
template <typename T>
class DropoutLayer : public Layer<T> {
public:
    explicit DropoutLayer(double rate) : rate_(rate) {
        if (rate < 0.0 || rate >= 1.0) throw ConfigError("dropout rate must be in [0, 1)");
    }

    std::string name() const override { return "dropout"; }

    std::vector<std::size_t> output_shape(const std::vector<std::size_t>& in) const override {
        return in;
    }

    void init(const std::vector<std::size_t>&, Rng&) override {}

    Tensor<T> forward(const Tensor<T>& x, bool training, Rng* rng, int threads) override {
        if (!training || rate_ == 0.0) {
            active_ = false;
            return x;
        }
        if (!rng) throw ConfigError("dropout in training mode needs an RNG");
        active_ = true;
        const T keep_scale = static_cast<T>(1.0 / (1.0 - rate_));
        mask_.assign(x.size(), T(0));
        for (std::size_t i = 0; i < x.size(); ++i) {
            if (rng->uniform() >= rate_) mask_[i] = keep_scale;
        }
        Tensor<T> y = x;
        parallel_for(x.size(), threads, [&](std::size_t i) { y.data[i] *= mask_[i]; });
        return y;
    }

    Tensor<T> backward(const Tensor<T>& gy, int threads) override {
        if (!active_) return gy;
        Tensor<T> gx = gy;
        parallel_for(gy.size(), threads, [&](std::size_t i) { gx.data[i] *= mask_[i]; });
        return gx;
    }

private:
    double rate_;
    bool active_ = false;
    std::vector<T> mask_;
};

// Fully connected. On [B, F] input: y = xW + b with W [F, U]. On [B, C, L]
// input the same map is applied at every time step, giving [B, U, L].
template <typename T>
class DenseLayer : public Layer<T> {
public:
    explicit DenseLayer(int units) : units_(units) {
        if (units < 1) throw ConfigError("dense needs units >= 1");
    }

    std::string name() const override { return "dense"; }

    std::vector<std::size_t> output_shape(const std::vector<std::size_t>& in) const override {
        if (in.size() == 1) return {static_cast<std::size_t>(units_)};
        if (in.size() == 2) return {static_cast<std::size_t>(units_), in[1]};
        throw ShapeError("dense: input must be [F] or [C, L], got " + shape_string(in));
    }

    void init(const std::vector<std::size_t>& in_shape, Rng& rng) override {
        in_features_ = in_shape[0];
        w_ = Tensor<T>({in_features_, static_cast<std::size_t>(units_)});
        b_ = Tensor<T>({static_cast<std::size_t>(units_)});
        gw_ = w_.zeros_like();
        gb_ = b_.zeros_like();
        detail::he_uniform(w_, in_features_, rng);
    }

    Tensor<T> forward(const Tensor<T>& x, bool, Rng*, int threads) override {
        if (x.rank() != 2 && x.rank() != 3) throw ShapeError("dense: rank 2 or 3 input");
        if (x.dim(1) != in_features_) {
            throw ShapeError("dense: expected " + std::to_string(in_features_) +
                             " input features, got " + std::to_string(x.dim(1)));
        }
        x_ = x;
        const std::size_t B = x.dim(0), F = in_features_, U = static_cast<std::size_t>(units_);
        const std::size_t L = x.rank() == 3 ? x.dim(2) : 1;

        Tensor<T> y(x.rank() == 3 ? std::vector<std::size_t>{B, U, L}
                                  : std::vector<std::size_t>{B, U});
        parallel_for(B, threads, [&](std::size_t b) {
            for (std::size_t l = 0; l < L; ++l) {
                T* yout = y.ptr() + (b * U) * L + l;
                for (std::size_t u = 0; u < U; ++u) {
                    T acc = b_.data[u];
                    for (std::size_t f = 0; f < F; ++f) {
                        acc += x.ptr()[(b * F + f) * L + l] * w_.data[f * U + u];
                    }
                    yout[u * L] = acc;
                }
            }
        });
        return y;
    }

    Tensor<T> backward(const Tensor<T>& gy, int threads) override {
        const std::size_t B = x_.dim(0), F = in_features_, U = static_cast<std::size_t>(units_);
        const std::size_t L = x_.rank() == 3 ? x_.dim(2) : 1;

        parallel_for(F, threads, [&](std::size_t f) {
            for (std::size_t u = 0; u < U; ++u) {
                T acc = 0;
                for (std::size_t b = 0; b < B; ++b) {
                    for (std::size_t l = 0; l < L; ++l) {
                        acc += x_.ptr()[(b * F + f) * L + l] * gy.ptr()[(b * U + u) * L + l];
                    }
                }
                gw_.data[f * U + u] += acc;
            }
        });
        for (std::size_t u = 0; u < U; ++u) {
            T acc = 0;
            for (std::size_t b = 0; b < B; ++b) {
                for (std::size_t l = 0; l < L; ++l) acc += gy.ptr()[(b * U + u) * L + l];
            }
            gb_.data[u] += acc;
        }

        Tensor<T> gx(x_.shape);
        parallel_for(B, threads, [&](std::size_t b) {
            for (std::size_t l = 0; l < L; ++l) {
                for (std::size_t f = 0; f < F; ++f) {
                    T acc = 0;
                    for (std::size_t u = 0; u < U; ++u) {
                        acc += gy.ptr()[(b * U + u) * L + l] * w_.data[f * U + u];
                    }
                    gx.ptr()[(b * F + f) * L + l] = acc;
                }
            }
        });
        return gx;
    }

    void collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) override {
        out.push_back({prefix + ".w", &w_, &gw_});
        out.push_back({prefix + ".b", &b_, &gb_});
    }

    void zero_grad() override {
        gw_.fill(T(0));
        gb_.fill(T(0));
    }

private:
    int units_;
    std::size_t in_features_ = 0;
    Tensor<T> w_, b_, gw_, gb_, x_;
};

// Single LSTM stack over the time axis of a [B, C, L] input. Gate order in
// the packed weights is input, forget, cell, output. Gradients run full
// backpropagation through time. Per-sample weight-gradient partials are
// reduced in sample order, so results do not depend on the thread count.
template <typename T>
class LstmLayer : public Layer<T> {
public:
    LstmLayer(int units, bool return_sequences)
        : units_(units), return_sequences_(return_sequences) {
        if (units < 1) throw ConfigError("lstm needs units >= 1");
    }

    std::string name() const override { return "lstm"; }

    std::vector<std::size_t> output_shape(const std::vector<std::size_t>& in) const override {
        if (in.size() != 2) throw ShapeError("lstm: input must be [C, L], got " + shape_string(in));
        const std::size_t H = static_cast<std::size_t>(units_);
        if (return_sequences_) return {H, in[1]};
        return {H};
    }

    void init(const std::vector<std::size_t>& in_shape, Rng& rng) override {
        in_features_ = in_shape[0];
        const std::size_t H = static_cast<std::size_t>(units_);
        wx_ = Tensor<T>({4 * H, in_features_});
        wh_ = Tensor<T>({4 * H, H});
        b_ = Tensor<T>({4 * H});
        gwx_ = wx_.zeros_like();
        gwh_ = wh_.zeros_like();
        gb_ = b_.zeros_like();
        detail::glorot_uniform(wx_, in_features_, 4 * H, rng);
        detail::glorot_uniform(wh_, H, 4 * H, rng);
        for (std::size_t h = 0; h < H; ++h) b_.data[H + h] = T(1);  // forget gate bias
    }

    Tensor<T> forward(const Tensor<T>& x, bool, Rng*, int threads) override {
        require_rank(x, 3, "lstm");
        if (x.dim(1) != in_features_) {
            throw ShapeError("lstm: expected " + std::to_string(in_features_) +
                             " input features, got " + std::to_string(x.dim(1)));
        }
        x_ = x;
        const std::size_t B = x.dim(0), L = x.dim(2);
        const std::size_t H = static_cast<std::size_t>(units_);

        gates_ = Tensor<T>({B, L, 4 * H});  // post-activation gate values
        cells_ = Tensor<T>({B, L, H});
        hidden_ = Tensor<T>({B, L, H});

        Tensor<T> y(return_sequences_ ? std::vector<std::size_t>{B, H, L}
                                      : std::vector<std::size_t>{B, H});
        parallel_for(B, threads, [&](std::size_t b) {
            std::vector<T> h_prev(H, T(0)), c_prev(H, T(0)), z(4 * H);
            for (std::size_t t = 0; t < L; ++t) {
                for (std::size_t r = 0; r < 4 * H; ++r) {
                    T acc = b_.data[r];
                    const T* wxr = wx_.ptr() + r * in_features_;
                    for (std::size_t f = 0; f < in_features_; ++f) {
                        acc += wxr[f] * x.ptr()[(b * in_features_ + f) * L + t];
                    }
                    const T* whr = wh_.ptr() + r * H;
                    for (std::size_t h = 0; h < H; ++h) acc += whr[h] * h_prev[h];
                    z[r] = acc;
                }
                T* gate = gates_.ptr() + (b * L + t) * 4 * H;
                T* cell = cells_.ptr() + (b * L + t) * H;
                T* hid = hidden_.ptr() + (b * L + t) * H;
                for (std::size_t h = 0; h < H; ++h) {
                    const T ig = detail::sigmoid(z[h]);
                    const T fg = detail::sigmoid(z[H + h]);
                    const T gg = std::tanh(z[2 * H + h]);
                    const T og = detail::sigmoid(z[3 * H + h]);
                    gate[h] = ig;
                    gate[H + h] = fg;
                    gate[2 * H + h] = gg;
                    gate[3 * H + h] = og;
                    const T c = fg * c_prev[h] + ig * gg;
                    cell[h] = c;
                    hid[h] = og * std::tanh(c);
                }
                std::copy(cell, cell + H, c_prev.begin());
                std::copy(hid, hid + H, h_prev.begin());
            }
            if (return_sequences_) {
                for (std::size_t t = 0; t < L; ++t) {
                    const T* hid = hidden_.ptr() + (b * L + t) * H;
                    for (std::size_t h = 0; h < H; ++h) y.ptr()[(b * H + h) * L + t] = hid[h];
                }
            } else {
                const T* hid = hidden_.ptr() + (b * L + (L - 1)) * H;
                for (std::size_t h = 0; h < H; ++h) y.ptr()[b * H + h] = hid[h];
            }
        });
        return y;
    }

    Tensor<T> backward(const Tensor<T>& gy, int threads) override {
        const std::size_t B = x_.dim(0), L = x_.dim(2);
        const std::size_t H = static_cast<std::size_t>(units_);
        const std::size_t F = in_features_;

        Tensor<T> gx({B, F, L});
        std::vector<Tensor<T>> pwx(B), pwh(B), pb(B);
        parallel_for(B, threads, [&](std::size_t b) {
            pwx[b] = gwx_.zeros_like();
            pwh[b] = gwh_.zeros_like();
            pb[b] = gb_.zeros_like();
            std::vector<T> dh(H, T(0)), dc(H, T(0)), dz(4 * H);
            for (std::size_t t = L; t-- > 0;) {
                const T* gate = gates_.ptr() + (b * L + t) * 4 * H;
                const T* cell = cells_.ptr() + (b * L + t) * H;
                const T* c_prev = t > 0 ? cells_.ptr() + (b * L + t - 1) * H : nullptr;
                const T* h_prev = t > 0 ? hidden_.ptr() + (b * L + t - 1) * H : nullptr;

                for (std::size_t h = 0; h < H; ++h) {
                    T up = 0;
                    if (return_sequences_) {
                        up = gy.ptr()[(b * H + h) * L + t];
                    } else if (t == L - 1) {
                        up = gy.ptr()[b * H + h];
                    }
                    dh[h] += up;

                    const T ig = gate[h], fg = gate[H + h], gg = gate[2 * H + h],
                            og = gate[3 * H + h];
                    const T tc = std::tanh(cell[h]);
                    const T dci = dh[h] * og * (T(1) - tc * tc) + dc[h];
                    const T cp = t > 0 ? c_prev[h] : T(0);

                    dz[h] = dci * gg * ig * (T(1) - ig);
                    dz[H + h] = dci * cp * fg * (T(1) - fg);
                    dz[2 * H + h] = dci * ig * (T(1) - gg * gg);
                    dz[3 * H + h] = dh[h] * tc * og * (T(1) - og);
                    dc[h] = dci * fg;
                }

                for (std::size_t r = 0; r < 4 * H; ++r) {
                    const T d = dz[r];
                    pb[b].data[r] += d;
                    T* gwxr = pwx[b].ptr() + r * F;
                    for (std::size_t f = 0; f < F; ++f) {
                        gwxr[f] += d * x_.ptr()[(b * F + f) * L + t];
                    }
                    if (t > 0) {
                        T* gwhr = pwh[b].ptr() + r * H;
                        for (std::size_t h = 0; h < H; ++h) gwhr[h] += d * h_prev[h];
                    }
                }
                for (std::size_t f = 0; f < F; ++f) {
                    T acc = 0;
                    for (std::size_t r = 0; r < 4 * H; ++r) acc += wx_.ptr()[r * F + f] * dz[r];
                    gx.ptr()[(b * F + f) * L + t] = acc;
                }
                for (std::size_t h = 0; h < H; ++h) {
                    T acc = 0;
                    for (std::size_t r = 0; r < 4 * H; ++r) acc += wh_.ptr()[r * H + h] * dz[r];
                    dh[h] = acc;
                }
            }
        });
        for (std::size_t b = 0; b < B; ++b) {
            for (std::size_t i = 0; i < gwx_.size(); ++i) gwx_.data[i] += pwx[b].data[i];
            for (std::size_t i = 0; i < gwh_.size(); ++i) gwh_.data[i] += pwh[b].data[i];
            for (std::size_t i = 0; i < gb_.size(); ++i) gb_.data[i] += pb[b].data[i];
        }
        return gx;
    }

    void collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) override {
        out.push_back({prefix + ".wx", &wx_, &gwx_});
        out.push_back({prefix + ".wh", &wh_, &gwh_});
        out.push_back({prefix + ".b", &b_, &gb_});
    }

    void zero_grad() override {
        gwx_.fill(T(0));
        gwh_.fill(T(0));
        gb_.fill(T(0));
    }

private:
    int units_;
    bool return_sequences_;
    std::size_t in_features_ = 0;
    Tensor<T> wx_, wh_, b_, gwx_, gwh_, gb_;
    Tensor<T> x_, gates_, cells_, hidden_;
};

template <typename T>
class FlattenLayer : public Layer<T> {
public:
    std::string name() const override { return "flatten"; }

    std::vector<std::size_t> output_shape(const std::vector<std::size_t>& in) const override {
        std::size_t n = 1;
        for (auto d : in) n *= d;
        return {n};
    }

    void init(const std::vector<std::size_t>&, Rng&) override {}

    Tensor<T> forward(const Tensor<T>& x, bool, Rng*, int) override {
        in_shape_ = x.shape;
        Tensor<T> y;
        y.shape = {x.dim(0), x.size() / x.dim(0)};
        y.data = x.data;
        return y;
    }

    Tensor<T> backward(const Tensor<T>& gy, int) override {
        Tensor<T> gx;
        gx.shape = in_shape_;
        gx.data = gy.data;
        return gx;
    }

private:
    std::vector<std::size_t> in_shape_;
};

// Row softmax over [B, K]. backward() handles the general Jacobian; the
// trainer normally bypasses it with the fused cross-entropy gradient.
template <typename T>
class SoftmaxLayer : public Layer<T> {
public:
    std::string name() const override { return "softmax"; }

    std::vector<std::size_t> output_shape(const std::vector<std::size_t>& in) const override {
        if (in.size() != 1) throw ShapeError("softmax: input must be [K], got " + shape_string(in));
        return in;
    }

    void init(const std::vector<std::size_t>&, Rng&) override {}

    Tensor<T> forward(const Tensor<T>& x, bool, Rng*, int threads) override {
        require_rank(x, 2, "softmax");
        const std::size_t B = x.dim(0), K = x.dim(1);
        Tensor<T> y(x.shape);
        parallel_for(B, threads, [&](std::size_t b) {
            const T* row = x.ptr() + b * K;
            T* out = y.ptr() + b * K;
            T mx = row[0];
            for (std::size_t k = 1; k < K; ++k) mx = std::max(mx, row[k]);
            T sum = 0;
            for (std::size_t k = 0; k < K; ++k) {
                out[k] = std::exp(row[k] - mx);
                sum += out[k];
            }
            for (std::size_t k = 0; k < K; ++k) out[k] /= sum;
        });
        y_ = y;
        return y;
    }

    Tensor<T> backward(const Tensor<T>& gy, int threads) override {
        const std::size_t B = y_.dim(0), K = y_.dim(1);
        Tensor<T> gx(y_.shape);
        parallel_for(B, threads, [&](std::size_t b) {
            const T* y = y_.ptr() + b * K;
            const T* g = gy.ptr() + b * K;
            T dot = 0;
            for (std::size_t k = 0; k < K; ++k) dot += g[k] * y[k];
            for (std::size_t k = 0; k < K; ++k) gx.ptr()[b * K + k] = y[k] * (g[k] - dot);
        });
        return gx;
    }

private:
    Tensor<T> y_;
};

}  // namespace ser::nn
