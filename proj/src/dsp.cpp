#include "ser/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include "ser/errors.hpp"

namespace ser {

namespace {

constexpr double kPi = std::numbers::pi;

bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

// Iterative radix-2 Cooley-Tukey, in place.
void fft_radix2(std::vector<std::complex<double>>& a) {
    const std::size_t n = a.size();
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = -2.0 * kPi / static_cast<double>(len);
        const std::complex<double> wlen(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                std::complex<double> u = a[i + k];
                std::complex<double> v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wlen;
            }
        }
    }
}

FeatureMatrix log_mel_frames(const Waveform& fixed, const StftConfig& stft, const MelConfig& mel) {
    const int sr = fixed.sample_rate;
    const int win = stft.win_length(sr);
    const int hop = stft.hop_length(sr);
    if (hop > win) throw ConfigError("hop length exceeds window length");
    if (win > stft.n_fft) throw ConfigError("window length exceeds n_fft");
    if (static_cast<std::size_t>(win) > fixed.samples.size()) {
        throw ConfigError("signal shorter than one analysis window");
    }

    const auto window = hamming(win);
    const auto bank = mel_filterbank(mel, stft.n_fft, sr);
    const std::size_t n_frames = stft_frame_count(fixed.samples.size(), win, hop);
    const std::size_t n_mels = bank.size();

    FeatureMatrix fm;
    fm.frames = n_frames;
    fm.coeffs = n_mels;
    fm.values.resize(n_frames * n_mels);
    fm.frame_rate = 1.0 / stft.hop_seconds;
    fm.kind = FeatureKind::logmel;

    std::vector<double> frame(static_cast<std::size_t>(win));
    for (std::size_t t = 0; t < n_frames; ++t) {
        const std::size_t start = t * static_cast<std::size_t>(hop);
        for (int i = 0; i < win; ++i) {
            frame[static_cast<std::size_t>(i)] =
                static_cast<double>(fixed.samples[start + static_cast<std::size_t>(i)]) *
                window[static_cast<std::size_t>(i)];
        }
        const auto power = power_spectrum(frame, stft.n_fft);
        for (std::size_t m = 0; m < n_mels; ++m) {
            double acc = 0.0;
            const auto& row = bank[m];
            for (std::size_t k = 0; k < row.size(); ++k) acc += row[k] * power[k];
            fm.at(t, m) = std::log(acc + mel.log_floor);
        }
    }
    return fm;
}

}  // namespace

int StftConfig::win_length(int sample_rate) const {
    return static_cast<int>(std::lround(win_seconds * sample_rate));
}

int StftConfig::hop_length(int sample_rate) const {
    return static_cast<int>(std::lround(hop_seconds * sample_rate));
}

std::string feature_kind_name(FeatureKind kind) {
    return kind == FeatureKind::logmel ? "logmel" : "mfcc";
}

FeatureKind feature_kind_from_name(const std::string& name) {
    if (name == "logmel") return FeatureKind::logmel;
    if (name == "mfcc") return FeatureKind::mfcc;
    throw ConfigError("unknown feature kind '" + name + "'");
}

Waveform normalize_zscore(const Waveform& w, double eps) {
    if (w.samples.empty()) throw ConfigError("cannot normalize an empty waveform");
    const std::size_t n = w.samples.size();
    double mean = 0.0;
    for (float s : w.samples) mean += s;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (float s : w.samples) {
        const double d = s - mean;
        var += d * d;
    }
    var /= static_cast<double>(n);

    Waveform out;
    out.sample_rate = w.sample_rate;
    out.samples.resize(n);
    if (var <= eps) {
        for (std::size_t i = 0; i < n; ++i) out.samples[i] = static_cast<float>(w.samples[i] - mean);
    } else {
        const double inv_std = 1.0 / std::sqrt(var);
        for (std::size_t i = 0; i < n; ++i) {
            out.samples[i] = static_cast<float>((w.samples[i] - mean) * inv_std);
        }
    }
    return out;
}

Waveform fix_length(const Waveform& w, const PreprocessConfig& cfg) {
    if (w.samples.empty()) throw ConfigError("cannot fix the length of an empty waveform");
    const std::size_t target =
        static_cast<std::size_t>(std::llround(cfg.target_seconds * cfg.sample_rate));
    Waveform out;
    out.sample_rate = w.sample_rate;
    out.samples = w.samples;
    out.samples.resize(target, 0.0f);  // truncates from the front-aligned start or zero-pads
    return out;
}

std::vector<double> hamming(int n) {
    if (n < 2) throw ConfigError("hamming window needs n >= 2");
    std::vector<double> w(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
        w[static_cast<std::size_t>(k)] = 0.54 - 0.46 * std::cos(2.0 * kPi * k / (n - 1));
    }
    return w;
}

std::vector<double> power_spectrum(const std::vector<double>& frame, int n_fft) {
    if (!is_pow2(n_fft)) throw ConfigError("n_fft must be a power of two");
    if (frame.size() > static_cast<std::size_t>(n_fft)) {
        throw ConfigError("frame longer than n_fft");
    }
    std::vector<std::complex<double>> a(static_cast<std::size_t>(n_fft));
    for (std::size_t i = 0; i < frame.size(); ++i) a[i] = frame[i];
    fft_radix2(a);

    std::vector<double> power(static_cast<std::size_t>(n_fft / 2 + 1));
    for (std::size_t k = 0; k < power.size(); ++k) power[k] = std::norm(a[k]);
    return power;
}

double mel_scale(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_inverse(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

std::vector<std::vector<double>> mel_filterbank(const MelConfig& cfg, int n_fft, int sample_rate) {
    if (cfg.n_mels < 1) throw ConfigError("n_mels must be >= 1");
    const double f_max = cfg.f_max > 0.0 ? cfg.f_max : sample_rate / 2.0;
    if (!(cfg.f_min < f_max) || f_max > sample_rate / 2.0 + 1e-9) {
        throw ConfigError("mel band edges must satisfy f_min < f_max <= sample_rate/2");
    }

    const int n_bins = n_fft / 2 + 1;
    const double mel_lo = mel_scale(cfg.f_min);
    const double mel_hi = mel_scale(f_max);

    // n_mels + 2 edge points, equally spaced on the mel axis.
    std::vector<double> edges_hz(static_cast<std::size_t>(cfg.n_mels) + 2);
    for (std::size_t i = 0; i < edges_hz.size(); ++i) {
        const double mel = mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) /
                                        static_cast<double>(cfg.n_mels + 1);
        edges_hz[i] = mel_inverse(mel);
    }

    std::vector<std::vector<double>> bank(static_cast<std::size_t>(cfg.n_mels),
                                          std::vector<double>(static_cast<std::size_t>(n_bins), 0.0));
    for (int m = 0; m < cfg.n_mels; ++m) {
        const double left = edges_hz[static_cast<std::size_t>(m)];
        const double center = edges_hz[static_cast<std::size_t>(m) + 1];
        const double right = edges_hz[static_cast<std::size_t>(m) + 2];
        bool any = false;
        for (int k = 0; k < n_bins; ++k) {
            const double f = static_cast<double>(k) * sample_rate / n_fft;
            double v = 0.0;
            if (f > left && f < right) {
                v = f <= center ? (f - left) / (center - left) : (right - f) / (right - center);
            }
            if (v > 0.0) any = true;
            bank[static_cast<std::size_t>(m)][static_cast<std::size_t>(k)] = v;
        }
        if (!any) {
            throw ConfigError("mel filter " + std::to_string(m) +
                              " covers no FFT bin; reduce n_mels or raise n_fft");
        }
    }
    return bank;
}

std::vector<double> dct2_ortho(const std::vector<double>& x, int n_out) {
    const int n = static_cast<int>(x.size());
    if (n_out > n) throw ConfigError("dct2_ortho: n_out exceeds input length");
    std::vector<double> out(static_cast<std::size_t>(n_out));
    const double scale0 = std::sqrt(1.0 / n);
    const double scale = std::sqrt(2.0 / n);
    for (int k = 0; k < n_out; ++k) {
        double acc = 0.0;
        for (int i = 0; i < n; ++i) {
            acc += x[static_cast<std::size_t>(i)] * std::cos(kPi * (i + 0.5) * k / n);
        }
        out[static_cast<std::size_t>(k)] = acc * (k == 0 ? scale0 : scale);
    }
    return out;
}

FeatureMatrix log_mel_spectrogram(const Waveform& w, const PreprocessConfig& pre,
                                  const StftConfig& stft, const MelConfig& mel) {
    Waveform fixed = fix_length(normalize_zscore(w, pre.epsilon), pre);
    return log_mel_frames(fixed, stft, mel);
}

FeatureMatrix mfcc(const Waveform& w, const MfccConfig& cfg, const StftConfig& stft) {
    if (cfg.n_mfcc > cfg.mel.n_mels) throw ConfigError("n_mfcc must be <= n_mels");
    PreprocessConfig pre;
    pre.target_seconds = cfg.clip_seconds;
    pre.sample_rate = w.sample_rate;
    Waveform fixed = fix_length(normalize_zscore(w, pre.epsilon), pre);
    FeatureMatrix mels = log_mel_frames(fixed, stft, cfg.mel);

    FeatureMatrix fm;
    fm.frames = mels.frames;
    fm.coeffs = static_cast<std::size_t>(cfg.n_mfcc);
    fm.values.resize(fm.frames * fm.coeffs);
    fm.frame_rate = mels.frame_rate;
    fm.kind = FeatureKind::mfcc;

    std::vector<double> row(mels.coeffs);
    for (std::size_t t = 0; t < mels.frames; ++t) {
        for (std::size_t m = 0; m < mels.coeffs; ++m) row[m] = mels.at(t, m);
        const auto coefs = dct2_ortho(row, cfg.n_mfcc);
        for (std::size_t k = 0; k < fm.coeffs; ++k) fm.at(t, k) = coefs[k];
    }
    return fm;
}

std::vector<double> summarize_mean(const FeatureMatrix& fm) {
    if (fm.frames == 0) throw ConfigError("cannot summarize an empty feature matrix");
    std::vector<double> mean(fm.coeffs, 0.0);
    for (std::size_t t = 0; t < fm.frames; ++t) {
        for (std::size_t c = 0; c < fm.coeffs; ++c) mean[c] += fm.at(t, c);
    }
    for (auto& v : mean) v /= static_cast<double>(fm.frames);
    return mean;
}

std::size_t stft_frame_count(std::size_t len, int win, int hop) {
    if (len < static_cast<std::size_t>(win)) return 0;
    return (len - static_cast<std::size_t>(win)) / static_cast<std::size_t>(hop) + 1;
}

}  // namespace ser
