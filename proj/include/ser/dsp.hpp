#pragma once

#include <string>
#include <vector>

#include "ser/wav.hpp"

namespace ser {

struct PreprocessConfig {
    double target_seconds = 6.0;
    int sample_rate = 16000;
    double epsilon = 1e-12;  // variance floor for z-score normalization
};

struct StftConfig {
    int n_fft = 1024;  // power of two
    double win_seconds = 0.025;
    double hop_seconds = 0.010;

    int win_length(int sample_rate) const;
    int hop_length(int sample_rate) const;
};

struct MelConfig {
    int n_mels = 128;
    double f_min = 0.0;
    double f_max = 0.0;  // 0 means sample_rate / 2
    double log_floor = 1e-10;
};

struct MfccConfig {
    int n_mfcc = 40;
    double clip_seconds = 2.5;
    MelConfig mel;
};

enum class FeatureKind { logmel, mfcc };

std::string feature_kind_name(FeatureKind kind);
FeatureKind feature_kind_from_name(const std::string& name);

// frames x coefficients matrix produced by a frontend.
struct FeatureMatrix {
    std::size_t frames = 0;
    std::size_t coeffs = 0;
    std::vector<double> values;  // row-major, frames rows
    double frame_rate = 0.0;     // frames per second
    FeatureKind kind = FeatureKind::logmel;

    double at(std::size_t frame, std::size_t coeff) const {
        return values[frame * coeffs + coeff];
    }
    double& at(std::size_t frame, std::size_t coeff) { return values[frame * coeffs + coeff]; }
};

// Mean 0, variance 1 (population variance). If the input variance is at or
// below eps the result is just the mean-subtracted signal.
Waveform normalize_zscore(const Waveform& w, double eps = 1e-12);

// Clip to round(target_seconds * sample_rate) samples keeping the front,
// or zero-pad at the end.
Waveform fix_length(const Waveform& w, const PreprocessConfig& cfg);

// w[k] = 0.54 - 0.46 cos(2 pi k / (n - 1)); needs n >= 2.
std::vector<double> hamming(int n);

// |DFT_k|^2 for k = 0..n_fft/2 via an in-house radix-2 FFT. The frame is
// zero-padded to n_fft; n_fft must be a power of two >= frame length.
std::vector<double> power_spectrum(const std::vector<double>& frame, int n_fft);

// HTK mel scale.
double mel_scale(double hz);
double mel_inverse(double mel);

// Triangular filters, n_mels x (n_fft/2 + 1), centers equally spaced on the
// mel axis. Throws ConfigError if any filter covers no FFT bin.
std::vector<std::vector<double>> mel_filterbank(const MelConfig& cfg, int n_fft, int sample_rate);

// Orthonormal DCT-II, first n_out coefficients.
std::vector<double> dct2_ortho(const std::vector<double>& x, int n_out);

// normalize -> fix_length -> frame/window -> power spectrum -> mel filter
// -> log(x + log_floor).
FeatureMatrix log_mel_spectrogram(const Waveform& w, const PreprocessConfig& pre,
                                  const StftConfig& stft, const MelConfig& mel);

// Same front half clipped to cfg.clip_seconds, then DCT per frame keeping
// the first n_mfcc coefficients.
FeatureMatrix mfcc(const Waveform& w, const MfccConfig& cfg, const StftConfig& stft);

// Per-coefficient mean over frames; the fixed-length vector the classical
// models consume.
std::vector<double> summarize_mean(const FeatureMatrix& fm);

// Frame count of the sliding window: floor((len - win) / hop) + 1.
std::size_t stft_frame_count(std::size_t len, int win, int hop);

}  // namespace ser
