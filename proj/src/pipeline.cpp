#include "ser/pipeline.hpp"

namespace ser {

Waveform load_canonical_wav(const std::filesystem::path& path) {
    return resample_linear(load_wav(path), kCanonicalRate);
}

std::filesystem::path resolve_entry_path(const std::filesystem::path& base_dir,
                                         const std::string& entry_path) {
    std::filesystem::path p(entry_path);
    if (p.is_absolute() || base_dir.empty()) return p;
    return base_dir / p;
}

FeatureMatrix extract_features(const Waveform& w, FeatureKind kind) {
    // frame arithmetic assumes the canonical rate; resampling is a no-op
    // for audio that already went through load_canonical_wav
    const Waveform canonical = resample_linear(w, kCanonicalRate);
    StftConfig stft;
    if (kind == FeatureKind::mfcc) {
        MfccConfig cfg;
        return mfcc(canonical, cfg, stft);
    }
    PreprocessConfig pre;
    MelConfig mel;
    return log_mel_spectrogram(canonical, pre, stft, mel);
}

nn::Tensor<float> feature_tensor(const FeatureMatrix& fm) {
    nn::Tensor<float> t({fm.coeffs, fm.frames});
    for (std::size_t frame = 0; frame < fm.frames; ++frame) {
        for (std::size_t c = 0; c < fm.coeffs; ++c) {
            t.data[c * fm.frames + frame] = static_cast<float>(fm.at(frame, c));
        }
    }
    return t;
}

nn::Tensor<float> raw_tensor(const Waveform& w, double seconds) {
    PreprocessConfig pre;
    pre.target_seconds = seconds;
    pre.sample_rate = w.sample_rate;
    Waveform fixed = fix_length(normalize_zscore(w, pre.epsilon), pre);
    nn::Tensor<float> t({1, fixed.samples.size()});
    std::copy(fixed.samples.begin(), fixed.samples.end(), t.data.begin());
    return t;
}

nn::Tensor<float> input_tensor_for(const Waveform& w, const nn::InputSpec& input) {
    switch (input.kind) {
        case nn::InputSpec::Kind::raw:
            return raw_tensor(w, input.seconds);
        case nn::InputSpec::Kind::mfcc:
            return feature_tensor(extract_features(w, FeatureKind::mfcc));
        case nn::InputSpec::Kind::logmel:
            return feature_tensor(extract_features(w, FeatureKind::logmel));
    }
    throw ConfigError("unknown input kind");
}

}  // namespace ser
