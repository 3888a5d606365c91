#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace ser {

// Mono audio signal. Amplitudes are dimensionless, nominally in [-1, 1].
struct Waveform {
    std::vector<float> samples;
    int sample_rate = 0;  // Hz, > 0

    double seconds() const {
        return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
    }
};

// Decodes RIFF/WAVE, PCM 16-bit or IEEE float 32-bit, 1 or 2 channels.
// Stereo is averaged to mono; 16-bit samples are scaled by 1/32768.
// Throws ParseError on a malformed stream, UnsupportedFormat on anything
// that is valid WAV but outside those codecs.
Waveform parse_wav(std::span<const std::uint8_t> bytes);

Waveform load_wav(const std::filesystem::path& path);

// Encodes as mono PCM 16-bit, rounding to nearest and clamping to the
// int16 range; parse_wav(encode_wav_pcm16(w)) is within 1 LSB of w.
std::vector<std::uint8_t> encode_wav_pcm16(const Waveform& w);

void save_wav_pcm16(const std::filesystem::path& path, const Waveform& w);

// Linear-interpolation resampler. Output length is
// round(len * target_rate / sample_rate); endpoints clamp.
Waveform resample_linear(const Waveform& w, int target_rate);

}  // namespace ser
