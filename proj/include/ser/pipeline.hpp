#pragma once

#include <filesystem>
#include <string>

#include "ser/dsp.hpp"
#include "ser/manifest.hpp"
#include "ser/nn/arch.hpp"
#include "ser/nn/tensor.hpp"
#include "ser/wav.hpp"

namespace ser {

// Every path in the system operates at one rate; files are resampled on load.
inline constexpr int kCanonicalRate = 16000;

// parse + resample to the canonical rate.
Waveform load_canonical_wav(const std::filesystem::path& path);

// Manifest entries may hold relative paths; they resolve against the
// manifest's own directory.
std::filesystem::path resolve_entry_path(const std::filesystem::path& base_dir,
                                         const std::string& entry_path);

FeatureMatrix extract_features(const Waveform& w, FeatureKind kind);

// [coeffs, frames] tensor for the network input (features are channels,
// frames are time).
nn::Tensor<float> feature_tensor(const FeatureMatrix& fm);

// normalize -> fix_length(seconds) -> [1, L] tensor.
nn::Tensor<float> raw_tensor(const Waveform& w, double seconds);

// Network input tensor for an architecture's input kind.
nn::Tensor<float> input_tensor_for(const Waveform& w, const nn::InputSpec& input);

}  // namespace ser
