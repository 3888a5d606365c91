#pragma once

#include <filesystem>

#include "ser/dsp.hpp"

namespace ser {

// Binary feature container: magic "SERF", u32 version, u32 kind
// (0 = logmel, 1 = mfcc), u32 frames, u32 coeffs, then frames*coeffs
// float32 values, row-major, little-endian.
inline constexpr std::uint32_t kSerfVersion = 1;

void write_feature_file(const std::filesystem::path& path, const FeatureMatrix& fm);
FeatureMatrix read_feature_file(const std::filesystem::path& path);

// Human-readable dump, one frame per row.
void export_feature_csv(const std::filesystem::path& path, const FeatureMatrix& fm);

}  // namespace ser
