#pragma once

#include <filesystem>
#include <utility>
#include <vector>

#include <json.hpp>

namespace ser {

// Shared model container: magic "SERM", u32 version, u32 header length,
// JSON header bytes, then length-prefixed little-endian float32 blobs.
// The header's "tensors" (or model-specific) section gives the blobs
// meaning; this layer only moves bytes.
inline constexpr std::uint32_t kSermVersion = 1;

void write_serm(const std::filesystem::path& path, const nlohmann::json& header,
                const std::vector<std::vector<float>>& blobs);

std::pair<nlohmann::json, std::vector<std::vector<float>>> read_serm(
    const std::filesystem::path& path);

}  // namespace ser
