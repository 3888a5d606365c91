#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

namespace ser {

// Canonical emotion ids shared by every corpus, in the fixed order
// neutral, happy, angry, surprised, sad, disgust, fear, bored.
inline constexpr int kNumEmotions = 8;

constexpr std::array<std::string_view, kNumEmotions> kEmotionNames = {
    "neutral", "happy", "angry", "surprised", "sad", "disgust", "fear", "bored",
};

// Throws LabelError for ids outside [0, kNumEmotions).
std::string_view emotion_name(int id);

std::optional<int> emotion_id(std::string_view name);

struct EmotionLabel {
    int id = 0;
    std::string_view name() const { return emotion_name(id); }
    friend bool operator==(const EmotionLabel&, const EmotionLabel&) = default;
};

}  // namespace ser
