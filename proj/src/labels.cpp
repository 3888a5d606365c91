#include "ser/labels.hpp"

#include "ser/errors.hpp"

namespace ser {

std::string_view emotion_name(int id) {
    if (id < 0 || id >= kNumEmotions) {
        throw LabelError("emotion id out of range: " + std::to_string(id));
    }
    return kEmotionNames[static_cast<std::size_t>(id)];
}

std::optional<int> emotion_id(std::string_view name) {
    for (int i = 0; i < kNumEmotions; ++i) {
        if (kEmotionNames[static_cast<std::size_t>(i)] == name) return i;
    }
    return std::nullopt;
}

}  // namespace ser
