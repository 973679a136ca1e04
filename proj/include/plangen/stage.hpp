#pragma once

// The seven instruction stages and stage sequences (content plans).

#include <array>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace plangen {

enum class StageLabel : int {
    PreProcessing = 0,
    Mixing = 1,
    Transferring = 2,
    Cooking = 3,
    PostProcessing = 4,
    Final = 5,
    General = 6,
};

inline constexpr int kNumStages = 7;
inline constexpr int kMaxPlanLength = 15;

using ContentPlan = std::vector<StageLabel>;

inline const std::array<std::string, kNumStages>& stage_names() {
    static const std::array<std::string, kNumStages> names = {
        "pre_processing", "mixing", "transferring", "cooking",
        "post_processing", "final", "general"};
    return names;
}

inline const std::string& to_string(StageLabel s) {
    return stage_names()[static_cast<int>(s)];
}

inline StageLabel stage_from_string(std::string_view name) {
    const auto& names = stage_names();
    for (int i = 0; i < kNumStages; ++i)
        if (names[i] == name) return static_cast<StageLabel>(i);
    throw std::invalid_argument("unknown stage label: " + std::string(name));
}

inline int stage_index(StageLabel s) { return static_cast<int>(s); }

}  // namespace plangen
