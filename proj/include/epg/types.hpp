#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace epg {

inline constexpr int kSampleRateHz = 512;
inline constexpr int kSegmentSeconds = 5;
inline constexpr int kSegmentLength = kSampleRateHz * kSegmentSeconds;  // 2560
inline constexpr int kNumClasses = 3;

enum class Phase : std::uint8_t { Baseline = 0, EarlyEPG = 1, LateEPG = 2, Unlabeled = 3 };
enum class Group : std::uint8_t { PPS = 0, Control = 1 };

// Class labels share the numeric values of the first three phases.
using Label = Phase;

inline constexpr std::array<Phase, 3> kClasses{Phase::Baseline, Phase::EarlyEPG, Phase::LateEPG};

std::string_view to_string(Phase p);
std::string_view to_string(Group g);
std::optional<Phase> parse_phase(std::string_view s);
std::optional<Group> parse_group(std::string_view s);

inline int class_index(Phase p) { return static_cast<int>(p); }
inline bool is_class(Phase p) { return p != Phase::Unlabeled; }

}  // namespace epg
