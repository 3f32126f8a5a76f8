#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "epg/types.hpp"

namespace epg {

struct PhaseMark {
    double timestamp_s = 0.0;
    Phase phase = Phase::Unlabeled;

    bool operator==(const PhaseMark&) const = default;
};

// A continuous single-channel recording. Missing samples are quiet-NaN.
struct Recording {
    std::string subject_id;
    Group group = Group::PPS;
    int sample_rate_hz = kSampleRateHz;
    std::vector<float> samples;
    std::vector<PhaseMark> phase_marks;

    double duration_s() const { return static_cast<double>(samples.size()) / sample_rate_hz; }
    // Phase covering time t: the last mark at or before t.
    Phase phase_at(double t) const;
    // Throws ValidationError if an invariant is violated.
    void validate() const;
};

struct Segment {
    std::vector<float> values;  // kSegmentLength samples
    Label label = Label::Baseline;
    std::string subject_id;
    double start_time_s = 0.0;
};

// Bitwise equality (NaN payloads included).
bool bitwise_equal(const Segment& a, const Segment& b);

inline constexpr std::uint16_t kStoreVersion = 1;
inline constexpr std::size_t kStoreHeaderBytes = 32;

// Segment store: "EPGS" | version u16 | sample_rate u16 | segment_length u32 |
// segment_count u64 | 12 reserved zero bytes, then per segment:
// subject_id (u8 length + UTF-8) | label u8 | start_time_s f64 | values f32.
// All fields little-endian.
std::vector<unsigned char> encode_store(std::span<const Segment> segments);
std::vector<Segment> decode_store(std::span<const unsigned char> bytes);

void write_store(std::span<const Segment> segments, const std::string& path);
std::vector<Segment> read_store(const std::string& path);

// Recording file: "EPGR" | version u16 | sample_rate u16 | group u8 |
// subject_id (u8 length) | mark_count u32 | marks (f64 time, u8 phase) |
// sample_count u64 | f32 samples.
void write_recording(const Recording& rec, const std::string& path);
Recording read_recording(const std::string& path);

}  // namespace epg
