#include "epg/signal_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "epg/bytes.hpp"
#include "epg/error.hpp"

namespace epg {

namespace {

constexpr char kStoreMagic[4] = {'E', 'P', 'G', 'S'};
constexpr char kRecordingMagic[4] = {'E', 'P', 'G', 'R'};

void check_magic(ByteReader& r, const char (&magic)[4], const char* what)
{
    if (!r.can_read(4)) throw FormatError(std::string(what) + ": file too short for magic bytes");
    const auto m = r.get_string(4);
    if (std::memcmp(m.data(), magic, 4) != 0) throw FormatError(std::string(what) + ": bad magic bytes");
}

}  // namespace

std::string_view to_string(Phase p)
{
    switch (p) {
    case Phase::Baseline: return "Baseline";
    case Phase::EarlyEPG: return "EarlyEPG";
    case Phase::LateEPG: return "LateEPG";
    case Phase::Unlabeled: return "Unlabeled";
    }
    return "?";
}

std::string_view to_string(Group g) { return g == Group::PPS ? "PPS" : "Control"; }

std::optional<Phase> parse_phase(std::string_view s)
{
    for (auto p : {Phase::Baseline, Phase::EarlyEPG, Phase::LateEPG, Phase::Unlabeled})
        if (to_string(p) == s) return p;
    return std::nullopt;
}

std::optional<Group> parse_group(std::string_view s)
{
    if (s == "PPS") return Group::PPS;
    if (s == "Control") return Group::Control;
    return std::nullopt;
}

Phase Recording::phase_at(double t) const
{
    Phase p = Phase::Unlabeled;
    for (const auto& m : phase_marks) {
        if (m.timestamp_s > t) break;
        p = m.phase;
    }
    return p;
}

void Recording::validate() const
{
    if (sample_rate_hz <= 0) throw ValidationError("recording '" + subject_id + "': sample rate must be positive");
    for (std::size_t i = 0; i < phase_marks.size(); ++i) {
        if (phase_marks[i].timestamp_s < 0.0)
            throw ValidationError("recording '" + subject_id + "': negative phase mark timestamp");
        if (i > 0 && !(phase_marks[i].timestamp_s > phase_marks[i - 1].timestamp_s))
            throw ValidationError("recording '" + subject_id + "': phase marks not strictly ascending");
    }
    for (std::size_t i = 0; i < samples.size(); ++i)
        if (std::isinf(samples[i]))
            throw ValidationError("recording '" + subject_id + "': infinite sample at index " + std::to_string(i));
}

bool bitwise_equal(const Segment& a, const Segment& b)
{
    if (a.label != b.label || a.subject_id != b.subject_id || a.values.size() != b.values.size()) return false;
    if (std::memcmp(&a.start_time_s, &b.start_time_s, sizeof(double)) != 0) return false;
    return std::memcmp(a.values.data(), b.values.data(), a.values.size() * sizeof(float)) == 0;
}

std::vector<unsigned char> encode_store(std::span<const Segment> segments)
{
    ByteWriter w;
    w.put_bytes(std::string_view(kStoreMagic, 4));
    w.put<std::uint16_t>(kStoreVersion);
    w.put<std::uint16_t>(static_cast<std::uint16_t>(kSampleRateHz));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(kSegmentLength));
    w.put<std::uint64_t>(segments.size());
    w.put_zeros(kStoreHeaderBytes - w.size());
    for (std::size_t i = 0; i < segments.size(); ++i) {
        const auto& s = segments[i];
        if (s.values.size() != static_cast<std::size_t>(kSegmentLength))
            throw ValidationError("segment " + std::to_string(i) + " has " + std::to_string(s.values.size()) +
                                  " values, expected " + std::to_string(kSegmentLength));
        if (s.subject_id.size() > 255)
            throw ValidationError("segment " + std::to_string(i) + ": subject id longer than 255 bytes");
        if (!is_class(s.label)) throw ValidationError("segment " + std::to_string(i) + ": label must be a class");
        w.put<std::uint8_t>(static_cast<std::uint8_t>(s.subject_id.size()));
        w.put_bytes(s.subject_id);
        w.put<std::uint8_t>(static_cast<std::uint8_t>(s.label));
        w.put<double>(s.start_time_s);
        for (float v : s.values) w.put<float>(v);
    }
    return std::move(w.buffer());
}

std::vector<Segment> decode_store(std::span<const unsigned char> bytes)
{
    ByteReader r(bytes.data(), bytes.size());
    check_magic(r, kStoreMagic, "segment store");
    if (!r.can_read(kStoreHeaderBytes - 4)) throw FormatError("segment store: truncated header");
    const auto version = r.get<std::uint16_t>();
    if (version != kStoreVersion) throw FormatError("segment store: unsupported version " + std::to_string(version));
    const auto rate = r.get<std::uint16_t>();
    const auto seg_len = r.get<std::uint32_t>();
    const auto count = r.get<std::uint64_t>();
    r.skip(kStoreHeaderBytes - r.position());
    if (rate != kSampleRateHz) throw FormatError("segment store: unsupported sample rate " + std::to_string(rate));
    if (seg_len != static_cast<std::uint32_t>(kSegmentLength))
        throw CorruptionError("segment store: corrupt segment length " + std::to_string(seg_len));
    // Each record needs at least 1 + 1 + 8 + 4*len bytes.
    const std::uint64_t min_record = 10 + 4ull * seg_len;
    if (count > r.remaining() / min_record + 1)
        throw CorruptionError("segment store: segment count " + std::to_string(count) + " exceeds file size");

    std::vector<Segment> out;
    out.reserve(static_cast<std::size_t>(count));
    for (std::uint64_t i = 0; i < count; ++i) {
        try {
            Segment s;
            const auto id_len = r.get<std::uint8_t>();
            s.subject_id = r.get_string(id_len);
            const auto label = r.get<std::uint8_t>();
            if (label > 2) throw CorruptionError("invalid label " + std::to_string(label));
            s.label = static_cast<Label>(label);
            s.start_time_s = r.get<double>();
            s.values.resize(seg_len);
            for (auto& v : s.values) v = r.get<float>();
            out.push_back(std::move(s));
        } catch (const CorruptionError& e) {
            throw CorruptionError("segment store: record " + std::to_string(i) + " corrupt: " + e.what());
        }
    }
    if (r.remaining() != 0) throw CorruptionError("segment store: trailing bytes after last record");
    return out;
}

void write_store(std::span<const Segment> segments, const std::string& path)
{
    write_file(path, encode_store(segments));
}

std::vector<Segment> read_store(const std::string& path)
{
    const auto bytes = read_file(path);
    return decode_store(bytes);
}

void write_recording(const Recording& rec, const std::string& path)
{
    rec.validate();
    ByteWriter w;
    w.put_bytes(std::string_view(kRecordingMagic, 4));
    w.put<std::uint16_t>(1);
    w.put<std::uint16_t>(static_cast<std::uint16_t>(rec.sample_rate_hz));
    w.put<std::uint8_t>(static_cast<std::uint8_t>(rec.group));
    if (rec.subject_id.size() > 255) throw ValidationError("subject id longer than 255 bytes");
    w.put<std::uint8_t>(static_cast<std::uint8_t>(rec.subject_id.size()));
    w.put_bytes(rec.subject_id);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(rec.phase_marks.size()));
    for (const auto& m : rec.phase_marks) {
        w.put<double>(m.timestamp_s);
        w.put<std::uint8_t>(static_cast<std::uint8_t>(m.phase));
    }
    w.put<std::uint64_t>(rec.samples.size());
    for (float v : rec.samples) w.put<float>(v);
    write_file(path, w.buffer());
}

Recording read_recording(const std::string& path)
{
    const auto bytes = read_file(path);
    ByteReader r(bytes.data(), bytes.size());
    check_magic(r, kRecordingMagic, ("recording " + path).c_str());
    Recording rec;
    try {
        if (r.get<std::uint16_t>() != 1) throw FormatError("recording " + path + ": unsupported version");
        rec.sample_rate_hz = r.get<std::uint16_t>();
        const auto group = r.get<std::uint8_t>();
        if (group > 1) throw CorruptionError("invalid group");
        rec.group = static_cast<Group>(group);
        rec.subject_id = r.get_string(r.get<std::uint8_t>());
        const auto marks = r.get<std::uint32_t>();
        for (std::uint32_t i = 0; i < marks; ++i) {
            PhaseMark m;
            m.timestamp_s = r.get<double>();
            const auto p = r.get<std::uint8_t>();
            if (p > 3) throw CorruptionError("invalid phase");
            m.phase = static_cast<Phase>(p);
            rec.phase_marks.push_back(m);
        }
        const auto n = r.get<std::uint64_t>();
        if (n > r.remaining() / 4) throw CorruptionError("sample count exceeds file size");
        rec.samples.resize(static_cast<std::size_t>(n));
        for (auto& v : rec.samples) v = r.get<float>();
    } catch (const CorruptionError& e) {
        throw CorruptionError("recording " + path + ": " + e.what());
    }
    rec.validate();
    return rec;
}

std::vector<unsigned char> read_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    return std::vector<unsigned char>(std::istreambuf_iterator<char>(in), {});
}

void write_file(const std::string& path, const std::vector<unsigned char>& bytes)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for '" + path + "'");
}

void write_text(const std::string& path, std::string_view text)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw IoError("write failed for '" + path + "'");
}

}  // namespace epg
