#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace epg::cli {

inline constexpr const char* kToolVersion = "0.1.0";

// Git-style content hash: SHA-1 over "blob <size>\0" followed by the bytes.
std::string blob_digest(std::string_view bytes);
std::string file_digest(const std::string& path);

struct Output {
    std::string path;  // relative to the manifest's directory
    std::string digest;
};

struct RunManifest {
    std::string command;
    std::string config_digest;
    std::vector<std::uint64_t> seeds;
    std::vector<std::string> input_digests;
    std::string tool_version = kToolVersion;
    std::vector<Output> outputs;

    // Records `path` (absolute or relative to `root`) under its path relative to `root`.
    void add_output(const std::string& root, const std::string& path);
    void write(const std::string& path) const;
};

RunManifest read_manifest(const std::string& path);

}  // namespace epg::cli
