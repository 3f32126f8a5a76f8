#include "manifest.hpp"

#include <filesystem>

#include <json.hpp>
#include <openssl/evp.h>

#include "epg/bytes.hpp"
#include "epg/error.hpp"

namespace epg::cli {

namespace fs = std::filesystem;
using nlohmann::json;

std::string blob_digest(std::string_view bytes)
{
    const std::string header = "blob " + std::to_string(bytes.size()) + '\0';
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    const bool ok = ctx && EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) &&
                    EVP_DigestUpdate(ctx, header.data(), header.size()) &&
                    EVP_DigestUpdate(ctx, bytes.data(), bytes.size()) && EVP_DigestFinal_ex(ctx, md, &len);
    EVP_MD_CTX_free(ctx);
    if (!ok) throw Error("internal", "SHA-1 digest failed");
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 15];
    }
    return out;
}

std::string file_digest(const std::string& path)
{
    const auto bytes = read_file(path);
    return blob_digest({reinterpret_cast<const char*>(bytes.data()), bytes.size()});
}

void RunManifest::add_output(const std::string& root, const std::string& path)
{
    const fs::path p(path);
    const auto full = p.is_absolute() ? p : fs::path(root) / p;
    outputs.push_back({fs::relative(full, root).generic_string(), file_digest(full.string())});
}

void RunManifest::write(const std::string& path) const
{
    json outs = json::array();
    for (const auto& o : outputs) outs.push_back({{"path", o.path}, {"digest", o.digest}});
    const json j = {{"command", command},           {"config_digest", config_digest}, {"seeds", seeds},
                    {"input_digests", input_digests}, {"tool_version", tool_version}, {"outputs", outs}};
    write_text(path, j.dump(2) + "\n");
}

RunManifest read_manifest(const std::string& path)
{
    const auto bytes = read_file(path);
    try {
        const auto j = json::parse(bytes.begin(), bytes.end());
        RunManifest m;
        m.command = j.at("command").get<std::string>();
        m.config_digest = j.at("config_digest").get<std::string>();
        m.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
        m.input_digests = j.at("input_digests").get<std::vector<std::string>>();
        m.tool_version = j.at("tool_version").get<std::string>();
        for (const auto& o : j.at("outputs")) m.outputs.push_back({o.at("path"), o.at("digest")});
        return m;
    } catch (const json::exception& e) {
        throw FormatError("manifest '" + path + "': " + e.what());
    }
}

}  // namespace epg::cli
