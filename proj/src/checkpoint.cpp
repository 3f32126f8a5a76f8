#include "epg/checkpoint.hpp"

#include <cstring>
#include <json.hpp>

#include "epg/bytes.hpp"

namespace epg {

namespace {

constexpr char kMagic[4] = {'E', 'P', 'G', 'W'};

enum class EntryKind : std::uint8_t { trainable = 0, running_mean = 1, running_var = 2 };

struct Entry {
    std::string name;
    ad::Shape shape;
    EntryKind kind;
    const float* data;
};

}  // namespace

std::vector<unsigned char> encode_checkpoint(const zoo::Model<float>& model)
{
    nlohmann::json meta = {
        {"model", std::string(zoo::to_string(model.spec.name))},
        {"kernel_width", model.spec.kernel_width},
        {"dropout_rate", model.spec.dropout_rate},
        {"input_length", model.spec.input_length},
        {"n_classes", model.spec.n_classes},
    };
    std::vector<Entry> entries;
    for (const auto& p : model.params) entries.push_back({p.name, p.value.shape(), EntryKind::trainable, p.value.ptr()});
    for (std::size_t i = 0; i < model.bn.size(); ++i) {
        const ad::Index c = model.bn[i].running_mean.size();
        entries.push_back({model.bn_names[i] + ".running_mean", {c}, EntryKind::running_mean, model.bn[i].running_mean.data()});
        entries.push_back({model.bn_names[i] + ".running_var", {c}, EntryKind::running_var, model.bn[i].running_var.data()});
    }

    ByteWriter w;
    w.put_bytes(std::string_view(kMagic, 4));
    w.put<std::uint16_t>(kCheckpointVersion);
    const std::string m = meta.dump();
    w.put<std::uint32_t>(static_cast<std::uint32_t>(m.size()));
    w.put_bytes(m);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(entries.size()));
    std::uint64_t offset = 0;
    for (const auto& e : entries) {
        w.put<std::uint16_t>(static_cast<std::uint16_t>(e.name.size()));
        w.put_bytes(e.name);
        w.put<std::uint8_t>(0);
        w.put<std::uint8_t>(static_cast<std::uint8_t>(e.shape.size()));
        for (auto d : e.shape) w.put<std::uint32_t>(static_cast<std::uint32_t>(d));
        w.put<std::uint8_t>(static_cast<std::uint8_t>(e.kind));
        w.put<std::uint64_t>(offset);
        offset += static_cast<std::uint64_t>(ad::numel(e.shape)) * 4;
    }
    for (const auto& e : entries)
        for (ad::Index i = 0; i < ad::numel(e.shape); ++i) w.put<float>(e.data[i]);
    return std::move(w.buffer());
}

zoo::Model<float> decode_checkpoint(std::span<const unsigned char> bytes)
{
    ByteReader r(bytes.data(), bytes.size());
    if (!r.can_read(4) || std::memcmp(bytes.data(), kMagic, 4) != 0) throw FormatError("checkpoint: bad magic bytes");
    r.skip(4);
    try {
        const auto version = r.get<std::uint16_t>();
        if (version != kCheckpointVersion) throw FormatError("checkpoint: unsupported version " + std::to_string(version));
        const auto meta_len = r.get<std::uint32_t>();
        nlohmann::json meta;
        try {
            meta = nlohmann::json::parse(r.get_string(meta_len));
        } catch (const nlohmann::json::exception& e) {
            throw CorruptionError(std::string("metadata is not valid JSON: ") + e.what());
        }
        const auto name = zoo::parse_model_name(meta.at("model").get<std::string>());
        if (!name) throw FormatError("checkpoint: unknown model '" + meta.at("model").get<std::string>() + "'");
        zoo::BuildOptions opt;
        if (*name == zoo::ModelName::Proposed4 || *name == zoo::ModelName::Proposed16)
            opt.kernel_width = meta.at("kernel_width").get<int>();
        opt.dropout_rate = meta.at("dropout_rate").get<double>();
        opt.input_length = meta.at("input_length").get<int>();
        opt.n_classes = meta.at("n_classes").get<int>();
        auto model = zoo::build<float>(zoo::make_spec(*name, opt), 0);

        const auto count = r.get<std::uint32_t>();
        struct Header {
            std::string name;
            ad::Shape shape;
            EntryKind kind;
            std::uint64_t offset;
        };
        std::vector<Header> headers;
        for (std::uint32_t i = 0; i < count; ++i) {
            Header h;
            h.name = r.get_string(r.get<std::uint16_t>());
            if (r.get<std::uint8_t>() != 0) throw FormatError("checkpoint: entry '" + h.name + "' has unsupported dtype");
            const auto rank = r.get<std::uint8_t>();
            for (int d = 0; d < rank; ++d) h.shape.push_back(r.get<std::uint32_t>());
            const auto kind = r.get<std::uint8_t>();
            if (kind > 2) throw CorruptionError("entry '" + h.name + "' has invalid kind");
            h.kind = static_cast<EntryKind>(kind);
            h.offset = r.get<std::uint64_t>();
            headers.push_back(std::move(h));
        }
        const std::size_t payload = r.position();
        std::map<std::string, const Header*> by_name;
        for (const auto& h : headers) by_name[h.name] = &h;

        auto fill = [&](const std::string& name, ad::Shape shape, float* dst) {
            const auto it = by_name.find(name);
            if (it == by_name.end()) throw FormatError("checkpoint: incompatible, missing entry '" + name + "'");
            if (it->second->shape != shape)
                throw FormatError("checkpoint: incompatible shape for '" + name + "': " + ad::shape_str(it->second->shape) +
                                  " vs " + ad::shape_str(shape));
            const std::uint64_t n = static_cast<std::uint64_t>(ad::numel(shape));
            if (payload + it->second->offset + 4 * n > bytes.size()) throw CorruptionError("entry '" + name + "' truncated");
            ByteReader pr(bytes.data() + payload + it->second->offset, 4 * n);
            for (std::uint64_t i = 0; i < n; ++i) dst[i] = pr.get<float>();
        };
        for (auto& p : model.params) fill(p.name, p.value.shape(), p.value.ptr());
        for (std::size_t i = 0; i < model.bn.size(); ++i) {
            const ad::Shape s{model.bn[i].running_mean.size()};
            fill(model.bn_names[i] + ".running_mean", s, model.bn[i].running_mean.data());
            fill(model.bn_names[i] + ".running_var", s, model.bn[i].running_var.data());
        }
        if (headers.size() != model.params.size() + 2 * model.bn.size())
            throw FormatError("checkpoint: incompatible, unexpected extra entries");
        return model;
    } catch (const CorruptionError& e) {
        throw CorruptionError(std::string("checkpoint: ") + e.what());
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("checkpoint: bad metadata: ") + e.what());
    }
}

void save_checkpoint(const zoo::Model<float>& model, const std::string& path)
{
    write_file(path, encode_checkpoint(model));
}

zoo::Model<float> load_checkpoint(const std::string& path)
{
    const auto bytes = read_file(path);
    return decode_checkpoint(bytes);
}

void require_compatible(const zoo::Model<float>& model, const zoo::ModelSpec& spec)
{
    const auto bp = zoo::blueprint(spec);
    bool ok = model.spec.name == spec.name && bp.params.size() == model.params.size();
    for (std::size_t i = 0; ok && i < bp.params.size(); ++i)
        ok = bp.params[i].name == model.params[i].name && bp.params[i].shape == model.params[i].value.shape();
    if (!ok)
        throw FormatError("checkpoint of " + std::string(zoo::to_string(model.spec.name)) + " is incompatible with " +
                          std::string(zoo::to_string(spec.name)) + " (kernel width " + std::to_string(spec.kernel_width) + ")");
}

}  // namespace epg
