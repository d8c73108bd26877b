#include "dcm/nn/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>

namespace dcm::nn {

namespace {

constexpr char kMagic[8] = {'D', 'C', 'M', 'C', 'K', 'P', 'T', '\0'};

std::vector<std::pair<std::string, FeatureMatrix*>> all_tensors(Network& net) {
    Registry r = net.registry();
    std::vector<std::pair<std::string, FeatureMatrix*>> out;
    for (Parameter* p : r.parameters) out.emplace_back(p->name, &p->value);
    for (const Buffer& b : r.buffers) out.emplace_back(b.name, b.value);
    return out;
}

template <typename T>
void put(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is, const std::filesystem::path& path) {
    T v;
    if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) throw IoError(path.string() + ": truncated checkpoint header");
    return v;
}

void read_tensors(std::istream& is, const std::filesystem::path& path, const nlohmann::json& header, std::streamoff payload,
                  Network& net) {
    std::map<std::string, nlohmann::json> table;
    for (const auto& t : header.at("tensors")) table[t.at("name")] = t;
    for (const auto& [name, value] : all_tensors(net)) {
        auto it = table.find(name);
        if (it == table.end()) throw IoError(path.string() + ": missing tensor " + name);
        const auto& shape = it->second.at("shape");
        if (shape.at(0).get<Index>() != value->rows() || shape.at(1).get<Index>() != value->cols())
            throw IoError(path.string() + ": shape mismatch for tensor " + name);
        is.clear();
        is.seekg(payload + static_cast<std::streamoff>(it->second.at("offset").get<std::uint64_t>()));
        for (Index k = 0; k < value->size(); ++k) {
            float f;
            if (!is.read(reinterpret_cast<char*>(&f), sizeof(f))) throw IoError(path.string() + ": truncated tensor " + name);
            value->data()[k] = f;
        }
    }
}

}  // namespace

void save_checkpoint(Network& net, const std::filesystem::path& path, const nlohmann::json& meta) {
    const auto tensors = all_tensors(net);
    nlohmann::json header;
    header["config"] = net.config();
    header["meta"] = meta;
    header["tensors"] = nlohmann::json::array();
    std::uint64_t offset = 0;
    for (const auto& [name, value] : tensors) {
        header["tensors"].push_back({{"name", name}, {"shape", {value->rows(), value->cols()}}, {"offset", offset}});
        offset += static_cast<std::uint64_t>(value->size()) * sizeof(float);
    }
    const std::string text = header.dump();

    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot write " + path.string());
    os.write(kMagic, sizeof(kMagic));
    put<std::uint32_t>(os, kCheckpointVersion);
    put<std::uint64_t>(os, text.size());
    os.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& [name, value] : tensors) {
        for (Index k = 0; k < value->size(); ++k) put<float>(os, static_cast<float>(value->data()[k]));
    }
    if (!os) throw IoError("write failed for " + path.string());
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path.string());
    char magic[8];
    if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(magic)) != 0)
        throw IoError(path.string() + ": not a checkpoint (bad magic)");
    const auto version = get<std::uint32_t>(is, path);
    if (version != kCheckpointVersion)
        throw IoError(path.string() + ": unsupported checkpoint version " + std::to_string(version));
    const auto length = get<std::uint64_t>(is, path);
    std::string text(length, '\0');
    if (!is.read(text.data(), static_cast<std::streamsize>(length))) throw IoError(path.string() + ": truncated header");
    const std::streamoff payload = is.tellg();

    try {
        const nlohmann::json header = nlohmann::json::parse(text);
        LoadedCheckpoint out;
        out.network = std::make_unique<Network>(header.at("config").get<NetworkConfig>());
        out.meta = header.value("meta", nlohmann::json::object());
        read_tensors(is, path, header, payload, *out.network);
        return out;
    } catch (const nlohmann::json::exception& e) {
        throw IoError(path.string() + ": malformed checkpoint header: " + e.what());
    } catch (const ConfigError& e) {
        throw IoError(path.string() + ": invalid network config: " + e.what());
    }
}

}  // namespace dcm::nn
