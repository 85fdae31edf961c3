#include "powertrace/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <filesystem>

#include "powertrace/errors.hpp"
#include "powertrace/text.hpp"

namespace powertrace {

namespace {

std::string encode_le(const Tensor& t) {
    std::string bytes(t.size() * sizeof(double), '\0');
    for (std::size_t i = 0; i < t.size(); ++i) {
        auto bits = std::bit_cast<std::uint64_t>(t[i]);
        for (int b = 0; b < 8; ++b) {
            bytes[i * 8 + static_cast<std::size_t>(b)] = static_cast<char>((bits >> (8 * b)) & 0xFF);
        }
    }
    return bytes;
}

void decode_le(const std::string& bytes, Tensor& t) {
    if (bytes.size() != t.size() * sizeof(double)) throw DataError("parameter blob has the wrong size");
    for (std::size_t i = 0; i < t.size(); ++i) {
        std::uint64_t bits = 0;
        for (int b = 0; b < 8; ++b) {
            bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[i * 8 + static_cast<std::size_t>(b)]))
                    << (8 * b);
        }
        t[i] = std::bit_cast<double>(bits);
    }
}

std::string blob_name(const std::string& param) {
    std::string out = param;
    for (auto& c : out) {
        if (c == '/' || c == '\\') c = '_';
    }
    return out + ".bin";
}

}  // namespace

nlohmann::json write_param_blobs(const ParamStore& store, const std::string& dir) {
    std::filesystem::create_directories(dir);
    nlohmann::json tensors = nlohmann::json::array();
    for (std::size_t i = 0; i < store.size(); ++i) {
        const auto& p = store[i];
        const std::string file = blob_name(p.name);
        write_file((std::filesystem::path(dir) / file).string(), encode_le(p.value));
        tensors.push_back({{"name", p.name}, {"shape", p.value.shape()}, {"file", file}});
    }
    return {{"init_seed", store.init_seed}, {"step", store.step}, {"dtype", "float64-le"}, {"tensors", tensors}};
}

void read_param_blobs(ParamStore& store, const nlohmann::json& manifest, const std::string& dir) {
    const auto& tensors = manifest.at("tensors");
    if (tensors.size() != store.size()) throw DataError("checkpoint tensor count does not match the model");
    for (std::size_t i = 0; i < store.size(); ++i) {
        const auto& entry = tensors[i];
        auto& p = store[i];
        if (entry.at("name").get<std::string>() != p.name) {
            throw DataError("checkpoint tensor '" + entry.at("name").get<std::string>() + "' where '" + p.name +
                            "' was expected");
        }
        if (entry.at("shape").get<Shape>() != p.value.shape()) {
            throw DataError("checkpoint tensor '" + p.name + "' has a different shape");
        }
        decode_le(read_file((std::filesystem::path(dir) / entry.at("file").get<std::string>()).string()), p.value);
    }
    store.step = manifest.value("step", std::int64_t{0});
    store.init_seed = manifest.value("init_seed", std::uint64_t{0});
}

void save_params(const ParamStore& store, const std::string& dir) {
    const auto manifest = write_param_blobs(store, dir);
    write_file((std::filesystem::path(dir) / "params.json").string(), manifest.dump(2) + "\n");
}

void load_params(ParamStore& store, const std::string& dir) {
    const auto manifest = nlohmann::json::parse(read_file((std::filesystem::path(dir) / "params.json").string()));
    read_param_blobs(store, manifest, dir);
}

}  // namespace powertrace
