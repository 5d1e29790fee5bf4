#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mfish/core/error.hpp"
#include "mfish/nn/adam.hpp"
#include "mfish/segnet/network.hpp"

namespace mfish::segnet {

/// Container layout (little endian):
///   8 bytes   magic "MFSGCKPT"
///   uint32    format version
///   uint64    header length L
///   L bytes   JSON header: config, tensor and buffer names/sizes, optimizer
///             step and hyperparameters, caller metadata
///   float32[] parameters, then buffers, then Adam m and v (if present), in
///             header order
inline constexpr std::array<char, 8> kCheckpointMagic{'M', 'F', 'S', 'G', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes a little-endian host");

template <class V>
void write_pod(std::ostream& out, const V& v)
{
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class V>
V read_pod(std::istream& in)
{
    V v{};
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in)
        throw IoError("checkpoint: truncated file");
    return v;
}

template <class T>
void write_floats(std::ostream& out, std::span<const T> values)
{
    std::vector<float> buf(values.begin(), values.end());
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
}

template <class T>
void read_floats(std::istream& in, std::span<T> values)
{
    std::vector<float> buf(values.size());
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
    if (!in)
        throw IoError("checkpoint: truncated payload");
    std::copy(buf.begin(), buf.end(), values.begin());
}

inline nlohmann::json read_header(std::istream& in, const std::string& where)
{
    std::array<char, 8> magic{};
    in.read(magic.data(), magic.size());
    if (!in || magic != kCheckpointMagic)
        throw IoError("not a checkpoint file: " + where);
    const auto version = read_pod<std::uint32_t>(in);
    if (version != kCheckpointVersion)
        throw IoError("unsupported checkpoint version " + std::to_string(version) + " in " + where);
    const auto len = read_pod<std::uint64_t>(in);
    std::string text(len, '\0');
    in.read(text.data(), static_cast<std::streamsize>(len));
    if (!in)
        throw IoError("checkpoint: truncated header in " + where);
    return nlohmann::json::parse(text);
}

} // namespace detail

template <class T>
void save_checkpoint(const std::filesystem::path& path, Network<T>& net, const nn::AdamState<T>* adam = nullptr,
                     const nlohmann::json& extra = nlohmann::json::object())
{
    auto params = net.named_parameters();
    auto buffers = net.named_buffers();
    nlohmann::json tensors = nlohmann::json::array(), bufs = nlohmann::json::array();
    for (const auto& p : params)
        tensors.push_back({{"name", p.name}, {"count", p.tensor->size()}});
    for (const auto& b : buffers)
        bufs.push_back({{"name", b.name}, {"count", b.values->size()}});
    const bool moments = adam && !adam->m.empty();
    if (moments && adam->m.size() != params.size())
        throw ValidationError("save_checkpoint: optimizer state does not match the network");
    nlohmann::json header{{"format_version", kCheckpointVersion},
                          {"config", net.config()},
                          {"tensors", tensors},
                          {"buffers", bufs},
                          {"extra", extra}};
    if (adam)
        header["adam"] = {{"step", adam->step},
                          {"lr", adam->config.lr},
                          {"beta1", adam->config.beta1},
                          {"beta2", adam->config.beta2},
                          {"epsilon", adam->config.epsilon},
                          {"moments", moments}};
    const std::string text = header.dump();

    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out)
            throw IoError("cannot write checkpoint: " + path.string());
        out.write(kCheckpointMagic.data(), kCheckpointMagic.size());
        detail::write_pod(out, kCheckpointVersion);
        detail::write_pod(out, static_cast<std::uint64_t>(text.size()));
        out.write(text.data(), static_cast<std::streamsize>(text.size()));
        for (const auto& p : params)
            detail::write_floats<T>(out, p.tensor->values());
        for (const auto& b : buffers)
            detail::write_floats<T>(out, std::span<const T>(*b.values));
        if (moments) {
            for (const auto& m : adam->m)
                detail::write_floats<T>(out, std::span<const T>(m));
            for (const auto& v : adam->v)
                detail::write_floats<T>(out, std::span<const T>(v));
        }
        if (!out)
            throw IoError("failed writing checkpoint: " + path.string());
    }
    std::filesystem::rename(tmp, path);
}

/// Reads only the JSON header.
inline nlohmann::json read_checkpoint_header(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("missing file: " + path.string());
    return detail::read_header(in, path.string());
}

/// Rebuilds the network stored in `path`; optionally restores the optimizer
/// state and returns the caller metadata.
template <class T>
Network<T> load_checkpoint(const std::filesystem::path& path, nn::AdamState<T>* adam = nullptr,
                           nlohmann::json* extra = nullptr)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("missing file: " + path.string());
    const auto header = detail::read_header(in, path.string());
    Network<T> net(header.at("config").get<NetworkConfig>(), 0);
    auto params = net.named_parameters();
    auto buffers = net.named_buffers();
    const auto& tensors = header.at("tensors");
    const auto& bufs = header.at("buffers");
    if (tensors.size() != params.size() || bufs.size() != buffers.size())
        throw IoError("checkpoint " + path.string() + " does not match its own configuration");
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (tensors[i].at("name") != params[i].name || tensors[i].at("count") != params[i].tensor->size())
            throw IoError("checkpoint tensor mismatch at " + params[i].name);
        detail::read_floats<T>(in, params[i].tensor->values());
    }
    for (std::size_t i = 0; i < buffers.size(); ++i) {
        if (bufs[i].at("name") != buffers[i].name || bufs[i].at("count") != buffers[i].values->size())
            throw IoError("checkpoint buffer mismatch at " + buffers[i].name);
        detail::read_floats<T>(in, std::span<T>(*buffers[i].values));
    }
    if (adam && header.contains("adam")) {
        const auto& a = header.at("adam");
        *adam = nn::AdamState<T>{};
        adam->config = {a.at("lr").get<double>(), a.at("beta1").get<double>(), a.at("beta2").get<double>(),
                        a.at("epsilon").get<double>()};
        adam->step = a.at("step").get<std::int64_t>();
        if (a.at("moments").get<bool>()) {
            for (const auto& p : params)
                adam->m.emplace_back(p.tensor->size());
            for (const auto& p : params)
                adam->v.emplace_back(p.tensor->size());
            for (auto& m : adam->m)
                detail::read_floats<T>(in, std::span<T>(m));
            for (auto& v : adam->v)
                detail::read_floats<T>(in, std::span<T>(v));
        }
    }
    if (extra)
        *extra = header.value("extra", nlohmann::json::object());
    return net;
}

} // namespace mfish::segnet
