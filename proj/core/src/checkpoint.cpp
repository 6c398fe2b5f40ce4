#include "mig/checkpoint.hpp"

#include <bit>
#include <cstring>

#include <nlohmann/json.hpp>

#include "mig/error.hpp"
#include "mig/grid_io.hpp"

namespace mig {

namespace {

constexpr unsigned char kMagic[8] = {'M', 'I', 'G', 'C', 'K', 'P', 'T', '\0'};

void put_u64(std::vector<unsigned char> &out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i)
        out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xFF));
}

std::uint64_t get_u64(const unsigned char *p, int bytes = 8) {
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i)
        v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return v;
}

void put_doubles(std::vector<unsigned char> &out, std::span<const double> values) {
    for (double d : values)
        put_u64(out, std::bit_cast<std::uint64_t>(d));
}

nlohmann::json shape_json(const NetworkShape &s) {
    return {{"labels", s.labels},           {"latent_dim", s.latent_dim}, {"hidden_width", s.hidden_width},
            {"hidden_layers", s.hidden_layers}, {"skip_layer", s.skip_layer}, {"outputs", s.outputs}};
}

NetworkShape shape_from_json(const nlohmann::json &j) {
    NetworkShape s;
    s.labels = j.at("labels");
    s.latent_dim = j.at("latent_dim");
    s.hidden_width = j.at("hidden_width");
    s.hidden_layers = j.at("hidden_layers");
    s.skip_layer = j.at("skip_layer");
    s.outputs = j.at("outputs");
    return s;
}

nlohmann::json adam_json(const AdamState &a) {
    return {{"step", a.step}, {"lr", a.lr}, {"beta1", a.beta1}, {"beta2", a.beta2}, {"epsilon", a.epsilon}};
}

AdamState adam_from_json(const nlohmann::json &j, std::size_t size) {
    AdamState a(size, j.at("lr").get<double>());
    a.step = j.at("step");
    a.beta1 = j.at("beta1");
    a.beta2 = j.at("beta2");
    a.epsilon = j.at("epsilon");
    return a;
}

std::string describe(const NetworkShape &s) {
    return shape_json(s).dump();
}

} // namespace

std::vector<unsigned char> encode_checkpoint(const Checkpoint &ckpt) {
    const auto &shape = ckpt.network.shape();
    nlohmann::json manifest;
    manifest["version"] = kCheckpointVersion;
    manifest["shape"] = shape_json(shape);
    manifest["alphabet"] = ckpt.alphabet;
    manifest["families"] = ckpt.families;
    manifest["epoch"] = ckpt.epoch;
    manifest["latent"] = {{"dim", ckpt.latents.dim}, {"count", ckpt.latents.count}, {"frozen", ckpt.latents.frozen}};
    manifest["adam"]["network"] = adam_json(ckpt.network_adam);
    manifest["adam"]["latent"] = nlohmann::json::array();
    for (const auto &a : ckpt.latent_adam)
        manifest["adam"]["latent"].push_back(adam_json(a));
    manifest["config"] = ckpt.config_json.empty() ? nlohmann::json::object() : nlohmann::json::parse(ckpt.config_json);
    manifest["payload"] = {{"dtype", "float64-le"},
                           {"parameters", shape.parameter_count()},
                           {"latent_values", ckpt.latents.codes.size()}};
    std::string text = manifest.dump(2);

    std::vector<unsigned char> out(kMagic, kMagic + 8);
    for (int i = 0; i < 4; ++i)
        out.push_back(static_cast<unsigned char>((kCheckpointVersion >> (8 * i)) & 0xFF));
    put_u64(out, text.size());
    out.insert(out.end(), text.begin(), text.end());
    put_doubles(out, ckpt.network.parameters());
    put_doubles(out, ckpt.latents.codes);
    put_doubles(out, ckpt.network_adam.m);
    put_doubles(out, ckpt.network_adam.v);
    for (const auto &a : ckpt.latent_adam) {
        put_doubles(out, a.m);
        put_doubles(out, a.v);
    }
    return out;
}

Checkpoint decode_checkpoint(const std::vector<unsigned char> &bytes, const std::string &what,
                             const std::optional<NetworkShape> &expected) {
    if (bytes.size() < 20 || std::memcmp(bytes.data(), kMagic, 8) != 0)
        throw IoError(what + ": not a checkpoint file");
    auto version = static_cast<std::uint32_t>(get_u64(bytes.data() + 8, 4));
    if (version != kCheckpointVersion)
        throw IoError(what + ": checkpoint version " + std::to_string(version) + " is not supported (expected " +
                      std::to_string(kCheckpointVersion) + ")");
    std::uint64_t text_len = get_u64(bytes.data() + 12);
    if (bytes.size() < 20 + text_len)
        throw IoError(what + ": truncated checkpoint manifest");
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(bytes.begin() + 20, bytes.begin() + 20 + static_cast<std::ptrdiff_t>(text_len));
    } catch (const nlohmann::json::exception &e) {
        throw IoError(what + ": corrupt checkpoint manifest: " + e.what());
    }

    Checkpoint ckpt;
    NetworkShape shape;
    try {
        shape = shape_from_json(manifest.at("shape"));
        shape.validate();
    } catch (const nlohmann::json::exception &e) {
        throw IoError(what + ": malformed checkpoint manifest: " + e.what());
    } catch (const ContractViolation &e) {
        throw IoError(what + ": invalid network shape in checkpoint: " + e.what());
    }
    if (expected && !(*expected == shape))
        throw ConfigError(what + ": network shape mismatch: checkpoint " + describe(shape) + ", configuration " +
                          describe(*expected));
    ckpt.network = Network(shape);
    try {
        ckpt.alphabet = manifest.at("alphabet");
        ckpt.families = manifest.at("families").get<std::vector<std::string>>();
        ckpt.epoch = manifest.at("epoch");
        const auto &lat = manifest.at("latent");
        ckpt.latents = LatentTable(lat.at("dim"), lat.at("count"));
        ckpt.latents.frozen = lat.at("frozen");
        ckpt.network_adam = adam_from_json(manifest.at("adam").at("network"), shape.parameter_count());
        for (const auto &a : manifest.at("adam").at("latent"))
            ckpt.latent_adam.push_back(adam_from_json(a, static_cast<std::size_t>(ckpt.latents.dim)));
        const auto &config = manifest.at("config");
        ckpt.config_json = config.empty() ? std::string() : config.dump();
    } catch (const nlohmann::json::exception &e) {
        throw IoError(what + ": malformed checkpoint manifest: " + e.what());
    }

    std::size_t pos = 20 + text_len;
    auto read_into = [&](std::span<double> dst) {
        if (bytes.size() < pos + dst.size() * 8)
            throw IoError(what + ": truncated checkpoint payload");
        for (double &d : dst) {
            d = std::bit_cast<double>(get_u64(bytes.data() + pos));
            pos += 8;
        }
    };
    read_into(ckpt.network.mutable_parameters());
    read_into(ckpt.latents.codes);
    read_into(ckpt.network_adam.m);
    read_into(ckpt.network_adam.v);
    for (auto &a : ckpt.latent_adam) {
        read_into(a.m);
        read_into(a.v);
    }
    if (pos != bytes.size())
        throw IoError(what + ": trailing bytes after checkpoint payload");
    return ckpt;
}

void save_checkpoint(const std::filesystem::path &path, const Checkpoint &ckpt) {
    write_file_bytes(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path &path, const std::optional<NetworkShape> &expected) {
    return decode_checkpoint(read_file_bytes(path), path.string(), expected);
}

} // namespace mig
