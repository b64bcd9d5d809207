#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "glab/errors.hpp"
#include "glab/net.hpp"
#include "glab/schedule.hpp"
#include "glab/trainer.hpp"

namespace glab {

// Checkpoint file layout:
//   bytes 0..7   magic "GLABCKPT"
//   bytes 8..11  u32 little-endian JSON header length H
//   H bytes      JSON header: format, architecture, schedule, train config,
//                seed, param_count
//   rest         param_count little-endian IEEE-754 doubles
// Loaders reject any header/payload size mismatch.

inline constexpr char kCheckpointMagic[8] = {'G', 'L', 'A', 'B', 'C', 'K', 'P', 'T'};

struct Checkpoint {
    NetSpec net_spec;
    Schedule schedule;
    TrainConfig train;
    std::uint64_t seed = 0;
    Vec params;

    DenoiserNet restore() const {
        DenoiserNet net = DenoiserNet::zeros(net_spec);
        net.params() = params;
        return net;
    }
};

namespace ckptdetail {

inline void put_u32_le(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_f64_le(std::string& out, double d) {
    const auto bits = std::bit_cast<std::uint64_t>(d);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

inline std::uint32_t get_u32_le(const unsigned char* p) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
    return v;
}

inline double get_f64_le(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return std::bit_cast<double>(v);
}

inline nlohmann::json net_spec_to_json(const NetSpec& s) {
    return {{"data_dim", s.data_dim},
            {"num_classes", s.num_classes},
            {"hidden_width", s.hidden_width},
            {"hidden_layers", s.hidden_layers},
            {"lambda_emb_pairs", s.lambda_emb_pairs},
            {"lambda_emb_period_min", s.lambda_emb_period_min},
            {"lambda_emb_period_max", s.lambda_emb_period_max},
            {"class_emb_dim", s.class_emb_dim}};
}

inline NetSpec net_spec_from_json(const nlohmann::json& j) {
    NetSpec s;
    s.data_dim = j.at("data_dim").get<int>();
    s.num_classes = j.at("num_classes").get<int>();
    s.hidden_width = j.at("hidden_width").get<int>();
    s.hidden_layers = j.at("hidden_layers").get<int>();
    s.lambda_emb_pairs = j.at("lambda_emb_pairs").get<int>();
    s.lambda_emb_period_min = j.at("lambda_emb_period_min").get<double>();
    s.lambda_emb_period_max = j.at("lambda_emb_period_max").get<double>();
    s.class_emb_dim = j.at("class_emb_dim").get<int>();
    s.validate();
    return s;
}

}  // namespace ckptdetail

inline void save_checkpoint(const std::filesystem::path& path, const DenoiserNet& net,
                            const Schedule& schedule, const TrainConfig& train,
                            std::uint64_t seed) {
    nlohmann::json header = {
        {"format", "guidance-lab-checkpoint-v1"},
        {"net", ckptdetail::net_spec_to_json(net.spec())},
        {"schedule", {{"lambda_min", schedule.lambda_min}, {"lambda_max", schedule.lambda_max}}},
        {"train",
         {{"p_uncond", train.p_uncond},
          {"steps", train.steps},
          {"batch", train.batch},
          {"learning_rate", train.learning_rate},
          {"seed", train.seed}}},
        {"seed", seed},
        {"param_count", net.param_count()}};

    const std::string header_text = header.dump();
    std::string blob;
    blob.reserve(12 + header_text.size() + 8 * static_cast<std::size_t>(net.param_count()));
    blob.append(kCheckpointMagic, sizeof(kCheckpointMagic));
    ckptdetail::put_u32_le(blob, static_cast<std::uint32_t>(header_text.size()));
    blob += header_text;
    for (int i = 0; i < net.param_count(); ++i) ckptdetail::put_f64_le(blob, net.params()[i]);

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write checkpoint: " + path.string());
    out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read checkpoint: " + path.string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    if (bytes.size() < 12 ||
        std::memcmp(bytes.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0)
        throw ConfigError("checkpoint " + path.string() + ": bad magic");
    const std::uint32_t header_len = ckptdetail::get_u32_le(bytes.data() + 8);
    if (bytes.size() < 12 + static_cast<std::size_t>(header_len))
        throw ConfigError("checkpoint " + path.string() + ": truncated header");

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(bytes.begin() + 12, bytes.begin() + 12 + header_len);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("checkpoint " + path.string() + ": header parse error: " + e.what());
    }

    Checkpoint ckpt;
    try {
        if (header.at("format").get<std::string>() != "guidance-lab-checkpoint-v1")
            throw ConfigError("checkpoint " + path.string() + ": unknown format");
        ckpt.net_spec = ckptdetail::net_spec_from_json(header.at("net"));
        ckpt.schedule.lambda_min = header.at("schedule").at("lambda_min").get<double>();
        ckpt.schedule.lambda_max = header.at("schedule").at("lambda_max").get<double>();
        ckpt.train.p_uncond = header.at("train").at("p_uncond").get<double>();
        ckpt.train.steps = header.at("train").at("steps").get<int>();
        ckpt.train.batch = header.at("train").at("batch").get<int>();
        ckpt.train.learning_rate = header.at("train").at("learning_rate").get<double>();
        ckpt.train.seed = header.at("train").at("seed").get<std::uint64_t>();
        ckpt.seed = header.at("seed").get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("checkpoint " + path.string() + ": incomplete header: " + e.what());
    }

    const int declared = header.at("param_count").get<int>();
    const int expected = DenoiserNet::zeros(ckpt.net_spec).param_count();
    if (declared != expected)
        throw ConfigError("checkpoint " + path.string() + ": header declares " +
                          std::to_string(declared) + " params but the architecture needs " +
                          std::to_string(expected));
    const std::size_t payload = bytes.size() - 12 - header_len;
    if (payload != 8 * static_cast<std::size_t>(declared))
        throw ConfigError("checkpoint " + path.string() + ": payload holds " +
                          std::to_string(payload / 8) + " doubles, header declares " +
                          std::to_string(declared));

    ckpt.params.resize(declared);
    const unsigned char* p = bytes.data() + 12 + header_len;
    for (int i = 0; i < declared; ++i) ckpt.params[i] = ckptdetail::get_f64_le(p + 8 * i);
    ckpt.schedule.validate();
    return ckpt;
}

}  // namespace glab
