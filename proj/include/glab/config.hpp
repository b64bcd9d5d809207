#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "glab/errors.hpp"
#include "glab/gmm_world.hpp"
#include "glab/guidance.hpp"
#include "glab/sampler.hpp"
#include "glab/schedule.hpp"
#include "glab/trainer.hpp"

namespace glab {

// Everything a run needs, read from one JSON file. Flags may override
// individual fields afterwards; validate() is called again after overrides.
struct RunConfig {
    GmmWorld world = triangle_world();
    Schedule schedule{};
    TrainConfig train{};
    SamplerConfig sampler{};
    GuidanceConfig guidance{};
    std::string output_dir = "out";
    std::uint64_t seed = 0;

    void validate() const {
        world.validate();
        schedule.validate();
        train.validate();
        SamplerConfig s = sampler;
        s.schedule = schedule;
        s.validate();
        guidance.validate();
        if (output_dir.empty()) throw ConfigError("output_dir must not be empty");
    }
};

namespace cfgdetail {

template <typename T>
T get_field(const nlohmann::json& j, const std::string& context, const std::string& key,
            const T& fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError(context + "." + key + ": wrong type");
    }
}

}  // namespace cfgdetail

inline GmmWorld world_from_json(const nlohmann::json& j) {
    GmmWorld world;
    world.dims = cfgdetail::get_field(j, "world", "dims", 2);
    if (!j.contains("classes")) throw ConfigError("world.classes: missing");
    if (!j.at("classes").is_array()) throw ConfigError("world.classes: must be an array");
    for (const auto& jc : j.at("classes")) {
        GmmClass k;
        if (!jc.contains("mean") || !jc.at("mean").is_array())
            throw ConfigError("world.classes[].mean: missing or not an array");
        const auto mean = jc.at("mean").get<std::vector<double>>();
        k.mean = Eigen::Map<const Vec>(mean.data(), static_cast<Eigen::Index>(mean.size()));
        k.stddev = cfgdetail::get_field(jc, "world.classes[]", "std", 1.0);
        k.prior = cfgdetail::get_field(jc, "world.classes[]", "prior", 0.0);
        world.classes.push_back(std::move(k));
    }
    world.validate();
    return world;
}

inline nlohmann::json world_to_json(const GmmWorld& world) {
    nlohmann::json classes = nlohmann::json::array();
    for (const auto& k : world.classes) {
        classes.push_back({{"mean", std::vector<double>(k.mean.data(), k.mean.data() + k.mean.size())},
                           {"std", k.stddev},
                           {"prior", k.prior}});
    }
    return {{"dims", world.dims}, {"classes", classes}};
}

inline RunConfig run_config_from_json(const nlohmann::json& j) {
    RunConfig cfg;
    if (j.contains("world")) cfg.world = world_from_json(j.at("world"));
    if (j.contains("schedule")) {
        const auto& js = j.at("schedule");
        cfg.schedule.lambda_min = cfgdetail::get_field(js, "schedule", "lambda_min", -20.0);
        cfg.schedule.lambda_max = cfgdetail::get_field(js, "schedule", "lambda_max", 20.0);
    }
    if (j.contains("train")) {
        const auto& jt = j.at("train");
        cfg.train.p_uncond = cfgdetail::get_field(jt, "train", "p_uncond", 0.1);
        cfg.train.steps = cfgdetail::get_field(jt, "train", "steps", 20000);
        cfg.train.batch = cfgdetail::get_field(jt, "train", "batch", 256);
        cfg.train.learning_rate = cfgdetail::get_field(jt, "train", "learning_rate", 1e-3);
        cfg.train.seed = cfgdetail::get_field<std::uint64_t>(jt, "train", "seed", 0);
    }
    if (j.contains("sampler")) {
        const auto& js = j.at("sampler");
        cfg.sampler.steps = cfgdetail::get_field(js, "sampler", "T", 1024);
        cfg.sampler.v = cfgdetail::get_field(js, "sampler", "v", 0.3);
    }
    if (j.contains("guidance")) {
        const auto& jg = j.at("guidance");
        cfg.guidance.mode = guidance_mode_from_string(
            cfgdetail::get_field<std::string>(jg, "guidance", "mode", "classifier-free"));
        cfg.guidance.w = cfgdetail::get_field(jg, "guidance", "w", 0.0);
    }
    cfg.output_dir = cfgdetail::get_field<std::string>(j, "config", "output_dir", "out");
    cfg.seed = cfgdetail::get_field<std::uint64_t>(j, "config", "seed", 0);
    cfg.sampler.schedule = cfg.schedule;
    cfg.validate();
    return cfg;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file: " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config parse error in " + path.string() + ": " + e.what());
    }
    return run_config_from_json(j);
}

inline nlohmann::json schedule_to_json(const Schedule& s) {
    return {{"lambda_min", s.lambda_min}, {"lambda_max", s.lambda_max}};
}

// Fully resolved config echo, embedded in every output sidecar.
inline nlohmann::json run_config_to_json(const RunConfig& cfg) {
    return {{"world", world_to_json(cfg.world)},
            {"schedule", schedule_to_json(cfg.schedule)},
            {"train",
             {{"p_uncond", cfg.train.p_uncond},
              {"steps", cfg.train.steps},
              {"batch", cfg.train.batch},
              {"learning_rate", cfg.train.learning_rate},
              {"seed", cfg.train.seed}}},
            {"sampler", {{"T", cfg.sampler.steps}, {"v", cfg.sampler.v}}},
            {"guidance", {{"mode", to_string(cfg.guidance.mode)}, {"w", cfg.guidance.w}}},
            {"output_dir", cfg.output_dir},
            {"seed", cfg.seed}};
}

}  // namespace glab
