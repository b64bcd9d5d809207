#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "glab/errors.hpp"
#include "glab/gmm_world.hpp"
#include "glab/metrics.hpp"
#include "glab/sampler.hpp"

namespace glab {

using json = nlohmann::json;

// Shortest round-trippable decimal form.
inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot open for writing: " + path.string());
    out << content;
}

inline void write_json_file(const std::filesystem::path& path, const json& j) {
    write_text_file(path, j.dump(2) + "\n");
}

// class, x_0, ..., x_{d-1}
inline std::string samples_csv(const LabeledSamples& samples) {
    std::string out = "class";
    for (int j = 0; j < samples.dims(); ++j) out += ",x_" + std::to_string(j);
    out += "\n";
    for (int i = 0; i < samples.count(); ++i) {
        out += std::to_string(samples.labels[static_cast<std::size_t>(i)]);
        for (int j = 0; j < samples.dims(); ++j) out += "," + fmt_double(samples.x(i, j));
        out += "\n";
    }
    return out;
}

// w, confidence, frechet, class_entropy, n, seed
inline std::string sweep_csv(const std::vector<SweepRow>& rows) {
    std::string out = "w,confidence,frechet,class_entropy,n,seed\n";
    for (const auto& r : rows) {
        out += fmt_double(r.w) + "," + fmt_double(r.confidence) + "," + fmt_double(r.frechet) +
               "," + fmt_double(r.class_entropy) + "," + std::to_string(r.n) + "," +
               std::to_string(r.seed) + "\n";
    }
    return out;
}

// step, loss
inline std::string training_log_csv(const std::vector<std::pair<int, double>>& log) {
    std::string out = "step,loss\n";
    for (const auto& [step, loss] : log)
        out += std::to_string(step) + "," + fmt_double(loss) + "\n";
    return out;
}

// x, y, class_0, ..., mixture; y varies slowest.
inline std::string density_csv(const DensityGrid& grid) {
    std::string out = "x,y";
    for (std::size_t c = 0; c < grid.class_density.size(); ++c)
        out += ",class_" + std::to_string(c);
    out += ",mixture\n";
    const int n = grid.spec.resolution;
    for (int iy = 0; iy < n; ++iy)
        for (int ix = 0; ix < n; ++ix) {
            out += fmt_double(grid.x_at(ix)) + "," + fmt_double(grid.y_at(iy));
            for (const auto& d : grid.class_density) out += "," + fmt_double(d(iy, ix));
            out += "," + fmt_double(grid.mixture(iy, ix)) + "\n";
        }
    return out;
}

// w, class, entropy
inline std::string density_summary_csv(
    const std::vector<std::pair<double, std::vector<double>>>& entropies) {
    std::string out = "w,class,entropy\n";
    for (const auto& [w, per_class] : entropies)
        for (std::size_t c = 0; c < per_class.size(); ++c)
            out += fmt_double(w) + "," + std::to_string(c) + "," + fmt_double(per_class[c]) +
                   "\n";
    return out;
}

}  // namespace glab
