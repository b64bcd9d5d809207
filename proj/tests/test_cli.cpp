#include <catch2/catch.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include <nlohmann/json.hpp>

#include "glab/checkpoint.hpp"
#include "glab/net.hpp"

using namespace glab;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        static int counter = 0;
        path = fs::temp_directory_path() /
               ("glab_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

int run_cli(const std::string& args) {
    const std::string cmd = std::string(GLAB_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    REQUIRE(status != -1);
    return WEXITSTATUS(status);
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json base_config(const fs::path& out_dir) {
    return {
        {"world",
         {{"dims", 2},
          {"classes",
           {{{"mean", {0.0, 2.0}}, {"std", 0.3}, {"prior", 1.0 / 3}},
            {{"mean", {-1.7320508075688772, -1.0}}, {"std", 0.3}, {"prior", 1.0 / 3}},
            {{"mean", {1.7320508075688772, -1.0}}, {"std", 0.3}, {"prior", 1.0 / 3}}}}}},
        {"schedule", {{"lambda_min", -20.0}, {"lambda_max", 20.0}}},
        {"train",
         {{"p_uncond", 0.1}, {"steps", 5}, {"batch", 8}, {"learning_rate", 1e-3}, {"seed", 11}}},
        {"sampler", {{"T", 16}, {"v", 0.3}}},
        {"guidance", {{"mode", "classifier-free"}, {"w", 0.0}}},
        {"output_dir", out_dir.string()},
        {"seed", 5}};
}

fs::path write_config(const TempDir& dir, const json& cfg, const std::string& name = "cfg.json") {
    const fs::path p = dir.path / name;
    std::ofstream out(p);
    out << cfg.dump(2);
    return p;
}

}  // namespace

TEST_CASE("cli: check passes and fault injection fails", "[cli]") {
    CHECK(run_cli("check") == 0);
    CHECK(run_cli("check --perturb-transition 1e-3") == 1);
}

TEST_CASE("cli: zero-step training writes the initialization", "[cli]") {
    TempDir dir;
    json cfg = base_config(dir.path / "out");
    cfg["train"]["steps"] = 0;
    const fs::path cfg_path = write_config(dir, cfg);

    REQUIRE(run_cli("train --config " + cfg_path.string()) == 0);
    const Checkpoint ckpt = load_checkpoint(dir.path / "out" / "checkpoint.bin");

    NetSpec spec;
    spec.data_dim = 2;
    spec.num_classes = 3;
    const DenoiserNet fresh(spec, 11);
    CHECK((ckpt.params - fresh.params()).cwiseAbs().maxCoeff() == 0.0);
    CHECK(read_file(dir.path / "out" / "training_log.csv") == "step,loss\n");
}

TEST_CASE("cli: training twice gives identical checkpoints", "[cli]") {
    TempDir dir;
    const fs::path cfg_a = write_config(dir, base_config(dir.path / "a"), "a.json");
    const fs::path cfg_b = write_config(dir, base_config(dir.path / "b"), "b.json");
    REQUIRE(run_cli("train --config " + cfg_a.string()) == 0);
    REQUIRE(run_cli("train --config " + cfg_b.string()) == 0);
    CHECK(read_file(dir.path / "a" / "checkpoint.bin") ==
          read_file(dir.path / "b" / "checkpoint.bin"));
    CHECK(read_file(dir.path / "a" / "training_log.csv") ==
          read_file(dir.path / "b" / "training_log.csv"));
}

TEST_CASE("cli: oracle sampling determinism and the empty batch", "[cli]") {
    TempDir dir;
    const fs::path cfg = write_config(dir, base_config(dir.path / "out"));

    SECTION("n = 0 writes a header-only CSV") {
        REQUIRE(run_cli("sample --config " + cfg.string() + " --oracle --n 0") == 0);
        CHECK(read_file(dir.path / "out" / "samples.csv") == "class,x_0,x_1\n");
    }
    SECTION("same flags and seed give identical bytes") {
        REQUIRE(run_cli("sample --config " + cfg.string() +
                        " --oracle --n 40 --w 1.5 --out " + (dir.path / "r1").string()) == 0);
        REQUIRE(run_cli("sample --config " + cfg.string() +
                        " --oracle --n 40 --w 1.5 --out " + (dir.path / "r2").string()) == 0);
        CHECK(read_file(dir.path / "r1" / "samples.csv") ==
              read_file(dir.path / "r2" / "samples.csv"));
        const json sidecar = json::parse(read_file(dir.path / "r1" / "samples.json"));
        CHECK(sidecar.at("config").at("guidance").at("w").get<double>() == 1.5);
    }
    SECTION("a fixed class is honored") {
        REQUIRE(run_cli("sample --config " + cfg.string() + " --oracle --n 12 --class 2") == 0);
        std::istringstream csv(read_file(dir.path / "out" / "samples.csv"));
        std::string line;
        std::getline(csv, line);
        int rows = 0;
        while (std::getline(csv, line)) {
            CHECK(line.rfind("2,", 0) == 0);
            ++rows;
        }
        CHECK(rows == 12);
    }
    SECTION("unguided oracle samples recover the class mean") {
        REQUIRE(run_cli("sample --config " + cfg.string() +
                        " --oracle --n 400 --T 128 --w 0 --class 0") == 0);
        std::istringstream csv(read_file(dir.path / "out" / "samples.csv"));
        std::string line;
        std::getline(csv, line);
        double sum_x = 0.0, sum_y = 0.0;
        int rows = 0;
        while (std::getline(csv, line)) {
            double x, y;
            int klass;
            char comma;
            std::istringstream row(line);
            row >> klass >> comma >> x >> comma >> y;
            sum_x += x;
            sum_y += y;
            ++rows;
        }
        REQUIRE(rows == 400);
        // Class 0 sits at (0, 2) with std 0.3; 4 se = 0.06.
        CHECK(std::abs(sum_x / rows - 0.0) < 0.06);
        CHECK(std::abs(sum_y / rows - 2.0) < 0.06);
    }
}

TEST_CASE("cli: config errors exit 2", "[cli]") {
    TempDir dir;
    json cfg = base_config(dir.path / "out");
    cfg["train"]["p_uncond"] = 1.5;
    const fs::path bad = write_config(dir, cfg);
    CHECK(run_cli("train --config " + bad.string()) == 2);
    CHECK(run_cli("sample --config " + bad.string() + " --oracle") == 2);
    CHECK(run_cli("sample --config missing.json --oracle") == 2);
    CHECK(run_cli("sample") == 2);
    CHECK(run_cli("frobnicate") == 2);
}

TEST_CASE("cli: checkpoint/config schedule mismatch exits 2", "[cli]") {
    TempDir dir;
    json cfg = base_config(dir.path / "out");
    cfg["train"]["steps"] = 0;
    const fs::path cfg_path = write_config(dir, cfg);
    REQUIRE(run_cli("train --config " + cfg_path.string()) == 0);

    json other = base_config(dir.path / "out2");
    other["schedule"]["lambda_max"] = 10.0;
    const fs::path other_path = write_config(dir, other, "other.json");
    CHECK(run_cli("sample --config " + other_path.string() + " --checkpoint " +
                  (dir.path / "out" / "checkpoint.bin").string() + " --n 4") == 2);
}

TEST_CASE("cli: density grids and the quadrature failure path", "[cli]") {
    TempDir dir;
    const fs::path cfg = write_config(dir, base_config(dir.path / "out"));

    SECTION("grids, sidecars and a monotone entropy summary") {
        REQUIRE(run_cli("density --config " + cfg.string() + " --w 0 1 --resolution 96") == 0);
        CHECK(fs::exists(dir.path / "out" / "density_w0.csv"));
        CHECK(fs::exists(dir.path / "out" / "density_w1.csv"));
        CHECK(fs::exists(dir.path / "out" / "density_w1.json"));

        std::istringstream summary(read_file(dir.path / "out" / "density_summary.csv"));
        std::string line;
        std::getline(summary, line);
        CHECK(line == "w,class,entropy");
        std::map<std::pair<double, int>, double> entropy;
        double w, h;
        int c;
        char comma;
        while (summary >> w >> comma >> c >> comma >> h) entropy[{w, c}] = h;
        REQUIRE(entropy.size() == 6);
        for (int cls = 0; cls < 3; ++cls)
            CHECK(entropy[{1.0, cls}] < entropy[{0.0, cls}]);
    }
    SECTION("a box that cuts off mass exits 3") {
        CHECK(run_cli("density --config " + cfg.string() +
                      " --w 1 --bounds -1 1 -1 1 --resolution 96") == 3);
    }
}

TEST_CASE("cli: sweep emits one row per strength", "[cli]") {
    TempDir dir;
    const fs::path cfg = write_config(dir, base_config(dir.path / "out"));
    REQUIRE(run_cli("sweep --config " + cfg.string() + " --oracle --w 0.5 --n 32") == 0);
    const std::string csv = read_file(dir.path / "out" / "sweep.csv");
    CHECK(csv.rfind("w,confidence,frechet,class_entropy,n,seed\n0.5,", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 2);
}
