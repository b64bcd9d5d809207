// Command-line front end: train, sample, density, sweep and check
// subcommands over a single JSON run config. Exit codes: 0 success,
// 1 self-check failure, 2 usage/config error, 3 numeric failure.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "glab/checkpoint.hpp"
#include "glab/config.hpp"
#include "glab/denoiser.hpp"
#include "glab/io.hpp"
#include "glab/metrics.hpp"
#include "glab/net.hpp"
#include "glab/sampler.hpp"
#include "glab/selfcheck.hpp"
#include "glab/trainer.hpp"

namespace fs = std::filesystem;
using namespace glab;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheckFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

struct CliOptions {
    std::string config_path;
    std::string output_dir;  // overrides config when set

    // sample/sweep source
    std::string checkpoint_path;
    bool use_oracle = false;

    std::vector<double> w_list;
    std::optional<double> w;
    std::optional<int> klass;
    std::optional<int> n;
    std::optional<int> steps;        // sampler T
    std::optional<double> p_uncond;  // train override
    std::optional<std::uint64_t> seed;

    int resolution = 256;
    std::vector<double> bounds;  // x_lo x_hi y_lo y_hi

    double perturb_transition = 0.0;  // hidden fault-injection for `check`
};

RunConfig load_config_with_overrides(const CliOptions& opt) {
    RunConfig cfg = load_run_config(opt.config_path);
    if (!opt.output_dir.empty()) cfg.output_dir = opt.output_dir;
    if (opt.w) cfg.guidance.w = *opt.w;
    if (opt.steps) cfg.sampler.steps = *opt.steps;
    if (opt.p_uncond) cfg.train.p_uncond = *opt.p_uncond;
    if (opt.seed) cfg.seed = *opt.seed;
    cfg.sampler.schedule = cfg.schedule;
    cfg.validate();
    return cfg;
}

fs::path prepare_output_dir(const RunConfig& cfg) {
    fs::path dir(cfg.output_dir);
    fs::create_directories(dir);
    return dir;
}

json sidecar_base(const RunConfig& cfg) {
    return {{"config", run_config_to_json(cfg)}};
}

int cmd_train(const CliOptions& opt) {
    const RunConfig cfg = load_config_with_overrides(opt);
    const fs::path dir = prepare_output_dir(cfg);

    NetSpec spec;
    spec.data_dim = cfg.world.dims;
    spec.num_classes = cfg.world.num_classes();
    DenoiserNet net(spec, cfg.train.seed);

    std::vector<std::pair<int, double>> log;
    log.reserve(static_cast<std::size_t>(cfg.train.steps));
    DenoiserNet trained = train(std::move(net), cfg.world, cfg.train, cfg.schedule,
                                [&](int step, double loss) { log.emplace_back(step, loss); });

    const fs::path ckpt_path = dir / "checkpoint.bin";
    save_checkpoint(ckpt_path, trained, cfg.schedule, cfg.train, cfg.seed);
    write_text_file(dir / "training_log.csv", training_log_csv(log));
    json sidecar = sidecar_base(cfg);
    sidecar["checkpoint"] = ckpt_path.filename().string();
    sidecar["final_loss"] = log.empty() ? 0.0 : log.back().second;
    write_json_file(dir / "train_run.json", sidecar);
    std::cout << "wrote " << ckpt_path.string() << " (" << trained.param_count()
              << " params)\n";
    return kExitOk;
}

// Runs fn with either the oracle denoiser or a restored checkpoint.
template <typename Fn>
int with_denoiser(const CliOptions& opt, const RunConfig& cfg, Fn&& fn) {
    if (opt.use_oracle) {
        OracleDenoiser oracle(cfg.world);
        return fn(oracle);
    }
    if (opt.checkpoint_path.empty())
        throw ConfigError("need --oracle or --checkpoint <file>");
    const Checkpoint ckpt = load_checkpoint(opt.checkpoint_path);
    if (ckpt.schedule.lambda_min != cfg.schedule.lambda_min ||
        ckpt.schedule.lambda_max != cfg.schedule.lambda_max)
        throw ConfigError("checkpoint schedule [" + std::to_string(ckpt.schedule.lambda_min) +
                          ", " + std::to_string(ckpt.schedule.lambda_max) +
                          "] does not match config schedule [" +
                          std::to_string(cfg.schedule.lambda_min) + ", " +
                          std::to_string(cfg.schedule.lambda_max) + "]");
    if (ckpt.net_spec.data_dim != cfg.world.dims ||
        ckpt.net_spec.num_classes != cfg.world.num_classes())
        throw ConfigError("checkpoint was trained for a different world shape");
    const DenoiserNet net = ckpt.restore();
    return fn(net);
}

int cmd_sample(const CliOptions& opt) {
    const RunConfig cfg = load_config_with_overrides(opt);
    const fs::path dir = prepare_output_dir(cfg);
    const int n = opt.n.value_or(1000);

    return with_denoiser(opt, cfg, [&](const auto& denoiser) {
        const LabeledSamples samples = sample_batch(denoiser, cfg.world, cfg.guidance,
                                                    cfg.sampler, opt.klass, n, cfg.seed);
        write_text_file(dir / "samples.csv", samples_csv(samples));
        json sidecar = sidecar_base(cfg);
        sidecar["n"] = n;
        sidecar["source"] = opt.use_oracle ? "oracle" : opt.checkpoint_path;
        if (opt.klass) sidecar["class"] = *opt.klass;
        write_json_file(dir / "samples.json", sidecar);
        std::cout << "wrote " << (dir / "samples.csv").string() << " (" << samples.count()
                  << " rows)\n";
        return kExitOk;
    });
}

std::string w_suffix(double w) {
    std::string s = fmt_double(w);
    for (char& c : s)
        if (c == '.') c = 'p';
    return s;
}

int cmd_density(const CliOptions& opt) {
    const RunConfig cfg = load_config_with_overrides(opt);
    const fs::path dir = prepare_output_dir(cfg);
    std::vector<double> ws = opt.w_list;
    if (ws.empty()) ws = {0.0, 1.0, 2.0, 4.0};

    GridSpec grid_spec;
    grid_spec.resolution = opt.resolution;
    if (!opt.bounds.empty()) {
        if (opt.bounds.size() != 4)
            throw ConfigError("--bounds needs 4 values: x_lo x_hi y_lo y_hi");
        grid_spec.x_lo = opt.bounds[0];
        grid_spec.x_hi = opt.bounds[1];
        grid_spec.y_lo = opt.bounds[2];
        grid_spec.y_hi = opt.bounds[3];
    }

    std::vector<std::pair<double, std::vector<double>>> entropies;
    for (const double w : ws) {
        const DensityGrid grid = guided_density_grid(cfg.world, w, grid_spec);
        std::vector<double> per_class;
        for (int c = 0; c < cfg.world.num_classes(); ++c)
            per_class.push_back(differential_entropy(grid, c));
        entropies.emplace_back(w, per_class);

        const std::string name = "density_w" + w_suffix(w);
        write_text_file(dir / (name + ".csv"), density_csv(grid));
        json sidecar = sidecar_base(cfg);
        sidecar["w"] = w;
        sidecar["resolution"] = grid_spec.resolution;
        sidecar["bounds"] = {grid_spec.x_lo, grid_spec.x_hi, grid_spec.y_lo, grid_spec.y_hi};
        sidecar["entropy"] = per_class;
        write_json_file(dir / (name + ".json"), sidecar);
    }
    write_text_file(dir / "density_summary.csv", density_summary_csv(entropies));
    std::cout << "wrote " << ws.size() << " density grids to " << dir.string() << "\n";
    return kExitOk;
}

int cmd_sweep(const CliOptions& opt) {
    const RunConfig cfg = load_config_with_overrides(opt);
    const fs::path dir = prepare_output_dir(cfg);
    std::vector<double> ws = opt.w_list;
    if (ws.empty()) ws = {0.0, 1.0, 2.0, 4.0};
    const int n = opt.n.value_or(2000);

    return with_denoiser(opt, cfg, [&](const auto& denoiser) {
        const std::vector<SweepRow> rows =
            sweep(cfg.world, denoiser, ws, cfg.sampler, n, cfg.seed, cfg.guidance.mode);
        write_text_file(dir / "sweep.csv", sweep_csv(rows));
        json sidecar = sidecar_base(cfg);
        sidecar["n"] = n;
        sidecar["w_list"] = ws;
        sidecar["source"] = opt.use_oracle ? "oracle" : opt.checkpoint_path;
        write_json_file(dir / "sweep.json", sidecar);
        std::cout << "wrote " << (dir / "sweep.csv").string() << " (" << rows.size()
                  << " rows)\n";
        return kExitOk;
    });
}

int cmd_check(const CliOptions& opt) {
    CheckOptions check_opt;
    if (opt.seed) check_opt.seed = *opt.seed;
    check_opt.transition_variance_perturbation = opt.perturb_transition;
    const std::vector<CheckResult> results = run_self_checks(check_opt);

    std::size_t width = 0;
    for (const auto& r : results) width = std::max(width, r.name.size());
    int failures = 0;
    for (const auto& r : results) {
        std::cout << (r.passed ? "[PASS] " : "[FAIL] ") << r.name
                  << std::string(width - r.name.size() + 2, ' ') << r.detail << "\n";
        if (!r.passed) ++failures;
    }
    std::cout << results.size() << " checks, " << failures << " failed\n";
    return failures == 0 ? kExitOk : kExitCheckFailure;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Continuous-time diffusion toy lab with classifier-free guidance"};
    app.require_subcommand(1);

    CliOptions opt;

    auto add_config = [&](CLI::App* sub) {
        sub->add_option("--config", opt.config_path, "JSON run config")->required();
        sub->add_option("--out", opt.output_dir, "override config output_dir");
        sub->add_option("--seed", opt.seed, "override config seed");
    };
    auto add_source = [&](CLI::App* sub) {
        sub->add_flag("--oracle", opt.use_oracle, "use the exact-score denoiser");
        sub->add_option("--checkpoint", opt.checkpoint_path, "trained checkpoint file");
    };

    CLI::App* train_cmd = app.add_subcommand("train", "joint conditional/unconditional denoiser training");
    add_config(train_cmd);
    train_cmd->add_option("--p-uncond", opt.p_uncond, "override train.p_uncond");

    CLI::App* sample_cmd = app.add_subcommand("sample", "guided ancestral sampling");
    add_config(sample_cmd);
    add_source(sample_cmd);
    sample_cmd->add_option("--w", opt.w, "guidance strength");
    sample_cmd->add_option("--class", opt.klass, "fixed class index (default: draw from priors)");
    sample_cmd->add_option("--n", opt.n, "number of samples");
    sample_cmd->add_option("--T", opt.steps, "sampler step count");

    CLI::App* density_cmd = app.add_subcommand("density", "guided density grids");
    add_config(density_cmd);
    density_cmd->add_option("--w", opt.w_list, "guidance strengths (default 0 1 2 4)");
    density_cmd->add_option("--resolution", opt.resolution, "grid points per axis");
    density_cmd->add_option("--bounds", opt.bounds, "x_lo x_hi y_lo y_hi")->expected(4);

    CLI::App* sweep_cmd = app.add_subcommand("sweep", "guidance-strength metric sweep");
    add_config(sweep_cmd);
    add_source(sweep_cmd);
    sweep_cmd->add_option("--w", opt.w_list, "guidance strengths (default 0 1 2 4)");
    sweep_cmd->add_option("--n", opt.n, "samples per strength");
    sweep_cmd->add_option("--T", opt.steps, "sampler step count");

    CLI::App* check_cmd = app.add_subcommand("check", "run the analytic identity battery");
    check_cmd->add_option("--seed", opt.seed, "probe seed");
    check_cmd->add_option("--perturb-transition", opt.perturb_transition,
                          "fault injection: scale the transition variance inside the "
                          "marginal-composition check")
        ->group("");  // hidden

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (train_cmd->parsed()) return cmd_train(opt);
        if (sample_cmd->parsed()) return cmd_sample(opt);
        if (density_cmd->parsed()) return cmd_density(opt);
        if (sweep_cmd->parsed()) return cmd_sweep(opt);
        if (check_cmd->parsed()) return cmd_check(opt);
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const QuadratureError& e) {
        std::cerr << "quadrature failure: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    }
    return kExitConfig;
}
