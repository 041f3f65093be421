#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "covtune/covtune.hpp"

namespace {

constexpr const char* kConfigReference = R"(Configuration keys (JSON):
  out_dir                       output directory; overridden by --out

scalar command:
  scalar.B_A                    assumed background variance (default 3.0)
  scalar.B_E                    exact background variance (default 3.0)
  scalar.R                      observation variance (default 1.0)
  scalar.H                      scalar observation operator (default 1.0)
  scalar.alpha                  trace blend in [0,1] (default 1.0)
  scalar.iters                  iterations (default 10)

gen-h command:
  operator.state_dim            state dimension (default 200)
  operator.obs_dim              observation dimension (default 100)
  operator.p                    selection probability in (0,1) (default 0.01)
  operator.seed                 operator seed (default 1); --seed overrides
  out_file                      CSV file name (default H.csv)

static command:
  truth.source                  shallow_water | vector (default shallow_water)
  truth.solver.nx|ny            grid cells (default 100 x 100)
  truth.solver.dx|dy            grid spacing, mm (default 1.0)
  truth.solver.dt               time step, s (default 1e-6)
  truth.solver.g                gravity, scaled (default 1.0)
  truth.solver.b                damping, 1/s (default 0.0)
  truth.init.base_height        still-water height, mm (default 1.0)
  truth.init.bump               cylinder extra height, mm (default 0.1)
  truth.init.center             [row, col] (default [50, 50])
  truth.init.radius             cylinder radius, grid units (default 10.0)
  truth.steps                   solver steps to the snapshot (default 1500)
  truth.values                  explicit truth vector (source vector only)
  window.row0|col0              subdomain origin (default 50, 60)
  window.rows|cols              subdomain size (default 10 x 10)
  operator.*                    as in gen-h, or operator.file for a pinned CSV
  noise.mode                    state_independent | state_dependent
  noise.sigma_b                 background error std, model units (default 0.1)
  noise.sigma_o                 observation error std (default 0.01)
  noise.mu_b                    relative background error (default 0.10)
  noise.mu_o                    relative observation error (default 0.01)
  noise.kernel.kind             exponential | balgovind | gaussian (default balgovind)
  noise.kernel.length           correlation length, grid units (default 2.0)
  assumed.kernel.kind|length    first-guess correlation model (default exponential, 3.0)
  assumed.sigma                 first-guess error std (default 0.05)
  assumed.r_variance            number or "mean_exact" (defaults: sigma_o^2
                                state-independent, mean_exact state-dependent)
  assumed.use_exact_background  replace first guess by the exact covariance
  tuning.method                 3dvar | naive | tracked | augmented (required)
  tuning.alpha                  trace blend in [0,1] (default 0.0)
  tuning.max_iters              iterations (default 10)
  tuning.innovation_rel_tol     early-stop tolerance, 0 disables (default 0)
  trials                        Monte-Carlo trials (default 200); --trials overrides
  seed                          master seed (default 0); --seed overrides
  threads                       worker threads, 0 = auto (default 1); --threads overrides

dynamic command:
  solver.*, init.*              as under truth.* above
  window.*, operator.*, noise.* as above (state_independent only)
  assumed.kernel|sigma          as above
  chain.interval_steps          solver steps between analyses (default 2000)
  chain.cycles                  assimilation cycles (default 10)
  chain.placement               first_step_only | every_step | never
  chain.inner_iters             tuning iterations per placement (default 10)
  chain.alpha                   trace blend (default 0.0)
  trials                        default 100; seed, threads as above

Exit codes: 0 success, 2 configuration error, 3 numerical failure.)";

struct CommonArgs {
    std::string config_path;
    std::string out_dir;
    std::int64_t seed = -1;
    int trials = -1;
    int threads = -1;
};

void add_common(CLI::App* sub, CommonArgs& args, bool with_run_overrides) {
    sub->add_option("--config", args.config_path, "JSON configuration file");
    sub->add_option("--out", args.out_dir, "output directory (overrides out_dir)");
    sub->add_option("--seed", args.seed, "override the configured seed");
    if (with_run_overrides) {
        sub->add_option("--trials", args.trials, "override the configured trial count");
        sub->add_option("--threads", args.threads, "override the configured thread count");
    }
}

covtune::json load_config(const CommonArgs& args, const std::string& command) {
    covtune::json config = args.config_path.empty()
                               ? covtune::json::object()
                               : covtune::load_json_file(args.config_path);
    covtune::require_config(config.is_object(), "top-level config must be a JSON object");
    if (args.seed >= 0) {
        if (command == "gen-h")
            config["operator"]["seed"] = static_cast<std::uint64_t>(args.seed);
        else
            config["seed"] = static_cast<std::uint64_t>(args.seed);
    }
    if (args.trials >= 0) config["trials"] = args.trials;
    if (args.threads >= 0) config["threads"] = args.threads;
    return config;
}

std::string resolve_out_dir(const CommonArgs& args, const covtune::json& config) {
    if (!args.out_dir.empty()) return args.out_dir;
    if (config.contains("out_dir")) return config.at("out_dir").get<std::string>();
    throw covtune::config_error("no output directory: set --out or config out_dir");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Iterative background-error covariance tuning experiments"};
    app.footer(kConfigReference);
    app.require_subcommand(1);

    CommonArgs scalar_args, gen_h_args, static_args, dynamic_args;
    CLI::App* scalar = app.add_subcommand("scalar", "scalar variance evolution study");
    add_common(scalar, scalar_args, false);
    CLI::App* gen_h = app.add_subcommand("gen-h", "generate and pin an observation operator");
    add_common(gen_h, gen_h_args, false);
    CLI::App* cmd_static_sub =
        app.add_subcommand("static", "Monte-Carlo twin experiment at a fixed time");
    add_common(cmd_static_sub, static_args, true);
    CLI::App* cmd_dynamic_sub =
        app.add_subcommand("dynamic", "sequential assimilation chain experiment");
    add_common(cmd_dynamic_sub, dynamic_args, true);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (scalar->parsed()) {
            const auto config = load_config(scalar_args, "scalar");
            covtune::cmd_scalar(config, resolve_out_dir(scalar_args, config));
        } else if (gen_h->parsed()) {
            const auto config = load_config(gen_h_args, "gen-h");
            covtune::cmd_gen_h(config, resolve_out_dir(gen_h_args, config));
        } else if (cmd_static_sub->parsed()) {
            const auto config = load_config(static_args, "static");
            covtune::cmd_static(config, resolve_out_dir(static_args, config));
        } else if (cmd_dynamic_sub->parsed()) {
            const auto config = load_config(dynamic_args, "dynamic");
            covtune::cmd_dynamic(config, resolve_out_dir(dynamic_args, config));
        }
    } catch (const covtune::config_error& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 2;
    } catch (const covtune::json::exception& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 2;
    } catch (const covtune::numerical_error& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
