#pragma once

#include <chrono>
#include <iostream>
#include <sstream>
#include <string>

#include "covtune/chain.hpp"
#include "covtune/config.hpp"
#include "covtune/io.hpp"
#include "covtune/twin.hpp"

namespace covtune {

namespace detail {

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline void echo_config(const json& resolved, const std::string& out_dir) {
    write_text_file(out_dir + "/config_resolved.json", resolved.dump(2) + "\n");
}

inline std::string config_hash(const json& resolved) {
    std::ostringstream hex;
    hex << std::hex << fnv1a64(resolved.dump());
    return hex.str();
}

} // namespace detail

// Scalar study: iterate the three schemes on 1x1 covariances and write the
// assumed and exact variance per iteration.
// Output: scalar.csv (iter, method, assumed_var, exact_var), config echo.
inline void cmd_scalar(const json& config, const std::string& out_dir) {
    cfg::check_keys(config, "config", {"scalar", "out_dir"});
    const ScalarConfig c =
        parse_scalar_config(config.contains("scalar") ? config.at("scalar") : json::object());
    ensure_directory(out_dir);

    const auto m1 = [](double v) { return Eigen::MatrixXd::Constant(1, 1, v); };
    const LinearObservationOperator h{m1(c.H)};
    const std::vector<Point> coords = {{0.0, 0.0}};

    std::ostringstream csv;
    csv << "iter,method,assumed_var,exact_var\n";
    for (Method method : {Method::Naive, Method::Tracked, Method::Augmented}) {
        TuningConfig tuning{method, c.alpha, c.iters, 0.0};
        const CovarianceTrack track = build_covariance_track(
            m1(c.B_A), m1(c.R), m1(c.B_E), m1(c.R), h, tuning, coords);
        for (int n = 0; n <= c.iters; ++n) {
            csv << n << ',' << to_string(method) << ','
                << format_g17(track.B_assumed[static_cast<std::size_t>(n)](0, 0)) << ','
                << format_g17(track.exact.B_E[static_cast<std::size_t>(n)](0, 0)) << '\n';
        }
    }
    write_text_file(out_dir + "/scalar.csv", csv.str());

    json resolved{{"scalar", to_json(c)}};
    detail::echo_config(resolved, out_dir);
}

// Generate the observation operator, pin it to CSV and print the row-sum
// histogram.
inline void cmd_gen_h(const json& config, const std::string& out_dir) {
    const GenHConfig c = parse_gen_h_config(config);
    ensure_directory(out_dir);
    const LinearObservationOperator h = generate_h(c.spec);
    save_operator_csv(h, out_dir + "/" + c.out_file);

    std::cout << "row-sum histogram (sample size -> rows):\n";
    for (const auto& [n, count] : row_count_histogram(h))
        std::cout << "  " << n << " -> " << count << "\n";

    json resolved = to_json(c);
    detail::echo_config(resolved, out_dir);
}

// Resolved inputs of a static run, shared with the test suite.
struct ResolvedStatic {
    StaticRunSetup setup;
    ExactCovariances exact;
};

inline ResolvedStatic resolve_static(const StaticConfig& c) {
    ResolvedStatic r;
    r.setup.coords = grid_coordinates(c.window.rows, c.window.cols);
    r.setup.H = resolve_operator(c.op);
    require_config(r.setup.H.state_dim() == c.window.size(),
                   "operator state_dim must match the subdomain state size");
    r.setup.x_t = resolve_truth(c.truth, c.window);
    r.setup.noise = c.noise;
    r.exact = build_exact_covariances(c.noise, r.setup.x_t, r.setup.H, r.setup.coords);

    r.setup.B_A0 = c.assumed.use_exact_background
                       ? r.exact.B_E
                       : build_assumed_background(c.assumed.kernel, c.assumed.sigma,
                                                  r.setup.coords);
    double r_var;
    if (c.assumed.r_variance_given)
        r_var = c.assumed.r_variance;
    else if (c.assumed.r_mean_exact || c.noise.mode == NoiseMode::StateDependent)
        r_var = r.exact.R_E.diagonal().mean();
    else
        r_var = c.noise.sigma_o * c.noise.sigma_o;
    r.setup.R_A =
        r_var * Eigen::MatrixXd::Identity(r.setup.H.obs_dim(), r.setup.H.obs_dim());

    r.setup.tuning = c.tuning;
    r.setup.trials = c.trials;
    r.setup.master_seed = c.seed;
    r.setup.threads = c.threads;
    return r;
}

// Monte-Carlo twin experiment.
// Outputs: aggregate.csv (iter, mean_err, std_err, mean_innov,
// mean_trace_BA), summary.json (correlation metrics, config echo and hash,
// runtime), config echo.
inline void cmd_static(const json& config, const std::string& out_dir) {
    const auto t0 = std::chrono::steady_clock::now();
    const StaticConfig c = parse_static_config(config);
    ensure_directory(out_dir);
    const ResolvedStatic r = resolve_static(c);
    const AggregateMetrics agg = run_monte_carlo(r.setup);

    std::ostringstream csv;
    csv << "iter,mean_err,std_err,mean_innov,mean_trace_BA\n";
    for (int k = 0; k < agg.iterations; ++k) {
        csv << (k + 1) << ',' << format_g17(agg.mean_err[static_cast<std::size_t>(k)])
            << ',' << format_g17(agg.std_err[static_cast<std::size_t>(k)]) << ','
            << format_g17(agg.mean_innov[static_cast<std::size_t>(k)]) << ','
            << format_g17(agg.trace_B[static_cast<std::size_t>(k)]) << '\n';
    }
    write_text_file(out_dir + "/aggregate.csv", csv.str());

    const json resolved = to_json(c);
    json summary{{"method", to_string(c.tuning.method)},
                 {"trials", agg.trials},
                 {"iterations", agg.iterations},
                 {"seed", c.seed},
                 {"background_err", agg.background_err},
                 {"final_mean_err", agg.mean_err.back()},
                 {"initial_mismatch", agg.initial_mismatch},
                 {"final_mismatch", agg.final_mismatch},
                 {"initial_airm", agg.initial_airm},
                 {"final_airm", agg.final_airm},
                 {"config", resolved},
                 {"config_hash", detail::config_hash(resolved)},
                 {"runtime_seconds", detail::seconds_since(t0)}};
    write_text_file(out_dir + "/summary.json", summary.dump(2) + "\n");
    detail::echo_config(resolved, out_dir);
}

inline DynamicChainSetup resolve_dynamic(const DynamicConfig& c) {
    DynamicChainSetup s;
    s.solver = c.solver;
    s.base_height = c.init.base_height;
    s.bump = c.init.bump;
    s.center = c.init.center;
    s.radius = c.init.radius;
    s.window = c.window;
    s.H = resolve_operator(c.op);
    require_config(s.H.state_dim() == c.window.size(),
                   "operator state_dim must match the subdomain state size");
    s.noise = c.noise;
    s.assumed_kernel = c.assumed.kernel;
    s.assumed_sigma = c.assumed.sigma;
    s.alpha = c.chain.alpha;
    s.inner_iters = c.chain.inner_iters;
    s.interval_steps = c.chain.interval_steps;
    s.cycles = c.chain.cycles;
    s.placement = c.chain.placement;
    s.trials = c.trials;
    s.master_seed = c.seed;
    s.threads = c.threads;
    return s;
}

// Sequential chain experiment.
// Outputs: chain.csv (cycle, time, mean_err_3dvar, mean_err_tracked,
// mean_err_augmented), summary.json, config echo.
inline void cmd_dynamic(const json& config, const std::string& out_dir) {
    const auto t0 = std::chrono::steady_clock::now();
    const DynamicConfig c = parse_dynamic_config(config);
    ensure_directory(out_dir);
    const ChainResult res = run_dynamic_chain(resolve_dynamic(c));

    std::ostringstream csv;
    csv << "cycle,time,mean_err_3dvar,mean_err_tracked,mean_err_augmented\n";
    for (std::size_t k = 0; k < res.time.size(); ++k) {
        csv << (k + 1) << ',' << format_g17(res.time[k]) << ','
            << format_g17(res.mean_err_baseline[k]) << ','
            << format_g17(res.mean_err_tracked[k]) << ','
            << format_g17(res.mean_err_augmented[k]) << '\n';
    }
    write_text_file(out_dir + "/chain.csv", csv.str());

    const json resolved = to_json(c);
    json summary{{"placement", to_string(c.chain.placement)},
                 {"trials", c.trials},
                 {"cycles", c.chain.cycles},
                 {"seed", c.seed},
                 {"config", resolved},
                 {"config_hash", detail::config_hash(resolved)},
                 {"runtime_seconds", detail::seconds_since(t0)}};
    write_text_file(out_dir + "/summary.json", summary.dump(2) + "\n");
    detail::echo_config(resolved, out_dir);
}

} // namespace covtune
