#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "covtune/assimilation.hpp"
#include "covtune/errors.hpp"
#include "covtune/shallow_water.hpp"
#include "covtune/twin.hpp"

namespace covtune {

// Where the iterative tuning runs inside a sequential assimilation chain:
// only at the first reconstruction, at every reconstruction, or never
// (plain sequential analysis, used as the baseline).
enum class Placement { FirstStepOnly, EveryStep, Never };

inline std::string to_string(Placement p) {
    switch (p) {
        case Placement::FirstStepOnly: return "first_step_only";
        case Placement::EveryStep: return "every_step";
        case Placement::Never: return "never";
    }
    return "?";
}

inline Placement placement_from_string(const std::string& s) {
    if (s == "first_step_only") return Placement::FirstStepOnly;
    if (s == "every_step") return Placement::EveryStep;
    if (s == "never") return Placement::Never;
    throw config_error("unknown placement: " + s);
}

// Sequential twin experiment on the flow solver: reconstruct the subdomain
// state every interval_steps solver steps for a number of cycles.
struct DynamicChainSetup {
    SWConfig solver;
    double base_height = 1.0;
    double bump = 0.1;
    std::pair<int, int> center{50, 50};
    double radius = 10.0;
    Window window;
    LinearObservationOperator H;
    NoiseModel noise;
    CorrelationKernel assumed_kernel{KernelKind::Exponential, 3.0};
    double assumed_sigma = 0.01;
    double alpha = 0.0;
    int inner_iters = 10;
    long long interval_steps = 2000;
    int cycles = 10;
    Placement placement = Placement::FirstStepOnly;
    int trials = 100;
    std::uint64_t master_seed = 0;
    int threads = 1;
};

// Per-cycle mean analysis errors ||x_t - x_a|| for the three chains that
// share every random draw: the plain sequential baseline and the two
// covariance-tuning chains.
struct ChainResult {
    std::vector<double> time;
    std::vector<double> mean_err_baseline;
    std::vector<double> mean_err_tracked;
    std::vector<double> mean_err_augmented;
};

namespace detail {

inline Eigen::VectorXd apply_schedule(Method method,
                                      const std::vector<Eigen::MatrixXd>& gains,
                                      Eigen::VectorXd x, const Eigen::VectorXd& y,
                                      const LinearObservationOperator& h) {
    for (const Eigen::MatrixXd& gain : gains)
        x = apply_gain(method, gain, x, y, h);
    return x;
}

} // namespace detail

// Chain protocol per cycle k (t_k = k * interval): truth is the reference
// trajectory at t_k; the background is the previous analysis embedded into
// the reference state at t_{k-1} (the surrounding grid supplies exact
// boundary data) and forecast over one interval; cycle 1 starts from
// truth + background noise. Covariances are not propagated by the flow:
// cycles outside the configured placement analyze with the gain of the
// original assumed background.
inline ChainResult run_dynamic_chain(const DynamicChainSetup& setup) {
    setup.solver.validate();
    require_config(setup.noise.mode == NoiseMode::StateIndependent,
                   "dynamic chain supports state-independent noise only");
    require_config(setup.cycles >= 1, "chain needs at least one cycle");
    require_config(setup.interval_steps >= 1, "chain interval must be positive");
    require_config(setup.trials >= 1, "chain needs at least one trial");
    setup.window.validate(setup.solver.nx, setup.solver.ny);

    // Reference trajectory sampled at every analysis time.
    std::vector<FlowState> reference;
    std::vector<Eigen::VectorXd> truth;
    reference.reserve(static_cast<std::size_t>(setup.cycles));
    truth.reserve(static_cast<std::size_t>(setup.cycles));
    {
        FlowState s = init_cylinder(setup.solver, setup.base_height, setup.bump,
                                    setup.center, setup.radius);
        Stepper stepper(setup.solver);
        for (int k = 0; k < setup.cycles; ++k) {
            for (long long i = 0; i < setup.interval_steps; ++i) stepper.step(s);
            reference.push_back(s);
            truth.push_back(extract_subdomain(s, setup.window));
        }
    }

    const std::vector<Point> coords = grid_coordinates(setup.window.rows, setup.window.cols);
    const ExactCovariances exact =
        build_exact_covariances(setup.noise, truth.front(), setup.H, coords);
    const SpdFactor b_factor = spd_factorize(exact.B_E);
    const double sigma_o = setup.noise.sigma_o;

    const Eigen::MatrixXd b_a0 =
        build_assumed_background(setup.assumed_kernel, setup.assumed_sigma, coords);
    const Eigen::MatrixXd r_a =
        sigma_o * sigma_o *
        Eigen::MatrixXd::Identity(setup.H.obs_dim(), setup.H.obs_dim());

    // Gain schedules are draw-independent and identical across cycles with
    // the same placement, so they are computed once.
    const std::vector<Eigen::MatrixXd> baseline_gains = {
        kalman_gain(b_a0, r_a, setup.H)};
    TuningConfig tracked_cfg{Method::Tracked, setup.alpha, setup.inner_iters, 0.0};
    TuningConfig augmented_cfg{Method::Augmented, setup.alpha, setup.inner_iters, 0.0};
    const CovarianceTrack tracked_track = build_covariance_track(
        b_a0, r_a, exact.B_E, exact.R_E, setup.H, tracked_cfg, coords);
    const CovarianceTrack augmented_track = build_covariance_track(
        b_a0, r_a, exact.B_E, exact.R_E, setup.H, augmented_cfg, coords);

    struct ChainSpec {
        Method method;
        const std::vector<Eigen::MatrixXd>* first;
        const std::vector<Eigen::MatrixXd>* later;
    };
    const bool tune_first = setup.placement != Placement::Never;
    const bool tune_later = setup.placement == Placement::EveryStep;
    const ChainSpec chains[3] = {
        {Method::ThreeDVar, &baseline_gains, &baseline_gains},
        {tune_first ? Method::Tracked : Method::ThreeDVar,
         tune_first ? &tracked_track.gains : &baseline_gains,
         tune_later ? &tracked_track.gains : &baseline_gains},
        {tune_first ? Method::Augmented : Method::ThreeDVar,
         tune_first ? &augmented_track.gains : &baseline_gains,
         tune_later ? &augmented_track.gains : &baseline_gains},
    };

    const int n_cycles = setup.cycles;
    const Eigen::Index obs_dim = setup.H.obs_dim();
    std::vector<std::vector<double>> err(
        3, std::vector<double>(static_cast<std::size_t>(setup.trials) * n_cycles, 0.0));

    detail::parallel_trials(setup.trials, setup.threads, [&](int t) {
        Rng rng = Rng::for_trial(setup.master_seed, static_cast<std::uint64_t>(t));
        const Eigen::VectorXd x_b1 = sample_gaussian(truth[0], b_factor, rng);
        std::vector<Eigen::VectorXd> y(static_cast<std::size_t>(n_cycles));
        for (int k = 0; k < n_cycles; ++k) {
            Eigen::VectorXd noise(obs_dim);
            for (Eigen::Index i = 0; i < obs_dim; ++i) noise(i) = sigma_o * rng.normal();
            y[static_cast<std::size_t>(k)] = setup.H.apply(truth[static_cast<std::size_t>(k)]) + noise;
        }

        Stepper stepper(setup.solver);
        for (int c = 0; c < 3; ++c) {
            // The Never placement makes all three chains identical.
            if (setup.placement == Placement::Never && c > 0) {
                for (int k = 0; k < n_cycles; ++k)
                    err[static_cast<std::size_t>(c)][static_cast<std::size_t>(t) * n_cycles + k] =
                        err[0][static_cast<std::size_t>(t) * n_cycles + k];
                continue;
            }
            const ChainSpec& spec = chains[c];
            Eigen::VectorXd x_a = detail::apply_schedule(
                spec.method, *spec.first, x_b1, y[0], setup.H);
            err[static_cast<std::size_t>(c)][static_cast<std::size_t>(t) * n_cycles] =
                (x_a - truth[0]).norm();
            const Method later_method =
                tune_later ? spec.method : Method::ThreeDVar;
            for (int k = 1; k < n_cycles; ++k) {
                FlowState f = embed_subdomain(reference[static_cast<std::size_t>(k) - 1],
                                              setup.window, x_a);
                for (long long i = 0; i < setup.interval_steps; ++i) stepper.step(f);
                const Eigen::VectorXd x_b = extract_subdomain(f, setup.window);
                x_a = detail::apply_schedule(later_method, *spec.later, x_b,
                                             y[static_cast<std::size_t>(k)], setup.H);
                err[static_cast<std::size_t>(c)][static_cast<std::size_t>(t) * n_cycles + k] =
                    (x_a - truth[static_cast<std::size_t>(k)]).norm();
            }
        }
    });

    ChainResult out;
    out.time.resize(static_cast<std::size_t>(n_cycles));
    out.mean_err_baseline.assign(static_cast<std::size_t>(n_cycles), 0.0);
    out.mean_err_tracked.assign(static_cast<std::size_t>(n_cycles), 0.0);
    out.mean_err_augmented.assign(static_cast<std::size_t>(n_cycles), 0.0);
    for (int k = 0; k < n_cycles; ++k)
        out.time[static_cast<std::size_t>(k)] =
            static_cast<double>(k + 1) * setup.solver.dt *
            static_cast<double>(setup.interval_steps);
    std::vector<double>* cols[3] = {&out.mean_err_baseline, &out.mean_err_tracked,
                                    &out.mean_err_augmented};
    for (int c = 0; c < 3; ++c)
        for (int t = 0; t < setup.trials; ++t)
            for (int k = 0; k < n_cycles; ++k)
                (*cols[c])[static_cast<std::size_t>(k)] +=
                    err[static_cast<std::size_t>(c)]
                       [static_cast<std::size_t>(t) * n_cycles + k];
    for (int c = 0; c < 3; ++c)
        for (double& v : *cols[c]) v /= static_cast<double>(setup.trials);
    return out;
}

} // namespace covtune
