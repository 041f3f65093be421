#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "covtune/assimilation.hpp"
#include "covtune/calibration.hpp"
#include "covtune/errors.hpp"
#include "covtune/kernels.hpp"
#include "covtune/rng.hpp"
#include "covtune/spd.hpp"
#include "covtune/tracker.hpp"

namespace covtune {

enum class NoiseMode { StateIndependent, StateDependent };

// Ground-truth error statistics of the synthetic experiments. In the
// state-independent mode the background error is homogeneous with standard
// deviation sigma_b and block-wise kernel correlation; the observation error
// is white with standard deviation sigma_o. In the state-dependent mode the
// per-component standard deviations are mu_b * x_t (background) and
// mu_o * H x_t (observations), with the same kernel correlation and an
// uncorrelated R_E.
struct NoiseModel {
    NoiseMode mode = NoiseMode::StateIndependent;
    double sigma_b = 0.1;
    double sigma_o = 0.01;
    double mu_b = 0.10;
    double mu_o = 0.01;
    CorrelationKernel exact_kernel{KernelKind::Balgovind, 2.0};

    void validate() const {
        if (mode == NoiseMode::StateIndependent)
            require_config(sigma_b > 0.0 && sigma_o > 0.0,
                           "noise: sigma_b and sigma_o must be positive");
        else
            require_config(mu_b > 0.0 && mu_o > 0.0,
                           "noise: mu_b and mu_o must be positive");
    }
};

struct ExactCovariances {
    Eigen::MatrixXd B_E;
    Eigen::MatrixXd R_E;
};

// Correlation matrix of a two-field stacked state: the kernel correlation on
// each field block, zero across fields.
inline Eigen::MatrixXd stacked_field_correlation(const CorrelationKernel& kernel,
                                                 const std::vector<Point>& coords) {
    const Eigen::MatrixXd block = build_correlation_matrix(kernel, coords);
    return block_diag(block, block);
}

// Exact (B_E, R_E) for a trial set. Variances in the state-dependent mode
// are floored at 1e-12 times their maximum so that quiescent truth
// components cannot produce a singular covariance. Asserts the standing
// assumption that background errors dominate: Tr(B_E) > Tr(R_E).
inline ExactCovariances build_exact_covariances(const NoiseModel& noise,
                                                const Eigen::VectorXd& x_t,
                                                const LinearObservationOperator& h,
                                                const std::vector<Point>& coords) {
    noise.validate();
    const Eigen::Index n = 2 * static_cast<Eigen::Index>(coords.size());
    require_config(x_t.size() == n, "exact covariances: truth/coords size mismatch");
    require_config(h.state_dim() == n, "exact covariances: operator size mismatch");
    const Eigen::MatrixXd cor = stacked_field_correlation(noise.exact_kernel, coords);

    ExactCovariances out;
    if (noise.mode == NoiseMode::StateIndependent) {
        out.B_E = noise.sigma_b * noise.sigma_b * cor;
        out.R_E = noise.sigma_o * noise.sigma_o *
                  Eigen::MatrixXd::Identity(h.obs_dim(), h.obs_dim());
    } else {
        Eigen::VectorXd d_b = (noise.mu_b * x_t.array()).square();
        d_b = d_b.cwiseMax(1e-12 * d_b.maxCoeff());
        out.B_E = covariance_from_correlation(cor, DiagonalScale{d_b});
        const Eigen::VectorXd y_t = h.apply(x_t);
        Eigen::VectorXd d_r = (noise.mu_o * y_t.array()).square();
        d_r = d_r.cwiseMax(1e-12 * d_r.maxCoeff());
        out.R_E = d_r.asDiagonal();
    }
    require_config(out.B_E.trace() > out.R_E.trace(),
                   "exact covariances: background errors must dominate "
                   "(Tr(B_E) > Tr(R_E) violated)");
    return out;
}

// Assumed background covariance: homogeneous variance with block-wise
// kernel correlation.
inline Eigen::MatrixXd build_assumed_background(const CorrelationKernel& kernel,
                                                double sigma,
                                                const std::vector<Point>& coords) {
    require_config(sigma > 0.0, "assumed background: sigma must be positive");
    return sigma * sigma * stacked_field_correlation(kernel, coords);
}

// Everything about a run that does not depend on the draws: the gain applied
// at every iteration, the assumed covariance sequence, the exact-error
// tracker driven by the recorded gains, and the correlation metrics between
// assumed and exact at the first and last iteration. Computed once per run
// and shared by all Monte-Carlo trials.
struct CovarianceTrack {
    Method method = Method::ThreeDVar;
    std::vector<Eigen::MatrixXd> gains;
    std::vector<Eigen::MatrixXd> B_assumed;
    ExactTrace exact;
    double initial_mismatch = 0.0;
    double final_mismatch = 0.0;
    double initial_airm = 0.0;
    double final_airm = 0.0;

    int iterations() const { return static_cast<int>(gains.size()); }
};

inline CovarianceTrack build_covariance_track(const Eigen::MatrixXd& b_a0,
                                              const Eigen::MatrixXd& r_a,
                                              const Eigen::MatrixXd& b_e0,
                                              const Eigen::MatrixXd& r_e,
                                              const LinearObservationOperator& h,
                                              const TuningConfig& cfg,
                                              const std::vector<Point>& coords) {
    cfg.validate();
    CovarianceTrack track;
    track.method = cfg.method;
    track.B_assumed.push_back(b_a0);
    track.exact = ExactTrace::start(b_e0, h.obs_dim());

    Eigen::MatrixXd b = b_a0;
    Eigen::MatrixXd cross = Eigen::MatrixXd::Zero(h.state_dim(), h.obs_dim());
    const int iters = cfg.method == Method::ThreeDVar ? 1 : cfg.max_iters;
    for (int k = 0; k < iters; ++k) {
        CovarianceUpdate u;
        switch (cfg.method) {
            case Method::ThreeDVar:
            case Method::Naive:
                u = naive_covariance_update(b, r_a, h);
                break;
            case Method::Tracked:
                u = tracked_covariance_update(b, cross, r_a, h, cfg.alpha);
                break;
            case Method::Augmented:
                u = augmented_covariance_update(b, cross, r_a, h, cfg.alpha);
                break;
        }
        track.gains.push_back(u.gain);
        track.B_assumed.push_back(cfg.method == Method::ThreeDVar ? u.posterior
                                                                  : u.B_next);
        track.exact = exact_step(std::move(track.exact), u.gain, r_e, h, cfg.method);
        b = u.B_next;
        cross = u.cross_next;
    }

    const FieldSelector u_field{0, static_cast<Eigen::Index>(coords.size())};
    const CalibratedCurve exact_curve = calibrate_correlation(b_e0, coords, u_field);
    track.initial_mismatch = correlation_mismatch(
        calibrate_correlation(b_a0, coords, u_field), exact_curve);
    track.final_mismatch = correlation_mismatch(
        calibrate_correlation(track.B_assumed.back(), coords, u_field),
        calibrate_correlation(track.exact.current_B(), coords, u_field));
    track.initial_airm = airm_between_correlations(b_a0, b_e0);
    track.final_airm =
        airm_between_correlations(track.B_assumed.back(), track.exact.current_B());
    return track;
}

// A static (single-time) twin-experiment run.
struct StaticRunSetup {
    std::vector<Point> coords;
    LinearObservationOperator H;
    Eigen::VectorXd x_t;
    NoiseModel noise;
    Eigen::MatrixXd B_A0;
    Eigen::MatrixXd R_A;
    TuningConfig tuning;
    int trials = 200;
    std::uint64_t master_seed = 0;
    int threads = 1;
};

// Per-trial metric traces; index n is iteration n, with index 0 describing
// the unassimilated background.
struct TrialResult {
    std::vector<double> err;
    std::vector<double> innovation;
};

// Draw one synthetic truth perturbation and run the recorded gain schedule
// on it. Consumes state_dim + obs_dim normal deviates from the stream, in
// that order.
inline TrialResult run_static_trial(const Eigen::VectorXd& x_t,
                                    const LinearObservationOperator& h,
                                    const SpdFactor& b_e_factor,
                                    const SpdFactor& r_e_factor,
                                    const CovarianceTrack& track, Rng& rng) {
    const Eigen::VectorXd x_b = sample_gaussian(x_t, b_e_factor, rng);
    const Eigen::VectorXd y = sample_gaussian(h.apply(x_t), r_e_factor, rng);

    TrialResult out;
    out.err.reserve(track.gains.size() + 1);
    out.innovation.reserve(track.gains.size() + 1);
    Eigen::VectorXd x = x_b;
    out.err.push_back((x - x_t).norm());
    out.innovation.push_back((y - h.apply(x)).norm());
    for (const Eigen::MatrixXd& gain : track.gains) {
        x = detail::apply_gain(track.method, gain, x, y, h);
        out.err.push_back((x - x_t).norm());
        out.innovation.push_back((y - h.apply(x)).norm());
    }
    return out;
}

// Aggregated Monte-Carlo metrics. Per-iteration vectors are indexed from
// iteration 1 (entry 0 of mean_err is the mean error after one analysis);
// background_err is the mean error of the raw background draw.
struct AggregateMetrics {
    int iterations = 0;
    int trials = 0;
    std::vector<double> mean_err;
    std::vector<double> std_err;
    std::vector<double> mean_innov;
    std::vector<double> trace_B;
    double background_err = 0.0;
    double initial_mismatch = 0.0;
    double final_mismatch = 0.0;
    double initial_airm = 0.0;
    double final_airm = 0.0;
};

namespace detail {

// Run fn(trial_index) for every index in [0, count) on the requested number
// of threads. Exceptions are captured and rethrown tagged with the first
// failing trial index.
template <typename Fn>
inline void parallel_trials(int count, int threads, Fn&& fn) {
    if (threads <= 0) {
        const unsigned hw = std::thread::hardware_concurrency();
        threads = hw > 0 ? static_cast<int>(hw) : 1;
    }
    threads = std::min(threads, count);
    if (threads <= 1) {
        for (int t = 0; t < count; ++t) {
            try {
                fn(t);
            } catch (const std::exception& e) {
                throw numerical_error("trial " + std::to_string(t) +
                                      " failed: " + e.what());
            }
        }
        return;
    }
    std::atomic<int> next{0};
    std::atomic<bool> failed{false};
    std::mutex err_mutex;
    int bad_trial = count;
    std::exception_ptr bad_err;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int w = 0; w < threads; ++w) {
        pool.emplace_back([&] {
            for (int t = next.fetch_add(1); t < count && !failed.load();
                 t = next.fetch_add(1)) {
                try {
                    fn(t);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(err_mutex);
                    if (t < bad_trial) {
                        bad_trial = t;
                        bad_err = std::current_exception();
                    }
                    failed.store(true);
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (bad_err) {
        try {
            std::rethrow_exception(bad_err);
        } catch (const std::exception& e) {
            throw numerical_error("trial " + std::to_string(bad_trial) +
                                  " failed: " + e.what());
        }
    }
}

} // namespace detail

// Monte-Carlo twin experiment. The covariance track is computed once; each
// trial draws its own noise from a stream derived from (master_seed, trial
// index) and applies the recorded gains, so the aggregate is identical for
// any thread count.
inline AggregateMetrics run_monte_carlo(const StaticRunSetup& setup) {
    require_config(setup.trials >= 2, "monte carlo needs at least 2 trials");
    const ExactCovariances exact =
        build_exact_covariances(setup.noise, setup.x_t, setup.H, setup.coords);
    const CovarianceTrack track =
        build_covariance_track(setup.B_A0, setup.R_A, exact.B_E, exact.R_E,
                               setup.H, setup.tuning, setup.coords);
    const SpdFactor b_factor = spd_factorize(exact.B_E);
    const SpdFactor r_factor = spd_factorize(exact.R_E);

    std::vector<TrialResult> results(static_cast<std::size_t>(setup.trials));
    detail::parallel_trials(setup.trials, setup.threads, [&](int t) {
        Rng rng = Rng::for_trial(setup.master_seed, static_cast<std::uint64_t>(t));
        results[static_cast<std::size_t>(t)] =
            run_static_trial(setup.x_t, setup.H, b_factor, r_factor, track, rng);
    });

    const int iters = track.iterations();
    AggregateMetrics agg;
    agg.iterations = iters;
    agg.trials = setup.trials;
    agg.mean_err.assign(static_cast<std::size_t>(iters), 0.0);
    agg.std_err.assign(static_cast<std::size_t>(iters), 0.0);
    agg.mean_innov.assign(static_cast<std::size_t>(iters), 0.0);
    agg.trace_B.resize(static_cast<std::size_t>(iters));
    for (int k = 0; k < iters; ++k)
        agg.trace_B[static_cast<std::size_t>(k)] =
            track.B_assumed[static_cast<std::size_t>(k) + 1].trace();

    for (const TrialResult& r : results) {
        agg.background_err += r.err[0];
        for (int k = 0; k < iters; ++k) {
            agg.mean_err[static_cast<std::size_t>(k)] +=
                r.err[static_cast<std::size_t>(k) + 1];
            agg.mean_innov[static_cast<std::size_t>(k)] +=
                r.innovation[static_cast<std::size_t>(k) + 1];
        }
    }
    const double n = static_cast<double>(setup.trials);
    agg.background_err /= n;
    for (int k = 0; k < iters; ++k) {
        agg.mean_err[static_cast<std::size_t>(k)] /= n;
        agg.mean_innov[static_cast<std::size_t>(k)] /= n;
    }
    for (const TrialResult& r : results)
        for (int k = 0; k < iters; ++k) {
            const double d = r.err[static_cast<std::size_t>(k) + 1] -
                             agg.mean_err[static_cast<std::size_t>(k)];
            agg.std_err[static_cast<std::size_t>(k)] += d * d;
        }
    for (int k = 0; k < iters; ++k)
        agg.std_err[static_cast<std::size_t>(k)] =
            std::sqrt(agg.std_err[static_cast<std::size_t>(k)] / (n - 1.0));

    agg.initial_mismatch = track.initial_mismatch;
    agg.final_mismatch = track.final_mismatch;
    agg.initial_airm = track.initial_airm;
    agg.final_airm = track.final_airm;
    return agg;
}

} // namespace covtune
