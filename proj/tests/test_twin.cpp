#include <catch_amalgamated.hpp>

#include <cmath>

#include "covtune/twin.hpp"

using namespace covtune;

namespace {

// 3x3 grid, two stacked fields: 18 state components, 5 observed
struct TwinSetup {
    std::vector<Point> coords = grid_coordinates(3, 3);
    LinearObservationOperator H{[] {
        Eigen::MatrixXd h = Eigen::MatrixXd::Zero(5, 18);
        h(0, 0) = 1.0;
        h(1, 4) = 1.0;
        h(2, 8) = 1.0;
        h(3, 9) = 1.0;
        h(4, 17) = 2.0;
        return h;
    }()};
    Eigen::VectorXd x_t = Eigen::VectorXd::LinSpaced(18, 0.5, 2.0);
    NoiseModel noise;

    StaticRunSetup setup(Method m, int iters) const {
        StaticRunSetup s;
        s.coords = coords;
        s.H = H;
        s.x_t = x_t;
        s.noise = noise;
        s.B_A0 = build_assumed_background({KernelKind::Exponential, 3.0}, 0.05, coords);
        s.R_A = 1e-4 * Eigen::MatrixXd::Identity(5, 5);
        s.tuning = TuningConfig{m, 0.0, iters, 0.0};
        s.trials = 40;
        s.master_seed = 77;
        s.threads = 1;
        return s;
    }
};

} // namespace

TEST_CASE("uniform-noise covariances have the stacked kernel structure", "[twin]") {
    TwinSetup t;
    ExactCovariances ec = build_exact_covariances(t.noise, t.x_t, t.H, t.coords);
    REQUIRE(ec.B_E.rows() == 18);
    REQUIRE(ec.R_E.rows() == 5);
    const double s2 = 0.1 * 0.1;
    CHECK(ec.B_E(0, 0) == Catch::Approx(s2));
    // neighbours one grid unit apart follow the kernel
    CHECK(ec.B_E(0, 1) ==
          Catch::Approx(s2 * kernel_eval({KernelKind::Balgovind, 2.0}, 1.0)));
    // the two physical fields are uncorrelated
    CHECK(ec.B_E.topRightCorner(9, 9).isZero(0.0));
    CHECK(ec.R_E.isApprox(1e-4 * Eigen::MatrixXd::Identity(5, 5)));
}

TEST_CASE("flow-scaled noise variances follow the truth amplitude", "[twin]") {
    TwinSetup t;
    t.noise.mode = NoiseMode::StateDependent;
    Eigen::VectorXd x = Eigen::VectorXd::Constant(18, 2.0);
    ExactCovariances ec = build_exact_covariances(t.noise, x, t.H, t.coords);
    // sigma_i = mu_b * |x_i| = 0.2, variance 0.04
    for (int i = 0; i < 18; ++i) CHECK(ec.B_E(i, i) == Catch::Approx(0.04));
    // observation variance (mu_o * (Hx)_j)^2; last row observes 2 * x_17 = 4
    CHECK(ec.R_E(0, 0) == Catch::Approx(4e-4));
    CHECK(ec.R_E(4, 4) == Catch::Approx(16e-4));
    // off-diagonal of R stays zero
    CHECK(ec.R_E(0, 1) == 0.0);
}

TEST_CASE("background errors must dominate the observation errors", "[twin]") {
    // an amplifying operator makes the observation variance swamp the
    // background variance, which the builder refuses
    std::vector<Point> coords = {{0.0, 0.0}};
    LinearObservationOperator h{Eigen::MatrixXd::Constant(1, 2, 100.0)};
    Eigen::VectorXd x = Eigen::VectorXd::Constant(2, 0.1);
    NoiseModel noise;
    noise.mode = NoiseMode::StateDependent;
    REQUIRE_THROWS_AS(build_exact_covariances(noise, x, h, coords), config_error);
}

TEST_CASE("noiseless draws reproduce the truth exactly", "[twin]") {
    TwinSetup t;
    StaticRunSetup s = t.setup(Method::Tracked, 4);
    ExactCovariances ec = build_exact_covariances(t.noise, t.x_t, t.H, t.coords);
    CovarianceTrack track = build_covariance_track(s.B_A0, s.R_A, ec.B_E, ec.R_E,
                                                   t.H, s.tuning, t.coords);
    SpdFactor zero = spd_factorize(Eigen::MatrixXd::Zero(18, 18));
    SpdFactor zero_r = spd_factorize(Eigen::MatrixXd::Zero(5, 5));
    Rng rng(1);
    TrialResult r = run_static_trial(t.x_t, t.H, zero, zero_r, track, rng);
    for (double e : r.err) CHECK(e == 0.0);
    for (double i : r.innovation) CHECK(i == 0.0);
}

TEST_CASE("one analysis decomposes into background and observation parts", "[twin]") {
    TwinSetup t;
    StaticRunSetup s = t.setup(Method::Tracked, 1);
    ExactCovariances ec = build_exact_covariances(t.noise, t.x_t, t.H, t.coords);
    CovarianceTrack track = build_covariance_track(s.B_A0, s.R_A, ec.B_E, ec.R_E,
                                                   t.H, s.tuning, t.coords);
    SpdFactor bf = spd_factorize(ec.B_E);
    SpdFactor rf = spd_factorize(ec.R_E);

    Rng rng(123);
    TrialResult r = run_static_trial(t.x_t, t.H, bf, rf, track, rng);

    // replay the same stream to recover the actual perturbations
    Rng replay(123);
    Eigen::VectorXd eps_b =
        sample_gaussian(Eigen::VectorXd::Zero(18), bf, replay);
    Eigen::VectorXd eps_y = sample_gaussian(Eigen::VectorXd::Zero(5), rf, replay);

    const Eigen::MatrixXd& k = track.gains[0];
    Eigen::VectorXd e1 =
        (Eigen::MatrixXd::Identity(18, 18) - k * t.H.matrix) * eps_b + k * eps_y;
    CHECK(r.err[0] == Catch::Approx(eps_b.norm()));
    CHECK(r.err[1] == Catch::Approx(e1.norm()).margin(1e-10));
}

TEST_CASE("recorded covariance schedule equals the iterative scheme", "[twin]") {
    // the gain schedule is data-independent, so the track must match what
    // run_iterative produces on any particular observation vector
    TwinSetup t;
    for (Method m : {Method::Naive, Method::Tracked, Method::Augmented}) {
        TuningConfig cfg{m, 0.3, 5, 0.0};
        Eigen::MatrixXd b_a0 =
            build_assumed_background({KernelKind::Gaussian, 1.5}, 0.07, t.coords);
        Eigen::MatrixXd r_a = 1e-4 * Eigen::MatrixXd::Identity(5, 5);
        ExactCovariances ec = build_exact_covariances(t.noise, t.x_t, t.H, t.coords);
        CovarianceTrack track =
            build_covariance_track(b_a0, r_a, ec.B_E, ec.R_E, t.H, cfg, t.coords);

        AssimilationProblem p(t.x_t, Eigen::VectorXd::Ones(5), CovarianceMatrix(b_a0),
                              CovarianceMatrix(r_a), t.H);
        auto states = run_iterative(p, cfg);
        REQUIRE(states.size() == 5);
        REQUIRE(track.B_assumed.size() == 6);
        for (std::size_t i = 0; i < states.size(); ++i)
            CHECK((states[i].B_A_n - track.B_assumed[i + 1]).cwiseAbs().maxCoeff() <
                  1e-12);
    }
}

TEST_CASE("single-analysis track records exactly one gain", "[twin]") {
    TwinSetup t;
    StaticRunSetup s = t.setup(Method::ThreeDVar, 10);
    AggregateMetrics a = run_monte_carlo(s);
    CHECK(a.iterations == 1);
    CHECK(a.mean_err.size() == 1);
}

TEST_CASE("monte carlo aggregates are reproducible and thread-invariant", "[twin]") {
    TwinSetup t;
    StaticRunSetup s = t.setup(Method::Tracked, 6);
    AggregateMetrics a = run_monte_carlo(s);
    s.threads = 3;
    AggregateMetrics b = run_monte_carlo(s);
    REQUIRE(a.mean_err.size() == b.mean_err.size());
    for (std::size_t i = 0; i < a.mean_err.size(); ++i) {
        CHECK(a.mean_err[i] == b.mean_err[i]);
        CHECK(a.std_err[i] == b.std_err[i]);
        CHECK(a.mean_innov[i] == b.mean_innov[i]);
    }
    CHECK(a.background_err == b.background_err);
}

TEST_CASE("monte carlo run improves the error and the innovation", "[twin]") {
    TwinSetup t;
    StaticRunSetup s = t.setup(Method::Tracked, 8);
    s.trials = 100;
    AggregateMetrics a = run_monte_carlo(s);
    REQUIRE(a.iterations == 8);
    // analysis beats the raw background on average
    CHECK(a.mean_err.back() < a.background_err);
    // innovation is non-increasing across iterations
    for (std::size_t i = 1; i < a.mean_innov.size(); ++i)
        CHECK(a.mean_innov[i] <= a.mean_innov[i - 1] + 1e-12);
    // trace schedule is positive and matches the recorded covariances
    for (double tr : a.trace_B) CHECK(tr > 0.0);
    // sample spread is a plausible scale for the mean
    for (std::size_t i = 0; i < a.mean_err.size(); ++i) {
        CHECK(a.std_err[i] > 0.0);
        CHECK(a.std_err[i] < a.mean_err[i]);
    }
}

TEST_CASE("monte carlo needs at least two trials", "[twin]") {
    TwinSetup t;
    StaticRunSetup s = t.setup(Method::Tracked, 3);
    s.trials = 1;
    REQUIRE_THROWS_AS(run_monte_carlo(s), config_error);
}

TEST_CASE("trial failures carry the trial index", "[twin]") {
    auto boom = [](int t) {
        if (t == 7) throw std::runtime_error("synthetic fault");
    };
    REQUIRE_THROWS_WITH(detail::parallel_trials(12, 1, boom),
                        Catch::Matchers::ContainsSubstring("trial 7 failed"));
    // multithreaded runs wrap the first observed failure the same way
    auto boom2 = [](int t) {
        if (t >= 5) throw std::runtime_error("synthetic fault");
    };
    REQUIRE_THROWS_WITH(detail::parallel_trials(12, 3, boom2),
                        Catch::Matchers::ContainsSubstring("synthetic fault") &&
                            Catch::Matchers::ContainsSubstring("failed"));
}
