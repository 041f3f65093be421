#include <catch_amalgamated.hpp>

#include <cmath>

#include "covtune/rng.hpp"
#include "covtune/tracker.hpp"

using namespace covtune;

namespace {

LinearObservationOperator identity_op(Eigen::Index n) {
    return LinearObservationOperator{Eigen::MatrixXd::Identity(n, n)};
}

Eigen::MatrixXd random_spd(Eigen::Index n, Rng& rng, double ridge) {
    Eigen::MatrixXd m(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) m(i, j) = rng.normal();
    return m * m.transpose() + ridge * Eigen::MatrixXd::Identity(n, n);
}

} // namespace

TEST_CASE("scalar exact variance after one analysis", "[tracker]") {
    // assumed = exact = 3, r = 1: k = 3/4,
    // exact posterior = (1/4)^2 * 3 + (3/4)^2 * 1 = 3/4
    auto h = identity_op(1);
    Eigen::MatrixXd b = Eigen::MatrixXd::Constant(1, 1, 3.0);
    Eigen::MatrixXd r = Eigen::MatrixXd::Identity(1, 1);
    Eigen::MatrixXd k = kalman_gain(b, r, h);
    ExactTrace t = ExactTrace::start(b, 1);
    t = exact_step(t, k, r, h, Method::Naive);
    REQUIRE(t.iterations() == 1);
    CHECK(t.current_B()(0, 0) == Catch::Approx(0.75));
    // cross covariance picks up the observation-noise imprint K R
    CHECK(t.current_cross()(0, 0) == Catch::Approx(0.75));
}

TEST_CASE("zero gain leaves the exact covariances untouched", "[tracker]") {
    auto h = identity_op(3);
    Rng rng(8);
    Eigen::MatrixXd b = random_spd(3, rng, 0.5);
    Eigen::MatrixXd r = random_spd(3, rng, 0.5);
    ExactTrace t = ExactTrace::start(b, 3);
    t = exact_step(t, Eigen::MatrixXd::Zero(3, 3), r, h, Method::Tracked);
    CHECK((t.current_B() - b).cwiseAbs().maxCoeff() < 1e-15);
    CHECK(t.current_cross().isZero(0.0));
}

TEST_CASE("perfect prior: tracker agrees with the assumed-side scheme", "[tracker]") {
    // when the assumed covariances are exact and alpha = 1 the scheme's own
    // B sequence is the true error covariance, so the tracker must reproduce it
    Rng rng(21);
    for (Eigen::Index dim = 2; dim <= 6; ++dim) {
        Eigen::MatrixXd b0 = random_spd(dim, rng, 0.8);
        Eigen::MatrixXd r = random_spd(dim, rng, 0.8);
        auto h = identity_op(dim);

        IterativeState s;
        s.n = 0;
        s.x_b_n = Eigen::VectorXd::Zero(dim);
        s.B_A_n = b0;
        s.cross_cov_n = Eigen::MatrixXd::Zero(dim, dim);
        ExactTrace t = ExactTrace::start(b0, dim);

        Eigen::VectorXd y = Eigen::VectorXd::Ones(dim);
        for (int it = 0; it < 8; ++it) {
            Eigen::MatrixXd gain = kalman_gain(s.B_A_n, r, h);
            s = tracked_step(s, y, r, h, 1.0);
            t = exact_step(t, gain, r, h, Method::Tracked);
            CHECK((t.current_B() - s.B_A_n).cwiseAbs().maxCoeff() <
                  1e-9 * s.B_A_n.norm());
            CHECK((t.current_cross() - s.cross_cov_n).cwiseAbs().maxCoeff() <
                  1e-9 * (1.0 + s.cross_cov_n.norm()));
        }
    }
}

TEST_CASE("naive shrinkage leaves the true variance near the noise floor", "[tracker]") {
    // assumed variance collapses like 3/(3n+1) while the true analysis
    // variance climbs from 0.75 back toward the observation variance 1
    auto h = identity_op(1);
    Eigen::MatrixXd r = Eigen::MatrixXd::Identity(1, 1);
    IterativeState s;
    s.n = 0;
    s.x_b_n = Eigen::VectorXd::Zero(1);
    s.B_A_n = Eigen::MatrixXd::Constant(1, 1, 3.0);
    s.cross_cov_n = Eigen::MatrixXd::Zero(1, 1);
    ExactTrace t = ExactTrace::start(s.B_A_n, 1);
    Eigen::VectorXd y = Eigen::VectorXd::Ones(1);

    for (int n = 1; n <= 50; ++n) {
        Eigen::MatrixXd gain = kalman_gain(s.B_A_n, r, h);
        s = naive_step(s, y, r, h);
        t = exact_step(t, gain, r, h, Method::Naive);
        CHECK(s.B_A_n(0, 0) == Catch::Approx(3.0 / (3.0 * n + 1.0)));
        // reusing one observation: error = a_n e_b + (1-a_n) e_y with
        // a_n = 1/(3n+1), so the true variance is (9n^2+3)/(3n+1)^2
        double q = 3.0 * n + 1.0;
        CHECK(t.current_B()(0, 0) == Catch::Approx((9.0 * n * n + 3.0) / (q * q)));
    }
    // assumed claims near-certainty, truth stays pinned at the noise level
    CHECK(s.B_A_n(0, 0) < 0.02);
    CHECK(t.current_B()(0, 0) > 0.98);
    CHECK(t.current_B()(0, 0) < 1.0);
}

TEST_CASE("stacked-form step equals the gain-form step at zero cross", "[tracker]") {
    // with zero cross covariance the joint operator reduces to [I-KH | K],
    // so both bookkeeping paths must produce the same exact posterior
    Rng rng(13);
    const Eigen::Index n = 5, m = 3;
    Eigen::MatrixXd b = random_spd(n, rng, 0.6);
    Eigen::MatrixXd r_e = random_spd(m, rng, 0.6);
    Eigen::MatrixXd hmat = Eigen::MatrixXd::Zero(m, n);
    hmat(0, 0) = 1.0;
    hmat(1, 2) = 1.0;
    hmat(2, 4) = 1.0;
    LinearObservationOperator h{hmat};
    Eigen::MatrixXd k = kalman_gain(b, 0.5 * Eigen::MatrixXd::Identity(m, m), h);

    ExactTrace tk = ExactTrace::start(b, m);
    tk = exact_step(tk, k, r_e, h, Method::Tracked);

    Eigen::MatrixXd g(n, n + m);
    g.leftCols(n) = Eigen::MatrixXd::Identity(n, n) - k * hmat;
    g.rightCols(m) = k;
    ExactTrace tg = ExactTrace::start(b, m);
    tg = exact_step(tg, g, r_e, h, Method::Augmented);

    CHECK((tk.current_B() - tg.current_B()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((tk.current_cross() - tg.current_cross()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("recorded gain shape is checked", "[tracker]") {
    auto h = identity_op(2);
    Eigen::MatrixXd b = Eigen::MatrixXd::Identity(2, 2);
    Eigen::MatrixXd r = Eigen::MatrixXd::Identity(2, 2);
    ExactTrace t = ExactTrace::start(b, 2);
    REQUIRE_THROWS_AS(exact_step(t, Eigen::MatrixXd::Zero(2, 3), r, h, Method::Tracked),
                      config_error);
    REQUIRE_THROWS_AS(exact_step(t, Eigen::MatrixXd::Zero(2, 2), r, h, Method::Augmented),
                      config_error);
}
