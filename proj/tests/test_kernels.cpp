#include <catch_amalgamated.hpp>

#include <cmath>

#include "covtune/kernels.hpp"

using namespace covtune;

TEST_CASE("kernel values at r = L", "[kernels]") {
    const double e1 = std::exp(-1.0);
    CHECK(kernel_eval({KernelKind::Exponential, 2.0}, 2.0) == Catch::Approx(e1));
    CHECK(kernel_eval({KernelKind::Balgovind, 2.0}, 2.0) == Catch::Approx(2.0 * e1));
    CHECK(kernel_eval({KernelKind::Gaussian, 2.0}, 2.0) == Catch::Approx(std::exp(-0.5)));
}

TEST_CASE("kernels are 1 at zero distance", "[kernels]") {
    for (auto kind : {KernelKind::Exponential, KernelKind::Balgovind, KernelKind::Gaussian})
        CHECK(kernel_eval({kind, 3.0}, 0.0) == 1.0);
}

TEST_CASE("kernels are non-increasing in distance", "[kernels]") {
    for (auto kind : {KernelKind::Exponential, KernelKind::Balgovind, KernelKind::Gaussian}) {
        CorrelationKernel k{kind, 1.7};
        double prev = kernel_eval(k, 0.0);
        for (int i = 1; i <= 300; ++i) {
            double cur = kernel_eval(k, 0.05 * i);
            CHECK(cur <= prev + 1e-15);
            prev = cur;
        }
    }
}

TEST_CASE("kernel rejects nonpositive length or negative distance", "[kernels]") {
    REQUIRE_THROWS_AS(kernel_eval({KernelKind::Exponential, 0.0}, 1.0), config_error);
    REQUIRE_THROWS_AS(kernel_eval({KernelKind::Exponential, -1.0}, 1.0), config_error);
    REQUIRE_THROWS_AS(kernel_eval({KernelKind::Exponential, 1.0}, -0.5), config_error);
}

TEST_CASE("kernel names round-trip", "[kernels]") {
    for (auto kind : {KernelKind::Exponential, KernelKind::Balgovind, KernelKind::Gaussian})
        CHECK(kernel_kind_from_string(to_string(kind)) == kind);
    REQUIRE_THROWS_AS(kernel_kind_from_string("triangular"), config_error);
}

TEST_CASE("grid coordinates are row-major with unit spacing", "[kernels]") {
    auto pts = grid_coordinates(3, 4);
    REQUIRE(pts.size() == 12);
    CHECK(pts[0] == Point{0.0, 0.0});
    CHECK(pts[1] == Point{0.0, 1.0});
    CHECK(pts[4] == Point{1.0, 0.0});
    CHECK(pts[11] == Point{2.0, 3.0});
    CHECK(euclidean(pts[0], pts[5]) == Catch::Approx(std::sqrt(2.0)));
}

TEST_CASE("correlation matrix is symmetric with unit diagonal", "[kernels]") {
    auto pts = grid_coordinates(5, 5);
    Eigen::MatrixXd c = build_correlation_matrix({KernelKind::Balgovind, 2.0}, pts);
    REQUIRE(c.rows() == 25);
    REQUIRE(c.cols() == 25);
    CHECK((c - c.transpose()).cwiseAbs().maxCoeff() == 0.0);
    CHECK((c.diagonal().array() - 1.0).abs().maxCoeff() == 0.0);
    // off-diagonal entries follow the kernel at the pair distance
    CHECK(c(0, 1) == Catch::Approx(kernel_eval({KernelKind::Balgovind, 2.0}, 1.0)));
    CHECK(c(0, 6) == Catch::Approx(kernel_eval({KernelKind::Balgovind, 2.0}, std::sqrt(2.0))));
}
