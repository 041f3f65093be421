#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "covtune/errors.hpp"
#include "covtune/kernels.hpp"
#include "covtune/spd.hpp"

namespace covtune {

// Isotropic correlation-versus-distance curve extracted from a covariance
// matrix: one entry per distinct pair distance in the open interval (0, 10),
// strictly increasing distances, counts = number of averaged pairs.
struct CalibratedCurve {
    std::vector<double> distances;
    std::vector<double> values;
    std::vector<int> counts;
};

// Selects a contiguous index block of the covariance matrix (one physical
// field of a stacked state). count == 0 selects the whole matrix.
struct FieldSelector {
    Eigen::Index offset = 0;
    Eigen::Index count = 0;
};

// Average the correlation of every point pair sharing the same spatial
// distance (compared with tolerance 1e-9). Distances at or beyond 10 grid
// units are dropped.
inline CalibratedCurve calibrate_correlation(const Eigen::MatrixXd& cov,
                                             const std::vector<Point>& coords,
                                             const FieldSelector& field = {}) {
    const Eigen::Index n =
        field.count > 0 ? field.count : cov.rows();
    require_config(field.offset >= 0 && field.offset + n <= cov.rows(),
                   "calibrate_correlation: field selector out of range");
    require_config(static_cast<Eigen::Index>(coords.size()) == n,
                   "calibrate_correlation: coords/field size mismatch");
    const Eigen::MatrixXd block = cov.block(field.offset, field.offset, n, n);
    const Eigen::MatrixXd cor = correlation_from_covariance(block);

    struct Pair {
        double r;
        double value;
    };
    std::vector<Pair> pairs;
    pairs.reserve(static_cast<std::size_t>(n) * (n - 1) / 2);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double r = euclidean(coords[i], coords[j]);
            if (r <= 0.0 || r >= 10.0) continue;
            pairs.push_back({r, cor(i, j)});
        }
    }
    std::sort(pairs.begin(), pairs.end(),
              [](const Pair& a, const Pair& b) { return a.r < b.r; });

    CalibratedCurve curve;
    std::size_t i = 0;
    while (i < pairs.size()) {
        std::size_t j = i;
        double sum = 0.0;
        while (j < pairs.size() && pairs[j].r - pairs[i].r <= 1e-9) {
            sum += pairs[j].value;
            ++j;
        }
        curve.distances.push_back(pairs[i].r);
        curve.values.push_back(sum / static_cast<double>(j - i));
        curve.counts.push_back(static_cast<int>(j - i));
        i = j;
    }
    return curve;
}

inline CalibratedCurve calibrate_correlation(const CovarianceMatrix& cov,
                                             const std::vector<Point>& coords,
                                             const FieldSelector& field = {}) {
    return calibrate_correlation(cov.entries(), coords, field);
}

// L2 norm of the pointwise difference between two curves sharing the same
// distance support.
inline double correlation_mismatch(const CalibratedCurve& a, const CalibratedCurve& b) {
    require_config(a.distances.size() == b.distances.size(),
                   "correlation_mismatch: curves have different supports");
    double sum = 0.0;
    for (std::size_t i = 0; i < a.distances.size(); ++i) {
        require_config(std::abs(a.distances[i] - b.distances[i]) <= 1e-9,
                       "correlation_mismatch: curves have different supports");
        const double d = a.values[i] - b.values[i];
        sum += d * d;
    }
    return std::sqrt(sum);
}

// AIRM distance between the correlation parts of two covariance matrices;
// invariant under any diagonal rescaling of either input.
inline double airm_between_correlations(const Eigen::MatrixXd& assumed,
                                        const Eigen::MatrixXd& exact) {
    return airm_distance(correlation_from_covariance(assumed),
                         correlation_from_covariance(exact));
}

inline double airm_between_correlations(const CovarianceMatrix& assumed,
                                        const CovarianceMatrix& exact) {
    return airm_between_correlations(assumed.entries(), exact.entries());
}

} // namespace covtune
