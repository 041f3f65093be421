#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "covtune/errors.hpp"

namespace covtune {

enum class KernelKind { Exponential, Balgovind, Gaussian };

inline std::string to_string(KernelKind k) {
    switch (k) {
        case KernelKind::Exponential: return "exponential";
        case KernelKind::Balgovind: return "balgovind";
        case KernelKind::Gaussian: return "gaussian";
    }
    return "?";
}

inline KernelKind kernel_kind_from_string(const std::string& s) {
    if (s == "exponential") return KernelKind::Exponential;
    if (s == "balgovind") return KernelKind::Balgovind;
    if (s == "gaussian") return KernelKind::Gaussian;
    throw config_error("unknown correlation kernel: " + s);
}

// Isotropic correlation kernel with length scale L (grid units).
struct CorrelationKernel {
    KernelKind kind = KernelKind::Exponential;
    double length = 1.0;
};

// phi(r) for separation distance r >= 0. All three families satisfy
// phi(0) = 1 and are non-increasing in r.
inline double kernel_eval(const CorrelationKernel& kernel, double r) {
    require_config(kernel.length > 0.0, "kernel length scale must be positive");
    require_config(r >= 0.0 && std::isfinite(r), "kernel distance must be finite and nonnegative");
    const double s = r / kernel.length;
    switch (kernel.kind) {
        case KernelKind::Exponential: return std::exp(-s);
        case KernelKind::Balgovind: return (1.0 + s) * std::exp(-s);
        case KernelKind::Gaussian: return std::exp(-0.5 * s * s);
    }
    throw config_error("kernel_eval: unhandled kernel kind");
}

using Point = std::array<double, 2>;

// Row-major coordinates of a rows x cols grid patch, unit spacing.
inline std::vector<Point> grid_coordinates(int rows, int cols) {
    require_config(rows > 0 && cols > 0, "grid_coordinates: grid must be nonempty");
    std::vector<Point> pts;
    pts.reserve(static_cast<std::size_t>(rows) * cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j)
            pts.push_back({static_cast<double>(i), static_cast<double>(j)});
    return pts;
}

inline double euclidean(const Point& a, const Point& b) {
    const double dx = a[0] - b[0];
    const double dy = a[1] - b[1];
    return std::sqrt(dx * dx + dy * dy);
}

// Dense correlation matrix C_ij = phi(|p_i - p_j|); unit diagonal, symmetric
// by construction.
inline Eigen::MatrixXd build_correlation_matrix(const CorrelationKernel& kernel,
                                                const std::vector<Point>& coords) {
    const auto n = static_cast<Eigen::Index>(coords.size());
    require_config(n > 0, "build_correlation_matrix: need at least one point");
    Eigen::MatrixXd c(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        c(i, i) = 1.0;
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double v = kernel_eval(kernel, euclidean(coords[i], coords[j]));
            c(i, j) = v;
            c(j, i) = v;
        }
    }
    return c;
}

} // namespace covtune
