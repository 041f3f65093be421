#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "covtune/errors.hpp"
#include "covtune/rng.hpp"

namespace covtune {

// Cholesky-style factor of a covariance matrix: C + jitter * I = L * L^T.
// jitter records the diagonal regularization that was needed (0 in the
// common case). The all-zero covariance factorizes to L = 0.
struct SpdFactor {
    Eigen::MatrixXd L;
    double jitter = 0.0;
};

namespace detail {

inline bool is_symmetric(const Eigen::MatrixXd& m, double rel_tol) {
    const double scale = m.cwiseAbs().maxCoeff();
    if (scale == 0.0) return true;
    return (m - m.transpose()).cwiseAbs().maxCoeff() <= rel_tol * scale;
}

} // namespace detail

// Factorize a symmetric positive semidefinite matrix, escalating through a
// short jitter ladder before giving up: jitter in {0, j0, 10 j0, 100 j0}
// with j0 = 1e-14 * trace / dim. Throws numerical_error if the matrix is
// still not positive definite at the top of the ladder.
inline SpdFactor spd_factorize(const Eigen::MatrixXd& c) {
    require_numeric(c.rows() == c.cols(), "spd_factorize: matrix must be square");
    if (c.cwiseAbs().maxCoeff() == 0.0)
        return SpdFactor{Eigen::MatrixXd::Zero(c.rows(), c.cols()), 0.0};
    const double j0 = 1e-14 * c.trace() / static_cast<double>(c.rows());
    const double ladder[] = {0.0, j0, 10.0 * j0, 100.0 * j0};
    for (double jitter : ladder) {
        if (jitter < 0.0) continue;
        Eigen::MatrixXd work = c;
        if (jitter > 0.0) work.diagonal().array() += jitter;
        Eigen::LLT<Eigen::MatrixXd> llt(work);
        if (llt.info() == Eigen::Success)
            return SpdFactor{llt.matrixL(), jitter};
    }
    throw numerical_error("spd_factorize: matrix is not positive definite");
}

// Validated covariance matrix: square, finite, symmetric to 1e-12 relative
// tolerance (stored exactly symmetrized), nonnegative trace. jitter_applied
// reports the regularization used by the most recent factorize() call.
class CovarianceMatrix {
public:
    explicit CovarianceMatrix(Eigen::MatrixXd entries) {
        require_config(entries.rows() == entries.cols(),
                       "covariance matrix must be square");
        require_config(entries.size() > 0, "covariance matrix must be nonempty");
        require_numeric(entries.allFinite(), "covariance matrix has non-finite entries");
        require_numeric(detail::is_symmetric(entries, 1e-12),
                        "covariance matrix is not symmetric");
        entries_ = 0.5 * (entries + entries.transpose());
        require_numeric(entries_.trace() >= 0.0, "covariance matrix has negative trace");
    }

    Eigen::Index dim() const { return entries_.rows(); }
    const Eigen::MatrixXd& entries() const { return entries_; }
    double jitter_applied() const { return jitter_applied_; }

    const SpdFactor& factorize() {
        if (!factor_) {
            factor_ = spd_factorize(entries_);
            jitter_applied_ = factor_->jitter;
        }
        return *factor_;
    }

private:
    Eigen::MatrixXd entries_;
    std::optional<SpdFactor> factor_;
    double jitter_applied_ = 0.0;
};

// Per-component variances used to turn a correlation matrix into a
// covariance matrix and back.
struct DiagonalScale {
    Eigen::VectorXd variances;
};

// Cov = D^{1/2} * Cor * D^{1/2} with D = diag(variances).
inline Eigen::MatrixXd covariance_from_correlation(const Eigen::MatrixXd& correlation,
                                                   const DiagonalScale& scale) {
    require_config(correlation.rows() == correlation.cols(),
                   "covariance_from_correlation: correlation must be square");
    require_config(scale.variances.size() == correlation.rows(),
                   "covariance_from_correlation: variance vector size mismatch");
    require_config((scale.variances.array() >= 0.0).all(),
                   "covariance_from_correlation: variances must be nonnegative");
    const Eigen::VectorXd sd = scale.variances.array().sqrt();
    return sd.asDiagonal() * correlation * sd.asDiagonal();
}

// Cor_ij = Cov_ij / sqrt(Cov_ii * Cov_jj). Requires strictly positive
// diagonal.
inline Eigen::MatrixXd correlation_from_covariance(const Eigen::MatrixXd& covariance) {
    require_config(covariance.rows() == covariance.cols(),
                   "correlation_from_covariance: matrix must be square");
    require_numeric((covariance.diagonal().array() > 0.0).all(),
                    "correlation_from_covariance: diagonal must be positive");
    const Eigen::VectorXd inv_sd = covariance.diagonal().array().rsqrt();
    return inv_sd.asDiagonal() * covariance * inv_sd.asDiagonal();
}

// Draw mean + L z with z standard normal, consuming exactly dim normal
// deviates from rng in component order.
inline Eigen::VectorXd sample_gaussian(const Eigen::VectorXd& mean,
                                       const SpdFactor& factor, Rng& rng) {
    require_config(mean.size() == factor.L.rows(),
                   "sample_gaussian: mean/covariance dimension mismatch");
    Eigen::VectorXd z(mean.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = rng.normal();
    return mean + factor.L * z;
}

inline Eigen::VectorXd sample_gaussian(const Eigen::VectorXd& mean,
                                       CovarianceMatrix& cov, Rng& rng) {
    return sample_gaussian(mean, cov.factorize(), rng);
}

namespace detail {

// Eigendecomposition with a relative floor on the eigenvalues. Inputs whose
// spectrum dips below -1e-10 * trace are rejected as indefinite; small
// nonpositive eigenvalues from rounding are clamped to 1e-14 * lambda_max.
inline void floored_eigen(const Eigen::MatrixXd& m, Eigen::VectorXd& evals,
                          Eigen::MatrixXd& evecs, const char* what) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()));
    require_numeric(es.info() == Eigen::Success,
                    std::string(what) + ": eigendecomposition failed");
    evals = es.eigenvalues();
    evecs = es.eigenvectors();
    const double lmax = evals.maxCoeff();
    require_numeric(lmax > 0.0, std::string(what) + ": matrix is not positive definite");
    require_numeric(evals.minCoeff() >= -1e-10 * m.trace(),
                    std::string(what) + ": matrix is not positive definite");
    const double floor = 1e-14 * lmax;
    evals = evals.cwiseMax(floor);
}

} // namespace detail

// Affine-invariant Riemannian metric between symmetric positive definite
// matrices: || log(X^{-1/2} Y X^{-1/2}) ||_F.
inline double airm_distance(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
    require_config(x.rows() == x.cols() && y.rows() == y.cols() && x.rows() == y.rows(),
                   "airm_distance: matrices must be square and of equal size");
    Eigen::VectorXd lx;
    Eigen::MatrixXd ux;
    detail::floored_eigen(x, lx, ux, "airm_distance");
    const Eigen::MatrixXd inv_sqrt_x =
        ux * lx.array().rsqrt().matrix().asDiagonal() * ux.transpose();
    const Eigen::MatrixXd w = inv_sqrt_x * y * inv_sqrt_x;
    Eigen::VectorXd lw;
    Eigen::MatrixXd uw;
    detail::floored_eigen(w, lw, uw, "airm_distance");
    return lw.array().log().matrix().norm();
}

inline Eigen::MatrixXd block_diag(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(a.rows() + b.rows(), a.cols() + b.cols());
    out.topLeftCorner(a.rows(), a.cols()) = a;
    out.bottomRightCorner(b.rows(), b.cols()) = b;
    return out;
}

} // namespace covtune
