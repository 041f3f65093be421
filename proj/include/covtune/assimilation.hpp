#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "covtune/errors.hpp"
#include "covtune/spd.hpp"

namespace covtune {

// Observation operator y = H x as an explicit dense matrix.
struct LinearObservationOperator {
    Eigen::MatrixXd matrix;

    Eigen::Index obs_dim() const { return matrix.rows(); }
    Eigen::Index state_dim() const { return matrix.cols(); }

    Eigen::VectorXd apply(const Eigen::VectorXd& x) const {
        require_config(x.size() == state_dim(),
                       "observation operator: state dimension mismatch");
        return matrix * x;
    }
};

// One analysis problem: background x_b with assumed covariance B_A,
// observations y with assumed covariance R, linear operator H.
struct AssimilationProblem {
    Eigen::VectorXd x_b;
    Eigen::VectorXd y;
    CovarianceMatrix B_A;
    CovarianceMatrix R;
    LinearObservationOperator H;

    AssimilationProblem(Eigen::VectorXd x_b_, Eigen::VectorXd y_,
                        CovarianceMatrix B_A_, CovarianceMatrix R_,
                        LinearObservationOperator H_)
        : x_b(std::move(x_b_)), y(std::move(y_)), B_A(std::move(B_A_)),
          R(std::move(R_)), H(std::move(H_)) {
        require_config(y.size() > 0, "assimilation problem: empty observation vector");
        require_config(x_b.size() == H.state_dim(),
                       "assimilation problem: background/operator dimension mismatch");
        require_config(y.size() == H.obs_dim(),
                       "assimilation problem: observation/operator dimension mismatch");
        require_config(B_A.dim() == x_b.size(),
                       "assimilation problem: background covariance dimension mismatch");
        require_config(R.dim() == y.size(),
                       "assimilation problem: observation covariance dimension mismatch");
    }
};

enum class Method { ThreeDVar, Naive, Tracked, Augmented };

inline std::string to_string(Method m) {
    switch (m) {
        case Method::ThreeDVar: return "3dvar";
        case Method::Naive: return "naive";
        case Method::Tracked: return "tracked";
        case Method::Augmented: return "augmented";
    }
    return "?";
}

inline Method method_from_string(const std::string& s) {
    if (s == "3dvar") return Method::ThreeDVar;
    if (s == "naive") return Method::Naive;
    if (s == "tracked") return Method::Tracked;
    if (s == "augmented") return Method::Augmented;
    throw config_error("unknown method: " + s);
}

// Controls for the iterative tuning loop. alpha in [0, 1] blends the
// posterior trace into the rescaled background trace (0 keeps the prior
// trace exactly, 1 adopts the posterior trace). innovation_rel_tol > 0
// enables early stopping when the background innovation norm stagnates.
struct TuningConfig {
    Method method = Method::ThreeDVar;
    double alpha = 0.0;
    int max_iters = 1;
    double innovation_rel_tol = 0.0;

    void validate() const {
        require_config(alpha >= 0.0 && alpha <= 1.0, "alpha must lie in [0, 1]");
        require_config(max_iters >= 1, "max_iters must be at least 1");
        require_config(innovation_rel_tol >= 0.0, "innovation_rel_tol must be nonnegative");
    }
};

// Snapshot after iteration n: updated background, its assumed covariance,
// the tracked background-observation cross covariance (zero where a scheme
// does not maintain one), and the innovation norm ||y - H x_b_n||.
struct IterativeState {
    int n = 0;
    Eigen::VectorXd x_b_n;
    Eigen::MatrixXd B_A_n;
    Eigen::MatrixXd cross_cov_n;
    double innovation_norm_n = 0.0;
};

namespace detail {

inline Eigen::MatrixXd symmetrized(const Eigen::MatrixXd& m) {
    return 0.5 * (m + m.transpose());
}

// X = S^{-1} M through the triangular factor of S.
inline Eigen::MatrixXd spd_solve(const SpdFactor& f, const Eigen::MatrixXd& m) {
    Eigen::MatrixXd tmp = f.L.triangularView<Eigen::Lower>().solve(m);
    return f.L.transpose().triangularView<Eigen::Upper>().solve(tmp);
}

} // namespace detail

// K = B H^T (H B H^T + R)^{-1}, evaluated through a symmetric solve.
inline Eigen::MatrixXd kalman_gain(const Eigen::MatrixXd& b, const Eigen::MatrixXd& r,
                                   const LinearObservationOperator& h) {
    require_config(b.rows() == h.state_dim() && r.rows() == h.obs_dim(),
                   "kalman_gain: dimension mismatch");
    const Eigen::MatrixXd hb = h.matrix * b;
    Eigen::MatrixXd s = hb * h.matrix.transpose() + r;
    const SpdFactor f = spd_factorize(detail::symmetrized(s));
    return detail::spd_solve(f, hb).transpose();
}

struct BlueResult {
    Eigen::VectorXd x_a;
    Eigen::MatrixXd A_A;
    Eigen::MatrixXd gain;
};

// Best linear unbiased estimate under the assumed covariances, together
// with the assumed analysis covariance A = (I - K H) B.
inline BlueResult blue_analysis(const AssimilationProblem& p) {
    const Eigen::MatrixXd& b = p.B_A.entries();
    const Eigen::MatrixXd k = kalman_gain(b, p.R.entries(), p.H);
    const Eigen::VectorXd x_a = p.x_b + k * (p.y - p.H.apply(p.x_b));
    const Eigen::MatrixXd ikh =
        Eigen::MatrixXd::Identity(b.rows(), b.cols()) - k * p.H.matrix;
    return BlueResult{x_a, detail::symmetrized(ikh * b), k};
}

// J(x) = 1/2 (x - x_b)^T B^{-1} (x - x_b) + 1/2 (y - H x)^T R^{-1} (y - H x).
inline double variational_cost(const AssimilationProblem& p, const Eigen::VectorXd& x) {
    require_config(x.size() == p.x_b.size(), "variational_cost: state dimension mismatch");
    const Eigen::VectorXd db = x - p.x_b;
    const Eigen::VectorXd dy = p.y - p.H.apply(x);
    const SpdFactor fb = spd_factorize(p.B_A.entries());
    const SpdFactor fr = spd_factorize(p.R.entries());
    const Eigen::VectorXd wb = fb.L.triangularView<Eigen::Lower>().solve(db);
    const Eigen::VectorXd wr = fr.L.triangularView<Eigen::Lower>().solve(dy);
    return 0.5 * (wb.squaredNorm() + wr.squaredNorm());
}

// True analysis-error covariance of a single analysis performed with gain
// K(B_A, R_A) while the actual errors follow (B_E, R_E):
// A_E = (I - K H) B_E (I - K H)^T + K R_E K^T.
inline Eigen::MatrixXd posterior_exact_oneshot(const Eigen::MatrixXd& b_a,
                                               const Eigen::MatrixXd& b_e,
                                               const Eigen::MatrixXd& r_a,
                                               const Eigen::MatrixXd& r_e,
                                               const LinearObservationOperator& h) {
    const Eigen::MatrixXd k = kalman_gain(b_a, r_a, h);
    const Eigen::MatrixXd ikh =
        Eigen::MatrixXd::Identity(b_a.rows(), b_a.cols()) - k * h.matrix;
    return detail::symmetrized(ikh * b_e * ikh.transpose() + k * r_e * k.transpose());
}

// Covariance half of one scheme iteration: the recorded gain, the assumed
// posterior covariance of the analysis just made, and the background
// covariance and cross covariance carried into the next iteration.
struct CovarianceUpdate {
    Eigen::MatrixXd gain;
    Eigen::MatrixXd posterior;
    Eigen::MatrixXd B_next;
    Eigen::MatrixXd cross_next;
};

namespace detail {

inline double rescale_factor(double trace_prior, double trace_posterior, double alpha) {
    require_numeric(trace_posterior > 0.0, "degenerate posterior: nonpositive trace");
    return ((1.0 - alpha) * trace_prior + alpha * trace_posterior) / trace_posterior;
}

} // namespace detail

// Reuse of the analysis as the next background while pretending it is
// independent of the observations: B <- (I - K H) B, cross stays zero.
inline CovarianceUpdate naive_covariance_update(const Eigen::MatrixXd& b,
                                                const Eigen::MatrixXd& r,
                                                const LinearObservationOperator& h) {
    const Eigen::MatrixXd k = kalman_gain(b, r, h);
    const Eigen::MatrixXd ikh =
        Eigen::MatrixXd::Identity(b.rows(), b.cols()) - k * h.matrix;
    const Eigen::MatrixXd post = detail::symmetrized(ikh * b);
    require_numeric(post.trace() > 0.0, "degenerate posterior: nonpositive trace");
    return CovarianceUpdate{k, post, post,
                            Eigen::MatrixXd::Zero(b.rows(), r.rows())};
}

// Standard gain, but the induced background-observation cross covariance
// C is tracked and the assumed posterior corrected with it:
//   A = (I-KH) B + (I-KH) C K^T + K C^T (I-KH)^T,
//   B_next = lambda * A with the trace blend lambda,
//   C_next = (I-KH) C + K R.
inline CovarianceUpdate tracked_covariance_update(const Eigen::MatrixXd& b,
                                                  const Eigen::MatrixXd& cross,
                                                  const Eigen::MatrixXd& r,
                                                  const LinearObservationOperator& h,
                                                  double alpha) {
    const Eigen::MatrixXd k = kalman_gain(b, r, h);
    const Eigen::MatrixXd ikh =
        Eigen::MatrixXd::Identity(b.rows(), b.cols()) - k * h.matrix;
    const Eigen::MatrixXd mixed = ikh * cross * k.transpose();
    const Eigen::MatrixXd post =
        detail::symmetrized(ikh * b + mixed + mixed.transpose());
    const double lambda = detail::rescale_factor(b.trace(), post.trace(), alpha);
    return CovarianceUpdate{k, post, detail::symmetrized(lambda * post),
                            ikh * cross + k * r};
}

// BLUE solved in the joint background-observation space. With
// Ht = [I; H], z = (x_b; y) and the joint covariance
// C = [[B, cross], [cross^T, R]], the estimator is
// G = (Ht^T C^{-1} Ht)^{-1} Ht^T C^{-1}; the assumed posterior is
// (Ht^T C^{-1} Ht)^{-1} and the carried cross covariance G (cross; R).
inline CovarianceUpdate augmented_covariance_update(const Eigen::MatrixXd& b,
                                                    const Eigen::MatrixXd& cross,
                                                    const Eigen::MatrixXd& r,
                                                    const LinearObservationOperator& h,
                                                    double alpha) {
    const Eigen::Index n = b.rows();
    const Eigen::Index m = r.rows();
    require_config(cross.rows() == n && cross.cols() == m,
                   "augmented update: cross covariance dimension mismatch");
    Eigen::MatrixXd joint(n + m, n + m);
    joint.topLeftCorner(n, n) = b;
    joint.topRightCorner(n, m) = cross;
    joint.bottomLeftCorner(m, n) = cross.transpose();
    joint.bottomRightCorner(m, m) = r;
    Eigen::MatrixXd ht(n + m, n);
    ht.topRows(n) = Eigen::MatrixXd::Identity(n, n);
    ht.bottomRows(m) = h.matrix;

    const SpdFactor fj = spd_factorize(detail::symmetrized(joint));
    const Eigen::MatrixXd w = detail::spd_solve(fj, ht);
    const SpdFactor fm = spd_factorize(detail::symmetrized(ht.transpose() * w));
    const Eigen::MatrixXd post =
        detail::symmetrized(detail::spd_solve(fm, Eigen::MatrixXd::Identity(n, n)));
    const Eigen::MatrixXd gain = detail::spd_solve(fm, w.transpose());

    const double lambda = detail::rescale_factor(b.trace(), post.trace(), alpha);
    Eigen::MatrixXd stacked(n + m, m);
    stacked.topRows(n) = cross;
    stacked.bottomRows(m) = r;
    return CovarianceUpdate{gain, post, detail::symmetrized(lambda * post),
                            gain * stacked};
}

namespace detail {

inline Eigen::VectorXd apply_gain(Method method, const Eigen::MatrixXd& gain,
                                  const Eigen::VectorXd& x,
                                  const Eigen::VectorXd& y,
                                  const LinearObservationOperator& h) {
    if (method == Method::Augmented) {
        Eigen::VectorXd z(x.size() + y.size());
        z << x, y;
        return gain * z;
    }
    return x + gain * (y - h.apply(x));
}

} // namespace detail

inline IterativeState naive_step(const IterativeState& s, const Eigen::VectorXd& y,
                                 const Eigen::MatrixXd& r,
                                 const LinearObservationOperator& h) {
    const CovarianceUpdate u = naive_covariance_update(s.B_A_n, r, h);
    IterativeState next;
    next.n = s.n + 1;
    next.x_b_n = detail::apply_gain(Method::Naive, u.gain, s.x_b_n, y, h);
    next.B_A_n = u.B_next;
    next.cross_cov_n = u.cross_next;
    next.innovation_norm_n = (y - h.apply(next.x_b_n)).norm();
    return next;
}

inline IterativeState tracked_step(const IterativeState& s, const Eigen::VectorXd& y,
                                const Eigen::MatrixXd& r,
                                const LinearObservationOperator& h, double alpha) {
    const CovarianceUpdate u = tracked_covariance_update(s.B_A_n, s.cross_cov_n, r, h, alpha);
    IterativeState next;
    next.n = s.n + 1;
    next.x_b_n = detail::apply_gain(Method::Tracked, u.gain, s.x_b_n, y, h);
    next.B_A_n = u.B_next;
    next.cross_cov_n = u.cross_next;
    next.innovation_norm_n = (y - h.apply(next.x_b_n)).norm();
    return next;
}

inline IterativeState augmented_step(const IterativeState& s, const Eigen::VectorXd& y,
                               const Eigen::MatrixXd& r,
                               const LinearObservationOperator& h, double alpha) {
    const CovarianceUpdate u = augmented_covariance_update(s.B_A_n, s.cross_cov_n, r, h, alpha);
    IterativeState next;
    next.n = s.n + 1;
    next.x_b_n = detail::apply_gain(Method::Augmented, u.gain, s.x_b_n, y, h);
    next.B_A_n = u.B_next;
    next.cross_cov_n = u.cross_next;
    next.innovation_norm_n = (y - h.apply(next.x_b_n)).norm();
    return next;
}

// Run the configured scheme from the problem's background. Returns the
// post-step states 1..k (ThreeDVar performs exactly one BLUE step). With
// innovation_rel_tol > 0 the loop stops once the innovation norm changes
// by less than the tolerance, relatively, between consecutive iterations.
inline std::vector<IterativeState> run_iterative(const AssimilationProblem& p,
                                                 const TuningConfig& cfg) {
    cfg.validate();
    std::vector<IterativeState> out;

    if (cfg.method == Method::ThreeDVar) {
        const BlueResult blue = blue_analysis(p);
        IterativeState s;
        s.n = 1;
        s.x_b_n = blue.x_a;
        s.B_A_n = blue.A_A;
        s.cross_cov_n = Eigen::MatrixXd::Zero(p.x_b.size(), p.y.size());
        s.innovation_norm_n = (p.y - p.H.apply(blue.x_a)).norm();
        out.push_back(std::move(s));
        return out;
    }

    IterativeState s;
    s.n = 0;
    s.x_b_n = p.x_b;
    s.B_A_n = p.B_A.entries();
    s.cross_cov_n = Eigen::MatrixXd::Zero(p.x_b.size(), p.y.size());
    s.innovation_norm_n = (p.y - p.H.apply(p.x_b)).norm();

    double prev_innovation = s.innovation_norm_n;
    for (int k = 0; k < cfg.max_iters; ++k) {
        switch (cfg.method) {
            case Method::Naive:
                s = naive_step(s, p.y, p.R.entries(), p.H);
                break;
            case Method::Tracked:
                s = tracked_step(s, p.y, p.R.entries(), p.H, cfg.alpha);
                break;
            case Method::Augmented:
                s = augmented_step(s, p.y, p.R.entries(), p.H, cfg.alpha);
                break;
            case Method::ThreeDVar:
                break;
        }
        out.push_back(s);
        if (cfg.innovation_rel_tol > 0.0 && prev_innovation > 0.0) {
            const double rel =
                std::abs(s.innovation_norm_n - prev_innovation) / prev_innovation;
            if (rel < cfg.innovation_rel_tol) break;
        }
        prev_innovation = s.innovation_norm_n;
    }
    return out;
}

} // namespace covtune
