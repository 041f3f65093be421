#pragma once

#include <vector>

#include <Eigen/Dense>

#include "covtune/assimilation.hpp"
#include "covtune/errors.hpp"

namespace covtune {

// Ground-truth error covariance propagated alongside an assumed-side run.
// Index n holds the state before iteration n+1; cross_cov[0] is zero because
// the initial background error is independent of the observation error.
struct ExactTrace {
    std::vector<Eigen::MatrixXd> B_E;
    std::vector<Eigen::MatrixXd> cross_cov;

    static ExactTrace start(Eigen::MatrixXd b_e0, Eigen::Index obs_dim) {
        ExactTrace t;
        const Eigen::Index n = b_e0.rows();
        t.B_E.push_back(std::move(b_e0));
        t.cross_cov.push_back(Eigen::MatrixXd::Zero(n, obs_dim));
        return t;
    }

    const Eigen::MatrixXd& current_B() const { return B_E.back(); }
    const Eigen::MatrixXd& current_cross() const { return cross_cov.back(); }
    int iterations() const { return static_cast<int>(B_E.size()) - 1; }
};

// Advance the exact covariances through the operator the assumed-side scheme
// actually applied. For gain-form schemes (gain maps innovations to state):
//   B' = (I-KH) B (I-KH)^T + (I-KH) C K^T + K C^T (I-KH)^T + K R_E K^T
//   C' = (I-KH) C + K R_E
// For the augmented scheme the recorded operator G acts on (x; y):
//   B' = G [[B, C], [C^T, R_E]] G^T,  C' = G (C; R_E).
// R_E here is the true observation covariance, not the assumed one.
inline ExactTrace exact_step(ExactTrace trace, const Eigen::MatrixXd& gain,
                             const Eigen::MatrixXd& r_e,
                             const LinearObservationOperator& h, Method scheme) {
    const Eigen::MatrixXd& b = trace.current_B();
    const Eigen::MatrixXd& c = trace.current_cross();
    const Eigen::Index n = b.rows();
    const Eigen::Index m = r_e.rows();
    require_config(c.cols() == m && h.obs_dim() == m && h.state_dim() == n,
                   "exact_step: dimension mismatch");

    Eigen::MatrixXd b_next;
    Eigen::MatrixXd c_next;
    if (scheme == Method::Augmented) {
        require_config(gain.rows() == n && gain.cols() == n + m,
                       "exact_step: recorded augmented gain has wrong shape");
        Eigen::MatrixXd joint(n + m, n + m);
        joint.topLeftCorner(n, n) = b;
        joint.topRightCorner(n, m) = c;
        joint.bottomLeftCorner(m, n) = c.transpose();
        joint.bottomRightCorner(m, m) = r_e;
        b_next = detail::symmetrized(gain * joint * gain.transpose());
        Eigen::MatrixXd stacked(n + m, m);
        stacked.topRows(n) = c;
        stacked.bottomRows(m) = r_e;
        c_next = gain * stacked;
    } else {
        require_config(gain.rows() == n && gain.cols() == m,
                       "exact_step: recorded gain has wrong shape");
        const Eigen::MatrixXd ikh =
            Eigen::MatrixXd::Identity(n, n) - gain * h.matrix;
        const Eigen::MatrixXd mixed = ikh * c * gain.transpose();
        b_next = detail::symmetrized(ikh * b * ikh.transpose() + mixed +
                                     mixed.transpose() +
                                     gain * r_e * gain.transpose());
        c_next = ikh * c + gain * r_e;
    }
    trace.B_E.push_back(std::move(b_next));
    trace.cross_cov.push_back(std::move(c_next));
    return trace;
}

} // namespace covtune
