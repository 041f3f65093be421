#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "covtune/errors.hpp"

namespace covtune {

// Saint-Venant solver parameters on a periodic nx x ny grid. Units are the
// model's: grid spacing in mm, velocities in 0.1 m/s, time in seconds.
struct SWConfig {
    int nx = 100;
    int ny = 100;
    double dx = 1.0;
    double dy = 1.0;
    double dt = 1e-6;
    double g = 1.0;
    double b = 0.0;

    void validate() const {
        require_config(nx > 0 && ny > 0, "solver grid must be nonempty");
        require_config(dx > 0.0 && dy > 0.0, "grid spacing must be positive");
        require_config(dt > 0.0, "time step must be positive");
        require_config(g > 0.0, "gravity must be positive");
        require_config(b >= 0.0, "damping must be nonnegative");
    }
};

// Velocity and height fields, row-major with index i*ny + j.
struct FlowState {
    int nx = 0;
    int ny = 0;
    double time = 0.0;
    std::vector<double> u, v, h;

    std::size_t idx(int i, int j) const {
        return static_cast<std::size_t>(i) * ny + j;
    }
};

inline void check_cfl(const SWConfig& cfg, double h_max) {
    const double cfl = std::sqrt(cfg.g * h_max) * cfg.dt / std::min(cfg.dx, cfg.dy);
    require_config(cfl < 1.0, "CFL condition violated: sqrt(g h_max) dt / min(dx,dy) = " +
                                  std::to_string(cfl));
}

// Still water of height base_height with a cylindrical column of extra
// height bump (radius in grid units, center in grid indices). u = v = 0.
inline FlowState init_cylinder(const SWConfig& cfg, double base_height, double bump,
                               std::pair<int, int> center, double radius) {
    cfg.validate();
    require_config(radius >= 0.0 && 2.0 * radius < std::min(cfg.nx, cfg.ny),
                   "cylinder radius must fit inside half the grid");
    require_config(base_height > 0.0 && base_height + bump > 0.0,
                   "initial height must stay positive");
    FlowState s;
    s.nx = cfg.nx;
    s.ny = cfg.ny;
    s.time = 0.0;
    const std::size_t cells = static_cast<std::size_t>(cfg.nx) * cfg.ny;
    s.u.assign(cells, 0.0);
    s.v.assign(cells, 0.0);
    s.h.assign(cells, base_height);
    const double r2 = radius * radius;
    for (int i = 0; i < cfg.nx; ++i) {
        for (int j = 0; j < cfg.ny; ++j) {
            const double di = i - center.first;
            const double dj = j - center.second;
            if (di * di + dj * dj <= r2) s.h[s.idx(i, j)] += bump;
        }
    }
    check_cfl(cfg, base_height + std::max(0.0, bump));
    return s;
}

// Forward-Euler stepper with reusable flux scratch space. One step reads all
// fields at time n and writes time n+1:
//   u += dt (-g (h_{i+1,j} - h_{ij})/dx - b u)     (v analogous in j)
//   h -= dt (backward difference of the face fluxes u_ij (h_ij+h_{i+1,j})/2)
// The height update telescopes over the periodic grid, so total mass is
// conserved up to rounding. Throws numerical_error when a field goes
// non-finite (solver blow-up).
class Stepper {
public:
    explicit Stepper(const SWConfig& cfg) : cfg_(cfg) {
        cfg.validate();
        fx_.resize(static_cast<std::size_t>(cfg.nx) * cfg.ny);
        fy_.resize(fx_.size());
    }

    void step(FlowState& s) {
        require_config(s.nx == cfg_.nx && s.ny == cfg_.ny,
                       "stepper: state does not match solver grid");
        const int nx = cfg_.nx;
        const int ny = cfg_.ny;
        const double dt = cfg_.dt;
        const double gx = cfg_.g / cfg_.dx;
        const double gy = cfg_.g / cfg_.dy;
        const double damp = cfg_.b;
        double* u = s.u.data();
        double* v = s.v.data();
        double* h = s.h.data();
        double* fx = fx_.data();
        double* fy = fy_.data();

        for (int i = 0; i < nx; ++i) {
            const int ip = (i + 1 == nx) ? 0 : i + 1;
            const std::size_t row = static_cast<std::size_t>(i) * ny;
            const std::size_t rowp = static_cast<std::size_t>(ip) * ny;
            for (int j = 0; j < ny - 1; ++j) {
                fx[row + j] = 0.5 * u[row + j] * (h[row + j] + h[rowp + j]);
                fy[row + j] = 0.5 * v[row + j] * (h[row + j] + h[row + j + 1]);
            }
            const std::size_t last = row + ny - 1;
            fx[last] = 0.5 * u[last] * (h[last] + h[rowp + ny - 1]);
            fy[last] = 0.5 * v[last] * (h[last] + h[row]);
        }

        for (int i = 0; i < nx; ++i) {
            const int ip = (i + 1 == nx) ? 0 : i + 1;
            const std::size_t row = static_cast<std::size_t>(i) * ny;
            const std::size_t rowp = static_cast<std::size_t>(ip) * ny;
            for (int j = 0; j < ny - 1; ++j) {
                u[row + j] += dt * (-gx * (h[rowp + j] - h[row + j]) - damp * u[row + j]);
                v[row + j] += dt * (-gy * (h[row + j + 1] - h[row + j]) - damp * v[row + j]);
            }
            const std::size_t last = row + ny - 1;
            u[last] += dt * (-gx * (h[rowp + ny - 1] - h[last]) - damp * u[last]);
            v[last] += dt * (-gy * (h[row] - h[last]) - damp * v[last]);
        }

        double mass = 0.0;
        const double rx = dt / cfg_.dx;
        const double ry = dt / cfg_.dy;
        for (int i = 0; i < nx; ++i) {
            const int im = (i == 0) ? nx - 1 : i - 1;
            const std::size_t row = static_cast<std::size_t>(i) * ny;
            const std::size_t rowm = static_cast<std::size_t>(im) * ny;
            {
                const std::size_t k = row;
                h[k] -= rx * (fx[k] - fx[rowm]) + ry * (fy[k] - fy[row + ny - 1]);
                mass += h[k];
            }
            for (int j = 1; j < ny; ++j) {
                const std::size_t k = row + j;
                h[k] -= rx * (fx[k] - fx[rowm + j]) + ry * (fy[k] - fy[k - 1]);
                mass += h[k];
            }
        }
        s.time += dt;
        ++steps_taken_;
        require_numeric(std::isfinite(mass),
                        "solver blow-up: non-finite height field at step " +
                            std::to_string(steps_taken_));
    }

private:
    SWConfig cfg_;
    std::vector<double> fx_, fy_;
    long long steps_taken_ = 0;
};

inline FlowState step(const FlowState& state, const SWConfig& cfg) {
    FlowState next = state;
    Stepper sp(cfg);
    sp.step(next);
    return next;
}

inline FlowState integrate(FlowState state, const SWConfig& cfg, long long n_steps) {
    require_config(n_steps >= 0, "integrate: step count must be nonnegative");
    Stepper sp(cfg);
    for (long long k = 0; k < n_steps; ++k) sp.step(state);
    return state;
}

// Rectangular index window of the grid; defaults to the observation
// subdomain used by the experiments (rows 50-59, columns 60-69).
struct Window {
    int row0 = 50;
    int col0 = 60;
    int rows = 10;
    int cols = 10;

    void validate(int nx, int ny) const {
        require_config(rows > 0 && cols > 0 && row0 >= 0 && col0 >= 0 &&
                           row0 + rows <= nx && col0 + cols <= ny,
                       "subdomain window does not fit in the grid");
    }
    int size() const { return 2 * rows * cols; }
};

// Flatten the window's velocities into a vector: u block first, then v,
// each row-major within the window.
inline Eigen::VectorXd extract_subdomain(const FlowState& s, const Window& w) {
    w.validate(s.nx, s.ny);
    Eigen::VectorXd out(w.size());
    const int block = w.rows * w.cols;
    for (int i = 0; i < w.rows; ++i) {
        for (int j = 0; j < w.cols; ++j) {
            const std::size_t k = s.idx(w.row0 + i, w.col0 + j);
            out(i * w.cols + j) = s.u[k];
            out(block + i * w.cols + j) = s.v[k];
        }
    }
    return out;
}

// Write sub-window velocity fields back into a copy of the reference state;
// the surrounding grid keeps the reference values (boundary data for the
// next forecast).
inline FlowState embed_subdomain(const FlowState& reference, const Window& w,
                                 const Eigen::VectorXd& sub_u,
                                 const Eigen::VectorXd& sub_v) {
    w.validate(reference.nx, reference.ny);
    const int block = w.rows * w.cols;
    require_config(sub_u.size() == block && sub_v.size() == block,
                   "embed_subdomain: sub-field size mismatch");
    FlowState out = reference;
    for (int i = 0; i < w.rows; ++i) {
        for (int j = 0; j < w.cols; ++j) {
            const std::size_t k = out.idx(w.row0 + i, w.col0 + j);
            out.u[k] = sub_u(i * w.cols + j);
            out.v[k] = sub_v(i * w.cols + j);
        }
    }
    return out;
}

inline FlowState embed_subdomain(const FlowState& reference, const Window& w,
                                 const Eigen::VectorXd& packed) {
    const int block = w.rows * w.cols;
    require_config(packed.size() == 2 * block,
                   "embed_subdomain: packed vector size mismatch");
    return embed_subdomain(reference, w, packed.head(block), packed.tail(block));
}

inline double total_mass(const FlowState& s) {
    double m = 0.0;
    for (double x : s.h) m += x;
    return m;
}

// Row-major CSV dump of all three fields for external plotting.
inline void save_flow_csv(const FlowState& s, const std::string& path) {
    std::ofstream out(path);
    require_config(out.good(), "cannot open " + path + " for writing");
    out << "nx,ny,time\n";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%d,%d,%.17g\n", s.nx, s.ny, s.time);
    out << buf;
    const char* names[] = {"u", "v", "h"};
    const std::vector<double>* fields[] = {&s.u, &s.v, &s.h};
    for (int f = 0; f < 3; ++f) {
        out << names[f] << "\n";
        for (int i = 0; i < s.nx; ++i) {
            for (int j = 0; j < s.ny; ++j) {
                std::snprintf(buf, sizeof buf, "%.17g", (*fields[f])[s.idx(i, j)]);
                out << buf << (j + 1 == s.ny ? "\n" : ",");
            }
        }
    }
    require_config(out.good(), "write failure on " + path);
}

} // namespace covtune
