#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include <Eigen/Dense>

#include "covtune/assimilation.hpp"
#include "covtune/errors.hpp"
#include "covtune/rng.hpp"

namespace covtune {

// Random aggregation operator: each observation sums a Binomial(state_dim, p)
// sized sample of state entries, drawn uniformly with replacement. Zero rows
// are permitted. The operator is generated once per experiment set and kept
// fixed across all trials.
struct BinomialSelectionSpec {
    Eigen::Index state_dim = 200;
    Eigen::Index obs_dim = 100;
    double p = 0.01;
    std::uint64_t seed = 0;

    void validate() const {
        require_config(state_dim >= 1 && obs_dim >= 1,
                       "observation operator dimensions must be at least 1");
        require_config(p > 0.0 && p < 1.0, "selection probability must lie in (0, 1)");
    }
};

// Deterministic per seed: row j first consumes state_dim Bernoulli draws for
// its sample size n_j, then n_j index draws; entry (j, k) counts how often k
// was selected.
inline LinearObservationOperator generate_h(const BinomialSelectionSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(spec.obs_dim, spec.state_dim);
    for (Eigen::Index j = 0; j < spec.obs_dim; ++j) {
        Eigen::Index n_j = 0;
        for (Eigen::Index t = 0; t < spec.state_dim; ++t)
            if (rng.bernoulli(spec.p)) ++n_j;
        for (Eigen::Index t = 0; t < n_j; ++t) {
            const auto k = static_cast<Eigen::Index>(
                rng.uniform_below(static_cast<std::uint64_t>(spec.state_dim)));
            h(j, k) += 1.0;
        }
    }
    return LinearObservationOperator{std::move(h)};
}

inline Eigen::VectorXd apply(const LinearObservationOperator& h, const Eigen::VectorXd& x) {
    return h.apply(x);
}

// Histogram of row sums (sample sizes n_j), for diagnostics.
inline std::map<long, long> row_count_histogram(const LinearObservationOperator& h) {
    std::map<long, long> hist;
    for (Eigen::Index j = 0; j < h.obs_dim(); ++j)
        ++hist[static_cast<long>(std::lround(h.matrix.row(j).sum()))];
    return hist;
}

inline void save_operator_csv(const LinearObservationOperator& h, const std::string& path) {
    std::ofstream out(path);
    require_config(out.good(), "cannot open " + path + " for writing");
    for (Eigen::Index j = 0; j < h.obs_dim(); ++j) {
        for (Eigen::Index k = 0; k < h.state_dim(); ++k) {
            out << static_cast<long>(std::lround(h.matrix(j, k)));
            out << (k + 1 == h.state_dim() ? "\n" : ",");
        }
    }
    require_config(out.good(), "write failure on " + path);
}

inline LinearObservationOperator load_operator_csv(const std::string& path) {
    std::ifstream in(path);
    require_config(in.good(), "cannot open " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
        require_config(rows.empty() || row.size() == rows.front().size(),
                       "ragged rows in operator file " + path);
        rows.push_back(std::move(row));
    }
    require_config(!rows.empty(), "empty operator file " + path);
    Eigen::MatrixXd h(rows.size(), rows.front().size());
    for (std::size_t j = 0; j < rows.size(); ++j)
        for (std::size_t k = 0; k < rows[j].size(); ++k)
            h(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) = rows[j][k];
    return LinearObservationOperator{std::move(h)};
}

} // namespace covtune
