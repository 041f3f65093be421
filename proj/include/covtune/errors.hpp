#pragma once

#include <stdexcept>
#include <string>

namespace covtune {

// Invalid or inconsistent user-provided configuration (bad dimensions,
// unknown keys, out-of-range parameters). CLI maps this to exit code 2.
class config_error : public std::runtime_error {
public:
    explicit config_error(const std::string& what) : std::runtime_error(what) {}
};

// Numerical failure at runtime (indefinite matrix after the jitter ladder,
// degenerate posterior trace, solver blow-up). CLI maps this to exit code 3.
class numerical_error : public std::runtime_error {
public:
    explicit numerical_error(const std::string& what) : std::runtime_error(what) {}
};

inline void require_config(bool cond, const std::string& what) {
    if (!cond) throw config_error(what);
}

inline void require_numeric(bool cond, const std::string& what) {
    if (!cond) throw numerical_error(what);
}

} // namespace covtune
