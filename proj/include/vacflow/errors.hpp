#pragma once

#include <stdexcept>
#include <string>

namespace vacflow {

// Bad problem data or configuration (CLI exit code 4).
struct invalid_parameter_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Any failure of the numerical machinery (CLI exit code 3).
struct numerical_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// The ODE right-hand side was requested too close to a sonic line away
// from a triple point, or an integration ran into one.
struct sonic_error : numerical_error {
    sonic_error(const std::string& msg, double xi_hit) : numerical_error(msg), xi(xi_hit) {}
    double xi;
};

struct bracket_error : numerical_error {
    using numerical_error::numerical_error;
};

struct convergence_error : numerical_error {
    using numerical_error::numerical_error;
};

struct no_intersection_error : numerical_error {
    using numerical_error::numerical_error;
};

} // namespace vacflow
