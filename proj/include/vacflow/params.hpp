#pragma once

#include <cmath>
#include <limits>

#include "vacflow/errors.hpp"

namespace vacflow {

// A quantity counts as zero when below this relative band; gamma within
// band of 3 is treated as gamma == 3 (the phase portrait switches there).
inline constexpr double kZeroBand = 1e-10;

// Problem data: pressure p = a^2 rho^gamma, initial velocity
// u0 = mach * c_plus * x^(1-lambda) and sound speed c0 = c_plus * x^(1-lambda)
// on x > 0, vacuum on x < 0.
struct Params {
    double gamma  = 1.75;
    double lambda = 0.7;
    double mach   = 0.0; // signed Mach number u_plus / c_plus
    double a      = 1.0;
    double c_plus = 1.0;

    double u_plus() const { return mach * c_plus; }
};

// Constants derived from (gamma, lambda). Single source of truth: everything
// downstream works off these values, never re-deriving ell from gamma.
struct Derived {
    double ell;        // 2 / (gamma - 1)
    double V_star;     // ell * (1 - lambda)
    double k1;         // (1/ell - 1) * (lambda - 1)
    double k0;         // (1/ell) * (lambda - 1)
    double lambda_hat; // (gamma - 3) / (3 gamma - 5); NaN unless gamma > 3
};

inline bool gamma_is_three(double gamma) { return std::abs(gamma - 3.0) < kZeroBand; }

inline void validate(const Params& p) {
    if (!(p.gamma > 1.0) || !std::isfinite(p.gamma))
        throw invalid_parameter_error("gamma must be a finite number > 1");
    if (!std::isfinite(p.lambda) || p.lambda == 0.0 || p.lambda >= 1.0)
        throw invalid_parameter_error("lambda must lie in (0,1) or be negative");
    if (std::abs(p.lambda) < kZeroBand || std::abs(p.lambda - 1.0) < kZeroBand)
        throw invalid_parameter_error("lambda too close to the excluded values 0, 1");
    if (!(p.c_plus > 0.0)) throw invalid_parameter_error("c_plus must be > 0");
    if (!(p.a > 0.0)) throw invalid_parameter_error("pressure constant a must be > 0");
    if (!std::isfinite(p.mach)) throw invalid_parameter_error("mach must be finite");
}

inline Derived derive(const Params& p) {
    validate(p);
    Derived d;
    d.ell    = 2.0 / (p.gamma - 1.0);
    d.V_star = d.ell * (1.0 - p.lambda);
    d.k1     = (1.0 / d.ell - 1.0) * (p.lambda - 1.0);
    d.k0     = (1.0 / d.ell) * (p.lambda - 1.0);
    d.lambda_hat = (p.gamma > 3.0 && !gamma_is_three(p.gamma))
                       ? (p.gamma - 3.0) / (3.0 * p.gamma - 5.0)
                       : std::numeric_limits<double>::quiet_NaN();
    return d;
}

// Bundle passed around by the ODE / shock / builder layers.
struct Sys {
    Params par;
    Derived d;

    explicit Sys(const Params& p) : par(p), d(derive(p)) {}
};

} // namespace vacflow
