#pragma once

#include <cmath>
#include <functional>

#include "vacflow/errors.hpp"

namespace vacflow {

// Bracketed scalar root finding: bisection with a secant acceleration step
// whenever the secant candidate stays inside the bracket. The bracket must
// have opposite signs at the endpoints.
template <class F>
double solve_bracketed(F&& f, double lo, double hi, double xtol, int max_iter = 200) {
    double flo = f(lo), fhi = f(hi);
    if (flo == 0.0) return lo;
    if (fhi == 0.0) return hi;
    if (std::signbit(flo) == std::signbit(fhi))
        throw bracket_error("solve_bracketed: endpoints do not bracket a root");
    for (int it = 0; it < max_iter; ++it) {
        double mid = 0.5 * (lo + hi);
        // secant candidate
        const double denom = fhi - flo;
        if (denom != 0.0) {
            const double sec = hi - fhi * (hi - lo) / denom;
            if (sec > std::min(lo, hi) && sec < std::max(lo, hi)) mid = sec;
        }
        const double fm = f(mid);
        if (fm == 0.0 || std::abs(hi - lo) < xtol) return mid;
        if (std::signbit(fm) == std::signbit(flo)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
            fhi = fm;
        }
        // fall back to pure bisection progress guarantee
        if (std::abs(hi - lo) < xtol) return 0.5 * (lo + hi);
    }
    return 0.5 * (lo + hi);
}

// Least-squares slope of y against x.
inline double ls_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const size_t n = x.size();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (size_t i = 0; i < n; ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    const double det = n * sxx - sx * sx;
    if (det == 0.0) throw numerical_error("ls_slope: degenerate abscissae");
    return (n * sxy - sx * sy) / det;
}

} // namespace vacflow
