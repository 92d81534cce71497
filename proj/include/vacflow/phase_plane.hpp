#pragma once

#include <cmath>

#include "vacflow/params.hpp"

namespace vacflow {

struct PhasePoint {
    double V = 0.0;
    double C = 0.0;
};

inline double dist(const PhasePoint& p, const PhasePoint& q) {
    return std::hypot(p.V - q.V, p.C - q.C);
}

inline double radius2(const PhasePoint& p) { return p.V * p.V + p.C * p.C; }

// Sonic denominator D(V,C) = (1+V)^2 - C^2; vanishes on the critical lines
// L+- : C = +-(1+V).
inline double eval_D(const PhasePoint& p) {
    const double w = 1.0 + p.V;
    return w * w - p.C * p.C;
}

// G(V,C) = C^2 (V - V*) - V (1+V) (lambda + V)
inline double eval_G(const PhasePoint& p, const Derived& d, double lambda) {
    return p.C * p.C * (p.V - d.V_star) - p.V * (1.0 + p.V) * (lambda + p.V);
}

// F(V,C) = C { C^2 - (1+V)^2 + k1 (1+V) - k0 }
inline double eval_F(const PhasePoint& p, const Derived& d) {
    const double w = 1.0 + p.V;
    return p.C * (p.C * p.C - w * w + d.k1 * w - d.k0);
}

struct FGD {
    double F, G, D;
};

inline FGD eval_FGD(const PhasePoint& p, const Derived& d, double lambda) {
    return { eval_F(p, d), eval_G(p, d, lambda), eval_D(p) };
}

// Partial derivatives of F and G, used for critical point classification.
struct Jacobian {
    double F_V, F_C, G_V, G_C;
};

inline Jacobian eval_jacobian(const PhasePoint& p, const Derived& d, double lambda) {
    const double w = 1.0 + p.V;
    Jacobian j;
    j.F_C = 3.0 * p.C * p.C - w * w + d.k1 * w - d.k0;
    j.F_V = p.C * (d.k1 - 2.0 * w);
    j.G_C = 2.0 * p.C * (p.V - d.V_star);
    j.G_V = p.C * p.C - (3.0 * p.V * p.V + 2.0 * (1.0 + lambda) * p.V + lambda);
    return j;
}

// Signed distances to the critical lines, scaled so the tolerance band is
// meaningful for both small and large coordinates.
inline double critical_line_gap(const PhasePoint& p) {
    const double w = 1.0 + p.V;
    const double scale = 1.0 + std::abs(w) + std::abs(p.C);
    return std::min(std::abs(p.C - w), std::abs(p.C + w)) / scale;
}

// The straight-line trajectories E+- : C = +-(1/ell) V.
inline double e_line_gap(const PhasePoint& p, const Derived& d, int sign) {
    return std::abs(p.C - sign * p.V / d.ell);
}

// Open cone K = { |C| < |1+V| } bounded by L+ and L-.
inline bool in_cone(const PhasePoint& p) { return eval_D(p) > 0.0; }

// ---------------------------------------------------------------------------
// Regions of possible left/right shock states (lower half-plane S, upper T).
// ---------------------------------------------------------------------------

enum class Region {
    S1m, // 1+V < C < 0       left state of a 1-shock,  xi/lambda > 0
    S1p, // C < 1+V < 0       right state of a 1-shock, xi/lambda > 0
    S2m, // C < -(1+V) < 0    left state of a 2-shock,  xi/lambda > 0
    S2p, // -(1+V) < C < 0    right state of a 2-shock, xi/lambda > 0
    T1m, // 0 < C < 1+V       left state of a 1-shock,  xi/lambda < 0
    T1p, // 0 < 1+V < C       right state of a 1-shock, xi/lambda < 0
    T2m, // 0 < -(1+V) < C    left state of a 2-shock,  xi/lambda < 0
    T2p, // 0 < C < -(1+V)    right state of a 2-shock, xi/lambda < 0
    on_critical_line,
};

inline const char* to_string(Region r) {
    switch (r) {
        case Region::S1m: return "S1m";
        case Region::S1p: return "S1p";
        case Region::S2m: return "S2m";
        case Region::S2p: return "S2p";
        case Region::T1m: return "T1m";
        case Region::T1p: return "T1p";
        case Region::T2m: return "T2m";
        case Region::T2p: return "T2p";
        case Region::on_critical_line: return "L";
    }
    return "?";
}

inline constexpr double kRegionTol = 1e-9;

// Classify a phase point into one of the eight open regions. Points within
// the tolerance band of L+ or L- (or of the V-axis, where the jump relations
// degenerate) map to on_critical_line. The sign of xi/lambda fixes the
// admissible half-plane; a point on the wrong side violates the sign
// convention tying C to xi and is rejected.
inline Region region_of(const PhasePoint& p, int sign_xi_over_lambda) {
    if (critical_line_gap(p) < kRegionTol) return Region::on_critical_line;
    const double w = 1.0 + p.V;
    const double scale = 1.0 + std::abs(w) + std::abs(p.C);
    if (std::abs(p.C) < kRegionTol * scale) return Region::on_critical_line;
    if (sign_xi_over_lambda > 0) {
        if (p.C > 0.0)
            throw invalid_parameter_error("region_of: C > 0 inconsistent with xi/lambda > 0");
        if (w < 0.0) return (p.C > w) ? Region::S1m : Region::S1p;
        return (p.C < -w) ? Region::S2m : Region::S2p;
    }
    if (p.C < 0.0)
        throw invalid_parameter_error("region_of: C < 0 inconsistent with xi/lambda < 0");
    if (w > 0.0) return (p.C < w) ? Region::T1m : Region::T1p;
    return (p.C > -w) ? Region::T2m : Region::T2p;
}

// Region the unique jump partner lives in.
inline Region paired_region(Region r) {
    switch (r) {
        case Region::S1m: return Region::S1p;
        case Region::S1p: return Region::S1m;
        case Region::S2m: return Region::S2p;
        case Region::S2p: return Region::S2m;
        case Region::T1m: return Region::T1p;
        case Region::T1p: return Region::T1m;
        case Region::T2m: return Region::T2p;
        case Region::T2p: return Region::T2m;
        case Region::on_critical_line: return Region::on_critical_line;
    }
    return Region::on_critical_line;
}

inline bool is_left_state_region(Region r) {
    return r == Region::S1m || r == Region::S2m || r == Region::T1m || r == Region::T2m;
}

inline bool is_two_shock_region(Region r) {
    return r == Region::S2m || r == Region::S2p || r == Region::T2m || r == Region::T2p;
}

} // namespace vacflow
