#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "vacflow/params.hpp"
#include "vacflow/phase_plane.hpp"

namespace vacflow {

enum class CritId { P0, P1, P2, P3, P4, P5, P6 };

inline const char* to_string(CritId id) {
    switch (id) {
        case CritId::P0: return "P0";
        case CritId::P1: return "P1";
        case CritId::P2: return "P2";
        case CritId::P3: return "P3";
        case CritId::P4: return "P4";
        case CritId::P5: return "P5";
        case CritId::P6: return "P6";
    }
    return "?";
}

enum class CritKind { star, saddle, node, degenerate_node, triple_node, triple_saddle };

inline const char* to_string(CritKind k) {
    switch (k) {
        case CritKind::star: return "star";
        case CritKind::saddle: return "saddle";
        case CritKind::node: return "node";
        case CritKind::degenerate_node: return "degenerate_node";
        case CritKind::triple_node: return "triple_node";
        case CritKind::triple_saddle: return "triple_saddle";
    }
    return "?";
}

// How xi behaves when a solution of the full similarity system reaches the
// point: tends to 0, to +-infinity, to a finite nonzero value, or the point
// is not an endpoint of the flows under consideration.
enum class XiLimit { zero, infinity, finite, not_applicable };

inline const char* to_string(XiLimit x) {
    switch (x) {
        case XiLimit::zero: return "zero";
        case XiLimit::infinity: return "infinity";
        case XiLimit::finite: return "finite";
        case XiLimit::not_applicable: return "n/a";
    }
    return "?";
}

struct CriticalPoint {
    CritId id;
    PhasePoint location;
    CritKind kind;
    std::optional<double> primary_slope;   // generic approach direction (nodes)
    std::optional<double> secondary_slope; // exceptional direction / 2nd separatrix
    XiLimit xi_limit;
};

// Locations -----------------------------------------------------------------

inline PhasePoint location_P0() { return {0.0, 0.0}; }
inline PhasePoint location_P1() { return {-1.0, 0.0}; }
inline PhasePoint location_P2(double lambda) { return {-lambda, 0.0}; }

// P3 = (-lambda ell/(ell+1), |lambda|/(ell+1)), P4 its mirror image.
inline PhasePoint location_P3(const Derived& d, double lambda) {
    return {-lambda * d.ell / (d.ell + 1.0), std::abs(lambda) / (d.ell + 1.0)};
}
inline PhasePoint location_P4(const Derived& d, double lambda) {
    PhasePoint p = location_P3(d, lambda);
    p.C = -p.C;
    return p;
}

// P5 = (ell/(1-ell), 1/|ell-1|), P6 its mirror image; absent when gamma == 3.
inline PhasePoint location_P5(const Derived& d) {
    return {d.ell / (1.0 - d.ell), 1.0 / std::abs(d.ell - 1.0)};
}
inline PhasePoint location_P6(const Derived& d) {
    PhasePoint p = location_P5(d);
    p.C = -p.C;
    return p;
}

// g(V) = V(1+V)(lambda+V)/(V - V*); C^2 = g(V) along G = 0.
inline double g_of_V(double V, const Derived& d, double lambda) {
    return V * (1.0 + V) * (lambda + V) / (V - d.V_star);
}

// Classification ------------------------------------------------------------

struct P1Classification {
    double sigma1; // separatrices tangent to C^2 = sigma1 (1+V), V < -1
    CritKind kind; // always saddle
};

inline P1Classification classify_P1(const Params& p) {
    const double num = p.gamma * (p.gamma - 1.0) * (1.0 - p.lambda);
    const double den = (p.gamma - 1.0) + 2.0 * (1.0 - p.lambda);
    return {-num / den, CritKind::saddle};
}

struct P2Classification {
    double A; // C ~ |xi|^A near P2, A = lambda/(ell (1-lambda))
    CritKind kind;
    bool vacuum_branch_relevant; // false when lambda < 0 (A < 0)
};

inline P2Classification classify_P2(const Params& p, const Derived& d) {
    P2Classification r;
    r.A = p.lambda / (d.ell * (1.0 - p.lambda));
    r.kind = gamma_is_three(p.gamma) ? CritKind::star : CritKind::node;
    r.vacuum_branch_relevant = p.lambda > 0.0;
    return r;
}

// Wronskian of the linearization at P3 (same value at P4):
//   W = ell C^2 (lambda-1) [ (gamma-3) lambda + (gamma+1) ].
// Negative W means saddle.
inline double wronskian_P3(const Params& p, const Derived& d) {
    const PhasePoint q = location_P3(d, p.lambda);
    return d.ell * q.C * q.C * (p.lambda - 1.0) *
           ((p.gamma - 3.0) * p.lambda + (p.gamma + 1.0));
}

// Cone membership of P3, P4: inside K iff (lambda-1)[(gamma-3)lambda+(gamma+1)] < 0.
inline bool P3_in_cone(const Params& p) {
    return (p.lambda - 1.0) * ((p.gamma - 3.0) * p.lambda + (p.gamma + 1.0)) < 0.0;
}

struct TripleClassification {
    double L1;   // primary slope
    double L2;   // secondary slope
    double W;    // Wronskian F_C G_V - F_V G_C
    double R2;   // discriminant (F_C + G_V)^2 - 4 W
    bool degenerate; // R2 ~ 0: both slopes collapse to -1/ell
    CritKind kind;
};

// Slopes of the invariant directions at a triple point (P5 or P6). The
// directions c = L v solve G_C L^2 + (G_V - F_C) L - F_V = 0; the primary
// direction belongs to the eigenvalue of smaller magnitude.
inline TripleClassification classify_triple(const Params& p, const Derived& d, CritId which) {
    if (gamma_is_three(p.gamma))
        throw invalid_parameter_error("classify_triple: P5/P6 absent at gamma = 3");
    if (which != CritId::P5 && which != CritId::P6)
        throw invalid_parameter_error("classify_triple: expects P5 or P6");

    const PhasePoint q = (which == CritId::P5) ? location_P5(d) : location_P6(d);
    const Jacobian j = eval_jacobian(q, d, p.lambda);

    TripleClassification r;
    r.W = j.F_C * j.G_V - j.F_V * j.G_C;
    const double trace = j.F_C + j.G_V;
    r.R2 = trace * trace - 4.0 * r.W;

    const double scale = j.F_C * j.F_C + j.F_V * j.F_V + j.G_C * j.G_C + j.G_V * j.G_V;
    r.degenerate = r.R2 < kZeroBand * scale;
    if (r.degenerate) {
        const double L = (0.5 * trace - j.G_V) / j.G_C; // equals -1/ell
        r.L1 = r.L2 = L;
        r.kind = CritKind::degenerate_node;
        return r;
    }
    if (r.R2 < 0.0) throw numerical_error("classify_triple: negative discriminant (focus?)");

    const double R = std::sqrt(r.R2);
    const double mu_plus = 0.5 * (trace + R);
    const double mu_minus = 0.5 * (trace - R);
    double mu1 = mu_plus, mu2 = mu_minus;
    if (std::abs(mu_minus) < std::abs(mu_plus)) std::swap(mu1, mu2);
    r.L1 = (mu1 - j.G_V) / j.G_C;
    r.L2 = (mu2 - j.G_V) / j.G_C;
    r.kind = (r.W > 0.0) ? CritKind::triple_node : CritKind::triple_saddle;
    return r;
}

// Full table of critical points: 5 when gamma == 3, otherwise 7.
inline std::vector<CriticalPoint> critical_points(const Params& par) {
    const Derived d = derive(par);
    const double lam = par.lambda;
    std::vector<CriticalPoint> out;

    out.push_back({CritId::P0, location_P0(), CritKind::star, std::nullopt, std::nullopt,
                   lam > 0.0 ? XiLimit::infinity : XiLimit::zero});

    const auto p1 = classify_P1(par);
    out.push_back({CritId::P1, location_P1(), p1.kind, p1.sigma1, 0.0, XiLimit::finite});

    const auto p2 = classify_P2(par, d);
    // For 1 < gamma < 3 the generic approach to P2 is along the V-axis; the
    // vertical direction is exceptional (and vice versa for gamma > 3).
    std::optional<double> p2_primary, p2_secondary;
    if (!gamma_is_three(par.gamma)) {
        if (par.gamma < 3.0) p2_primary = 0.0;
        else p2_secondary = 0.0;
    }
    out.push_back({CritId::P2, location_P2(lam), p2.kind, p2_primary, p2_secondary,
                   lam > 0.0 ? XiLimit::zero : XiLimit::infinity});

    // P3 / P4: one separatrix along the E line through the point; the other
    // from the second invariant direction of the linearization.
    {
        const PhasePoint q3 = location_P3(d, lam);
        const double e_slope3 = (lam > 0.0) ? -1.0 / d.ell : 1.0 / d.ell; // P3 on E-+ for lam >< 0
        const double W3 = wronskian_P3(par, d);
        const Jacobian j = eval_jacobian(q3, d, lam);
        const double trace = j.F_C + j.G_V;
        const double R2 = trace * trace - 4.0 * W3;
        std::optional<double> other;
        if (R2 > 0.0) {
            const double R = std::sqrt(R2);
            const double La = (0.5 * (trace + R) - j.G_V) / j.G_C;
            const double Lb = (0.5 * (trace - R) - j.G_V) / j.G_C;
            other = (std::abs(La - e_slope3) > std::abs(Lb - e_slope3)) ? La : Lb;
        }
        const double scale = j.F_C * j.F_C + j.F_V * j.F_V + j.G_C * j.G_C + j.G_V * j.G_V;
        CritKind kind3 = (W3 < -kZeroBand * scale) ? CritKind::saddle
                       : (W3 > kZeroBand * scale) ? CritKind::node
                                                  : CritKind::degenerate_node;
        out.push_back({CritId::P3, q3, kind3, e_slope3, other,
                       lam < 0.0 ? XiLimit::infinity : XiLimit::not_applicable});
        CriticalPoint p4{CritId::P4, location_P4(d, lam), kind3, -e_slope3,
                         other ? std::optional<double>(-*other) : std::nullopt,
                         lam > 0.0 ? XiLimit::zero : XiLimit::not_applicable};
        out.push_back(p4);
    }

    if (!gamma_is_three(par.gamma)) {
        const auto t5 = classify_triple(par, d, CritId::P5);
        out.push_back({CritId::P5, location_P5(d), t5.kind, t5.L1, t5.L2, XiLimit::finite});
        const auto t6 = classify_triple(par, d, CritId::P6);
        out.push_back({CritId::P6, location_P6(d), t6.kind, t6.L1, t6.L2, XiLimit::finite});
    }
    return out;
}

inline const CriticalPoint* find_point(const std::vector<CriticalPoint>& pts, CritId id) {
    for (const auto& p : pts)
        if (p.id == id) return &p;
    return nullptr;
}

} // namespace vacflow
