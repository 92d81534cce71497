#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "vacflow/ode.hpp"
#include "vacflow/params.hpp"
#include "vacflow/phase_plane.hpp"
#include "vacflow/root_find.hpp"

namespace vacflow {

// ---------------------------------------------------------------------------
// Jump relations in (R, W, M) variables: R = |C|^ell, W = 1+V, M = R W.
// The Rankine-Hugoniot relations become [[M]] = 0 and [[M^2/R + R^gamma/gamma]] = 0.
// ---------------------------------------------------------------------------

struct RWMState {
    double R, W, M;
};

inline RWMState to_rwm(const PhasePoint& p, const Derived& d) {
    const double R = std::pow(std::abs(p.C), d.ell);
    const double W = 1.0 + p.V;
    return {R, W, R * W};
}

enum class ShockFamily { one_shock, two_shock };

inline const char* to_string(ShockFamily f) {
    return f == ShockFamily::one_shock ? "1-shock" : "2-shock";
}

struct ShockPair {
    PhasePoint P_minus; // left state
    PhasePoint P_plus;  // right state
    ShockFamily family = ShockFamily::two_shock;
    std::optional<double> xi_s;
};

// Residuals of the two jump relations in (V,C) variables.
struct RHResidual {
    double r1; // [[ |C|^ell (1+V) ]]
    double r2; // [[ |C|^ell ((1+V)^2 + C^2/gamma) ]]
};

inline RHResidual rh_residual(const PhasePoint& pm, const PhasePoint& pp, const Derived& d,
                              double gamma) {
    const RWMState a = to_rwm(pm, d), b = to_rwm(pp, d);
    const double r1 = b.M - a.M;
    const double r2 = (b.R * (b.W * b.W + pp.C * pp.C / gamma)) -
                      (a.R * (a.W * a.W + pm.C * pm.C / gamma));
    return {r1, r2};
}

// f_m(R) = m^2/R + R^gamma/gamma, decreasing on (0, R*), increasing beyond,
// with R* = |m|^{2/(gamma+1)}.
inline double f_m_eval(double m, double R, double gamma) {
    if (!(R > 0.0)) throw invalid_parameter_error("f_m_eval: R must be positive");
    return m * m / R + std::pow(R, gamma) / gamma;
}

inline double R_star(double m, double gamma) {
    return std::pow(std::abs(m), 2.0 / (gamma + 1.0));
}

// ---------------------------------------------------------------------------
// Unique jump partner
// ---------------------------------------------------------------------------

// Solve f_M(R') = f_M(R) for the root on the opposite side of R*, map back to
// (V,C) with sgn(C) preserved, and assign the family and left/right roles
// from the region table.
inline ShockPair jump_partner(const PhasePoint& p, const Derived& d, double gamma,
                              int sign_xi_over_lambda) {
    const Region reg = region_of(p, sign_xi_over_lambda);
    if (reg == Region::on_critical_line)
        throw sonic_error("jump_partner: sonic input (no distinct partner)", 0.0);

    const RWMState st = to_rwm(p, d);
    const double Rs = R_star(st.M, gamma);
    const double fval = f_m_eval(st.M, st.R, gamma);
    auto g = [&](double R) { return f_m_eval(st.M, R, gamma) - fval; };

    double Rp; // the partner root
    const double xtol = 1e-13;
    if (st.R < Rs) {
        // partner beyond R*: double until sign change
        double hi = std::max(2.0 * Rs, 2.0 * st.R);
        int guard = 0;
        while (g(hi) < 0.0) {
            hi *= 2.0;
            if (++guard > 600) throw bracket_error("jump_partner: no upper bracket");
        }
        Rp = solve_bracketed(g, Rs, hi, xtol * (1.0 + hi));
    } else if (st.R > Rs) {
        // partner below R*: f -> infinity as R -> 0+
        double lo = Rs * 0.5;
        int guard = 0;
        while (g(lo) < 0.0) {
            lo *= 0.5;
            if (++guard > 600) throw bracket_error("jump_partner: no lower bracket");
        }
        Rp = solve_bracketed(g, lo, Rs, xtol * (1.0 + Rs));
    } else {
        throw sonic_error("jump_partner: state exactly sonic (R = R*)", 0.0);
    }

    PhasePoint q;
    q.C = ((p.C >= 0.0) ? +1.0 : -1.0) * std::pow(Rp, 1.0 / d.ell);
    q.W_from:
    q.V = st.M / Rp - 1.0;

    ShockPair pair;
    pair.family = is_two_shock_region(reg) ? ShockFamily::two_shock : ShockFamily::one_shock;
    if (is_left_state_region(reg)) {
        pair.P_minus = p;
        pair.P_plus = q;
    } else {
        pair.P_minus = q;
        pair.P_plus = p;
    }
    return pair;
}

// Entropy conditions in similarity variables for a shock at xi_s.
inline bool admissible(const ShockPair& pair, double lambda, double xi_s) {
    if (xi_s == 0.0) throw invalid_parameter_error("admissible: xi_s must be nonzero");
    const double q = xi_s / lambda;
    const auto& m = pair.P_minus;
    const auto& p = pair.P_plus;
    if (pair.family == ShockFamily::one_shock)
        return q * (m.C - m.V) > q && q > q * (p.C - p.V);
    return -q * (m.C + m.V) > q && q > -q * (p.C + p.V);
}

// ---------------------------------------------------------------------------
// Hugoniot locus of a trajectory
// ---------------------------------------------------------------------------

struct LocusPoint {
    double xi_source; // xi of the source point on the trajectory
    PhasePoint source;
    PhasePoint partner;
};

struct HugoniotLocus {
    std::vector<LocusPoint> points;
    int sign_xi_over_lambda = -1;
    std::vector<TrajPoint> partner_polyline; // partner curve, for crossing scans

    void rebuild_polyline() {
        partner_polyline.clear();
        partner_polyline.reserve(points.size());
        for (const auto& lp : points)
            partner_polyline.push_back({lp.xi_source, lp.partner.V, lp.partner.C});
    }
};

// Pointwise jump partner along a trajectory, carrying each source xi.
// Source points within the sonic tolerance of L+- map to themselves (the
// partner distance vanishes in that limit). Midpoints are inserted (linear
// in the source polyline) until adjacent partner spacing is below mesh_tol.
inline HugoniotLocus hugoniot_locus(const Sys& sys, const Trajectory& traj,
                                    double mesh_tol = 1e-2) {
    HugoniotLocus locus;
    const double lam = sys.par.lambda;
    if (traj.points.empty()) throw invalid_parameter_error("hugoniot_locus: empty trajectory");
    locus.sign_xi_over_lambda = (traj.points.front().xi / lam > 0.0) ? +1 : -1;

    auto partner_of = [&](const TrajPoint& q) -> PhasePoint {
        const PhasePoint p{q.V, q.C};
        if (region_of(p, locus.sign_xi_over_lambda) == Region::on_critical_line)
            return p; // limit partner on the critical lines
        const ShockPair pr = jump_partner(p, sys.d, sys.par.gamma,
                                          locus.sign_xi_over_lambda);
        const bool p_is_left = (pr.P_minus.V == p.V && pr.P_minus.C == p.C);
        return p_is_left ? pr.P_plus : pr.P_minus;
    };

    std::vector<TrajPoint> src(traj.points.begin(), traj.points.end());
    std::vector<PhasePoint> par;
    par.reserve(src.size());
    for (const auto& q : src) par.push_back(partner_of(q));

    // refine where the partner curve is under-resolved
    for (int pass = 0; pass < 12; ++pass) {
        bool refined = false;
        std::vector<TrajPoint> src2;
        std::vector<PhasePoint> par2;
        src2.reserve(src.size() * 2);
        par2.reserve(src.size() * 2);
        for (size_t i = 0; i + 1 < src.size(); ++i) {
            src2.push_back(src[i]);
            par2.push_back(par[i]);
            if (dist(par[i], par[i + 1]) > mesh_tol) {
                TrajPoint mid;
                mid.xi = 0.5 * (src[i].xi + src[i + 1].xi);
                mid.V = 0.5 * (src[i].V + src[i + 1].V);
                mid.C = 0.5 * (src[i].C + src[i + 1].C);
                src2.push_back(mid);
                par2.push_back(partner_of(mid));
                refined = true;
            }
        }
        src2.push_back(src.back());
        par2.push_back(par.back());
        src.swap(src2);
        par.swap(par2);
        if (!refined) break;
    }

    locus.points.reserve(src.size());
    for (size_t i = 0; i < src.size(); ++i)
        locus.points.push_back({src[i].xi, {src[i].V, src[i].C}, par[i]});
    locus.rebuild_polyline();
    return locus;
}

// Limiting slope of the Hugoniot locus when the source trajectory tends to
// infinity with slope k: solves
//   g(w) = (1/k^2) w^{2(ell+1)} - (1/k^2 + 1/gamma) w^{ell+2} + 1/gamma = 0
// for the root w_k != 1 (w_k >< 1 for k^2 >< 1) and returns k w_k^{-1-ell}.
inline double asymptotic_hug_slope(double k, double gamma, double ell) {
    if (k == 0.0) throw invalid_parameter_error("asymptotic_hug_slope: k must be nonzero");
    const double k2 = k * k;
    if (k2 == 1.0) return k;
    auto g = [&](double w) {
        return (1.0 / k2) * std::pow(w, 2.0 * (ell + 1.0)) -
               (1.0 / k2 + 1.0 / gamma) * std::pow(w, ell + 2.0) + 1.0 / gamma;
    };
    const double wbar = std::pow((gamma + k2) / (gamma + 1.0), 1.0 / ell); // global min
    double wk;
    if (k2 < 1.0) {
        wk = solve_bracketed(g, 1e-12, wbar, 1e-14);
    } else {
        double hi = 2.0 * wbar;
        int guard = 0;
        while (g(hi) < 0.0) {
            hi *= 2.0;
            if (++guard > 200) throw bracket_error("asymptotic_hug_slope: no bracket");
        }
        wk = solve_bracketed(g, wbar, hi, 1e-13 * hi);
    }
    return k * std::pow(wk, -1.0 - ell);
}

// ---------------------------------------------------------------------------
// Trajectory / locus intersection
// ---------------------------------------------------------------------------

struct LocusIntersection {
    PhasePoint P_plus;           // on the running trajectory
    PhasePoint P_minus;          // jump partner, on the locus source trajectory
    double xi_s;                 // xi of the running trajectory at the crossing
    double xi_source;            // provisional xi of the locus source point
    std::vector<double> all_crossings_xi; // xi_s of every polyline crossing found
};

namespace detail {

inline bool segments_cross(const PhasePoint& a, const PhasePoint& b, const PhasePoint& c,
                           const PhasePoint& e) {
    auto orient = [](const PhasePoint& p, const PhasePoint& q, const PhasePoint& r) {
        return (q.V - p.V) * (r.C - p.C) - (q.C - p.C) * (r.V - p.V);
    };
    const double o1 = orient(a, b, c), o2 = orient(a, b, e);
    const double o3 = orient(c, e, a), o4 = orient(c, e, b);
    return ((o1 > 0) != (o2 > 0)) && ((o3 > 0) != (o4 > 0));
}

} // namespace detail

// First crossing (in the running trajectory's travel order) between traj and
// the partner polyline of a Hugoniot locus. The crossing is refined by
// bisection on the trajectory's own parameter using exact re-integration, so
// the returned P_plus lies on the trajectory to integrator accuracy; P_minus
// is its exact jump partner.
inline LocusIntersection intersect_locus(const Sys& sys, const Trajectory& traj,
                                         const HugoniotLocus& locus,
                                         const IntegrateOptions& opt,
                                         double trim_near_endpoints = 0.0) {
    if (locus.points.size() < 2)
        throw invalid_parameter_error("intersect_locus: degenerate locus");
    const auto& poly = locus.partner_polyline;
    const int sig = locus.sign_xi_over_lambda;

    // coarse scan over trajectory segments x locus segments
    LocusIntersection out;
    int hit_i = -1;
    size_t hit_j = 0;
    for (size_t i = 0; i + 1 < traj.points.size() && hit_i < 0; ++i) {
        const PhasePoint a{traj.points[i].V, traj.points[i].C};
        const PhasePoint b{traj.points[i + 1].V, traj.points[i + 1].C};
        for (size_t j = 0; j + 1 < poly.size(); ++j) {
            const PhasePoint c{poly[j].V, poly[j].C};
            const PhasePoint e{poly[j + 1].V, poly[j + 1].C};
            if (trim_near_endpoints > 0.0) {
                // skip locus segments inside the trim balls at its endpoints
                const PhasePoint& lo = locus.points.front().partner;
                const PhasePoint& hi = locus.points.back().partner;
                if (dist(c, lo) < trim_near_endpoints && dist(e, lo) < trim_near_endpoints)
                    continue;
                if (dist(c, hi) < trim_near_endpoints && dist(e, hi) < trim_near_endpoints)
                    continue;
            }
            if (detail::segments_cross(a, b, c, e)) {
                if (hit_i < 0) {
                    hit_i = static_cast<int>(i);
                    hit_j = j;
                }
                // record (coarse) xi of every crossing for diagnostics
                out.all_crossings_xi.push_back(traj.points[i].xi);
            }
        }
    }
    if (hit_i < 0)
        throw no_intersection_error("intersect_locus: no crossing found");

    // refine on the trajectory parameter: side of the partner of the exact
    // trajectory point relative to the locus source curve flips at xi_s.
    // Equivalent and simpler: side of the trajectory point relative to the
    // locus partner polyline.
    auto rhs = [&](double, const std::array<double, 2>& y) -> std::array<double, 2> {
        return rhs_log_xi({y[0], y[1]}, sys.d, sys.par.lambda);
    };
    const double sa = s_of(traj.points[hit_i]);
    const double sb = s_of(traj.points[hit_i + 1]);
    const std::array<double, 2> y0{traj.points[hit_i].V, traj.points[hit_i].C};
    auto side_at = [&](double s) {
        const auto y = detail::advance_exact(rhs, y0, sa, s, opt);
        return side_of_polyline({y[0], y[1]}, poly);
    };
    double lo = sa, hi = sb;
    double f_lo = side_at(lo).side;
    std::array<double, 2> y_best{traj.points[hit_i + 1].V, traj.points[hit_i + 1].C};
    double s_best = sb;
    for (int it = 0; it < 90; ++it) {
        const double m = 0.5 * (lo + hi);
        const auto ps = side_at(m);
        if (std::signbit(ps.side) == std::signbit(f_lo)) {
            lo = m;
            f_lo = ps.side;
        } else {
            hi = m;
        }
        s_best = 0.5 * (lo + hi);
        if (std::abs(hi - lo) < 1e-14 * (1.0 + std::abs(hi))) break;
    }
    {
        const auto y = detail::advance_exact(rhs, y0, sa, s_best, opt);
        y_best = y;
    }
    const int xi_sign = traj.points.front().xi > 0.0 ? +1 : -1;
    out.P_plus = {y_best[0], y_best[1]};
    out.xi_s = xi_sign * std::exp(s_best);

    const ShockPair pr = jump_partner(out.P_plus, sys.d, sys.par.gamma, sig);
    const bool plus_is_left =
        (pr.P_minus.V == out.P_plus.V && pr.P_minus.C == out.P_plus.C);
    out.P_minus = plus_is_left ? pr.P_plus : pr.P_minus;

    // provisional xi of the locus source: interpolate by arclength of the
    // partner polyline around the crossing
    size_t jn = hit_j;
    double best_d = std::numeric_limits<double>::infinity();
    for (size_t j = std::max<size_t>(1, hit_j) - 1;
         j < std::min(poly.size(), hit_j + 3); ++j) {
        const double dd = dist(out.P_minus, {poly[j].V, poly[j].C});
        if (dd < best_d) {
            best_d = dd;
            jn = j;
        }
    }
    if (jn + 1 < poly.size()) {
        const PhasePoint c{poly[jn].V, poly[jn].C};
        const PhasePoint e{poly[jn + 1].V, poly[jn + 1].C};
        const double len2 = dist(c, e) * dist(c, e);
        double t = 0.0;
        if (len2 > 0.0)
            t = std::clamp(((out.P_minus.V - c.V) * (e.V - c.V) +
                            (out.P_minus.C - c.C) * (e.C - c.C)) /
                               len2,
                           0.0, 1.0);
        // xi interpolated geometrically in log scale (xi of one sign)
        const double la = std::log(std::abs(locus.points[jn].xi_source));
        const double lb = std::log(std::abs(locus.points[jn + 1].xi_source));
        const int ssign = locus.points[jn].xi_source > 0.0 ? +1 : -1;
        out.xi_source = ssign * std::exp(la + t * (lb - la));
    } else {
        out.xi_source = locus.points[jn].xi_source;
    }
    return out;
}

} // namespace vacflow
