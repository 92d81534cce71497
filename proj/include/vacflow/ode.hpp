#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vacflow/critical_points.hpp"
#include "vacflow/errors.hpp"
#include "vacflow/io.hpp"
#include "vacflow/params.hpp"
#include "vacflow/phase_plane.hpp"

namespace vacflow {

// ---------------------------------------------------------------------------
// Trajectories of the similarity ODE system, integrated in s = ln|xi|.
// In s the system is autonomous: dV/ds = G/D, dC/ds = F/D, and xi = sgn e^s.
// ---------------------------------------------------------------------------

enum class Orientation { xi_decreasing, xi_increasing };

enum class AnchorKind { origin, infinity, critical_point, critical_line_hit, jump };

struct Anchor {
    AnchorKind kind = AnchorKind::origin;
    std::optional<CritId> cp;    // for critical_point
    std::optional<double> slope; // for infinity
};

struct TrajPoint {
    double xi, V, C;
};

struct Trajectory {
    std::vector<TrajPoint> points; // xi strictly monotone per orientation
    Orientation orientation = Orientation::xi_decreasing;
    Anchor start_anchor, end_anchor;
    std::optional<double> slope_at_infinity; // asymptotic slope k
    std::optional<double> K_V, K_C;          // V ~ K_V/xi, C ~ K_C/xi tail coefficients
    std::string label;

    const TrajPoint& front() const { return points.front(); }
    const TrajPoint& back() const { return points.back(); }
    PhasePoint front_point() const { return {points.front().V, points.front().C}; }
    PhasePoint back_point() const { return {points.back().V, points.back().C}; }

    int xi_sign() const { return (points.front().xi > 0.0) ? +1 : -1; }

    // +1 when travel goes toward increasing s = ln|xi|.
    int s_direction() const {
        const int orient = (orientation == Orientation::xi_increasing) ? +1 : -1;
        return orient * xi_sign();
    }

    // Rescaling xi -> sigma * xi maps solutions to solutions.
    void rescale_xi(double sigma) {
        for (auto& q : points) q.xi *= sigma;
    }
};

inline double s_of(const TrajPoint& q) { return std::log(std::abs(q.xi)); }

// ---------------------------------------------------------------------------
// Right-hand sides
// ---------------------------------------------------------------------------

// dV/ds, dC/ds with s = ln|xi| (the 1/xi factor absorbed).
inline std::array<double, 2> rhs_log_xi(const PhasePoint& p, const Derived& d, double lambda) {
    const FGD f = eval_FGD(p, d, lambda);
    const double scale = 1.0 + (1.0 + p.V) * (1.0 + p.V) + p.C * p.C;
    if (std::abs(f.D) < 1e-14 * scale)
        throw sonic_error("rhs_log_xi: sonic denominator vanished", 0.0);
    return {f.G / f.D, f.F / f.D};
}

// Reduced slope dC/dV = F/G; division by zero marks a vertical tangent.
inline double rhs_reduced(const PhasePoint& p, const Derived& d, double lambda) {
    const double G = eval_G(p, d, lambda);
    if (G == 0.0) throw numerical_error("rhs_reduced: vertical tangent (G = 0)");
    return eval_F(p, d) / G;
}

// Reduced ODE in inverted coordinates W = 1/V, Z = 1/C:
//   dZ/dW = [Z (Z^2 - W^2) + A] / [W (Z^2 - W^2) + B],
//   A = W Z^3 (2 - k1 + lambda W),
//   B = W^2 (V* W^2 + Z^2 (1 + lambda + lambda W)).
inline double rhs_inverted(double W, double Z, const Derived& d, double lambda) {
    const double q = Z * Z - W * W;
    const double r2 = W * W + Z * Z;
    if (r2 == 0.0) throw numerical_error("rhs_inverted: (W,Z) = 0");
    if (std::abs(q) < 1e-8 * r2)
        throw numerical_error("rhs_inverted: singular direction Z^2 = W^2");
    const double A = W * Z * Z * Z * (2.0 - d.k1 + lambda * W);
    const double B = W * W * (d.V_star * W * W + Z * Z * (1.0 + lambda + lambda * W));
    return (Z * q + A) / (W * q + B);
}

// d(ln|xi|)/dW = 1/W + hop_log_xi_rate(W,Z): the 1/W part is handled
// analytically across W = 0, the remainder is regular there.
inline double hop_log_xi_rate(double W, double Z, const Derived& d, double lambda) {
    const double M = W * W * (1.0 - d.V_star * W) - Z * Z * (W + 1.0) * (lambda * W + 1.0);
    if (M == 0.0) throw numerical_error("hop_log_xi_rate: degenerate direction");
    return -((1.0 - lambda) * (W + 1.0) * Z * Z - d.V_star * W * W) / M;
}

// ---------------------------------------------------------------------------
// Events
// ---------------------------------------------------------------------------

struct EventSpec {
    enum class Kind {
        hit_critical_line,
        hit_V_axis,
        radius_exceeds,
        near_critical_point,
        xi_reaches,
        crosses_curve,
    };
    Kind kind = Kind::radius_exceeds;
    double radius = 0.0;
    CritId cp = CritId::P0;
    PhasePoint cp_loc{};
    double delta = 0.0;
    double xi_value = 0.0;
    const std::vector<TrajPoint>* curve = nullptr;

    static EventSpec HitCriticalLine() { return {Kind::hit_critical_line}; }
    static EventSpec HitVAxis() { return {Kind::hit_V_axis}; }
    static EventSpec RadiusExceeds(double R) {
        EventSpec e{Kind::radius_exceeds};
        e.radius = R;
        return e;
    }
    static EventSpec NearCriticalPoint(CritId id, PhasePoint loc, double delta) {
        EventSpec e{Kind::near_critical_point};
        e.cp = id;
        e.cp_loc = loc;
        e.delta = delta;
        return e;
    }
    static EventSpec XiReaches(double xi) {
        EventSpec e{Kind::xi_reaches};
        e.xi_value = xi;
        return e;
    }
    static EventSpec CrossesCurve(const std::vector<TrajPoint>* poly) {
        EventSpec e{Kind::crosses_curve};
        e.curve = poly;
        return e;
    }
};

// Signed side of p relative to a polyline; dist is to the nearest segment and
// at_end flags a projection clamped at the very ends (where the side value
// is not a crossing witness).
struct PolySide {
    double side;
    double dist;
    bool at_end;
};

inline PolySide side_of_polyline(const PhasePoint& p, const std::vector<TrajPoint>& poly) {
    double best_d2 = std::numeric_limits<double>::infinity();
    double side = 0.0;
    bool at_end = false;
    for (size_t i = 0; i + 1 < poly.size(); ++i) {
        const double ax = poly[i].V, ay = poly[i].C;
        const double bx = poly[i + 1].V, by = poly[i + 1].C;
        const double dx = bx - ax, dy = by - ay;
        const double len2 = dx * dx + dy * dy;
        if (len2 == 0.0) continue;
        double t = ((p.V - ax) * dx + (p.C - ay) * dy) / len2;
        const bool clamp_lo = (t < 0.0 && i == 0);
        const bool clamp_hi = (t > 1.0 && i + 2 == poly.size());
        t = std::clamp(t, 0.0, 1.0);
        const double qx = ax + t * dx, qy = ay + t * dy;
        const double d2 = (p.V - qx) * (p.V - qx) + (p.C - qy) * (p.C - qy);
        if (d2 < best_d2) {
            best_d2 = d2;
            side = dx * (p.C - ay) - dy * (p.V - ax);
            at_end = clamp_lo || clamp_hi;
        }
    }
    return {side, std::sqrt(best_d2), at_end};
}

struct IntegrateOptions {
    double rel_tol = 1e-10;
    double abs_tol = 1e-12;
    double h_init = 1e-4;
    double h_min = 5e-15;
    double h_max = 0.2;
    long max_steps = 10000000;
    double sonic_eps = 1e-8;      // terminal |D| threshold (times local scale)
    double launch_radius = 1e-6;  // seed distance from the origin star point
    double triple_delta = 1e-5;   // pass-through radius at P5 / P6
    double endpoint_delta = 1e-8; // arrival distance at P1..P4
    double event_tol = 1e-10;
    double inf_radius = 1e6;      // where trajectories hop through infinity
    double singular_slope_tol = 1e-4;
};

struct OdeSeed {
    double xi;
    PhasePoint p;
    Orientation orient;
};

namespace detail {

template <class RHS>
struct DP5Work {
    std::array<double, 2> k1{}, k2{}, k3{}, k4{}, k5{}, k6{}, k7{};
};

// One Dormand-Prince 5(4) stage evaluation; fills the low-order solution for
// the error estimate and returns the 5th order result.
template <class RHS>
inline std::array<double, 2> dp5_step(const RHS& f, const std::array<double, 2>& y, double t,
                                      double h, DP5Work<RHS>& w, bool have_k1,
                                      std::array<double, 2>& y_low) {
    auto axpy = [](const std::array<double, 2>& base, double hh,
                   std::initializer_list<std::pair<double, const std::array<double, 2>*>>
                       terms) {
        std::array<double, 2> r = base;
        for (auto& [c, k] : terms) {
            r[0] += hh * c * (*k)[0];
            r[1] += hh * c * (*k)[1];
        }
        return r;
    };
    if (!have_k1) w.k1 = f(t, y);
    w.k2 = f(t + h / 5.0, axpy(y, h, {{1.0 / 5.0, &w.k1}}));
    w.k3 = f(t + 3.0 * h / 10.0, axpy(y, h, {{3.0 / 40.0, &w.k1}, {9.0 / 40.0, &w.k2}}));
    w.k4 = f(t + 4.0 * h / 5.0,
             axpy(y, h, {{44.0 / 45.0, &w.k1}, {-56.0 / 15.0, &w.k2}, {32.0 / 9.0, &w.k3}}));
    w.k5 = f(t + 8.0 * h / 9.0,
             axpy(y, h,
                  {{19372.0 / 6561.0, &w.k1},
                   {-25360.0 / 2187.0, &w.k2},
                   {64448.0 / 6561.0, &w.k3},
                   {-212.0 / 729.0, &w.k4}}));
    w.k6 = f(t + h, axpy(y, h,
                         {{9017.0 / 3168.0, &w.k1},
                          {-355.0 / 33.0, &w.k2},
                          {46732.0 / 5247.0, &w.k3},
                          {49.0 / 176.0, &w.k4},
                          {-5103.0 / 18656.0, &w.k5}}));
    std::array<double, 2> y5 = axpy(y, h,
                                    {{35.0 / 384.0, &w.k1},
                                     {500.0 / 1113.0, &w.k3},
                                     {125.0 / 192.0, &w.k4},
                                     {-2187.0 / 6784.0, &w.k5},
                                     {11.0 / 84.0, &w.k6}});
    w.k7 = f(t + h, y5);
    y_low = axpy(y, h,
                 {{5179.0 / 57600.0, &w.k1},
                  {7571.0 / 16695.0, &w.k3},
                  {393.0 / 640.0, &w.k4},
                  {-92097.0 / 339200.0, &w.k5},
                  {187.0 / 2100.0, &w.k6},
                  {1.0 / 40.0, &w.k7}});
    return y5;
}

// Adaptive integration from t0 to exactly t1, no events, either direction.
template <class RHS>
inline std::array<double, 2> advance_exact(const RHS& f, std::array<double, 2> y, double t0,
                                           double t1, const IntegrateOptions& opt) {
    if (t0 == t1) return y;
    const double dir = (t1 > t0) ? 1.0 : -1.0;
    double t = t0;
    double h = dir * std::min({opt.h_max, std::abs(t1 - t0), std::max(opt.h_init, 1e-6)});
    DP5Work<RHS> w;
    bool have_k1 = false;
    for (long n = 0; n < opt.max_steps; ++n) {
        if ((t1 - t) * dir <= 0.0) return y;
        if (std::abs(h) > std::abs(t1 - t)) {
            h = t1 - t;
        }
        std::array<double, 2> y_low;
        std::array<double, 2> y_new = dp5_step(f, y, t, h, w, have_k1, y_low);
        double err = 0.0;
        for (int i = 0; i < 2; ++i) {
            const double sc =
                opt.abs_tol + opt.rel_tol * std::max(std::abs(y[i]), std::abs(y_new[i]));
            const double e = (y_new[i] - y_low[i]) / sc;
            err += e * e;
        }
        err = std::sqrt(0.5 * err);
        if (std::isfinite(err) && err <= 1.0) {
            t += h;
            y = y_new;
            w.k1 = w.k7;
            have_k1 = true;
            if ((t1 - t) * dir <= 0.0) return y;
        } else {
            have_k1 = true; // k1 = f(t,y) still valid after a rejection
            if (!std::isfinite(err)) err = 1e8;
        }
        h *= std::clamp(0.9 * std::pow(std::max(err, 1e-10), -0.2), 0.2, 5.0);
        if (std::abs(h) > opt.h_max) h = opt.h_max * dir;
        if (std::abs(h) < opt.h_min)
            throw numerical_error("advance_exact: step size collapsed");
    }
    throw numerical_error("advance_exact: max steps exceeded");
}

} // namespace detail

// ---------------------------------------------------------------------------
// Event-aware integration of the similarity system
// ---------------------------------------------------------------------------

struct IntegrateOutcome {
    Trajectory traj;
    int event_index = -1; // which EventSpec ended the leg
};

namespace detail {

inline double event_value(const EventSpec& e, const PhasePoint& p, double s,
                          const IntegrateOptions& opt) {
    switch (e.kind) {
        case EventSpec::Kind::hit_critical_line: {
            const double scale = 1.0 + (1.0 + p.V) * (1.0 + p.V) + p.C * p.C;
            return std::abs(eval_D(p)) - opt.sonic_eps * scale;
        }
        case EventSpec::Kind::hit_V_axis:
            return p.C;
        case EventSpec::Kind::radius_exceeds:
            return radius2(p) - e.radius * e.radius;
        case EventSpec::Kind::near_critical_point:
            return dist(p, e.cp_loc) - e.delta;
        case EventSpec::Kind::xi_reaches:
            return s - std::log(std::abs(e.xi_value));
        case EventSpec::Kind::crosses_curve:
            return side_of_polyline(p, *e.curve).side;
    }
    return 0.0;
}

} // namespace detail

// Integrate from a seed until the first registered event triggers. Every
// accepted step is stored. Event locations are refined by bisection with
// sub-integration from the last node (no interpolation error). Running into a
// sonic line without a hit_critical_line event registered raises sonic_error;
// with one registered it ends the leg cleanly.
inline IntegrateOutcome integrate(const Sys& sys, const OdeSeed& seed,
                                  std::span<const EventSpec> events,
                                  const IntegrateOptions& opt) {
    if (seed.xi == 0.0) throw invalid_parameter_error("integrate: seed xi must be nonzero");
    const int xi_sign = seed.xi > 0.0 ? +1 : -1;
    const int dir_s = ((seed.orient == Orientation::xi_increasing) ? +1 : -1) * xi_sign;
    const double lambda = sys.par.lambda;

    auto rhs = [&](double, const std::array<double, 2>& y) -> std::array<double, 2> {
        return rhs_log_xi({y[0], y[1]}, sys.d, lambda);
    };

    IntegrateOutcome out;
    Trajectory& traj = out.traj;
    traj.orientation = seed.orient;

    double s = std::log(std::abs(seed.xi));
    std::array<double, 2> y{seed.p.V, seed.p.C};
    auto push = [&](double ss, const std::array<double, 2>& yy) {
        const double xi = xi_sign * std::exp(ss);
        if ((xi / lambda) * yy[1] > 1e-12 * (1.0 + yy[1] * yy[1]))
            throw numerical_error("integrate: sign convention (xi/lambda) C <= 0 violated");
        traj.points.push_back({xi, yy[0], yy[1]});
    };
    push(s, y);

    std::vector<double> f_prev(events.size()), f_new(events.size());
    const bool sonic_registered = [&] {
        for (const auto& e : events)
            if (e.kind == EventSpec::Kind::hit_critical_line) return true;
        return false;
    }();
    for (size_t i = 0; i < events.size(); ++i)
        f_prev[i] = detail::event_value(events[i], {y[0], y[1]}, s, opt);

    double h = opt.h_init * dir_s;
    detail::DP5Work<decltype(rhs)> w;
    bool have_k1 = false;

    auto sonic_scale = [](const PhasePoint& p) {
        return 1.0 + (1.0 + p.V) * (1.0 + p.V) + p.C * p.C;
    };

    for (long n = 0; n < opt.max_steps; ++n) {
        std::array<double, 2> y_low{}, y_new{};
        bool step_ok = true;
        double err = 0.0;
        try {
            y_new = detail::dp5_step(rhs, y, s, h, w, have_k1, y_low);
            for (int i = 0; i < 2; ++i) {
                const double sc =
                    opt.abs_tol + opt.rel_tol * std::max(std::abs(y[i]), std::abs(y_new[i]));
                const double e = (y_new[i] - y_low[i]) / sc;
                err += e * e;
            }
            err = std::sqrt(0.5 * err);
            if (!std::isfinite(err)) step_ok = false;
        } catch (const sonic_error&) {
            step_ok = false;
        }

        if (step_ok && err <= 1.0) {
            // Do not fly through a registered critical-point ball within a
            // single step: cap the phase-space step length near the target.
            bool capped = false;
            for (const auto& e : events) {
                if (e.kind != EventSpec::Kind::near_critical_point) continue;
                const double step_len = std::hypot(y_new[0] - y[0], y_new[1] - y[1]);
                const double d_new = dist({y_new[0], y_new[1]}, e.cp_loc);
                const double d_old = dist({y[0], y[1]}, e.cp_loc);
                if (step_len > 0.5 * std::max(std::min(d_new, d_old), 0.25 * e.delta)) {
                    capped = true;
                    break;
                }
            }
            if (capped) {
                h *= 0.3;
                if (std::abs(h) < opt.h_min)
                    throw numerical_error("integrate: step collapsed near critical point");
                continue;
            }
            const double s_new = s + h;
            const PhasePoint p_new{y_new[0], y_new[1]};
            for (size_t i = 0; i < events.size(); ++i)
                f_new[i] = detail::event_value(events[i], p_new, s_new, opt);

            int best = -1;
            double best_s = s_new;
            std::array<double, 2> best_y = y_new;
            for (size_t i = 0; i < events.size(); ++i) {
                const bool crossed = (f_prev[i] > 0.0 && f_new[i] <= 0.0) ||
                                     (f_prev[i] < 0.0 && f_new[i] >= 0.0);
                if (!crossed) continue;
                double a = s, b = s_new;
                double fa = f_prev[i];
                std::array<double, 2> yb = y_new;
                for (int it = 0; it < 80; ++it) {
                    const double m = 0.5 * (a + b);
                    std::array<double, 2> ym;
                    try {
                        ym = detail::advance_exact(rhs, y, s, m, opt);
                    } catch (const numerical_error&) {
                        break;
                    }
                    const double fm = detail::event_value(events[i], {ym[0], ym[1]}, m, opt);
                    if ((fa > 0.0 && fm <= 0.0) || (fa < 0.0 && fm >= 0.0)) {
                        b = m;
                        yb = ym;
                    } else {
                        a = m;
                        fa = fm;
                    }
                    if (std::abs(b - a) < 1e-13 * (1.0 + std::abs(b)) ||
                        std::abs(fm) < opt.event_tol)
                        break;
                }
                if (events[i].kind == EventSpec::Kind::crosses_curve) {
                    const auto ps = side_of_polyline({yb[0], yb[1]}, *events[i].curve);
                    const double step_len = std::hypot(y_new[0] - y[0], y_new[1] - y[1]);
                    if (ps.at_end || ps.dist > 10.0 * step_len + 1e-6) continue;
                }
                if (best < 0 || (b - s) * dir_s < (best_s - s) * dir_s) {
                    best = static_cast<int>(i);
                    best_s = b;
                    best_y = yb;
                }
            }
            if (best >= 0) {
                push(best_s, best_y);
                out.event_index = best;
                if (events[best].kind == EventSpec::Kind::near_critical_point)
                    traj.end_anchor = {AnchorKind::critical_point, events[best].cp,
                                       std::nullopt};
                else if (events[best].kind == EventSpec::Kind::hit_critical_line)
                    traj.end_anchor = {AnchorKind::critical_line_hit, std::nullopt,
                                       std::nullopt};
                return out;
            }

            s = s_new;
            y = y_new;
            push(s, y);
            f_prev.swap(f_new);
            w.k1 = w.k7;
            have_k1 = true;
            h *= std::clamp(0.9 * std::pow(std::max(err, 1e-10), -0.2), 0.2, 5.0);
            if (std::abs(h) > opt.h_max) h = opt.h_max * dir_s;
        } else {
            have_k1 = have_k1 && step_ok;
            h *= step_ok ? std::clamp(0.9 * std::pow(err, -0.2), 0.2, 1.0) : 0.25;
            if (std::abs(h) < opt.h_min) {
                const PhasePoint p{y[0], y[1]};
                const double D = eval_D(p);
                if (std::abs(D) < 1e-4 * sonic_scale(p)) {
                    // extrapolate the hit: (D^2)' = 2 g with g = D dD/ds
                    const FGD f = eval_FGD(p, sys.d, lambda);
                    const double g = 2.0 * (1.0 + p.V) * f.G - 2.0 * p.C * f.F;
                    const double ds_hit = (g != 0.0) ? -D * D / (2.0 * g) : 0.0;
                    const double s_hit = s + ds_hit;
                    const double xi_hit = xi_sign * std::exp(s_hit);
                    if (sonic_registered) {
                        if (ds_hit != 0.0) {
                            const std::array<double, 2> y_hit{y[0] + (f.G / f.D) * ds_hit,
                                                              y[1] + (f.F / f.D) * ds_hit};
                            push(s_hit, y_hit);
                        }
                        for (size_t i = 0; i < events.size(); ++i)
                            if (events[i].kind == EventSpec::Kind::hit_critical_line)
                                out.event_index = static_cast<int>(i);
                        traj.end_anchor = {AnchorKind::critical_line_hit, std::nullopt,
                                           std::nullopt};
                        return out;
                    }
                    throw sonic_error("integrate: trajectory ran into a critical line",
                                      xi_hit);
                }
                throw numerical_error("integrate: step size collapsed away from sonic line");
            }
        }
    }
    throw numerical_error("integrate: max step count exceeded");
}

// Exact state on a stored leg at a given s: re-integrates from the nearest
// stored node on the travel side (no interpolation error).
inline PhasePoint state_at_s(const Sys& sys, const Trajectory& traj, double s_target,
                             const IntegrateOptions& opt) {
    const int dir = traj.s_direction();
    const auto& pts = traj.points;
    if (pts.empty()) throw numerical_error("state_at_s: empty trajectory");
    size_t idx = 0;
    bool found = false;
    for (size_t i = 0; i < pts.size(); ++i) {
        if (pts[i].xi == 0.0) break;
        if ((s_of(pts[i]) - s_target) * dir <= 1e-14 * (1.0 + std::abs(s_target))) {
            idx = i;
            found = true;
        } else
            break;
    }
    if (!found) throw numerical_error("state_at_s: target before leg start");
    auto rhs = [&](double, const std::array<double, 2>& y) -> std::array<double, 2> {
        return rhs_log_xi({y[0], y[1]}, sys.d, sys.par.lambda);
    };
    std::array<double, 2> y{pts[idx].V, pts[idx].C};
    y = detail::advance_exact(rhs, y, s_of(pts[idx]), s_target, opt);
    return {y[0], y[1]};
}

// Exact state and xi where a leg crosses the given radius.
struct RadiusSample {
    double xi;
    PhasePoint p;
};

inline RadiusSample state_at_radius(const Sys& sys, const Trajectory& traj, double r,
                                    const IntegrateOptions& opt) {
    const auto& pts = traj.points;
    const double r2 = r * r;
    // legs that begin or end exactly at the sampling radius
    for (const TrajPoint* q : {&pts.front(), &pts.back()}) {
        if (q->xi != 0.0 && std::abs(std::hypot(q->V, q->C) - r) < 1e-6 * r)
            return {q->xi, {q->V, q->C}};
    }
    size_t ib = pts.size();
    for (size_t i = 1; i < pts.size(); ++i) {
        if (pts[i].xi == 0.0) break;
        const double ra = radius2({pts[i - 1].V, pts[i - 1].C});
        const double rb = radius2({pts[i].V, pts[i].C});
        if ((ra - r2) * (rb - r2) <= 0.0) {
            ib = i;
            break;
        }
    }
    if (ib == pts.size()) throw numerical_error("state_at_radius: radius not crossed");

    auto rhs = [&](double, const std::array<double, 2>& y) -> std::array<double, 2> {
        return rhs_log_xi({y[0], y[1]}, sys.d, sys.par.lambda);
    };
    const double sa = s_of(pts[ib - 1]), sb = s_of(pts[ib]);
    const std::array<double, 2> y0{pts[ib - 1].V, pts[ib - 1].C};
    double lo = sa, hi = sb;
    double f_lo = radius2({y0[0], y0[1]}) - r2;
    std::array<double, 2> y_best{pts[ib].V, pts[ib].C};
    double s_best = sb;
    for (int it = 0; it < 80; ++it) {
        const double m = 0.5 * (lo + hi);
        const std::array<double, 2> ym = detail::advance_exact(rhs, y0, sa, m, opt);
        const double fm = radius2({ym[0], ym[1]}) - r2;
        if (std::signbit(fm) == std::signbit(f_lo)) {
            lo = m;
            f_lo = fm;
        } else {
            hi = m;
            y_best = ym;
            s_best = m;
        }
        if (std::abs(hi - lo) < 1e-13 * (1.0 + std::abs(hi))) break;
        if (std::abs(fm) < 1e-10 * r2) {
            y_best = ym;
            s_best = m;
            break;
        }
    }
    const int xi_sign = pts.front().xi > 0.0 ? +1 : -1;
    return {xi_sign * std::exp(s_best), {y_best[0], y_best[1]}};
}

// ---------------------------------------------------------------------------
// Named constructions
// ---------------------------------------------------------------------------

// Seed on the data trajectory Gamma_0 near the origin star point. The launch
// direction has slope 1/Ma (vertical for Ma = 0), placed in the half-plane
// dictated by the sign convention, and xi is fixed by matching the power-law
// tail V ~ -lambda u_+ xi^{-lambda}.
inline OdeSeed launch_from_origin(const Sys& sys, const IntegrateOptions& opt) {
    const double Ma = sys.par.mach;
    const double lam = sys.par.lambda;
    const double r0 = opt.launch_radius;
    const double hyp = std::sqrt(1.0 + Ma * Ma);
    const double half = (lam > 0.0) ? -1.0 : +1.0; // sign of C at the seed
    PhasePoint p{half * r0 * Ma / hyp, half * r0 / hyp};
    const double amp = std::abs(lam) * sys.par.c_plus * hyp;
    const double xi0 = std::pow(r0 / amp, -1.0 / lam);
    return {xi0, p, (lam > 0.0) ? Orientation::xi_decreasing : Orientation::xi_increasing};
}

// Seed on the upper separatrix Sigma' of the saddle P1, at V = -1 - delta,
// C = sqrt(-sigma1 delta), to be integrated with xi increasing away from P1.
// xi_tilde_v fixes the provisional scale: the xi at which this copy of
// Sigma' reaches P1.
inline OdeSeed seed_separatrix_P1(const Sys& sys, double delta, double xi_tilde_v = -1.0) {
    if (!(delta > 0.0) || delta > 1e-2)
        throw invalid_parameter_error("seed_separatrix_P1: need 0 < delta << 1");
    if (!(xi_tilde_v < 0.0))
        throw invalid_parameter_error("seed_separatrix_P1: xi_tilde_v must be negative");
    const double sigma1 = classify_P1(sys.par).sigma1;
    const double C = std::sqrt(-sigma1 * delta);
    const double xi = xi_tilde_v * std::exp(C * C / (2.0 * sys.d.k0));
    return {xi, {-1.0 - delta, C}, Orientation::xi_increasing};
}

// Extrapolated xi at which a trajectory asymptotic to Sigma' reaches P1,
// using the leading-order closure C^2 = 2 k0 ln(xi/xi_v).
struct XiAtP1 {
    double xi_v;
    double error_estimate;
};

inline XiAtP1 xi_at_P1(const Sys& sys, const Trajectory& traj) {
    if (traj.points.size() < 2) throw numerical_error("xi_at_P1: trajectory too short");
    const auto& qb = traj.points.back();
    const auto& qa = traj.points[traj.points.size() - 2];
    const double sigma1 = classify_P1(sys.par).sigma1;
    auto ratio = [](const TrajPoint& q) { return q.C * q.C / (1.0 + q.V); };
    if (std::abs(ratio(qb) - sigma1) > 0.5 * std::abs(sigma1))
        throw convergence_error("xi_at_P1: trajectory not asymptotic to the P1 separatrix");
    auto extrap = [&](const TrajPoint& q) {
        return q.xi * std::exp(-q.C * q.C / (2.0 * sys.d.k0));
    };
    const double xb = extrap(qb), xa = extrap(qa);
    return {xb, std::abs(xb - xa)};
}

// xi at a triple point, extrapolated from the local model dV/dxi = A/xi with
// A = (G_V + L G_C) / (2 (1+L) (1+V_cp)) along the approach direction L.
inline double triple_point_A(const Sys& sys, CritId cp, double L) {
    const PhasePoint q = (cp == CritId::P5) ? location_P5(sys.d) : location_P6(sys.d);
    const Jacobian j = eval_jacobian(q, sys.d, sys.par.lambda);
    const double denom = 2.0 * (1.0 + L) * (1.0 + q.V);
    if (denom == 0.0) throw numerical_error("triple_point_A: degenerate direction L = -1");
    return (j.G_V + L * j.G_C) / denom;
}

inline double xi_at_triple_point(const Sys& sys, const Trajectory& traj, CritId cp, double L) {
    const PhasePoint q = (cp == CritId::P5) ? location_P5(sys.d) : location_P6(sys.d);
    const double A = triple_point_A(sys, cp, L);
    const auto& e = traj.points.back();
    return e.xi * std::exp(-(e.V - q.V) / A);
}

// Measured approach slope at the end of a leg.
inline double end_tangent_slope(const Trajectory& traj) {
    const size_t n = traj.points.size();
    if (n < 2) throw numerical_error("end_tangent_slope: too few points");
    const auto& a = traj.points[n - 2];
    const auto& b = traj.points[n - 1];
    const double dV = b.V - a.V;
    if (dV == 0.0) return std::numeric_limits<double>::infinity();
    return (b.C - a.C) / dV;
}

// Re-seeded state after passing a triple point: the incoming leg must end
// inside the near_critical_point ball of cp; the exit is placed at distance
// delta on the requested side (sign of V - V_cp) along the characteristic
// direction exit_slope, which must be one of the two admissible slopes.
struct TripleExit {
    OdeSeed seed;
    double xi_cp; // extrapolated xi at the triple point
    double A_in, A_out;
};

inline TripleExit pass_through_triple_point(const Sys& sys, const Trajectory& traj, CritId cp,
                                            double exit_slope, int exit_side, double delta) {
    if (cp != CritId::P5 && cp != CritId::P6)
        throw invalid_parameter_error("pass_through_triple_point: cp must be P5 or P6");
    const auto tc = classify_triple(sys.par, sys.d, cp);
    const PhasePoint q = (cp == CritId::P5) ? location_P5(sys.d) : location_P6(sys.d);

    auto match = [&](double L) -> double {
        const double d1 = std::abs(L - tc.L1), d2 = std::abs(L - tc.L2);
        const double tol = 0.2 * (1.0 + std::abs(L));
        if (std::min(d1, d2) > tol)
            throw numerical_error(
                "pass_through_triple_point: requested direction is not an admissible "
                "characteristic direction of the node");
        return (d1 <= d2) ? tc.L1 : tc.L2;
    };
    const double L_in = match(end_tangent_slope(traj));
    const double L_out = match(exit_slope);

    const double A_in = triple_point_A(sys, cp, L_in);
    const double A_out = triple_point_A(sys, cp, L_out);
    const double xi_cp = xi_at_triple_point(sys, traj, cp, L_in);

    const double v_out = exit_side * delta / std::sqrt(1.0 + L_out * L_out);
    PhasePoint p_out{q.V + v_out, q.C + L_out * v_out};
    const double xi_out = xi_cp * std::exp(v_out / A_out);
    return {{xi_out, p_out, traj.orientation}, xi_cp, A_in, A_out};
}

// ---------------------------------------------------------------------------
// Continuation through infinity
// ---------------------------------------------------------------------------

struct AsymptoticTail {
    double k;   // slope C/V at infinity
    double K_V; // V ~ K_V / xi
    double K_C; // C ~ K_C / xi
};

// Richardson extrapolation of slope and tail coefficients from samples at
// radii R/100, R/10, R (linear model in 1/V).
inline AsymptoticTail fit_tail(const Sys& sys, const Trajectory& traj,
                               const IntegrateOptions& opt) {
    const double R = opt.inf_radius;
    const std::array<double, 3> radii{R / 100.0, R / 10.0, R};
    std::array<double, 3> invV{}, slope{}, kv{}, kc{};
    for (int i = 0; i < 3; ++i) {
        const RadiusSample smp = state_at_radius(sys, traj, radii[i], opt);
        invV[i] = 1.0 / smp.p.V;
        slope[i] = smp.p.C / smp.p.V;
        kv[i] = smp.xi * smp.p.V;
        kc[i] = smp.xi * smp.p.C;
    }
    auto rich = [&](const std::array<double, 3>& f, const char* what) {
        const double e12 = (f[1] * invV[0] - f[0] * invV[1]) / (invV[0] - invV[1]);
        const double e23 = (f[2] * invV[1] - f[1] * invV[2]) / (invV[1] - invV[2]);
        if (std::abs(e23 - e12) > 1e-7 * (1.0 + std::abs(e23)))
            throw convergence_error(std::string("fit_tail: ") + what +
                                    " extrapolation not converged");
        return e23;
    };
    AsymptoticTail t;
    t.k = rich(slope, "slope");
    t.K_V = rich(kv, "K_V");
    t.K_C = rich(kc, "K_C");
    return t;
}

struct HopResult {
    Trajectory inbound;   // continuation leg entering from infinity
    int event_index = -1; // event that ended the inbound leg
    AsymptoticTail outbound_tail;
    std::optional<AsymptoticTail> inbound_tail; // set when the leg re-enters far enough
};

// Continue a trajectory that ended with a radius_exceeds event through
// infinity: fit the asymptotic slope k (must avoid the singular directions
// +-1), then integrate the reduced ODE in inverted coordinates (W,Z) =
// (1/V,1/C) across the origin, carrying ln|xi| along via the regular part of
// its rate; xi changes sign across the crossing. The continuation is the
// unique C^1 extension, so the tail coefficients K_V, K_C carry over.
inline HopResult continue_through_infinity(const Sys& sys, const Trajectory& outbound,
                                           std::span<const EventSpec> inbound_events,
                                           const IntegrateOptions& opt) {
    HopResult hr;
    hr.outbound_tail = fit_tail(sys, outbound, opt);
    const double k = hr.outbound_tail.k;
    if (std::min(std::abs(k - 1.0), std::abs(k + 1.0)) < opt.singular_slope_tol)
        throw numerical_error("continue_through_infinity: asymptotic slope at a singular "
                              "direction (|k| = 1)");

    const auto& e = outbound.points.back();
    const double W1 = 1.0 / e.V;
    const double Z1 = 1.0 / e.C;
    const double lam = sys.par.lambda;

    // y = (Z, J): dZ/dW is the inverted reduced ODE; dJ/dW the regular part
    // of dln|xi|/dW. The singular 1/W part integrates to ln|W2/W1| = 0.
    auto rhs = [&](double Wc, const std::array<double, 2>& y) -> std::array<double, 2> {
        return {rhs_inverted(Wc, y[0], sys.d, lam), hop_log_xi_rate(Wc, y[0], sys.d, lam)};
    };
    IntegrateOptions hop_opt = opt;
    hop_opt.h_max = std::abs(W1) * 0.25;
    hop_opt.h_min = std::abs(W1) * 1e-14;
    hop_opt.h_init = std::abs(W1) * 0.01;
    std::array<double, 2> y{Z1, 0.0};
    y = detail::advance_exact(rhs, y, W1, -W1, hop_opt);

    const double V2 = -e.V; // 1/(-W1)
    const double C2 = 1.0 / y[0];
    const double ln_xi2 = std::log(std::abs(e.xi)) + y[1];
    const int new_sign = (e.xi > 0.0) ? -1 : +1;
    const double xi2 = new_sign * std::exp(ln_xi2);

    OdeSeed seed{xi2, {V2, C2}, outbound.orientation};
    IntegrateOutcome leg = integrate(sys, seed, inbound_events, opt);
    hr.inbound = std::move(leg.traj);
    hr.event_index = leg.event_index;
    hr.inbound.start_anchor = {AnchorKind::infinity, std::nullopt, k};
    hr.inbound.slope_at_infinity = k;
    try {
        AsymptoticTail t = fit_tail(sys, hr.inbound, opt);
        hr.inbound_tail = t;
        hr.inbound.K_V = t.K_V;
        hr.inbound.K_C = t.K_C;
    } catch (const numerical_error&) {
        // leg ended before the sampling radii; tail left unset
    }
    return hr;
}

// ---------------------------------------------------------------------------
// CSV export (columns xi, V, C, s, region_tag)
// ---------------------------------------------------------------------------

inline void export_trajectory_csv(const std::string& path, const Sys& sys,
                                  const Trajectory& traj) {
    CsvWriter csv(path);
    csv.comment("gamma=" + fmt17(sys.par.gamma) + " lambda=" + fmt17(sys.par.lambda) +
                " mach=" + fmt17(sys.par.mach) + " a=" + fmt17(sys.par.a) +
                " c_plus=" + fmt17(sys.par.c_plus));
    csv.header({"xi", "V", "C", "s", "region_tag"});
    for (const auto& q : traj.points) {
        const double s = (q.xi == 0.0) ? -std::numeric_limits<double>::infinity()
                                       : std::log(std::abs(q.xi));
        Region r = Region::on_critical_line;
        if (q.xi != 0.0) {
            const int sig = ((q.xi / sys.par.lambda) > 0.0) ? +1 : -1;
            try {
                r = region_of({q.V, q.C}, sig);
            } catch (const invalid_parameter_error&) {
                r = Region::on_critical_line;
            }
        }
        csv.row_mixed({fmt17(q.xi), fmt17(q.V), fmt17(q.C), fmt17(s), to_string(r)});
    }
}

} // namespace vacflow
