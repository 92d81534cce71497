#include <catch2/catch_amalgamated.hpp>

#include "vacflow/ode.hpp"

using namespace vacflow;

namespace {
const IntegrateOptions kOpt{};

Sys sys175() { return Sys(Params{1.75, 0.7}); }
} // namespace

TEST_CASE("rhs in log-xi variables") {
    const Sys s = sys175();
    SECTION("origin is an equilibrium") {
        const auto r = rhs_log_xi({0.0, 0.0}, s.d, s.par.lambda);
        CHECK(r[0] == 0.0);
        CHECK(r[1] == 0.0);
    }
    SECTION("worked value at (-1, 1)") {
        const auto r = rhs_log_xi({-1.0, 1.0}, s.d, s.par.lambda);
        CHECK(r[0] == Catch::Approx(1.8).epsilon(1e-13)); // G/D = (-1.8)/(-1)
    }
    SECTION("slope along E+ equals 1/ell where defined") {
        for (double V : {-0.45, -0.2, 0.3}) {
            const PhasePoint p{V, V / s.d.ell};
            const auto r = rhs_log_xi(p, s.d, s.par.lambda);
            CHECK(r[1] / r[0] == Catch::Approx(1.0 / s.d.ell).epsilon(1e-10));
        }
    }
    SECTION("sonic point raises") {
        CHECK_THROWS_AS(rhs_log_xi({-2.0, 1.0}, s.d, s.par.lambda), sonic_error);
    }
}

TEST_CASE("reduced slope") {
    const Sys s = sys175();
    SECTION("on E- the slope is -1/ell") {
        const PhasePoint p{-2.0, 2.0 / s.d.ell};
        CHECK(rhs_reduced(p, s.d, s.par.lambda) ==
              Catch::Approx(-1.0 / s.d.ell).epsilon(1e-12));
    }
    SECTION("ratio of the polynomials at a generic point") {
        const Sys s2 = Sys(Params{2.0, 0.5});
        const PhasePoint p{-0.5, -0.25};
        const double expect =
            eval_F(p, s2.d) / eval_G(p, s2.d, 0.5);
        CHECK(rhs_reduced(p, s2.d, 0.5) == expect);
    }
}

TEST_CASE("inverted-coordinate slope") {
    const Sys s = sys175();
    SECTION("coordinate inversion: slope tends to 1/k") {
        const double k = -0.6;
        const double delta = 1e-5;
        const double got = rhs_inverted(-delta, -delta / k, s.d, s.par.lambda);
        CHECK(got == Catch::Approx(1.0 / k).margin(1e-3));
    }
    SECTION("singular direction rejected") {
        CHECK_THROWS_AS(rhs_inverted(1e-4, 1e-4, s.d, s.par.lambda), numerical_error);
        CHECK_THROWS_AS(rhs_inverted(1e-4, -1e-4, s.d, s.par.lambda), numerical_error);
    }
}

TEST_CASE("launch seeds sit in the required half-plane") {
    SECTION("lambda > 0, Ma > 0: third quadrant") {
        Sys s(Params{1.75, 0.7, 3.0});
        const OdeSeed seed = launch_from_origin(s, kOpt);
        CHECK(seed.p.V < 0.0);
        CHECK(seed.p.C < 0.0);
        CHECK(seed.orient == Orientation::xi_decreasing);
        CHECK(seed.xi > 1.0);
        // xi matching: V(xi) = -lambda u_+ xi^{-lambda}
        const double expect_V =
            -s.par.lambda * s.par.u_plus() * std::pow(seed.xi, -s.par.lambda);
        CHECK(seed.p.V == Catch::Approx(expect_V).epsilon(1e-10));
    }
    SECTION("lambda < 0, Ma > 0: first quadrant, C > 0") {
        Sys s(Params{2.5, -1.0, 0.5});
        const OdeSeed seed = launch_from_origin(s, kOpt);
        CHECK(seed.p.V > 0.0);
        CHECK(seed.p.C > 0.0);
        CHECK(seed.orient == Orientation::xi_increasing);
        CHECK(seed.xi > 0.0);
        CHECK(seed.xi < 1.0);
    }
    SECTION("Ma = ell lies on E+ to 1e-12") {
        Sys s(Params{1.75, 0.7, 8.0 / 3.0});
        const OdeSeed seed = launch_from_origin(s, kOpt);
        CHECK(e_line_gap(seed.p, s.d, +1) < 1e-12 * kOpt.launch_radius);
    }
    SECTION("Ma = 0 launches along the C axis") {
        Sys s(Params{1.75, 0.7, 0.0});
        const OdeSeed seed = launch_from_origin(s, kOpt);
        CHECK(seed.p.V == 0.0);
        CHECK(seed.p.C == Catch::Approx(-kOpt.launch_radius));
    }
}

TEST_CASE("integrate: Ma=3 run ends at the node P2") {
    Sys s(Params{1.75, 0.7, 3.0});
    const OdeSeed seed = launch_from_origin(s, kOpt);
    const PhasePoint p2 = location_P2(s.par.lambda);
    std::vector<EventSpec> ev{EventSpec::NearCriticalPoint(CritId::P2, p2, 1e-8),
                              EventSpec::RadiusExceeds(kOpt.inf_radius)};
    const auto out = integrate(s, seed, ev, kOpt);
    REQUIRE(out.event_index == 0);
    CHECK(dist(out.traj.back_point(), p2) < 2e-8);
    CHECK(out.traj.back().xi > 0.0);
    CHECK(out.traj.back().xi < seed.xi);
    // xi is strictly monotone decreasing
    for (size_t i = 1; i < out.traj.points.size(); ++i)
        CHECK(out.traj.points[i].xi < out.traj.points[i - 1].xi);
}

TEST_CASE("integrate: vertical launch escapes to infinity in the fourth quadrant") {
    Sys s(Params{1.75, 0.7, 0.0});
    const OdeSeed seed = launch_from_origin(s, kOpt);
    std::vector<EventSpec> ev{EventSpec::RadiusExceeds(1e6)};
    const auto out = integrate(s, seed, ev, kOpt);
    REQUIRE(out.event_index == 0);
    CHECK(out.traj.back().V > 0.0);
    CHECK(out.traj.back().C < 0.0);
    CHECK(out.traj.back().xi > 0.0);
    CHECK(out.traj.back().xi < 1.0); // xi has dropped toward 0+
}

TEST_CASE("integrate: case II partial flow hits L+ at finite positive xi") {
    Sys s(Params{2.5, -1.0, 0.5});
    const OdeSeed seed = launch_from_origin(s, kOpt);
    std::vector<EventSpec> ev{EventSpec::HitCriticalLine()};
    const auto out = integrate(s, seed, ev, kOpt);
    REQUIRE(out.event_index == 0);
    const auto& e = out.traj.back();
    CHECK(e.xi > 0.0);
    CHECK(std::isfinite(e.xi));
    CHECK(e.C > 0.0);
    // on L+ : C = 1+V
    CHECK(std::abs(e.C - (1.0 + e.V)) < 1e-3);
    // approach with slope -1/ell (proportionality of F and G on L+)
    CHECK(end_tangent_slope(out.traj) == Catch::Approx(-1.0 / s.d.ell).margin(2e-2));
}

TEST_CASE("E+ invariance and arrival at P4 for Ma = ell") {
    Sys s(Params{1.75, 0.7, 8.0 / 3.0});
    const OdeSeed seed = launch_from_origin(s, kOpt);
    const PhasePoint p4 = location_P4(s.d, s.par.lambda);
    std::vector<EventSpec> ev{EventSpec::NearCriticalPoint(CritId::P4, p4, 1e-8)};
    const auto out = integrate(s, seed, ev, kOpt);
    REQUIRE(out.event_index == 0);
    for (const auto& q : out.traj.points)
        CHECK(e_line_gap({q.V, q.C}, s.d, +1) < 1e-8 * (1.0 + std::abs(q.V)));
}

TEST_CASE("star point correspondence: nearby launches stay nearby") {
    Sys a(Params{1.75, 0.7, -1.0});
    Sys b(Params{1.75, 0.7, -1.0 * (1.0 + 1e-9)});
    std::vector<EventSpec> ev{EventSpec::RadiusExceeds(1.0)};
    const auto oa = integrate(a, launch_from_origin(a, kOpt), ev, kOpt);
    const auto ob = integrate(b, launch_from_origin(b, kOpt), ev, kOpt);
    CHECK(dist(oa.traj.back_point(), ob.traj.back_point()) < 1e-5);
}

TEST_CASE("finite-difference slope consistency along stored points") {
    Sys s(Params{1.75, 0.7, 3.0});
    const OdeSeed seed = launch_from_origin(s, kOpt);
    std::vector<EventSpec> ev{
        EventSpec::NearCriticalPoint(CritId::P2, location_P2(s.par.lambda), 1e-8)};
    const auto out = integrate(s, seed, ev, kOpt);
    const auto& pts = out.traj.points;
    int checked = 0;
    for (size_t i = 1; i + 1 < pts.size(); ++i) {
        const double dV = pts[i + 1].V - pts[i - 1].V;
        if (std::abs(dV) < 1e-7) continue;
        const PhasePoint p{pts[i].V, pts[i].C};
        const double G = eval_G(p, s.d, s.par.lambda);
        if (std::abs(G) < 1e-6) continue;
        const double fd = (pts[i + 1].C - pts[i - 1].C) / dV;
        const double an = eval_F(p, s.d) / G;
        CHECK(std::abs(fd - an) < 0.05 * (1.0 + std::abs(an)));
        ++checked;
    }
    CHECK(checked > 50);
}

TEST_CASE("separatrix seed and backward run to P5") {
    Sys s = sys175();
    SECTION("seed value matches the hand-evaluated tangent") {
        const OdeSeed seed = seed_separatrix_P1(s, 1e-6);
        CHECK(seed.p.C == Catch::Approx(5.4006172e-4).epsilon(1e-6));
        // C^2/(1+V) = sigma1 by construction (up to cancellation in 1+V)
        const double sigma1 = classify_P1(s.par).sigma1;
        CHECK(seed.p.C * seed.p.C / (1.0 + seed.p.V) == Catch::Approx(sigma1).epsilon(1e-9));
        CHECK(seed.xi < 0.0);
    }
    SECTION("backward integration reaches the node P5") {
        const OdeSeed seed = seed_separatrix_P1(s, 1e-6);
        const PhasePoint p5 = location_P5(s.d);
        std::vector<EventSpec> ev{EventSpec::NearCriticalPoint(CritId::P5, p5, 1e-5)};
        const auto out = integrate(s, seed, ev, kOpt);
        REQUIRE(out.event_index == 0);
        CHECK(dist(out.traj.back_point(), p5) < 2e-5);
        // Sigma' reaches P5 at a finite negative xi of magnitude below |xi_v|
        const double xi5 = out.traj.back().xi;
        CHECK(xi5 < 0.0);
        CHECK(xi5 > -1.0);
        // approach along the primary slope
        const auto tc = classify_triple(s.par, s.d, CritId::P5);
        CHECK(end_tangent_slope(out.traj) == Catch::Approx(tc.L1).margin(2e-3));
    }
}

TEST_CASE("xi extrapolation at P1 is consistent under delta refinement") {
    Sys s = sys175();
    // Seed very close to P1 (implied xi_v = -1) and integrate away along the
    // stable backward direction; the closure must recover xi_v = -1 from
    // successively larger distances.
    const OdeSeed seed = seed_separatrix_P1(s, 1e-8, -1.0);
    std::vector<EventSpec> ev1{
        EventSpec::NearCriticalPoint(CritId::P1, location_P1(), 1e-4)};
    const auto leg1 = integrate(s, seed, ev1, kOpt);
    REQUIRE(leg1.event_index == 0); // crossed the 1e-4 sphere moving outward
    const auto est1 = xi_at_P1(s, leg1.traj);

    OdeSeed cont{leg1.traj.back().xi, leg1.traj.back_point(), leg1.traj.orientation};
    std::vector<EventSpec> ev2{
        EventSpec::NearCriticalPoint(CritId::P1, location_P1(), 1e-3)};
    const auto leg2 = integrate(s, cont, ev2, kOpt);
    REQUIRE(leg2.event_index == 0);
    const auto est2 = xi_at_P1(s, leg2.traj);

    CHECK(est1.xi_v < 0.0);
    CHECK(est1.xi_v == Catch::Approx(-1.0).epsilon(1e-7));
    CHECK(std::abs(est2.xi_v - est1.xi_v) < 1e-6 * std::abs(est1.xi_v));
}

TEST_CASE("xi_at_P1 rejects trajectories not asymptotic to the separatrix") {
    Sys s(Params{1.75, 0.7, 3.0});
    const OdeSeed seed = launch_from_origin(s, kOpt);
    std::vector<EventSpec> ev{
        EventSpec::NearCriticalPoint(CritId::P2, location_P2(s.par.lambda), 1e-8)};
    const auto out = integrate(s, seed, ev, kOpt);
    CHECK_THROWS_AS(xi_at_P1(s, out.traj), convergence_error);
}

TEST_CASE("triple point pass-through") {
    Sys s = sys175();
    const auto tc = classify_triple(s.par, s.d, CritId::P5);
    const PhasePoint p5 = location_P5(s.d);

    // run Sigma' backward from P1 into the P5 ball at delta = 1e-4
    const OdeSeed seed = seed_separatrix_P1(s, 1e-6);
    std::vector<EventSpec> ev4{EventSpec::NearCriticalPoint(CritId::P5, p5, 1e-4)};
    const auto leg4 = integrate(s, seed, ev4, kOpt);
    REQUIRE(leg4.event_index == 0);

    SECTION("xi at P5 estimates converge under delta refinement") {
        const double xi5_a = xi_at_triple_point(s, leg4.traj, CritId::P5, tc.L1);
        // continue to the 1e-5 ball
        OdeSeed cont{leg4.traj.back().xi, leg4.traj.back_point(), leg4.traj.orientation};
        std::vector<EventSpec> ev5{EventSpec::NearCriticalPoint(CritId::P5, p5, 1e-5)};
        const auto leg5 = integrate(s, cont, ev5, kOpt);
        REQUIRE(leg5.event_index == 0);
        const double xi5_b = xi_at_triple_point(s, leg5.traj, CritId::P5, tc.L1);
        CHECK(std::abs(xi5_a - xi5_b) < 1e-6 * std::abs(xi5_b));
        CHECK(xi5_b < 0.0);
    }

    SECTION("exit seed continues on the far side with xi continuity") {
        const auto exit = pass_through_triple_point(s, leg4.traj, CritId::P5, tc.L1,
                                                    /*exit_side=*/-1, 1e-5);
        CHECK(exit.seed.p.V < p5.V);
        // this leg travels with xi increasing, so xi keeps increasing through
        CHECK(exit.seed.xi > exit.xi_cp);
        CHECK(std::abs(dist(exit.seed.p, p5) - 1e-5) < 1e-12);
    }

    SECTION("exit along E- (secondary) is permitted") {
        const auto exit = pass_through_triple_point(s, leg4.traj, CritId::P5,
                                                    -1.0 / s.d.ell, -1, 1e-5);
        CHECK(std::abs((exit.seed.p.C - p5.C) / (exit.seed.p.V - p5.V) + 1.0 / s.d.ell) <
              1e-9);
    }

    SECTION("inadmissible exit direction is rejected") {
        CHECK_THROWS_AS(
            pass_through_triple_point(s, leg4.traj, CritId::P5, +2.0, -1, 1e-5),
            numerical_error);
    }
}

TEST_CASE("continuation through infinity, case (b): Ma = -1") {
    Sys s(Params{1.75, 0.7, -1.0});
    const OdeSeed seed = launch_from_origin(s, kOpt);
    std::vector<EventSpec> ev{EventSpec::RadiusExceeds(kOpt.inf_radius)};
    const auto out = integrate(s, seed, ev, kOpt);
    REQUIRE(out.event_index == 0);

    const PhasePoint p5 = location_P5(s.d);
    std::vector<EventSpec> inb{EventSpec::NearCriticalPoint(CritId::P5, p5, 1e-5),
                               EventSpec::HitCriticalLine()};
    const auto hop = continue_through_infinity(s, out.traj, inb, kOpt);

    const double k = hop.outbound_tail.k;
    CHECK(k > -1.0);
    CHECK(k < -1.0 / s.d.ell + 1e-9);
    // K ratio equals the slope
    CHECK(hop.outbound_tail.K_C / hop.outbound_tail.K_V == Catch::Approx(k).epsilon(1e-6));
    REQUIRE(hop.inbound_tail.has_value());
    CHECK(hop.inbound_tail->K_C / hop.inbound_tail->K_V == Catch::Approx(k).epsilon(1e-6));
    // matching tail coefficients across x = 0
    CHECK(hop.inbound_tail->K_V == Catch::Approx(hop.outbound_tail.K_V).epsilon(1e-5));
    CHECK(hop.inbound_tail->K_C == Catch::Approx(hop.outbound_tail.K_C).epsilon(1e-5));
    // second-quadrant entry, xi < 0, ends at P5
    CHECK(hop.inbound.points.front().V < 0.0);
    CHECK(hop.inbound.points.front().C > 0.0);
    CHECK(hop.inbound.points.front().xi < 0.0);
    CHECK(hop.event_index == 0);
}

TEST_CASE("continuation through infinity, case (c): Ma = -4 ends on L-") {
    Sys s(Params{1.75, 0.7, -4.0});
    const OdeSeed seed = launch_from_origin(s, kOpt);
    std::vector<EventSpec> ev{EventSpec::RadiusExceeds(kOpt.inf_radius)};
    const auto out = integrate(s, seed, ev, kOpt);
    REQUIRE(out.event_index == 0);

    std::vector<EventSpec> inb{EventSpec::HitCriticalLine()};
    const auto hop = continue_through_infinity(s, out.traj, inb, kOpt);
    const double k = hop.outbound_tail.k;
    CHECK(k > -1.0 / s.d.ell);
    CHECK(k < 0.0);
    REQUIRE(hop.event_index == 0);
    const auto& e = hop.inbound.points.back();
    CHECK(std::abs(e.C + (1.0 + e.V)) < 1e-3); // on L-
    CHECK(e.xi < 0.0);
}

TEST_CASE("continuation along E- is E- again") {
    Sys s(Params{1.75, 0.7, -8.0 / 3.0});
    const OdeSeed seed = launch_from_origin(s, kOpt);
    std::vector<EventSpec> ev{EventSpec::RadiusExceeds(kOpt.inf_radius)};
    const auto out = integrate(s, seed, ev, kOpt);
    REQUIRE(out.event_index == 0);

    const PhasePoint p5 = location_P5(s.d);
    std::vector<EventSpec> inb{EventSpec::NearCriticalPoint(CritId::P5, p5, 1e-5),
                               EventSpec::HitCriticalLine()};
    const auto hop = continue_through_infinity(s, out.traj, inb, kOpt);
    CHECK(hop.outbound_tail.k == Catch::Approx(-1.0 / s.d.ell).epsilon(1e-8));
    for (const auto& q : hop.inbound.points)
        CHECK(e_line_gap({q.V, q.C}, s.d, -1) < 1e-7 * (1.0 + std::abs(q.V)));
    CHECK(hop.event_index == 0); // lands on P5 along the secondary direction
}

TEST_CASE("state_at_radius and state_at_s reproduce stored nodes") {
    Sys s(Params{1.75, 0.7, 0.0});
    const OdeSeed seed = launch_from_origin(s, kOpt);
    std::vector<EventSpec> ev{EventSpec::RadiusExceeds(100.0)};
    const auto out = integrate(s, seed, ev, kOpt);
    const auto smp = state_at_radius(s, out.traj, 10.0, kOpt);
    CHECK(std::hypot(smp.p.V, smp.p.C) == Catch::Approx(10.0).epsilon(1e-8));
    const auto& mid = out.traj.points[out.traj.points.size() / 2];
    const PhasePoint re = state_at_s(s, out.traj, s_of(mid), kOpt);
    CHECK(re.V == Catch::Approx(mid.V).margin(1e-10));
    CHECK(re.C == Catch::Approx(mid.C).margin(1e-10));
}
