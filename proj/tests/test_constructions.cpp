#include <cmath>
#include <vector>

#include "constructions.hpp"
#include "doctest.h"
#include "test_helpers.hpp"

using namespace sdb;

TEST_CASE("embedding, pivot case: symmetric rays far from the crossing") {
    // Two unit rays 1e-4 radians apart, both 60 units from the line crossing.
    Vec2 v1 = unit_from_angle(M_PI / 2 + 5e-5);
    Vec2 v2 = unit_from_angle(M_PI / 2 - 5e-5);
    Vec2 q1 = 60.0 * v1, q2 = 60.0 * v2;
    FrontEmbedding e = embed_divergent_front(q1, v1, q2, v2, 1e-3);
    CHECK(e.kind == 1);
    CHECK(!e.flat);
    CHECK(e.radius == doctest::Approx(60.0).epsilon(1e-9));
    CHECK(std::abs(e.tau1) < 1e-9);
    CHECK(std::abs(e.tau2) < 1e-9);
    CHECK(norm(e.center) < 1e-7);
    CHECK(e.circle_residual < 1e-9 * e.radius);
    CHECK(e.alignment_residual < 1e-9);
    CHECK(dist(e.p1, q1) < 1e-9);
}

TEST_CASE("embedding, push-out case: rays too close to the crossing") {
    Vec2 v1 = unit_from_angle(M_PI / 2 + 5e-5);
    Vec2 v2 = unit_from_angle(M_PI / 2 - 5e-5);
    Vec2 q1 = 1.0 * v1, q2 = 1.0 * v2;
    FrontEmbedding e = embed_divergent_front(q1, v1, q2, v2, 0.01);
    CHECK(e.kind == 2);
    CHECK(e.radius == doctest::Approx(50.0).epsilon(1e-12));  // 5000 * eps0
    CHECK(e.tau1 == doctest::Approx(49.0).epsilon(1e-9));
    CHECK(e.tau2 == doctest::Approx(49.0).epsilon(1e-9));
    CHECK(e.circle_residual < 1e-9 * e.radius);
    CHECK(e.alignment_residual < 1e-9);
    CHECK(dist(e.p1, e.center) == doctest::Approx(50.0).epsilon(1e-9));
}

TEST_CASE("embedding, flat case: parallel rays slide onto a common line") {
    Vec2 v{0.0, 1.0};
    Vec2 q1{0.3, 0.2};
    Vec2 q2{0.3003, 0.2004};
    FrontEmbedding e = embed_divergent_front(q1, v, q2, v, 1e-2);
    CHECK(e.kind == 0);
    CHECK(e.flat);
    CHECK(e.radius == 0.0);
    CHECK(e.tau1 == 0.0);
    CHECK(e.tau2 == doctest::Approx(-4e-4).epsilon(1e-9));
    CHECK(e.p2.y == doctest::Approx(q1.y).epsilon(1e-12));
    CHECK(e.p2.x == doctest::Approx(q2.x));
}

TEST_CASE("embedding rejects converging and opposed pairs") {
    // Converging: the rays narrow toward each other.
    Vec2 v1 = unit_from_angle(M_PI / 2 + 1e-5);
    Vec2 v2 = unit_from_angle(M_PI / 2 - 1e-5);
    Vec2 q1{1e-4, 0.0}, q2{0.0, 0.0};
    bool threw = false;
    try {
        embed_divergent_front(q1, v1, q2, v2, 1e-3);
    } catch (const SdbError& err) {
        threw = true;
        CHECK(err.code() == Err::BadArgument);
    }
    CHECK(threw);

    // Anti-parallel rays cannot sit on one divergent front.
    CHECK_THROWS_AS(
        embed_divergent_front(Vec2{1e-4, 0.0}, Vec2{0.0, 1.0}, Vec2{0.0, 0.0},
                              Vec2{0.0, -1.0}, 1e-3),
        SdbError);
}

TEST_CASE("fuzz harness: clean, mixed, deterministic") {
    FuzzReport rep = fuzz_embeddings(2000, 1e-3, 11);
    CHECK(rep.n == 2000);
    CHECK(rep.n_violations == 0);
    CHECK(rep.n_case1 + rep.n_case2 + rep.n_flat == 2000);
    CHECK(rep.n_case1 > 0);
    CHECK(rep.n_case2 > 0);
    CHECK(rep.n_flat > 0);
    CHECK(rep.tau_bound == doctest::Approx(10.0));
    CHECK(rep.max_abs_tau < rep.tau_bound);
    CHECK(rep.max_circle_residual < 1e-9);
    CHECK(rep.max_alignment_residual < 1e-9);

    FuzzReport rep2 = fuzz_embeddings(2000, 1e-3, 11);
    CHECK(rep2.max_abs_tau == rep.max_abs_tau);
    CHECK(rep2.n_case1 == rep.n_case1);
    CHECK(rep2.n_flat == rep.n_flat);
}

TEST_CASE("grazing fixture: the constructed leg misses the arc by exactly `miss`") {
    Table t = sdbtest::sinai();
    AimSpec aim;
    aim.component = 0;
    aim.place = 0.3;
    aim.dir = +1;
    aim.miss = 1e-3;
    aim.n_back = 2;
    BadFixture fx = make_grazing_fixture(t, aim);
    REQUIRE(fx.ok);
    CHECK(fx.n == 2);
    CHECK(fx.graze_t > 0.0);

    auto evs = simulate(t, fx.x, fx.n);
    REQUIRE(static_cast<int>(evs.size()) == fx.n);
    const auto& anchor = evs.back();
    // Flying the outgoing leg for graze_t reaches the grazing point lifted off
    // the arc by the miss distance.
    const auto& arc = t.comp(0);
    Vec2 g = arc.point_at(aim.place * arc.length());
    Vec2 n_g = arc.normal_at(aim.place * arc.length());
    FlowPoint reached = flow(t, FlowPoint{anchor.q, anchor.v_out}, fx.graze_t);
    CHECK(dist(reached.q, g + aim.miss * n_g) < 1e-8);
}

TEST_CASE("grazing fixture rejects bad aims") {
    Table si = sdbtest::sinai();
    AimSpec wall;
    wall.component = 1;  // transparent wall, not a dispersing arc
    CHECK(!make_grazing_fixture(si, wall).ok);

    AimSpec nomiss;
    nomiss.component = 0;
    nomiss.miss = 0.0;
    CHECK(!make_grazing_fixture(si, nomiss).ok);

    Table sq = sdbtest::square();
    AimSpec flat;
    flat.component = 0;
    CHECK(!make_grazing_fixture(sq, flat).ok);
}

TEST_CASE("synchronized frame on a grazing fixture: post-singularity geometry") {
    Table t = sdbtest::sinai();
    AimSpec aim;
    aim.component = 0;
    aim.place = 0.3;
    aim.dir = +1;
    aim.miss = 1e-3;
    aim.n_back = 2;
    BadFixture fx = make_grazing_fixture(t, aim);
    REQUIRE(fx.ok);

    SyncFrame fr = build_sync_frame(t, fx.x, fx.n);
    CHECK(fr.mode == FrameMode::PostSingularity);
    CHECK(fr.n == fx.n);
    CHECK(fr.eps1 > 0.0);
    CHECK(fr.tau_next > 0.0);

    auto evs = simulate(t, fx.x, fx.n);
    const auto& anchor = evs.back();
    CHECK(dist(fr.q_anchor, anchor.q) < 1e-12);
    CHECK(dist(fr.v_leg, anchor.v_out) < 1e-12);
    CHECK(dist(fr.q_eps, fr.q_anchor + fr.eps1 * fr.v_leg) < 1e-12);
    CHECK(dist(fr.v_eps, -fr.v_leg) < 1e-15);

    // Carrier circle: radius = tau_next / curvature_scale, q_eps on the circle.
    CHECK(fr.radius == doctest::Approx(fr.tau_next / 1e-3).epsilon(1e-12));
    CHECK(dist(fr.q_eps, fr.center) == doctest::Approx(fr.radius).epsilon(1e-12));
    CHECK(dist(fr.q1, fr.center) == doctest::Approx(fr.radius).epsilon(1e-9));

    CHECK(fr.e_star > 0.0);
    CHECK(fr.e_bracket > 0.0);
    CHECK(fr.e_bracket <= fr.e_star);
    CHECK(fr.obstruction == SingSource::ArcTangency);
    CHECK(fr.obstruction_comp == 0);
    CHECK(fr.open_cos > 0.0);
    CHECK(fr.sing_gap < 1e-4);

    // Chord bookkeeping.
    CHECK(dist(fr.q3, fr.q_star + fr.q3_param * fr.v_eps) < 1e-9);
    CHECK(dist(fr.q3_tilde, fr.center) == doctest::Approx(fr.radius).epsilon(1e-9));
    CHECK(norm(fr.v3) == doctest::Approx(1.0).epsilon(1e-12));

    FrameCertificate cert = lmf_check(fr);
    CHECK(cert.p2 == 0.0);
    CHECK(cert.min_product() >= -1e-12);
    CHECK(dist(fr.q3, fr.q3_tilde + cert.eta * fr.v_eps) < 1e-9);
}

TEST_CASE("frame argument validation") {
    Table t = sdbtest::square();
    CHECK_THROWS_AS(build_sync_frame(t, Coord{0.3, 0.1}, 0), SdbError);
    // First event is an exact corner hit: no smooth leg to frame.
    CHECK_THROWS_AS(build_sync_frame(t, Coord{0.5, std::atan(0.5)}, 1), SdbError);
}

TEST_CASE("strip: sample zero reverses the orbit exactly into U0") {
    Table t = sdbtest::sinai();
    AimSpec aim;
    aim.component = 0;
    aim.place = 0.55;
    aim.dir = -1;
    aim.miss = 1e-3;
    aim.n_back = 2;
    BadFixture fx = make_grazing_fixture(t, aim);
    REQUIRE(fx.ok);
    SyncFrame fr = build_sync_frame(t, fx.x, fx.n);

    StripParams sp;
    sp.n_samples = 120;
    StripRegion strip = build_strip(t, fr, sp);
    CHECK(strip.n == fr.n);
    REQUIRE(static_cast<int>(strip.samples.size()) == sp.n_samples);

    // Landing of the e = 0 sample is the time reversal of the base point.
    Coord ix = involution(t, fx.x);
    double dr = std::abs(strip.u0_center.r - ix.r);
    dr = std::min(dr, t.total_length - dr);
    CHECK(dr < 1e-9);
    CHECK(strip.u0_center.phi == doctest::Approx(ix.phi).epsilon(1e-9));
    CHECK(strip.samples.front().landing_dist == doctest::Approx(0.0));

    // Total reversed flight time = eps1 + the first n orbit legs.
    auto evs = simulate(t, fx.x, fx.n);
    CHECK(strip.samples.front().tau_total ==
          doctest::Approx(fr.eps1 + evs.back().t).epsilon(1e-9));
    for (const auto& s : strip.samples) {
        CHECK(static_cast<int>(s.foot.size()) == fr.n + 2);
    }

    CHECK(strip.all_in_u0);
    CHECK(strip.monotone);
    CHECK(strip.max_landing_dist <= strip.u0_radius + 1e-12);
    CHECK(strip.area > 0.0);

    ContainmentReport rep = strip_contains_orbit(t, strip, fr);
    CHECK(rep.inside_at_start);
    CHECK(rep.entered);
    CHECK(!rep.crossed_edge);
    CHECK(rep.landing_in_u0);
    CHECK(rep.contained);
    CHECK(rep.landing_dist <= strip.u0_radius);

    // Verdicts are stable when the discretization is doubled.
    StripParams sp2;
    sp2.n_samples = 240;
    StripRegion strip2 = build_strip(t, fr, sp2);
    ContainmentReport rep2 = strip_contains_orbit(t, strip2, fr);
    CHECK(rep2.contained == rep.contained);
    CHECK(rep2.inside_at_start == rep.inside_at_start);
    CHECK(strip2.area == doctest::Approx(strip.area).epsilon(0.05));
}

TEST_CASE("pre-singularity frames arise near material corners") {
    Table t = sdbtest::pocket();
    int n_pre = 0, n_built = 0;
    for (double x0 : {0.98, 0.985}) {
        for (double a : {0.08, 0.12, 0.16}) {
            // Anchor on the bottom wall at (x0, 0), outgoing up-left at angle a
            // from the vertical; the previous collision sits on the right wall.
            Vec2 v_leg = unit_from_angle(M_PI / 2 + a);
            Vec2 w_arr = reflect(v_leg, Vec2{0.0, 1.0});
            OrbitTrace tr = trace_back(t, Vec2{x0, 0.0}, w_arr, 1);
            if (!tr.ok) continue;
            try {
                SyncFrame fr = build_sync_frame(t, tr.coord, 1);
                ++n_built;
                if (fr.mode == FrameMode::PreSingularity) {
                    ++n_pre;
                    CHECK(fr.obstruction == SingSource::Corner);
                    CHECK(fr.obstruction_corner >= 0);
                    FrameCertificate cert = lmf_check(fr);
                    CHECK(cert.min_product() >= -1e-12);
                }
            } catch (const SdbError&) {
                continue;
            }
        }
    }
    CHECK(n_built > 0);
    CHECK(n_pre > 0);
}

TEST_CASE("foliation chart: exact anchors, disjoint fibers") {
    Table t = sdbtest::sinai();
    auto s1 = trace_singularities(t, 1, 4e-3);
    REQUIRE(!s1.empty());
    const SingCurve* curve = nullptr;
    for (const auto& c : s1) {
        if (c.chart_length() > 0.1) {
            curve = &c;
            break;
        }
    }
    REQUIRE(curve != nullptr);

    FoliationChart chart = foliation_chart(t, *curve, 3, 1e-3, 2.5e-4);
    CHECK(chart.fibers.size() == 3);
    CHECK(chart.disjoint);
    CHECK(chart.min_fiber_gap > 0.0);
    for (const auto& f : chart.fibers) {
        REQUIRE(!f.points.empty());
        bool anchor_found = false;
        for (const auto& [s, y] : f.points) {
            if (s == 0.0) {
                anchor_found = true;
                CHECK(y.r == f.anchor.r);
                CHECK(y.phi == f.anchor.phi);
            }
        }
        CHECK(anchor_found);
        CHECK(f.s_min <= 0.0);
        CHECK(f.s_max >= 0.0);
    }

    CHECK_THROWS_AS(foliation_chart(t, *curve, 0, 1e-3, 2.5e-4), SdbError);
    CHECK_THROWS_AS(foliation_chart(t, *curve, 3, 1e-4, 1e-3), SdbError);
}
