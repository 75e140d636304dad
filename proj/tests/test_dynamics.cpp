#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "dynamics.hpp"
#include "test_helpers.hpp"

using namespace sdb;

namespace {

// Triangle-wave fold of the universal cover of the unit square.
double fold_unit(double z) {
    double u = std::fmod(z, 2.0);
    if (u < 0) u += 2.0;
    return u <= 1.0 ? u : 2.0 - u;
}

constexpr double kDiskBottomR = 0.4 * M_PI / 2.0;  // angle -pi/2 on the sinai disk
constexpr double kDiskTopR = 0.4 * 3.0 * M_PI / 2.0;  // angle +pi/2

} // namespace

TEST_CASE("phi sign convention: positive phi lies counterclockwise from the normal") {
    Vec2 n{0.0, 1.0};
    Vec2 v = velocity_from_phi(n, 0.3);
    CHECK(v.x == doctest::Approx(-std::sin(0.3)).epsilon(1e-15));
    CHECK(v.y == doctest::Approx(std::cos(0.3)).epsilon(1e-15));
    CHECK(cross(n, v) > 0.0);
    CHECK(phi_of(v, n) == doctest::Approx(0.3).epsilon(1e-15));
    CHECK(phi_of(velocity_from_phi(n, -0.7), n) == doctest::Approx(-0.7).epsilon(1e-15));
}

TEST_CASE("coordinate round trip on all tables") {
    for (const Table& t : {sdbtest::sinai(), sdbtest::square(), sdbtest::pocket()}) {
        Rng rng(777);
        for (int i = 0; i < 200; ++i) {
            Coord x = sample_coord(t, rng);
            FlowPoint f = coord_to_flow(t, x);
            CHECK(std::abs(norm(f.v) - 1.0) < 1e-12);
            Coord y = flow_to_coord(t, f.q, f.v);
            CHECK(y.r == doctest::Approx(x.r).epsilon(1e-9));
            CHECK(y.phi == doctest::Approx(x.phi).epsilon(1e-9));
        }
    }
}

TEST_CASE("material involution flips the angle and keeps the footpoint") {
    Table t = sdbtest::sinai();
    Rng rng(4);
    for (int i = 0; i < 100; ++i) {
        Coord x = sample_coord(t, rng);
        Coord ix = involution(t, x);
        CHECK(ix.r == x.r);
        CHECK(ix.phi == -x.phi);
        Coord ixx = involution(t, ix);
        CHECK(ixx.r == x.r);
        CHECK(ixx.phi == x.phi);
    }
}

TEST_CASE("square unfolding oracle: 25 events match the folded straight line") {
    Table t = sdbtest::square();
    const double r0 = 0.3, phi0 = 0.4;
    Coord x{r0, phi0};
    FlowPoint f = coord_to_flow(t, x);
    CHECK(f.q.x == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(f.q.y == doctest::Approx(0.0).epsilon(1e-12));

    // Straight line in the cover from (0.3, 0) with direction (-sin 0.4, cos 0.4).
    const double vx = -std::sin(phi0), vy = std::cos(phi0);
    std::vector<double> times;
    for (int m = -40; m <= 40; ++m) {
        double tx = (double(m) - 0.3) / vx;
        if (tx > 1e-12) times.push_back(tx);
        double ty = double(m) / vy;
        if (ty > 1e-12) times.push_back(ty);
    }
    std::sort(times.begin(), times.end());
    REQUIRE(times.size() >= 25);

    auto evs = simulate(t, x, 25);
    REQUIRE(evs.size() == 25);
    for (size_t k = 0; k < evs.size(); ++k) {
        CHECK(evs[k].t == doctest::Approx(times[k]).epsilon(1e-9));
        double qx = fold_unit(0.3 + vx * times[k]);
        double qy = fold_unit(vy * times[k]);
        CHECK(evs[k].q.x == doctest::Approx(qx).epsilon(1e-9));
        CHECK(evs[k].q.y == doctest::Approx(qy).epsilon(1e-9));
        CHECK(evs[k].cls == EventClass::Regular);
    }
}

TEST_CASE("sinai vertical bouncer: exact event ladder") {
    Table t = sdbtest::sinai();
    Coord x{kDiskBottomR, 0.0};
    FlowPoint f = coord_to_flow(t, x);
    CHECK(f.q.x == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(f.q.y == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(f.v.x == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(f.v.y == doctest::Approx(-1.0).epsilon(1e-12));

    auto evs = simulate(t, x, 8);
    REQUIRE(evs.size() == 8);
    for (int k = 0; k < 8; ++k) {
        CHECK(evs[size_t(k)].t == doctest::Approx(0.1 * (k + 1)).epsilon(1e-10));
        bool material_step = (k % 2 == 1);
        CHECK(evs[size_t(k)].cls ==
              (material_step ? EventClass::Regular : EventClass::Transparent));
    }
    // First crossing leaves through the bottom and is recorded on the top wall.
    CHECK(evs[0].q.x == doctest::Approx(0.5).epsilon(1e-10));
    CHECK(evs[0].q.y == doctest::Approx(1.0).epsilon(1e-10));
    double s_top_wall = -1.0;
    int wall = t.component_at(evs[0].coord.r, &s_top_wall);
    CHECK(wall == 3);
    CHECK(evs[0].wrap_shift.x == doctest::Approx(0.0));
    CHECK(evs[0].wrap_shift.y == doctest::Approx(1.0));
    CHECK(evs[0].v_out.y == doctest::Approx(-1.0));

    // Alternating hits on the top and bottom of the disk.
    CHECK(evs[1].q.y == doctest::Approx(0.9).epsilon(1e-10));
    CHECK(evs[1].coord.r == doctest::Approx(kDiskTopR).epsilon(1e-9));
    CHECK(evs[1].cos_phi == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(evs[1].v_out.y == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(evs[3].q.y == doctest::Approx(0.1).epsilon(1e-10));
    CHECK(evs[3].coord.r == doctest::Approx(kDiskBottomR).epsilon(1e-9));
}

TEST_CASE("transparent involution moves to the sister wall") {
    Table t = sdbtest::sinai();
    auto evs = simulate(t, Coord{kDiskBottomR, 0.0}, 1);
    REQUIRE(evs.size() == 1);
    REQUIRE(evs[0].cls == EventClass::Transparent);
    Coord iv = involution(t, evs[0].coord);
    double s = -1.0;
    CHECK(t.component_at(iv.r, &s) == 1);  // bottom wall
    Vec2 p = t.point_at(iv.r);
    CHECK(p.x == doctest::Approx(0.5).epsilon(1e-10));
    CHECK(p.y == doctest::Approx(0.0).epsilon(1e-10));
    Coord back = involution(t, iv);
    CHECK(back.r == doctest::Approx(evs[0].coord.r).epsilon(1e-12));
    CHECK(back.phi == doctest::Approx(evs[0].coord.phi).epsilon(1e-12));
}

TEST_CASE("corner landing stops the simulation with both normals") {
    Table t = sdbtest::square();
    Coord x{0.5, std::atan(0.5)};  // aims exactly at the corner (0, 1)
    auto evs = simulate(t, x, 5);
    REQUIRE(evs.size() == 1);
    CHECK(evs[0].cls == EventClass::Corner);
    CHECK(evs[0].t == doctest::Approx(std::sqrt(1.25)).epsilon(1e-10));
    CHECK(evs[0].q.x == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(evs[0].q.y == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(evs[0].corner_id >= 0);
    CHECK(norm(evs[0].corner_normal_prev) == doctest::Approx(1.0));
    CHECK(norm(evs[0].corner_normal_next) == doctest::Approx(1.0));
}

TEST_CASE("exact tangential pass continues straight") {
    Table t = sdbtest::quarter_disk_torus();
    // Left wall point (0, 0.75) going right: the ray grazes the disk at (0.5, 0.75)
    // with exactly zero discriminant (all quantities are dyadic).
    double r_left = t.material_length + 3.0 + 0.25;  // walls: bottom 1, right 1, top 1
    Coord x{r_left, 0.0};
    FlowPoint f = coord_to_flow(t, x);
    CHECK(f.q.x == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(f.q.y == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(f.v.x == doctest::Approx(1.0).epsilon(1e-12));

    auto evs = simulate(t, x, 2);
    REQUIRE(evs.size() == 2);
    CHECK(evs[0].cls == EventClass::Tangential);
    CHECK(evs[0].t == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(evs[0].q.x == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(evs[0].q.y == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(evs[0].v_out.x == doctest::Approx(1.0));
    CHECK(evs[1].cls == EventClass::Transparent);  // right wall crossing
}

TEST_CASE("flow reflects and wraps") {
    Table t = sdbtest::sinai();
    FlowPoint f = coord_to_flow(t, Coord{kDiskBottomR, 0.0});
    bool hit_corner = false;
    FlowPoint g = flow(t, f, 0.35, &hit_corner);
    CHECK(!hit_corner);
    CHECK(g.q.x == doctest::Approx(0.5).epsilon(1e-10));
    CHECK(g.q.y == doctest::Approx(0.05).epsilon(1e-10));
    CHECK(g.v.y == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("material_map folds wall crossings") {
    Table t = sdbtest::sinai();
    Coord out;
    CollisionEvent last;
    bool ok = material_map(t, Coord{kDiskBottomR, 0.0}, &out, 1 << 20, &last);
    REQUIRE(ok);
    CHECK(out.r == doctest::Approx(kDiskTopR).epsilon(1e-9));
    CHECK(out.phi == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(last.t == doctest::Approx(0.2).epsilon(1e-10));
}

TEST_CASE("sample_coord draws from cos(phi) dr dphi") {
    Table t = sdbtest::sinai();
    Rng rng(2025);
    const int n = 20000;
    double sum_cos = 0.0, sum_r = 0.0;
    for (int i = 0; i < n; ++i) {
        Coord x = sample_coord(t, rng);
        CHECK(x.r >= 0.0);
        CHECK(x.r < t.material_length + 1e-12);
        CHECK(std::abs(x.phi) <= M_PI / 2);
        sum_cos += std::cos(x.phi);
        sum_r += x.r;
    }
    CHECK(sum_cos / n == doctest::Approx(M_PI / 4).epsilon(0.02));
    CHECK(sum_r / n == doctest::Approx(t.material_length / 2).epsilon(0.03));
}

TEST_CASE("unwrap state lifts the orbit to straight segments") {
    Table t = sdbtest::sinai();
    Coord x{kDiskBottomR, 0.0};
    FlowPoint f = coord_to_flow(t, x);
    auto evs = simulate(t, x, 8);
    REQUIRE(evs.size() == 8);
    UnwrapState uw;
    Vec2 pos = f.q;
    Vec2 vel = f.v;
    double t_prev = 0.0;
    for (const auto& ev : evs) {
        uw.absorb(ev);
        Vec2 lifted = uw.lift(ev.q);
        Vec2 straight = pos + vel * (ev.t - t_prev);
        CHECK(lifted.x == doctest::Approx(straight.x).epsilon(1e-10));
        CHECK(lifted.y == doctest::Approx(straight.y).epsilon(1e-10));
        pos = lifted;
        vel = ev.v_out;
        t_prev = ev.t;
    }
}

TEST_CASE("time reversal through one event returns to the start") {
    for (const Table& t : {sdbtest::sinai(), sdbtest::square(), sdbtest::pocket()}) {
        Rng rng(91);
        int checked = 0;
        while (checked < 50) {
            Coord x = sample_coord(t, rng);
            CollisionEvent ev = collision_map(t, x);
            if (ev.cls == EventClass::Corner || ev.cls == EventClass::Tangential) continue;
            Coord iy = involution(t, ev.coord);
            CollisionEvent back = collision_map(t, iy);
            if (back.cls == EventClass::Corner || back.cls == EventClass::Tangential) continue;
            Coord ix = involution(t, back.coord);
            double dr = std::abs(ix.r - x.r);
            dr = std::min(dr, t.total_length - dr);
            CHECK(dr < 1e-9);
            CHECK(ix.phi == doctest::Approx(x.phi).epsilon(1e-9));
            ++checked;
        }
    }
}
