#include <cmath>
#include <set>
#include <string>

#include "doctest.h"
#include "errors.hpp"
#include "geometry.hpp"
#include "test_helpers.hpp"

using namespace sdb;

TEST_CASE("sinai table: structure and lengths") {
    Table t = sdbtest::sinai();
    CHECK(t.ambient == Ambient::Torus);
    CHECK(t.rect_w == doctest::Approx(1.0));
    CHECK(t.rect_h == doctest::Approx(1.0));
    CHECK(t.n_material == 1);
    CHECK(t.components.size() == 5);  // disk + four walls
    CHECK(t.has_arc);
    CHECK(t.material_length == doctest::Approx(2.0 * M_PI * 0.4).epsilon(1e-12));
    CHECK(t.total_length == doctest::Approx(2.0 * M_PI * 0.4 + 4.0).epsilon(1e-12));
    // Full circle closes smoothly: the only corners are the rectangle's.
    int transparent_corners = 0;
    for (const auto& c : t.corners) transparent_corners += c.transparent ? 1 : 0;
    CHECK(transparent_corners == 4);
    CHECK(t.corners.size() == 4);
    // Walls come after material, in bottom/right/top/left order.
    for (int i = 1; i <= 4; ++i) CHECK(t.is_transparent(i));
    CHECK(t.sister_wall(1) == 3);
    CHECK(t.sister_wall(3) == 1);
    CHECK(t.sister_wall(2) == 4);
    CHECK(t.sister_wall(4) == 2);
}

TEST_CASE("sinai disk parameterization and normals") {
    Table t = sdbtest::sinai();
    const auto& disk = t.comp(0);
    CHECK(disk.kind == ComponentKind::Arc);
    CHECK(disk.curvature() == doctest::Approx(1.0 / 0.4));
    // Dispersing arc is swept clockwise; inward normal points away from center.
    double s_bottom = 0.4 * M_PI / 2.0;  // angle -pi/2 from start angle 0
    Vec2 q = disk.point_at(s_bottom);
    CHECK(q.x == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(q.y == doctest::Approx(0.1).epsilon(1e-12));
    Vec2 n = disk.normal_at(s_bottom);
    CHECK(n.x == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(n.y == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("square table: structure, corners, normals") {
    Table t = sdbtest::square();
    CHECK(t.ambient == Ambient::Plane);
    CHECK(t.n_material == 4);
    CHECK(t.components.size() == 4);
    CHECK(!t.has_arc);
    CHECK(t.material_length == doctest::Approx(4.0));
    CHECK(t.total_length == doctest::Approx(4.0));
    CHECK(t.corners.size() == 4);
    for (const auto& c : t.corners) {
        CHECK(!c.transparent);
        CHECK(std::abs(c.turn_angle) == doctest::Approx(M_PI / 2).epsilon(1e-9));
    }
    // Bottom wall midpoint: inward normal is +y.
    Vec2 q = t.point_at(0.5);
    CHECK(q.x == doctest::Approx(0.5));
    CHECK(q.y == doctest::Approx(0.0));
    Vec2 n = t.material_normal_at(0.5);
    CHECK(n.x == doctest::Approx(0.0));
    CHECK(n.y == doctest::Approx(1.0));
}

TEST_CASE("pocket table: mixed segments and a dispersing pocket arc") {
    Table t = sdbtest::pocket();
    CHECK(t.ambient == Ambient::Plane);
    CHECK(t.n_material == 5);
    CHECK(t.has_arc);
    int arc = sdbtest::find_arc_component(t);
    REQUIRE(arc >= 0);
    CHECK(t.comp(arc).radius == doctest::Approx(0.25));
    CHECK(t.comp(arc).curvature() == doctest::Approx(4.0));
    CHECK(t.material_length ==
          doctest::Approx(1.0 + 0.75 + 0.25 * M_PI / 2 + 0.75 + 1.0).epsilon(1e-12));
    // Five corners: two square corners on the bottom edge path, two where the
    // pocket arc meets the straight walls, one at the top-left.
    CHECK(t.corners.size() == 5);
    std::set<std::pair<double, double>> expect = {
        {0.0, 0.0}, {1.0, 0.0}, {1.0, 0.75}, {0.75, 1.0}, {0.0, 1.0}};
    for (const auto& c : t.corners) {
        bool found = false;
        for (const auto& e : expect) {
            if (std::abs(c.q.x - e.first) < 1e-9 && std::abs(c.q.y - e.second) < 1e-9)
                found = true;
        }
        CHECK(found);
    }
}

TEST_CASE("locate finds the nearest boundary point") {
    Table t = sdbtest::square();
    double dist = -1.0;
    double r = t.locate(Vec2{0.5, 0.25}, &dist);
    CHECK(dist == doctest::Approx(0.25).epsilon(1e-12));
    Vec2 q = t.point_at(r);
    CHECK(q.x == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(q.y == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("corner_at flags corner coordinates only") {
    Table t = sdbtest::square();
    CHECK(t.corner_at(1.0) >= 0);
    CHECK(t.corner_at(0.5) == -1);
    CHECK(t.corner_at(2.0) >= 0);
}

TEST_CASE("component_at walks the global coordinate") {
    Table t = sdbtest::sinai();
    double s = -1.0;
    int c0 = t.component_at(0.1, &s);
    CHECK(c0 == 0);
    CHECK(s == doctest::Approx(0.1));
    double rwall = t.material_length + 0.5;  // bottom wall midpoint
    int c1 = t.component_at(rwall, &s);
    CHECK(c1 == 1);
    CHECK(s == doctest::Approx(0.5));
    // r wraps modulo total length
    int c2 = t.component_at(0.1 + t.total_length, &s);
    CHECK(c2 == 0);
}

TEST_CASE("table_to_json round trip preserves structure") {
    Table t = sdbtest::pocket();
    std::string js = table_to_json(t);
    Table u = parse_table(js);
    CHECK(u.components.size() == t.components.size());
    CHECK(u.n_material == t.n_material);
    CHECK(u.material_length == doctest::Approx(t.material_length).epsilon(1e-12));
    CHECK(u.total_length == doctest::Approx(t.total_length).epsilon(1e-12));
    CHECK(u.corners.size() == t.corners.size());

    Table s = sdbtest::sinai();
    Table s2 = parse_table(table_to_json(s));
    CHECK(s2.ambient == Ambient::Torus);
    CHECK(s2.total_length == doctest::Approx(s.total_length).epsilon(1e-12));
}

static std::string torus_json(const std::string& material) {
    return std::string(R"({"ambient":"torus","rectangle":[1.0,1.0],"components":[)") + material +
           "]}";
}

TEST_CASE("validation: bad inputs raise typed errors") {
    CHECK_THROWS_AS(parse_table("this is not json"), SdbError);

    // Non-convex (focusing) arc.
    std::string focusing = torus_json(
        R"({"type":"arc","center":[0.5,0.5],"radius":0.2,"from_angle":0.0,"to_angle":0.0,"convex_inward":false})");
    try {
        parse_table(focusing);
        FAIL("expected NonConvexArc");
    } catch (const SdbError& e) {
        CHECK(e.code() == Err::NonConvexArc);
    }

    // Open material chain on a plane table.
    std::string open_chain = R"({"ambient":"plane","components":[
        {"type":"segment","a":[0.0,0.0],"b":[1.0,0.0]},
        {"type":"segment","a":[1.0,0.0],"b":[1.0,1.0]}
    ]})";
    try {
        parse_table(open_chain);
        FAIL("expected OpenBoundaryChain");
    } catch (const SdbError& e) {
        CHECK(e.code() == Err::OpenBoundaryChain);
    }

    // Obstacle poking out of the fundamental rectangle.
    std::string oversize = torus_json(
        R"({"type":"arc","center":[0.5,0.5],"radius":0.6,"from_angle":0.0,"to_angle":0.0,"convex_inward":true})");
    CHECK_THROWS_AS(parse_table(oversize), SdbError);

    // Two overlapping disks.
    std::string overlapping = torus_json(
        R"({"type":"arc","center":[0.4,0.5],"radius":0.2,"from_angle":0.0,"to_angle":0.0,"convex_inward":true},
           {"type":"arc","center":[0.5,0.5],"radius":0.2,"from_angle":0.0,"to_angle":0.0,"convex_inward":true})");
    try {
        parse_table(overlapping);
        FAIL("expected OverlappingComponents");
    } catch (const SdbError& e) {
        CHECK(e.code() == Err::OverlappingComponents);
    }

    // Missing file.
    try {
        load_table(sdbtest::table_path("no_such_table.tbl"));
        FAIL("expected Io");
    } catch (const SdbError& e) {
        CHECK(e.code() == Err::Io);
    }
}

TEST_CASE("exactly tangent interior ray table builds (tight but legal disk)") {
    Table t = sdbtest::quarter_disk_torus();
    CHECK(t.n_material == 1);
    CHECK(t.material_length == doctest::Approx(2.0 * M_PI * 0.25).epsilon(1e-12));
}
