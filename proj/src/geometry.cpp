#include "geometry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"

namespace sdb {

namespace {

constexpr double kTwoPi = 2.0 * M_PI;

double mod_pos(double x, double m) {
    double r = std::fmod(x, m);
    return r < 0.0 ? r + m : r;
}

// Wrap into (-pi, pi].
double wrap_angle(double a) {
    double r = std::fmod(a, kTwoPi);
    if (r <= -M_PI) r += kTwoPi;
    if (r > M_PI) r -= kTwoPi;
    return r;
}

}  // namespace

// ---- BoundaryComponent -------------------------------------------------------

double BoundaryComponent::length() const {
    if (kind == ComponentKind::Segment) return dist(a, b);
    return std::abs(sweep) * radius;
}

Vec2 BoundaryComponent::point_at(double s) const {
    if (kind == ComponentKind::Segment) {
        double len = dist(a, b);
        double u = len > 0.0 ? s / len : 0.0;
        return a + u * (b - a);
    }
    double theta = angle0 + sweep * (s / length());
    return center + radius * unit_from_angle(theta);
}

Vec2 BoundaryComponent::tangent_at(double s) const {
    if (kind == ComponentKind::Segment) return normalized(b - a);
    double theta = angle0 + sweep * (s / length());
    Vec2 ccw{-std::sin(theta), std::cos(theta)};
    return sweep >= 0.0 ? ccw : -ccw;
}

Vec2 BoundaryComponent::normal_at(double s) const { return perp(tangent_at(s)); }

double BoundaryComponent::curvature() const {
    return kind == ComponentKind::Arc ? 1.0 / radius : 0.0;
}

// ---- Table queries -----------------------------------------------------------

int Table::component_at(double r, double* s_local) const {
    double rm = mod_pos(r, total_length);
    // Components carry cumulative offsets in order; linear scan is fine at these sizes.
    int idx = static_cast<int>(components.size()) - 1;
    for (size_t i = 1; i < components.size(); ++i) {
        if (rm < components[i].r_offset) {
            idx = static_cast<int>(i) - 1;
            break;
        }
    }
    double s = rm - components[static_cast<size_t>(idx)].r_offset;
    double len = components[static_cast<size_t>(idx)].length();
    if (s > len) s = len;
    if (s_local) *s_local = s;
    return idx;
}

Vec2 Table::point_at(double r) const {
    double s;
    int i = component_at(r, &s);
    return comp(i).point_at(s);
}

Vec2 Table::tangent_at(double r) const {
    double s;
    int i = component_at(r, &s);
    return comp(i).tangent_at(s);
}

double Table::curvature_at(double r) const {
    double s;
    int i = component_at(r, &s);
    (void)s;
    return comp(i).curvature();
}

Vec2 Table::normal_at_any(double r) const {
    double s;
    int i = component_at(r, &s);
    return comp(i).normal_at(s);
}

Vec2 Table::material_normal_at(double r) const {
    double s;
    int i = component_at(r, &s);
    if (!comp(i).material)
        fail(Err::TransparentWall, "normal queried on a transparent wall (crossing marker only)");
    int c = corner_at(r);
    if (c >= 0 && !corners[static_cast<size_t>(c)].transparent)
        fail(Err::CornerPoint, "normal undefined at a corner point");
    return comp(i).normal_at(s);
}

int Table::corner_at(double r) const {
    double s;
    int i = component_at(r, &s);
    double len = comp(i).length();
    bool near_start = s < kCornerHitTol;
    bool near_end = len - s < kCornerHitTol;
    if (!near_start && !near_end) return -1;
    for (size_t c = 0; c < corners.size(); ++c) {
        if (near_start && corners[c].comp_next == i) return static_cast<int>(c);
        if (near_end && corners[c].comp_prev == i) return static_cast<int>(c);
    }
    return -1;
}

double Table::locate(const Vec2& q, double* distance) const {
    double best_d = std::numeric_limits<double>::infinity();
    double best_r = 0.0;
    for (size_t i = 0; i < components.size(); ++i) {
        const BoundaryComponent& c = components[i];
        double s = 0.0;
        if (c.kind == ComponentKind::Segment) {
            Vec2 ab = c.b - c.a;
            double len = norm(ab);
            double t = std::clamp(dot(q - c.a, ab) / (len * len), 0.0, 1.0);
            s = t * len;
        } else {
            double len = c.length();
            double theta = std::atan2(q.y - c.center.y, q.x - c.center.x);
            // Signed angular advance from angle0 in the sweep direction.
            double rel = wrap_angle(theta - c.angle0);
            double adv = c.sweep >= 0.0 ? mod_pos(rel, kTwoPi) : -mod_pos(-rel, kTwoPi);
            if (std::abs(adv) <= std::abs(c.sweep)) {
                s = std::abs(adv) * c.radius;
            } else {
                // Outside the angular span: nearer endpoint wins.
                double d0 = dist(q, c.point_at(0.0));
                double d1 = dist(q, c.point_at(len));
                s = d0 <= d1 ? 0.0 : len;
            }
            if (s > len) s = len;
        }
        double d = dist(q, c.point_at(s));
        if (d < best_d) {
            best_d = d;
            best_r = c.r_offset + s;
        }
    }
    if (distance) *distance = best_d;
    return best_r;
}

int Table::sister_wall(int wall_component) const {
    int w0 = n_material;
    switch (wall_component - w0) {
        case 0: return w0 + 2;  // bottom <-> top
        case 1: return w0 + 3;  // right  <-> left
        case 2: return w0 + 0;
        case 3: return w0 + 1;
        default: fail(Err::BadArgument, "sister_wall: not a transparent wall");
    }
}

// ---- Validation helpers ------------------------------------------------------

namespace {

struct OverlapProbe {
    const BoundaryComponent* c;
};

bool points_coincide(const Vec2& p, const Vec2& q) { return dist(p, q) <= 1e-9; }

bool on_arc_span(const BoundaryComponent& arc, const Vec2& p) {
    double theta = std::atan2(p.y - arc.center.y, p.x - arc.center.x);
    double rel = wrap_angle(theta - arc.angle0);
    double adv = arc.sweep >= 0.0 ? mod_pos(rel, kTwoPi) : -mod_pos(-rel, kTwoPi);
    return std::abs(adv) <= std::abs(arc.sweep) + 1e-12;
}

bool endpoint_of(const BoundaryComponent& c, const Vec2& p) {
    return points_coincide(c.start(), p) || points_coincide(c.end(), p);
}

// Intersection points of the full circle with a segment.
int circle_segment_hits(const Vec2& center, double radius, const Vec2& a, const Vec2& b,
                        Vec2 out[2]) {
    Vec2 d = b - a;
    double len2 = norm2(d);
    if (len2 == 0.0) return 0;
    Vec2 f = a - center;
    double A = len2, B = 2.0 * dot(f, d), C = norm2(f) - radius * radius;
    double disc = B * B - 4.0 * A * C;
    if (disc < 0.0) return 0;
    double sq = std::sqrt(disc);
    int n = 0;
    for (double t : {(-B - sq) / (2.0 * A), (-B + sq) / (2.0 * A)}) {
        if (t >= -1e-12 && t <= 1.0 + 1e-12) out[n++] = a + t * d;
        if (disc == 0.0) break;
    }
    return n;
}

bool segments_cross(const Vec2& a1, const Vec2& b1, const Vec2& a2, const Vec2& b2, Vec2* where) {
    Vec2 d1 = b1 - a1, d2 = b2 - a2;
    double den = cross(d1, d2);
    if (std::abs(den) < 1e-15) {
        // Parallel: overlapping collinear segments count as a crossing.
        if (std::abs(cross(a2 - a1, d1)) > 1e-12) return false;
        double L = norm(d1);
        Vec2 u = normalized(d1);
        double t0 = dot(a2 - a1, u), t1 = dot(b2 - a1, u);
        double lo = std::min(t0, t1), hi = std::max(t0, t1);
        if (hi < 1e-9 || lo > L - 1e-9) return false;
        if (where) *where = a1 + std::max(lo, 0.0) * u;
        return true;
    }
    double t = cross(a2 - a1, d2) / den;
    double u = cross(a2 - a1, d1) / den;
    if (t < -1e-12 || t > 1.0 + 1e-12 || u < -1e-12 || u > 1.0 + 1e-12) return false;
    if (where) *where = a1 + t * d1;
    return true;
}

bool components_overlap(const BoundaryComponent& x, const BoundaryComponent& y) {
    auto is_shared_endpoint = [&](const Vec2& p) { return endpoint_of(x, p) && endpoint_of(y, p); };

    if (x.kind == ComponentKind::Segment && y.kind == ComponentKind::Segment) {
        Vec2 p;
        if (!segments_cross(x.a, x.b, y.a, y.b, &p)) return false;
        return !is_shared_endpoint(p);
    }
    if (x.kind == ComponentKind::Arc && y.kind == ComponentKind::Arc) {
        double d = dist(x.center, y.center);
        if (d > x.radius + y.radius + 1e-12) return false;
        if (d < 1e-12 && std::abs(x.radius - y.radius) < 1e-12) {
            // Same circle: spans overlap unless they only touch at endpoints.
            Vec2 mid = x.point_at(0.5 * x.length());
            if (on_arc_span(y, mid)) return true;
            Vec2 midy = y.point_at(0.5 * y.length());
            return on_arc_span(x, midy);
        }
        if (d + std::min(x.radius, y.radius) < std::max(x.radius, y.radius) - 1e-12) return false;
        // Circle-circle intersection points.
        double a = (d * d + x.radius * x.radius - y.radius * y.radius) / (2.0 * d);
        double h2 = x.radius * x.radius - a * a;
        if (h2 < 0.0) return false;
        double h = std::sqrt(std::max(0.0, h2));
        Vec2 u = normalized(y.center - x.center);
        for (double sgn : {1.0, -1.0}) {
            Vec2 p = x.center + a * u + sgn * h * perp(u);
            if (on_arc_span(x, p) && on_arc_span(y, p) && !is_shared_endpoint(p)) return true;
            if (h == 0.0) break;
        }
        return false;
    }
    const BoundaryComponent& arc = x.kind == ComponentKind::Arc ? x : y;
    const BoundaryComponent& seg = x.kind == ComponentKind::Arc ? y : x;
    Vec2 hits[2];
    int n = circle_segment_hits(arc.center, arc.radius, seg.a, seg.b, hits);
    for (int i = 0; i < n; ++i) {
        if (on_arc_span(arc, hits[i]) && !is_shared_endpoint(hits[i])) return true;
    }
    return false;
}

// Green's theorem signed area contribution of one traversed piece.
double signed_area_piece(const BoundaryComponent& c) {
    if (c.kind == ComponentKind::Segment) return 0.5 * cross(c.a, c.b);
    double t0 = c.angle0, t1 = c.angle0 + c.sweep;
    double term = c.radius * (c.center.x * (std::sin(t1) - std::sin(t0)) -
                              c.center.y * (std::cos(t1) - std::cos(t0))) +
                  c.radius * c.radius * c.sweep;
    return 0.5 * term;
}

}  // namespace

// ---- build_table -------------------------------------------------------------

Table build_table(const TableSpec& spec) {
    Table t;
    t.ambient = spec.ambient;
    t.rect_w = spec.rect_w;
    t.rect_h = spec.rect_h;

    if (spec.pieces.empty()) fail(Err::BadTable, "table has no components");
    if (spec.ambient == Ambient::Torus && (spec.rect_w <= 0.0 || spec.rect_h <= 0.0))
        fail(Err::BadTable, "torus table requires a positive fundamental rectangle");

    for (const TableSpec::Piece& p : spec.pieces) {
        BoundaryComponent c;
        c.kind = p.kind;
        c.material = true;
        if (p.kind == ComponentKind::Segment) {
            c.a = p.seg.a;
            c.b = p.seg.b;
            if (dist(c.a, c.b) <= kJunctionTol) fail(Err::BadTable, "degenerate segment");
        } else {
            if (p.arc.radius <= 0.0) fail(Err::BadTable, "arc with non-positive radius");
            if (!p.arc.convex_inward)
                fail(Err::NonConvexArc, "arc declared focusing (convex_inward = false)");
            c.center = p.arc.center;
            c.radius = p.arc.radius;
            c.angle0 = p.arc.from_angle;
            double sweep = p.arc.to_angle - p.arc.from_angle;
            if (sweep == 0.0) sweep = -kTwoPi;  // equal angles denote the full circle
            if (std::abs(sweep) > kTwoPi + 1e-12) fail(Err::BadTable, "arc sweep exceeds 2*pi");
            c.sweep = sweep;
            if (c.sweep > 0.0)
                fail(Err::NonConvexArc,
                     "focusing arc detected (center on the domain side of the boundary)");
            t.has_arc = true;
        }
        t.components.push_back(c);
    }
    t.n_material = static_cast<int>(t.components.size());

    // Chain the material components by endpoint coincidence and require closure.
    {
        std::vector<bool> used(t.components.size(), false);
        for (size_t start = 0; start < t.components.size(); ++start) {
            if (used[start]) continue;
            size_t cur = start;
            used[start] = true;
            while (true) {
                Vec2 e = t.components[cur].end();
                if (dist(e, t.components[start].start()) <= kJunctionTol) break;  // closed
                bool found = false;
                for (size_t j = 0; j < t.components.size(); ++j) {
                    if (used[j]) continue;
                    if (dist(e, t.components[j].start()) <= kJunctionTol) {
                        used[j] = true;
                        cur = j;
                        found = true;
                        break;
                    }
                }
                if (!found)
                    fail(Err::OpenBoundaryChain,
                         "boundary chain does not close (dangling endpoint)");
            }
        }
    }

    // Chain orientation: the plane needs exactly one outer (positive-area) chain;
    // torus obstacles must all be negatively oriented so Q stays on the left.
    {
        // Group chains again, accumulating area.
        std::vector<int> chain_of(t.components.size(), -1);
        int n_chains = 0;
        for (size_t start = 0; start < t.components.size(); ++start) {
            if (chain_of[start] >= 0) continue;
            int id = n_chains++;
            size_t cur = start;
            chain_of[start] = id;
            while (true) {
                Vec2 e = t.components[cur].end();
                if (dist(e, t.components[start].start()) <= kJunctionTol) break;
                for (size_t j = 0; j < t.components.size(); ++j) {
                    if (chain_of[j] >= 0) continue;
                    if (dist(e, t.components[j].start()) <= kJunctionTol) {
                        chain_of[j] = id;
                        cur = j;
                        break;
                    }
                }
            }
        }
        std::vector<double> area(static_cast<size_t>(n_chains), 0.0);
        for (size_t i = 0; i < t.components.size(); ++i)
            area[static_cast<size_t>(chain_of[i])] += signed_area_piece(t.components[i]);
        int positive = 0;
        for (double a : area)
            if (a > 0.0) ++positive;
        if (t.ambient == Ambient::Plane) {
            if (positive != 1)
                fail(Err::BadTable,
                     "plane table needs exactly one outer chain traversed counterclockwise");
        } else {
            if (positive != 0)
                fail(Err::BadTable, "torus obstacles must be traversed clockwise");
        }
    }

    // Pairwise overlap rejection (shared endpoints excluded).
    for (size_t i = 0; i < t.components.size(); ++i) {
        for (size_t j = i + 1; j < t.components.size(); ++j) {
            if (components_overlap(t.components[i], t.components[j]))
                fail(Err::OverlappingComponents, "boundary components intersect");
        }
    }

    // Torus tables: material geometry must stay strictly inside the rectangle.
    if (t.ambient == Ambient::Torus) {
        auto inside = [&](const Vec2& p) {
            return p.x > 1e-12 && p.x < t.rect_w - 1e-12 && p.y > 1e-12 && p.y < t.rect_h - 1e-12;
        };
        for (const BoundaryComponent& c : t.components) {
            bool ok = inside(c.start()) && inside(c.end());
            if (c.kind == ComponentKind::Arc) {
                for (double axis : {0.0, 0.5 * M_PI, M_PI, 1.5 * M_PI}) {
                    Vec2 p = c.center + c.radius * unit_from_angle(axis);
                    if (on_arc_span(c, p)) ok = ok && inside(p);
                }
            }
            if (!ok)
                fail(Err::BadTable, "material component touches or exits the fundamental rectangle");
        }
    }

    // Append transparent walls (bottom, right, top, left; Q = rectangle interior on the left).
    if (t.ambient == Ambient::Torus) {
        double w = t.rect_w, h = t.rect_h;
        const Vec2 pts[5] = {{0, 0}, {w, 0}, {w, h}, {0, h}, {0, 0}};
        for (int i = 0; i < 4; ++i) {
            BoundaryComponent wall;
            wall.kind = ComponentKind::Segment;
            wall.material = false;
            wall.a = pts[i];
            wall.b = pts[i + 1];
            t.components.push_back(wall);
        }
    }

    // Arc-length offsets.
    double off = 0.0;
    for (size_t i = 0; i < t.components.size(); ++i) {
        t.components[i].r_offset = off;
        off += t.components[i].length();
        if (static_cast<int>(i) < t.n_material) t.material_length = off;
    }
    t.total_length = off;

    // Corners: junctions whose tangents genuinely turn.  Smooth closures (full
    // circles, tangent-continuous joins) are not corners.
    {
        auto add_corner = [&](int prev, int next, bool transparent) {
            const BoundaryComponent& cp = t.components[static_cast<size_t>(prev)];
            const BoundaryComponent& cn = t.components[static_cast<size_t>(next)];
            Vec2 tp = cp.tangent_at(cp.length());
            Vec2 tn = cn.tangent_at(0.0);
            double turn = std::atan2(cross(tp, tn), dot(tp, tn));
            if (std::abs(turn) <= kCornerTurnTol) return;
            Corner c;
            c.q = cn.start();
            c.comp_prev = prev;
            c.comp_next = next;
            c.turn_angle = turn;
            c.transparent = transparent;
            t.corners.push_back(c);
        };
        for (int i = 0; i < static_cast<int>(t.components.size()); ++i) {
            bool walls = i >= t.n_material;
            Vec2 e = t.components[static_cast<size_t>(i)].end();
            for (int j = 0; j < static_cast<int>(t.components.size()); ++j) {
                if (j == i) continue;
                if ((j >= t.n_material) != walls) continue;
                if (dist(e, t.components[static_cast<size_t>(j)].start()) <= kJunctionTol)
                    add_corner(i, j, walls);
            }
        }
    }

    return t;
}

// ---- JSON table descriptions ---------------------------------------------------

namespace {

using nlohmann::json;

Vec2 vec_from(const json& j, const char* what) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
        fail(Err::Parse, std::string(what) + ": expected [x, y]");
    return {j[0].get<double>(), j[1].get<double>()};
}

}  // namespace

Table parse_table(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        fail(Err::Parse, std::string("table description is not valid JSON: ") + e.what());
    }
    TableSpec spec;
    std::string ambient = j.value("ambient", "plane");
    if (ambient == "plane") {
        spec.ambient = Ambient::Plane;
    } else if (ambient == "torus") {
        spec.ambient = Ambient::Torus;
        if (!j.contains("rectangle")) fail(Err::Parse, "torus table missing \"rectangle\"");
        Vec2 wh = vec_from(j["rectangle"], "rectangle");
        spec.rect_w = wh.x;
        spec.rect_h = wh.y;
    } else {
        fail(Err::Parse, "ambient must be \"plane\" or \"torus\"");
    }
    if (!j.contains("components") || !j["components"].is_array())
        fail(Err::Parse, "table missing \"components\" array");
    for (const json& c : j["components"]) {
        TableSpec::Piece p;
        std::string type = c.value("type", "");
        if (type == "segment") {
            p.kind = ComponentKind::Segment;
            p.seg.a = vec_from(c.at("a"), "segment a");
            p.seg.b = vec_from(c.at("b"), "segment b");
        } else if (type == "arc") {
            p.kind = ComponentKind::Arc;
            p.arc.center = vec_from(c.at("center"), "arc center");
            p.arc.radius = c.at("radius").get<double>();
            p.arc.from_angle = c.at("from_angle").get<double>();
            p.arc.to_angle = c.at("to_angle").get<double>();
            p.arc.convex_inward = c.value("convex_inward", true);
        } else {
            fail(Err::Parse, "component type must be \"segment\" or \"arc\"");
        }
        spec.pieces.push_back(p);
    }
    return build_table(spec);
}

Table load_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(Err::Io, "cannot open table file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_table(ss.str());
}

std::string table_to_json(const Table& table) {
    json j;
    j["ambient"] = table.ambient == Ambient::Plane ? "plane" : "torus";
    if (table.ambient == Ambient::Torus) j["rectangle"] = {table.rect_w, table.rect_h};
    json comps = json::array();
    for (int i = 0; i < table.n_material; ++i) {
        const BoundaryComponent& c = table.comp(i);
        json e;
        if (c.kind == ComponentKind::Segment) {
            e["type"] = "segment";
            e["a"] = {c.a.x, c.a.y};
            e["b"] = {c.b.x, c.b.y};
        } else {
            e["type"] = "arc";
            e["center"] = {c.center.x, c.center.y};
            e["radius"] = c.radius;
            e["from_angle"] = c.angle0;
            e["to_angle"] = c.angle0 + c.sweep;
            e["convex_inward"] = true;
        }
        comps.push_back(e);
    }
    j["components"] = comps;
    return j.dump(2);
}

}  // namespace sdb
