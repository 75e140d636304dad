#include "dynamics.hpp"

#include <algorithm>
#include <cmath>

namespace sdb {

namespace {

constexpr double kTwoPi = 2.0 * M_PI;

double mod_pos(double x, double m) {
    double r = std::fmod(x, m);
    return r < 0.0 ? r + m : r;
}

double wrap_angle(double a) {
    double r = std::fmod(a, kTwoPi);
    if (r <= -M_PI) r += kTwoPi;
    if (r > M_PI) r -= kTwoPi;
    return r;
}

}  // namespace

const char* event_class_name(EventClass c) {
    switch (c) {
        case EventClass::Regular: return "regular";
        case EventClass::Tangential: return "tangential";
        case EventClass::Corner: return "corner";
        case EventClass::Transparent: return "transparent";
    }
    return "?";
}

Vec2 reflect(const Vec2& v, const Vec2& n) { return v - 2.0 * dot(n, v) * n; }

double phi_of(const Vec2& v, const Vec2& n) { return std::atan2(cross(n, v), dot(n, v)); }

Vec2 velocity_from_phi(const Vec2& n, double phi) { return rotate(n, phi); }

FlowPoint coord_to_flow(const Table& table, const Coord& m) {
    double s;
    int i = table.component_at(m.r, &s);
    const BoundaryComponent& c = table.comp(i);
    return {c.point_at(s), velocity_from_phi(c.normal_at(s), m.phi)};
}

Coord flow_to_coord(const Table& table, const Vec2& q, const Vec2& v, double tol) {
    double d;
    double r = table.locate(q, &d);
    if (d > tol) fail(Err::BadArgument, "flow_to_coord: point is not on the boundary");
    Coord m;
    m.r = r;
    m.component = table.component_at(r, nullptr);
    m.phi = phi_of(v, table.normal_at_any(r));
    return m;
}

Coord involution(const Table& table, const Coord& m) {
    double s;
    int i = table.component_at(m.r, &s);
    if (table.comp(i).material) return {i, m.r, -m.phi};
    // Transparent crossing: the reversed orbit re-enters through the sister wall at
    // the identified point; with both walls traversed leaving Q on the left the
    // local coordinate reflects and phi is preserved.
    int j = table.sister_wall(i);
    const BoundaryComponent& w = table.comp(j);
    double s2 = w.length() - s;
    return {j, w.r_offset + s2, m.phi};
}

// ---- raycast --------------------------------------------------------------------

std::optional<RayHit> raycast(const Table& table, const Vec2& origin, const Vec2& dir,
                              double t_min) {
    std::optional<RayHit> best;
    for (size_t i = 0; i < table.components.size(); ++i) {
        const BoundaryComponent& c = table.components[i];
        if (c.kind == ComponentKind::Segment) {
            Vec2 ab = c.b - c.a;
            double den = cross(dir, ab);
            if (std::abs(den) < 1e-15) continue;  // parallel: no transversal hit
            Vec2 ao = c.a - origin;
            double t = cross(ao, ab) / den;
            double u = cross(ao, dir) / den;
            double len = norm(ab);
            if (t <= t_min || u < -kCornerHitTol / len || u > 1.0 + kCornerHitTol / len) continue;
            if (best && t >= best->t) continue;
            RayHit h;
            h.t = t;
            h.component = static_cast<int>(i);
            h.s_local = std::clamp(u, 0.0, 1.0) * len;
            h.point = c.point_at(h.s_local);
            h.normal = c.normal_at(h.s_local);
            h.cos_incidence = -dot(dir, h.normal);
            best = h;
        } else {
            // Places a hit on the arc at ray parameter t and boundary point p if p
            // falls on the arc's span; `grazing` forces an exact-tangency record.
            auto place_arc_hit = [&](double t, const Vec2& p, bool grazing) {
                double theta = std::atan2(p.y - c.center.y, p.x - c.center.x);
                double rel = wrap_angle(theta - c.angle0);
                double adv = c.sweep >= 0.0 ? mod_pos(rel, kTwoPi) : -mod_pos(-rel, kTwoPi);
                double s = std::abs(adv) * c.radius;
                double len = c.length();
                if (std::abs(adv) > std::abs(c.sweep)) {
                    // Allow junction-tolerance spill at the ends of partial arcs.
                    double over = (std::abs(adv) - std::abs(c.sweep)) * c.radius;
                    double under = (kTwoPi - std::abs(adv)) * c.radius;
                    if (over <= kCornerHitTol) {
                        s = len;
                    } else if (under <= kCornerHitTol) {
                        s = 0.0;
                    } else {
                        return false;
                    }
                }
                RayHit h;
                h.t = t;
                h.component = static_cast<int>(i);
                h.s_local = std::min(s, len);
                h.point = p;
                h.normal = c.normal_at(h.s_local);
                h.cos_incidence = grazing ? 0.0 : -dot(dir, h.normal);
                best = h;
                return true;
            };
            // |origin + t dir - center|^2 = radius^2 with the stable quadratic form.
            Vec2 oc = origin - c.center;
            double b = dot(oc, dir);
            double cc = norm2(oc) - c.radius * c.radius;
            double disc = b * b - cc;
            if (disc < 0.0) {
                // The discriminant of an exactly tangent ray is pure rounding
                // noise, so a closest approach within the grazing window still
                // counts as a touch; otherwise singular structure would be lost
                // to the sign of that noise.
                double t_ca = -b;
                if (t_ca <= t_min || (best && t_ca >= best->t)) continue;
                Vec2 p_ca = origin + t_ca * dir;
                double off = norm(p_ca - c.center);
                if (off - c.radius > kGrazeTol || off <= 0.0) continue;
                Vec2 touch = c.center + (p_ca - c.center) * (c.radius / off);
                place_arc_hit(t_ca, touch, true);
                continue;
            }
            double sq = std::sqrt(disc);
            double roots[2];
            if (b >= 0.0) {
                roots[0] = -b - sq;
                roots[1] = sq == 0.0 ? roots[0] : cc / roots[0];
            } else {
                roots[1] = -b + sq;
                roots[0] = sq == 0.0 ? roots[1] : cc / roots[1];
            }
            if (roots[0] > roots[1]) std::swap(roots[0], roots[1]);
            for (double t : {roots[0], roots[1]}) {
                if (t <= t_min) continue;
                if (best && t >= best->t) break;
                if (place_arc_hit(t, origin + t * dir, false)) break;
            }
        }
    }
    return best;
}

// ---- events ---------------------------------------------------------------------

CollisionEvent first_event(const Table& table, const FlowPoint& x) {
    std::optional<RayHit> hit = raycast(table, x.q, x.v);
    if (!hit) fail(Err::OutsideDomain, "free flight escaped the table");

    CollisionEvent ev;
    ev.t = hit->t;
    ev.v_in = x.v;
    ev.q = hit->point;
    ev.cos_phi = std::abs(hit->cos_incidence);

    const BoundaryComponent& c = table.comp(hit->component);
    double r_global = c.r_offset + hit->s_local;
    int corner = table.corner_at(r_global);

    if (corner >= 0) {
        const Corner& cc = table.corners[static_cast<size_t>(corner)];
        ev.cls = EventClass::Corner;
        ev.corner_id = corner;
        const BoundaryComponent& cp = table.comp(cc.comp_prev);
        const BoundaryComponent& cn = table.comp(cc.comp_next);
        ev.corner_normal_prev = cp.normal_at(cp.length());
        ev.corner_normal_next = cn.normal_at(0.0);
        ev.v_out = x.v;
        ev.coord.component = hit->component;
        ev.coord.r = r_global;
        // Normal is undefined at the corner; report phi against the branch bisector.
        Vec2 bis = normalized(ev.corner_normal_prev + ev.corner_normal_next);
        ev.coord.phi = phi_of(x.v, bis);
        return ev;
    }

    if (!c.material) {
        // Transparent crossing: wrap to the sister wall and record the re-entry.
        ev.cls = EventClass::Transparent;
        int j = table.sister_wall(hit->component);
        const BoundaryComponent& w = table.comp(j);
        double s2 = w.length() - hit->s_local;
        Vec2 entry = w.point_at(s2);
        ev.wrap_shift = entry - hit->point;
        ev.q = entry;
        ev.v_out = x.v;
        ev.coord.component = j;
        ev.coord.r = w.r_offset + s2;
        ev.coord.phi = phi_of(x.v, w.normal_at(s2));
        return ev;
    }

    ev.coord.component = hit->component;
    ev.coord.r = r_global;
    if (ev.cos_phi < kTangencyTol) {
        ev.cls = EventClass::Tangential;
        ev.v_out = x.v;  // grazing contact: the reflection degenerates to identity
    } else {
        ev.cls = EventClass::Regular;
        ev.v_out = reflect(x.v, hit->normal);
    }
    ev.coord.phi = phi_of(ev.v_out, hit->normal);
    return ev;
}

CollisionEvent collision_map(const Table& table, const Coord& m) {
    return first_event(table, coord_to_flow(table, m));
}

std::vector<CollisionEvent> simulate(const Table& table, const Coord& m, int n_events) {
    std::vector<CollisionEvent> out;
    out.reserve(static_cast<size_t>(std::max(0, n_events)));
    Coord cur = m;
    double t_acc = 0.0;
    for (int k = 0; k < n_events; ++k) {
        CollisionEvent ev = collision_map(table, cur);
        t_acc += ev.t;
        ev.t = t_acc;
        out.push_back(ev);
        if (ev.cls == EventClass::Corner) break;
        cur = ev.coord;
    }
    return out;
}

FlowPoint flow(const Table& table, const FlowPoint& x, double t, bool* hit_corner) {
    if (hit_corner) *hit_corner = false;
    FlowPoint cur = x;
    double remaining = t;
    for (int guard = 0; guard < (1 << 22); ++guard) {
        CollisionEvent ev = first_event(table, cur);
        if (ev.t >= remaining) return {cur.q + remaining * cur.v, cur.v};
        if (ev.cls == EventClass::Corner) {
            if (hit_corner) *hit_corner = true;
            return {ev.q, cur.v};
        }
        remaining -= ev.t;
        cur = {ev.q, ev.v_out};
    }
    fail(Err::Internal, "flow: event budget exhausted");
}

bool material_map(const Table& table, const Coord& m, Coord* out, int max_events,
                  CollisionEvent* last_event) {
    Coord cur = m;
    for (int k = 0; k < max_events; ++k) {
        CollisionEvent ev = collision_map(table, cur);
        if (ev.cls == EventClass::Corner) return false;
        if (ev.cls != EventClass::Transparent) {
            if (out) *out = ev.coord;
            if (last_event) *last_event = ev;
            return true;
        }
        cur = ev.coord;
    }
    return false;
}

Coord sample_coord(const Table& table, Rng& rng) {
    for (int guard = 0; guard < 1000; ++guard) {
        Coord m;
        m.r = rng.uniform(0.0, table.material_length);
        m.phi = rng.cosine_phi();
        m.component = table.component_at(m.r, nullptr);
        if (std::abs(std::cos(m.phi)) < kTangencyTol) continue;
        if (table.corner_at(m.r) >= 0) continue;
        return m;
    }
    fail(Err::Internal, "sample_coord: rejection loop failed");
}

}  // namespace sdb
