#include "singularity.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>

#include "errors.hpp"

namespace sdb {

namespace {

// ---- chain navigation --------------------------------------------------------------

struct ChainLink {
    int comp = -1;    // adjacent material component (may equal the component itself)
    int corner = -1;  // index into Table::corners when the junction turns
};

struct ChainNav {
    std::vector<ChainLink> next, prev;
};

ChainNav build_nav(const Table& table) {
    ChainNav nav;
    nav.next.assign(static_cast<size_t>(table.n_material), ChainLink{});
    nav.prev.assign(static_cast<size_t>(table.n_material), ChainLink{});
    for (int i = 0; i < table.n_material; ++i) {
        Vec2 e = table.comp(i).end();
        for (int j = 0; j < table.n_material; ++j) {
            if (dist(e, table.comp(j).start()) < 1e-9) {
                nav.next[static_cast<size_t>(i)].comp = j;
                nav.prev[static_cast<size_t>(j)].comp = i;
                for (size_t c = 0; c < table.corners.size(); ++c) {
                    const Corner& cr = table.corners[c];
                    if (!cr.transparent && cr.comp_prev == i && cr.comp_next == j) {
                        nav.next[static_cast<size_t>(i)].corner = static_cast<int>(c);
                        nav.prev[static_cast<size_t>(j)].corner = static_cast<int>(c);
                    }
                }
                break;
            }
        }
    }
    return nav;
}

double table_scale(const Table& table) {
    double lo_x = std::numeric_limits<double>::max(), hi_x = -lo_x;
    double lo_y = lo_x, hi_y = hi_x;
    for (int i = 0; i < table.n_material; ++i) {
        const BoundaryComponent& c = table.comp(i);
        int probes = 9;
        for (int k = 0; k <= probes; ++k) {
            Vec2 p = c.point_at(c.length() * k / probes);
            lo_x = std::min(lo_x, p.x);
            hi_x = std::max(hi_x, p.x);
            lo_y = std::min(lo_y, p.y);
            hi_y = std::max(hi_y, p.y);
        }
    }
    if (table.ambient == Ambient::Torus) {
        hi_x = std::max(hi_x, table.rect_w);
        hi_y = std::max(hi_y, table.rect_h);
        lo_x = std::min(lo_x, 0.0);
        lo_y = std::min(lo_y, 0.0);
    }
    return std::max(hi_x - lo_x, hi_y - lo_y);
}

// Continue a ray across a transparent wall: the identified point on the sister
// wall, using the same parametrization as the involution (s -> length - s).
Vec2 wall_continue(const Table& table, int wall_comp, double s_local) {
    int j = table.sister_wall(wall_comp);
    const BoundaryComponent& sister = table.comp(j);
    return sister.point_at(sister.length() - s_local);
}

// ---- link signature ----------------------------------------------------------------

struct LinkSig {
    bool ok = false;
    Obstruction why = Obstruction::None;
    int comp = -1;
    int crossings = 0;
    double s_land = 0.0;
};

LinkSig link_sig(const Table& table, const Vec2& origin, const Vec2& v) {
    LinkSig out;
    Vec2 o = origin;
    for (int guard = 0; guard < 4096; ++guard) {
        std::optional<RayHit> hit = raycast(table, o, v);
        if (!hit) {
            out.why = Obstruction::LinkBranch;
            return out;
        }
        const BoundaryComponent& c = table.comp(hit->component);
        if (!c.material) {
            ++out.crossings;
            o = wall_continue(table, hit->component, hit->s_local);
            continue;
        }
        out.comp = hit->component;
        out.s_land = hit->s_local;
        double r = c.r_offset + hit->s_local;
        if (table.corner_at(r) >= 0) {
            out.why = Obstruction::LinkCorner;
            return out;
        }
        if (hit->cos_incidence < kTangencyTol) {
            out.why = Obstruction::LinkTangency;
            return out;
        }
        out.ok = true;
        return out;
    }
    out.why = Obstruction::LinkBranch;
    return out;
}

// Landing equivalence for the beam: same component and no long jump along it.
// A jump across a smooth junction onto the adjacent component also counts as the
// same branch.
bool same_branch(const Table& table, const ChainNav& nav, const LinkSig& ref,
                 const LinkSig& cur, const LinkSig& prev) {
    if (!cur.ok) return false;
    if (cur.comp == ref.comp) {
        double len = table.comp(ref.comp).length();
        double jump = std::abs(cur.s_land - prev.s_land);
        if (prev.comp != cur.comp) return true;  // just walked over a junction
        if (table.comp(ref.comp).length() > 0 &&
            dist(table.comp(ref.comp).start(), table.comp(ref.comp).end()) < 1e-9) {
            jump = std::min(jump, len - jump);  // closed component: s wraps
        }
        return jump < 0.45 * len;
    }
    // smooth-junction spillover
    const ChainLink& nxt = nav.next[static_cast<size_t>(ref.comp)];
    const ChainLink& prv = nav.prev[static_cast<size_t>(ref.comp)];
    if (nxt.comp == cur.comp && nxt.corner < 0) return true;
    if (prv.comp == cur.comp && prv.corner < 0) return true;
    return false;
}

// ---- anchor walk -------------------------------------------------------------------

struct AnchorPos {
    int comp = -1;
    double s = 0.0;
    bool corner_stop = false;
    double walked = 0.0;  // arc length actually covered
};

AnchorPos anchor_at(const Table& table, const ChainNav& nav, int comp0, double s0,
                    double signed_t) {
    AnchorPos pos;
    pos.comp = comp0;
    pos.s = s0;
    double left = std::abs(signed_t);
    int dir = signed_t >= 0 ? 1 : -1;
    for (int guard = 0; guard < 4096 && left > 0; ++guard) {
        const BoundaryComponent& c = table.comp(pos.comp);
        double len = c.length();
        double room = dir > 0 ? len - pos.s : pos.s;
        if (left <= room) {
            pos.s += dir * left;
            pos.walked += left;
            return pos;
        }
        pos.s = dir > 0 ? len : 0.0;
        pos.walked += room;
        left -= room;
        const ChainLink& link =
            dir > 0 ? nav.next[static_cast<size_t>(pos.comp)] : nav.prev[static_cast<size_t>(pos.comp)];
        if (link.comp < 0 || link.corner >= 0) {
            pos.corner_stop = true;
            return pos;
        }
        pos.comp = link.comp;
        pos.s = dir > 0 ? 0.0 : table.comp(link.comp).length();
    }
    if (left > 0) pos.corner_stop = true;  // exhausted guard: treat as blocked
    return pos;
}

struct TubeParams {
    double step0, step_max, bisect_tol, cap;
};

TubeParams tube_params(const Table& table) {
    double scale = table_scale(table);
    return {2e-4 * scale, 2e-3 * scale, 1e-9 * scale, 2.0 * table.total_length};
}

struct SideProbe {
    bool ok = false;
    Obstruction why = Obstruction::None;
    double s_perp = 0.0;
    LinkSig link;
};

SideProbe probe_anchor(const Table& table, const ChainNav& nav, const Vec2& q0,
                       const Vec2& v, const LinkSig& sig0, const LinkSig& prev_link,
                       int comp0, double s0, double signed_t) {
    SideProbe out;
    AnchorPos pos = anchor_at(table, nav, comp0, s0, signed_t);
    if (pos.corner_stop) {
        out.why = Obstruction::AnchorCorner;
        return out;
    }
    const BoundaryComponent& c = table.comp(pos.comp);
    Vec2 qa = c.point_at(pos.s);
    out.s_perp = std::abs(cross(v, qa - q0));
    if (dot(v, c.normal_at(pos.s)) < kTangencyTol) {
        out.why = Obstruction::AnchorTangency;
        return out;
    }
    out.link = link_sig(table, qa, v);
    if (!out.link.ok || out.link.crossings != sig0.crossings ||
        !same_branch(table, nav, sig0, out.link, prev_link)) {
        if (out.link.why != Obstruction::None)
            out.why = out.link.why;
        else if (out.link.ok && out.link.crossings != sig0.crossings)
            out.why = Obstruction::LinkTangency;
        else
            out.why = Obstruction::LinkBranch;
        return out;
    }
    out.ok = true;
    return out;
}

TubeSide march_side(const Table& table, const ChainNav& nav, const TubeParams& par,
                    const Vec2& q0, const Vec2& v, const LinkSig& sig0, int comp0,
                    double s0, int dir, double stop_at_perp) {
    TubeSide side;
    double t_good = 0.0;
    LinkSig last_link = sig0;
    double t = 0.0;
    double dt = par.step0;
    double t_bad = -1.0;
    Obstruction why = Obstruction::None;
    while (t < par.cap) {
        double t_next = t + dt;
        SideProbe p = probe_anchor(table, nav, q0, v, sig0, last_link, comp0, s0,
                                   dir * t_next);
        if (p.ok) {
            t = t_next;
            t_good = t_next;
            last_link = p.link;
            side.radius = p.s_perp;
            if (stop_at_perp > 0 && p.s_perp >= stop_at_perp) {
                side.obstruction = Obstruction::None;
                return side;
            }
            dt = std::min(dt * 1.6, par.step_max);
            continue;
        }
        if (p.why == Obstruction::AnchorCorner) {
            // The walk stops exactly at the corner; no bisection is needed.
            AnchorPos pos = anchor_at(table, nav, comp0, s0, dir * t_next);
            Vec2 qa = table.comp(pos.comp).point_at(pos.s);
            side.radius = std::abs(cross(v, qa - q0));
            side.obstruction = Obstruction::AnchorCorner;
            return side;
        }
        t_bad = t_next;
        why = p.why;
        break;
    }
    if (t_bad < 0) {
        side.obstruction = Obstruction::None;  // capped
        return side;
    }
    // Bisect the obstruction boundary in anchor arc length.
    double lo = t_good, hi = t_bad;
    while (hi - lo > par.bisect_tol) {
        double mid = 0.5 * (lo + hi);
        SideProbe p = probe_anchor(table, nav, q0, v, sig0, last_link, comp0, s0,
                                   dir * mid);
        if (p.ok) {
            lo = mid;
            last_link = p.link;
        } else {
            hi = mid;
            if (p.why != Obstruction::None) why = p.why;
        }
    }
    AnchorPos pos = anchor_at(table, nav, comp0, s0, dir * lo);
    Vec2 qa = table.comp(pos.comp).point_at(pos.s);
    side.radius = std::abs(cross(v, qa - q0));
    side.obstruction = why;
    return side;
}

struct TubeBase {
    Vec2 q0, v;
    int comp = -1;
    double s = 0.0;
    LinkSig sig0;
};

// Validates x and resolves the base link.  Returns false when the link itself is
// singular (z = 0), filling `why`.
bool tube_base(const Table& table, const Coord& x, TubeBase* base, Obstruction* why) {
    if (!std::isfinite(x.r) || !std::isfinite(x.phi) ||
        x.component >= static_cast<int>(table.components.size()))
        fail(Err::BadArgument, "tube radius requires a valid coordinate");
    // An unresolved component (< 0) is looked up from r, matching the rest of
    // the chart-facing entry points.
    int comp = x.component;
    double s = 0.0;
    if (comp < 0) {
        comp = table.component_at(x.r, &s);
    } else {
        const BoundaryComponent& given = table.comp(comp);
        s = x.r - given.r_offset;
        if (s < -kCornerHitTol || s > given.length() + kCornerHitTol)
            fail(Err::BadArgument, "coordinate r does not lie on its component");
    }
    if (table.is_transparent(comp))
        fail(Err::BadArgument, "tube radius requires a material coordinate");
    if (std::cos(x.phi) < kTangencyTol) fail(Err::SingularBase, "tangential base coordinate");
    const BoundaryComponent& c = table.comp(comp);
    s = std::clamp(s, 0.0, c.length());
    base->comp = comp;
    base->s = s;
    base->q0 = c.point_at(s);
    base->v = velocity_from_phi(c.normal_at(s), x.phi);
    base->sig0 = link_sig(table, base->q0, base->v);
    if (!base->sig0.ok) {
        *why = base->sig0.why;
        return false;
    }
    return true;
}

}  // namespace

TubeResult z_tub_info(const Table& table, const Coord& x) {
    TubeResult out;
    TubeBase base;
    Obstruction why = Obstruction::None;
    if (!tube_base(table, x, &base, &why)) {
        out.pos.obstruction = why;
        out.neg.obstruction = why;
        return out;
    }
    ChainNav nav = build_nav(table);
    TubeParams par = tube_params(table);
    out.pos = march_side(table, nav, par, base.q0, base.v, base.sig0, base.comp, base.s,
                         +1, 0.0);
    out.neg = march_side(table, nav, par, base.q0, base.v, base.sig0, base.comp, base.s,
                         -1, 0.0);
    out.z = std::min(out.pos.radius, out.neg.radius);
    return out;
}

double z_tub(const Table& table, const Coord& x) { return z_tub_info(table, x).z; }

bool z_tub_at_least(const Table& table, const Coord& x, double bound) {
    if (bound <= 0) return true;
    TubeBase base;
    Obstruction why = Obstruction::None;
    if (!tube_base(table, x, &base, &why)) return false;
    ChainNav nav = build_nav(table);
    TubeParams par = tube_params(table);
    par.step0 = std::clamp(bound / 6.0, 1e-7 * par.cap, par.step_max);
    for (int dir : {+1, -1}) {
        TubeSide side = march_side(table, nav, par, base.q0, base.v, base.sig0,
                                   base.comp, base.s, dir, bound);
        if (side.obstruction != Obstruction::None && side.radius < bound) return false;
        if (side.radius < bound && side.obstruction == Obstruction::None) {
            // capped before reaching the requested width; treat as satisfied
            continue;
        }
        if (side.radius < bound) return false;
    }
    return true;
}

// ---- singularity curves --------------------------------------------------------------

const char* sing_source_name(SingSource s) {
    switch (s) {
        case SingSource::ArcTangency: return "arc_tangency";
        case SingSource::Corner: return "corner";
        case SingSource::WallCorner: return "wall_corner";
    }
    return "?";
}

double SingCurve::chart_length() const {
    double acc = 0.0;
    for (size_t i = 1; i < pts.size(); ++i) {
        double dr = pts[i].r - pts[i - 1].r;
        double dphi = pts[i].phi - pts[i - 1].phi;
        acc += std::hypot(dr, dphi);
    }
    return acc;
}

namespace {

double chart_dist(const Table& table, const Coord& a, const Coord& b) {
    double dr = std::abs(a.r - b.r);
    dr = std::min(dr, table.total_length - dr);
    return std::hypot(dr, a.phi - b.phi);
}

void sample_polyline(std::vector<Coord>& pts, double r, double phi_lo, double phi_hi,
                     int comp, double resolution) {
    int n = std::max(2, static_cast<int>(std::ceil((phi_hi - phi_lo) / resolution)));
    for (int i = 0; i <= n; ++i) {
        Coord c;
        c.component = comp;
        c.r = r;
        c.phi = phi_lo + (phi_hi - phi_lo) * i / n;
        pts.push_back(c);
    }
}

}  // namespace

std::vector<SingCurve> s0_set(const Table& table, double resolution) {
    std::vector<SingCurve> out;
    const double half_pi = std::asin(1.0);
    for (int i = 0; i < table.n_material; ++i) {
        const BoundaryComponent& c = table.comp(i);
        if (c.kind != ComponentKind::Arc) continue;
        for (int sign = 0; sign < 2; ++sign) {
            SingCurve curve;
            curve.order = 0;
            curve.source = SingSource::ArcTangency;
            curve.source_id = i;
            curve.branch = sign;
            curve.closed = dist(c.start(), c.end()) < 1e-9;
            int n = std::max(2, static_cast<int>(std::ceil(c.length() / resolution)));
            for (int k = 0; k <= n; ++k) {
                Coord m;
                m.component = i;
                m.r = c.r_offset + c.length() * k / n;
                m.phi = sign == 0 ? half_pi : -half_pi;
                curve.pts.push_back(m);
            }
            out.push_back(std::move(curve));
        }
    }
    for (size_t j = 0; j < table.corners.size(); ++j) {
        const Corner& cr = table.corners[j];
        SingCurve curve;
        curve.order = 0;
        curve.source = cr.transparent ? SingSource::WallCorner : SingSource::Corner;
        curve.source_id = static_cast<int>(j);
        const BoundaryComponent& nxt = table.comp(cr.comp_next);
        sample_polyline(curve.pts, nxt.r_offset, -half_pi, half_pi, cr.comp_next,
                        resolution);
        out.push_back(std::move(curve));
        if (cr.transparent) {
            SingCurve twin;
            twin.order = 0;
            twin.source = SingSource::WallCorner;
            twin.source_id = static_cast<int>(j);
            twin.branch = 1;
            const BoundaryComponent& prv = table.comp(cr.comp_prev);
            sample_polyline(twin.pts, prv.r_offset + prv.length(), -half_pi, half_pi,
                            cr.comp_prev, resolution);
            out.push_back(std::move(twin));
        }
    }
    return out;
}

namespace {

int sig_code(int component, EventClass cls) {
    return component * 8 + static_cast<int>(cls);
}

}  // namespace

// n_steps backward steps from the arrival phase (q, w): the orbit arrives at q
// moving with w.  Emits the coordinate of the n-th previous collision.
OrbitTrace trace_back(const Table& table, Vec2 q, Vec2 w, int n_steps) {
    OrbitTrace out;
    Vec2 origin = q;
    for (int k = 0; k < n_steps;) {
        std::optional<RayHit> hit = raycast(table, origin, -w);
        if (!hit) return out;
        const BoundaryComponent& c = table.comp(hit->component);
        if (!c.material) {
            // The backward ray exits the rectangle exactly where the forward orbit
            // entered it, so the raw hit is already the recorded crossing.
            out.sig.push_back(sig_code(hit->component, EventClass::Transparent));
            out.coord.component = hit->component;
            out.coord.r = c.r_offset + hit->s_local;
            out.coord.phi = phi_of(w, hit->normal);
            origin = wall_continue(table, hit->component, hit->s_local);
            ++k;
            continue;
        }
        double r = c.r_offset + hit->s_local;
        if (table.corner_at(r) >= 0) return out;
        if (hit->cos_incidence < kTangencyTol) return out;
        out.sig.push_back(sig_code(hit->component, EventClass::Regular));
        out.coord.component = hit->component;
        out.coord.r = r;
        out.coord.phi = phi_of(w, hit->normal);
        origin = hit->point;
        w = reflect(w, hit->normal);
        ++k;
    }
    out.ok = true;
    return out;
}

// n_steps forward steps from the outgoing phase (q, v).
OrbitTrace trace_forward(const Table& table, Vec2 q, Vec2 v, int n_steps) {
    OrbitTrace out;
    FlowPoint fp{q, v};
    for (int k = 0; k < n_steps; ++k) {
        CollisionEvent ev;
        try {
            ev = first_event(table, fp);
        } catch (const SdbError&) {
            return out;
        }
        if (ev.cls == EventClass::Corner || ev.cls == EventClass::Tangential) return out;
        out.sig.push_back(sig_code(ev.coord.component, ev.cls));
        out.coord = ev.coord;
        fp = {ev.q, ev.v_out};
    }
    out.ok = true;
    return out;
}

RayProbe probe_material(const Table& table, const Vec2& q, const Vec2& d) {
    RayProbe out;
    Vec2 o = q;
    Vec2 offset;  // add to current-chart positions to lift them to the start chart
    for (int guard = 0; guard < 4096; ++guard) {
        std::optional<RayHit> hit = raycast(table, o, d);
        if (!hit) return out;
        out.t += hit->t;
        const BoundaryComponent& c = table.comp(hit->component);
        double r = c.r_offset + hit->s_local;
        if (!c.material && table.corner_at(r) < 0) {
            Vec2 entry = wall_continue(table, hit->component, hit->s_local);
            offset += hit->point - entry;
            ++out.crossings;
            o = entry;
            continue;
        }
        out.component = hit->component;
        out.s_land = hit->s_local;
        out.r = r;
        out.point = hit->point;
        out.point_lifted = hit->point + offset;
        out.normal = hit->normal;
        out.cos_incidence = hit->cos_incidence;
        out.corner_id = table.corner_at(r);
        out.tangential = c.material && hit->cos_incidence < kTangencyTol;
        out.ok = true;
        return out;
    }
    return out;
}

bool probe_branch_changed(const Table& table, const RayProbe& a, const RayProbe& b) {
    if (!b.ok || b.corner_id >= 0 || b.tangential) return true;
    if (a.component != b.component || a.crossings != b.crossings) return true;
    const BoundaryComponent& c = table.comp(a.component);
    double ds = std::abs(a.s_land - b.s_land);
    if (dist(c.start(), c.end()) < 1e-9) ds = std::min(ds, c.length() - ds);
    return ds > 0.45 * c.length();
}

Coord curve_point_at(const SingCurve& c, double along) {
    Coord pt = c.pts.front();
    double acc = 0.0;
    for (size_t k = 0; k + 1 < c.pts.size(); ++k) {
        double dr = c.pts[k + 1].r - c.pts[k].r;
        double dp = c.pts[k + 1].phi - c.pts[k].phi;
        double seg = std::hypot(dr, dp);
        if (acc + seg >= along || k + 2 == c.pts.size()) {
            double f = seg > 0.0 ? std::clamp((along - acc) / seg, 0.0, 1.0) : 0.0;
            pt = c.pts[k];
            pt.r += f * dr;
            pt.phi += f * dp;
            return pt;
        }
        acc += seg;
    }
    return pt;
}

namespace {

// ---- tracing S_n ---------------------------------------------------------------------

using TraceSample = OrbitTrace;

struct SeedFamily {
    SingSource source = SingSource::ArcTangency;
    int source_id = 0;
    double u0 = 0.0, u1 = 0.0;
    bool closed = false;
    std::function<TraceSample(double)> eval;
};

constexpr double kConeMargin = 1e-6;

// Exit corner of the rectangle identified with `c` for a ray leaving along d.
Vec2 diagonal_resume(const Table& table, const Vec2& c, const Vec2& d) {
    Vec2 r = c;
    if (d.x > 0 && c.x > table.rect_w * 0.5) r.x = 0;
    if (d.x < 0 && c.x < table.rect_w * 0.5) r.x = table.rect_w;
    if (d.y > 0 && c.y > table.rect_h * 0.5) r.y = 0;
    if (d.y < 0 && c.y < table.rect_h * 0.5) r.y = table.rect_h;
    return r;
}

std::vector<SeedFamily> seed_families(const Table& table, int order) {
    std::vector<SeedFamily> fams;
    int n_steps = std::abs(order);
    bool backward = order > 0;  // S_n (n > 0) pulls the seed phases back
    for (int i = 0; i < table.n_material; ++i) {
        const BoundaryComponent& c = table.comp(i);
        if (c.kind != ComponentKind::Arc) continue;
        for (int sgn = 0; sgn < 2; ++sgn) {
            SeedFamily f;
            f.source = SingSource::ArcTangency;
            f.source_id = i;
            f.u0 = 0.0;
            f.u1 = c.length();
            f.closed = dist(c.start(), c.end()) < 1e-9;
            double dir_sign = sgn == 0 ? 1.0 : -1.0;
            f.eval = [&table, i, dir_sign, n_steps, backward](double u) {
                const BoundaryComponent& comp = table.comp(i);
                Vec2 g = comp.point_at(u);
                Vec2 d = comp.tangent_at(u) * dir_sign;
                return backward ? trace_back(table, g, d, n_steps)
                                : trace_forward(table, g, d, n_steps);
            };
            fams.push_back(std::move(f));
        }
    }
    for (size_t j = 0; j < table.corners.size(); ++j) {
        const Corner& cr = table.corners[j];
        SeedFamily f;
        f.source = cr.transparent ? SingSource::WallCorner : SingSource::Corner;
        f.source_id = static_cast<int>(j);
        Vec2 lo_dir, q = cr.q;
        double width = 0.0;
        if (!cr.transparent) {
            // Interior cone: from the outgoing tangent of comp_next, CCW by
            // pi - turn, to the reversed incoming tangent of comp_prev.
            const BoundaryComponent& nxt = table.comp(cr.comp_next);
            lo_dir = nxt.tangent_at(0.0);
            width = std::asin(1.0) * 2.0 - cr.turn_angle;
        } else {
            // Exit cone of the rectangle corner: the quadrant opposite both
            // inward wall normals.
            const BoundaryComponent& prv = table.comp(cr.comp_prev);
            const BoundaryComponent& nxt = table.comp(cr.comp_next);
            Vec2 a = prv.normal_at(prv.length()) * -1.0;
            Vec2 b = nxt.normal_at(0.0) * -1.0;
            lo_dir = cross(a, b) > 0 ? a : b;
            width = std::asin(1.0);
        }
        double theta0 = std::atan2(lo_dir.y, lo_dir.x);
        f.u0 = theta0 + kConeMargin;
        f.u1 = theta0 + width - kConeMargin;
        if (f.u1 <= f.u0) continue;
        bool transparent = cr.transparent;
        f.eval = [&table, q, n_steps, backward, transparent](double theta) {
            Vec2 d = unit_from_angle(theta);
            if (backward) {
                // Arrival direction: -d for material corners (the orbit comes in
                // against an interior direction), +d for rectangle corners (the
                // orbit leaves the rectangle through the corner).
                Vec2 w = transparent ? d : d * -1.0;
                return trace_back(table, q, w, n_steps);
            }
            Vec2 start = transparent ? diagonal_resume(table, q, d) : q;
            return trace_forward(table, start, d, n_steps);
        };
        fams.push_back(std::move(f));
    }
    return fams;
}

bool compatible(const Table& table, const TraceSample& a, const TraceSample& b,
                double jump_cap) {
    if (!a.ok || !b.ok) return false;
    if (a.sig != b.sig) return false;
    return chart_dist(table, a.coord, b.coord) <= jump_cap;
}

void march_family(const Table& table, const SeedFamily& fam, int order,
                  double resolution, std::vector<SingCurve>& out) {
    double span = fam.u1 - fam.u0;
    double du0 = span / 2048.0;
    double du_min = span * 1e-8;
    double du_max = span / 128.0;
    double jump_cap = std::max(resolution * 16.0, 1e-6);

    int branch = 0;
    SingCurve curve;
    auto open_curve = [&]() {
        curve = SingCurve{};
        curve.order = order;
        curve.source = fam.source;
        curve.source_id = fam.source_id;
        curve.branch = branch;
    };
    auto close_curve = [&](const TraceSample& last) {
        if (!curve.pts.empty() &&
            chart_dist(table, curve.pts.back(), last.coord) > 1e-12)
            curve.pts.push_back(last.coord);
        if (curve.pts.size() >= 2) {
            out.push_back(curve);
            ++branch;
        }
        curve.pts.clear();
    };

    double u = fam.u0;
    TraceSample cur;
    // find the first live seed
    while (u <= fam.u1) {
        cur = fam.eval(u);
        if (cur.ok) break;
        u += du0;
    }
    if (!cur.ok) return;
    open_curve();
    curve.pts.push_back(cur.coord);
    Coord last_emitted = cur.coord;
    TraceSample first_sample = cur;
    double first_u = u;

    double du = du0;
    while (u < fam.u1) {
        double u_next = std::min(u + du, fam.u1);
        TraceSample nxt = fam.eval(u_next);
        if (compatible(table, cur, nxt, jump_cap)) {
            double moved = chart_dist(table, cur.coord, nxt.coord);
            u = u_next;
            cur = nxt;
            if (chart_dist(table, last_emitted, cur.coord) >= 0.45 * resolution) {
                curve.pts.push_back(cur.coord);
                last_emitted = cur.coord;
            }
            if (moved < 0.25 * resolution)
                du = std::min(du * 1.7, du_max);
            else if (moved > resolution)
                du = std::max(du * 0.6, du_min);
            continue;
        }
        if (du > du_min) {
            du = std::max(du * 0.5, du_min);
            continue;
        }
        // branch boundary: close and skip past the wall
        close_curve(cur);
        u = u_next;
        while (u < fam.u1) {
            TraceSample probe = fam.eval(u);
            if (probe.ok) {
                open_curve();
                cur = probe;
                curve.pts.push_back(cur.coord);
                last_emitted = cur.coord;
                break;
            }
            u += du0;
        }
        if (curve.pts.empty()) return;
        du = du0;
    }
    bool single = branch == 0;
    close_curve(cur);
    if (single && fam.closed && !out.empty()) {
        SingCurve& c = out.back();
        if (c.branch == 0 && c.source == fam.source && c.source_id == fam.source_id &&
            compatible(table, first_sample, cur, jump_cap) &&
            std::abs(first_u - fam.u0) < 2 * du0)
            c.closed = true;
    }
}

}  // namespace

std::vector<SingCurve> trace_singularities(const Table& table, int order,
                                           double resolution) {
    if (order == 0) return s0_set(table, resolution);
    if (resolution <= 0) fail(Err::BadArgument, "resolution must be positive");
    std::vector<SingCurve> out;
    for (const SeedFamily& fam : seed_families(table, order))
        march_family(table, fam, order, resolution, out);
    return out;
}

}  // namespace sdb
