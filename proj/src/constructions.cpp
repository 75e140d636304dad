#include "constructions.hpp"

#include "errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace sdb {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Rays whose crossing lies beyond this are embedded on the flat front; the
// circular formulas lose all precision out there anyway.
constexpr double kCrossingCap = 1e9;

bool comp_closed(const BoundaryComponent& c) { return dist(c.start(), c.end()) < 1e-9; }

double table_extent(const Table& t) {
    double xlo = kInf, xhi = -kInf, ylo = kInf, yhi = -kInf;
    auto eat = [&](const Vec2& p) {
        xlo = std::min(xlo, p.x);
        xhi = std::max(xhi, p.x);
        ylo = std::min(ylo, p.y);
        yhi = std::max(yhi, p.y);
    };
    for (const auto& c : t.components) {
        eat(c.start());
        eat(c.end());
        if (c.kind == ComponentKind::Arc) {
            eat(c.center + Vec2{c.radius, c.radius});
            eat(c.center - Vec2{c.radius, c.radius});
        }
    }
    return std::max({xhi - xlo, yhi - ylo, 1e-9});
}

// Rough interior test used only as a guard for off-boundary probe launches.
bool in_domain(const Table& table, const Vec2& q) {
    double d = 0.0;
    double r = table.locate(q, &d);
    if (d < 1e-12) return true;
    return dot(q - table.point_at(r), table.normal_at_any(r)) > 0.0;
}

double seg_dist(const Vec2& p, const Vec2& a, const Vec2& b, double* t_along = nullptr) {
    Vec2 ab = b - a;
    double len2 = norm2(ab);
    double s = len2 > 0.0 ? std::clamp(dot(p - a, ab) / len2, 0.0, 1.0) : 0.0;
    if (t_along) *t_along = s * std::sqrt(len2);
    return dist(p, a + s * ab);
}

}  // namespace

// ---- two-ray divergent front embedding ---------------------------------------------

FrontEmbedding embed_divergent_front(Vec2 q1, Vec2 v1, Vec2 q2, Vec2 v2, double eps0) {
    if (eps0 <= 0.0) fail(Err::BadArgument, "eps0 must be positive");
    if (std::abs(norm(v1) - 1.0) > 1e-9 || std::abs(norm(v2) - 1.0) > 1e-9)
        fail(Err::BadArgument, "front velocities must be unit vectors");
    if (dot(q1 - q2, v1 - v2) < 0.0) fail(Err::BadArgument, "rays are converging");

    FrontEmbedding out;
    double vx = cross(v1, v2);
    double t1 = 0.0, t2 = 0.0;
    bool flat = std::abs(vx) < 1e-15;
    if (!flat) {
        t1 = cross(q1 - q2, v2) / vx;
        t2 = cross(q1 - q2, v1) / vx;
        flat = std::abs(t1) > kCrossingCap || std::abs(t2) > kCrossingCap;
    }

    if (flat) {
        if (dot(v1, v2) <= 0.0) fail(Err::BadArgument, "rays are anti-parallel");
        // Flat front through q1, orthogonal to v1; q2 slides onto the same line.
        out.kind = 0;
        out.flat = true;
        out.tau1 = 0.0;
        out.tau2 = dot(q1 - q2, v1) / dot(v2, v1);
        out.p1 = q1;
        out.p2 = q2 + out.tau2 * v2;
        out.circle_residual = 0.0;
        out.alignment_residual = std::abs(cross(v1, v2));
        return out;
    }

    out.t1 = t1;
    out.t2 = t2;
    // Work with the labels ordered so that ta > 0 (admissibility gives t1+t2 >= 0).
    bool swapped = t1 <= 0.0;
    out.swapped = swapped;
    double ta = swapped ? t2 : t1;
    double tb = swapped ? t1 : t2;
    Vec2 va = swapped ? v2 : v1;
    Vec2 vb = swapped ? v1 : v2;
    Vec2 qa = swapped ? q2 : q1;
    Vec2 center = qa - ta * va;  // the ray crossing
    out.center = center;

    double taua, taub;
    if (ta >= 5000.0 * eps0) {
        out.kind = 1;
        out.radius = ta;
        taua = 0.0;
        taub = ta - tb;
    } else {
        out.kind = 2;
        out.radius = 5000.0 * eps0;
        taua = out.radius - ta;
        taub = out.radius - tb;
    }
    Vec2 pa = center + (ta + taua) * va;
    Vec2 pb = center + (tb + taub) * vb;
    out.tau1 = swapped ? taub : taua;
    out.tau2 = swapped ? taua : taub;
    out.p1 = swapped ? pb : pa;
    out.p2 = swapped ? pa : pb;
    out.circle_residual = std::max(std::abs(dist(out.p1, center) - out.radius),
                                   std::abs(dist(out.p2, center) - out.radius));
    out.alignment_residual =
        std::max(std::abs(cross(v1, normalized(out.p1 - center))),
                 std::abs(cross(v2, normalized(out.p2 - center))));
    return out;
}

FuzzPair random_front_pair(Rng& rng, double eps0) {
    for (int attempt = 0; attempt < 64; ++attempt) {
        Vec2 origin{rng.uniform(-5.0, 5.0), rng.uniform(-5.0, 5.0)};
        double alpha = rng.uniform(0.0, 2.0 * M_PI);

        double pick = rng.uniform();
        if (pick < 0.05) {
            // Exactly parallel rays: the flat-front branch.
            Vec2 v = unit_from_angle(alpha);
            Vec2 off = rng.uniform(0.0, 0.9) * eps0 * unit_from_angle(rng.uniform(0.0, 2.0 * M_PI));
            FuzzPair p{origin, v, origin + off, v};
            if (dot(p.q1 - p.q2, p.v1 - p.v2) >= 0.0) return p;
            continue;
        }

        double t1, t2;
        if (pick < 0.50) {
            t1 = 5000.0 * eps0 * rng.uniform(1.2, 9.2);  // pivot branch
            t2 = t1 + rng.uniform(-0.45, 0.45) * eps0;
        } else if (pick < 0.95) {
            t1 = 5000.0 * eps0 * rng.uniform(0.02, 0.95);  // push-out branch
            t2 = t1 + rng.uniform(-0.45, 0.45) * eps0;
        } else {
            t1 = eps0 * rng.uniform(0.0, 0.5);  // crossing right at the front
            t2 = t1 * rng.uniform(-0.4, 1.0);
        }

        double cap = std::min(0.9 * eps0, 0.5 * eps0 / std::max({t1, t2, 1.0}));
        double theta = (rng.uniform() < 0.5 ? 1.0 : -1.0) * rng.uniform(0.05, 1.0) * cap;
        Vec2 v1 = unit_from_angle(alpha);
        Vec2 v2 = unit_from_angle(alpha + theta);
        FuzzPair p{origin + t1 * v1, v1, origin + t2 * v2, v2};
        if (dist(p.q1, p.q2) >= eps0) continue;
        if (dist(p.v1, p.v2) >= eps0) continue;
        if (dot(p.q1 - p.q2, p.v1 - p.v2) < 0.0) continue;
        return p;
    }
    fail(Err::Internal, "could not draw an admissible ray pair");
}

FuzzReport fuzz_embeddings(long n, double eps0, uint64_t seed) {
    Rng rng(seed);
    FuzzReport rep;
    rep.n = n;
    rep.tau_bound = 10000.0 * eps0;
    for (long i = 0; i < n; ++i) {
        FuzzPair p = random_front_pair(rng, eps0);
        FrontEmbedding e = embed_divergent_front(p.q1, p.v1, p.q2, p.v2, eps0);
        if (e.kind == 1) ++rep.n_case1;
        else if (e.kind == 2) ++rep.n_case2;
        else ++rep.n_flat;

        double tau = std::max(std::abs(e.tau1), std::abs(e.tau2));
        double circ = e.flat ? 0.0 : e.circle_residual / std::max(e.radius, 1e-300);
        rep.max_abs_tau = std::max(rep.max_abs_tau, tau);
        rep.max_circle_residual = std::max(rep.max_circle_residual, circ);
        rep.max_alignment_residual = std::max(rep.max_alignment_residual, e.alignment_residual);
        if (tau >= rep.tau_bound || circ >= 1e-9 || e.alignment_residual >= 1e-9)
            ++rep.n_violations;
    }
    return rep;
}

// ---- synchronized front at a near-singular orbit leg --------------------------------

const char* frame_mode_name(FrameMode m) {
    return m == FrameMode::PostSingularity ? "post-singularity" : "pre-singularity";
}

namespace {

// The carrier circle of the frame: a huge-radius divergent front whose apex is
// q_eps.  e is a signed arc-length parameter along the circle.
struct Carrier {
    Vec2 O;
    double R = 0.0;
    double a0 = 0.0;
    Vec2 point(double e) const { return O + R * unit_from_angle(a0 + e / R); }
    Vec2 vel(double e) const { return unit_from_angle(a0 + e / R); }
};

Carrier carrier_of(const SyncFrame& f) {
    Carrier c;
    c.O = f.center;
    c.R = f.radius;
    c.a0 = std::atan2(f.q_eps.y - f.center.y, f.q_eps.x - f.center.x);
    return c;
}

bool probe_singular(const RayProbe& p) { return !p.ok || p.corner_id >= 0 || p.tangential; }

// One sideways sweep along the carrier.  Family 0 probes away from the anchor
// (the continuation of the free leg), family 1 probes back toward it; the first
// branch change of either family is bracketed by bisection.
struct SideScan {
    bool found = false;
    int family = -1;
    double e_good = 0.0, e_bad = 0.0;
    RayProbe good[2];  // both families at e_good
    RayProbe bad;      // the closing family at e_bad
};

SideScan scan_side(const Table& table, const Carrier& car, int side, double e_cap,
                   double e0, double de_max, double e_tol, const RayProbe base[2]) {
    SideScan out;
    RayProbe prev[2] = {base[0], base[1]};
    double e = 0.0, de = e0;
    while (e < e_cap) {
        double e_next = std::min(e + de, e_cap);
        double es = side * e_next;
        Vec2 p = car.point(es);
        if (!in_domain(table, p)) return out;
        RayProbe cur[2] = {probe_material(table, p, -car.vel(es)),
                           probe_material(table, p, car.vel(es))};
        bool ch0 = probe_branch_changed(table, prev[0], cur[0]);
        bool ch1 = probe_branch_changed(table, prev[1], cur[1]);
        if (ch0 && ch1 && de > 4.0 * e_tol) {
            de *= 0.25;  // both families cut in one step: separate them first
            continue;
        }
        if (ch0 || ch1) {
            int fam = ch0 ? 0 : 1;
            double lo = e, hi = e_next;
            RayProbe pg = prev[fam], pb = cur[fam];
            while (hi - lo > e_tol) {
                double mid = 0.5 * (lo + hi);
                double ems = side * mid;
                Vec2 dir = fam == 0 ? -car.vel(ems) : car.vel(ems);
                RayProbe pm = probe_material(table, car.point(ems), dir);
                if (probe_branch_changed(table, prev[fam], pm)) {
                    hi = mid;
                    pb = pm;
                } else {
                    lo = mid;
                    pg = pm;
                }
            }
            if (lo <= 2.0 * e_tol) return out;  // singular right at the apex: unusable
            out.found = true;
            out.family = fam;
            out.e_good = lo;
            out.e_bad = hi;
            out.good[fam] = pg;
            out.bad = pb;
            double ems = side * lo;
            Vec2 dir = fam == 0 ? car.vel(ems) : -car.vel(ems);
            out.good[1 - fam] = probe_material(table, car.point(ems), dir);
            return out;
        }
        prev[0] = cur[0];
        prev[1] = cur[1];
        e = e_next;
        de = std::min(de * 1.7, de_max);
    }
    return out;
}

// Minimum distance from a fixed base-cell point to the swept path of a ray that
// slides through transparent walls.  target_lifted is the copy of the target in
// the chart of the ray origin (well defined because each leg stays in one cell).
struct Clearance {
    double gap = kInf;
    Vec2 target_lifted;
    double t_at = 0.0;
};

Clearance ray_clearance(const Table& table, Vec2 q, Vec2 d, const Vec2& target,
                        double t_max) {
    Clearance out;
    out.target_lifted = target;
    Vec2 off{0.0, 0.0};
    double t_base = 0.0;
    FlowPoint fp{q, d};
    for (int guard = 0; guard < 4096; ++guard) {
        CollisionEvent ev;
        try {
            ev = first_event(table, fp);
        } catch (const SdbError&) {
            break;
        }
        double take = std::min(ev.t, t_max - t_base);
        if (take > 0.0) {
            double s_at = 0.0;
            double dd = seg_dist(target, fp.q, fp.q + take * fp.v, &s_at);
            if (dd < out.gap) {
                out.gap = dd;
                out.target_lifted = target + off;
                out.t_at = t_base + s_at;
            }
        }
        t_base += ev.t;
        if (t_base >= t_max || ev.cls != EventClass::Transparent) break;
        off -= ev.wrap_shift;
        fp = {ev.q, ev.v_out};
    }
    return out;
}

struct SingularHit {
    double gap = kInf;
    SingSource src = SingSource::ArcTangency;
    int comp = -1;
    int corner = -1;
    Vec2 q_star_base, q_star_lifted;
};

// Identify the singular element the closing ray sweeps across: the candidate
// (grazed arc or crossed corner) nearest the mid-bracket ray wins.
SingularHit classify_obstruction(const Table& table, const Vec2& ray_q, const Vec2& ray_d,
                                 const Vec2& v_eps, const SideScan& scan, double t_budget) {
    SingularHit best;
    int cand[3] = {scan.good[scan.family].component, scan.bad.component, -1};
    for (int ci = 0; ci < 3; ++ci) {
        int c = cand[ci];
        if (c < 0 || (ci == 1 && c == cand[0])) continue;
        const auto& comp = table.comp(c);
        if (comp.kind != ComponentKind::Arc || !comp.material) continue;
        Clearance cl = ray_clearance(table, ray_q, ray_d, comp.center, t_budget);
        double gap = std::abs(cl.gap - comp.radius);
        if (gap < best.gap) {
            // Tangency footpoint in the sweep direction of the front.
            Vec2 n = normalized(perp(v_eps));
            Vec2 cand_a = cl.target_lifted + comp.radius * n;
            Vec2 cand_b = cl.target_lifted - comp.radius * n;
            bool pick_a = std::abs(cross(ray_d, cand_a - ray_q)) <
                          std::abs(cross(ray_d, cand_b - ray_q));
            best.gap = gap;
            best.src = SingSource::ArcTangency;
            best.comp = c;
            best.corner = -1;
            best.q_star_lifted = pick_a ? cand_a : cand_b;
            best.q_star_base = comp.center + (pick_a ? 1.0 : -1.0) * comp.radius * n;
        }
    }
    for (size_t i = 0; i < table.corners.size(); ++i) {
        const Corner& corner = table.corners[i];
        Clearance cl = ray_clearance(table, ray_q, ray_d, corner.q, t_budget);
        if (cl.gap < best.gap) {
            best.gap = cl.gap;
            best.src = corner.transparent ? SingSource::WallCorner : SingSource::Corner;
            best.comp = corner.comp_next;
            best.corner = static_cast<int>(i);
            best.q_star_lifted = cl.target_lifted;
            best.q_star_base = corner.q;
        }
    }
    return best;
}

// Inward direction at a boundary point, used to nudge chord probes off the wall.
Vec2 inward_at(const Table& table, const SingularHit& ob) {
    if (ob.src == SingSource::ArcTangency) {
        const auto& comp = table.comp(ob.comp);
        return normalized(ob.q_star_base - comp.center) * (comp.sweep < 0.0 ? 1.0 : -1.0);
    }
    const Corner& c = table.corners[static_cast<size_t>(ob.corner)];
    const auto& prev = table.comp(c.comp_prev);
    const auto& next = table.comp(c.comp_next);
    Vec2 n = prev.normal_at(prev.length()) + next.normal_at(0.0);
    double len = norm(n);
    return len > 1e-12 ? n * (1.0 / len) : Vec2{0.0, 0.0};
}

SyncFrame finish_frame(const Table& table, const Coord& x, int n, double eps1,
                       double tau_next, const Carrier& car, const Vec2& q_anchor,
                       const Vec2& v_leg, int side, const SideScan& scan, double extent) {
    SyncFrame f;
    f.x = x;
    f.n = n;
    f.eps1 = eps1;
    f.tau_next = tau_next;
    f.mode = scan.family == 0 ? FrameMode::PostSingularity : FrameMode::PreSingularity;
    f.q_anchor = q_anchor;
    f.v_leg = v_leg;
    f.q_eps = car.point(0.0);
    f.v_eps = car.vel(0.0);
    f.center = car.O;
    f.radius = car.R;
    f.side = side;
    f.e_star = scan.e_good;
    f.e_bracket = scan.e_bad - scan.e_good;
    double es = side * scan.e_good;
    f.q1 = car.point(es);
    f.v1 = car.vel(es);
    f.open_cos = scan.good[1 - scan.family].ok ? scan.good[1 - scan.family].cos_incidence : 0.0;

    // Classify the element the closing family ran into.
    double e_mid = side * 0.5 * (scan.e_good + scan.e_bad);
    Vec2 ray_q = car.point(e_mid);
    Vec2 ray_d = scan.family == 0 ? -car.vel(e_mid) : car.vel(e_mid);
    RayProbe mid = probe_material(table, ray_q, ray_d);
    f.sing_cos = mid.ok ? mid.cos_incidence : 1.0;
    double t_budget = 1.05 * std::max(scan.good[scan.family].t, scan.bad.ok ? scan.bad.t : 0.0) +
                      1e-3 * extent;
    SingularHit ob = classify_obstruction(table, ray_q, ray_d, f.v_eps, scan, t_budget);
    if (ob.gap > 1e-6 * extent + 10.0 * f.e_bracket)
        fail(Err::Internal, "could not classify the singular endpoint");
    f.obstruction = ob.src;
    f.obstruction_comp = ob.comp;
    f.obstruction_corner = ob.corner;
    f.q_star = ob.q_star_lifted;
    f.sing_gap = ob.gap;

    // Chord extent: free flight from the obstruction footpoint along +/- v_eps,
    // launched a hair inside the domain to dodge the degenerate self-hit.
    Vec2 nudge = 1e-9 * extent * inward_at(table, ob);
    for (int dir = 0; dir < 2; ++dir) {
        Vec2 d = dir == 0 ? f.v_eps : -f.v_eps;
        RayProbe ph = probe_material(table, ob.q_star_base + nudge, d);
        (dir == 0 ? f.h_fwd : f.h_bwd) = ph.ok ? ph.t : 0.0;
    }

    // Companion point x3: project q_eps onto the chord line, then drop the
    // projection back onto the carrier along the chord.
    f.q3_param = dot(f.q_eps - f.q_star, f.v_eps);
    f.q3 = f.q_star + f.q3_param * f.v_eps;
    f.q3_on_chord = f.q3_param >= -f.h_bwd && f.q3_param <= f.h_fwd;
    Vec2 w = f.q_star - f.center;
    double b = dot(f.v_eps, w);
    double c = norm2(w) - f.radius * f.radius;
    double disc = b * b - c;
    double t_root;
    if (disc >= 0.0) {
        double ra = -b + std::sqrt(disc), rb = -b - std::sqrt(disc);
        t_root = std::abs(ra - f.q3_param) < std::abs(rb - f.q3_param) ? ra : rb;
    } else {
        t_root = -b;  // chord misses the carrier by a rounding hair
    }
    f.q3_tilde = f.q_star + t_root * f.v_eps;
    f.v3 = normalized(f.q3_tilde - f.center);
    return f;
}

}  // namespace

SyncFrame build_sync_frame(const Table& table, const Coord& x, int n,
                           const FrameParams& params) {
    if (n < 1) fail(Err::BadArgument, "need at least one collision before the frame");
    auto evs = simulate(table, x, n);
    if (static_cast<int>(evs.size()) != n)
        fail(Err::BadArgument, "orbit hits a corner before its n-th event");
    for (const auto& ev : evs)
        if (ev.cls == EventClass::Tangential)
            fail(Err::BadArgument, "orbit grazes before its n-th event");

    Vec2 q_anchor = evs.back().q;
    Vec2 v_leg = evs.back().v_out;
    double tau_next = first_event(table, {q_anchor, v_leg}).t;
    double extent = table_extent(table);
    const double e_tol = 1e-12 * extent;
    const double e0 = 1e-9 * extent;
    const double de_max = 2e-3 * extent;
    const double e_cap = params.e_cap_frac * extent;

    struct PreCand {
        bool valid = false;
        double eps1 = 0.0;
        int side = 0;
        Carrier car;
        SideScan scan;
    } first_pre;

    for (double eps1 = 0.5 * tau_next; eps1 >= params.eps1_floor_frac * tau_next;
         eps1 *= 0.5) {
        Vec2 q_eps = q_anchor + eps1 * v_leg;
        Carrier car;
        car.R = tau_next / params.curvature_scale;
        car.O = q_eps + car.R * v_leg;
        car.a0 = std::atan2(q_eps.y - car.O.y, q_eps.x - car.O.x);
        RayProbe base[2] = {probe_material(table, q_eps, v_leg),
                            probe_material(table, q_eps, -v_leg)};
        if (probe_singular(base[0]) || probe_singular(base[1])) continue;

        SideScan scans[2];
        int sides[2] = {+1, -1};
        int pick = -1;
        for (int k = 0; k < 2; ++k) {
            scans[k] = scan_side(table, car, sides[k], e_cap, e0, de_max, e_tol, base);
            if (scans[k].found && (pick < 0 || scans[k].e_good < scans[pick].e_good))
                pick = k;
        }
        if (pick < 0) continue;
        if (scans[pick].family == 0)
            return finish_frame(table, x, n, eps1, tau_next, car, q_anchor, v_leg,
                                sides[pick], scans[pick], extent);
        if (!first_pre.valid)
            first_pre = {true, eps1, sides[pick], car, scans[pick]};
    }
    if (first_pre.valid)
        return finish_frame(table, x, n, first_pre.eps1, tau_next, first_pre.car, q_anchor,
                            v_leg, first_pre.side, first_pre.scan, extent);
    fail(Err::NoWitness, "no singular endpoint within the sideways cap");
}

double FrameCertificate::min_product() const { return std::min(std::min(p1, p2), std::min(c1, c2)); }

FrameCertificate lmf_check(const SyncFrame& f) {
    FrameCertificate c;
    c.p1 = dot(f.q1 - f.q3, f.v1 - f.v_eps);
    c.p2 = dot(f.q_eps - f.q3, f.v_eps - f.v_eps);
    c.c1 = dot(f.q1 - f.q3_tilde, f.v3 - f.v_eps);
    c.c2 = dot(f.q1 - f.q3_tilde, f.v1 - f.v3);
    c.eta = dot(f.q3 - f.q3_tilde, f.v_eps);
    return c;
}

// ---- the swept strip and orbit containment ------------------------------------------

namespace {

double signed_dr(const BoundaryComponent& c, double r1, double r0) {
    double dr = r1 - r0;
    if (comp_closed(c)) {
        if (dr > 0.5 * c.length()) dr -= c.length();
        if (dr < -0.5 * c.length()) dr += c.length();
    }
    return dr;
}

double chart_dist(const Table& table, const Coord& a, const Coord& b) {
    if (a.component != b.component) return 1e9;
    double dr = signed_dr(table.comp(a.component), a.r, b.r);
    return std::hypot(dr, a.phi - b.phi);
}

std::vector<Vec2> strip_polygon(const StripRegion& strip) {
    std::vector<Vec2> poly;
    int N = static_cast<int>(strip.samples.size());
    for (int j = 0; j < N; ++j) poly.push_back(strip.samples[j].foot.front());
    const auto& far = strip.samples[N - 1].foot;
    for (size_t k = 1; k < far.size(); ++k) poly.push_back(far[k]);
    for (int j = N - 2; j >= 0; --j) poly.push_back(strip.samples[j].foot.back());
    const auto& near = strip.samples[0].foot;
    for (size_t k = near.size() - 1; k >= 2; --k) poly.push_back(near[k - 1]);
    return poly;
}

double shoelace(const std::vector<Vec2>& poly) {
    double a = 0.0;
    for (size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++)
        a += cross(poly[j], poly[i]);
    return 0.5 * std::abs(a);
}

bool point_in_poly(const std::vector<Vec2>& poly, const Vec2& p) {
    bool in = false;
    for (size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
        const Vec2& a = poly[i];
        const Vec2& b = poly[j];
        if ((a.y > p.y) != (b.y > p.y)) {
            double xi = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
            if (p.x < xi) in = !in;
        }
    }
    return in;
}

int orient(const Vec2& a, const Vec2& b, const Vec2& c) {
    double v = cross(b - a, c - a);
    if (v > 0.0) return 1;
    if (v < 0.0) return -1;
    return 0;
}

// Strictly proper crossing; u gets the parameter along [a, b].
bool seg_intersect(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d, double* u) {
    if (orient(a, b, c) * orient(a, b, d) >= 0) return false;
    if (orient(c, d, a) * orient(c, d, b) >= 0) return false;
    double den = cross(b - a, d - c);
    if (u) *u = den != 0.0 ? cross(c - a, d - c) / den : 0.5;
    return true;
}

}  // namespace

StripRegion build_strip(const Table& table, const SyncFrame& frame,
                        const StripParams& params) {
    StripRegion out;
    out.n = frame.n;
    out.u0_radius = params.u0_radius;
    int N = std::max(2, params.n_samples);
    Carrier car = carrier_of(frame);

    for (int j = 0; j < N; ++j) {
        double e = frame.side * frame.e_star * j / static_cast<double>(N - 1);
        StripSample s;
        s.e = e;
        FlowPoint fp{car.point(e), car.vel(e)};
        s.foot.push_back(fp.q);
        UnwrapState uw;
        for (int k = 0; k <= frame.n; ++k) {
            CollisionEvent ev = first_event(table, fp);
            if (ev.cls == EventClass::Corner || ev.cls == EventClass::Tangential)
                fail(Err::SingularEncounter, "strip sample hit a singularity");
            s.tau_total += ev.t;
            s.foot.push_back(uw.lift(ev.q) - ev.wrap_shift);
            uw.absorb(ev);
            fp = {ev.q, ev.v_out};
            if (k == frame.n) s.landing = ev.coord;
        }
        out.samples.push_back(std::move(s));
    }

    out.u0_center = out.samples.front().landing;
    int sig_r = 0, sig_phi = 0;
    for (int j = 0; j < N; ++j) {
        auto& s = out.samples[static_cast<size_t>(j)];
        s.landing_dist = chart_dist(table, s.landing, out.u0_center);
        out.max_landing_dist = std::max(out.max_landing_dist, s.landing_dist);
        if (j == 0) continue;
        const Coord& prev = out.samples[static_cast<size_t>(j - 1)].landing;
        if (s.landing.component != prev.component) {
            out.monotone = false;
            continue;
        }
        double dr = signed_dr(table.comp(s.landing.component), s.landing.r, prev.r);
        double dphi = s.landing.phi - prev.phi;
        if (std::abs(dr) > 1e-13) {
            int sg = dr > 0 ? 1 : -1;
            if (sig_r == 0) sig_r = sg;
            else if (sig_r != sg) out.monotone = false;
        }
        if (std::abs(dphi) > 1e-13) {
            int sg = dphi > 0 ? 1 : -1;
            if (sig_phi == 0) sig_phi = sg;
            else if (sig_phi != sg) out.monotone = false;
        }
    }
    out.all_in_u0 = out.max_landing_dist <= out.u0_radius;
    out.area = shoelace(strip_polygon(out));
    return out;
}

ContainmentReport strip_contains_orbit(const Table& table, const StripRegion& strip,
                                       const SyncFrame& frame) {
    ContainmentReport rep;
    if (strip.samples.size() < 2) return rep;
    std::vector<Vec2> poly = strip_polygon(strip);
    const auto& edge0 = strip.samples.front().foot;
    const auto& edge1 = strip.samples.back().foot;

    // Fly x3 = (q3, v_eps) through n+1 events, keeping the lifted polyline.
    std::vector<Vec2> path{frame.q3};
    std::vector<double> times{0.0};
    bool landed = false;
    {
        FlowPoint fp{frame.q3, frame.v_eps};
        UnwrapState uw;
        double t = 0.0;
        for (int k = 0; k <= strip.n; ++k) {
            CollisionEvent ev;
            try {
                ev = first_event(table, fp);
            } catch (const SdbError&) {
                break;
            }
            t += ev.t;
            path.push_back(uw.lift(ev.q) - ev.wrap_shift);
            times.push_back(t);
            if (ev.cls == EventClass::Corner || ev.cls == EventClass::Tangential) break;
            uw.absorb(ev);
            fp = {ev.q, ev.v_out};
            if (k == strip.n) {
                rep.landing = ev.coord;
                landed = true;
            }
        }
    }
    rep.landing_dist = landed ? chart_dist(table, rep.landing, strip.u0_center) : 1e9;
    rep.landing_in_u0 = landed && rep.landing_dist <= strip.u0_radius;

    rep.inside_at_start = point_in_poly(poly, path.front());
    rep.min_edge_clearance = kInf;
    auto edge_segments = [&](const std::vector<Vec2>& edge, auto&& fn) {
        for (size_t i = 0; i + 1 < edge.size(); ++i) fn(edge[i], edge[i + 1]);
    };
    for (size_t i = 0; i + 1 < path.size(); ++i) {
        const Vec2& a = path[i];
        const Vec2& b = path[i + 1];
        double first_u = kInf;
        for (const auto* edge : {&edge0, &edge1}) {
            edge_segments(*edge, [&](const Vec2& c, const Vec2& d) {
                double u = 0.0;
                if (seg_intersect(a, b, c, d, &u)) first_u = std::min(first_u, u);
                for (int s = 0; s <= 8; ++s) {
                    Vec2 p = a + (s / 8.0) * (b - a);
                    rep.min_edge_clearance = std::min(rep.min_edge_clearance, seg_dist(p, c, d));
                }
            });
        }
        if (first_u < kInf && !rep.crossed_edge) {
            rep.crossed_edge = true;
            rep.crossing_time = times[i] + first_u * (times[i + 1] - times[i]);
        }
        if (!rep.entered) {
            for (int s = 0; s <= 32; ++s) {
                double u = s / 32.0;
                if (point_in_poly(poly, a + u * (b - a))) {
                    rep.entered = true;
                    rep.entry_time = times[i] + u * (times[i + 1] - times[i]);
                    break;
                }
            }
        }
    }
    rep.contained = rep.entered && !rep.crossed_edge && rep.landing_in_u0;
    return rep;
}

// ---- grazing fixtures ----------------------------------------------------------------

BadFixture make_grazing_fixture(const Table& table, const AimSpec& aim) {
    BadFixture out;
    out.aim = aim;
    out.n = aim.n_back;
    if (aim.component < 0 || aim.component >= static_cast<int>(table.components.size())) {
        out.note = "no such component";
        return out;
    }
    const auto& comp = table.comp(aim.component);
    if (comp.kind != ComponentKind::Arc || !comp.material || comp.curvature() <= 0.0) {
        out.note = "aim component is not a dispersing arc";
        return out;
    }
    if (aim.miss <= 0.0 || aim.n_back < 1) {
        out.note = "need a positive miss and at least one pullback step";
        return out;
    }

    double s = std::clamp(aim.place, 0.0, 1.0) * comp.length();
    Vec2 g = comp.point_at(s);
    Vec2 d = (aim.dir >= 0 ? 1.0 : -1.0) * comp.tangent_at(s);
    Vec2 p0 = g + aim.miss * comp.normal_at(s);
    if (!in_domain(table, p0)) {
        out.note = "offset grazing point left the domain";
        return out;
    }

    RayProbe back = probe_material(table, p0, -d);
    if (!back.ok) {
        out.note = "backcast escaped";
        return out;
    }
    if (back.corner_id >= 0 || back.tangential || back.cos_incidence < 0.05) {
        out.note = "backcast landing too shallow or singular";
        return out;
    }
    out.graze_t = back.t;

    // The forward orbit leaves the landing with velocity d, so it must arrive
    // there with the mirror image of d.
    Vec2 w_arr = reflect(d, back.normal);
    OrbitTrace tr = trace_back(table, back.point, w_arr, aim.n_back);
    if (!tr.ok) {
        out.note = "pullback crossed a singular element";
        return out;
    }
    out.x = tr.coord;

    auto evs = simulate(table, out.x, aim.n_back);
    if (static_cast<int>(evs.size()) != aim.n_back ||
        dist(evs.back().q, back.point) > 1e-6 || dist(evs.back().v_out, d) > 1e-6) {
        out.note = "forward replay missed the grazing leg";
        return out;
    }
    out.ok = true;
    return out;
}

// ---- singularity foliation -------------------------------------------------------------

FoliationChart foliation_chart(const Table& table, const SingCurve& curve, int n_fibers,
                               double eps0, double resolution) {
    if (n_fibers < 1) fail(Err::BadArgument, "need at least one fiber");
    if (eps0 <= 0.0 || resolution <= 0.0 || resolution > eps0)
        fail(Err::BadArgument, "need 0 < resolution <= eps0");
    if (curve.pts.size() < 2) fail(Err::BadArgument, "curve has no chart extent");

    FoliationChart out;
    out.eps0 = eps0;
    out.resolution = resolution;
    double L = curve.chart_length();
    int K = static_cast<int>(std::floor(eps0 / resolution));

    for (int j = 0; j < n_fibers; ++j) {
        Coord y0 = curve_point_at(curve, (j + 0.5) / n_fibers * L);
        FoliationFiber f;
        f.anchor = y0;
        FlowPoint fp;
        CollisionEvent lead;
        try {
            fp = coord_to_flow(table, y0);
            lead = first_event(table, fp);
        } catch (const SdbError&) {
            continue;  // anchor itself is singular: no fiber
        }
        if (lead.t <= 0.0) continue;
        f.q0 = fp.q;
        f.v0 = fp.v;
        Vec2 mid = fp.q + 0.5 * lead.t * fp.v;
        Vec2 sdir = perp(fp.v);

        f.points.emplace_back(0.0, y0);  // the anchor maps to itself exactly
        for (int dir = -1; dir <= 1; dir += 2) {
            for (int k = 1; k <= K; ++k) {
                double sv = dir * k * resolution;
                Vec2 p = mid + sv * sdir;
                Coord cd;
                bool ok = in_domain(table, p);
                if (ok) {
                    RayProbe pr = probe_material(table, p, -fp.v);
                    ok = pr.ok && pr.corner_id < 0 && !pr.tangential &&
                         pr.component == y0.component && pr.cos_incidence > 1e-9;
                    if (ok) cd = {pr.component, pr.r, phi_of(fp.v, pr.normal)};
                }
                if (!ok) {
                    (dir < 0 ? f.truncated_lo : f.truncated_hi) = true;
                    break;
                }
                f.points.emplace_back(sv, cd);
            }
        }
        std::sort(f.points.begin(), f.points.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        f.s_min = f.points.front().first;
        f.s_max = f.points.back().first;
        out.fibers.push_back(std::move(f));
    }

    out.min_fiber_gap = kInf;
    for (size_t i = 0; i + 1 < out.fibers.size(); ++i) {
        for (const auto& a : out.fibers[i].points)
            for (const auto& b : out.fibers[i + 1].points)
                out.min_fiber_gap =
                    std::min(out.min_fiber_gap, chart_dist(table, a.second, b.second));
    }
    out.disjoint = out.min_fiber_gap > 0.0;
    return out;
}

}  // namespace sdb
