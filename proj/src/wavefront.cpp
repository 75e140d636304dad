#include "wavefront.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "errors.hpp"
#include "singularity.hpp"

namespace sdb {

double transport_free(double B, double t) { return B / (1.0 + t * B); }

double flight_factor(double B, double t) { return std::abs(1.0 + t * B); }

double collision_kick_term(double K, double cos_phi) { return 2.0 * K / cos_phi; }

OrbitLegs collect_legs(const Table& table, const Coord& x, int n, Clock clock) {
    OrbitLegs out;
    Coord cur = x;
    double pending_tau = 0.0;
    // Wall crossings do not advance the material clock; bound them separately.
    long guard = (clock == Clock::Material) ? (1L << 21) : n;
    long steps = 0;
    while (static_cast<int>(out.legs.size()) < n) {
        if (steps++ > guard) {
            out.truncated = true;
            out.stop_class = EventClass::Transparent;
            break;
        }
        CollisionEvent ev = collision_map(table, cur);
        if (ev.cls == EventClass::Corner || ev.cls == EventClass::Tangential) {
            out.truncated = true;
            out.stop_class = ev.cls;
            break;
        }
        if (ev.cls == EventClass::Transparent) {
            if (clock == Clock::Enlarged) {
                Leg leg;
                leg.tau = ev.t;
                leg.kick = 0.0;
                leg.material = false;
                leg.coord = ev.coord;
                leg.cls = ev.cls;
                out.legs.push_back(leg);
            } else {
                pending_tau += ev.t;
            }
            cur = ev.coord;
            continue;
        }
        double s_local = 0.0;
        int comp = table.component_at(ev.coord.r, &s_local);
        Leg leg;
        leg.tau = pending_tau + ev.t;
        leg.kick = collision_kick_term(table.comp(comp).curvature(), ev.cos_phi);
        leg.material = true;
        leg.coord = ev.coord;
        leg.cls = ev.cls;
        out.legs.push_back(leg);
        pending_tau = 0.0;
        cur = ev.coord;
    }
    return out;
}

ExpansionResult expansion(const Table& table, const Coord& x, int n, double B0,
                          Clock clock) {
    OrbitLegs orbit = collect_legs(table, x, n, clock);
    ExpansionResult out;
    out.truncated = orbit.truncated;
    double B = B0;
    for (const Leg& leg : orbit.legs) {
        ExpansionStep step;
        step.tau = leg.tau;
        step.factor = flight_factor(B, leg.tau);
        step.B_before = transport_free(B, leg.tau);
        step.B_after = step.B_before + leg.kick;
        out.steps.push_back(step);
        out.log_growth += std::log(step.factor);
        B = step.B_after;
    }
    out.B_final = B;
    return out;
}

// ---- kappa ------------------------------------------------------------------------

void KappaLadder::renorm() {
    double m = std::max(std::max(std::abs(a_), std::abs(b_)),
                        std::max(std::abs(c_), std::abs(d_)));
    if (m > 1e140) {
        a_ /= m;
        b_ /= m;
        c_ /= m;
        d_ /= m;
        log_scale_ += std::log(m);
    }
}

void KappaLadder::push(double tau, double kick) {
    // A <- A * Kick(pending) * Flight(tau); the kick of the newest collision is
    // withheld because kappa_n never uses it.
    double k = pending_kick_;
    double b2 = a_ * k + b_;
    double d2 = c_ * k + d_;
    a_ += b2 * tau;
    c_ += d2 * tau;
    b_ = b2;
    d_ = d2;
    pending_kick_ = kick;
    ++n_;
    renorm();
}

double KappaLadder::log_kappa() const { return std::log(std::abs(d_)) + log_scale_; }

double KappaLadder::kappa() const { return std::exp(log_kappa()); }

double KappaLadder::kappa_of(double B0) const {
    return std::abs(c_ * B0 + d_) * std::exp(log_scale_);
}

double KappaLadder::reversed_curvature() const { return b_ / d_; }

KappaResult kappa(const Table& table, const Coord& x, int n, double delta) {
    if (n < 1) fail(Err::BadArgument, "kappa requires n >= 1");
    OrbitLegs orbit = collect_legs(table, x, n, Clock::Material);
    KappaResult out;
    out.truncated = orbit.truncated;
    out.n = static_cast<int>(orbit.legs.size());
    if (out.n == 0) fail(Err::SingularEncounter, "orbit is singular before the first collision");

    KappaLadder ladder;
    for (const Leg& leg : orbit.legs) {
        ladder.push(leg.tau, leg.kick);
        out.kappa_by_step.push_back(ladder.kappa());
    }
    out.kappa0 = ladder.kappa();
    out.log_kappa0 = ladder.log_kappa();

    // Initial-curvature search.  Divergent fronts only (B0 >= 0): the image
    // extent constraint never rules out the flat front, which also attains the
    // minimum because every matrix entry is nonnegative.
    out.kappa_delta = out.kappa0;
    out.B_argmin = 0.0;
    for (int i = 0; i < 25; ++i) {
        double B0 = std::pow(10.0, -2.0 + 4.0 * i / 24.0);
        double v = ladder.kappa_of(B0);
        if (v < out.kappa_delta) {
            out.kappa_delta = v;
            out.B_argmin = B0;
        }
    }
    out.base_extent = delta / out.kappa0;
    return out;
}

StableManifold approx_stable_manifold(const Table& table, const Coord& x, int n_max) {
    if (x.component < 0 || table.is_transparent(x.component))
        fail(Err::BadArgument, "stable manifold requires a material coordinate");
    if (std::cos(x.phi) < kTangencyTol) fail(Err::SingularBase, "base point is tangential");

    OrbitLegs back = collect_legs(table, involution(table, x), 1, Clock::Material);
    if (back.truncated)
        fail(Err::ImmediateSingularity, "backward step of the base point is singular");

    OrbitLegs orbit = collect_legs(table, x, n_max, Clock::Material);
    StableManifold out;
    out.truncated = orbit.truncated;
    out.n_used = static_cast<int>(orbit.legs.size());
    if (out.n_used == 0) fail(Err::SingularEncounter, "orbit is singular before the first collision");

    KappaLadder ladder;
    double extent = std::numeric_limits<double>::infinity();
    Coord prev = x;
    for (int k = 1; k <= out.n_used; ++k) {
        const Leg& leg = orbit.legs[static_cast<size_t>(k - 1)];
        ladder.push(leg.tau, leg.kick);
        StableStep step;
        step.k = k;
        step.kappa_k = ladder.kappa();
        step.z_k = z_tub(table, prev);
        step.bound = step.kappa_k * step.z_k;
        extent = std::min(extent, step.bound);
        out.steps.push_back(step);
        prev = leg.coord;
    }
    out.extent = std::isfinite(extent) ? extent : 0.0;
    out.B_stable = -ladder.reversed_curvature();
    return out;
}

}  // namespace sdb
