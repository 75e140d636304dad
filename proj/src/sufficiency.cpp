#include "sufficiency.hpp"

#include "errors.hpp"
#include "rng.hpp"

#include <algorithm>
#include <cmath>

namespace sdb {

const char* sufficiency_name(Sufficiency s) {
    switch (s) {
        case Sufficiency::Sufficient: return "sufficient";
        case Sufficiency::InsufficientByHorizon: return "insufficient";
        case Sufficiency::Undetermined: return "undetermined";
    }
    return "?";
}

namespace {

struct Branch {
    FlowPoint x;
    double t = 0.0;       // flow time accumulated from the root
    int collisions = 0;   // material collisions seen so far
};

struct WalkLimits {
    double t0 = 0.0;
    double t1 = 0.0;       // <= 0 means unbounded in time
    int horizon = 0;       // <= 0 means unbounded in collisions
    int branch_budget = kBranchBudget;
};

// Wall-corner crossings continue through the diagonally identified corner of
// the rectangle; velocities are unchanged.
Vec2 wall_corner_continue(const Table& table, const Vec2& q, const Vec2& v) {
    Vec2 lo = table.comp(table.n_material).start();
    Vec2 hi = lo;
    for (int i = table.n_material; i < (int)table.components.size(); ++i) {
        for (const Vec2& p : {table.comp(i).start(), table.comp(i).end()}) {
            lo.x = std::min(lo.x, p.x);
            lo.y = std::min(lo.y, p.y);
            hi.x = std::max(hi.x, p.x);
            hi.y = std::max(hi.y, p.y);
        }
    }
    Vec2 out = q;
    out.x += (v.x > 0.0) ? lo.x - hi.x : hi.x - lo.x;
    out.y += (v.y > 0.0) ? lo.y - hi.y : hi.y - lo.y;
    return out;
}

// Explore every reflection branch of the trajectory tree from `root`.  A branch
// retires as soon as it hits a dispersing arc non-tangentially inside the
// counting window; corners split the walk into the two one-sided reflections.
SufficiencyVerdict walk(const Table& table, const FlowPoint& root, const WalkLimits& lim) {
    constexpr int kMaxEventsPerBranch = 1 << 20;

    SufficiencyVerdict verdict;
    verdict.status = Sufficiency::Sufficient;

    std::vector<Branch> stack{{root, 0.0, 0}};
    int live_branches = 1;

    while (!stack.empty()) {
        Branch br = stack.back();
        stack.pop_back();

        bool witnessed = false;
        for (int step = 0; step < kMaxEventsPerBranch; ++step) {
            CollisionEvent ev = first_event(table, br.x);
            double t_hit = br.t + ev.t;
            if (lim.t1 > 0.0 && t_hit > lim.t1) break;

            if (ev.cls == EventClass::Transparent) {
                br.x = {ev.q, ev.v_out};
                br.t = t_hit;
                continue;
            }

            if (ev.cls == EventClass::Corner) {
                if (table.corners[(size_t)ev.corner_id].transparent) {
                    // crossing exactly through a rectangle corner: diagonal re-entry
                    br.x = {wall_corner_continue(table, ev.q, ev.v_in), ev.v_in};
                    br.t = t_hit;
                    continue;
                }
                if (++live_branches > lim.branch_budget) {
                    verdict.budget_exhausted = true;
                    verdict.status = Sufficiency::Undetermined;
                    return verdict;
                }
                Branch sib = br;
                sib.t = br.t = t_hit;
                sib.collisions = ++br.collisions;
                br.x = {ev.q, reflect(ev.v_in, ev.corner_normal_prev)};
                sib.x = {ev.q, reflect(ev.v_in, ev.corner_normal_next)};
                stack.push_back(sib);
                if (lim.horizon > 0 && br.collisions >= lim.horizon) break;
                continue;
            }

            // material hit
            bool curved = table.curvature_at(ev.coord.r) > 0.0;
            if (ev.cls == EventClass::Tangential) {
                if (curved) verdict.tangential_arc_hits = true;
                br.x = {ev.q, ev.v_out};  // grazing pass: straight through, not a hit
                br.t = t_hit;
                continue;
            }

            ++br.collisions;
            if (curved && t_hit >= lim.t0) {
                verdict.witnesses.push_back({t_hit, ev.coord.component, ev.coord.r});
                witnessed = true;
                break;
            }
            br.x = {ev.q, ev.v_out};
            br.t = t_hit;
            if (lim.horizon > 0 && br.collisions >= lim.horizon) break;
        }

        if (!witnessed) {
            // Branch ran out of time/collisions without meeting a curved wall.
            verdict.status = (lim.t1 > 0.0) ? Sufficiency::InsufficientByHorizon
                                            : Sufficiency::Undetermined;
            return verdict;
        }
    }

    verdict.branches = live_branches;
    return verdict;
}

}  // namespace

SufficiencyVerdict is_sufficient_segment(const Table& table, const FlowPoint& x, double t0,
                                         double t1, int branch_budget) {
    if (!(t1 > t0) || t0 < 0.0) fail(Err::BadArgument, "segment needs 0 <= t0 < t1");
    WalkLimits lim;
    lim.t0 = t0;
    lim.t1 = t1;
    lim.branch_budget = branch_budget;
    return walk(table, x, lim);
}

SufficiencyVerdict is_future_sufficient(const Table& table, const FlowPoint& x, int horizon,
                                        int branch_budget) {
    if (horizon < 1) fail(Err::BadArgument, "horizon must be positive");
    WalkLimits lim;
    lim.horizon = horizon;
    lim.branch_budget = branch_budget;
    return walk(table, x, lim);
}

SufficiencyVerdict is_future_sufficient(const Table& table, const Coord& x, int horizon,
                                        int branch_budget) {
    return is_future_sufficient(table, coord_to_flow(table, x), horizon, branch_budget);
}

SufficiencyVerdict is_past_sufficient(const Table& table, const Coord& x, int horizon,
                                      int branch_budget) {
    return is_future_sufficient(table, involution(table, x), horizon, branch_budget);
}

AnsatzReport ansatz_sampler(const Table& table, const std::vector<SingCurve>& s1,
                            long n_samples, int horizon, uint64_t seed, bool keep_rows) {
    std::vector<double> cum;
    double total = 0.0;
    for (const SingCurve& c : s1) {
        total += c.chart_length();
        cum.push_back(total);
    }
    if (s1.empty() || total <= 0.0) fail(Err::NoWitness, "no singularity curves to sample");

    AnsatzReport rep;
    rep.n_samples = n_samples;
    rep.horizon = horizon;
    rep.seed = seed;
    rep.per_curve_sufficient.assign(s1.size(), 0);
    rep.per_curve_total.assign(s1.size(), 0);

    Rng rng(seed);
    for (long i = 0; i < n_samples; ++i) {
        double u = rng.uniform() * total;
        size_t ci = std::lower_bound(cum.begin(), cum.end(), u) - cum.begin();
        if (ci >= s1.size()) ci = s1.size() - 1;
        const SingCurve& c = s1[ci];
        double along = u - (ci ? cum[ci - 1] : 0.0);

        Coord pt = curve_point_at(c, along);

        Sufficiency st = Sufficiency::Undetermined;
        try {
            st = is_past_sufficient(table, pt, horizon).status;
        } catch (const SdbError&) {
            st = Sufficiency::Undetermined;  // sampled a corner/tangential phase exactly
        }
        rep.per_curve_total[ci]++;
        if (st == Sufficiency::Sufficient) {
            rep.n_sufficient++;
            rep.per_curve_sufficient[ci]++;
        } else {
            rep.n_undetermined++;
        }
        if (keep_rows) rep.rows.push_back({(int)ci, pt.r, pt.phi, st});
    }
    rep.sufficient_fraction = n_samples ? (double)rep.n_sufficient / n_samples : 0.0;
    rep.undetermined_fraction = n_samples ? (double)rep.n_undetermined / n_samples : 0.0;
    return rep;
}

}  // namespace sdb
