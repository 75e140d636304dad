#include "diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <mutex>
#include <string>
#include <thread>

#include "errors.hpp"
#include "singularity.hpp"
#include "stats.hpp"
#include "sufficiency.hpp"
#include "wavefront.hpp"

namespace sdb {

namespace {

// Runs body(lo, hi) over contiguous index blocks.  Results must be written to
// preallocated per-index slots so the outcome is independent of scheduling.
void parallel_for(long n, int workers, const std::function<void(long, long)>& body) {
    workers = std::max(1, workers);
    if (workers == 1 || n < 2L * workers) {
        body(0, n);
        return;
    }
    long chunk = (n + workers - 1) / workers;
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
        long lo = w * chunk;
        long hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back(body, lo, hi);
    }
    for (std::thread& t : pool) t.join();
}

// Exceptions must not escape worker threads; the first one is rethrown after join.
struct WorkerTrap {
    std::mutex mu;
    bool hit = false;
    std::string what;

    void capture(const std::exception& e) {
        std::lock_guard<std::mutex> lock(mu);
        if (!hit) {
            hit = true;
            what = e.what();
        }
    }
    void rethrow() const {
        if (hit) fail(Err::Internal, "worker failed: " + what);
    }
};

// One material step of the event map: wall crossings are folded into the leg
// time.  Returns false on a corner, a grazing pass, or a crossing budget blowup
// (infinite-horizon ray), leaving *cur at the stopping coordinate.
bool material_step(const Table& table, Coord* cur, double* tau, double* kick) {
    double pending = 0.0;
    for (int guard = 0; guard < (1 << 12); ++guard) {
        CollisionEvent ev = collision_map(table, *cur);
        if (ev.cls == EventClass::Corner || ev.cls == EventClass::Tangential) return false;
        if (ev.cls == EventClass::Transparent) {
            pending += ev.t;
            *cur = ev.coord;
            continue;
        }
        double s_local = 0.0;
        int comp = table.component_at(ev.coord.r, &s_local);
        *tau = pending + ev.t;
        *kick = collision_kick_term(table.comp(comp).curvature(), ev.cos_phi);
        *cur = ev.coord;
        return true;
    }
    return false;
}

// Restart point for orbit-ensemble walks that ran into a singularity: shift
// along the boundary and pull the angle toward normal incidence.
void nudge_off_singularity(const Table& table, Coord* cur) {
    double len = table.material_length;
    double phi = cur->phi * (1.0 - 1e-6);
    for (int k = 1; k <= 64; ++k) {
        double r = std::fmod(cur->r + k * 1e-6 * len, len);
        if (table.corner_at(r) >= 0) continue;
        while (std::cos(phi) < kTangencyTol) phi *= 0.5;
        cur->r = r;
        cur->phi = phi;
        return;
    }
    fail(Err::Internal, "could not nudge the orbit off the singularity");
}

double eval_fn(const Table& table, const std::pair<TestFn, int>& f, const Coord& m) {
    switch (f.first) {
        case TestFn::CosPhi:
            return std::cos(m.phi);
        case TestFn::OnComponent: {
            double s = 0.0;
            return table.component_at(m.r, &s) == f.second ? 1.0 : 0.0;
        }
        case TestFn::One:
            return 1.0;
    }
    return 0.0;
}

// Draw from cos(phi) dr dphi over the full event boundary, walls included.
Coord sample_coord_enlarged(const Table& table, Rng& rng) {
    for (int guard = 0; guard < 1000; ++guard) {
        double r = rng.uniform() * table.total_length;
        double phi = rng.cosine_phi();
        if (table.corner_at(r) >= 0) continue;
        if (std::cos(phi) < kTangencyTol) continue;
        return Coord{r, phi};
    }
    fail(Err::Internal, "event-space sampling kept hitting singular coordinates");
}

}  // namespace

double tail_cutoff(double delta) {
    if (!(delta > 0.0)) fail(Err::BadArgument, "delta must be positive");
    return std::log2(1.0 / delta);
}

const char* point_class_name(PointClass c) {
    switch (c) {
        case PointClass::Good:
            return "good";
        case PointClass::Bad:
            return "bad";
        case PointClass::Undetermined:
            return "undetermined";
    }
    return "?";
}

PointVerdict classify_point(const Table& table, const Coord& y, double delta,
                            const DiagnosticsConfig& cfg) {
    if (!(delta > 0.0)) fail(Err::BadArgument, "delta must be positive");
    if (!(cfg.c3 > 0.0)) fail(Err::BadArgument, "c3 must be positive");
    if (cfg.horizon < 1) fail(Err::BadArgument, "horizon must be at least 1");

    // Once the demanded clearance falls below float resolution every later step
    // holds trivially, so the verdict is already decided.
    const double floor_bound = 1e-13;

    PointVerdict out;
    Coord cur = y;
    KappaLadder ladder;
    try {
        for (int n = 1; n <= cfg.horizon; ++n) {
            double tau = 0.0;
            double kick = 0.0;
            if (!material_step(table, &cur, &tau, &kick)) {
                out.cls = PointClass::Undetermined;
                return out;
            }
            ladder.push(tau, kick);
            out.steps = n;
            double kap = ladder.kappa();
            double bound = cfg.c3 * delta / kap;
            if (bound < floor_bound) {
                out.cls = PointClass::Good;
                return out;
            }
            Coord rev = involution(table, cur);
            if (!z_tub_at_least(table, rev, bound)) {
                out.cls = PointClass::Bad;
                out.bad_n = n;
                out.kappa_n = kap;
                out.z_n = z_tub(table, rev);
                return out;
            }
        }
        out.cls = PointClass::Good;
    } catch (const SdbError&) {
        out.cls = PointClass::Undetermined;
    }
    return out;
}

double nu_measure(const Table& table, const U0Ball& ball) {
    if (ball.whole) return 2.0 * table.material_length;
    double half_pi = 0.5 * M_PI;
    double width = std::min(2.0 * ball.radius, table.material_length);
    double lo = std::max(-half_pi, ball.phi0 - ball.radius);
    double hi = std::min(half_pi, ball.phi0 + ball.radius);
    if (width <= 0.0 || hi <= lo) return 0.0;
    return width * (std::sin(hi) - std::sin(lo));
}

Coord sample_ball(const Table& table, Rng& rng, const U0Ball& ball) {
    if (ball.whole) return sample_coord(table, rng);
    double half_pi = 0.5 * M_PI;
    double len = table.material_length;
    double width = std::min(2.0 * ball.radius, len);
    double lo = std::max(-half_pi, ball.phi0 - ball.radius);
    double hi = std::min(half_pi, ball.phi0 + ball.radius);
    if (width <= 0.0 || hi <= lo) fail(Err::BadArgument, "sampling ball has empty measure");
    double sin_lo = std::sin(lo);
    double sin_hi = std::sin(hi);
    for (int guard = 0; guard < 1000; ++guard) {
        double r = std::fmod(ball.r0 - 0.5 * width + rng.uniform() * width + len, len);
        double phi = std::asin(rng.uniform(sin_lo, sin_hi));
        if (table.corner_at(r) >= 0) continue;
        if (std::cos(phi) < kTangencyTol) continue;
        return Coord{r, phi};
    }
    fail(Err::Internal, "ball sampling kept hitting singular coordinates");
}

WitnessResult tilde_witness(const Table& table, const Coord& x, const PointVerdict& v,
                            double delta, const DiagnosticsConfig& cfg) {
    WitnessResult out;
    if (v.cls != PointClass::Bad || v.bad_n < 1) return out;
    if (!(cfg.lambda > 1.0)) fail(Err::BadArgument, "stratum base must exceed 1");
    out.m = static_cast<int>(
        std::floor(std::log(std::max(v.kappa_n, 1.0)) / std::log(cfg.lambda)));
    try {
        Coord cur = x;
        for (int k = 0; k < v.bad_n; ++k) {
            double tau = 0.0;
            double kick = 0.0;
            if (!material_step(table, &cur, &tau, &kick)) return out;
        }
        FlowPoint f = coord_to_flow(table, cur);
        CollisionEvent lead = first_event(table, f);
        if (lead.cls == EventClass::Corner) return out;
        double eps1 = 0.5 * lead.t;
        Vec2 qf = f.q + eps1 * f.v;
        Vec2 sdir = perp(f.v);
        double window = cfg.c3 * delta / std::max(v.kappa_n, 1.0);
        double step = std::min(cfg.c3 * delta / 20.0, window / 8.0);
        if (!(window > 0.0) || !(step > 0.0)) return out;

        auto probe_at = [&](double s) { return probe_material(table, qf + s * sdir, f.v); };

        // Bracket every branch change of the forward landing along the fiber.
        struct Bracket {
            double lo = 0.0, hi = 0.0;
        };
        std::vector<Bracket> brackets;
        RayProbe center = probe_at(0.0);
        for (int side : {+1, -1}) {
            RayProbe prev = center;
            double s_prev = 0.0;
            int k_max = static_cast<int>(std::floor(window / step));
            for (int j = 1; j <= k_max + 1; ++j) {
                double s = side * std::min(j * step, window);
                if (std::abs(s) <= std::abs(s_prev)) break;
                RayProbe curp = probe_at(s);
                if (probe_branch_changed(table, prev, curp)) brackets.push_back({s_prev, s});
                prev = curp;
                s_prev = s;
            }
        }
        std::sort(brackets.begin(), brackets.end(), [](const Bracket& a, const Bracket& b) {
            return std::min(std::abs(a.lo), std::abs(a.hi)) <
                   std::min(std::abs(b.lo), std::abs(b.hi));
        });

        for (const Bracket& br : brackets) {
            double lo = br.lo;
            double hi = br.hi;
            RayProbe plo = probe_at(lo);
            for (int it = 0; it < 80 && std::abs(hi - lo) > 1e-12 * window; ++it) {
                double mid = 0.5 * (lo + hi);
                RayProbe pm = probe_at(mid);
                if (probe_branch_changed(table, plo, pm)) {
                    hi = mid;
                } else {
                    lo = mid;
                    plo = pm;
                }
            }
            // Candidates hug the singular parameter from both smooth sides.
            for (double s_cand : {lo, hi}) {
                RayProbe back = probe_material(table, qf + s_cand * sdir, -1.0 * f.v);
                if (!back.ok || back.corner_id >= 0 || back.tangential) continue;
                if (back.cos_incidence < 1e-9) continue;
                Coord y{back.component, back.r, phi_of(f.v, back.normal)};
                if (is_past_sufficient(table, y, cfg.suff_horizon).status ==
                    Sufficiency::Sufficient) {
                    out.found = true;
                    out.s_star = s_cand;
                    out.y = y;
                    return out;
                }
            }
        }
    } catch (const SdbError&) {
        // unusable geometry along the fiber: report no witness
    }
    return out;
}

TailReport tail_estimate(const Table& table, const std::vector<double>& deltas,
                         long n_samples, uint64_t seed, const DiagnosticsConfig& cfg,
                         int workers, const U0Ball& ball) {
    if (deltas.empty()) fail(Err::BadArgument, "need at least one delta");
    for (double d : deltas)
        if (!(d > 0.0)) fail(Err::BadArgument, "delta must be positive");
    if (n_samples < 1) fail(Err::BadArgument, "need at least one sample");

    TailReport rep;
    rep.cfg = cfg;
    rep.seed = seed;
    rep.ball = ball;
    rep.n_samples = n_samples;
    double mass = nu_measure(table, ball);

    for (size_t di = 0; di < deltas.size(); ++di) {
        double delta = deltas[di];
        uint64_t dseed = child_seed(seed, 1000003ULL + di);
        std::vector<signed char> cls(static_cast<size_t>(n_samples), 2);
        std::vector<int> badn(static_cast<size_t>(n_samples), -1);
        std::vector<double> kapn(static_cast<size_t>(n_samples), 1.0);

        WorkerTrap trap;
        parallel_for(n_samples, workers, [&](long lo, long hi) {
            try {
                for (long i = lo; i < hi; ++i) {
                    Rng rng(child_seed(dseed, static_cast<uint64_t>(i)));
                    Coord y = sample_ball(table, rng, ball);
                    PointVerdict pv = classify_point(table, y, delta, cfg);
                    cls[i] = pv.cls == PointClass::Good ? 0
                             : pv.cls == PointClass::Bad ? 1
                                                         : 2;
                    badn[i] = pv.bad_n;
                    kapn[i] = pv.kappa_n;
                }
            } catch (const std::exception& e) {
                trap.capture(e);
            }
        });
        trap.rethrow();

        TailRow row;
        row.delta = delta;
        row.n_samples = n_samples;
        row.bad_at_n.assign(static_cast<size_t>(cfg.horizon) + 1, 0);
        double cut = tail_cutoff(delta);
        for (long i = 0; i < n_samples; ++i) {
            if (cls[i] == 0) {
                ++row.n_good;
            } else if (cls[i] == 2) {
                ++row.n_undetermined;
            } else {
                ++row.n_bad;
                int n = badn[i];
                if (n >= 0 && n <= cfg.horizon) ++row.bad_at_n[n];
                if (n > cut) {
                    ++row.n_tail;
                    Rng rng(child_seed(dseed, static_cast<uint64_t>(i)));
                    Coord y = sample_ball(table, rng, ball);
                    PointVerdict pv;
                    pv.cls = PointClass::Bad;
                    pv.bad_n = n;
                    pv.kappa_n = kapn[i];
                    WitnessResult w = tilde_witness(table, y, pv, delta, cfg);
                    if (w.found) {
                        ++row.n_witnessed;
                        ++row.tilde_nm[{n, w.m}];
                    }
                }
            }
        }
        double p = static_cast<double>(row.n_tail) / static_cast<double>(n_samples);
        row.nu_tail_hat = mass * p;
        row.std_err =
            mass * std::sqrt(std::max(0.0, p * (1.0 - p) / static_cast<double>(n_samples)));
        row.ratio = row.nu_tail_hat / delta;
        row.insufficient = row.n_tail == 0 || row.std_err > 0.25 * row.nu_tail_hat;
        rep.rows.push_back(std::move(row));
    }
    return rep;
}

LyapunovEstimate lyapunov_orbit(const Table& table, const Coord& x, long n_collisions) {
    if (n_collisions < 1) fail(Err::BadArgument, "need at least one collision");
    LyapunovEstimate out;
    Coord cur = x;
    double B = 0.0;
    double log_sum = 0.0;
    long done = 0;
    long checkpoint = 1;
    long guard = 8 * n_collisions + 1024;
    while (done < n_collisions) {
        if (--guard < 0) fail(Err::Internal, "orbit kept restarting without progress");
        double tau = 0.0;
        double kick = 0.0;
        bool ok = false;
        try {
            ok = material_step(table, &cur, &tau, &kick);
        } catch (const SdbError&) {
            ok = false;
        }
        if (!ok) {
            nudge_off_singularity(table, &cur);
            B = 0.0;
            ++out.restarts;
            continue;
        }
        log_sum += std::log(flight_factor(B, tau));
        B = transport_free(B, tau) + kick;
        ++done;
        if (done == checkpoint || done == n_collisions) {
            out.trace.push_back(log_sum / static_cast<double>(done));
            checkpoint *= 2;
        }
    }
    out.exponent = log_sum / static_cast<double>(n_collisions);
    out.collisions = n_collisions;
    return out;
}

LyapunovEnsemble lyapunov_ensemble(const Table& table, long n_collisions, int n_starts,
                                   uint64_t seed, int workers) {
    if (n_starts < 1) fail(Err::BadArgument, "need at least one start");
    LyapunovEnsemble out;
    out.collisions = n_collisions;
    out.exponents.assign(static_cast<size_t>(n_starts), 0.0);
    std::vector<int> restarts(static_cast<size_t>(n_starts), 0);

    WorkerTrap trap;
    parallel_for(n_starts, workers, [&](long lo, long hi) {
        try {
            for (long i = lo; i < hi; ++i) {
                Rng rng(child_seed(seed, 4000037ULL + static_cast<uint64_t>(i)));
                Coord y = sample_coord(table, rng);
                LyapunovEstimate est = lyapunov_orbit(table, y, n_collisions);
                out.exponents[i] = est.exponent;
                restarts[i] = est.restarts;
            }
        } catch (const std::exception& e) {
            trap.capture(e);
        }
    });
    trap.rethrow();

    for (int r : restarts) out.restarts += r;
    stats::MeanVar mv = stats::mean_var(out.exponents);
    out.mean = mv.mean;
    out.dispersion = std::sqrt(mv.variance);
    return out;
}

const char* test_fn_name(TestFn f) {
    switch (f) {
        case TestFn::CosPhi:
            return "cos_phi";
        case TestFn::OnComponent:
            return "on_component";
        case TestFn::One:
            return "one";
    }
    return "?";
}

BirkhoffReport birkhoff_probe(const Table& table, const Coord& x0, const U0Ball& u0,
                              const std::vector<std::pair<TestFn, int>>& fns,
                              long n_collisions, int n_starts, uint64_t seed, int workers) {
    if (fns.empty()) fail(Err::BadArgument, "need at least one observable");
    if (n_starts < 1) fail(Err::BadArgument, "need at least one start");
    if (n_collisions < 1) fail(Err::BadArgument, "need at least one collision");

    BirkhoffReport rep;
    rep.collisions = n_collisions;
    rep.n_starts = n_starts;
    try {
        rep.center_sufficient =
            is_future_sufficient(table, x0, 100).status == Sufficiency::Sufficient;
        rep.center_checked = true;
    } catch (const SdbError&) {
        rep.center_checked = false;
    }

    size_t nf = fns.size();
    std::vector<std::vector<double>> avg(nf, std::vector<double>(n_starts, 0.0));
    std::vector<signed char> truncated(static_cast<size_t>(n_starts), 0);

    WorkerTrap trap;
    parallel_for(n_starts, workers, [&](long lo, long hi) {
        try {
            for (long i = lo; i < hi; ++i) {
                Rng rng(child_seed(seed, 7000019ULL + static_cast<uint64_t>(i)));
                Coord cur = sample_ball(table, rng, u0);
                std::vector<double> sum(nf, 0.0);
                long done = 0;
                for (long k = 0; k < n_collisions; ++k) {
                    double tau = 0.0;
                    double kick = 0.0;
                    bool ok = false;
                    try {
                        ok = material_step(table, &cur, &tau, &kick);
                    } catch (const SdbError&) {
                        ok = false;
                    }
                    if (!ok) {
                        truncated[i] = 1;
                        break;
                    }
                    ++done;
                    for (size_t fi = 0; fi < nf; ++fi) sum[fi] += eval_fn(table, fns[fi], cur);
                }
                for (size_t fi = 0; fi < nf; ++fi)
                    avg[fi][i] = done > 0 ? sum[fi] / static_cast<double>(done) : 0.0;
            }
        } catch (const std::exception& e) {
            trap.capture(e);
        }
    });
    trap.rethrow();

    for (signed char t : truncated) rep.truncated_starts += t;
    for (size_t fi = 0; fi < nf; ++fi) {
        BirkhoffRow row;
        row.fn = fns[fi].first;
        row.component = fns[fi].second;
        row.averages = std::move(avg[fi]);
        stats::MeanVar mv = stats::mean_var(row.averages);
        row.mean = mv.mean;
        row.dispersion = std::sqrt(mv.variance);
        rep.rows.push_back(std::move(row));
    }
    return rep;
}

InvarianceReport invariance_check(const Table& table, long n_samples, uint64_t seed,
                                  int workers) {
    if (n_samples < 2) fail(Err::BadArgument, "need at least two samples");
    InvarianceReport rep;
    rep.n_samples = n_samples;

    std::vector<double> r_a(static_cast<size_t>(n_samples)), phi_a(r_a), r_b(r_a), phi_b(r_a);
    WorkerTrap trap;
    parallel_for(n_samples, workers, [&](long lo, long hi) {
        try {
            for (long i = lo; i < hi; ++i) {
                Rng rng(child_seed(seed, 500009ULL + static_cast<uint64_t>(i)));
                bool got = false;
                for (int tries = 0; tries < 100 && !got; ++tries) {
                    Coord y = sample_coord_enlarged(table, rng);
                    CollisionEvent ev = collision_map(table, y);
                    if (ev.cls == EventClass::Corner) continue;
                    r_a[i] = y.r;
                    phi_a[i] = y.phi;
                    r_b[i] = ev.coord.r;
                    phi_b[i] = ev.coord.phi;
                    got = true;
                }
                if (!got) fail(Err::Internal, "sample image kept landing on corners");
            }
        } catch (const std::exception& e) {
            trap.capture(e);
        }
    });
    trap.rethrow();

    rep.ks_r = stats::ks_two_sample(r_a, r_b, &rep.p_r);
    rep.ks_phi = stats::ks_two_sample(phi_a, phi_b, &rep.p_phi);

    const int nb = 50;
    std::vector<double> ca(nb * nb, 0.0), cb(nb * nb, 0.0);
    auto bin = [&](double r, double phi) {
        int br = std::clamp(static_cast<int>(r / table.total_length * nb), 0, nb - 1);
        int bp = std::clamp(static_cast<int>((phi / M_PI + 0.5) * nb), 0, nb - 1);
        return br * nb + bp;
    };
    for (long i = 0; i < n_samples; ++i) {
        ca[bin(r_a[i], phi_a[i])] += 1.0;
        cb[bin(r_b[i], phi_b[i])] += 1.0;
    }
    rep.chi2 = stats::chi2_two_sample(ca, cb, &rep.chi2_dof);
    rep.p_chi2 = stats::chi2_sf(rep.chi2, rep.chi2_dof);

    double p_id = 0.0;
    rep.ks_identity = stats::ks_two_sample(r_a, r_a, &p_id);
    double dof_id = 0.0;
    rep.chi2_identity = stats::chi2_two_sample(ca, ca, &dof_id);
    return rep;
}

std::vector<C3Row> calibrate_c3(const Table& table, const std::vector<double>& c3_grid,
                                double delta, long n_samples, uint64_t seed,
                                const DiagnosticsConfig& cfg, int workers) {
    if (c3_grid.empty()) fail(Err::BadArgument, "need at least one c3 value");
    if (n_samples < 1) fail(Err::BadArgument, "need at least one sample");
    double cut = tail_cutoff(delta);

    std::vector<C3Row> rows;
    for (double c3 : c3_grid) {
        if (!(c3 > 0.0)) fail(Err::BadArgument, "c3 must be positive");
        DiagnosticsConfig local = cfg;
        local.c3 = c3;
        std::vector<signed char> cls(static_cast<size_t>(n_samples), 2);
        std::vector<int> badn(static_cast<size_t>(n_samples), -1);

        WorkerTrap trap;
        parallel_for(n_samples, workers, [&](long lo, long hi) {
            try {
                for (long i = lo; i < hi; ++i) {
                    // sample i is the same point for every c3 row
                    Rng rng(child_seed(seed, 2000003ULL + static_cast<uint64_t>(i)));
                    Coord y = sample_coord(table, rng);
                    PointVerdict pv = classify_point(table, y, delta, local);
                    cls[i] = pv.cls == PointClass::Good ? 0
                             : pv.cls == PointClass::Bad ? 1
                                                         : 2;
                    badn[i] = pv.bad_n;
                }
            } catch (const std::exception& e) {
                trap.capture(e);
            }
        });
        trap.rethrow();

        C3Row row;
        row.c3 = c3;
        row.delta = delta;
        row.n_samples = n_samples;
        long good = 0, bad = 0, tail = 0, und = 0;
        for (long i = 0; i < n_samples; ++i) {
            if (cls[i] == 0) {
                ++good;
            } else if (cls[i] == 1) {
                ++bad;
                if (badn[i] > cut) ++tail;
            } else {
                ++und;
            }
        }
        double n = static_cast<double>(n_samples);
        row.frac_good = good / n;
        row.frac_bad = bad / n;
        row.frac_tail = tail / n;
        row.frac_undetermined = und / n;
        rows.push_back(row);
    }
    return rows;
}

}  // namespace sdb
