#pragma once

#include <cstdint>
#include <map>
#include <utility>
#include <vector>

#include "dynamics.hpp"
#include "geometry.hpp"
#include "rng.hpp"

namespace sdb {

// Knobs shared by the classification and the Monte-Carlo layers built on it.
struct DiagnosticsConfig {
    double c3 = 0.1;         // tube-clearance constant (calibratable, see calibrate_c3)
    double lambda = 2.0;     // dyadic base of the expansion strata
    int horizon = 64;        // collisions examined per classified point
    int suff_horizon = 200;  // past-sufficiency horizon for tail witnesses
};

// Points first violating the clearance above this threshold form the tail.
double tail_cutoff(double delta);  // log2(1/delta)

enum class PointClass { Good, Bad, Undetermined };

const char* point_class_name(PointClass c);

struct PointVerdict {
    PointClass cls = PointClass::Undetermined;
    int bad_n = -1;        // first step violating the clearance inequality
    double kappa_n = 1.0;  // expansion accumulated at that step
    double z_n = 0.0;      // tube clearance of the reversed iterate at that step
    int steps = 0;         // material steps actually advanced
};

// A point is good when every reversed iterate keeps tube clearance
// z_tub(-T^n y) >= c3*delta / kappa_n(y) up to the horizon, bad at the first
// violation, undetermined when the orbit meets a corner or grazes first.
PointVerdict classify_point(const Table& table, const Coord& y, double delta,
                            const DiagnosticsConfig& cfg = {});

// Sampling region: the whole material boundary, or a small chart ball around
// (r0, phi0) with half-width `radius` in both r and phi.
struct U0Ball {
    bool whole = true;
    double r0 = 0.0;
    double phi0 = 0.0;
    double radius = 0.0;
};

double nu_measure(const Table& table, const U0Ball& ball);
Coord sample_ball(const Table& table, Rng& rng, const U0Ball& ball);

struct TailRow {
    double delta = 0.0;
    long n_samples = 0;
    long n_good = 0;
    long n_bad = 0;
    long n_undetermined = 0;
    long n_tail = 0;       // bad at some n > tail_cutoff(delta)
    long n_witnessed = 0;  // tail members with a past-sufficient fiber witness
    double nu_tail_hat = 0.0;
    double std_err = 0.0;
    double ratio = 0.0;         // nu_tail_hat / delta
    bool insufficient = false;  // relative standard error beyond 25%
    std::vector<long> bad_at_n;                    // histogram over the first bad step
    std::map<std::pair<int, int>, long> tilde_nm;  // witnessed tail counts by (n, m)
};

struct TailReport {
    DiagnosticsConfig cfg;
    uint64_t seed = 0;
    U0Ball ball;
    long n_samples = 0;
    std::vector<TailRow> rows;
};

// Monte-Carlo measure of the bad tail across a delta grid.  Deterministic for a
// fixed seed regardless of the worker count: sample i always uses the rng
// child_seed(delta_seed, i) and reductions run in index order.
TailReport tail_estimate(const Table& table, const std::vector<double>& deltas,
                         long n_samples, uint64_t seed, const DiagnosticsConfig& cfg = {},
                         int workers = 1, const U0Ball& ball = {});

// Witness search behind the tilde counters: scan the transverse fiber through
// the point eps1 ahead of T^n x for a past-sufficient phase point whose next
// material collision is singular, within chart distance c3*delta/kappa_n.
struct WitnessResult {
    bool found = false;
    double s_star = 0.0;  // fiber offset of the witness
    Coord y;
    int m = 0;  // expansion stratum floor(log_lambda kappa_n)
};

WitnessResult tilde_witness(const Table& table, const Coord& x, const PointVerdict& v,
                            double delta, const DiagnosticsConfig& cfg = {});

struct LyapunovEstimate {
    double exponent = 0.0;  // mean log expansion per material collision, flat start
    long collisions = 0;
    int restarts = 0;           // singular encounters resumed from a nudged point
    std::vector<double> trace;  // running estimate at doubling checkpoints
};

LyapunovEstimate lyapunov_orbit(const Table& table, const Coord& x, long n_collisions);

struct LyapunovEnsemble {
    double mean = 0.0;
    double dispersion = 0.0;  // cross-start standard deviation
    long collisions = 0;
    int restarts = 0;
    std::vector<double> exponents;
};

LyapunovEnsemble lyapunov_ensemble(const Table& table, long n_collisions, int n_starts,
                                   uint64_t seed, int workers = 1);

// Observables for the ergodic-average probe.
enum class TestFn { CosPhi, OnComponent, One };

const char* test_fn_name(TestFn f);

struct BirkhoffRow {
    TestFn fn = TestFn::CosPhi;
    int component = 0;             // observed component when fn == OnComponent
    std::vector<double> averages;  // one Birkhoff average per start
    double mean = 0.0;
    double dispersion = 0.0;  // cross-start standard deviation
};

struct BirkhoffReport {
    long collisions = 0;
    int n_starts = 0;
    int truncated_starts = 0;  // orbits cut short by a singular encounter
    bool center_checked = false;
    bool center_sufficient = false;  // recorded, never enforced
    std::vector<BirkhoffRow> rows;
};

BirkhoffReport birkhoff_probe(const Table& table, const Coord& x0, const U0Ball& u0,
                              const std::vector<std::pair<TestFn, int>>& fns,
                              long n_collisions, int n_starts, uint64_t seed,
                              int workers = 1);

struct InvarianceReport {
    long n_samples = 0;
    double ks_r = 0.0;
    double p_r = 0.0;
    double ks_phi = 0.0;
    double p_phi = 0.0;
    double chi2 = 0.0;
    double chi2_dof = 0.0;
    double p_chi2 = 0.0;
    // same statistics with the identity map in place of T (control: exactly 0)
    double ks_identity = 0.0;
    double chi2_identity = 0.0;
};

// Draws from cos(phi) dr dphi on the full event boundary (wall sections
// included) and compares the sample with its one-step image: KS on the r and
// phi marginals plus a two-sample chi-square on a 50x50 grid.
InvarianceReport invariance_check(const Table& table, long n_samples, uint64_t seed,
                                  int workers = 1);

struct C3Row {
    double c3 = 0.0;
    double delta = 0.0;
    long n_samples = 0;
    double frac_good = 0.0;
    double frac_bad = 0.0;
    double frac_tail = 0.0;
    double frac_undetermined = 0.0;
};

// Classification sweep over a c3 grid at fixed delta, same sample set per row.
std::vector<C3Row> calibrate_c3(const Table& table, const std::vector<double>& c3_grid,
                                double delta, long n_samples, uint64_t seed,
                                const DiagnosticsConfig& cfg = {}, int workers = 1);

}  // namespace sdb
