#include <cmath>
#include <numeric>

#include "diagnostics.hpp"
#include "doctest.h"
#include "test_helpers.hpp"

using namespace sdb;

TEST_CASE("tail cutoff is the dyadic log") {
    CHECK(tail_cutoff(0.25) == doctest::Approx(2.0));
    CHECK(tail_cutoff(1e-2) == doctest::Approx(std::log2(100.0)));
    CHECK_THROWS_AS(tail_cutoff(0.0), SdbError);
}

TEST_CASE("classify: square vertical bouncer is good for the whole horizon") {
    Table t = sdbtest::square();
    PointVerdict v = classify_point(t, Coord{0.3, 0.0}, 1e-2);
    CHECK(v.cls == PointClass::Good);
    CHECK(v.steps == 64);
    CHECK(v.bad_n == -1);
}

TEST_CASE("classify: near-corner landing is bad, exact corner undetermined") {
    Table t = sdbtest::square();
    // Slightly off the exact corner aim: the first collision lands ~1e-4 from
    // the corner, well inside the clearance bound c3 * delta = 1e-3.
    double phi_corner = std::atan(0.5);
    PointVerdict bad = classify_point(t, Coord{0.5, phi_corner - 1e-4}, 1e-2);
    CHECK(bad.cls == PointClass::Bad);
    CHECK(bad.bad_n == 1);
    CHECK(bad.z_n < 1e-3);
    CHECK(bad.kappa_n == doctest::Approx(1.0));

    PointVerdict und = classify_point(t, Coord{0.5, phi_corner}, 1e-2);
    CHECK(und.cls == PointClass::Undetermined);
}

TEST_CASE("classify: early good exit once the bound collapses") {
    Table t = sdbtest::sinai();
    Rng rng(6);
    bool saw_early = false;
    for (int i = 0; i < 10; ++i) {
        Coord x = sample_coord(t, rng);
        PointVerdict v = classify_point(t, x, 1e-10);
        if (v.cls == PointClass::Good && v.steps < 64) saw_early = true;
    }
    CHECK(saw_early);  // kappa growth pushes the bound under the floor quickly
}

TEST_CASE("nu_measure closed forms and ball sampling") {
    Table t = sdbtest::sinai();
    U0Ball whole;
    CHECK(nu_measure(t, whole) == doctest::Approx(2.0 * t.material_length).epsilon(1e-12));

    U0Ball ball;
    ball.whole = false;
    ball.r0 = 1.0;
    ball.phi0 = 0.3;
    ball.radius = 0.2;
    double expect = 0.4 * (std::sin(0.5) - std::sin(0.1));
    CHECK(nu_measure(t, ball) == doctest::Approx(expect).epsilon(1e-12));

    // Angular clipping at the tangency edge.
    U0Ball edge = ball;
    edge.phi0 = 1.5;
    double clipped = 0.4 * (std::sin(M_PI / 2) - std::sin(1.3));
    CHECK(nu_measure(t, edge) == doctest::Approx(clipped).epsilon(1e-12));

    Rng rng(3);
    for (int i = 0; i < 500; ++i) {
        Coord x = sample_ball(t, rng, ball);
        double dr = std::abs(x.r - ball.r0);
        dr = std::min(dr, t.material_length - dr);
        CHECK(dr <= ball.radius + 1e-12);
        CHECK(x.phi >= 0.1 - 1e-12);
        CHECK(x.phi <= 0.5 + 1e-12);
    }
}

TEST_CASE("tail estimate: exact partition and deterministic reductions") {
    Table t = sdbtest::sinai();
    std::vector<double> deltas = {1e-2};
    TailReport rep = tail_estimate(t, deltas, 400, 99, {}, 1);
    REQUIRE(rep.rows.size() == 1);
    const TailRow& row = rep.rows[0];
    CHECK(row.n_samples == 400);
    CHECK(row.n_good + row.n_bad + row.n_undetermined == 400);
    long hist_total = std::accumulate(row.bad_at_n.begin(), row.bad_at_n.end(), 0L);
    CHECK(hist_total == row.n_bad);
    CHECK(row.n_tail <= row.n_bad);
    CHECK(row.n_witnessed <= row.n_tail);
    long tilde_total = 0;
    for (const auto& [nm, cnt] : row.tilde_nm) tilde_total += cnt;
    CHECK(tilde_total == row.n_witnessed);
    double mass = nu_measure(t, U0Ball{});
    CHECK(row.nu_tail_hat ==
          doctest::Approx(mass * double(row.n_tail) / 400.0).epsilon(1e-12));
    CHECK(row.ratio == doctest::Approx(row.nu_tail_hat / 1e-2).epsilon(1e-12));

    // Bitwise identical under a different worker count.
    TailReport rep4 = tail_estimate(t, deltas, 400, 99, {}, 4);
    const TailRow& row4 = rep4.rows[0];
    CHECK(row4.n_good == row.n_good);
    CHECK(row4.n_bad == row.n_bad);
    CHECK(row4.n_undetermined == row.n_undetermined);
    CHECK(row4.n_tail == row.n_tail);
    CHECK(row4.n_witnessed == row.n_witnessed);
    CHECK(row4.nu_tail_hat == row.nu_tail_hat);
    CHECK(row4.std_err == row.std_err);
    CHECK(row4.bad_at_n == row.bad_at_n);
    CHECK(row4.tilde_nm == row.tilde_nm);
}

TEST_CASE("tilde witness is trivially absent for good points") {
    Table t = sdbtest::square();
    Coord x{0.3, 0.0};
    PointVerdict v = classify_point(t, x, 1e-2);
    REQUIRE(v.cls == PointClass::Good);
    WitnessResult w = tilde_witness(t, x, v, 1e-2);
    CHECK(!w.found);
}

TEST_CASE("calibrate_c3: goodness is monotone in the constant") {
    Table t = sdbtest::sinai();
    auto rows = calibrate_c3(t, {0.02, 0.1, 0.5, 2.0}, 1e-2, 300, 5);
    REQUIRE(rows.size() == 4);
    for (size_t k = 0; k < rows.size(); ++k) {
        CHECK(rows[k].n_samples == 300);
        double sum = rows[k].frac_good + rows[k].frac_bad + rows[k].frac_undetermined;
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
        if (k > 0) CHECK(rows[k].frac_good <= rows[k - 1].frac_good + 1e-12);
    }
}

TEST_CASE("lyapunov: flat table gives exactly zero, dispersing table is positive") {
    Table sq = sdbtest::square();
    LyapunovEstimate flat = lyapunov_orbit(sq, Coord{0.37, 0.21}, 2000);
    CHECK(flat.exponent == 0.0);
    CHECK(flat.collisions == 2000);

    Table si = sdbtest::sinai();
    Rng rng(12);
    LyapunovEstimate pos = lyapunov_orbit(si, sample_coord(si, rng), 5000);
    CHECK(pos.exponent > 0.3);
    CHECK(pos.exponent < 4.0);
    CHECK(!pos.trace.empty());

    LyapunovEnsemble ens = lyapunov_ensemble(si, 3000, 6, 17);
    CHECK(ens.exponents.size() == 6);
    CHECK(ens.mean > 0.3);
    CHECK(ens.dispersion / ens.mean < 0.2);

    // Worker split does not change the ensemble numbers.
    LyapunovEnsemble ens2 = lyapunov_ensemble(si, 3000, 6, 17, 3);
    CHECK(ens2.mean == ens.mean);
    CHECK(ens2.dispersion == ens.dispersion);
}

TEST_CASE("birkhoff probe: exact observables and honest sufficiency note") {
    Table sq = sdbtest::square();
    U0Ball u0;
    std::vector<std::pair<TestFn, int>> fns = {{TestFn::One, 0}, {TestFn::CosPhi, 0}};
    BirkhoffReport rep = birkhoff_probe(sq, Coord{0.3, 0.1}, u0, fns, 500, 4, 21);
    REQUIRE(rep.rows.size() == 2);
    CHECK(rep.rows[0].mean == doctest::Approx(1.0));
    CHECK(rep.rows[0].dispersion == doctest::Approx(0.0));
    CHECK(rep.center_checked);
    CHECK(!rep.center_sufficient);  // nothing in the square is curved

    Table si = sdbtest::sinai();
    std::vector<std::pair<TestFn, int>> fns2 = {{TestFn::OnComponent, 0},
                                                {TestFn::CosPhi, 0}};
    Rng rng(2);
    BirkhoffReport rep2 = birkhoff_probe(si, sample_coord(si, rng), u0, fns2, 2000, 8, 23);
    REQUIRE(rep2.rows.size() == 2);
    // Every material collision on the sinai table is on the disk.
    CHECK(rep2.rows[0].mean == doctest::Approx(1.0));
    CHECK(rep2.rows[0].dispersion == doctest::Approx(0.0));
    // Ergodic average of cos(phi) approaches pi/4.
    CHECK(rep2.rows[1].mean == doctest::Approx(M_PI / 4).epsilon(0.05));
    CHECK(rep2.center_sufficient);
}

TEST_CASE("invariance check: identity controls vanish, map preserves the measure") {
    Table t = sdbtest::sinai();
    InvarianceReport rep = invariance_check(t, 20000, 31);
    CHECK(rep.n_samples == 20000);
    CHECK(rep.ks_identity == 0.0);
    CHECK(rep.chi2_identity == 0.0);
    CHECK(rep.p_r > 1e-4);
    CHECK(rep.p_phi > 1e-4);
    CHECK(rep.p_chi2 > 1e-6);
    CHECK(rep.chi2_dof > 100.0);
}
