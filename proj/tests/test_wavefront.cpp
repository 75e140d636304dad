#include <cmath>
#include <vector>

#include "doctest.h"
#include "test_helpers.hpp"
#include "wavefront.hpp"

using namespace sdb;

namespace {
constexpr double kDiskBottomR = 0.4 * M_PI / 2.0;

// Independent reference for the reversed-front growth: launch a flat front at
// the far end and push it back through the legs one at a time.
double kappa_direct(const std::vector<std::pair<double, double>>& legs, double B0 = 0.0) {
    double B = B0;
    double log_total = 0.0;
    for (int k = static_cast<int>(legs.size()) - 1; k >= 0; --k) {
        double tau = legs[static_cast<size_t>(k)].first;
        log_total += std::log(std::abs(1.0 + tau * B));
        B = B / (1.0 + tau * B);
        if (k > 0) B += legs[static_cast<size_t>(k - 1)].second;
    }
    return std::exp(log_total);
}
} // namespace

TEST_CASE("free transport closed forms") {
    CHECK(transport_free(0.0, 5.0) == doctest::Approx(0.0));
    CHECK(transport_free(2.0, 0.5) == doctest::Approx(1.0));
    CHECK(flight_factor(0.0, 7.0) == doctest::Approx(1.0));
    CHECK(flight_factor(2.0, 0.5) == doctest::Approx(2.0));
    CHECK(collision_kick_term(2.5, 1.0) == doctest::Approx(5.0).epsilon(1e-15));
    CHECK(collision_kick_term(0.0, 0.3) == doctest::Approx(0.0));
    CHECK(collision_kick_term(1.0, 0.5) == doctest::Approx(4.0).epsilon(1e-15));
}

TEST_CASE("free transport is a semigroup and factors multiply") {
    for (double B : {0.0, 0.3, 2.0, 50.0}) {
        for (double t1 : {0.1, 1.0}) {
            for (double t2 : {0.05, 2.5}) {
                double B1 = transport_free(B, t1);
                CHECK(transport_free(B1, t2) ==
                      doctest::Approx(transport_free(B, t1 + t2)).epsilon(1e-12));
                CHECK(flight_factor(B, t1) * flight_factor(B1, t2) ==
                      doctest::Approx(flight_factor(B, t1 + t2)).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("collect_legs: material clock folds wall crossings") {
    Table t = sdbtest::sinai();
    Rng rng(10);
    for (int trial = 0; trial < 20; ++trial) {
        Coord x = sample_coord(t, rng);
        OrbitLegs mat = collect_legs(t, x, 6, Clock::Material);
        if (mat.truncated) continue;
        OrbitLegs enl = collect_legs(t, x, 256, Clock::Enlarged);
        // Fold the enlarged legs by hand and compare.
        std::vector<Leg> folded;
        double pending = 0.0;
        for (const auto& leg : enl.legs) {
            pending += leg.tau;
            if (leg.material) {
                Leg m = leg;
                m.tau = pending;
                folded.push_back(m);
                pending = 0.0;
            }
        }
        if (folded.size() < mat.legs.size()) continue;  // long free flight, rare
        for (size_t k = 0; k < mat.legs.size(); ++k) {
            CHECK(mat.legs[k].tau == doctest::Approx(folded[k].tau).epsilon(1e-10));
            CHECK(mat.legs[k].kick == doctest::Approx(folded[k].kick).epsilon(1e-10));
            CHECK(mat.legs[k].coord.r ==
                  doctest::Approx(folded[k].coord.r).epsilon(1e-9));
        }
    }
}

TEST_CASE("expansion on the vertical bouncer: both clocks agree") {
    Table t = sdbtest::sinai();
    Coord x{kDiskBottomR, 0.0};

    ExpansionResult mat = expansion(t, x, 2, 0.0, Clock::Material);
    REQUIRE(mat.steps.size() == 2);
    CHECK(mat.steps[0].tau == doctest::Approx(0.2).epsilon(1e-10));
    CHECK(mat.steps[0].B_before == doctest::Approx(0.0));
    CHECK(mat.steps[0].B_after == doctest::Approx(5.0).epsilon(1e-9));
    CHECK(mat.steps[0].factor == doctest::Approx(1.0));
    CHECK(mat.steps[1].B_before == doctest::Approx(2.5).epsilon(1e-9));
    CHECK(mat.steps[1].B_after == doctest::Approx(7.5).epsilon(1e-9));
    CHECK(mat.steps[1].factor == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(mat.log_growth == doctest::Approx(std::log(2.0)).epsilon(1e-9));

    ExpansionResult enl = expansion(t, x, 4, 0.0, Clock::Enlarged);
    REQUIRE(enl.steps.size() == 4);
    CHECK(enl.log_growth == doctest::Approx(mat.log_growth).epsilon(1e-10));
    CHECK(enl.B_final == doctest::Approx(mat.B_final).epsilon(1e-9));
    CHECK(enl.B_final == doctest::Approx(7.5).epsilon(1e-9));
}

TEST_CASE("square keeps a flat front flat") {
    Table t = sdbtest::square();
    Rng rng(3);
    for (int i = 0; i < 20; ++i) {
        Coord x = sample_coord(t, rng);
        ExpansionResult r = expansion(t, x, 10, 0.0, Clock::Material);
        if (r.truncated) continue;
        CHECK(r.log_growth == 0.0);
        CHECK(r.B_final == 0.0);
        for (const auto& s : r.steps) {
            CHECK(s.factor == 1.0);
            CHECK(s.B_after == 0.0);
        }
    }
}

TEST_CASE("KappaLadder matches the direct reversed-front computation") {
    Rng rng(42);
    for (int trial = 0; trial < 50; ++trial) {
        int n = 1 + int(rng.uniform() * 12);
        std::vector<std::pair<double, double>> legs;
        KappaLadder ladder;
        for (int k = 0; k < n; ++k) {
            double tau = 0.05 + rng.uniform() * 2.0;
            double kick = rng.uniform() < 0.3 ? 0.0 : rng.uniform() * 8.0;
            legs.push_back({tau, kick});
            ladder.push(tau, kick);
        }
        CHECK(ladder.size() == n);
        CHECK(ladder.kappa() == doctest::Approx(kappa_direct(legs)).epsilon(1e-9));
        for (double B0 : {0.0, 0.5, 3.0}) {
            CHECK(ladder.kappa_of(B0) ==
                  doctest::Approx(kappa_direct(legs, B0)).epsilon(1e-9));
        }
        // Flat start gives the smallest growth on dispersing legs.
        CHECK(ladder.kappa() <= ladder.kappa_of(1.0) * (1.0 + 1e-12));
    }
}

TEST_CASE("KappaLadder stays finite over long products (renormalization)") {
    KappaLadder ladder;
    std::vector<std::pair<double, double>> legs;
    double log_direct = 0.0;
    double B = 0.0;
    Rng rng(7);
    const int n = 400;
    for (int k = 0; k < n; ++k) {
        legs.push_back({0.5 + rng.uniform(), 2.0 + rng.uniform() * 6.0});
    }
    for (const auto& leg : legs) ladder.push(leg.first, leg.second);
    for (int k = n - 1; k >= 0; --k) {
        double tau = legs[size_t(k)].first;
        log_direct += std::log(std::abs(1.0 + tau * B));
        B = B / (1.0 + tau * B);
        if (k > 0) B += legs[size_t(k - 1)].second;
    }
    CHECK(std::isfinite(ladder.log_kappa()));
    CHECK(ladder.log_kappa() == doctest::Approx(log_direct).epsilon(1e-9));
    CHECK(ladder.reversed_curvature() == doctest::Approx(B).epsilon(1e-9));
}

TEST_CASE("kappa on the sinai table: monotone ladder, flat minimum") {
    Table t = sdbtest::sinai();
    Rng rng(5);
    int done = 0;
    while (done < 25) {
        Coord x = sample_coord(t, rng);
        KappaResult k = kappa(t, x, 12, 0.01);
        if (k.truncated) continue;
        ++done;
        REQUIRE(k.kappa_by_step.size() == 12);
        double prev = 0.0;
        for (double v : k.kappa_by_step) {
            CHECK(v >= prev - 1e-12 * std::max(1.0, prev));
            CHECK(v >= 1.0 - 1e-12);
            prev = v;
        }
        CHECK(k.kappa0 == doctest::Approx(k.kappa_by_step.back()));
        CHECK(k.B_argmin == 0.0);
        CHECK(k.kappa_delta == doctest::Approx(k.kappa0).epsilon(1e-12));
        CHECK(k.base_extent == doctest::Approx(0.01 / k.kappa0).epsilon(1e-12));
        CHECK(k.kappa0 > 1.0);  // dispersing: strict growth after 12 collisions
    }
}

TEST_CASE("kappa on the square is exactly one") {
    Table t = sdbtest::square();
    Coord x{0.3, 0.0};
    KappaResult k = kappa(t, x, 8, 0.05);
    REQUIRE(!k.truncated);
    CHECK(k.kappa0 == doctest::Approx(1.0));
    CHECK(k.kappa_delta == doctest::Approx(1.0));
    CHECK(k.base_extent == doctest::Approx(0.05));
}

TEST_CASE("approx_stable_manifold produces a positive extent off the singularities") {
    Table t = sdbtest::sinai();
    Rng rng(13);
    int done = 0;
    while (done < 10) {
        Coord x = sample_coord(t, rng);
        StableManifold sm;
        try {
            sm = approx_stable_manifold(t, x, 8);
        } catch (const SdbError&) {
            continue;  // backward step singular; resample
        }
        if (sm.truncated || sm.steps.empty()) continue;
        ++done;
        CHECK(sm.extent > 0.0);
        CHECK(sm.B_stable <= 1e-12);
        double min_bound = sm.steps[0].bound;
        for (const auto& st : sm.steps) {
            CHECK(st.bound == doctest::Approx(st.kappa_k * st.z_k).epsilon(1e-12));
            min_bound = std::min(min_bound, st.bound);
        }
        CHECK(sm.extent == doctest::Approx(min_bound).epsilon(1e-12));
    }
}
