#include <cmath>
#include <vector>

#include "doctest.h"
#include "stats.hpp"

TEST_CASE("mean_var matches hand computation") {
    std::vector<double> xs = {1.0, 2.0, 3.0, 4.0};
    auto mv = sdb::stats::mean_var(xs);
    CHECK(mv.n == 4);
    CHECK(mv.mean == doctest::Approx(2.5).epsilon(1e-15));
    CHECK(mv.variance == doctest::Approx(5.0 / 3.0).epsilon(1e-15));
    CHECK(mv.stderr_mean == doctest::Approx(std::sqrt(5.0 / 3.0 / 4.0)).epsilon(1e-15));
}

TEST_CASE("mean_var of constant sample has zero variance") {
    std::vector<double> xs(17, 3.25);
    auto mv = sdb::stats::mean_var(xs);
    CHECK(mv.mean == doctest::Approx(3.25));
    CHECK(mv.variance == doctest::Approx(0.0));
}

TEST_CASE("KS: identical samples give zero distance, p = 1") {
    std::vector<double> a = {0.1, 0.4, 0.5, 0.9, 1.3, 2.0};
    double p = 0.0;
    double d = sdb::stats::ks_two_sample(a, a, &p);
    CHECK(d == doctest::Approx(0.0));
    CHECK(p == doctest::Approx(1.0));
}

TEST_CASE("KS: disjoint samples give distance 1 and tiny p") {
    std::vector<double> a = {0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 4.5,
                             0.1, 0.6, 1.1, 1.6, 2.1, 2.6, 3.1, 3.6, 4.1, 4.6};
    std::vector<double> b;
    for (double x : a) b.push_back(x + 100.0);
    double p = 1.0;
    double d = sdb::stats::ks_two_sample(a, b, &p);
    CHECK(d == doctest::Approx(1.0));
    CHECK(p < 1e-6);
}

TEST_CASE("kolmogorov_q endpoints") {
    CHECK(sdb::stats::kolmogorov_q(0.0) == doctest::Approx(1.0));
    CHECK(sdb::stats::kolmogorov_q(10.0) < 1e-12);
    // Known reference value Q(1) = 0.26999967...
    CHECK(sdb::stats::kolmogorov_q(1.0) == doctest::Approx(0.2699996716773).epsilon(1e-9));
}

TEST_CASE("gamma_q(1/2, x) equals erfc(sqrt(x))") {
    for (double x : {0.01, 0.1, 0.5, 1.0, 2.5, 7.0, 20.0}) {
        CHECK(sdb::stats::gamma_q(0.5, x) == doctest::Approx(std::erfc(std::sqrt(x))).epsilon(1e-10));
    }
}

TEST_CASE("chi-square survival with 2 dof is exp(-z/2)") {
    for (double z : {0.1, 0.7, 1.0, 3.0, 8.0, 25.0}) {
        CHECK(sdb::stats::chi2_sf(z, 2.0) == doctest::Approx(std::exp(-z / 2.0)).epsilon(1e-12));
    }
}

TEST_CASE("chi2_two_sample: identical histograms give statistic 0") {
    std::vector<double> a = {10, 20, 5, 0, 7};
    double dof = -1.0;
    double stat = sdb::stats::chi2_two_sample(a, a, &dof);
    CHECK(stat == doctest::Approx(0.0));
    CHECK(dof == doctest::Approx(3.0));  // four non-empty bins - 1
}

TEST_CASE("chi2_two_sample: fully separated mass, hand value") {
    std::vector<double> a = {10, 0};
    std::vector<double> b = {0, 10};
    double dof = -1.0;
    double stat = sdb::stats::chi2_two_sample(a, b, &dof);
    CHECK(stat == doctest::Approx(20.0).epsilon(1e-12));
    CHECK(dof == doctest::Approx(1.0));
}
