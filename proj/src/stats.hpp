#pragma once

#include <cstddef>
#include <vector>

namespace sdb::stats {

struct MeanVar {
    double mean = 0.0;
    double variance = 0.0;  // unbiased sample variance
    double stderr_mean = 0.0;
    std::size_t n = 0;
};

MeanVar mean_var(const std::vector<double>& xs);

// Two-sample Kolmogorov-Smirnov test.  Returns the D statistic; p_value gets the
// asymptotic significance level (Kolmogorov distribution with the standard
// finite-sample correction).
double ks_two_sample(std::vector<double> a, std::vector<double> b, double* p_value);

// Survival function of the Kolmogorov distribution, Q(lambda) = 2 sum (-1)^{k-1} exp(-2 k^2 lambda^2).
double kolmogorov_q(double lambda);

// Upper regularized incomplete gamma Q(a, x); chi-square tail is Q(dof/2, x/2).
double gamma_q(double a, double x);

double chi2_sf(double chi2, double dof);

// Two-sample chi-square statistic over pre-binned counts (same binning for both).
// Bins where both counts are zero are skipped.  Returns the statistic; fills dof.
double chi2_two_sample(const std::vector<double>& counts_a, const std::vector<double>& counts_b,
                       double* dof);

}  // namespace sdb::stats
