#pragma once

#include <cstdint>
#include <utility>

namespace cableperc {

// Standard normal CDF Phi and survivor function Phi-bar.
double normal_cdf(double x);
double normal_sf(double x);

// log of the survivor function; stays finite far into the tail where
// normal_sf underflows.
double log_normal_sf(double x);

// Inverse standard normal CDF.
double normal_quantile(double p);

// Upper tail of the chi-squared distribution with k degrees of freedom.
double chi2_sf(double x, int k);

// Wilson score interval for a binomial proportion.
std::pair<double, double> wilson_interval(int64_t successes, int64_t trials,
                                          double confidence);

}  // namespace cableperc
