#include "cableperc/stats.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <stdexcept>

namespace cableperc {

double normal_cdf(double x) { return 0.5 * std::erfc(-x * M_SQRT1_2); }

double normal_sf(double x) { return 0.5 * std::erfc(x * M_SQRT1_2); }

double log_normal_sf(double x) {
    if (x < 10.0) {
        double s = normal_sf(x);
        if (s > 0.0) return std::log(s);
    }
    // Asymptotic expansion of Mills' ratio for the far tail.
    double x2 = x * x;
    double series = 1.0 - 1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2);
    return -0.5 * x2 - 0.5 * std::log(2.0 * M_PI) - std::log(x) + std::log(series);
}

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("normal_quantile: p outside (0,1)");
    boost::math::normal_distribution<double> dist;
    return boost::math::quantile(dist, p);
}

double chi2_sf(double x, int k) {
    if (k < 1) throw std::invalid_argument("chi2_sf: degrees of freedom < 1");
    if (x <= 0.0) return 1.0;
    boost::math::chi_squared_distribution<double> dist(k);
    return boost::math::cdf(boost::math::complement(dist, x));
}

std::pair<double, double> wilson_interval(int64_t successes, int64_t trials,
                                          double confidence) {
    if (trials < 1 || successes < 0 || successes > trials)
        throw std::invalid_argument("wilson_interval: invalid counts");
    if (!(confidence > 0.0 && confidence < 1.0))
        throw std::invalid_argument("wilson_interval: invalid confidence");
    double z = normal_quantile(0.5 * (1.0 + confidence));
    double n = static_cast<double>(trials);
    double p = static_cast<double>(successes) / n;
    double z2 = z * z;
    double denom = 1.0 + z2 / n;
    double center = (p + z2 / (2.0 * n)) / denom;
    double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
    double lo = center - half;
    double hi = center + half;
    if (lo < 0.0) lo = 0.0;
    if (hi > 1.0) hi = 1.0;
    return {lo, hi};
}

}  // namespace cableperc
