#pragma once

// Scalar Normal kernels and small sample-statistics helpers.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <vector>

#include "paneltobit/common.hpp"

namespace paneltobit {

inline constexpr double kLog2Pi = 1.8378770664093454836;

// Branch-free exp for the bulk density kernels; every construct here
// auto-vectorizes (comparison-style clamps would not). Inputs saturate at
// -708; relative error < 2e-12 on [-708, 0].
inline double exp_fast(double x) {
    // clamp via |.| so the vectorizer sees straight-line arithmetic
    const double z7 = x + 708.0;
    x = -708.0 + 0.5 * (z7 + __builtin_fabs(z7));
    // round to nearest via the 1.5*2^52 shifter; low bits hold the integer
    const double shifter = 6755399441055744.0;
    const double t = x * 1.4426950408889634 + shifter;
    const double kd = t - shifter;
    const double r = (x - kd * 0.693147180559945286) - kd * 2.3190468138462996e-17;
    // degree-9 Taylor on [-ln2/2, ln2/2]
    double p = 1.0 / 362880.0;
    p = p * r + 1.0 / 40320.0;
    p = p * r + 1.0 / 5040.0;
    p = p * r + 1.0 / 720.0;
    p = p * r + 1.0 / 120.0;
    p = p * r + 1.0 / 24.0;
    p = p * r + 1.0 / 6.0;
    p = p * r + 0.5;
    p = p * r + 1.0;
    p = p * r + 1.0;
    auto k = static_cast<std::int64_t>(static_cast<std::int32_t>(
        static_cast<std::uint32_t>(std::bit_cast<std::uint64_t>(t) & 0xffffffffu)));
    k = std::max<std::int64_t>(k, -1022);
    const double scale = std::bit_cast<double>(static_cast<std::uint64_t>(k + 1023) << 52);
    return p * scale;
}

inline double normal_pdf(double x, double mean = 0.0, double sd = 1.0) {
    const double z = (x - mean) / sd;
    return std::exp(-0.5 * z * z) / (sd * std::sqrt(2.0 * M_PI));
}

inline double normal_log_pdf(double x, double mean, double var) {
    const double d = x - mean;
    return -0.5 * (kLog2Pi + std::log(var) + d * d / var);
}

inline double normal_cdf(double x) {
    return 0.5 * std::erfc(-x * M_SQRT1_2);
}

inline double normal_cdf(double x, double mean, double sd) {
    return normal_cdf((x - mean) / sd);
}

inline double normal_log_cdf(double x) {
    // erfc underflows near x = -38; switch to the asymptotic tail expansion.
    if (x > -37.0) return std::log(normal_cdf(x));
    const double x2 = x * x;
    return -0.5 * x2 - 0.5 * kLog2Pi - std::log(-x) + std::log1p(-1.0 / x2 + 3.0 / (x2 * x2));
}

// Wichura's PPND16 inverse Normal CDF, |error| ~ 1e-15.
inline double normal_quantile(double p) {
    require(p > 0.0 && p < 1.0, "normal_quantile: p must be in (0,1)");
    const double q = p - 0.5;
    double r;
    if (std::fabs(q) <= 0.425) {
        r = 0.180625 - q * q;
        return q *
               (((((((2.5090809287301226727e+3 * r + 3.3430575583588128105e+4) * r +
                     6.7265770927008700853e+4) * r + 4.5921953931549871457e+4) * r +
                   1.3731693765509461125e+4) * r + 1.9715909503065514427e+3) * r +
                 1.3314166789178437745e+2) * r + 3.3871328727963666080e+0) /
               (((((((5.2264952788528545610e+3 * r + 2.8729085735721942674e+4) * r +
                     3.9307895800092710610e+4) * r + 2.1213794301586595867e+4) * r +
                   5.3941960214247511077e+3) * r + 6.8718700749205790830e+2) * r +
                 4.2313330701600911252e+1) * r + 1.0);
    }
    r = (q < 0.0) ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double val;
    if (r <= 5.0) {
        r -= 1.6;
        val = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                    2.41780725177450611770e-1) * r + 1.27045825245236838258e+0) * r +
                  3.64784832476320460504e+0) * r + 5.76949722146069140550e+0) * r +
                4.63033784615654529590e+0) * r + 1.42343711074968357734e+0) /
              (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                    1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
                  6.89767334985100004550e-1) * r + 1.67638483018380384940e+0) * r +
                2.05319162663775882187e+0) * r + 1.0);
    } else {
        r -= 5.0;
        val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                    1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
                  2.96560571828504891230e-1) * r + 1.78482653991729133580e+0) * r +
                5.46378491116411436990e+0) * r + 6.65790464350110377720e+0) /
              (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                    1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
                  1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
                5.99832206555887937690e-1) * r + 1.0);
    }
    return (q < 0.0) ? -val : val;
}

// Mean of N(mean, sd^2) truncated to (0, inf).
inline double truncated_above_zero_mean(double mean, double sd) {
    const double a = mean / sd;
    return mean + sd * normal_pdf(a) / normal_cdf(a);
}

// E[max(0, X)] for X ~ N(mean, sd^2).
inline double censored_normal_mean(double mean, double sd) {
    const double a = mean / sd;
    return mean * normal_cdf(a) + sd * normal_pdf(a);
}

struct SampleMoments {
    double mean{0}, var{0}, skew{0}, kurt{0};
};

inline SampleMoments sample_moments(const std::vector<double>& x) {
    SampleMoments m;
    const std::size_t n = x.size();
    if (n == 0) return m;
    m.mean = pairwise_mean(x);
    double m2 = 0, m3 = 0, m4 = 0;
    for (double v : x) {
        const double d = v - m.mean;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
    }
    m2 /= n; m3 /= n; m4 /= n;
    m.var = m2 * n / std::max<std::size_t>(n - 1, 1);
    if (m2 > 0) {
        m.skew = m3 / std::pow(m2, 1.5);
        m.kurt = m4 / (m2 * m2);
    }
    return m;
}

inline double median_of(std::vector<double> x) {
    if (x.empty()) return std::numeric_limits<double>::quiet_NaN();
    const std::size_t mid = x.size() / 2;
    std::nth_element(x.begin(), x.begin() + mid, x.end());
    double hi = x[mid];
    if (x.size() % 2 == 1) return hi;
    std::nth_element(x.begin(), x.begin() + mid - 1, x.end());
    return 0.5 * (x[mid - 1] + hi);
}

// Empirical quantile (linear interpolation) of an unsorted sample.
inline double quantile_of(std::vector<double> x, double q) {
    require(!x.empty(), "quantile_of: empty sample");
    std::sort(x.begin(), x.end());
    const double pos = q * static_cast<double>(x.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    if (lo + 1 >= x.size()) return x.back();
    const double w = pos - static_cast<double>(lo);
    return (1.0 - w) * x[lo] + w * x[lo + 1];
}

}  // namespace paneltobit
