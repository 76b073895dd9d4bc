#pragma once

// Counter-based random streams. Every consumer gets its own stream derived
// from (seed, path...) by hashing, so parallel and serial execution draw
// identical variates regardless of scheduling.

#include <cmath>
#include <cstdint>

#include "paneltobit/stats.hpp"

namespace paneltobit {

namespace detail {
inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

// SplitMix64 output function (Steele, Lea & Flood).
inline std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t fold(std::uint64_t h, std::uint64_t v) {
    return mix64(h ^ (v + kGolden + (h << 6) + (h >> 2)));
}
}  // namespace detail

class RngStream {
public:
    RngStream() : state_(0) {}
    explicit RngStream(std::uint64_t key) : state_(detail::mix64(key)) {}

    static RngStream from(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
        std::uint64_t h = detail::mix64(seed ^ detail::kGolden);
        for (std::uint64_t p : path) h = detail::fold(h, p);
        return RngStream(h);
    }

    std::uint64_t next_u64() {
        state_ += detail::kGolden;
        return detail::mix64(state_);
    }

    // Uniform on (0,1): 53-bit mantissa, shifted off zero.
    double uniform() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    double normal() { return normal_quantile(uniform()); }

    double normal(double mean, double sd) { return mean + sd * normal(); }

    double exponential() { return -std::log(uniform()); }

    // Gamma(shape, rate) via Marsaglia-Tsang; shape < 1 handled by boosting.
    double gamma(double shape, double rate) {
        require(shape > 0 && rate > 0, "gamma: shape and rate must be positive");
        double boost = 1.0;
        if (shape < 1.0) {
            boost = std::pow(uniform(), 1.0 / shape);
            shape += 1.0;
        }
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x, v;
            do {
                x = normal();
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            const double u = uniform();
            if (u < 1.0 - 0.0331 * x * x * x * x) return boost * d * v / rate;
            if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return boost * d * v / rate;
        }
    }

    // Inverse-Gamma(shape a, scale b): mean b/(a-1) for a > 1.
    double inverse_gamma(double a, double b) { return 1.0 / gamma(a, b); }

    double beta(double a, double b) {
        const double x = gamma(a, 1.0);
        const double y = gamma(b, 1.0);
        return x / (x + y);
    }

    double chi_squared(double dof) { return gamma(0.5 * dof, 0.5); }

private:
    std::uint64_t state_;
};

}  // namespace paneltobit
