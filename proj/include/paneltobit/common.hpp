#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace paneltobit {

struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw Error(msg);
}

// Deterministic mean: fixed-tree pairwise summation so parallel and serial
// reductions agree bit-for-bit.
inline double pairwise_sum(const double* x, std::size_t n) {
    if (n <= 8) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += x[i];
        return s;
    }
    const std::size_t half = n / 2;
    return pairwise_sum(x, half) + pairwise_sum(x + half, n - half);
}

inline double pairwise_mean(const std::vector<double>& x) {
    if (x.empty()) return 0.0;
    return pairwise_sum(x.data(), x.size()) / static_cast<double>(x.size());
}

// Static-partition parallel loop over [0, n). Results must be written to
// disjoint slots so the schedule cannot affect the output.
template <typename F>
void parallel_for(int n, int n_threads, F&& body) {
    if (n <= 0) return;
    if (n_threads <= 0) n_threads = static_cast<int>(std::thread::hardware_concurrency());
    if (n_threads <= 1 || n == 1) {
        for (int i = 0; i < n; ++i) body(i);
        return;
    }
    n_threads = std::min(n_threads, n);
    std::vector<std::thread> workers;
    workers.reserve(static_cast<std::size_t>(n_threads));
    for (int w = 0; w < n_threads; ++w) {
        const int lo = static_cast<int>(static_cast<long long>(n) * w / n_threads);
        const int hi = static_cast<int>(static_cast<long long>(n) * (w + 1) / n_threads);
        workers.emplace_back([lo, hi, &body] {
            for (int i = lo; i < hi; ++i) body(i);
        });
    }
    for (auto& t : workers) t.join();
}

}  // namespace paneltobit
