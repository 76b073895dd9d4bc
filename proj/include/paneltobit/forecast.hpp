#pragma once

// Posterior predictive simulation and HPD set forecasts. The h-step-ahead
// predictive for unit i is a mixture over posterior draws j of censored
// Normals: a point mass pi_i0 at zero plus a continuous part on y > 0.

#include <numeric>

#include "paneltobit/gibbs.hpp"

namespace paneltobit {

struct PredictiveComponents {
    Eigen::MatrixXd mu;   // n_units x M conditional means of y*_{iT+h}
    Eigen::MatrixXd var;  // n_units x M conditional variances
    int h{1};
};

// Iterated multi-step moments. x_future supplies the given regressor path for
// times T..T+h-1 in original units (row i = unit); entries may be empty where
// the stored forecast-origin regressors cover time T.
inline PredictiveComponents predictive_components(
    const PosteriorDraws& draws, int h,
    const std::vector<Eigen::MatrixXd>* x_future = nullptr) {
    require(h >= 1, "predictive_components: h must be >= 1");
    const int N = draws.n_units(), M = draws.n_draws(), nx = draws.n_x();

    std::vector<Eigen::MatrixXd> xpath(h);  // standardized rows for T..T+h-1
    if (nx > 0) {
        for (int s = 0; s < h; ++s) {
            if (x_future && s < static_cast<int>(x_future->size()) &&
                (*x_future)[s].size() > 0) {
                require((*x_future)[s].rows() == N && (*x_future)[s].cols() == nx,
                        "predictive_components: x_future has wrong shape");
                xpath[s] = (*x_future)[s];
                for (int k = 0; k < nx; ++k)
                    xpath[s].col(k) =
                        (xpath[s].col(k).array() - draws.x_mean[k]) / draws.x_sd[k];
            } else if (s == 0 && draws.has_x_T) {
                xpath[0] = draws.x_T;
            } else {
                throw Error("predictive_components: regressor path for time T+" +
                            std::to_string(s) + " missing");
            }
        }
    }

    PredictiveComponents out;
    out.h = h;
    out.mu.resize(N, M);
    out.var.resize(N, M);
    Eigen::VectorXd xb(N);
    for (int j = 0; j < M; ++j) {
        const double rho = draws.rho[j];
        double sum_rho = 0, sum_rho2 = 0, rp = 1, rp2 = 1;
        for (int s = 0; s < h; ++s) {
            sum_rho += rp;
            sum_rho2 += rp2;
            rp *= rho;
            rp2 *= rho * rho;
        }
        const double rho_h = rp;
        if (nx > 0) {
            // beta' sum_s rho^s x_{T+h-1-s}
            Eigen::MatrixXd xagg = Eigen::MatrixXd::Zero(N, nx);
            double r = 1.0;
            for (int s = 0; s < h; ++s, r *= rho) xagg += r * xpath[h - 1 - s];
            xb = xagg * draws.beta.row(j).transpose();
        }
        for (int i = 0; i < N; ++i) {
            double m = draws.lambda(j, i) * sum_rho + rho_h * draws.ystar_T(j, i);
            if (nx > 0) m += xb[i];
            out.mu(i, j) = m;
            out.var(i, j) = sum_rho2 * draws.sigma2(j, i);
        }
    }
    return out;
}

// Per-unit predictive representation: point mass at zero, one positive-part
// sample per posterior draw with its component weight W_j = 1 - Phi(-mu/sd),
// and the mixture density evaluated at each sample.
struct PredictiveDensity {
    double pi0{};
    Eigen::VectorXd samples;  // positive-part draws, one per retained component
    Eigen::VectorXd weights;
    Eigen::VectorXd density;
    Eigen::VectorXd mu, sd;  // retained components
    double point_forecast{};

    double density_at(double y) const {
        double acc = 0;
        for (Eigen::Index j = 0; j < mu.size(); ++j) acc += normal_pdf(y, mu[j], sd[j]);
        return acc / static_cast<double>(mu.size());
    }
    double log_density_at(double y) const {
        double best = -std::numeric_limits<double>::infinity();
        Eigen::VectorXd lp(mu.size());
        for (Eigen::Index j = 0; j < mu.size(); ++j) {
            lp[j] = normal_log_pdf(y, mu[j], sd[j] * sd[j]);
            best = std::max(best, lp[j]);
        }
        if (!std::isfinite(best)) return -std::numeric_limits<double>::infinity();
        double acc = 0;
        for (Eigen::Index j = 0; j < mu.size(); ++j) acc += std::exp(lp[j] - best);
        return best + std::log(acc / static_cast<double>(mu.size()));
    }
};

inline PredictiveDensity build_predictive_density_unit(const Eigen::VectorXd& mu,
                                                       const Eigen::VectorXd& var,
                                                       RngStream& rng) {
    const Eigen::Index M = mu.size();
    PredictiveDensity pd;
    pd.mu = mu;
    pd.sd = var.array().sqrt();
    pd.samples.resize(M);
    pd.weights.resize(M);
    double zp = 0, pf = 0;
    for (Eigen::Index j = 0; j < M; ++j) {
        const double p0 = normal_cdf(-mu[j] / pd.sd[j]);
        zp += p0;
        pd.weights[j] = 1.0 - p0;
        pd.samples[j] = draw_truncated_normal_pos(mu[j], pd.sd[j], rng);
        pf += censored_normal_mean(mu[j], pd.sd[j]);
    }
    pd.pi0 = zp / static_cast<double>(M);
    pd.point_forecast = pf / static_cast<double>(M);

    // mixture density at every sample point; this O(M^2) kernel dominates
    // evaluation time. Component-outer order keeps consecutive sample points
    // independent so the exp chain pipelines.
    pd.density = Eigen::VectorXd::Zero(M);
    const Eigen::ArrayXd inv2v = 0.5 / var.array();
    const Eigen::ArrayXd coef = (2.0 * M_PI * var.array()).sqrt().inverse();
    double* den_p = pd.density.data();
    const double* y_p = pd.samples.data();
    for (Eigen::Index j = 0; j < M; ++j) {
        const double m = mu[j], iv = inv2v[j], cf = coef[j];
#pragma omp simd
        for (Eigen::Index s = 0; s < M; ++s) {
            const double d = y_p[s] - m;
            den_p[s] += cf * exp_fast(-d * d * iv);
        }
    }
    pd.density /= static_cast<double>(M);
    return pd;
}

// One density per unit; a positive m_samples < M retains an evenly thinned
// subset of the posterior draws.
inline std::vector<PredictiveDensity> build_predictive_density(const PredictiveComponents& comp,
                                                               std::uint64_t seed,
                                                               int m_samples = -1, int threads = 1) {
    const int N = static_cast<int>(comp.mu.rows());
    const int M = static_cast<int>(comp.mu.cols());
    int keep = (m_samples > 0 && m_samples < M) ? m_samples : M;
    std::vector<PredictiveDensity> out(N);
    parallel_for(N, threads, [&](int i) {
        RngStream rng = RngStream::from(seed, {0xFC57u, static_cast<std::uint64_t>(i)});
        Eigen::VectorXd mu(keep), var(keep);
        for (int s = 0; s < keep; ++s) {
            const int j = static_cast<int>(static_cast<long long>(s) * M / keep);
            mu[s] = comp.mu(i, j);
            var[s] = comp.var(i, j);
        }
        out[i] = build_predictive_density_unit(mu, var, rng);
    });
    return out;
}

enum class CoverageMode { pointwise, average };

// Set forecast {0} u ([a1,b1] u ... u [aK,bK]), or the empty set under
// average-coverage targeting when zero mass alone exceeds the credible level.
struct SetForecast {
    bool includes_zero{false};
    bool is_empty{false};
    std::vector<std::pair<double, double>> segments;
    double alpha{};
    CoverageMode mode{CoverageMode::pointwise};

    double length() const {
        double len = 0;
        for (const auto& s : segments) len += s.second - s.first;
        return len;
    }
    bool contains(double y) const {
        if (is_empty) return false;
        if (y == 0.0) return includes_zero;
        for (const auto& s : segments)
            if (y >= s.first && y <= s.second) return true;
        return false;
    }
    void check_invariants() const {
        double prev = -1;
        for (const auto& s : segments) {
            require(s.first < s.second && s.first > prev, "SetForecast: segments out of order");
            prev = s.second;
        }
    }
};

namespace detail {

// Interval reconstruction from the selected samples, ascending in y.
// a1 drops to zero when the lowest sample is selected; zero-width intervals
// (selected singletons) are discarded afterwards.
inline void reconstruct_segments(SetForecast& set, const Eigen::VectorXd& samples,
                                 const std::vector<int>& asc_order,
                                 const std::vector<char>& selected) {
    const int M = static_cast<int>(asc_order.size());
    std::vector<std::pair<double, double>> raw;
    bool open = false;
    double a = 0, b = 0;
    for (int r = 0; r < M; ++r) {
        const int idx = asc_order[r];
        if (selected[idx]) {
            if (!open) {
                a = samples[idx];
                open = true;
            }
            b = samples[idx];
        } else if (open) {
            raw.emplace_back(a, b);
            open = false;
        }
    }
    if (open) raw.emplace_back(a, b);
    if (!raw.empty() && !selected.empty() && selected[asc_order[0]]) raw.front().first = 0.0;
    for (const auto& seg : raw)
        if (seg.second > seg.first) set.segments.push_back(seg);
}

}  // namespace detail

inline SetForecast hpd_pointwise(const PredictiveDensity& pd, double alpha) {
    require(alpha > 0 && alpha < 1, "hpd_pointwise: alpha must be in (0,1)");
    SetForecast set;
    set.alpha = alpha;
    set.mode = CoverageMode::pointwise;
    set.includes_zero = true;
    if (pd.pi0 >= 1.0 - alpha) return set;  // C = {0}

    const int M = static_cast<int>(pd.samples.size());
    std::vector<int> by_density(M), asc(M);
    std::iota(by_density.begin(), by_density.end(), 0);
    std::iota(asc.begin(), asc.end(), 0);
    std::sort(by_density.begin(), by_density.end(), [&](int a, int b) {
        if (pd.density[a] != pd.density[b]) return pd.density[a] > pd.density[b];
        return a < b;
    });
    std::sort(asc.begin(), asc.end(), [&](int a, int b) {
        if (pd.samples[a] != pd.samples[b]) return pd.samples[a] < pd.samples[b];
        return a < b;
    });

    const double target = (1.0 - alpha - pd.pi0) * M;
    std::vector<char> selected(M, 0);
    double acc = 0;
    for (int r = 0; r < M && acc < target - 1e-12; ++r) {
        selected[by_density[r]] = 1;
        acc += pd.weights[by_density[r]];
    }
    detail::reconstruct_segments(set, pd.samples, asc, selected);
    set.check_invariants();
    return set;
}

inline std::vector<SetForecast> hpd_average(const std::vector<PredictiveDensity>& pds,
                                            double alpha) {
    require(alpha > 0 && alpha < 1, "hpd_average: alpha must be in (0,1)");
    const int N = static_cast<int>(pds.size());
    require(N > 0, "hpd_average: no units");
    const int M = static_cast<int>(pds[0].samples.size());
    for (const auto& pd : pds)
        require(static_cast<int>(pd.samples.size()) == M, "hpd_average: units must share M");

    std::vector<SetForecast> sets(N);
    for (auto& s : sets) {
        s.alpha = alpha;
        s.mode = CoverageMode::average;
    }

    double pi0_bar = 0;
    for (const auto& pd : pds) pi0_bar += pd.pi0;
    pi0_bar /= N;

    if (pi0_bar >= 1.0 - alpha) {
        // zero mass alone meets the average target: hand {0} to the units
        // with the largest pi0 until coverage is reached, empty set elsewhere
        std::vector<int> order(N);
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](int a, int b) {
            if (pds[a].pi0 != pds[b].pi0) return pds[a].pi0 > pds[b].pi0;
            return a < b;
        });
        double cum = 0;
        const double target = (1.0 - alpha) * N;
        std::size_t r = 0;
        for (; r < order.size() && cum < target - 1e-12; ++r) {
            sets[order[r]].includes_zero = true;
            cum += pds[order[r]].pi0;
        }
        for (; r < order.size(); ++r) sets[order[r]].is_empty = true;
        return sets;
    }

    struct Item {
        double density, weight;
        int unit, idx;
    };
    std::vector<Item> pool;
    pool.reserve(static_cast<std::size_t>(N) * M);
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < M; ++j)
            pool.push_back({pds[i].density[j], pds[i].weights[j], i, j});
    std::sort(pool.begin(), pool.end(), [](const Item& a, const Item& b) {
        if (a.density != b.density) return a.density > b.density;
        if (a.unit != b.unit) return a.unit < b.unit;
        return a.idx < b.idx;
    });

    const double target = (1.0 - alpha - pi0_bar) * static_cast<double>(N) * M;
    std::vector<std::vector<char>> selected(N, std::vector<char>(M, 0));
    double acc = 0;
    for (std::size_t r = 0; r < pool.size() && acc < target - 1e-12; ++r) {
        selected[pool[r].unit][pool[r].idx] = 1;
        acc += pool[r].weight;
    }

    std::vector<int> asc(M);
    for (int i = 0; i < N; ++i) {
        sets[i].includes_zero = true;
        std::iota(asc.begin(), asc.end(), 0);
        std::sort(asc.begin(), asc.end(), [&](int a, int b) {
            if (pds[i].samples[a] != pds[i].samples[b]) return pds[i].samples[a] < pds[i].samples[b];
            return a < b;
        });
        detail::reconstruct_segments(sets[i], pds[i].samples, asc, selected[i]);
        sets[i].check_invariants();
    }
    return sets;
}

// Posterior probability assigned to a set under the sampled representation.
inline double set_posterior_mass(const SetForecast& set, const PredictiveDensity& pd) {
    if (set.is_empty) return 0.0;
    double mass = set.includes_zero ? pd.pi0 : 0.0;
    const int M = static_cast<int>(pd.samples.size());
    for (int j = 0; j < M; ++j)
        if (!set.segments.empty() && set.contains(pd.samples[j]) && pd.samples[j] > 0)
            mass += pd.weights[j] / M;
    return mass;
}

// Direct h-step estimation: the same Gibbs machinery on lag-h pairings.
inline PosteriorDraws direct_multistep_estimate(const PanelData& data, const ModelSpec& spec,
                                                const PriorBundle& priors,
                                                const SamplerSettings& settings, int h) {
    require(data.T() > h, "direct_multistep_estimate: need T > h");
    return run_chain(data, spec, priors, settings, h);
}

}  // namespace paneltobit
