#pragma once

// Posterior predictive checks, the treatment-effect decomposition into
// intensive and extensive margins, and chain convergence summaries.

#include "paneltobit/forecast.hpp"

namespace paneltobit {

// Replicated panels: draw (rho, beta, xi) from the posterior, regenerate the
// unit-level heterogeneity from xi, and simulate a fresh panel of the same
// shape (plus one post-sample period when regressors allow it).
inline std::vector<PanelData> ppc_simulate(const PosteriorDraws& draws, const PanelData& data,
                                           int n_hairlines, std::uint64_t seed) {
    require(n_hairlines >= 0, "ppc_simulate: n_hairlines must be >= 0");
    std::vector<PanelData> out;
    if (n_hairlines == 0) return out;
    const int N = data.n_units(), T = data.T(), M = draws.n_draws();
    const ModelSpec& spec = draws.spec;
    const int sim_T = (data.n_x() > 0 && !data.has_x(T)) ? T : T + 1;

    out.reserve(n_hairlines);
    for (int h = 0; h < n_hairlines; ++h) {
        const int j = static_cast<int>(static_cast<long long>(h) * M / n_hairlines);
        const MixtureHyperparams& xi = draws.xi[j];
        UnitParams unit;
        unit.lambda.resize(N);
        unit.sigma2.resize(N);
        Eigen::VectorXd y0(N);
        for (int i = 0; i < N; ++i) {
            RngStream rng = RngStream::from(
                seed, {0x99Cu, static_cast<std::uint64_t>(h), static_cast<std::uint64_t>(i)});
            if (spec.pooled()) {
                unit.lambda[i] = draws.lambda(j, 0);
                y0[i] = rng.normal(xi.phi_y, std::sqrt(xi.Sigma_y));
            } else {
                // component membership, then the joint (lambda, y0*) draw
                const double u = rng.uniform();
                int k = 0;
                double acc = 0;
                for (; k < xi.pi_lambda.size(); ++k) {
                    acc += xi.pi_lambda[k];
                    if (u <= acc) break;
                }
                k = std::min<int>(k, spec.mixture_K() - 1);
                if (spec.is_cre()) {
                    const Eigen::RowVectorXd w = cre_design_row(
                        data.n_x() > 0 ? data.x_at(i, -1) : Eigen::RowVectorXd(0));
                    const Eigen::RowVectorXd m = w * xi.Phi[k];
                    Eigen::LLT<Eigen::Matrix2d> llt(xi.Sigma[k]);
                    Eigen::Vector2d z(rng.normal(), rng.normal());
                    const Eigen::Vector2d draw =
                        m.transpose() + llt.matrixL() * z;
                    unit.lambda[i] = draw[0];
                    y0[i] = draw[1];
                } else {
                    unit.lambda[i] = rng.normal(xi.phi_lambda[k], std::sqrt(xi.Sigma_lambda[k]));
                    y0[i] = rng.normal(xi.phi_y, std::sqrt(xi.Sigma_y));
                }
            }
            if (spec.heteroskedastic()) {
                const double u = rng.uniform();
                int k = 0;
                double acc = 0;
                for (; k < xi.pi_sigma.size(); ++k) {
                    acc += xi.pi_sigma[k];
                    if (u <= acc) break;
                }
                k = std::min<int>(k, spec.mixture_K() - 1);
                unit.sigma2[i] = std::exp(rng.normal(xi.psi[k], std::sqrt(xi.omega2[k])));
            } else {
                unit.sigma2[i] = draws.sigma2(j, 0);
            }
        }
        CommonParams common;
        common.rho = draws.rho[j];
        common.beta = data.n_x() > 0 ? Eigen::VectorXd(draws.beta.row(j).transpose())
                                     : Eigen::VectorXd(0);
        const SimulatedPanel sim =
            simulate_panel(unit, common, y0, data.x, data.x_rows, sim_T,
                           RngStream::from(seed, {0x51Du, static_cast<std::uint64_t>(h)}).next_u64());
        PanelData rep;
        rep.y = sim.data.y.leftCols(T + 1);
        if (sim_T > T) rep.holdout_y = sim.data.y.rightCols(sim_T - T);
        rep.x = data.x;
        rep.x_rows = data.x_rows;
        rep.x_mean = data.x_mean;
        rep.x_sd = data.x_sd;
        rep.unit_ids = data.unit_ids;
        rep.validate();
        out.push_back(std::move(rep));
    }
    return out;
}

// --- per-unit sample statistics for the predictive checks -------------------
// Each extractor returns one value per unit; NaN marks units the statistic is
// not defined for.

inline std::vector<double> ppc_stat_positive_yT1(const PanelData& panel) {
    std::vector<double> v(panel.n_units(), std::numeric_limits<double>::quiet_NaN());
    if (panel.horizon() < 1) return v;
    for (int i = 0; i < panel.n_units(); ++i)
        if (panel.holdout_y(i, 0) > 0) v[i] = panel.holdout_y(i, 0);
    return v;
}

inline std::vector<double> ppc_stat_zero_count(const PanelData& panel) {
    std::vector<double> v(panel.n_units());
    for (int i = 0; i < panel.n_units(); ++i) {
        int cnt = static_cast<int>((panel.y.row(i).array() <= 0.0).count());
        if (panel.horizon() >= 1 && panel.holdout_y(i, 0) <= 0.0) ++cnt;
        v[i] = cnt;
    }
    return v;
}

namespace detail {
// observed path t = 0..T plus the first holdout period when present
inline std::vector<double> unit_path(const PanelData& panel, int i) {
    std::vector<double> y(panel.T() + 1 + (panel.horizon() >= 1 ? 1 : 0), 0.0);
    for (int t = 0; t <= panel.T(); ++t) y[t] = panel.y(i, t);
    if (panel.horizon() >= 1) y[panel.T() + 1] = panel.holdout_y(i, 0);
    return y;
}
}  // namespace detail

// First-order sample autocorrelation using only adjacent pairs with both
// outcomes positive.
inline std::vector<double> ppc_stat_autocorr_positive(const PanelData& panel) {
    std::vector<double> v(panel.n_units(), std::numeric_limits<double>::quiet_NaN());
    for (int i = 0; i < panel.n_units(); ++i) {
        const auto y = detail::unit_path(panel, i);
        std::vector<double> a, b;
        for (std::size_t t = 1; t < y.size(); ++t)
            if (y[t] > 0 && y[t - 1] > 0) {
                a.push_back(y[t - 1]);
                b.push_back(y[t]);
            }
        if (a.size() < 3) continue;
        const auto ma = sample_moments(a), mb = sample_moments(b);
        if (ma.var <= 0 || mb.var <= 0) continue;
        double c = 0;
        for (std::size_t s = 0; s < a.size(); ++s) c += (a[s] - ma.mean) * (b[s] - mb.mean);
        c /= static_cast<double>(a.size() - 1);
        v[i] = c / std::sqrt(ma.var * mb.var);
    }
    return v;
}

// Mean of observations strictly between consecutive zeros, on the stated side:
// after = positive runs preceded by a zero, before = runs followed by a zero.
inline std::vector<double> ppc_stat_mean_around_zero(const PanelData& panel, bool after) {
    std::vector<double> v(panel.n_units(), std::numeric_limits<double>::quiet_NaN());
    for (int i = 0; i < panel.n_units(); ++i) {
        const auto y = detail::unit_path(panel, i);
        double acc = 0;
        int cnt = 0;
        std::size_t t = 0;
        while (t < y.size()) {
            if (y[t] <= 0) {
                ++t;
                continue;
            }
            const std::size_t start = t;
            while (t < y.size() && y[t] > 0) ++t;
            const bool zero_before = start > 0;
            const bool zero_after = t < y.size();
            if ((after && zero_before) || (!after && zero_after)) {
                for (std::size_t s = start; s < t; ++s) {
                    acc += y[s];
                    ++cnt;
                }
            }
        }
        if (cnt > 0) v[i] = acc / cnt;
    }
    return v;
}

// Robust first-order autocorrelation: median of deviation ratios around the
// unit median, clamped to [-1, 1]. A stand-in for MM-type robust estimators;
// invariant to adding a constant to the unit's path.
inline std::vector<double> ppc_stat_robust_autocorr(const PanelData& panel) {
    std::vector<double> v(panel.n_units(), std::numeric_limits<double>::quiet_NaN());
    for (int i = 0; i < panel.n_units(); ++i) {
        const auto y = detail::unit_path(panel, i);
        const double med = median_of(y);
        double scale = 0;
        for (double yi : y) scale = std::max(scale, std::fabs(yi - med));
        if (scale <= 0) continue;
        std::vector<double> ratios;
        for (std::size_t t = 1; t < y.size(); ++t) {
            const double d0 = y[t - 1] - med, d1 = y[t] - med;
            if (std::fabs(d0) > 1e-9 * scale)
                ratios.push_back(std::clamp(d1 / d0, -1.0, 1.0));
        }
        if (ratios.size() < 6) continue;
        v[i] = median_of(ratios);
    }
    return v;
}

inline std::vector<double> ppc_statistic(const std::string& name, const PanelData& panel) {
    if (name == "density_positive_yT1") return ppc_stat_positive_yT1(panel);
    if (name == "zero_count_histogram") return ppc_stat_zero_count(panel);
    if (name == "autocorr_both_positive") return ppc_stat_autocorr_positive(panel);
    if (name == "mean_after_zero") return ppc_stat_mean_around_zero(panel, true);
    if (name == "mean_before_zero") return ppc_stat_mean_around_zero(panel, false);
    if (name == "robust_autocorr") return ppc_stat_robust_autocorr(panel);
    throw Error("unknown ppc statistic: " + name);
}

inline const std::vector<std::string>& ppc_statistic_names() {
    static const std::vector<std::string> names = {
        "density_positive_yT1", "zero_count_histogram", "autocorr_both_positive",
        "mean_after_zero",      "mean_before_zero",     "robust_autocorr"};
    return names;
}

// --- treatment-effect decomposition ------------------------------------------

struct TreatmentEffectRow {
    std::string unit_id;
    double term1_mean{}, term1_lo{}, term1_hi{};  // intensive margin
    double term2_mean{}, term2_lo{}, term2_hi{};  // extensive margin
};

// Effect of moving x_T to x_T + iota * delta_x (iota a unit-length direction
// in original regressor units) on y_{T+1}, split into the always-positive
// component and the censoring-switch component; 90% pointwise bands.
inline std::vector<TreatmentEffectRow> treatment_effect_decomposition(
    const PosteriorDraws& draws, const Eigen::VectorXd& iota, double delta_x,
    std::uint64_t seed) {
    require(draws.n_x() >= 1, "treatment_effect_decomposition: model has no regressors");
    require(delta_x > 0, "treatment_effect_decomposition: delta_x must be positive");
    require(std::fabs(iota.norm() - 1.0) < 1e-8,
            "treatment_effect_decomposition: iota must have unit length");
    require(iota.size() == draws.n_x(), "treatment_effect_decomposition: iota has wrong length");
    require(draws.has_x_T, "treatment_effect_decomposition: forecast-origin regressors missing");

    const int N = draws.n_units(), M = draws.n_draws();
    std::vector<TreatmentEffectRow> rows(N);
    std::vector<double> t1(M), t2(M);
    for (int i = 0; i < N; ++i) {
        RngStream rng = RngStream::from(seed, {0x7E47u, static_cast<std::uint64_t>(i)});
        for (int j = 0; j < M; ++j) {
            // shift expressed on the standardized scale the model uses
            double beta_iota = 0, xb = 0;
            for (int k = 0; k < draws.n_x(); ++k) {
                beta_iota += draws.beta(j, k) * iota[k] / draws.x_sd[k];
                xb += draws.beta(j, k) * draws.x_T(i, k);
            }
            const double u = rng.normal(0.0, std::sqrt(draws.sigma2(j, i)));
            const double z = draws.lambda(j, i) + draws.rho[j] * draws.ystar_T(j, i) + xb + u;
            const double zt = z + beta_iota * delta_x;
            t1[j] = beta_iota * (z > 0 ? 1.0 : 0.0);
            t2[j] = (zt / delta_x) * ((zt > 0 ? 1.0 : 0.0) - (z > 0 ? 1.0 : 0.0));
        }
        TreatmentEffectRow& r = rows[i];
        r.unit_id = draws.unit_ids.empty() ? std::to_string(i) : draws.unit_ids[i];
        r.term1_mean = pairwise_mean(t1);
        r.term2_mean = pairwise_mean(t2);
        r.term1_lo = quantile_of(t1, 0.05);
        r.term1_hi = quantile_of(t1, 0.95);
        r.term2_lo = quantile_of(t2, 0.05);
        r.term2_hi = quantile_of(t2, 0.95);
    }
    return rows;
}

// --- chain convergence summaries ---------------------------------------------

struct ChainDiagnostics {
    Eigen::VectorXd acf;  // lags 0..L
    double ess{};
    double mean_accept{};
};

inline Eigen::VectorXd autocorrelation(const Eigen::VectorXd& x, int max_lag) {
    const int M = static_cast<int>(x.size());
    max_lag = std::min(max_lag, M - 1);
    const double mean = x.mean();
    Eigen::VectorXd acf(max_lag + 1);
    const double denom = (x.array() - mean).square().sum();
    for (int k = 0; k <= max_lag; ++k) {
        double acc = 0;
        for (int t = 0; t + k < M; ++t) acc += (x[t] - mean) * (x[t + k] - mean);
        acf[k] = denom > 0 ? acc / denom : 0.0;
    }
    return acf;
}

// Effective sample size via the initial monotone sequence estimator.
inline double effective_sample_size(const Eigen::VectorXd& x) {
    const int M = static_cast<int>(x.size());
    if (M < 4) return static_cast<double>(M);
    const Eigen::VectorXd acf = autocorrelation(x, std::min(M - 2, 2000));
    double tau = 0;
    double prev = std::numeric_limits<double>::infinity();
    for (int m = 0; 2 * m + 1 < acf.size(); ++m) {
        double g = acf[2 * m] + acf[2 * m + 1];
        if (g <= 0) break;
        g = std::min(g, prev);  // enforce monotonicity
        tau += g;
        prev = g;
    }
    tau = std::max(2.0 * tau - 1.0, 1.0);
    return static_cast<double>(M) / tau;
}

inline ChainDiagnostics chain_diagnostics(const PosteriorDraws& draws, int max_lag = 100) {
    ChainDiagnostics d;
    d.acf = autocorrelation(draws.rho, max_lag);
    d.ess = effective_sample_size(draws.rho);
    d.mean_accept = draws.accept_rate.size() > 0 ? draws.accept_rate.mean() : 1.0;
    return d;
}

}  // namespace paneltobit
