#pragma once

// Model specifications (flexible/Normal x RE/CRE x hetero-/homoskedastic,
// plus the pooled Tobit and pooled linear benchmarks), the prior tuning
// constants, the mixture hyperparameter vector, and prior-draw utilities.

#include <optional>

#include "paneltobit/distributions.hpp"
#include "paneltobit/model.hpp"

namespace paneltobit {

enum class Heterogeneity { flexible, normal, pooled };
enum class CreType { re, cre };
enum class VarianceType { heteroskedastic, homoskedastic };
enum class CensoringType { tobit, linear };

struct ModelSpec {
    Heterogeneity heterogeneity = Heterogeneity::flexible;
    CreType cre = CreType::re;
    VarianceType variance = VarianceType::heteroskedastic;
    CensoringType censoring = CensoringType::tobit;
    int K = 20;
    int n_x = 0;
    // For simulation studies the y0* marginal can be pinned to its known
    // truth instead of being estimated (RE and pooled only).
    bool y0_fixed = false;
    double y0_phi = 0.0;
    double y0_sigma2 = 1.0;

    bool pooled() const { return heterogeneity == Heterogeneity::pooled; }
    bool flexible() const { return heterogeneity == Heterogeneity::flexible; }
    bool is_cre() const { return cre == CreType::cre; }
    bool heteroskedastic() const { return variance == VarianceType::heteroskedastic; }
    bool linear() const { return censoring == CensoringType::linear; }
    int mixture_K() const { return flexible() ? K : 1; }

    void validate() const {
        require(K >= 1, "ModelSpec: K must be >= 1");
        require(n_x >= 0, "ModelSpec: n_x must be >= 0");
        if (pooled()) {
            require(!is_cre(), "ModelSpec: pooled specifications use the RE layout");
            require(!heteroskedastic(), "ModelSpec: pooled specifications are homoskedastic");
        }
        if (linear()) require(pooled(), "ModelSpec: the linear benchmark is pooled");
        if (y0_fixed) {
            require(!is_cre(), "ModelSpec: fixed y0 marginal requires the RE layout");
            require(y0_sigma2 > 0, "ModelSpec: fixed y0 variance must be positive");
        }
    }
};

struct PriorTuning {
    double tau_theta = 5.0;
    double tau_phi = 5.0;
    double tau_sigma_lambda = 1.0;
    double tau_sigma_y = 1.0;
    double tau_v = 1.0;
    double v_star = std::numeric_limits<double>::quiet_NaN();  // computed from data

    // Tuning used for the simulation experiments.
    static PriorTuning montecarlo() { return PriorTuning{}; }
    // "Adjusted" tuning for empirical-style runs.
    static PriorTuning empirical() {
        PriorTuning t;
        t.tau_phi = 20.0;
        t.tau_sigma_y = 4.0;
        return t;
    }

    void validate() const {
        require(tau_theta > 0 && tau_phi > 0 && tau_sigma_lambda > 0 && tau_sigma_y > 0 &&
                    tau_v > 0,
                "PriorTuning: all tuning constants must be positive");
        require(std::isfinite(v_star) && v_star > 0, "PriorTuning: v_star not computed");
    }
};

// Cross-sectional average of per-unit time-series variances of y_it.
inline double compute_v_star(const PanelData& data) {
    const int n = data.n_units(), T1 = data.T() + 1;
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
        const double m = data.y.row(i).mean();
        acc += (data.y.row(i).array() - m).square().sum() / std::max(T1 - 1, 1);
    }
    return acc / n;
}

// The xi vector: mixture blocks for the heterogeneous intercepts (joint with
// y0* under CRE), the y0* marginal used under RE, the log-variance mixture
// under heteroskedasticity, and the stick-breaking concentrations.
struct MixtureHyperparams {
    // lambda block, CRE layout: per component k
    std::vector<Eigen::MatrixXd> Phi;      // (n_x+1) x 2, columns (lambda, y0*)
    std::vector<Eigen::Matrix2d> Sigma;    // 2 x 2
    // lambda block, RE layout: per component k
    Eigen::VectorXd phi_lambda;
    Eigen::VectorXd Sigma_lambda;
    Eigen::VectorXd pi_lambda;
    // y0* marginal (RE and pooled)
    double phi_y{0.0};
    double Sigma_y{1.0};
    // log-variance mixture (heteroskedastic)
    Eigen::VectorXd psi;
    Eigen::VectorXd omega2;
    Eigen::VectorXd pi_sigma;
    double alpha_lambda{1.0};
    double alpha_sigma{1.0};

    void validate(const ModelSpec& spec) const {
        const int K = spec.mixture_K();
        if (!spec.pooled()) {
            require(pi_lambda.size() == K, "xi: pi_lambda has wrong length");
            require(std::fabs(pi_lambda.sum() - 1.0) < 1e-10 && (pi_lambda.array() >= 0).all(),
                    "xi: pi_lambda is not a probability vector");
            if (spec.is_cre()) {
                require(static_cast<int>(Phi.size()) == K && static_cast<int>(Sigma.size()) == K,
                        "xi: CRE component count mismatch");
                for (const auto& S : Sigma)
                    require(S(0, 0) > 0 && S(1, 1) > 0, "xi: CRE component variances must be positive");
            } else {
                require(phi_lambda.size() == K && Sigma_lambda.size() == K,
                        "xi: RE component count mismatch");
                require((Sigma_lambda.array() > 0).all(), "xi: RE variances must be positive");
            }
        }
        if (!spec.is_cre()) require(Sigma_y > 0, "xi: y0 variance must be positive");
        if (spec.heteroskedastic()) {
            require(pi_sigma.size() == K && psi.size() == K && omega2.size() == K,
                    "xi: sigma block count mismatch");
            require(std::fabs(pi_sigma.sum() - 1.0) < 1e-10 && (pi_sigma.array() >= 0).all(),
                    "xi: pi_sigma is not a probability vector");
            require((omega2.array() > 0).all(), "xi: omega2 must be positive");
        }
        require(alpha_lambda > 0 && alpha_sigma > 0, "xi: concentrations must be positive");
    }
};

// Concrete prior distributions implied by (spec, tuning).
struct PriorBundle {
    ModelSpec spec;
    PriorTuning tuning;
    NIGParams lambda_nig;    // RE lambda components
    MNIWParams lambda_mniw;  // CRE lambda components
    NIGParams y0_nig;        // y0* marginal under RE
    NIGParams log_sigma_nig;  // (psi_k, omega2_k) under heteroskedasticity
    double sigma2_ig_a{3.0}, sigma2_ig_b{};  // pooled homoskedastic variance
    double alpha_a{2.0}, alpha_b{2.0};       // Gamma prior on TSB concentrations
    double pooled_lambda_var{};              // pooled intercept prior N(0, tau_phi)
    double theta_prior_var{};                // theta ~ N(0, tau_theta I)
};

inline PriorBundle default_priors(const ModelSpec& spec, const PriorTuning& tuning) {
    spec.validate();
    tuning.validate();
    PriorBundle b;
    b.spec = spec;
    b.tuning = tuning;
    b.theta_prior_var = tuning.tau_theta;
    b.pooled_lambda_var = tuning.tau_phi;

    b.lambda_nig = NIGParams::scalar(0.0, tuning.tau_phi, 3.0, 2.0 * tuning.tau_sigma_lambda);
    b.y0_nig = NIGParams::scalar(0.0, tuning.tau_phi, 3.0, 2.0 * tuning.tau_sigma_y);

    const int r = spec.n_x + 1;
    b.lambda_mniw.M = Eigen::MatrixXd::Zero(r, 2);
    b.lambda_mniw.V = tuning.tau_phi * Eigen::MatrixXd::Identity(r, r);
    b.lambda_mniw.nu = 7.0;
    Eigen::Matrix2d D = Eigen::Matrix2d::Zero();
    D(0, 0) = tuning.tau_sigma_lambda;
    D(1, 1) = tuning.tau_sigma_y;
    b.lambda_mniw.S = 4.0 * D;

    const double scale = tuning.tau_v * tuning.v_star;
    b.sigma2_ig_b = 2.0 * scale;
    // location chosen so each mixture component matches the homoskedastic
    // IG(3, 2 tau_v V*) mean and variance for sigma^2
    b.log_sigma_nig = NIGParams::scalar(std::log(scale) - 0.5 * std::log(2.0), 1.0, 3.0,
                                        2.0 * std::log(2.0));
    return b;
}

inline MixtureHyperparams draw_prior_xi(const PriorBundle& b, RngStream& rng) {
    const ModelSpec& spec = b.spec;
    const int K = spec.mixture_K();
    MixtureHyperparams xi;

    if (!spec.pooled()) {
        if (spec.flexible()) {
            xi.alpha_lambda = rng.gamma(b.alpha_a, b.alpha_b);
            xi.pi_lambda = draw_tsb_prior(xi.alpha_lambda, K, rng).pi;
        } else {
            xi.pi_lambda = Eigen::VectorXd::Ones(1);
        }
        if (spec.is_cre()) {
            xi.Phi.resize(K);
            xi.Sigma.resize(K);
            for (int k = 0; k < K; ++k) {
                const MNIWDraw d = draw_mniw(b.lambda_mniw, rng);
                xi.Phi[k] = d.Phi;
                xi.Sigma[k] = d.Sigma;
            }
        } else {
            xi.phi_lambda.resize(K);
            xi.Sigma_lambda.resize(K);
            for (int k = 0; k < K; ++k) {
                const NIGDraw d = draw_nig(b.lambda_nig, rng);
                xi.phi_lambda[k] = d.theta[0];
                xi.Sigma_lambda[k] = d.sigma2;
            }
        }
    }
    if (!spec.is_cre()) {
        if (spec.y0_fixed) {
            xi.phi_y = spec.y0_phi;
            xi.Sigma_y = spec.y0_sigma2;
        } else {
            const NIGDraw d = draw_nig(b.y0_nig, rng);
            xi.phi_y = d.theta[0];
            xi.Sigma_y = d.sigma2;
        }
    }
    if (spec.heteroskedastic()) {
        if (spec.flexible()) {
            xi.alpha_sigma = rng.gamma(b.alpha_a, b.alpha_b);
            xi.pi_sigma = draw_tsb_prior(xi.alpha_sigma, K, rng).pi;
        } else {
            xi.pi_sigma = Eigen::VectorXd::Ones(1);
        }
        xi.psi.resize(K);
        xi.omega2.resize(K);
        for (int k = 0; k < K; ++k) {
            const NIGDraw d = draw_nig(b.log_sigma_nig, rng);
            xi.psi[k] = d.theta[0];
            xi.omega2[k] = d.sigma2;
        }
    }
    xi.validate(spec);
    return xi;
}

// --- mixture-component conditionals used throughout the sampler ------------

inline Eigen::RowVectorXd cre_design_row(const Eigen::RowVectorXd& x_im1) {
    Eigen::RowVectorXd w(x_im1.size() + 1);
    w[0] = 1.0;
    if (x_im1.size() > 0) w.tail(x_im1.size()) = x_im1;
    return w;
}

struct NormalMoments {
    double mean{}, var{};
};

// Conditional prior of lambda_i given component k (and y0*, x_{i,-1} under CRE).
inline NormalMoments lambda_conditional_prior(const MixtureHyperparams& xi, const ModelSpec& spec,
                                              int k, double y0_star,
                                              const Eigen::RowVectorXd& x_im1) {
    NormalMoments out;
    if (spec.is_cre()) {
        const Eigen::RowVectorXd w = cre_design_row(x_im1);
        const Eigen::RowVectorXd m = w * xi.Phi[k];
        const Eigen::Matrix2d& S = xi.Sigma[k];
        out.mean = m[0] + S(0, 1) / S(1, 1) * (y0_star - m[1]);
        out.var = S(0, 0) - S(0, 1) * S(0, 1) / S(1, 1);
        out.var = std::max(out.var, 1e-300);
    } else {
        out.mean = xi.phi_lambda[k];
        out.var = xi.Sigma_lambda[k];
    }
    return out;
}

// Conditional distribution of y0* given lambda_i under component k; under RE
// this is just the y0* marginal.
inline NormalMoments y0_conditional_moments(const MixtureHyperparams& xi, const ModelSpec& spec,
                                            int k, double lambda,
                                            const Eigen::RowVectorXd& x_im1) {
    NormalMoments out;
    if (spec.is_cre()) {
        const Eigen::RowVectorXd w = cre_design_row(x_im1);
        const Eigen::RowVectorXd m = w * xi.Phi[k];
        const Eigen::Matrix2d& S = xi.Sigma[k];
        out.mean = m[1] + S(0, 1) / S(0, 0) * (lambda - m[0]);
        out.var = S(1, 1) - S(0, 1) * S(0, 1) / S(0, 0);
        out.var = std::max(out.var, 1e-300);
    } else {
        out.mean = xi.phi_y;
        out.var = xi.Sigma_y;
    }
    return out;
}

// Membership kernel for the lambda block: the joint density of (lambda, y0*)
// under component k for CRE; the lambda marginal under RE (the y0* factor is
// common across components there).
inline double lambda_block_log_density(const MixtureHyperparams& xi, const ModelSpec& spec, int k,
                                       double lambda, double y0_star,
                                       const Eigen::RowVectorXd& x_im1) {
    if (spec.is_cre()) {
        const Eigen::RowVectorXd w = cre_design_row(x_im1);
        const Eigen::RowVectorXd m = w * xi.Phi[k];
        const Eigen::Matrix2d& S = xi.Sigma[k];
        const double det = S(0, 0) * S(1, 1) - S(0, 1) * S(1, 0);
        const double d0 = lambda - m[0], d1 = y0_star - m[1];
        const double quad = (S(1, 1) * d0 * d0 - 2.0 * S(0, 1) * d0 * d1 + S(0, 0) * d1 * d1) / det;
        return -0.5 * (2.0 * kLog2Pi + std::log(det) + quad);
    }
    return normal_log_pdf(lambda, xi.phi_lambda[k], xi.Sigma_lambda[k]);
}

// --- prior-tuning diagnostics ----------------------------------------------

struct MixtureScalarMoments {
    double mean{}, var{}, skew{}, kurt{};
};

inline MixtureScalarMoments normal_mixture_moments(const Eigen::VectorXd& means,
                                                   const Eigen::VectorXd& vars,
                                                   const Eigen::VectorXd& weights) {
    MixtureScalarMoments m;
    m.mean = (weights.array() * means.array()).sum();
    double m2 = 0, m3 = 0, m4 = 0;
    for (Eigen::Index k = 0; k < means.size(); ++k) {
        const double d = means[k] - m.mean, v = vars[k];
        m2 += weights[k] * (v + d * d);
        m3 += weights[k] * (3.0 * v * d + d * d * d);
        m4 += weights[k] * (3.0 * v * v + 6.0 * v * d * d + d * d * d * d);
    }
    m.var = m2;
    if (m2 > 0) {
        m.skew = m3 / std::pow(m2, 1.5);
        m.kurt = m4 / (m2 * m2);
    }
    return m;
}

// Grid-scan mode counting on 2048 points spanning +/- 6 total SD.
inline int normal_mixture_mode_count(const Eigen::VectorXd& means, const Eigen::VectorXd& vars,
                                     const Eigen::VectorXd& weights) {
    const auto mom = normal_mixture_moments(means, vars, weights);
    const double sd = std::sqrt(std::max(mom.var, 1e-300));
    const int G = 2048;
    const double lo = mom.mean - 6.0 * sd, hi = mom.mean + 6.0 * sd;
    Eigen::VectorXd f(G);
    for (int g = 0; g < G; ++g) {
        const double y = lo + (hi - lo) * g / (G - 1);
        double acc = 0;
        for (Eigen::Index k = 0; k < means.size(); ++k)
            acc += weights[k] * normal_pdf(y, means[k], std::sqrt(vars[k]));
        f[g] = acc;
    }
    // plateau-tolerant: a flat top (symmetric grid straddling a peak) counts
    // once, at its left edge
    int modes = 0;
    for (int g = 1; g + 1 < G; ++g)
        if (f[g] > f[g - 1] && f[g] >= f[g + 1]) ++modes;
    return modes;
}

struct PriorSummaryRow {
    double lambda_mean{}, lambda_sd{}, lambda_skew{}, lambda_kurt{};
    double y0_mean{}, y0_sd{}, y0_skew{}, y0_kurt{};
    double corr_lambda_y0{};
    int lambda_modes{}, y0_modes{};
};

// Implied CRE/RE distribution characteristics per xi draw, evaluated at the
// probe regressor value x_probe (standardized like the data).
inline std::vector<PriorSummaryRow> prior_summary(const std::vector<MixtureHyperparams>& draws,
                                                  const ModelSpec& spec,
                                                  const Eigen::RowVectorXd& x_probe) {
    std::vector<PriorSummaryRow> rows;
    rows.reserve(draws.size());
    for (const auto& xi : draws) {
        const int K = spec.mixture_K();
        Eigen::VectorXd ml(K), vl(K), my(K), vy(K), cov(K), w(K);
        for (int k = 0; k < K; ++k) {
            w[k] = xi.pi_lambda[k];
            if (spec.is_cre()) {
                const Eigen::RowVectorXd m = cre_design_row(x_probe) * xi.Phi[k];
                ml[k] = m[0];
                my[k] = m[1];
                vl[k] = xi.Sigma[k](0, 0);
                vy[k] = xi.Sigma[k](1, 1);
                cov[k] = xi.Sigma[k](0, 1);
            } else {
                ml[k] = xi.phi_lambda[k];
                vl[k] = xi.Sigma_lambda[k];
                my[k] = xi.phi_y;
                vy[k] = xi.Sigma_y;
                cov[k] = 0.0;
            }
        }
        PriorSummaryRow r;
        const auto a = normal_mixture_moments(ml, vl, w);
        r.lambda_mean = a.mean;
        r.lambda_sd = std::sqrt(a.var);
        r.lambda_skew = a.skew;
        r.lambda_kurt = a.kurt;
        const auto b = normal_mixture_moments(my, vy, w);
        r.y0_mean = b.mean;
        r.y0_sd = std::sqrt(b.var);
        r.y0_skew = b.skew;
        r.y0_kurt = b.kurt;
        double c = 0;
        for (int k = 0; k < K; ++k)
            c += w[k] * (cov[k] + (ml[k] - a.mean) * (my[k] - b.mean));
        r.corr_lambda_y0 = (a.var > 0 && b.var > 0) ? c / std::sqrt(a.var * b.var) : 0.0;
        r.lambda_modes = normal_mixture_mode_count(ml, vl, w);
        r.y0_modes = normal_mixture_mode_count(my, vy, w);
        rows.push_back(r);
    }
    return rows;
}

}  // namespace paneltobit
