#pragma once

// Random sources beyond the scalar kernels in rng.hpp: truncated Normals
// (univariate and the y <= 0 orthant of a multivariate Normal), conjugate
// family draws (NIG, MNIW), and truncated stick breaking.

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <vector>

#include "paneltobit/rng.hpp"

namespace paneltobit {

// Draw from N(mean, sd^2) conditional on the draw being <= 0. Inverse CDF for
// mild truncation, exponential-proposal rejection (Robert 1995) once the
// truncation point is deeper than 6 standard deviations in the tail.
inline double draw_truncated_normal_neg(double mean, double sd, RngStream& rng) {
    require(sd > 0, "draw_truncated_normal_neg: sd must be positive");
    const double beta = -mean / sd;  // standardized upper bound
    if (beta > -6.0) {
        const double p = normal_cdf(beta);
        const double z = normal_quantile(rng.uniform() * p);
        return std::min(mean + sd * z, 0.0);
    }
    // Sample w = -z >= alpha0 with a shifted exponential proposal.
    const double alpha0 = -beta;
    const double lam = 0.5 * (alpha0 + std::sqrt(alpha0 * alpha0 + 4.0));
    for (;;) {
        const double w = alpha0 + rng.exponential() / lam;
        const double d = w - lam;
        if (std::log(rng.uniform()) <= -0.5 * d * d) return mean - sd * w;
    }
}

// Mirror image: N(mean, sd^2) conditional on > 0.
inline double draw_truncated_normal_pos(double mean, double sd, RngStream& rng) {
    return -draw_truncated_normal_neg(-mean, sd, rng);
}

struct TruncatedMvnSpec {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
};

// Draw from N(mean, cov) restricted to the orthant {y <= 0} by a fixed number
// of coordinate-wise Gibbs scans over the exact univariate conditionals. The
// chain is initialized by a sequential conditional sweep so a short scan
// budget suffices.
inline Eigen::VectorXd draw_truncated_mvn_neg(const TruncatedMvnSpec& spec, RngStream& rng,
                                              int scans = 10) {
    const Eigen::Index s = spec.mean.size();
    require(s >= 1, "draw_truncated_mvn_neg: empty spec");
    require(spec.cov.rows() == s && spec.cov.cols() == s,
            "draw_truncated_mvn_neg: dimension mismatch");
    if (s == 1) {
        Eigen::VectorXd out(1);
        out[0] = draw_truncated_normal_neg(spec.mean[0], std::sqrt(spec.cov(0, 0)), rng);
        return out;
    }

    Eigen::MatrixXd cov = 0.5 * (spec.cov + spec.cov.transpose());
    const double ridge = 1e-10 * cov.trace() / static_cast<double>(s);
    cov.diagonal().array() += ridge;
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    require(llt.info() == Eigen::Success,
            "draw_truncated_mvn_neg: covariance not positive definite after ridge repair");
    const Eigen::MatrixXd prec =
        llt.solve(Eigen::MatrixXd::Identity(s, s));
    const Eigen::VectorXd& mu = spec.mean;

    // init: GHK sequential candidates along the Cholesky factor, one kept by
    // importance resampling. This starts the scans close to the target, so a
    // short fixed scan budget suffices even under strong serial correlation.
    const Eigen::MatrixXd L = llt.matrixL();
    const int n_candidates = 4;
    Eigen::MatrixXd cand(s, n_candidates);
    double logw[n_candidates];
    Eigen::VectorXd z(s);
    for (int q = 0; q < n_candidates; ++q) {
        double lw = 0.0;
        for (Eigen::Index c = 0; c < s; ++c) {
            double part = mu[c];
            for (Eigen::Index j = 0; j < c; ++j) part += L(c, j) * z[j];
            const double bound = -part / L(c, c);
            z[c] = bound + draw_truncated_normal_neg(-bound, 1.0, rng);
            lw += normal_log_cdf(bound);
        }
        cand.col(q) = mu + L * z;
        logw[q] = lw;
    }
    double wmax = logw[0];
    for (int q = 1; q < n_candidates; ++q) wmax = std::max(wmax, logw[q]);
    double wsum = 0.0;
    for (int q = 0; q < n_candidates; ++q) {
        logw[q] = std::exp(logw[q] - wmax);
        wsum += logw[q];
    }
    const double u = rng.uniform() * wsum;
    int pick = 0;
    double acc = logw[0];
    while (pick + 1 < n_candidates && u > acc) acc += logw[++pick];
    Eigen::VectorXd x = cand.col(pick);
    for (Eigen::Index c = 0; c < s; ++c) x[c] = std::min(x[c], 0.0);

    auto conditional_draw = [&](Eigen::Index c) {
        double dot = 0.0;
        for (Eigen::Index j = 0; j < s; ++j)
            if (j != c) dot += prec(c, j) * (x[j] - mu[j]);
        const double cvar = 1.0 / prec(c, c);
        const double cmean = mu[c] - cvar * dot;
        x[c] = draw_truncated_normal_neg(cmean, std::sqrt(cvar), rng);
    };
    for (int r = 0; r < scans; ++r)
        for (Eigen::Index c = 0; c < s; ++c) conditional_draw(c);
    return x;
}

// Normal-Inverse-Gamma: sigma2 ~ IG(a, b) with mean b/(a-1), then
// theta | sigma2 ~ N(m, sigma2 * v).
struct NIGParams {
    Eigen::VectorXd m;
    Eigen::MatrixXd v;
    double a{};
    double b{};

    static NIGParams scalar(double m0, double v0, double a0, double b0) {
        NIGParams p;
        p.m = Eigen::VectorXd::Constant(1, m0);
        p.v = Eigen::MatrixXd::Constant(1, 1, v0);
        p.a = a0;
        p.b = b0;
        return p;
    }
};

struct NIGDraw {
    Eigen::VectorXd theta;
    double sigma2{};
};

inline NIGDraw draw_nig(const NIGParams& p, RngStream& rng) {
    require(p.a > 0 && p.b > 0, "draw_nig: a and b must be positive");
    NIGDraw d;
    d.sigma2 = rng.inverse_gamma(p.a, p.b);
    const Eigen::Index k = p.m.size();
    Eigen::LLT<Eigen::MatrixXd> llt(p.v);
    require(llt.info() == Eigen::Success, "draw_nig: v not positive definite");
    Eigen::VectorXd z(k);
    for (Eigen::Index i = 0; i < k; ++i) z[i] = rng.normal();
    const Eigen::VectorXd lz = llt.matrixL() * z;
    d.theta = p.m + std::sqrt(d.sigma2) * lz;
    return d;
}

// Inverse-Wishart(nu, S) via Bartlett decomposition; E[Sigma] = S/(nu - p - 1).
inline Eigen::MatrixXd draw_inverse_wishart(double nu, const Eigen::MatrixXd& S, RngStream& rng) {
    const Eigen::Index p = S.rows();
    require(nu > static_cast<double>(p) + 1.0, "draw_inverse_wishart: nu too small");
    Eigen::LLT<Eigen::MatrixXd> llt(S.inverse());
    require(llt.info() == Eigen::Success, "draw_inverse_wishart: S not positive definite");
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(p, p);
    for (Eigen::Index i = 0; i < p; ++i) {
        A(i, i) = std::sqrt(rng.chi_squared(nu - static_cast<double>(i)));
        for (Eigen::Index j = 0; j < i; ++j) A(i, j) = rng.normal();
    }
    const Eigen::MatrixXd L = llt.matrixL() * A;  // chol of Wishart(nu, S^-1) draw
    return (L * L.transpose()).inverse();
}

// Matricvariate Normal-Inverse-Wishart: Sigma ~ IW(nu, S),
// vec(Phi) | Sigma ~ N(vec(M), Sigma (x) V).
struct MNIWParams {
    Eigen::MatrixXd M;  // location, r x c
    Eigen::MatrixXd V;  // row covariance, r x r
    double nu{};
    Eigen::MatrixXd S;  // IW scale, c x c
};

struct MNIWDraw {
    Eigen::MatrixXd Phi;
    Eigen::MatrixXd Sigma;
};

inline MNIWDraw draw_mniw(const MNIWParams& p, RngStream& rng) {
    MNIWDraw d;
    d.Sigma = draw_inverse_wishart(p.nu, p.S, rng);
    const Eigen::Index r = p.M.rows(), c = p.M.cols();
    Eigen::LLT<Eigen::MatrixXd> lltV(p.V);
    require(lltV.info() == Eigen::Success, "draw_mniw: V not positive definite");
    Eigen::LLT<Eigen::MatrixXd> lltS(d.Sigma);
    require(lltS.info() == Eigen::Success, "draw_mniw: Sigma draw not positive definite");
    Eigen::MatrixXd Z(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index j = 0; j < c; ++j) Z(i, j) = rng.normal();
    d.Phi = p.M + lltV.matrixL() * Z * lltS.matrixL().transpose();
    return d;
}

struct TsbDraw {
    Eigen::VectorXd pi;
    double log_pi_last{};  // ln of the final stick, computed in log space
};

// Truncated stick breaking with component-specific Beta(ones_k, alphas_k)
// sticks; the K-th weight absorbs the remainder.
inline TsbDraw draw_tsb_detail(const Eigen::VectorXd& ones, const Eigen::VectorXd& alphas, int K,
                               RngStream& rng) {
    require(K >= 1, "draw_tsb: K must be >= 1");
    require(ones.size() >= K - 1 && alphas.size() >= K - 1, "draw_tsb: parameter vectors too short");
    TsbDraw d;
    d.pi = Eigen::VectorXd::Zero(K);
    if (K == 1) {
        d.pi[0] = 1.0;
        d.log_pi_last = 0.0;
        return d;
    }
    double log_remainder = 0.0;
    double remainder = 1.0;
    for (int k = 0; k < K - 1; ++k) {
        require(ones[k] > 0 && alphas[k] > 0, "draw_tsb: Beta parameters must be positive");
        double zeta = rng.beta(ones[k], alphas[k]);
        zeta = std::min(std::max(zeta, 1e-15), 1.0 - 1e-15);
        d.pi[k] = remainder * zeta;
        remainder *= (1.0 - zeta);
        log_remainder += std::log1p(-zeta);
    }
    d.pi[K - 1] = std::max(remainder, 0.0);
    d.log_pi_last = log_remainder;
    // enforce exact normalization of the returned vector
    d.pi /= d.pi.sum();
    return d;
}

inline Eigen::VectorXd draw_tsb(const Eigen::VectorXd& ones, const Eigen::VectorXd& alphas, int K,
                                RngStream& rng) {
    return draw_tsb_detail(ones, alphas, K, rng).pi;
}

inline TsbDraw draw_tsb_prior(double alpha, int K, RngStream& rng) {
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(std::max(K - 1, 1));
    const Eigen::VectorXd alphas = Eigen::VectorXd::Constant(std::max(K - 1, 1), alpha);
    return draw_tsb_detail(ones, alphas, K, rng);
}

}  // namespace paneltobit
