#pragma once

// Gibbs sampler with data augmentation for the dynamic panel Tobit model.
// One sweep runs:
//   Step 1  latent outcomes over censored segments (truncated MVN)
//   Step 2  heterogeneous (or pooled) intercepts, conjugate Normal
//   Step 3  innovation variances: per-unit adaptive RWMH on ln sigma2_i,
//           or one exact IG draw under homoskedasticity
//   Step 4  common coefficients theta = (rho, beta), conjugate Normal
//   Step 5  mixture memberships, categorical
//   Step 6  mixture hyperparameters xi, conjugate NIG/MNIW + TSB updates
//
// All randomness flows through per-(sweep, step, unit) counter-based
// substreams, so parallel and serial execution are bit-identical.

#include <algorithm>

#include "paneltobit/common.hpp"
#include "paneltobit/priors.hpp"

namespace paneltobit {

struct SamplerSettings {
    int n_draws = 10000;  // retained post-burn-in draws
    int burn_in = 1000;
    int thin = 1;
    std::uint64_t seed = 0;
    double rwmh_target_accept = 0.30;
    bool parallel_units = false;
    int threads = 0;  // 0 = hardware concurrency
    int mvn_scans = 10;

    void validate() const {
        require(n_draws > 0, "SamplerSettings: n_draws must be positive");
        require(burn_in >= 0, "SamplerSettings: burn_in must be >= 0");
        require(thin >= 1, "SamplerSettings: thin must be >= 1");
        require(mvn_scans >= 1, "SamplerSettings: mvn_scans must be >= 1");
    }
};

// Maximal run of censored observations. Times step by `stride` (> 1 only for
// direct multi-step estimation, where each lag-phase forms its own chain).
struct CensoredSegment {
    int unit{};
    int t1{}, t2{};
    int stride{1};
    bool left_is_initial{};   // run starts at the first period of its chain
    double left_anchor{};     // observed y*_{t1-stride} when not initial
    bool has_right_anchor{};  // false when the run ends the sample
    double right_anchor{};

    int run_length() const { return (t2 - t1) / stride + 1; }
};

inline void append_segments(std::vector<CensoredSegment>& out, const Eigen::MatrixXd& y, int unit,
                            int first, int stride) {
    const int T = static_cast<int>(y.cols()) - 1;
    int t = first;
    while (t <= T) {
        if (y(unit, t) > 0.0) {
            t += stride;
            continue;
        }
        CensoredSegment seg;
        seg.unit = unit;
        seg.t1 = t;
        seg.stride = stride;
        while (t + stride <= T && y(unit, t + stride) <= 0.0) t += stride;
        seg.t2 = t;
        seg.left_is_initial = (seg.t1 == first);
        if (!seg.left_is_initial) seg.left_anchor = y(unit, seg.t1 - stride);
        seg.has_right_anchor = (seg.t2 + stride <= T);
        if (seg.has_right_anchor) seg.right_anchor = y(unit, seg.t2 + stride);
        out.push_back(seg);
        t += 2 * stride;
    }
}

inline std::vector<CensoredSegment> find_segments(const Eigen::RowVectorXd& y_row) {
    std::vector<CensoredSegment> out;
    Eigen::MatrixXd m = y_row;
    append_segments(out, m, 0, 0, 1);
    return out;
}

// Mean and covariance of the latent zero-run given its anchors, ready for
// truncated sampling. Covers the interior run, the run ending the sample (no
// right anchor), and the run starting the sample (initial-distribution case,
// with init_conditional = moments of y* at the chain's first period).
inline TruncatedMvnSpec segment_conditional_moments(const CensoredSegment& seg, double lambda_i,
                                                    double sigma2_i, const CommonParams& common,
                                                    const PanelData& data,
                                                    const NormalMoments* init_conditional) {
    require(sigma2_i > 0, "segment_conditional_moments: sigma2 must be positive");
    const int stride = seg.stride;
    const int n_run = seg.run_length();
    const int s = n_run + (seg.has_right_anchor ? 1 : 0);
    const double rho = common.rho;

    auto xb = [&](int t) -> double {
        if (data.n_x() == 0) return 0.0;
        return data.x_at(seg.unit, t - stride) * common.beta;
    };

    Eigen::VectorXd mean(s);
    {
        double prev;
        if (seg.left_is_initial) {
            require(init_conditional != nullptr,
                    "segment_conditional_moments: initial case needs init_conditional");
            prev = init_conditional->mean;
        } else {
            prev = lambda_i + rho * seg.left_anchor + xb(seg.t1);
        }
        mean[0] = prev;
        for (int c = 1; c < s; ++c) {
            prev = lambda_i + rho * prev + xb(seg.t1 + c * stride);
            mean[c] = prev;
        }
    }

    Eigen::MatrixXd cov(s, s);
    if (!seg.left_is_initial) {
        // cov(a,b) = sigma2 * rho^{b-a} * sum_{l=0}^{a} rho^{2l},  b >= a
        for (int a = 0; a < s; ++a) {
            double g = 0.0, r2l = 1.0;
            for (int l = 0; l <= a; ++l, r2l *= rho * rho) g += r2l;
            double rp = 1.0;
            for (int b = a; b < s; ++b, rp *= rho) {
                cov(a, b) = sigma2_i * rp * g;
                cov(b, a) = cov(a, b);
            }
        }
    } else {
        // AR recursion started from the initial value with variance sigma*^2:
        // innovation part accumulates from the second coordinate on.
        const double s2star = init_conditional->var;
        for (int a = 0; a < s; ++a) {
            double g = 0.0;
            if (a >= 1) {
                double r2l = 1.0;
                for (int l = 0; l <= a - 1; ++l, r2l *= rho * rho) g += r2l;
            }
            double rp = 1.0;
            for (int b = a; b < s; ++b, rp *= rho) {
                const double innov = (a >= 1) ? sigma2_i * rp * g : 0.0;
                cov(a, b) = innov + s2star * std::pow(rho, a + b);
                cov(b, a) = cov(a, b);
            }
        }
    }

    if (!seg.has_right_anchor) return {mean, cov};

    // condition on the observed right anchor (last coordinate)
    const int m = s - 1;
    const double d = seg.right_anchor - mean[m];
    const double vss = cov(m, m);
    TruncatedMvnSpec spec;
    spec.mean = mean.head(m) + cov.col(m).head(m) * (d / vss);
    spec.cov = cov.topLeftCorner(m, m) - cov.col(m).head(m) * cov.row(m).head(m) / vss;
    return spec;
}

struct ChainState {
    LatentPanel latent;
    UnitParams unit;
    CommonParams common;
    MixtureHyperparams xi;
    std::vector<int> gamma_lambda;  // 0-based component labels
    std::vector<int> gamma_sigma;
    Eigen::VectorXd rwmh_log_step;
};

namespace detail {
enum StepId : std::uint64_t {
    kStepInit = 100,
    kStepLatent = 1,
    kStepLambda = 2,
    kStepSigma = 3,
    kStepTheta = 4,
    kStepMember = 5,
    kStepXi = 6,
};
}  // namespace detail

class GibbsSampler {
public:
    GibbsSampler(const PanelData& data, const ModelSpec& spec, const PriorBundle& priors,
                 const SamplerSettings& settings, int lag = 1)
        : data_(data), spec_(spec), priors_(priors), settings_(settings), lag_(lag) {
        spec_.validate();
        settings_.validate();
        data_.validate();
        require(lag_ >= 1 && lag_ <= data_.T(), "GibbsSampler: lag must be in [1, T]");
        require(spec_.n_x == data_.n_x(), "GibbsSampler: spec.n_x does not match the data");
        const int n = data_.n_units();
        segments_.reserve(n);
        for (int i = 0; i < n; ++i) {
            std::vector<CensoredSegment> segs;
            for (int phase = 0; phase < lag_; ++phase)
                append_segments(segs, data_.y, i, phase, lag_);
            segments_.push_back(std::move(segs));
        }
        if (data_.n_x() > 0) xb_.resize(n, data_.x_rows);
    }

    const ChainState& state() const { return state_; }
    ChainState& state() { return state_; }

    void initialize();

    // one full parameter sweep; adapt enables RWMH step-size tuning
    void sweep(std::uint64_t sweep_index, bool adapt);

    double last_accept_rate() const { return last_accept_rate_; }
    double log_joint() const;

    // individual steps, exposed for testing and for custom loops
    void step1_draw_latents(std::uint64_t sweep_index);
    void step2_draw_lambda(std::uint64_t sweep_index);
    void step3_draw_sigma2(std::uint64_t sweep_index, bool adapt, std::uint64_t adapt_count);
    void step4_draw_theta(std::uint64_t sweep_index);
    void step5_draw_memberships(std::uint64_t sweep_index);
    void step6_draw_xi(std::uint64_t sweep_index);

    const PanelData& data() const { return data_; }
    const ModelSpec& spec() const { return spec_; }
    int lag() const { return lag_; }

private:
    RngStream stream(std::uint64_t sweep_index, std::uint64_t step, std::uint64_t unit) const {
        return RngStream::from(settings_.seed, {sweep_index, step, unit});
    }

    int n_threads() const {
        return settings_.parallel_units ? (settings_.threads > 0 ? settings_.threads : 0) : 1;
    }

    void refresh_xb() {
        if (data_.n_x() == 0) return;
        const int n = data_.n_units();
        for (int i = 0; i < n; ++i)
            xb_.row(i) = (data_.x.middleRows(static_cast<Eigen::Index>(i) * data_.x_rows,
                                             data_.x_rows) *
                          state_.common.beta)
                             .transpose();
    }

    double xb(int i, int t) const {  // beta'x_{it}, t in -1..x_last_t
        return data_.n_x() == 0 ? 0.0 : xb_(i, t + 1);
    }

    double resid(int i, int t) const {  // y*_t - rho y*_{t-lag} - beta'x_{t-lag}
        return state_.latent.y_star(i, t) - state_.common.rho * state_.latent.y_star(i, t - lag_) -
               xb(i, t - lag_);
    }

    NormalMoments initial_conditional(int i) const {
        const Eigen::RowVectorXd xm1 =
            data_.n_x() > 0 ? data_.x_at(i, -1) : Eigen::RowVectorXd(0);
        const int k = spec_.pooled() ? 0 : state_.gamma_lambda[i];
        return y0_conditional_moments(state_.xi, spec_, k, state_.unit.lambda[i], xm1);
    }

    PanelData data_;
    ModelSpec spec_;
    PriorBundle priors_;
    SamplerSettings settings_;
    int lag_;
    ChainState state_;
    std::vector<std::vector<CensoredSegment>> segments_;
    Eigen::MatrixXd xb_;  // n_units x x_rows cache of beta'x_{it}
    double last_accept_rate_{1.0};
};

// ---------------------------------------------------------------------------
// initialization

namespace detail {

struct FodSeries {
    std::vector<double> dep, reg, level_instr;
};

// Forward orthogonal deviations of the AR(1) regression rows for one unit.
inline FodSeries orthogonal_deviations(const Eigen::RowVectorXd& y) {
    const int T = static_cast<int>(y.size()) - 1;
    FodSeries out;
    if (T < 2) return out;
    std::vector<double> d(T), r(T);  // regression rows t = 1..T
    for (int t = 1; t <= T; ++t) {
        d[t - 1] = y[t];
        r[t - 1] = y[t - 1];
    }
    for (int j = 0; j + 1 < T; ++j) {  // transformed rows 1..T-1
        const int rem = T - 1 - j;
        double dm = 0, rm = 0;
        for (int s = j + 1; s < T; ++s) {
            dm += d[s];
            rm += r[s];
        }
        dm /= rem;
        rm /= rem;
        const double c = std::sqrt(static_cast<double>(rem) / (rem + 1));
        out.dep.push_back(c * (d[j] - dm));
        out.reg.push_back(c * (r[j] - rm));
        out.level_instr.push_back(r[j]);
    }
    return out;
}

inline int kmeans_labels(const Eigen::MatrixXd& feats, int k, std::vector<int>& labels) {
    const int n = static_cast<int>(feats.rows());
    k = std::min(k, n);
    // deterministic init: centers at quantile positions of the first feature
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return feats(a, 0) < feats(b, 0); });
    Eigen::MatrixXd centers(k, feats.cols());
    for (int c = 0; c < k; ++c)
        centers.row(c) = feats.row(order[static_cast<int>((c + 0.5) * n / k)]);

    labels.assign(n, 0);
    for (int iter = 0; iter < 100; ++iter) {
        bool changed = false;
        std::vector<int> counts(k, 0);
        for (int i = 0; i < n; ++i) {
            int best = 0;
            double bd = (feats.row(i) - centers.row(0)).squaredNorm();
            for (int c = 1; c < k; ++c) {
                const double d2 = (feats.row(i) - centers.row(c)).squaredNorm();
                if (d2 < bd) {
                    bd = d2;
                    best = c;
                }
            }
            if (labels[i] != best) changed = true;
            labels[i] = best;
            ++counts[best];
        }
        for (int c = 0; c < k; ++c) {
            if (counts[c] == 0) {
                // re-seed empty cluster at the farthest point
                int far = 0;
                double fd = -1;
                for (int i = 0; i < n; ++i) {
                    const double d2 = (feats.row(i) - centers.row(labels[i])).squaredNorm();
                    if (d2 > fd) {
                        fd = d2;
                        far = i;
                    }
                }
                centers.row(c) = feats.row(far);
                labels[far] = c;
                changed = true;
            }
        }
        Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, feats.cols());
        std::vector<int> cnt(k, 0);
        for (int i = 0; i < n; ++i) {
            sums.row(labels[i]) += feats.row(i);
            ++cnt[labels[i]];
        }
        for (int c = 0; c < k; ++c)
            if (cnt[c] > 0) centers.row(c) = sums.row(c) / cnt[c];
        if (!changed && iter > 0) break;
    }
    return k;
}

inline NIGParams nig_posterior(const NIGParams& prior, const double* obs, int n) {
    if (n == 0) return prior;
    const double m0 = prior.m[0], v0 = prior.v(0, 0);
    double sum = 0, ss = 0;
    for (int i = 0; i < n; ++i) {
        sum += obs[i];
        ss += obs[i] * obs[i];
    }
    const double vn = 1.0 / (1.0 / v0 + n);
    const double mn = vn * (m0 / v0 + sum);
    const double an = prior.a + 0.5 * n;
    const double bn =
        std::max(prior.b + 0.5 * (ss + m0 * m0 / v0 - mn * mn / vn), 1e-300);
    return NIGParams::scalar(mn, vn, an, bn);
}

inline MNIWParams mniw_posterior(const MNIWParams& prior, const Eigen::MatrixXd& W,
                                 const Eigen::MatrixXd& Z) {
    if (W.rows() == 0) return prior;
    const Eigen::Index r = prior.M.rows();
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(r, r);
    const Eigen::MatrixXd V0inv = prior.V.llt().solve(I);
    const Eigen::MatrixXd Vn_inv = V0inv + W.transpose() * W;
    Eigen::LLT<Eigen::MatrixXd> llt(Vn_inv);
    require(llt.info() == Eigen::Success, "mniw_posterior: precision not positive definite");
    MNIWParams post;
    post.V = llt.solve(I);
    post.M = post.V * (V0inv * prior.M + W.transpose() * Z);
    post.nu = prior.nu + static_cast<double>(W.rows());
    Eigen::MatrixXd S = prior.S + Z.transpose() * Z + prior.M.transpose() * V0inv * prior.M -
                        post.M.transpose() * Vn_inv * post.M;
    post.S = 0.5 * (S + S.transpose());
    return post;
}

}  // namespace detail

inline void GibbsSampler::initialize() {
    const int n = data_.n_units(), T = data_.T();
    state_.latent.y_star = data_.y;

    // rho (and beta) start values
    state_.common.beta = Eigen::VectorXd::Zero(data_.n_x());
    double rho_hat = 0.0;
    bool have_rho = false;
    if (data_.n_x() == 0 && lag_ == 1 && !spec_.pooled() && T >= 3) {
        // orthogonal-differencing GMM with level instruments
        double num = 0, den = 0;
        for (int i = 0; i < n; ++i) {
            const auto fod = detail::orthogonal_deviations(data_.y.row(i));
            for (std::size_t j = 0; j < fod.dep.size(); ++j) {
                num += fod.level_instr[j] * fod.dep[j];
                den += fod.level_instr[j] * fod.reg[j];
            }
        }
        if (std::fabs(den) > 1e-10) {
            rho_hat = num / den;
            have_rho = true;
        }
    }
    if (!have_rho) {
        // pooled OLS of y_t on [1, y_{t-lag}, x_{t-lag}]; for the pure AR
        // fallback only pairs with positive outcomes enter
        const int p = 2 + data_.n_x();
        Eigen::MatrixXd A = Eigen::MatrixXd::Zero(p, p);
        Eigen::VectorXd bvec = Eigen::VectorXd::Zero(p);
        Eigen::VectorXd z(p);
        for (int i = 0; i < n; ++i)
            for (int t = lag_; t <= T; ++t) {
                // pooled benchmarks initialize from raw OLS; otherwise only
                // uncensored pairs enter
                if (!spec_.pooled() && !(data_.y(i, t) > 0 && data_.y(i, t - lag_) > 0)) continue;
                z[0] = 1.0;
                z[1] = data_.y(i, t - lag_);
                if (data_.n_x() > 0) z.tail(data_.n_x()) = data_.x_at(i, t - lag_).transpose();
                A += z * z.transpose();
                bvec += z * data_.y(i, t);
            }
        A.diagonal().array() += 1e-8;
        const Eigen::VectorXd coef = A.ldlt().solve(bvec);
        rho_hat = coef[1];
        if (data_.n_x() > 0) state_.common.beta = coef.tail(data_.n_x());
    }
    state_.common.rho = rho_hat;
    refresh_xb();

    // per-unit intercepts and variances
    state_.unit.lambda.resize(n);
    state_.unit.sigma2.resize(n);
    std::vector<double> positives;
    for (int i = 0; i < n; ++i)
        for (int t = 0; t <= T; ++t)
            if (data_.y(i, t) > 0) positives.push_back(data_.y(i, t));
    const double pos_sd =
        positives.size() > 1 ? std::sqrt(sample_moments(positives).var) : 1.0;

    const double v_floor = 1e-4 * std::max(priors_.tuning.v_star, 1e-4);
    for (int i = 0; i < n; ++i) {
        bool all_zero = true;
        double acc = 0;
        int cnt = 0;
        for (int t = lag_; t <= T; ++t) {
            if (data_.y(i, t) > 0 || data_.y(i, t - lag_) > 0) all_zero = false;
            acc += data_.y(i, t) - state_.common.rho * data_.y(i, t - lag_) - xb(i, t - lag_);
            ++cnt;
        }
        for (int t = 0; t < lag_; ++t)
            if (data_.y(i, t) > 0) all_zero = false;
        state_.unit.lambda[i] = all_zero ? -pos_sd : acc / cnt;

        const auto fod = detail::orthogonal_deviations(data_.y.row(i));
        double rss = 0;
        for (std::size_t j = 0; j < fod.dep.size(); ++j) {
            const double e = fod.dep[j] - state_.common.rho * fod.reg[j];
            rss += e * e;
        }
        // units whose path carries no variance information (all zeros) start
        // at the cross-sectional average variance instead of a tiny floor
        state_.unit.sigma2[i] =
            (fod.dep.empty() || rss <= 0.0)
                ? std::max(priors_.tuning.v_star, v_floor)
                : std::max(rss / static_cast<double>(fod.dep.size()), v_floor);
    }
    if (spec_.pooled()) {
        const double lam = state_.unit.lambda.mean();
        double s2 = 0;
        int cnt = 0;
        for (int i = 0; i < n; ++i)
            for (int t = lag_; t <= T; ++t) {
                const double e =
                    data_.y(i, t) - state_.common.rho * data_.y(i, t - lag_) - xb(i, t - lag_) - lam;
                s2 += e * e;
                ++cnt;
            }
        state_.unit.lambda.setConstant(lam);
        state_.unit.sigma2.setConstant(std::max(s2 / cnt, v_floor));
    }

    // memberships via k-means on the standardized initial estimates
    const int K = spec_.mixture_K();
    state_.gamma_lambda.assign(n, 0);
    state_.gamma_sigma.assign(n, 0);
    if (!spec_.pooled() && K > 1) {
        const int feat_dim = spec_.heteroskedastic() ? 2 : 1;
        Eigen::MatrixXd feats(n, feat_dim);
        feats.col(0) = state_.unit.lambda;
        if (feat_dim == 2) feats.col(1) = state_.unit.sigma2.array().log();
        for (int c = 0; c < feat_dim; ++c) {
            std::vector<double> col(feats.col(c).data(), feats.col(c).data() + n);
            const auto m = sample_moments(col);
            const double sd = std::sqrt(std::max(m.var, 1e-12));
            feats.col(c) = (feats.col(c).array() - m.mean) / sd;
        }
        std::vector<int> labels;
        detail::kmeans_labels(feats, std::min(10, K), labels);
        state_.gamma_lambda = labels;
        state_.gamma_sigma = labels;
    }

    state_.xi.alpha_lambda = 1.0;  // prior mean of G(2,2)
    state_.xi.alpha_sigma = 1.0;
    state_.xi.pi_lambda = Eigen::VectorXd::Constant(std::max(K, 1), 1.0 / std::max(K, 1));
    state_.xi.pi_sigma = state_.xi.pi_lambda;
    state_.rwmh_log_step = Eigen::VectorXd::Constant(n, std::log(0.5));

    // one conditional draw of xi given the initial estimates
    step6_draw_xi(detail::kStepInit);
}

// ---------------------------------------------------------------------------
// steps

inline void GibbsSampler::step1_draw_latents(std::uint64_t sweep_index) {
    if (spec_.linear()) return;  // the linear benchmark ignores censoring
    const int n = data_.n_units();
    parallel_for(n, n_threads(), [&](int i) {
        if (segments_[i].empty()) return;
        RngStream rng = stream(sweep_index, detail::kStepLatent, static_cast<std::uint64_t>(i));
        for (const CensoredSegment& seg : segments_[i]) {
            NormalMoments init;
            const NormalMoments* initp = nullptr;
            if (seg.left_is_initial) {
                init = initial_conditional(i);
                initp = &init;
            }
            const TruncatedMvnSpec tspec = segment_conditional_moments(
                seg, state_.unit.lambda[i], state_.unit.sigma2[i], state_.common, data_, initp);
            const Eigen::VectorXd draw =
                draw_truncated_mvn_neg(tspec, rng, settings_.mvn_scans);
            for (int c = 0; c < seg.run_length(); ++c)
                state_.latent.y_star(i, seg.t1 + c * seg.stride) = draw[c];
        }
    });
}

inline void GibbsSampler::step2_draw_lambda(std::uint64_t sweep_index) {
    const int n = data_.n_units(), T = data_.T();
    if (spec_.pooled()) {
        double prec = 1.0 / priors_.pooled_lambda_var, num = 0.0;
        for (int i = 0; i < n; ++i) {
            const double w = 1.0 / state_.unit.sigma2[i];
            for (int t = lag_; t <= T; ++t) num += w * resid(i, t);
            prec += w * (T - lag_ + 1);
        }
        RngStream rng = stream(sweep_index, detail::kStepLambda, 0);
        const double lam = num / prec + rng.normal() / std::sqrt(prec);
        state_.unit.lambda.setConstant(lam);
        return;
    }
    parallel_for(n, n_threads(), [&](int i) {
        RngStream rng = stream(sweep_index, detail::kStepLambda, static_cast<std::uint64_t>(i));
        const Eigen::RowVectorXd xm1 =
            data_.n_x() > 0 ? data_.x_at(i, -1) : Eigen::RowVectorXd(0);
        const NormalMoments prior = lambda_conditional_prior(
            state_.xi, spec_, state_.gamma_lambda[i], state_.latent.y_star(i, 0), xm1);
        double sum = 0;
        for (int t = lag_; t <= T; ++t) sum += resid(i, t);
        const double n_obs = T - lag_ + 1;
        const double prec = 1.0 / prior.var + n_obs / state_.unit.sigma2[i];
        const double mean = (prior.mean / prior.var + sum / state_.unit.sigma2[i]) / prec;
        state_.unit.lambda[i] = mean + rng.normal() / std::sqrt(prec);
    });
}

inline void GibbsSampler::step3_draw_sigma2(std::uint64_t sweep_index, bool adapt,
                                            std::uint64_t adapt_count) {
    const int n = data_.n_units(), T = data_.T();
    const double n_obs = T - lag_ + 1;
    if (!spec_.heteroskedastic()) {
        double rss = 0;
        for (int i = 0; i < n; ++i)
            for (int t = lag_; t <= T; ++t) {
                const double e = resid(i, t) - state_.unit.lambda[i];
                rss += e * e;
            }
        RngStream rng = stream(sweep_index, detail::kStepSigma, 0);
        const double draw = rng.inverse_gamma(priors_.sigma2_ig_a + 0.5 * n_obs * n,
                                              priors_.sigma2_ig_b + 0.5 * rss);
        state_.unit.sigma2.setConstant(std::max(draw, 1e-12));
        last_accept_rate_ = 1.0;
        return;
    }
    std::vector<double> accepted(n, 0.0);
    const double gamma_m = 2.0 / std::sqrt(static_cast<double>(adapt_count) + 1.0);
    parallel_for(n, n_threads(), [&](int i) {
        RngStream rng = stream(sweep_index, detail::kStepSigma, static_cast<std::uint64_t>(i));
        double rss = 0;
        for (int t = lag_; t <= T; ++t) {
            const double e = resid(i, t) - state_.unit.lambda[i];
            rss += e * e;
        }
        const int k = state_.gamma_sigma[i];
        const double psi = state_.xi.psi[k], om2 = state_.xi.omega2[k];
        auto log_post = [&](double z) {
            return -0.5 * (z - psi) * (z - psi) / om2 - 0.5 * n_obs * z -
                   0.5 * rss * std::exp(-z);
        };
        const double z = std::log(state_.unit.sigma2[i]);
        const double zp = z + std::exp(state_.rwmh_log_step[i]) * rng.normal();
        double alpha = 0.0;
        if (std::exp(zp) >= 1e-12) {  // draws below the floor count as rejects
            alpha = std::min(1.0, std::exp(log_post(zp) - log_post(z)));
        }
        if (rng.uniform() < alpha) {
            state_.unit.sigma2[i] = std::exp(zp);
            accepted[i] = 1.0;
        }
        if (adapt) {
            double l = state_.rwmh_log_step[i] +
                       gamma_m * (alpha - settings_.rwmh_target_accept);
            state_.rwmh_log_step[i] = std::clamp(l, std::log(1e-3), std::log(10.0));
        }
    });
    last_accept_rate_ = pairwise_mean(accepted);
}

inline void GibbsSampler::step4_draw_theta(std::uint64_t sweep_index) {
    const int n = data_.n_units(), T = data_.T(), p = 1 + data_.n_x();
    Eigen::MatrixXd A = Eigen::MatrixXd::Identity(p, p) / priors_.theta_prior_var;
    Eigen::VectorXd bvec = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd z(p);
    for (int i = 0; i < n; ++i) {
        const double w = 1.0 / state_.unit.sigma2[i];
        for (int t = lag_; t <= T; ++t) {
            z[0] = state_.latent.y_star(i, t - lag_);
            if (data_.n_x() > 0) z.tail(data_.n_x()) = data_.x_at(i, t - lag_).transpose();
            const double r = state_.latent.y_star(i, t) - state_.unit.lambda[i];
            A.noalias() += w * z * z.transpose();
            bvec.noalias() += (w * r) * z;
        }
    }
    Eigen::LLT<Eigen::MatrixXd> llt(A);
    require(llt.info() == Eigen::Success, "step4: posterior precision not positive definite");
    const Eigen::VectorXd mean = llt.solve(bvec);
    RngStream rng = stream(sweep_index, detail::kStepTheta, 0);
    Eigen::VectorXd eta(p);
    for (int j = 0; j < p; ++j) eta[j] = rng.normal();
    const Eigen::VectorXd theta =
        mean + llt.matrixU().solve(eta);  // A = LL', draw = mean + L^-T eta
    state_.common.rho = theta[0];
    if (data_.n_x() > 0) state_.common.beta = theta.tail(data_.n_x());
    refresh_xb();
}

inline void GibbsSampler::step5_draw_memberships(std::uint64_t sweep_index) {
    const int K = spec_.mixture_K();
    if (spec_.pooled() || K == 1) return;
    const int n = data_.n_units();
    parallel_for(n, n_threads(), [&](int i) {
        RngStream rng = stream(sweep_index, detail::kStepMember, static_cast<std::uint64_t>(i));
        const Eigen::RowVectorXd xm1 =
            data_.n_x() > 0 ? data_.x_at(i, -1) : Eigen::RowVectorXd(0);

        auto draw_label = [&](const Eigen::VectorXd& pi, auto&& log_kernel) {
            Eigen::VectorXd lw(K);
            double best = -std::numeric_limits<double>::infinity();
            for (int k = 0; k < K; ++k) {
                lw[k] = (pi[k] > 0 ? std::log(pi[k]) : -std::numeric_limits<double>::infinity()) +
                        log_kernel(k);
                best = std::max(best, lw[k]);
            }
            require(std::isfinite(best), "step5: all membership weights vanished");
            double total = 0;
            for (int k = 0; k < K; ++k) {
                lw[k] = std::exp(lw[k] - best);
                total += lw[k];
            }
            const double u = rng.uniform() * total;
            double acc = 0;
            for (int k = 0; k < K; ++k) {
                acc += lw[k];
                if (u <= acc) return k;
            }
            return K - 1;
        };

        state_.gamma_lambda[i] = draw_label(state_.xi.pi_lambda, [&](int k) {
            return lambda_block_log_density(state_.xi, spec_, k, state_.unit.lambda[i],
                                            state_.latent.y_star(i, 0), xm1);
        });
        if (spec_.heteroskedastic()) {
            const double ls = std::log(state_.unit.sigma2[i]);
            state_.gamma_sigma[i] = draw_label(state_.xi.pi_sigma, [&](int k) {
                return normal_log_pdf(ls, state_.xi.psi[k], state_.xi.omega2[k]);
            });
        }
    });
}

inline void GibbsSampler::step6_draw_xi(std::uint64_t sweep_index) {
    const int n = data_.n_units();
    const int K = spec_.mixture_K();
    RngStream rng = stream(sweep_index, detail::kStepXi, 0);

    if (!spec_.pooled()) {
        std::vector<std::vector<int>> members(K);
        for (int i = 0; i < n; ++i) members[state_.gamma_lambda[i]].push_back(i);

        if (spec_.is_cre()) {
            const int r = data_.n_x() + 1;
            state_.xi.Phi.resize(K);
            state_.xi.Sigma.resize(K);
            for (int k = 0; k < K; ++k) {
                const int nk = static_cast<int>(members[k].size());
                Eigen::MatrixXd W(nk, r), Z(nk, 2);
                for (int j = 0; j < nk; ++j) {
                    const int i = members[k][j];
                    W(j, 0) = 1.0;
                    if (data_.n_x() > 0) W.row(j).tail(data_.n_x()) = data_.x_at(i, -1);
                    Z(j, 0) = state_.unit.lambda[i];
                    Z(j, 1) = state_.latent.y_star(i, 0);
                }
                const MNIWParams post = detail::mniw_posterior(priors_.lambda_mniw, W, Z);
                const MNIWDraw d = draw_mniw(post, rng);
                state_.xi.Phi[k] = d.Phi;
                state_.xi.Sigma[k] = d.Sigma;
            }
        } else {
            state_.xi.phi_lambda.resize(K);
            state_.xi.Sigma_lambda.resize(K);
            std::vector<double> vals;
            for (int k = 0; k < K; ++k) {
                vals.clear();
                for (int i : members[k]) vals.push_back(state_.unit.lambda[i]);
                const NIGParams post = detail::nig_posterior(priors_.lambda_nig, vals.data(),
                                                             static_cast<int>(vals.size()));
                const NIGDraw d = draw_nig(post, rng);
                state_.xi.phi_lambda[k] = d.theta[0];
                state_.xi.Sigma_lambda[k] = d.sigma2;
            }
        }

        if (spec_.flexible()) {
            Eigen::VectorXd ones(K - 1), alphas(K - 1);
            for (int k = 0; k < K - 1; ++k) {
                ones[k] = 1.0 + static_cast<double>(members[k].size());
                double tail = 0;
                for (int j = k + 1; j < K; ++j) tail += static_cast<double>(members[j].size());
                alphas[k] = state_.xi.alpha_lambda + tail;
            }
            const TsbDraw tsb = draw_tsb_detail(ones, alphas, K, rng);
            state_.xi.pi_lambda = tsb.pi;
            state_.xi.alpha_lambda =
                rng.gamma(priors_.alpha_a + K - 1, priors_.alpha_b - tsb.log_pi_last);
        } else {
            state_.xi.pi_lambda = Eigen::VectorXd::Ones(1);
        }
    }

    // y0* marginal under the RE layout (shared by all units)
    if (!spec_.is_cre() && !spec_.linear()) {
        if (spec_.y0_fixed) {
            state_.xi.phi_y = spec_.y0_phi;
            state_.xi.Sigma_y = spec_.y0_sigma2;
        } else {
            std::vector<double> y0s;
            y0s.reserve(static_cast<std::size_t>(n) * lag_);
            for (int i = 0; i < n; ++i)
                for (int t = 0; t < lag_; ++t) y0s.push_back(state_.latent.y_star(i, t));
            const NIGParams post = detail::nig_posterior(priors_.y0_nig, y0s.data(),
                                                         static_cast<int>(y0s.size()));
            const NIGDraw d = draw_nig(post, rng);
            state_.xi.phi_y = d.theta[0];
            state_.xi.Sigma_y = d.sigma2;
        }
    }

    if (spec_.heteroskedastic()) {
        std::vector<std::vector<int>> members(K);
        for (int i = 0; i < n; ++i) members[state_.gamma_sigma[i]].push_back(i);
        state_.xi.psi.resize(K);
        state_.xi.omega2.resize(K);
        std::vector<double> vals;
        for (int k = 0; k < K; ++k) {
            vals.clear();
            for (int i : members[k]) vals.push_back(std::log(state_.unit.sigma2[i]));
            const NIGParams post = detail::nig_posterior(priors_.log_sigma_nig, vals.data(),
                                                         static_cast<int>(vals.size()));
            const NIGDraw d = draw_nig(post, rng);
            state_.xi.psi[k] = d.theta[0];
            state_.xi.omega2[k] = d.sigma2;
        }
        if (spec_.flexible()) {
            Eigen::VectorXd ones(K - 1), alphas(K - 1);
            for (int k = 0; k < K - 1; ++k) {
                ones[k] = 1.0 + static_cast<double>(members[k].size());
                double tail = 0;
                for (int j = k + 1; j < K; ++j) tail += static_cast<double>(members[j].size());
                alphas[k] = state_.xi.alpha_sigma + tail;
            }
            const TsbDraw tsb = draw_tsb_detail(ones, alphas, K, rng);
            state_.xi.pi_sigma = tsb.pi;
            state_.xi.alpha_sigma =
                rng.gamma(priors_.alpha_a + K - 1, priors_.alpha_b - tsb.log_pi_last);
        } else {
            state_.xi.pi_sigma = Eigen::VectorXd::Ones(1);
        }
    }
}

inline void GibbsSampler::sweep(std::uint64_t sweep_index, bool adapt) {
    step1_draw_latents(sweep_index);
    step2_draw_lambda(sweep_index);
    step3_draw_sigma2(sweep_index, adapt, sweep_index);
    step4_draw_theta(sweep_index);
    step5_draw_memberships(sweep_index);
    step6_draw_xi(sweep_index);
}

// ---------------------------------------------------------------------------
// log joint density (up to an additive constant), for trace diagnostics

inline double GibbsSampler::log_joint() const {
    const int n = data_.n_units(), T = data_.T();
    const int K = spec_.mixture_K();
    double lj = 0;
    for (int i = 0; i < n; ++i) {
        const double s2 = state_.unit.sigma2[i];
        for (int t = lag_; t <= T; ++t) {
            const double e = resid(i, t) - state_.unit.lambda[i];
            lj += -0.5 * (std::log(s2) + e * e / s2);
        }
        const Eigen::RowVectorXd xm1 =
            data_.n_x() > 0 ? data_.x_at(i, -1) : Eigen::RowVectorXd(0);
        if (spec_.pooled()) {
            if (!spec_.linear()) {
                lj += normal_log_pdf(state_.latent.y_star(i, 0), state_.xi.phi_y,
                                     state_.xi.Sigma_y);
            }
        } else {
            const int k = state_.gamma_lambda[i];
            lj += lambda_block_log_density(state_.xi, spec_, k, state_.unit.lambda[i],
                                           state_.latent.y_star(i, 0), xm1);
            if (!spec_.is_cre())
                lj += normal_log_pdf(state_.latent.y_star(i, 0), state_.xi.phi_y,
                                     state_.xi.Sigma_y);
            if (spec_.flexible()) lj += std::log(std::max(state_.xi.pi_lambda[k], 1e-300));
        }
        if (spec_.heteroskedastic()) {
            const int k = state_.gamma_sigma[i];
            lj += normal_log_pdf(std::log(s2), state_.xi.psi[k], state_.xi.omega2[k]);
            if (spec_.flexible()) lj += std::log(std::max(state_.xi.pi_sigma[k], 1e-300));
        }
    }
    if (!spec_.heteroskedastic()) {
        const double s2 = state_.unit.sigma2[0];
        lj += -(priors_.sigma2_ig_a + 1.0) * std::log(s2) - priors_.sigma2_ig_b / s2;
    }
    if (spec_.pooled())
        lj += -0.5 * state_.unit.lambda[0] * state_.unit.lambda[0] / priors_.pooled_lambda_var;

    lj += -0.5 * state_.common.rho * state_.common.rho / priors_.theta_prior_var;
    if (data_.n_x() > 0)
        lj += -0.5 * state_.common.beta.squaredNorm() / priors_.theta_prior_var;

    auto nig_kernel = [](const NIGParams& p, double loc, double scale2) {
        const double d = loc - p.m[0];
        return -(p.a + 1.0) * std::log(scale2) - p.b / scale2 - 0.5 * std::log(scale2) -
               0.5 * d * d / (scale2 * p.v(0, 0));
    };
    auto tsb_kernel = [K](const Eigen::VectorXd& pi, double alpha) {
        // reconstruct sticks; p(zeta_k | alpha) = alpha (1 - zeta_k)^(alpha-1)
        double lp = 0, rem = 1.0;
        for (int k = 0; k + 1 < K; ++k) {
            const double zeta = std::clamp(pi[k] / std::max(rem, 1e-300), 1e-15, 1.0 - 1e-15);
            lp += std::log(alpha) + (alpha - 1.0) * std::log1p(-zeta);
            rem *= (1.0 - zeta);
        }
        return lp;
    };
    auto gamma_kernel = [](double a, double b, double x) {
        return (a - 1.0) * std::log(x) - b * x;
    };

    if (!spec_.pooled()) {
        if (spec_.is_cre()) {
            const double r = static_cast<double>(data_.n_x() + 1);
            const Eigen::MatrixXd V0inv = priors_.lambda_mniw.V.inverse();
            for (int k = 0; k < K; ++k) {
                const Eigen::Matrix2d& S = state_.xi.Sigma[k];
                const double logdet = std::log(S(0, 0) * S(1, 1) - S(0, 1) * S(1, 0));
                const Eigen::Matrix2d Sinv = S.inverse();
                lj += -0.5 * (priors_.lambda_mniw.nu + 3.0 + r) * logdet -
                      0.5 * (priors_.lambda_mniw.S * Sinv).trace();
                const Eigen::MatrixXd D = state_.xi.Phi[k] - priors_.lambda_mniw.M;
                lj += -0.5 * (Sinv * D.transpose() * V0inv * D).trace();
            }
        } else {
            for (int k = 0; k < K; ++k)
                lj += nig_kernel(priors_.lambda_nig, state_.xi.phi_lambda[k],
                                 state_.xi.Sigma_lambda[k]);
        }
        if (spec_.flexible()) {
            lj += tsb_kernel(state_.xi.pi_lambda, state_.xi.alpha_lambda);
            lj += gamma_kernel(priors_.alpha_a, priors_.alpha_b, state_.xi.alpha_lambda);
        }
    }
    if (!spec_.is_cre() && !spec_.linear() && !spec_.y0_fixed)
        lj += nig_kernel(priors_.y0_nig, state_.xi.phi_y, state_.xi.Sigma_y);
    if (spec_.heteroskedastic()) {
        for (int k = 0; k < K; ++k)
            lj += nig_kernel(priors_.log_sigma_nig, state_.xi.psi[k], state_.xi.omega2[k]);
        if (spec_.flexible()) {
            lj += tsb_kernel(state_.xi.pi_sigma, state_.xi.alpha_sigma);
            lj += gamma_kernel(priors_.alpha_a, priors_.alpha_b, state_.xi.alpha_sigma);
        }
    }
    return lj;
}

// ---------------------------------------------------------------------------
// chain driver

struct PosteriorDraws {
    ModelSpec spec;
    SamplerSettings settings;
    int lag{1};
    int T{1};  // estimation horizon the chain was run on
    std::vector<std::string> unit_ids;

    Eigen::VectorXd rho;     // M
    Eigen::MatrixXd beta;    // M x n_x
    Eigen::MatrixXd lambda;  // M x N
    Eigen::MatrixXd sigma2;  // M x N
    Eigen::MatrixXd ystar_T;  // M x N, latent outcome at the forecast origin
    std::vector<MixtureHyperparams> xi;
    Eigen::VectorXd log_joint;
    Eigen::VectorXd accept_rate;

    // carried from the data so forecasting is self-contained
    bool has_x_T{false};
    Eigen::MatrixXd x_T;       // N x n_x, standardized
    Eigen::MatrixXd x_minus1;  // N x n_x, standardized
    Eigen::VectorXd x_mean, x_sd;

    int n_draws() const { return static_cast<int>(rho.size()); }
    int n_units() const { return static_cast<int>(lambda.cols()); }
    int n_x() const { return static_cast<int>(beta.cols()); }
};

inline PosteriorDraws run_chain(const PanelData& data, const ModelSpec& spec,
                                const PriorBundle& priors, const SamplerSettings& settings,
                                int lag = 1) {
    GibbsSampler sampler(data, spec, priors, settings, lag);
    sampler.initialize();

    const int M = settings.n_draws, N = data.n_units();
    PosteriorDraws out;
    out.spec = spec;
    out.settings = settings;
    out.lag = lag;
    out.T = data.T();
    out.unit_ids = data.unit_ids;
    out.rho.resize(M);
    out.beta.resize(M, data.n_x());
    out.lambda.resize(M, N);
    out.sigma2.resize(M, N);
    out.ystar_T.resize(M, N);
    out.xi.reserve(M);
    out.log_joint.resize(M);
    out.accept_rate.resize(M);
    out.x_mean = data.x_mean;
    out.x_sd = data.x_sd;
    if (data.n_x() > 0) {
        out.x_minus1.resize(N, data.n_x());
        for (int i = 0; i < N; ++i) out.x_minus1.row(i) = data.x_at(i, -1);
        out.has_x_T = data.has_x(data.T());
        if (out.has_x_T) {
            out.x_T.resize(N, data.n_x());
            for (int i = 0; i < N; ++i) out.x_T.row(i) = data.x_at(i, data.T());
        }
    }

    const long long total = static_cast<long long>(settings.burn_in) +
                            static_cast<long long>(M) * settings.thin;
    int stored = 0;
    for (long long m = 0; m < total; ++m) {
        const bool adapt = m < settings.burn_in;  // freeze after burn-in
        try {
            sampler.sweep(static_cast<std::uint64_t>(m), adapt);
        } catch (const Error& e) {
            throw Error("sweep " + std::to_string(m) + ": " + e.what());
        }
        if (m >= settings.burn_in && (m - settings.burn_in) % settings.thin == 0) {
            const ChainState& st = sampler.state();
            out.rho[stored] = st.common.rho;
            if (data.n_x() > 0) out.beta.row(stored) = st.common.beta.transpose();
            out.lambda.row(stored) = st.unit.lambda.transpose();
            out.sigma2.row(stored) = st.unit.sigma2.transpose();
            out.ystar_T.row(stored) = st.latent.y_star.col(data.T()).transpose();
            out.xi.push_back(st.xi);
            out.log_joint[stored] = sampler.log_joint();
            out.accept_rate[stored] = sampler.last_accept_rate();
            ++stored;
        }
    }
    return out;
}

}  // namespace paneltobit
