#pragma once

// Forecast evaluation: log predictive scores, CRPS via two algebraically
// equivalent routes, probability integral transforms, and set-forecast
// coverage / length / composition summaries.

#include "paneltobit/forecast.hpp"

namespace paneltobit {

inline constexpr double kDefaultLpsFloor = -690.77552789821368;  // ln 1e-300

// ln of the predictive mass/density at the realization: the zero atom when
// y = 0, the Monte Carlo mixture density otherwise. A vanished density is
// floored and flagged.
inline double log_predictive_score(const PredictiveDensity& pd, double y_realized,
                                   bool* floored = nullptr,
                                   double floor_log = kDefaultLpsFloor) {
    require(y_realized >= 0, "log_predictive_score: realization must be >= 0");
    double lp;
    if (y_realized == 0.0)
        lp = pd.pi0 > 0 ? std::log(pd.pi0) : -std::numeric_limits<double>::infinity();
    else
        lp = pd.log_density_at(y_realized);
    if (lp < floor_log || !std::isfinite(lp)) {
        if (floored) *floored = true;
        return floor_log;
    }
    if (floored) *floored = false;
    return lp;
}

// Riemann-sum CRPS of the empirical predictive CDF against the step function
// at y°, integrated over [0, inf). Samples may contain exact zeros (the atom).
inline double crps_riemann(std::vector<double> samples, double y_realized) {
    require(!samples.empty(), "crps_riemann: empty sample set");
    std::sort(samples.begin(), samples.end());
    const int M = static_cast<int>(samples.size());
    int m_star = 0;
    while (m_star < M && samples[m_star] <= y_realized) ++m_star;

    const double invM = 1.0 / M;
    auto F = [&](int j) { return j * invM; };  // F at samples[j-1], 1-based j

    double acc = 0;
    if (m_star == M) {
        for (int j = 2; j <= M; ++j) {
            const double f = F(j - 1);
            acc += f * f * (samples[j - 1] - samples[j - 2]);
        }
        acc += (y_realized - samples[M - 1]);
    } else if (m_star == 0) {
        acc += (samples[0] - y_realized);
        for (int j = 2; j <= M; ++j) {
            const double f = F(j - 1) - 1.0;
            acc += f * f * (samples[j - 1] - samples[j - 2]);
        }
    } else {
        for (int j = 2; j <= m_star; ++j) {
            const double f = F(j - 1);
            acc += f * f * (samples[j - 1] - samples[j - 2]);
        }
        const double fm = F(m_star);
        acc += fm * fm * (y_realized - samples[m_star - 1]);
        acc += (fm - 1.0) * (fm - 1.0) * (samples[m_star] - y_realized);
        for (int j = m_star + 2; j <= M; ++j) {
            const double f = F(j - 1) - 1.0;
            acc += f * f * (samples[j - 1] - samples[j - 2]);
        }
    }
    return acc;
}

// Gneiting-Raftery identity: mean absolute error minus the sample dispersion
// term. Must agree with crps_riemann to numerical precision on any input.
inline double crps_pairwise(std::vector<double> samples, double y_realized) {
    require(!samples.empty(), "crps_pairwise: empty sample set");
    std::sort(samples.begin(), samples.end());
    const int M = static_cast<int>(samples.size());
    double mad = 0;
    for (double s : samples) mad += std::fabs(s - y_realized);
    double disp = 0;
    for (int i = 0; i < M; ++i)
        for (int j = i + 1; j < M; ++j) disp += samples[j] - samples[i];
    return mad / M - disp / (static_cast<double>(M) * M);
}

inline double pit(const std::vector<double>& samples, double y_realized) {
    require(!samples.empty(), "pit: empty sample set");
    int cnt = 0;
    for (double s : samples) cnt += (s <= y_realized);
    return static_cast<double>(cnt) / static_cast<double>(samples.size());
}

// Full predictive sample used by CRPS/PIT: round(pi0*M) exact zeros followed
// by positive draws taken from the weighted positive-part representation by
// deterministic systematic resampling.
inline std::vector<double> full_predictive_sample(const PredictiveDensity& pd) {
    const int M = static_cast<int>(pd.samples.size());
    const int n0 = static_cast<int>(std::lround(pd.pi0 * M));
    const int npos = M - n0;
    std::vector<double> out(static_cast<std::size_t>(M), 0.0);
    if (npos == 0) return out;

    std::vector<int> asc(M);
    std::iota(asc.begin(), asc.end(), 0);
    std::sort(asc.begin(), asc.end(), [&](int a, int b) {
        if (pd.samples[a] != pd.samples[b]) return pd.samples[a] < pd.samples[b];
        return a < b;
    });
    double wtot = 0;
    for (int j = 0; j < M; ++j) wtot += pd.weights[j];
    require(wtot > 0, "full_predictive_sample: no positive mass to resample");

    int r = 0;
    double cum = pd.weights[asc[0]];
    for (int k = 0; k < npos; ++k) {
        const double pos = (k + 0.5) / npos * wtot;
        while (cum < pos && r + 1 < M) {
            ++r;
            cum += pd.weights[asc[r]];
        }
        out[static_cast<std::size_t>(n0 + k)] = pd.samples[asc[r]];
    }
    return out;
}

struct SetEvaluation {
    double coverage_freq{};
    double avg_length{};
    // composition: {0} only, [0,b], {0} u [a,b] with a > 0, empty, multi-segment
    double frac_zero_only{}, frac_zero_b{}, frac_zero_ab{}, frac_empty{}, frac_multi{};
};

inline SetEvaluation evaluate_sets(const std::vector<SetForecast>& sets,
                                   const Eigen::VectorXd& y_realized) {
    const int N = static_cast<int>(sets.size());
    require(N > 0 && y_realized.size() == N, "evaluate_sets: misaligned inputs");
    SetEvaluation ev;
    std::vector<double> hits(N), lens(N);
    for (int i = 0; i < N; ++i) {
        hits[i] = sets[i].contains(y_realized[i]) ? 1.0 : 0.0;
        lens[i] = sets[i].length();
        const auto K = sets[i].segments.size();
        if (sets[i].is_empty)
            ev.frac_empty += 1;
        else if (K == 0)
            ev.frac_zero_only += 1;
        else if (K == 1 && sets[i].segments[0].first == 0.0)
            ev.frac_zero_b += 1;
        else if (K == 1)
            ev.frac_zero_ab += 1;
        else
            ev.frac_multi += 1;
    }
    ev.coverage_freq = pairwise_mean(hits);
    ev.avg_length = pairwise_mean(lens);
    ev.frac_zero_only /= N;
    ev.frac_zero_b /= N;
    ev.frac_zero_ab /= N;
    ev.frac_empty /= N;
    ev.frac_multi /= N;
    return ev;
}

struct ScoreReport {
    double lps{};
    double crps{};
    SetEvaluation sets_average;
    SetEvaluation sets_pointwise;
    int lps_floor_count{0};
};

// Density scores plus both set-forecast modes for one panel of realizations.
inline ScoreReport score_panel(const std::vector<PredictiveDensity>& pds,
                               const Eigen::VectorXd& y_realized, double alpha) {
    const int N = static_cast<int>(pds.size());
    require(y_realized.size() == N, "score_panel: realization length mismatch");
    ScoreReport rep;
    std::vector<double> lps(N), crps(N);
    for (int i = 0; i < N; ++i) {
        bool floored = false;
        lps[i] = log_predictive_score(pds[i], y_realized[i], &floored);
        if (floored) ++rep.lps_floor_count;
        crps[i] = crps_riemann(full_predictive_sample(pds[i]), y_realized[i]);
    }
    rep.lps = pairwise_mean(lps);
    rep.crps = pairwise_mean(crps);

    std::vector<SetForecast> ptw(N);
    for (int i = 0; i < N; ++i) ptw[i] = hpd_pointwise(pds[i], alpha);
    rep.sets_pointwise = evaluate_sets(ptw, y_realized);
    rep.sets_average = evaluate_sets(hpd_average(pds, alpha), y_realized);
    return rep;
}

}  // namespace paneltobit
