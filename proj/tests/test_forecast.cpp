#include <catch2/catch_amalgamated.hpp>

#include "paneltobit/forecast.hpp"
#include "paneltobit/montecarlo.hpp"

using namespace paneltobit;

namespace {

// hand-assembled draws object for forecasting tests
PosteriorDraws fake_draws(const Eigen::VectorXd& rho, const Eigen::MatrixXd& lambda,
                          const Eigen::MatrixXd& sigma2, const Eigen::MatrixXd& ystar_T) {
    PosteriorDraws d;
    d.spec = mc_model_spec("normal-heterosk", 1);
    d.settings.seed = 4242;
    d.lag = 1;
    d.T = 10;
    d.rho = rho;
    d.beta.resize(rho.size(), 0);
    d.lambda = lambda;
    d.sigma2 = sigma2;
    d.ystar_T = ystar_T;
    d.log_joint = Eigen::VectorXd::Zero(rho.size());
    d.accept_rate = Eigen::VectorXd::Ones(rho.size());
    d.x_mean.resize(0);
    d.x_sd.resize(0);
    return d;
}

PredictiveDensity density_from(const Eigen::VectorXd& mu, const Eigen::VectorXd& var,
                               std::uint64_t seed) {
    RngStream rng = RngStream::from(seed, {0});
    return build_predictive_density_unit(mu, var, rng);
}

}  // namespace

TEST_CASE("predictive moments specialize correctly across horizons", "[forecast]") {
    const int M = 3;
    Eigen::VectorXd rho(M);
    rho << 0.8, 0.8, 0.0;
    Eigen::MatrixXd lambda(M, 1), sigma2(M, 1), ystar(M, 1);
    lambda << 1.0, 1.0, 0.7;
    sigma2 << 1.0, 1.0, 2.0;
    ystar << 0.5, 0.0, 0.3;
    const PosteriorDraws d = fake_draws(rho, lambda, sigma2, ystar);

    const PredictiveComponents h1 = predictive_components(d, 1);
    CHECK(h1.mu(0, 0) == Catch::Approx(1.0 + 0.8 * 0.5));
    CHECK(h1.var(0, 0) == Catch::Approx(1.0));

    const PredictiveComponents h2 = predictive_components(d, 2);
    // rho=0.8, lambda=1, sigma2=1, y*_T=0: mu = 1.8, var = 1.64
    CHECK(h2.mu(0, 1) == Catch::Approx(1.8));
    CHECK(h2.var(0, 1) == Catch::Approx(1.64));
    // rho=0: memoryless, mu = lambda, var = sigma2 at any horizon
    CHECK(h2.mu(0, 2) == Catch::Approx(0.7));
    CHECK(h2.var(0, 2) == Catch::Approx(2.0));
}

TEST_CASE("missing regressor path is rejected", "[forecast]") {
    PosteriorDraws d = fake_draws(Eigen::VectorXd::Constant(2, 0.5),
                                  Eigen::MatrixXd::Ones(2, 1), Eigen::MatrixXd::Ones(2, 1),
                                  Eigen::MatrixXd::Zero(2, 1));
    d.beta.resize(2, 1);
    d.beta.setConstant(0.3);
    d.x_mean = Eigen::VectorXd::Zero(1);
    d.x_sd = Eigen::VectorXd::Ones(1);
    d.has_x_T = false;
    CHECK_THROWS_AS(predictive_components(d, 1), Error);
}

TEST_CASE("predictive density zero mass arithmetic", "[forecast]") {
    // all components deep below zero: the point mass absorbs everything
    {
        Eigen::VectorXd mu = Eigen::VectorXd::Constant(64, -50.0);
        Eigen::VectorXd var = Eigen::VectorXd::Ones(64);
        const PredictiveDensity pd = density_from(mu, var, 1);
        CHECK(pd.pi0 == Catch::Approx(1.0).margin(1e-12));
    }
    // single component at the origin: exactly one half
    {
        Eigen::VectorXd mu = Eigen::VectorXd::Zero(1);
        Eigen::VectorXd var = Eigen::VectorXd::Ones(1);
        const PredictiveDensity pd = density_from(mu, var, 2);
        CHECK(pd.pi0 == Catch::Approx(0.5));
    }
    // symmetric pair: (Phi(1) + Phi(-1))/2 = 1/2
    {
        Eigen::VectorXd mu(2);
        mu << -1.0, 1.0;
        Eigen::VectorXd var = Eigen::VectorXd::Ones(2);
        const PredictiveDensity pd = density_from(mu, var, 3);
        CHECK(pd.pi0 == Catch::Approx(0.5).margin(1e-12));
    }
}

TEST_CASE("zero mass and continuous mass add to one", "[forecast]") {
    RngStream rng = RngStream::from(17, {0});
    for (int rep = 0; rep < 20; ++rep) {
        const int M = 64;
        Eigen::VectorXd mu(M), var(M);
        for (int j = 0; j < M; ++j) {
            mu[j] = 2.0 * rng.normal();
            var[j] = 0.2 + rng.uniform();
        }
        const PredictiveDensity pd = density_from(mu, var, 100 + rep);
        const double w_mass = pd.weights.sum() / M;
        CHECK(pd.pi0 + w_mass == Catch::Approx(1.0).margin(1e-10));
        CHECK((pd.samples.array() > 0).all());
    }
}

TEST_CASE("pointwise sets: zero-dominated units collapse to the atom", "[forecast]") {
    Eigen::VectorXd mu = Eigen::VectorXd::Constant(128, -30.0);
    Eigen::VectorXd var = Eigen::VectorXd::Ones(128);
    const PredictiveDensity pd = density_from(mu, var, 4);
    REQUIRE(pd.pi0 >= 0.95);
    const SetForecast set = hpd_pointwise(pd, 0.10);
    CHECK(set.includes_zero);
    CHECK(set.segments.empty());
    CHECK(set.length() == 0.0);
    CHECK(set.contains(0.0));
    CHECK_FALSE(set.contains(0.5));
}

TEST_CASE("pointwise sets: unimodal case gives one interval at target mass", "[forecast]") {
    const int M = 4000;
    Eigen::VectorXd mu = Eigen::VectorXd::Constant(M, 5.0);
    Eigen::VectorXd var = Eigen::VectorXd::Ones(M);
    const PredictiveDensity pd = density_from(mu, var, 5);
    REQUIRE(pd.pi0 < 1e-5);
    const SetForecast set = hpd_pointwise(pd, 0.10);
    REQUIRE(set.segments.size() == 1);
    CHECK(set.segments[0].first < 5.0);
    CHECK(set.segments[0].second > 5.0);
    const double mass = set_posterior_mass(set, pd);
    CHECK(mass == Catch::Approx(0.90).margin(2.0 / std::sqrt(M)));
}

TEST_CASE("pointwise sets: bimodal case matches a threshold-search oracle", "[forecast]") {
    const int M = 4000;
    Eigen::VectorXd mu(M), var(M);
    RngStream rng = RngStream::from(6, {0});
    for (int j = 0; j < M; ++j) {
        mu[j] = (j % 2 == 0) ? 2.0 : 9.0;
        var[j] = 0.5;
    }
    const PredictiveDensity pd = density_from(mu, var, 6);
    const SetForecast set = hpd_pointwise(pd, 0.10);
    REQUIRE(set.segments.size() == 2);
    const double mass = set_posterior_mass(set, pd);
    CHECK(mass == Catch::Approx(0.90 - pd.pi0).margin(2.0 / std::sqrt(M)));

    // oracle: brute-force scan over density thresholds on the sampled mixture
    double best_len = 1e300;
    for (int g = 1; g < 400; ++g) {
        const double kappa = g * (pd.density.maxCoeff() / 400.0);
        double mass_k = pd.pi0;
        std::vector<std::pair<double, double>> pts;
        for (int j = 0; j < M; ++j)
            if (pd.density[j] >= kappa) mass_k += pd.weights[j] / M;
        if (mass_k < 0.90) continue;
        // shortest qualifying threshold set: measure its sample support length
        std::vector<double> sel;
        for (int j = 0; j < M; ++j)
            if (pd.density[j] >= kappa) sel.push_back(pd.samples[j]);
        std::sort(sel.begin(), sel.end());
        double len = 0;
        double a = sel.front(), b = sel.front();
        for (double y : sel) {
            if (y - b > 0.5) {  // gap: close the run
                len += b - a;
                a = y;
            }
            b = y;
        }
        len += b - a;
        best_len = std::min(best_len, len);
    }
    CHECK(set.length() == Catch::Approx(best_len).epsilon(0.10));

    // selected samples have densities no lower than the excluded maximum
    double min_in = 1e300, max_out = -1e300;
    for (int j = 0; j < M; ++j) {
        const bool inside = set.contains(pd.samples[j]);
        if (inside)
            min_in = std::min(min_in, pd.density[j]);
        else
            max_out = std::max(max_out, pd.density[j]);
    }
    CHECK(min_in >= max_out * 0.999);
}

TEST_CASE("higher credibility never shrinks a pointwise set", "[forecast]") {
    const int M = 2000;
    Eigen::VectorXd mu(M), var(M);
    RngStream rng = RngStream::from(7, {0});
    for (int j = 0; j < M; ++j) {
        mu[j] = rng.normal() * 2.0;
        var[j] = 0.3 + rng.uniform();
    }
    const PredictiveDensity pd = density_from(mu, var, 7);
    const SetForecast narrow = hpd_pointwise(pd, 0.20);
    const SetForecast wide = hpd_pointwise(pd, 0.05);
    CHECK(wide.length() >= narrow.length());
    // nesting on the sampled support
    for (int j = 0; j < M; ++j)
        if (narrow.contains(pd.samples[j])) CHECK(wide.contains(pd.samples[j]));
}

TEST_CASE("average-coverage sets with one unit match the pointwise path", "[forecast]") {
    const int M = 1500;
    Eigen::VectorXd mu(M), var(M);
    RngStream rng = RngStream::from(8, {0});
    for (int j = 0; j < M; ++j) {
        mu[j] = 1.0 + rng.normal();
        var[j] = 0.4 + 0.2 * rng.uniform();
    }
    const PredictiveDensity pd = density_from(mu, var, 8);
    const SetForecast pw = hpd_pointwise(pd, 0.10);
    const auto avg = hpd_average({pd}, 0.10);
    REQUIRE(avg.size() == 1);
    CHECK(avg[0].segments.size() == pw.segments.size());
    CHECK(avg[0].length() == Catch::Approx(pw.length()).margin(1e-12));
}

TEST_CASE("identical units receive the pointwise sets under averaging", "[forecast]") {
    const int M = 1200;
    Eigen::VectorXd mu = Eigen::VectorXd::Constant(M, 3.0);
    Eigen::VectorXd var = Eigen::VectorXd::Constant(M, 0.8);
    const PredictiveDensity pd = density_from(mu, var, 9);
    const std::vector<PredictiveDensity> pds = {pd, pd, pd};
    const auto avg = hpd_average(pds, 0.10);
    const SetForecast pw = hpd_pointwise(pd, 0.10);
    for (const auto& s : avg) CHECK(s.length() == Catch::Approx(pw.length()).epsilon(0.02));
}

TEST_CASE("averaging shortens total length on heterogeneous-sigma units", "[forecast]") {
    const int M = 3000;
    Eigen::VectorXd mu1 = Eigen::VectorXd::Constant(M, 4.0), var1 = Eigen::VectorXd::Constant(M, 0.25);
    Eigen::VectorXd mu2 = Eigen::VectorXd::Constant(M, 4.0), var2 = Eigen::VectorXd::Constant(M, 4.0);
    const PredictiveDensity a = density_from(mu1, var1, 10);
    const PredictiveDensity b = density_from(mu2, var2, 11);
    const double len_pw = hpd_pointwise(a, 0.10).length() + hpd_pointwise(b, 0.10).length();
    const auto avg = hpd_average({a, b}, 0.10);
    const double len_avg = avg[0].length() + avg[1].length();
    CHECK(len_avg < len_pw);

    // aggregate posterior coverage hits the target up to discreteness
    const double cov =
        0.5 * (set_posterior_mass(avg[0], a) + set_posterior_mass(avg[1], b));
    CHECK(cov == Catch::Approx(0.90).margin(2.0 / std::sqrt(2.0 * M)));
}

TEST_CASE("average mode hands out the zero atom when zeros dominate", "[forecast]") {
    // two units over the (1 - alpha) line together, one far below
    Eigen::VectorXd mu_hi = Eigen::VectorXd::Constant(64, -40.0);
    Eigen::VectorXd mu_lo = Eigen::VectorXd::Constant(64, 40.0);
    Eigen::VectorXd var = Eigen::VectorXd::Ones(64);
    const PredictiveDensity hi = density_from(mu_hi, var, 12);   // pi0 ~ 1
    const PredictiveDensity lo = density_from(mu_lo, var, 13);   // pi0 ~ 0
    const auto sets = hpd_average({hi, hi, lo}, 0.35);           // pi0_bar = 2/3 >= 0.65
    REQUIRE(sets.size() == 3);
    CHECK(sets[0].includes_zero);
    CHECK(sets[1].includes_zero);
    CHECK(sets[2].is_empty);
    CHECK_FALSE(sets[2].contains(0.0));
}

TEST_CASE("direct multi-step estimation at h=1 matches the standard chain", "[forecast]") {
    DgpSpec dgp = DgpSpec::design("table1");
    dgp.N = 30;
    dgp.T = 6;
    const PanelData data = simulate_dgp_panel(dgp, 1, 3000);
    const ModelSpec spec = mc_model_spec("flexible-heterosk", 4);
    PriorTuning tuning;
    tuning.v_star = compute_v_star(data);
    const PriorBundle priors = default_priors(spec, tuning);
    SamplerSettings st;
    st.n_draws = 25;
    st.burn_in = 10;
    st.seed = 77;
    const PosteriorDraws a = run_chain(data, spec, priors, st);
    const PosteriorDraws b = direct_multistep_estimate(data, spec, priors, st, 1);
    REQUIRE(a.rho == b.rho);
    REQUIRE(a.lambda == b.lambda);
}

TEST_CASE("direct two-step estimation concentrates near the lag-2 coefficient", "[forecast][slow]") {
    // white-noise DGP: the direct lag-2 coefficient is zero
    {
        DgpSpec dgp = DgpSpec::design("table1");
        dgp.rho = 0.0;
        dgp.N = 300;
        dgp.T = 8;
        const PanelData data = simulate_dgp_panel(dgp, 1, 3100);
        const ModelSpec spec = mc_model_spec("flexible-heterosk", 5);
        PriorTuning tuning;
        tuning.v_star = compute_v_star(data);
        SamplerSettings st;
        st.n_draws = 300;
        st.burn_in = 150;
        st.seed = 5;
        const PosteriorDraws d =
            direct_multistep_estimate(data, spec, default_priors(spec, tuning), st, 2);
        CHECK(d.rho.mean() == Catch::Approx(0.0).margin(0.06));
    }
    // a panel generated from the lag-2 law of motion itself: the direct
    // estimator is correctly specified and must recover the coefficient.
    // (On a lag-1 AR panel the quasi-likelihood that ignores the implied
    // serial correlation settles away from rho^2, so the clean oracle is the
    // correctly specified design.)
    {
        const int N = 400, T = 10;
        DgpSpec mix = DgpSpec::design("table1");
        mix.N = N;
        const DgpUnitDraw u = draw_dgp_unit_params(mix, 3200);
        const double rho_d = 0.64;
        Eigen::MatrixXd ystar(N, T + 1);
        RngStream rng = RngStream::from(64, {0});
        for (int i = 0; i < N; ++i) {
            ystar(i, 0) = rng.normal();
            ystar(i, 1) = rng.normal();
            const double sd = std::sqrt(u.unit.sigma2[i]);
            for (int t = 2; t <= T; ++t)
                ystar(i, t) = u.unit.lambda[i] + rho_d * ystar(i, t - 2) + sd * rng.normal();
        }
        PanelData data;
        data.y = ystar.cwiseMax(0.0);
        data.holdout_y.resize(N, 0);
        REQUIRE(fraction_of_zeros(data) > 0.1);  // keep Step 1 exercised

        const ModelSpec spec = mc_model_spec("flexible-heterosk", 5);
        PriorTuning tuning;
        tuning.v_star = compute_v_star(data);
        SamplerSettings st;
        st.n_draws = 400;
        st.burn_in = 200;
        st.seed = 6;
        const PosteriorDraws d =
            direct_multistep_estimate(data, spec, default_priors(spec, tuning), st, 2);
        CHECK(d.rho.mean() == Catch::Approx(rho_d).margin(0.05));
    }
}
