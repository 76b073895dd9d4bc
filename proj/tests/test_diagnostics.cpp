#include <catch2/catch_amalgamated.hpp>

#include "paneltobit/diagnostics.hpp"
#include "paneltobit/montecarlo.hpp"

using namespace paneltobit;

namespace {

PosteriorDraws quick_chain(int n, int T, std::uint64_t seed, const std::string& name,
                           int m = 60) {
    DgpSpec dgp = DgpSpec::design("table1");
    dgp.N = n;
    dgp.T = T;
    const PanelData data = simulate_dgp_panel(dgp, 1, seed);
    const ModelSpec spec = mc_model_spec(name, 4);
    PriorTuning tuning;
    tuning.v_star = compute_v_star(data);
    SamplerSettings st;
    st.n_draws = m;
    st.burn_in = 30;
    st.seed = seed + 1;
    return run_chain(data, spec, default_priors(spec, tuning), st);
}

}  // namespace

TEST_CASE("ppc simulation basics", "[diagnostics]") {
    DgpSpec dgp = DgpSpec::design("table1");
    dgp.N = 40;
    dgp.T = 6;
    const PanelData data = simulate_dgp_panel(dgp, 1, 21);
    const ModelSpec spec = mc_model_spec("flexible-heterosk", 4);
    PriorTuning tuning;
    tuning.v_star = compute_v_star(data);
    SamplerSettings st;
    st.n_draws = 50;
    st.burn_in = 25;
    st.seed = 22;
    const PosteriorDraws draws = run_chain(data, spec, default_priors(spec, tuning), st);

    CHECK(ppc_simulate(draws, data, 0, 1).empty());

    const auto reps = ppc_simulate(draws, data, 7, 1);
    REQUIRE(reps.size() == 7);
    for (const auto& rep : reps) {
        rep.validate();
        CHECK(rep.n_units() == data.n_units());
        CHECK(rep.T() == data.T());
        CHECK(rep.horizon() == 1);
    }
    // deterministic given the seed
    const auto reps2 = ppc_simulate(draws, data, 7, 1);
    CHECK(reps2[3].y == reps[3].y);
}

TEST_CASE("replicated zero fractions bracket the truth on well-fitting data", "[diagnostics][slow]") {
    // calibration by simulation: the 90% replicated interval for the zero
    // fraction should contain the observed value most of the time
    int contained = 0;
    const int trials = 10;
    for (int trial = 0; trial < trials; ++trial) {
        DgpSpec dgp = DgpSpec::design("table1");
        dgp.N = 120;
        dgp.T = 8;
        const PanelData data = simulate_dgp_panel(dgp, 1, 100 + trial);
        const ModelSpec spec = mc_model_spec("flexible-heterosk", 6);
        PriorTuning tuning;
        tuning.v_star = compute_v_star(data);
        SamplerSettings st;
        st.n_draws = 150;
        st.burn_in = 100;
        st.seed = 200 + trial;
        const PosteriorDraws draws = run_chain(data, spec, default_priors(spec, tuning), st);
        const auto reps = ppc_simulate(draws, data, 60, 300 + trial);
        std::vector<double> fracs;
        for (const auto& rep : reps) fracs.push_back(fraction_of_zeros(rep));
        const double lo = quantile_of(fracs, 0.05), hi = quantile_of(fracs, 0.95);
        const double obs = fraction_of_zeros(data);
        contained += (obs >= lo && obs <= hi);
    }
    CHECK(contained >= 8);
}

TEST_CASE("ppc statistics on a hand-built panel", "[diagnostics]") {
    PanelData panel;
    panel.y.resize(2, 6);
    panel.y << 0.0, 2.0, 3.0, 0.0, 1.0, 2.0,   // unit 0
               1.0, 1.0, 1.0, 1.0, 1.0, 1.0;   // unit 1
    panel.holdout_y.resize(2, 1);
    panel.holdout_y << 4.0, 0.0;

    const auto yT1 = ppc_stat_positive_yT1(panel);
    CHECK(yT1[0] == 4.0);
    CHECK(std::isnan(yT1[1]));

    const auto zc = ppc_stat_zero_count(panel);
    CHECK(zc[0] == 2.0);
    CHECK(zc[1] == 1.0);  // only the holdout zero

    // unit 0: after-zero runs are (2,3) and (1,2,4); before-zero runs are (2,3)
    const auto after = ppc_stat_mean_around_zero(panel, true);
    CHECK(after[0] == Catch::Approx((2.0 + 3.0 + 1.0 + 2.0 + 4.0) / 5.0));
    CHECK(std::isnan(after[1]));  // no zero inside the observed window
    const auto before = ppc_stat_mean_around_zero(panel, false);
    CHECK(before[0] == Catch::Approx(2.5));
    CHECK(before[1] == Catch::Approx(1.0));  // run precedes the holdout zero
}

TEST_CASE("robust autocorrelation is shift invariant", "[diagnostics]") {
    PanelData a;
    a.y.resize(1, 12);
    a.y << 1.0, 2.0, 1.5, 2.5, 1.2, 2.2, 1.8, 2.6, 1.4, 2.1, 1.9, 2.4;
    PanelData b = a;
    b.y.array() += 7.0;
    const auto ra = ppc_stat_robust_autocorr(a);
    const auto rb = ppc_stat_robust_autocorr(b);
    REQUIRE_FALSE(std::isnan(ra[0]));
    CHECK(ra[0] == Catch::Approx(rb[0]).margin(1e-12));
}

TEST_CASE("autocorrelation of iid and AR(1) chains", "[diagnostics]") {
    const int M = 20000;
    RngStream rng = RngStream::from(31, {0});
    Eigen::VectorXd iid(M), ar(M);
    double x = 0;
    for (int t = 0; t < M; ++t) {
        iid[t] = rng.normal();
        x = 0.9 * x + rng.normal();
        ar[t] = x;
    }
    const Eigen::VectorXd acf = autocorrelation(iid, 10);
    CHECK(acf[0] == Catch::Approx(1.0));
    CHECK(std::fabs(acf[1]) < 2.0 / std::sqrt(M));

    CHECK(effective_sample_size(iid) > 0.8 * M);
    // AR(1) with coefficient 0.9: ESS ~ M (1-rho)/(1+rho) = M/19
    CHECK(effective_sample_size(ar) == Catch::Approx(M / 19.0).epsilon(0.20));
}

TEST_CASE("treatment decomposition identity and edge cases", "[diagnostics]") {
    // build a small chain on a regressor panel so x_T is available
    const int n = 25, T = 6;
    UnitParams unit;
    unit.lambda = Eigen::VectorXd::Constant(n, 0.6);
    unit.sigma2 = Eigen::VectorXd::Constant(n, 0.9);
    CommonParams common;
    common.rho = 0.4;
    common.beta = Eigen::VectorXd::Constant(1, 0.25);
    RngStream rng = RngStream::from(41, {0});
    Eigen::MatrixXd x(n * (T + 2), 1);
    for (Eigen::Index r = 0; r < x.rows(); ++r) x(r, 0) = rng.normal();
    Eigen::VectorXd y0(n);
    for (int i = 0; i < n; ++i) y0[i] = rng.normal();
    auto sim = simulate_panel(unit, common, y0, x, T + 2, T, 99);
    PanelData data = sim.data;
    data.x_mean = Eigen::VectorXd::Zero(1);
    data.x_sd = Eigen::VectorXd::Ones(1);
    data.validate();

    ModelSpec spec;
    spec.heterogeneity = Heterogeneity::normal;
    spec.cre = CreType::cre;
    spec.variance = VarianceType::heteroskedastic;
    spec.K = 1;
    spec.n_x = 1;
    PriorTuning tuning;
    tuning.v_star = compute_v_star(data);
    SamplerSettings st;
    st.n_draws = 40;
    st.burn_in = 20;
    st.seed = 17;
    PosteriorDraws draws = run_chain(data, spec, default_priors(spec, tuning), st);
    REQUIRE(draws.has_x_T);

    Eigen::VectorXd iota = Eigen::VectorXd::Ones(1);
    CHECK_THROWS_AS(treatment_effect_decomposition(draws, iota, -1.0, 1), Error);

    // beta = 0 forces both terms to vanish
    PosteriorDraws zero_beta = draws;
    zero_beta.beta.setZero();
    const auto rows0 = treatment_effect_decomposition(zero_beta, iota, 0.5, 2);
    for (const auto& r : rows0) {
        CHECK(r.term1_mean == 0.0);
        CHECK(r.term2_mean == 0.0);
    }

    // deep-negative unit: both terms vanish; always-positive unit: term1 only
    PosteriorDraws edges = draws;
    edges.lambda.col(0).setConstant(-1000.0);
    edges.lambda.col(1).setConstant(+1000.0);
    const auto rows1 = treatment_effect_decomposition(edges, iota, 0.5, 3);
    CHECK(rows1[0].term1_mean == 0.0);
    CHECK(rows1[0].term2_mean == 0.0);
    const double beta_iota_mean = (draws.beta.col(0) / draws.x_sd[0]).mean();
    CHECK(rows1[1].term1_mean == Catch::Approx(beta_iota_mean).margin(1e-12));
    CHECK(rows1[1].term2_mean == 0.0);

    // the algebraic identity I + II = (censored difference)/dx, draw by draw
    const double dx = 0.5;
    const int M = draws.n_draws();
    for (int i = 0; i < std::min(5, n); ++i) {
        RngStream urng = RngStream::from(4, {0x7E47u, static_cast<std::uint64_t>(i)});
        for (int j = 0; j < M; ++j) {
            const double beta_std = draws.beta(j, 0);
            const double beta_iota = beta_std * iota[0] / draws.x_sd[0];
            const double u = urng.normal(0.0, std::sqrt(draws.sigma2(j, i)));
            const double z = draws.lambda(j, i) + draws.rho[j] * draws.ystar_T(j, i) +
                             beta_std * draws.x_T(i, 0) + u;
            const double zt = z + beta_iota * dx;
            const double term1 = beta_iota * (z > 0 ? 1.0 : 0.0);
            const double term2 = (zt / dx) * ((zt > 0 ? 1.0 : 0.0) - (z > 0 ? 1.0 : 0.0));
            const double direct = (std::max(zt, 0.0) - std::max(z, 0.0)) / dx;
            REQUIRE(term1 + term2 == Catch::Approx(direct).margin(1e-10));
        }
    }
}

TEST_CASE("chain diagnostics report on a real run", "[diagnostics]") {
    const PosteriorDraws draws = quick_chain(40, 6, 61, "flexible-heterosk", 80);
    const ChainDiagnostics d = chain_diagnostics(draws);
    CHECK(d.acf[0] == Catch::Approx(1.0));
    CHECK(d.ess > 0);
    CHECK(d.ess <= draws.n_draws() + 1);
    CHECK(d.mean_accept > 0);
}
