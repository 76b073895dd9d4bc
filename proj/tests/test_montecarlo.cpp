#include <catch2/catch_amalgamated.hpp>

#include "paneltobit/montecarlo.hpp"

using namespace paneltobit;

TEST_CASE("unit parameter draws hit the design targets", "[mc]") {
    DgpSpec dgp = DgpSpec::design("table1");
    dgp.N = 1000000;
    const DgpUnitDraw d = draw_dgp_unit_params(dgp, 555);

    // mixture-mean arithmetic, here for the stated component means
    DgpSpec arith = dgp;
    arith.lambda_means << 2.5, 0.25;
    CHECK(arith.weights[0] * 2.5 + arith.weights[1] * 0.25 == Catch::Approx(0.5));

    CHECK(d.unit.lambda.mean() ==
          Catch::Approx(dgp.weights[0] * 2.25 + dgp.weights[1] * 0.0).margin(0.01));
    CHECK(d.unit.sigma2.mean() == Catch::Approx(1.0).margin(0.01));
    CHECK(d.y0_star.mean() == Catch::Approx(0.0).margin(0.01));
}

TEST_CASE("the shift constant solves the unit-mean constraint in closed form", "[mc]") {
    // oracle: Monte Carlo average of exp(c + mixture draw)
    DgpSpec dgp = DgpSpec::design("table1");
    RngStream rng = RngStream::from(1, {0});
    const double c = dgp.c_shift();
    double s = 0;
    const int n = 2000000;
    for (int i = 0; i < n; ++i) {
        const int k = rng.uniform() < dgp.weights[0] ? 0 : 1;
        s += std::exp(c + rng.normal(dgp.log_sigma2_means[k], std::sqrt(dgp.comp_var)));
    }
    CHECK(s / n == Catch::Approx(1.0).margin(0.01));
}

TEST_CASE("zero fractions across the three designs", "[mc][slow]") {
    struct Row {
        const char* name;
        double zeros, all_zeros;
    };
    const Row rows[] = {{"table1", 0.45, 0.15}, {"c60", 0.60, 0.23}, {"c75", 0.75, 0.34}};
    for (const auto& r : rows) {
        DgpSpec dgp = DgpSpec::design(r.name);
        dgp.N = 20000;
        const PanelData data = simulate_dgp_panel(dgp, 1, 42);
        CHECK(fraction_of_zeros(data) == Catch::Approx(r.zeros).margin(0.03));
        CHECK(fraction_all_zero_units(data) == Catch::Approx(r.all_zeros).margin(0.03));
    }
}

TEST_CASE("single-replication smoke run end to end", "[mc][slow]") {
    DgpSpec dgp = DgpSpec::design("table1");
    dgp.N = 80;
    dgp.T = 8;
    dgp.n_reps = 1;
    SamplerSettings st;
    st.n_draws = 150;
    st.burn_in = 80;
    const ExperimentResult res =
        run_experiment(dgp, {"flexible-heterosk", "pooled-linear"}, st, 0.10);
    REQUIRE(res.failures == 0);
    REQUIRE(res.table.size() == 2);
    for (const auto& row : res.table) {
        CHECK(row.n_reps == 1);
        CHECK(std::isfinite(row.lps));
        CHECK(std::isfinite(row.crps));
        CHECK(row.len_avg >= 0);
        CHECK(row.cov_avg >= 0);
        CHECK(row.cov_avg <= 1);
    }
    // the correctly specified model should not lose to the linear benchmark
    CHECK(res.table[0].lps > res.table[1].lps);
}

TEST_CASE("flexible mixtures track the true heterogeneity density more closely",
          "[mc][slow]") {
    // L1 distance between the posterior-mean intercept density and the truth,
    // flexible versus single-Normal heterogeneity
    DgpSpec dgp = DgpSpec::design("table1");
    dgp.N = 400;
    dgp.T = 10;
    const PanelData data = simulate_dgp_panel(dgp, 1, 777);
    PriorTuning tuning;
    tuning.v_star = compute_v_star(data);
    SamplerSettings st;
    st.n_draws = 600;
    st.burn_in = 300;
    st.seed = 778;

    auto posterior_l1 = [&](const std::string& name) {
        const ModelSpec spec = mc_model_spec(name, 20);
        const PosteriorDraws draws = run_chain(data, spec, default_priors(spec, tuning), st);
        const int G = 600;
        const double lo = -5.0, hi = 7.0, step = (hi - lo) / (G - 1);
        double l1 = 0;
        for (int g = 0; g < G; ++g) {
            const double lam = lo + g * step;
            double est = 0;
            for (const auto& xi : draws.xi) {
                for (int k = 0; k < xi.pi_lambda.size(); ++k)
                    est += xi.pi_lambda[k] *
                           normal_pdf(lam, xi.phi_lambda[k], std::sqrt(xi.Sigma_lambda[k]));
            }
            est /= static_cast<double>(draws.n_draws());
            const double truth =
                dgp.weights[0] * normal_pdf(lam, dgp.lambda_means[0], std::sqrt(dgp.comp_var)) +
                dgp.weights[1] * normal_pdf(lam, dgp.lambda_means[1], std::sqrt(dgp.comp_var));
            l1 += std::fabs(est - truth) * step;
        }
        return l1;
    };
    const double l1_flex = posterior_l1("flexible-heterosk");
    const double l1_norm = posterior_l1("normal-heterosk");
    CHECK(l1_flex < l1_norm);
}

TEST_CASE("replication metrics are deterministic and parallel-safe", "[mc][slow]") {
    DgpSpec dgp = DgpSpec::design("table1");
    dgp.N = 50;
    dgp.T = 6;
    dgp.n_reps = 3;
    SamplerSettings st;
    st.n_draws = 80;
    st.burn_in = 40;
    const ExperimentResult serial = run_experiment(dgp, {"normal-heterosk"}, st, 0.10, 1);
    const ExperimentResult par = run_experiment(dgp, {"normal-heterosk"}, st, 0.10, 3);
    REQUIRE(serial.reps.size() == par.reps.size());
    for (std::size_t i = 0; i < serial.reps.size(); ++i) {
        CHECK(serial.reps[i].lps == par.reps[i].lps);
        CHECK(serial.reps[i].rho_mean == par.reps[i].rho_mean);
        CHECK(serial.reps[i].len_avg == par.reps[i].len_avg);
    }
}
