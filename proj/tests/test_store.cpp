#include <catch2/catch_amalgamated.hpp>
#include <filesystem>
#include <fstream>

#include "paneltobit/montecarlo.hpp"
#include "paneltobit/store.hpp"

using namespace paneltobit;

namespace {

PosteriorDraws small_run(const std::string& name, std::uint64_t seed) {
    DgpSpec dgp = DgpSpec::design("table1");
    dgp.N = 30;
    dgp.T = 6;
    const PanelData data = simulate_dgp_panel(dgp, 1, seed);
    const ModelSpec spec = mc_model_spec(name, 4);
    PriorTuning tuning;
    tuning.v_star = compute_v_star(data);
    SamplerSettings st;
    st.n_draws = 25;
    st.burn_in = 10;
    st.seed = seed;
    return run_chain(data, spec, default_priors(spec, tuning), st);
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

TEST_CASE("draw store round trip is exact", "[store]") {
    for (const char* name : {"flexible-heterosk", "normal-homosk", "pooled-linear"}) {
        const PosteriorDraws d = small_run(name, 91);
        const std::string dir = std::string("/tmp/paneltobit_store_") + name;
        std::filesystem::remove_all(dir);
        save_draws(dir, d);
        const PosteriorDraws back = load_draws(dir);
        REQUIRE(back.rho == d.rho);
        REQUIRE(back.lambda == d.lambda);
        REQUIRE(back.sigma2 == d.sigma2);
        REQUIRE(back.ystar_T == d.ystar_T);
        REQUIRE(back.log_joint == d.log_joint);
        REQUIRE(back.unit_ids == d.unit_ids);
        REQUIRE(back.T == d.T);
        for (int j = 0; j < d.n_draws(); ++j) {
            if (!d.spec.pooled()) {
                REQUIRE(back.xi[j].pi_lambda == d.xi[j].pi_lambda);
                REQUIRE(back.xi[j].phi_lambda == d.xi[j].phi_lambda);
            }
            REQUIRE(back.xi[j].phi_y == d.xi[j].phi_y);
        }
    }
}

TEST_CASE("saving twice yields byte-identical files", "[store]") {
    const PosteriorDraws d = small_run("flexible-heterosk", 92);
    std::filesystem::remove_all("/tmp/paneltobit_store_a");
    std::filesystem::remove_all("/tmp/paneltobit_store_b");
    save_draws("/tmp/paneltobit_store_a", d);
    save_draws("/tmp/paneltobit_store_b", d);
    for (const char* f : {"/draws.json", "/draws.bin", "/common_params.csv", "/unit_summary.csv"}) {
        CHECK(slurp(std::string("/tmp/paneltobit_store_a") + f) ==
              slurp(std::string("/tmp/paneltobit_store_b") + f));
    }
}

TEST_CASE("run config json round trip", "[store]") {
    RunConfig cfg;
    cfg.model = mc_model_spec("flexible-heterosk", 17);
    cfg.model.n_x = 2;
    cfg.model.cre = CreType::cre;
    cfg.model.y0_fixed = false;
    cfg.tuning = PriorTuning::empirical();
    cfg.tuning.v_star = 3.25;
    cfg.sampler.n_draws = 123;
    cfg.sampler.seed = 777;
    cfg.sampler.parallel_units = true;
    cfg.sampler.threads = 3;
    cfg.t_estimation = 10;

    const ordered_json j = run_config_to_json(cfg);
    const RunConfig back = run_config_from_json(j);
    CHECK(to_string(back.model.heterogeneity) == "flexible");
    CHECK(to_string(back.model.cre) == "cre");
    CHECK(back.model.K == 17);
    CHECK(back.model.n_x == 2);
    CHECK(back.tuning.tau_phi == 20.0);
    CHECK(back.tuning.tau_sigma_y == 4.0);
    CHECK(back.tuning.v_star == 3.25);
    CHECK(back.sampler.n_draws == 123);
    CHECK(back.sampler.seed == 777);
    CHECK(back.sampler.threads == 3);
    CHECK(back.t_estimation == 10);
    // serialization is stable
    CHECK(run_config_to_json(back).dump() == j.dump());
}

TEST_CASE("tuning presets resolve by name", "[store]") {
    ordered_json j;
    j["preset"] = "montecarlo";
    const PriorTuning mc = tuning_from_json(j);
    CHECK(mc.tau_phi == 5.0);
    j["preset"] = "empirical";
    j["tau_v"] = 2.0;  // overrides apply on top of the preset
    const PriorTuning emp = tuning_from_json(j);
    CHECK(emp.tau_phi == 20.0);
    CHECK(emp.tau_v == 2.0);
    j["preset"] = "bogus";
    CHECK_THROWS_AS(tuning_from_json(j), Error);
}

TEST_CASE("forecast files carry the set structure", "[store]") {
    const PosteriorDraws d = small_run("flexible-heterosk", 93);
    const PredictiveComponents comp = predictive_components(d, 1);
    const auto pds = build_predictive_density(comp, 1234);
    std::vector<SetForecast> sets(pds.size());
    for (std::size_t i = 0; i < pds.size(); ++i) sets[i] = hpd_pointwise(pds[i], 0.10);
    const std::string dir = "/tmp/paneltobit_fcst";
    std::filesystem::remove_all(dir);
    save_forecasts(dir, sets, pds, d.unit_ids, "pointwise", 0.10);

    std::ifstream jl(dir + "/forecasts_pointwise.jsonl");
    REQUIRE(jl.good());
    std::string line;
    int lines = 0;
    while (std::getline(jl, line)) {
        const auto rec = ordered_json::parse(line);
        CHECK(rec.contains("unit_id"));
        CHECK(rec.contains("segments"));
        CHECK(rec.contains("pi0"));
        CHECK(rec.at("mode") == "pointwise");
        ++lines;
    }
    CHECK(lines == d.n_units());
}
