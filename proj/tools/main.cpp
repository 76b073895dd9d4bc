// Command-line front end: estimate / forecast / evaluate / montecarlo / check.

#include <CLI11.hpp>
#include <filesystem>
#include <iostream>

#include "paneltobit/diagnostics.hpp"
#include "paneltobit/montecarlo.hpp"
#include "paneltobit/store.hpp"

namespace fs = std::filesystem;
using namespace paneltobit;

namespace {

std::string fmt(double v) { return detail::format_double(v); }

int cmd_estimate(const std::string& config_path, const std::string& data_path,
                 const std::string& out_dir, int threads_override) {
    RunConfig cfg = load_run_config(config_path);
    PanelData data = read_panel_csv(data_path, cfg.t_estimation);
    require(cfg.model.n_x == data.n_x(),
            "config n_x=" + std::to_string(cfg.model.n_x) + " but data has " +
                std::to_string(data.n_x()) + " regressors");
    if (!std::isfinite(cfg.tuning.v_star)) cfg.tuning.v_star = compute_v_star(data);

    // worker-thread choices are execution details, kept out of the persisted
    // configuration so reruns compare byte for byte
    SamplerSettings run_settings = cfg.sampler;
    if (threads_override >= 0) {
        run_settings.threads = threads_override;
        run_settings.parallel_units = threads_override != 1;
    }

    const PriorBundle priors = default_priors(cfg.model, cfg.tuning);
    const auto t0 = std::chrono::steady_clock::now();
    const PosteriorDraws draws = run_chain(data, cfg.model, priors, run_settings);
    const auto t1 = std::chrono::steady_clock::now();

    fs::create_directories(out_dir);
    save_json(out_dir + "/config.json", run_config_to_json(cfg));
    save_draws(out_dir, draws);
    std::cerr << "estimate: " << draws.n_draws() << " draws in "
              << std::chrono::duration<double>(t1 - t0).count() << " s, mean accept "
              << draws.accept_rate.mean() << "\n";
    return 0;
}

std::vector<Eigen::MatrixXd> load_x_future(const std::string& path, int n_units, int n_x, int T,
                                           int h) {
    // CSV unit_id,time,x1..xk covering times T+1..T+h-1 (time T comes from
    // the draw store; rows for it are accepted and override).
    std::vector<Eigen::MatrixXd> out(h);
    if (path.empty()) return out;
    std::ifstream in(path);
    require(in.good(), "cannot open x-future file: " + path);
    std::string line;
    require(static_cast<bool>(std::getline(in, line)), "empty x-future file");
    auto header = detail::split_csv_line(line);
    require(static_cast<int>(header.size()) == 2 + n_x && header[0] == "unit_id" &&
                header[1] == "time",
            "x-future header must be unit_id,time,x1,...,xk");
    std::map<std::string, int> unit_index;
    int next = 0;
    int row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        auto f = detail::split_csv_line(line);
        require(static_cast<int>(f.size()) == 2 + n_x,
                "x-future row " + std::to_string(row) + ": wrong field count");
        auto it = unit_index.find(f[0]);
        if (it == unit_index.end()) it = unit_index.emplace(f[0], next++).first;
        require(it->second < n_units, "x-future has more units than the draw store");
        const int t = static_cast<int>(detail::parse_double(f[1], row, "time"));
        require(t >= T && t < T + h, "x-future row " + std::to_string(row) +
                                         ": time outside T..T+h-1");
        auto& m = out[t - T];
        if (m.size() == 0) m = Eigen::MatrixXd::Constant(n_units, n_x,
                                                         std::numeric_limits<double>::quiet_NaN());
        for (int k = 0; k < n_x; ++k)
            m(it->second, k) = detail::parse_double(f[2 + k], row, header[2 + k]);
    }
    for (int s = 1; s < h; ++s)
        require(out[s].size() > 0 && out[s].allFinite(),
                "x-future must cover every unit for times T+1..T+h-1");
    return out;
}

int cmd_forecast(const std::string& draws_dir, double alpha, const std::string& mode, int h,
                 const std::string& x_future_path, const std::string& out_dir) {
    const PosteriorDraws draws = load_draws(draws_dir);
    std::vector<Eigen::MatrixXd> xf;
    const std::vector<Eigen::MatrixXd>* xfp = nullptr;
    if (draws.n_x() > 0 && (h > 1 || !x_future_path.empty())) {
        xf = load_x_future(x_future_path, draws.n_units(), draws.n_x(), draws.T, h);
        xfp = &xf;
    }
    const PredictiveComponents comp = predictive_components(draws, h, xfp);
    const auto pds = build_predictive_density(comp, detail::fold(draws.settings.seed, 0xF0ECA57u));

    fs::create_directories(out_dir);
    if (mode == "pointwise" || mode == "both") {
        std::vector<SetForecast> sets(pds.size());
        for (std::size_t i = 0; i < pds.size(); ++i) sets[i] = hpd_pointwise(pds[i], alpha);
        save_forecasts(out_dir, sets, pds, draws.unit_ids, "pointwise", alpha);
    }
    if (mode == "average" || mode == "both") {
        const auto sets = hpd_average(pds, alpha);
        save_forecasts(out_dir, sets, pds, draws.unit_ids, "average", alpha);
    }
    return 0;
}

int cmd_evaluate(const std::vector<std::string>& draw_dirs, const std::string& data_path,
                 double alpha, int h, const std::string& out_dir) {
    fs::create_directories(out_dir);
    std::ofstream table(out_dir + "/scores.csv");
    table << "spec,mode,lps,crps,coverage,avg_length,frac_zero_only,frac_zero_b,frac_zero_ab,"
             "frac_empty,frac_multi,lps_floor_count\n";
    for (const auto& dir : draw_dirs) {
        const PosteriorDraws draws = load_draws(dir);
        const PanelData data = read_panel_csv(data_path, draws.T);
        require(data.n_units() == draws.n_units(), "draws and data disagree on the cross-section");
        require(data.horizon() >= h, "data file lacks holdout periods for h=" + std::to_string(h));

        const PredictiveComponents comp = predictive_components(draws, h);
        const auto pds =
            build_predictive_density(comp, detail::fold(draws.settings.seed, 0xF0ECA57u));
        const ScoreReport rep = score_panel(pds, data.holdout_y.col(h - 1), alpha);

        const std::string label = to_string(draws.spec.heterogeneity) + "-" +
                                  to_string(draws.spec.cre) + "-" +
                                  to_string(draws.spec.variance) + "-" +
                                  to_string(draws.spec.censoring);
        auto emit = [&](const std::string& mode, const SetEvaluation& ev) {
            table << label << "," << mode << "," << fmt(rep.lps) << "," << fmt(rep.crps) << ","
                  << fmt(ev.coverage_freq) << "," << fmt(ev.avg_length) << ","
                  << fmt(ev.frac_zero_only) << "," << fmt(ev.frac_zero_b) << ","
                  << fmt(ev.frac_zero_ab) << "," << fmt(ev.frac_empty) << ","
                  << fmt(ev.frac_multi) << "," << rep.lps_floor_count << "\n";
        };
        emit("average", rep.sets_average);
        emit("pointwise", rep.sets_pointwise);

        // PIT per unit
        std::ofstream pits(out_dir + "/pit_" + label + ".csv");
        pits << "unit_id,pit\n";
        for (int i = 0; i < data.n_units(); ++i)
            pits << data.unit_ids[i] << ","
                 << fmt(pit(full_predictive_sample(pds[i]), data.holdout_y(i, h - 1))) << "\n";
    }
    return 0;
}

int cmd_montecarlo(const std::string& design, int reps, int n, int t, int m, int burn,
                   double alpha, std::uint64_t seed, const std::string& specs_arg,
                   int threads, const std::string& out_dir) {
    DgpSpec dgp = DgpSpec::design(design);
    dgp.n_reps = reps;
    if (n > 0) dgp.N = n;
    if (t > 0) dgp.T = t;
    dgp.seed = seed;

    std::vector<std::string> specs;
    if (specs_arg == "all") {
        specs = mc_all_spec_names();
    } else {
        std::stringstream ss(specs_arg);
        std::string tok;
        while (std::getline(ss, tok, ',')) specs.push_back(tok);
    }
    SamplerSettings settings;
    settings.n_draws = m;
    settings.burn_in = burn;
    const int rep_threads = threads > 0 ? threads : 1;

    const auto t0 = std::chrono::steady_clock::now();
    const ExperimentResult res = run_experiment(dgp, specs, settings, alpha, rep_threads);
    const auto t1 = std::chrono::steady_clock::now();
    std::cerr << "montecarlo: " << reps << " replications in "
              << std::chrono::duration<double>(t1 - t0).count() << " s\n";
    for (const auto& note : res.failure_notes) std::cerr << "failed " << note << "\n";

    fs::create_directories(out_dir);
    {
        std::ofstream csv(out_dir + "/table.csv");
        csv << "spec,lps,crps,cov_avg,len_avg,cov_pw,len_pw,rho_bias,rho_sd,n_reps\n";
        for (const auto& a : res.table)
            csv << a.spec << "," << fmt(a.lps) << "," << fmt(a.crps) << "," << fmt(a.cov_avg)
                << "," << fmt(a.len_avg) << "," << fmt(a.cov_pw) << "," << fmt(a.len_pw) << ","
                << fmt(a.rho_bias) << "," << fmt(a.rho_sd) << "," << a.n_reps << "\n";
    }
    {
        std::ofstream csv(out_dir + "/replications.csv");
        csv << "rep,spec,lps,crps,cov_avg,len_avg,cov_pw,len_pw,rho_mean,frac_zeros,"
               "frac_all_zeros,lps_floor_count\n";
        for (const auto& r : res.reps)
            csv << r.rep << "," << r.spec << "," << fmt(r.lps) << "," << fmt(r.crps) << ","
                << fmt(r.cov_avg) << "," << fmt(r.len_avg) << "," << fmt(r.cov_pw) << ","
                << fmt(r.len_pw) << "," << fmt(r.rho_mean) << "," << fmt(r.frac_zeros) << ","
                << fmt(r.frac_all_zeros) << "," << r.lps_floor_count << "\n";
    }
    return 0;
}

int cmd_check(const std::string& draws_dir, const std::string& data_path,
              const std::string& stats, int hairlines, const std::string& iota_arg,
              double delta_x, const std::string& out_dir) {
    const PosteriorDraws draws = load_draws(draws_dir);
    const PanelData data = read_panel_csv(data_path, draws.T);
    require(data.n_units() == draws.n_units(), "draws and data disagree on the cross-section");
    fs::create_directories(out_dir);

    const auto reps = ppc_simulate(draws, data, hairlines,
                                   detail::fold(draws.settings.seed, 0xCC999u));
    std::vector<std::string> wanted;
    if (stats == "all")
        wanted = ppc_statistic_names();
    else {
        std::stringstream ss(stats);
        std::string tok;
        while (std::getline(ss, tok, ',')) wanted.push_back(tok);
    }
    for (const auto& name : wanted) {
        std::ofstream csv(out_dir + "/ppc_" + name + ".csv");
        csv << "series";
        const int n_cols = data.n_units();
        for (int i = 0; i < n_cols; ++i) csv << ",u" << i;
        csv << "\n";
        auto emit = [&](const std::string& label, const std::vector<double>& vals) {
            csv << label;
            for (double v : vals) csv << "," << (std::isnan(v) ? "" : fmt(v));
            csv << "\n";
        };
        emit("observed", ppc_statistic(name, data));
        for (std::size_t r = 0; r < reps.size(); ++r)
            emit("rep" + std::to_string(r), ppc_statistic(name, reps[r]));
    }

    {
        const ChainDiagnostics diag = chain_diagnostics(draws);
        std::ofstream csv(out_dir + "/chain_diagnostics.csv");
        csv << "lag,acf\n";
        for (int k = 0; k < diag.acf.size(); ++k) csv << k << "," << fmt(diag.acf[k]) << "\n";
        std::ofstream s(out_dir + "/chain_summary.csv");
        s << "ess_rho,mean_accept,n_draws\n";
        s << fmt(diag.ess) << "," << fmt(diag.mean_accept) << "," << draws.n_draws() << "\n";
    }

    if (!iota_arg.empty()) {
        std::stringstream ss(iota_arg);
        std::string tok;
        std::vector<double> vals;
        while (std::getline(ss, tok, ',')) vals.push_back(std::stod(tok));
        Eigen::VectorXd iota = Eigen::Map<Eigen::VectorXd>(vals.data(), vals.size());
        iota.normalize();
        const auto rows = treatment_effect_decomposition(
            draws, iota, delta_x, detail::fold(draws.settings.seed, 0x7E47u));
        std::ofstream csv(out_dir + "/treatment_effects.csv");
        csv << "unit_id,term1_mean,term1_lo,term1_hi,term2_mean,term2_lo,term2_hi\n";
        for (const auto& r : rows)
            csv << r.unit_id << "," << fmt(r.term1_mean) << "," << fmt(r.term1_lo) << ","
                << fmt(r.term1_hi) << "," << fmt(r.term2_mean) << "," << fmt(r.term2_lo) << ","
                << fmt(r.term2_hi) << "\n";
    }
    return 0;
}

// Per-draw characteristics of the implied heterogeneity distribution: moments,
// correlation, and mode counts, evaluated at a probe regressor value on the
// 50% coverage contour of the standardized regressor distribution.
int cmd_priorsummary(const std::string& config_path, const std::string& data_path, int n_draws,
                     std::uint64_t seed, const std::string& out_dir) {
    RunConfig cfg = load_run_config(config_path);
    const PanelData data = read_panel_csv(data_path, cfg.t_estimation);
    if (!std::isfinite(cfg.tuning.v_star)) cfg.tuning.v_star = compute_v_star(data);
    const PriorBundle priors = default_priors(cfg.model, cfg.tuning);

    Eigen::RowVectorXd probe(data.n_x());
    if (data.n_x() > 0) {
        // correlation of the standardized regressors over the estimation window
        const int n = data.n_units(), T = data.T(), nx = data.n_x();
        Eigen::MatrixXd R = Eigen::MatrixXd::Zero(nx, nx);
        int cnt = 0;
        for (int i = 0; i < n; ++i)
            for (int t = -1; t <= T - 1; ++t) {
                const Eigen::RowVectorXd xr = data.x_at(i, t);
                R += xr.transpose() * xr;
                ++cnt;
            }
        R /= cnt;
        // median of a chi-squared(nx) via simulation (fixed stream)
        RngStream qr = RngStream::from(0xC21u, {static_cast<std::uint64_t>(nx)});
        std::vector<double> qs(200001);
        for (auto& q : qs) q = qr.chi_squared(nx);
        const double chi2_med = median_of(qs);
        const Eigen::VectorXd ones = Eigen::VectorXd::Ones(nx);
        const double quad = ones.transpose() * R.ldlt().solve(ones);
        probe = (std::sqrt(chi2_med / quad) * ones).transpose();
    }

    std::vector<MixtureHyperparams> draws;
    draws.reserve(n_draws);
    for (int r = 0; r < n_draws; ++r) {
        RngStream rng = RngStream::from(seed, {0x9817u, static_cast<std::uint64_t>(r)});
        draws.push_back(draw_prior_xi(priors, rng));
    }
    const auto rows = prior_summary(draws, cfg.model, probe);

    fs::create_directories(out_dir);
    {
        ordered_json meta;
        meta["probe"] = std::vector<double>(probe.data(), probe.data() + probe.size());
        meta["n_draws"] = n_draws;
        meta["seed"] = seed;
        save_json(out_dir + "/prior_summary_meta.json", meta);
    }
    std::ofstream csv(out_dir + "/prior_summary.csv");
    csv << "draw,lambda_mean,lambda_sd,lambda_skew,lambda_kurt,y0_mean,y0_sd,y0_skew,"
           "y0_kurt,corr_lambda_y0,lambda_modes,y0_modes\n";
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto& x = rows[r];
        csv << r << "," << fmt(x.lambda_mean) << "," << fmt(x.lambda_sd) << ","
            << fmt(x.lambda_skew) << "," << fmt(x.lambda_kurt) << "," << fmt(x.y0_mean) << ","
            << fmt(x.y0_sd) << "," << fmt(x.y0_skew) << "," << fmt(x.y0_kurt) << ","
            << fmt(x.corr_lambda_y0) << "," << x.lambda_modes << "," << x.y0_modes << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Dynamic panel Tobit estimation and forecasting"};
    app.require_subcommand(1);

    // estimate
    std::string config_path, data_path, out_dir;
    int threads = -1;
    auto* est = app.add_subcommand("estimate", "Run the Gibbs sampler on a panel CSV");
    est->add_option("--config", config_path, "Run configuration (JSON)")->required();
    est->add_option("--data", data_path, "Panel CSV (unit_id,time,y,x1,...)")->required();
    est->add_option("--out", out_dir, "Output directory")->required();
    est->add_option("--threads", threads, "Worker threads (0 = hardware)");

    // forecast
    std::string draws_dir, mode = "both", x_future_path;
    double alpha = 0.10;
    int horizon = 1;
    auto* fc = app.add_subcommand("forecast", "Set and density forecasts from stored draws");
    fc->set_help_flag("--help", "Print help");  // frees --h for the horizon
    fc->add_option("--draws", draws_dir, "Draw store directory")->required();
    fc->add_option("--alpha", alpha, "Miss probability (default 0.10)");
    fc->add_option("--mode", mode, "average|pointwise|both");
    fc->add_option("--h", horizon, "Forecast horizon");
    fc->add_option("--x-future", x_future_path, "Given regressor path CSV for T+1..T+h-1");
    fc->add_option("--out", out_dir, "Output directory")->required();

    // evaluate
    std::vector<std::string> draw_dirs;
    auto* ev = app.add_subcommand("evaluate", "Score stored draws against realized outcomes");
    ev->set_help_flag("--help", "Print help");
    ev->add_option("--draws", draw_dirs, "Draw store directories")->required()->expected(-1);
    ev->add_option("--data", data_path, "Panel CSV including holdout rows")->required();
    ev->add_option("--alpha", alpha, "Miss probability");
    ev->add_option("--h", horizon, "Forecast horizon");
    ev->add_option("--out", out_dir, "Output directory")->required();

    // montecarlo
    std::string design = "table1", specs_arg = "all";
    int reps = 20, mc_n = 0, mc_t = 0, mc_m = 2000, mc_burn = 1000;
    std::uint64_t seed = 20220526;
    auto* mc = app.add_subcommand("montecarlo", "Simulation experiment");
    mc->add_option("--design", design, "table1|c60|c75");
    mc->add_option("--reps", reps, "Replications");
    mc->add_option("--n", mc_n, "Cross-section size override");
    mc->add_option("--t", mc_t, "Time dimension override");
    mc->add_option("--draws-per-chain", mc_m, "Retained draws per chain");
    mc->add_option("--burn", mc_burn, "Burn-in sweeps");
    mc->add_option("--alpha", alpha, "Miss probability");
    mc->add_option("--seed", seed, "Master seed");
    mc->add_option("--specs", specs_arg, "all or comma-separated spec names");
    mc->add_option("--threads", threads, "Replication-level threads");
    mc->add_option("--out", out_dir, "Output directory")->required();

    // priorsummary
    int prior_draws = 1000;
    auto* ps = app.add_subcommand("priorsummary", "Implied-prior diagnostics for tuning");
    ps->add_option("--config", config_path, "Run configuration (JSON)")->required();
    ps->add_option("--data", data_path, "Panel CSV (for V* and the probe point)")->required();
    ps->add_option("--draws", prior_draws, "Number of prior draws");
    ps->add_option("--seed", seed, "Seed for the prior draws");
    ps->add_option("--out", out_dir, "Output directory")->required();

    // check
    std::string stats = "all", iota_arg;
    int hairlines = 100;
    double delta_x = 1.0;
    auto* ck = app.add_subcommand("check", "Posterior predictive checks and chain diagnostics");
    ck->add_option("--draws", draws_dir, "Draw store directory")->required();
    ck->add_option("--data", data_path, "Panel CSV")->required();
    ck->add_option("--stats", stats, "all or comma-separated statistic names");
    ck->add_option("--hairlines", hairlines, "Replicated panels");
    ck->add_option("--iota", iota_arg, "Treatment direction (comma-separated, original units)");
    ck->add_option("--delta-x", delta_x, "Treatment magnitude (original units)");
    ck->add_option("--out", out_dir, "Output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (est->parsed()) return cmd_estimate(config_path, data_path, out_dir, threads);
        if (fc->parsed()) return cmd_forecast(draws_dir, alpha, mode, horizon, x_future_path, out_dir);
        if (ev->parsed()) return cmd_evaluate(draw_dirs, data_path, alpha, horizon, out_dir);
        if (mc->parsed())
            return cmd_montecarlo(design, reps, mc_n, mc_t, mc_m, mc_burn, alpha, seed, specs_arg,
                                  threads, out_dir);
        if (ps->parsed()) return cmd_priorsummary(config_path, data_path, prior_draws, seed, out_dir);
        if (ck->parsed())
            return cmd_check(draws_dir, data_path, stats, hairlines, iota_arg, delta_x, out_dir);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
