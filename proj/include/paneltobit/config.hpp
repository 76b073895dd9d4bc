#pragma once

// Run configuration: JSON round trip for the model spec, prior tuning, and
// sampler settings. The configuration used for a run is re-serialized into
// the output directory for provenance.

#include <fstream>

#include <json.hpp>

#include "paneltobit/gibbs.hpp"

namespace paneltobit {

using ordered_json = nlohmann::ordered_json;

inline std::string to_string(Heterogeneity h) {
    switch (h) {
        case Heterogeneity::flexible: return "flexible";
        case Heterogeneity::normal: return "normal";
        case Heterogeneity::pooled: return "pooled";
    }
    return "?";
}
inline std::string to_string(CreType c) { return c == CreType::cre ? "cre" : "re"; }
inline std::string to_string(VarianceType v) {
    return v == VarianceType::heteroskedastic ? "heteroskedastic" : "homoskedastic";
}
inline std::string to_string(CensoringType c) {
    return c == CensoringType::linear ? "linear" : "tobit";
}

inline Heterogeneity heterogeneity_from_string(const std::string& s) {
    if (s == "flexible") return Heterogeneity::flexible;
    if (s == "normal") return Heterogeneity::normal;
    if (s == "pooled") return Heterogeneity::pooled;
    throw Error("config: unknown heterogeneity '" + s + "'");
}
inline CreType cre_from_string(const std::string& s) {
    if (s == "cre") return CreType::cre;
    if (s == "re") return CreType::re;
    throw Error("config: unknown cre setting '" + s + "'");
}
inline VarianceType variance_from_string(const std::string& s) {
    if (s == "heteroskedastic") return VarianceType::heteroskedastic;
    if (s == "homoskedastic") return VarianceType::homoskedastic;
    throw Error("config: unknown variance setting '" + s + "'");
}
inline CensoringType censoring_from_string(const std::string& s) {
    if (s == "tobit") return CensoringType::tobit;
    if (s == "linear") return CensoringType::linear;
    throw Error("config: unknown censoring setting '" + s + "'");
}

inline ordered_json spec_to_json(const ModelSpec& s) {
    ordered_json j;
    j["heterogeneity"] = to_string(s.heterogeneity);
    j["cre"] = to_string(s.cre);
    j["variance"] = to_string(s.variance);
    j["censoring"] = to_string(s.censoring);
    j["K"] = s.K;
    j["n_x"] = s.n_x;
    j["y0_fixed"] = s.y0_fixed;
    j["y0_phi"] = s.y0_phi;
    j["y0_sigma2"] = s.y0_sigma2;
    return j;
}

inline ModelSpec spec_from_json(const ordered_json& j) {
    ModelSpec s;
    s.heterogeneity = heterogeneity_from_string(j.at("heterogeneity").get<std::string>());
    s.cre = cre_from_string(j.at("cre").get<std::string>());
    s.variance = variance_from_string(j.at("variance").get<std::string>());
    s.censoring = censoring_from_string(j.at("censoring").get<std::string>());
    s.K = j.at("K").get<int>();
    s.n_x = j.at("n_x").get<int>();
    s.y0_fixed = j.value("y0_fixed", false);
    s.y0_phi = j.value("y0_phi", 0.0);
    s.y0_sigma2 = j.value("y0_sigma2", 1.0);
    s.validate();
    return s;
}

inline ordered_json tuning_to_json(const PriorTuning& t) {
    ordered_json j;
    j["tau_theta"] = t.tau_theta;
    j["tau_phi"] = t.tau_phi;
    j["tau_sigma_lambda"] = t.tau_sigma_lambda;
    j["tau_sigma_y"] = t.tau_sigma_y;
    j["tau_v"] = t.tau_v;
    if (std::isfinite(t.v_star)) j["v_star"] = t.v_star;
    return j;
}

inline PriorTuning tuning_from_json(const ordered_json& j) {
    PriorTuning t;
    if (j.contains("preset")) {
        const std::string p = j.at("preset").get<std::string>();
        if (p == "montecarlo")
            t = PriorTuning::montecarlo();
        else if (p == "empirical")
            t = PriorTuning::empirical();
        else
            throw Error("config: unknown tuning preset '" + p + "'");
    }
    t.tau_theta = j.value("tau_theta", t.tau_theta);
    t.tau_phi = j.value("tau_phi", t.tau_phi);
    t.tau_sigma_lambda = j.value("tau_sigma_lambda", t.tau_sigma_lambda);
    t.tau_sigma_y = j.value("tau_sigma_y", t.tau_sigma_y);
    t.tau_v = j.value("tau_v", t.tau_v);
    if (j.contains("v_star")) t.v_star = j.at("v_star").get<double>();
    return t;
}

inline ordered_json settings_to_json(const SamplerSettings& s) {
    ordered_json j;
    j["draws"] = s.n_draws;
    j["burn_in"] = s.burn_in;
    j["thin"] = s.thin;
    j["seed"] = s.seed;
    j["rwmh_target_accept"] = s.rwmh_target_accept;
    j["parallel_units"] = s.parallel_units;
    j["threads"] = s.threads;
    j["mvn_scans"] = s.mvn_scans;
    return j;
}

inline SamplerSettings settings_from_json(const ordered_json& j) {
    SamplerSettings s;
    s.n_draws = j.value("draws", s.n_draws);
    s.burn_in = j.value("burn_in", s.burn_in);
    s.thin = j.value("thin", s.thin);
    s.seed = j.value("seed", s.seed);
    s.rwmh_target_accept = j.value("rwmh_target_accept", s.rwmh_target_accept);
    s.parallel_units = j.value("parallel_units", s.parallel_units);
    s.threads = j.value("threads", s.threads);
    s.mvn_scans = j.value("mvn_scans", s.mvn_scans);
    s.validate();
    return s;
}

struct RunConfig {
    ModelSpec model;
    PriorTuning tuning;
    SamplerSettings sampler;
    int t_estimation = -1;  // -1: use every period in the file
};

inline ordered_json run_config_to_json(const RunConfig& c) {
    ordered_json j;
    j["model"] = spec_to_json(c.model);
    j["tuning"] = tuning_to_json(c.tuning);
    j["sampler"] = settings_to_json(c.sampler);
    j["t_estimation"] = c.t_estimation;
    return j;
}

inline RunConfig run_config_from_json(const ordered_json& j) {
    RunConfig c;
    if (j.contains("model")) c.model = spec_from_json(j.at("model"));
    if (j.contains("tuning")) c.tuning = tuning_from_json(j.at("tuning"));
    if (j.contains("sampler")) c.sampler = settings_from_json(j.at("sampler"));
    c.t_estimation = j.value("t_estimation", -1);
    return c;
}

inline RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), "cannot open config file: " + path);
    ordered_json j;
    in >> j;
    return run_config_from_json(j);
}

inline void save_json(const std::string& path, const ordered_json& j) {
    std::ofstream out(path);
    require(out.good(), "cannot open output file: " + path);
    out << j.dump(2) << "\n";
}

}  // namespace paneltobit
