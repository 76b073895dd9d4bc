#pragma once

// Draw store: one columnar little-endian float64 binary (draws.bin) described
// by a JSON header (draws.json), plus CSV exports of common-parameter and
// per-unit summaries. Re-running with the same seed reproduces the files
// byte for byte.

#include <filesystem>

#include "paneltobit/config.hpp"
#include "paneltobit/csv.hpp"

namespace paneltobit {

namespace detail {

// fixed flat layout of one xi record, determined by the spec
inline int xi_record_size(const ModelSpec& spec) {
    const int K = spec.mixture_K();
    int sz = 2;  // alpha_lambda, alpha_sigma
    if (!spec.pooled()) {
        sz += K;  // pi_lambda
        if (spec.is_cre())
            sz += K * ((spec.n_x + 1) * 2 + 3);  // Phi + packed symmetric Sigma
        else
            sz += 2 * K;  // phi, Sigma
    }
    if (!spec.is_cre()) sz += 2;                      // phi_y, Sigma_y
    if (spec.heteroskedastic()) sz += 3 * K;          // psi, omega2, pi_sigma
    return sz;
}

inline void xi_flatten(const MixtureHyperparams& xi, const ModelSpec& spec, double* out) {
    const int K = spec.mixture_K();
    int p = 0;
    if (!spec.pooled()) {
        if (spec.is_cre()) {
            for (int k = 0; k < K; ++k) {
                for (int r = 0; r < spec.n_x + 1; ++r)
                    for (int c = 0; c < 2; ++c) out[p++] = xi.Phi[k](r, c);
                out[p++] = xi.Sigma[k](0, 0);
                out[p++] = xi.Sigma[k](0, 1);
                out[p++] = xi.Sigma[k](1, 1);
            }
        } else {
            for (int k = 0; k < K; ++k) out[p++] = xi.phi_lambda[k];
            for (int k = 0; k < K; ++k) out[p++] = xi.Sigma_lambda[k];
        }
        for (int k = 0; k < K; ++k) out[p++] = xi.pi_lambda[k];
    }
    if (!spec.is_cre()) {
        out[p++] = xi.phi_y;
        out[p++] = xi.Sigma_y;
    }
    if (spec.heteroskedastic()) {
        for (int k = 0; k < K; ++k) out[p++] = xi.psi[k];
        for (int k = 0; k < K; ++k) out[p++] = xi.omega2[k];
        for (int k = 0; k < K; ++k) out[p++] = xi.pi_sigma[k];
    }
}

inline MixtureHyperparams xi_unflatten(const double* in, const ModelSpec& spec) {
    const int K = spec.mixture_K();
    MixtureHyperparams xi;
    int p = 0;
    if (!spec.pooled()) {
        if (spec.is_cre()) {
            xi.Phi.resize(K);
            xi.Sigma.resize(K);
            for (int k = 0; k < K; ++k) {
                xi.Phi[k].resize(spec.n_x + 1, 2);
                for (int r = 0; r < spec.n_x + 1; ++r)
                    for (int c = 0; c < 2; ++c) xi.Phi[k](r, c) = in[p++];
                xi.Sigma[k](0, 0) = in[p++];
                xi.Sigma[k](0, 1) = in[p++];
                xi.Sigma[k](1, 1) = in[p++];
                xi.Sigma[k](1, 0) = xi.Sigma[k](0, 1);
            }
        } else {
            xi.phi_lambda.resize(K);
            xi.Sigma_lambda.resize(K);
            for (int k = 0; k < K; ++k) xi.phi_lambda[k] = in[p++];
            for (int k = 0; k < K; ++k) xi.Sigma_lambda[k] = in[p++];
        }
        xi.pi_lambda.resize(K);
        for (int k = 0; k < K; ++k) xi.pi_lambda[k] = in[p++];
    }
    if (!spec.is_cre()) {
        xi.phi_y = in[p++];
        xi.Sigma_y = in[p++];
    }
    if (spec.heteroskedastic()) {
        xi.psi.resize(K);
        xi.omega2.resize(K);
        xi.pi_sigma.resize(K);
        for (int k = 0; k < K; ++k) xi.psi[k] = in[p++];
        for (int k = 0; k < K; ++k) xi.omega2[k] = in[p++];
        for (int k = 0; k < K; ++k) xi.pi_sigma[k] = in[p++];
    }
    return xi;
}

inline void write_block(std::ofstream& bin, const double* data, std::size_t n) {
    bin.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * sizeof(double)));
}

}  // namespace detail

inline void save_draws(const std::string& dir, const PosteriorDraws& draws) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    const int M = draws.n_draws(), N = draws.n_units(), nx = draws.n_x();
    const int xi_sz = detail::xi_record_size(draws.spec);

    ordered_json header;
    header["format"] = "paneltobit-draws-v1";
    header["spec"] = spec_to_json(draws.spec);
    // execution environment (thread count) is not part of the result
    SamplerSettings persisted = draws.settings;
    persisted.threads = 0;
    persisted.parallel_units = false;
    header["sampler"] = settings_to_json(persisted);
    header["lag"] = draws.lag;
    header["T"] = draws.T;
    header["n_draws"] = M;
    header["n_units"] = N;
    header["n_x"] = nx;
    header["xi_record_size"] = xi_sz;
    header["unit_ids"] = draws.unit_ids;
    header["has_x_T"] = draws.has_x_T;
    header["x_mean"] = std::vector<double>(draws.x_mean.data(), draws.x_mean.data() + nx);
    header["x_sd"] = std::vector<double>(draws.x_sd.data(), draws.x_sd.data() + nx);

    ordered_json blocks = ordered_json::array();
    std::size_t offset = 0;
    auto add_block = [&](const std::string& name, std::size_t rows, std::size_t cols) {
        ordered_json b;
        b["name"] = name;
        b["rows"] = rows;
        b["cols"] = cols;
        b["offset"] = offset;
        offset += rows * cols * sizeof(double);
        blocks.push_back(b);
    };
    add_block("rho", M, 1);
    add_block("beta", M, nx);
    add_block("lambda", M, N);
    add_block("sigma2", M, N);
    add_block("ystar_T", M, N);
    add_block("xi", M, xi_sz);
    add_block("log_joint", M, 1);
    add_block("accept_rate", M, 1);
    add_block("x_T", draws.has_x_T ? N : 0, nx);
    add_block("x_minus1", nx > 0 ? N : 0, nx);
    header["blocks"] = blocks;
    save_json(dir + "/draws.json", header);

    std::ofstream bin(dir + "/draws.bin", std::ios::binary);
    require(bin.good(), "cannot open " + dir + "/draws.bin");
    detail::write_block(bin, draws.rho.data(), M);
    // Eigen is column-major; persist row-major draw blocks for locality
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> tmp;
    auto dump_rm = [&](const Eigen::MatrixXd& m) {
        if (m.size() == 0) return;
        tmp = m;
        detail::write_block(bin, tmp.data(), static_cast<std::size_t>(m.size()));
    };
    dump_rm(draws.beta);
    dump_rm(draws.lambda);
    dump_rm(draws.sigma2);
    dump_rm(draws.ystar_T);
    std::vector<double> rec(xi_sz);
    for (int j = 0; j < M; ++j) {
        detail::xi_flatten(draws.xi[j], draws.spec, rec.data());
        detail::write_block(bin, rec.data(), rec.size());
    }
    detail::write_block(bin, draws.log_joint.data(), M);
    detail::write_block(bin, draws.accept_rate.data(), M);
    if (draws.has_x_T) dump_rm(draws.x_T);
    if (nx > 0) dump_rm(draws.x_minus1);

    // CSV summaries: common parameters per draw, posterior means per unit
    {
        std::ofstream csv(dir + "/common_params.csv");
        csv << "draw,rho";
        for (int k = 0; k < nx; ++k) csv << ",beta" << (k + 1);
        csv << ",log_joint,accept_rate\n";
        for (int j = 0; j < M; ++j) {
            csv << j << "," << detail::format_double(draws.rho[j]);
            for (int k = 0; k < nx; ++k) csv << "," << detail::format_double(draws.beta(j, k));
            csv << "," << detail::format_double(draws.log_joint[j]) << ","
                << detail::format_double(draws.accept_rate[j]) << "\n";
        }
    }
    {
        std::ofstream csv(dir + "/unit_summary.csv");
        csv << "unit_id,lambda_mean,lambda_sd,sigma2_mean,sigma2_sd,ystar_T_mean\n";
        for (int i = 0; i < N; ++i) {
            std::vector<double> lam(M), s2(M);
            for (int j = 0; j < M; ++j) {
                lam[j] = draws.lambda(j, i);
                s2[j] = draws.sigma2(j, i);
            }
            const auto ml = sample_moments(lam);
            const auto ms = sample_moments(s2);
            csv << (draws.unit_ids.empty() ? std::to_string(i) : draws.unit_ids[i]) << ","
                << detail::format_double(ml.mean) << "," << detail::format_double(std::sqrt(ml.var))
                << "," << detail::format_double(ms.mean) << ","
                << detail::format_double(std::sqrt(ms.var)) << ","
                << detail::format_double(draws.ystar_T.col(i).mean()) << "\n";
        }
    }
}

inline PosteriorDraws load_draws(const std::string& dir) {
    std::ifstream hin(dir + "/draws.json");
    require(hin.good(), "cannot open " + dir + "/draws.json");
    ordered_json header;
    hin >> header;
    require(header.value("format", "") == "paneltobit-draws-v1",
            "unrecognized draw store format in " + dir);

    PosteriorDraws d;
    d.spec = spec_from_json(header.at("spec"));
    d.settings = settings_from_json(header.at("sampler"));
    d.lag = header.value("lag", 1);
    d.T = header.value("T", 1);
    const int M = header.at("n_draws").get<int>();
    const int N = header.at("n_units").get<int>();
    const int nx = header.at("n_x").get<int>();
    const int xi_sz = header.at("xi_record_size").get<int>();
    require(xi_sz == detail::xi_record_size(d.spec), "draw store xi layout mismatch");
    d.unit_ids = header.at("unit_ids").get<std::vector<std::string>>();
    d.has_x_T = header.value("has_x_T", false);
    const auto xm = header.at("x_mean").get<std::vector<double>>();
    const auto xs = header.at("x_sd").get<std::vector<double>>();
    d.x_mean = Eigen::Map<const Eigen::VectorXd>(xm.data(), xm.size());
    d.x_sd = Eigen::Map<const Eigen::VectorXd>(xs.data(), xs.size());

    std::ifstream bin(dir + "/draws.bin", std::ios::binary);
    require(bin.good(), "cannot open " + dir + "/draws.bin");
    auto read_vec = [&](Eigen::Index n) {
        Eigen::VectorXd v(n);
        bin.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
        require(bin.good(), "draw store truncated: " + dir);
        return v;
    };
    auto read_rm = [&](Eigen::Index rows, Eigen::Index cols) {
        Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> m(rows, cols);
        if (m.size() > 0) {
            bin.read(reinterpret_cast<char*>(m.data()),
                     static_cast<std::streamsize>(m.size() * sizeof(double)));
            require(bin.good(), "draw store truncated: " + dir);
        }
        return Eigen::MatrixXd(m);
    };
    d.rho = read_vec(M);
    d.beta = read_rm(M, nx);
    d.lambda = read_rm(M, N);
    d.sigma2 = read_rm(M, N);
    d.ystar_T = read_rm(M, N);
    d.xi.reserve(M);
    std::vector<double> rec(xi_sz);
    for (int j = 0; j < M; ++j) {
        bin.read(reinterpret_cast<char*>(rec.data()),
                 static_cast<std::streamsize>(rec.size() * sizeof(double)));
        require(bin.good(), "draw store truncated: " + dir);
        d.xi.push_back(detail::xi_unflatten(rec.data(), d.spec));
    }
    d.log_joint = read_vec(M);
    d.accept_rate = read_vec(M);
    if (d.has_x_T) d.x_T = read_rm(N, nx);
    if (nx > 0) d.x_minus1 = read_rm(N, nx);
    return d;
}

// Forecast output: one JSON record per unit plus a flat CSV companion.
inline void save_forecasts(const std::string& dir, const std::vector<SetForecast>& sets,
                           const std::vector<PredictiveDensity>& pds,
                           const std::vector<std::string>& unit_ids, const std::string& mode,
                           double alpha) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    std::ofstream jf(dir + "/forecasts_" + mode + ".jsonl");
    std::ofstream cf(dir + "/forecasts_" + mode + ".csv");
    cf << "unit_id,mode,alpha,includes_zero,is_empty,n_segments,length,pi0,point_forecast,"
          "segments\n";
    for (std::size_t i = 0; i < sets.size(); ++i) {
        const std::string id = unit_ids.empty() ? std::to_string(i) : unit_ids[i];
        ordered_json rec;
        rec["unit_id"] = id;
        rec["mode"] = mode;
        rec["alpha"] = alpha;
        rec["includes_zero"] = sets[i].includes_zero;
        rec["is_empty"] = sets[i].is_empty;
        ordered_json segs = ordered_json::array();
        for (const auto& s : sets[i].segments) segs.push_back({s.first, s.second});
        rec["segments"] = segs;
        rec["point_forecast"] = pds[i].point_forecast;
        rec["pi0"] = pds[i].pi0;
        jf << rec.dump() << "\n";

        cf << id << "," << mode << "," << detail::format_double(alpha) << ","
           << (sets[i].includes_zero ? 1 : 0) << "," << (sets[i].is_empty ? 1 : 0) << ","
           << sets[i].segments.size() << "," << detail::format_double(sets[i].length()) << ","
           << detail::format_double(pds[i].pi0) << ","
           << detail::format_double(pds[i].point_forecast) << ",";
        for (std::size_t k = 0; k < sets[i].segments.size(); ++k) {
            if (k) cf << "|";
            cf << detail::format_double(sets[i].segments[k].first) << ":"
               << detail::format_double(sets[i].segments[k].second);
        }
        cf << "\n";
    }
}

}  // namespace paneltobit
