#pragma once

// Censored panel container and the dynamic Tobit law of motion
//   y*_it = lambda_i + rho y*_it-1 + beta'x_it-1 + u_it,   y_it = max(y*_it, 0).

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "paneltobit/rng.hpp"

namespace paneltobit {

// Rectangular panel. y holds t = 0..T. The regressor block holds rows for
// t = -1..x_last_t (at least up to T-1 when regressors are present; row T, if
// supplied, is the known forecast-origin predictor). holdout_y keeps future
// outcomes t = T+1..T+H for evaluation only.
struct PanelData {
    Eigen::MatrixXd y;          // n_units x (T+1)
    Eigen::MatrixXd x;          // (n_units * x_rows) x n_x, unit-major, empty if n_x = 0
    int x_rows{0};              // rows per unit; row r is time t = r - 1
    Eigen::MatrixXd holdout_y;  // n_units x H (0 cols if none)
    Eigen::MatrixXd holdout_x;  // (n_units * H) x n_x, times T+1..T+H (optional, may be empty)
    std::vector<std::string> unit_ids;
    Eigen::VectorXd x_mean, x_sd;  // standardization applied to x (original units)

    int n_units() const { return static_cast<int>(y.rows()); }
    int T() const { return static_cast<int>(y.cols()) - 1; }
    int n_x() const { return static_cast<int>(x.cols()); }
    int horizon() const { return static_cast<int>(holdout_y.cols()); }

    int x_last_t() const { return x_rows - 2; }
    bool has_x(int t) const { return n_x() > 0 && t >= -1 && t <= x_last_t(); }

    Eigen::RowVectorXd x_at(int i, int t) const {
        if (n_x() == 0) return Eigen::RowVectorXd(0);
        require(has_x(t), "x_at: regressor row for t=" + std::to_string(t) + " not available");
        return x.row(static_cast<Eigen::Index>(i) * x_rows + (t + 1));
    }

    void validate() const {
        require(y.rows() > 0 && y.cols() >= 2, "PanelData: need at least one unit and T >= 1");
        require((y.array() >= 0.0).all(), "PanelData: censored outcomes must be >= 0");
        require(y.allFinite(), "PanelData: missing cells are not supported");
        if (n_x() > 0) {
            require(x_rows >= T() + 1, "PanelData: regressors must cover t = -1..T-1");
            require(x.rows() == static_cast<Eigen::Index>(n_units()) * x_rows,
                    "PanelData: regressor block has wrong row count");
            require(x.allFinite(), "PanelData: regressors must be finite");
        }
        if (!unit_ids.empty())
            require(static_cast<int>(unit_ids.size()) == n_units(),
                    "PanelData: unit_ids length mismatch");
        if (holdout_y.size() > 0)
            require(holdout_y.rows() == y.rows(), "PanelData: holdout row count mismatch");
    }
};

struct LatentPanel {
    Eigen::MatrixXd y_star;  // n_units x (T+1)

    // Latent/observed consistency: equality on positives, y* <= 0 at zeros.
    void validate_against(const PanelData& data) const {
        require(y_star.rows() == data.y.rows() && y_star.cols() == data.y.cols(),
                "LatentPanel: shape mismatch");
        for (Eigen::Index i = 0; i < y_star.rows(); ++i)
            for (Eigen::Index t = 0; t < y_star.cols(); ++t) {
                if (data.y(i, t) > 0.0)
                    require(y_star(i, t) == data.y(i, t), "LatentPanel: positive cell diverged");
                else
                    require(y_star(i, t) <= 0.0, "LatentPanel: zero cell has positive latent");
            }
    }
};

struct UnitParams {
    Eigen::VectorXd lambda;
    Eigen::VectorXd sigma2;

    void validate() const {
        require((sigma2.array() > 0.0).all(), "UnitParams: sigma2 must be positive");
    }
};

struct CommonParams {
    double rho{0.0};
    Eigen::VectorXd beta;
};

inline double censor(double y_star) { return y_star >= 0.0 ? y_star : 0.0; }

inline double conditional_mean(double lambda, double rho, const Eigen::VectorXd& beta,
                               double y_star_prev, const Eigen::RowVectorXd& x_prev) {
    require(beta.size() == x_prev.size(),
            "conditional_mean: beta and x_prev must have the same length");
    double m = lambda + rho * y_star_prev;
    if (beta.size() > 0) m += x_prev * beta;
    return m;
}

struct SimulatedPanel {
    LatentPanel latent;
    PanelData data;
};

// Forward simulation for t = 1..T from given initial latents. Per-unit
// counter-based substreams keep parallel and serial output identical.
inline SimulatedPanel simulate_panel(const UnitParams& unit, const CommonParams& common,
                                     const Eigen::VectorXd& y0_star, const Eigen::MatrixXd& x,
                                     int x_rows, int T, std::uint64_t seed) {
    const int n = static_cast<int>(y0_star.size());
    require(unit.lambda.size() == n && unit.sigma2.size() == n,
            "simulate_panel: unit parameter length mismatch");
    unit.validate();
    require(T >= 1, "simulate_panel: T must be >= 1");

    SimulatedPanel out;
    out.data.x = x;
    out.data.x_rows = x_rows;
    if (x.size() > 0)
        require(x_rows >= T + 1 && x.rows() == static_cast<Eigen::Index>(n) * x_rows,
                "simulate_panel: regressor block must cover t = -1..T-1 for every unit");

    out.latent.y_star.resize(n, T + 1);
    out.data.y.resize(n, T + 1);
    for (int i = 0; i < n; ++i) {
        RngStream rng = RngStream::from(seed, {0x5150u, static_cast<std::uint64_t>(i)});
        const double sd = std::sqrt(unit.sigma2[i]);
        double prev = y0_star[i];
        out.latent.y_star(i, 0) = prev;
        out.data.y(i, 0) = censor(prev);
        for (int t = 1; t <= T; ++t) {
            const Eigen::RowVectorXd xprev =
                (x.size() > 0) ? out.data.x_at(i, t - 1) : Eigen::RowVectorXd(0);
            const double mu = conditional_mean(unit.lambda[i], common.rho, common.beta, prev, xprev);
            prev = mu + sd * rng.normal();
            out.latent.y_star(i, t) = prev;
            out.data.y(i, t) = censor(prev);
        }
    }
    return out;
}

}  // namespace paneltobit
