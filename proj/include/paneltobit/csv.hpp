#pragma once

// Long-format panel ingestion: header `unit_id,time,y,x1,...,xk`, one row per
// (unit, time). Times must cover -1..T (y needed for 0..T, x for -1..T-1);
// rows with time T+1..T+H populate the evaluation holdout. Parsing is strict:
// NaN or negative y is rejected with the offending row number.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "paneltobit/model.hpp"

namespace paneltobit {

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) {
        if (!field.empty() && field.back() == '\r') field.pop_back();
        out.push_back(field);
    }
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

inline bool field_missing(const std::string& s) {
    return s.empty() || s == "NA" || s == "na" || s == "NaN" || s == "nan";
}

inline double parse_double(const std::string& s, int row, const std::string& what) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        require(pos == s.size(), "row " + std::to_string(row) + ": malformed " + what);
        return v;
    } catch (const Error&) {
        throw;
    } catch (...) {
        throw Error("row " + std::to_string(row) + ": malformed " + what + " '" + s + "'");
    }
}

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace detail

// t_estimation < 0 means "no holdout": T is the maximum time in the file.
inline PanelData read_panel_csv(const std::string& path, int t_estimation = -1) {
    std::ifstream in(path);
    require(in.good(), "cannot open data file: " + path);

    std::string line;
    require(static_cast<bool>(std::getline(in, line)), "empty data file: " + path);
    const auto header = detail::split_csv_line(line);
    require(header.size() >= 3 && header[0] == "unit_id" && header[1] == "time" &&
                header[2] == "y",
            "data header must start with unit_id,time,y");
    const int n_x = static_cast<int>(header.size()) - 3;

    struct Cell {
        double y;
        bool has_y;
        Eigen::RowVectorXd x;
        bool has_x;
    };
    std::vector<std::string> unit_order;
    std::map<std::string, std::map<int, Cell>> cells;

    int row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        const auto f = detail::split_csv_line(line);
        require(static_cast<int>(f.size()) == 3 + n_x,
                "row " + std::to_string(row) + ": expected " + std::to_string(3 + n_x) +
                    " fields, got " + std::to_string(f.size()));
        const std::string& id = f[0];
        const int t = static_cast<int>(detail::parse_double(f[1], row, "time"));
        auto it = cells.find(id);
        if (it == cells.end()) {
            unit_order.push_back(id);
            it = cells.emplace(id, std::map<int, Cell>{}).first;
        }
        require(it->second.find(t) == it->second.end(),
                "row " + std::to_string(row) + ": duplicate (unit,time) entry");
        Cell c;
        c.has_y = !detail::field_missing(f[2]);
        c.y = 0.0;
        if (c.has_y) {
            c.y = detail::parse_double(f[2], row, "y");
            require(std::isfinite(c.y), "row " + std::to_string(row) + ": y is not finite");
            require(c.y >= 0.0, "row " + std::to_string(row) + ": negative y rejected");
        }
        c.has_x = n_x > 0;
        if (n_x > 0) {
            c.x.resize(n_x);
            for (int k = 0; k < n_x; ++k) {
                if (detail::field_missing(f[3 + k])) {
                    c.has_x = false;
                } else {
                    c.x[k] = detail::parse_double(f[3 + k], row, header[3 + k]);
                    require(std::isfinite(c.x[k]),
                            "row " + std::to_string(row) + ": regressor is not finite");
                }
            }
        }
        it->second.emplace(t, c);
    }
    require(!unit_order.empty(), "data file contains no observations");

    // rectangularity: all units share the same time grid
    const auto& ref_times = cells[unit_order.front()];
    int t_max = ref_times.rbegin()->first;
    for (const auto& id : unit_order)
        require(cells[id].size() == ref_times.size() && cells[id].rbegin()->first == t_max &&
                    cells[id].begin()->first == ref_times.begin()->first,
                "unbalanced panel: unit " + id + " has a different time grid");

    const int T = (t_estimation >= 0) ? t_estimation : t_max;
    require(T >= 1, "need at least periods t = 0 and t = 1 for estimation");
    require(t_max >= T, "estimation horizon exceeds times present in the file");
    const int H = t_max - T;
    const int n = static_cast<int>(unit_order.size());

    PanelData data;
    data.unit_ids = unit_order;
    data.y.resize(n, T + 1);
    data.holdout_y.resize(n, H);

    bool warn_xm1 = false;
    int x_rows = 0;
    if (n_x > 0) {
        // x row availability must be uniform across units for each time
        int x_last = -2;
        for (int t = -1; t <= t_max; ++t) {
            int have = 0;
            for (const auto& id : unit_order) {
                auto ct = cells[id].find(t);
                if (ct != cells[id].end() && ct->second.has_x) ++have;
            }
            if (t >= 0 && have == 0) break;
            if (t == -1 && have == 0) {
                warn_xm1 = true;  // duplicate t = 0 below
                x_last = -1;
                continue;
            }
            require(have == n, "regressors at time " + std::to_string(t) +
                                   " present for some units only");
            x_last = t;
        }
        require(x_last >= T - 1, "regressors must cover t = -1..T-1");
        x_rows = std::min(x_last, T) + 2;  // estimation block keeps t = -1..min(x_last, T)
        data.x.resize(static_cast<Eigen::Index>(n) * x_rows, n_x);
        if (x_last > T) {
            data.holdout_x.resize(static_cast<Eigen::Index>(n) * (x_last - T), n_x);
        }
    }
    data.x_rows = x_rows;

    for (int i = 0; i < n; ++i) {
        auto& per_unit = cells[unit_order[i]];
        for (int t = 0; t <= t_max; ++t) {
            auto ct = per_unit.find(t);
            require(ct != per_unit.end(),
                    "unit " + unit_order[i] + ": missing row for time " + std::to_string(t));
            require(ct->second.has_y,
                    "unit " + unit_order[i] + ": missing y at time " + std::to_string(t));
            if (t <= T)
                data.y(i, t) = ct->second.y;
            else
                data.holdout_y(i, t - T - 1) = ct->second.y;
        }
        if (n_x > 0) {
            for (int t = -1; t <= x_rows - 2; ++t) {
                Eigen::RowVectorXd xr;
                if (t == -1 && warn_xm1)
                    xr = per_unit.at(0).x;
                else
                    xr = per_unit.at(t).x;
                data.x.row(static_cast<Eigen::Index>(i) * x_rows + (t + 1)) = xr;
            }
            for (Eigen::Index h = 0; h < data.holdout_x.rows() / std::max(n, 1); ++h)
                data.holdout_x.row(static_cast<Eigen::Index>(i) * (data.holdout_x.rows() / n) + h) =
                    per_unit.at(T + 1 + static_cast<int>(h)).x;
        }
    }
    if (warn_xm1)
        std::cerr << "warning: no t=-1 regressor rows; duplicating the t=0 row\n";

    // standardize regressors to pooled mean 0 / variance 1 over t = -1..T-1
    if (n_x > 0) {
        data.x_mean.resize(n_x);
        data.x_sd.resize(n_x);
        std::vector<double> col;
        col.reserve(static_cast<std::size_t>(n) * (T + 1));
        for (int k = 0; k < n_x; ++k) {
            col.clear();
            for (int i = 0; i < n; ++i)
                for (int t = -1; t <= T - 1; ++t) col.push_back(data.x_at(i, t)[k]);
            const auto m = sample_moments(col);
            const double sd = std::sqrt(std::max(m.var, 0.0));
            require(sd > 0.0, "regressor " + header[3 + k] + " is constant; cannot standardize");
            data.x_mean[k] = m.mean;
            data.x_sd[k] = sd;
            data.x.col(k) = (data.x.col(k).array() - m.mean) / sd;
            if (data.holdout_x.size() > 0)
                data.holdout_x.col(k) = (data.holdout_x.col(k).array() - m.mean) / sd;
        }
    }

    data.validate();
    return data;
}

// Inverse of read_panel_csv: x is written back in original units.
inline void write_panel_csv(const std::string& path, const PanelData& data) {
    std::ofstream out(path);
    require(out.good(), "cannot open output file: " + path);
    out << "unit_id,time,y";
    for (int k = 0; k < data.n_x(); ++k) out << ",x" << (k + 1);
    out << "\n";
    const int n = data.n_units(), T = data.T(), H = data.horizon();
    auto x_orig = [&](int i, int t) {
        Eigen::RowVectorXd xr = data.x_at(i, t);
        for (int k = 0; k < data.n_x(); ++k) xr[k] = xr[k] * data.x_sd[k] + data.x_mean[k];
        return xr;
    };
    for (int i = 0; i < n; ++i) {
        const std::string id = data.unit_ids.empty() ? std::to_string(i) : data.unit_ids[i];
        for (int t = -1; t <= T + H; ++t) {
            out << id << "," << t << ",";
            if (t >= 0 && t <= T)
                out << detail::format_double(data.y(i, t));
            else if (t > T)
                out << detail::format_double(data.holdout_y(i, t - T - 1));
            if (data.n_x() > 0) {
                if (data.has_x(t)) {
                    const Eigen::RowVectorXd xr = x_orig(i, t);
                    for (int k = 0; k < data.n_x(); ++k)
                        out << "," << detail::format_double(xr[k]);
                } else {
                    for (int k = 0; k < data.n_x(); ++k) out << ",";
                }
            }
            out << "\n";
        }
    }
}

}  // namespace paneltobit
