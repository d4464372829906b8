#pragma once

#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "resopt/extremal.hpp"
#include "resopt/hjb.hpp"
#include "resopt/medium.hpp"
#include "resopt/pareto.hpp"
#include "resopt/shooting.hpp"

// Serialization: profile JSON (exact 17-digit round trip), the Table-style
// layer CSV in micrometers, frontier and decay CSV curves, value-field dumps.

namespace resopt {

inline std::string fmt_g(double x, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, x);
    return buf;
}

inline nlohmann::json profile_to_json(const PermittivityProfile& p) {
    nlohmann::json j;
    j["eps_inf"] = p.eps_inf;
    j["s_minus_m"] = p.s_minus;
    j["layers"] = nlohmann::json::array();
    for (const auto& l : p.layers) j["layers"].push_back({{"width_m", l.width}, {"eps", l.eps}});
    return j;
}

inline std::string write_profile_json(const PermittivityProfile& p) {
    return profile_to_json(p).dump(2);
}

inline PermittivityProfile profile_from_json(const nlohmann::json& j) {
    PermittivityProfile p;
    try {
        p.eps_inf = j.at("eps_inf").get<double>();
        p.s_minus = j.at("s_minus_m").get<double>();
        for (const auto& l : j.at("layers")) {
            Layer layer{l.at("width_m").get<double>(), l.at("eps").get<double>()};
            if (!(layer.width > 0.0) || !(layer.eps > 0.0))
                throw std::invalid_argument("profile layers need positive width and eps");
            p.layers.push_back(layer);
        }
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("malformed profile JSON: ") + e.what());
    }
    return p;
}

inline PermittivityProfile read_profile_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
    if (j.is_discarded()) throw std::invalid_argument("malformed profile JSON: parse error");
    return profile_from_json(j);
}

// Layer table in the two-column-block style of the reference tables:
// one row per layer (index 0 is the central layer) plus the closing edge.
inline std::string layer_table_csv(const OptimalResonator& opt) {
    std::string out = "n,eps,b_n_um,W_n_um\n";
    const int k = (static_cast<int>(opt.layer_table.size()) - 1) / 2;
    for (std::size_t i = 0; i < opt.layer_table.size(); ++i) {
        const auto& row = opt.layer_table[i];
        out += std::to_string(static_cast<int>(i) - k) + ',';
        out += fmt_g(row.eps, 10) + ',';
        out += fmt_g(row.left_edge * 1e6, 10) + ',';
        out += fmt_g(row.width * 1e6, 10) + '\n';
    }
    const auto& last = opt.layer_table.back();
    out += std::to_string(static_cast<int>(opt.layer_table.size()) - k) + ",,";
    out += fmt_g((last.left_edge + last.width) * 1e6, 10) + ",\n";
    return out;
}

inline nlohmann::json resonator_to_json(const OptimalResonator& opt) {
    nlohmann::json j;
    j["xi_star"] = opt.xi_star;
    j["parity"] = parity_name(opt.parity);
    j["total_length_m"] = opt.total_length;
    j["lambda0"] = opt.lambda0;
    j["kappa_re_per_m"] = opt.kappa.real();
    j["kappa_im_per_m"] = opt.kappa.imag();
    j["multiplicity"] = opt.multiplicity;
    j["structure"] = opt.structure;
    j["structure_family"] = opt.structure_family;
    j["layers"] = nlohmann::json::array();
    for (const auto& row : opt.layer_table)
        j["layers"].push_back({{"b_m", row.left_edge}, {"width_m", row.width}, {"eps", row.eps}});
    j["profile"] = profile_to_json(opt.profile);
    return j;
}

inline nlohmann::json record_to_json(const ExtremalRecord& rec, const std::string& structure,
                                     const std::string& family) {
    nlohmann::json j;
    j["switch_points_m"] = rec.switch_points;
    j["lambda0"] = rec.lambda0;
    j["lambda0_spread"] = rec.lambda0_spread;
    j["kind"] = rec.kind == ExtremalKind::Abnormal ? "abnormal" : "normal";
    j["near_threshold"] = rec.near_threshold;
    j["turning_point_m"] = rec.turning_found ? rec.turning.p0
                                             : std::numeric_limits<double>::quiet_NaN();
    j["structure"] = structure;
    j["structure_family"] = family;
    j["stationary_intervals"] = nlohmann::json::array();
    for (const auto& iv : rec.stationary_intervals)
        j["stationary_intervals"].push_back({{"begin_m", iv.begin}, {"end_m", iv.end}, {"eps", iv.eps}});
    return j;
}

inline std::string frontier_csv(const ParetoFrontier& f) {
    std::string out = "gamma_rad,rho_min_per_m,re_kappa,im_kappa,parity,n_layers\n";
    for (const auto& s : f.samples) {
        out += fmt_g(s.gamma, 12) + ',';
        out += fmt_g(s.rho_min, 12) + ',';
        out += fmt_g(s.rho_min * std::cos(s.gamma), 12) + ',';
        out += fmt_g(s.rho_min * std::sin(s.gamma), 12) + ',';
        out += parity_name(s.parity);
        out += ',';
        out += std::to_string(s.optimizer.layer_table.size());
        out += '\n';
    }
    return out;
}

struct DecayRow {
    double alpha = 0.0;
    double beta = 0.0;
    double gamma_star = 0.0;
    double c_star = 0.0;
};

inline std::string decay_csv(const std::vector<DecayRow>& rows) {
    std::string out = "alpha_per_m,beta_min_per_m,gamma_star,c_star\n";
    for (const auto& r : rows) {
        out += fmt_g(r.alpha, 12) + ',';
        out += fmt_g(r.beta, 12) + ',';
        out += fmt_g(r.gamma_star, 12) + ',';
        out += fmt_g(r.c_star, 12) + '\n';
    }
    return out;
}

inline std::string value_field_csv(const ValueField& f) {
    std::string out = "chart,re,im,value\n";
    for (int c = 0; c < 2; ++c) {
        for (int i = 0; i < f.grid.n; ++i) {
            for (int j = 0; j < f.grid.n; ++j) {
                const complex z = f.grid.node(i, j);
                out += std::to_string(c) + ',';
                out += fmt_g(z.real(), 12) + ',';
                out += fmt_g(z.imag(), 12) + ',';
                out += fmt_g(f.values[c][f.grid.idx(i, j)], 12) + '\n';
            }
        }
    }
    return out;
}

} // namespace resopt
