#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "resopt/medium.hpp"
#include "resopt/shooting.hpp"

// Pareto frontiers of minimal modulus: sweep the complex argument, solve the
// minimum-time problem at a unit-modulus reference wavenumber, and rescale
// to the reference half-length.  The minimal-decay frontier is derived from
// the star-shaped achievable set spanned by the modulus frontier.

namespace resopt {

struct FrontierSample {
    double gamma = 0.0;        // complex argument, in (-pi/2, 0)
    double rho_min = 0.0;      // minimal modulus at half-length ell, 1/m
    Parity parity = Parity::None;
    double t_min = 0.0;        // minimum time at the unit reference modulus, m
    OptimalResonator optimizer;    // rescaled to [-ell, ell]
};

struct ParetoFrontier {
    std::vector<FrontierSample> samples;   // sorted by gamma, increasing
    bool odd = true;                       // odd problem (eta- = inf) or even (eta- = 0)
    double ell = 0.0;                      // reference half-length, m
    ConstraintBox box;
};

inline FrontierSample rho_min_at(double gamma, bool odd, const ConstraintBox& box,
                                 double ell, int nu = 4000, const ShootOptions& opt = {}) {
    if (!(gamma > -pi / 2.0 && gamma < 0.0))
        throw std::invalid_argument("rho_min_at: gamma must lie in (-pi/2, 0)");
    if (!(ell > 0.0)) throw std::invalid_argument("rho_min_at: ell must be positive");
    const complex kref = std::exp(complex{0.0, gamma});
    OptimalResonator res = optimize_symmetric(kref, box, odd ? Parity::Odd : Parity::Even, nu, opt);

    FrontierSample s;
    s.gamma = gamma;
    s.parity = res.parity;
    s.t_min = 0.5 * res.total_length;
    s.rho_min = s.t_min / ell;             // |kref| = 1

    // Rescale the optimizer to [-ell, ell]; its resonance moves to
    // e^{i gamma} rho_min.
    const double tau = s.t_min / ell;
    s.optimizer = res;
    s.optimizer.profile = scale_profile(res.profile, tau);
    s.optimizer.total_length = res.total_length / tau;
    s.optimizer.kappa = kref * tau;
    for (auto& row : s.optimizer.layer_table) {
        row.left_edge /= tau;
        row.width /= tau;
    }
    return s;
}

inline ParetoFrontier sweep_frontier(bool odd, const ConstraintBox& box, double ell,
                                     const std::vector<double>& gamma_grid, int nu = 4000,
                                     const ShootOptions& opt = {}) {
    ParetoFrontier f;
    f.odd = odd;
    f.ell = ell;
    f.box = box;
    for (double g : gamma_grid) {
        try {
            f.samples.push_back(rho_min_at(g, odd, box, ell, nu, opt));
        } catch (const NoSymmetricOptimum&) {
            // Arguments whose turning point escapes the horizon have no
            // sample; the frontier diverges there.
        }
    }
    std::sort(f.samples.begin(), f.samples.end(),
              [](const FrontierSample& a, const FrontierSample& b) { return a.gamma < b.gamma; });
    return f;
}

struct BetaMinResult {
    double beta = std::numeric_limits<double>::infinity();
    double gamma_star = std::numeric_limits<double>::quiet_NaN();
    double c_star = std::numeric_limits<double>::quiet_NaN();
    bool finite = false;
};

// Minimal decay rate for the frequency alpha, from the star representation:
// alpha - i beta is achievable iff alpha >= rho_min(gamma) cos gamma for some
// gamma, with beta = -alpha tan gamma; the best gamma is the feasibility
// boundary closest to zero.  Optional bisection refinement re-runs the
// shooting between the boundary grid samples.
inline BetaMinResult beta_min_from_frontier(const ParetoFrontier& f, double alpha,
                                            int refine_steps = 0, int nu = 2000,
                                            const ShootOptions& opt = {}) {
    if (!(alpha > 0.0)) throw std::invalid_argument("beta_min_from_frontier: alpha must be positive");
    const double slack = 1.0 + 1e-12;
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < f.samples.size(); ++i) {
        const auto& s = f.samples[i];
        if (s.rho_min * std::cos(s.gamma) <= alpha * slack) best = i;   // rightmost feasible
    }
    if (!best) return {};

    double gamma_star = f.samples[*best].gamma;
    double rho_star = f.samples[*best].rho_min;
    if (refine_steps > 0 && *best + 1 < f.samples.size()) {
        double lo = gamma_star;                       // feasible
        double hi = f.samples[*best + 1].gamma;       // infeasible (or better)
        const auto& nxt = f.samples[*best + 1];
        if (nxt.rho_min * std::cos(nxt.gamma) > alpha * slack) {
            for (int it = 0; it < refine_steps; ++it) {
                const double mid = 0.5 * (lo + hi);
                try {
                    FrontierSample sm = rho_min_at(mid, f.odd, f.box, f.ell, nu, opt);
                    if (sm.rho_min * std::cos(sm.gamma) <= alpha * slack) {
                        lo = mid;
                        gamma_star = mid;
                        rho_star = sm.rho_min;
                    } else {
                        hi = mid;
                    }
                } catch (const NoSymmetricOptimum&) {
                    hi = mid;
                }
            }
        }
    }

    BetaMinResult out;
    out.beta = -alpha * std::tan(gamma_star);
    out.gamma_star = gamma_star;
    out.c_star = alpha / (rho_star * std::cos(gamma_star));
    out.finite = true;
    return out;
}

struct JumpReport {
    double left_limit = 0.0;
    double right_limit = 0.0;
    double rho0 = 0.0;       // frontier value at gamma0 (left-continuous branch)
    double rho1 = 0.0;       // inf over gamma in (gamma0, 0) of rho cos(gamma) / cos(gamma0)
    double gap = 0.0;        // right_limit - rho0
    bool significant = false;
};

// One-sided limits of rho_min at gamma0 via linear extrapolation through the
// five nearest samples on each side of the window.
inline JumpReport detect_jump(const ParetoFrontier& f, double gamma0, double window) {
    auto fit_extrapolate = [&](bool left) -> double {
        std::vector<std::pair<double, double>> pts;
        for (const auto& s : f.samples) {
            const double d = s.gamma - gamma0;
            if (left && d < -1e-15 && d > -window) pts.push_back({s.gamma, s.rho_min});
            if (!left && d > 1e-15 && d < window) pts.push_back({s.gamma, s.rho_min});
        }
        if (pts.size() < 2) throw std::runtime_error("detect_jump: insufficient samples in window");
        std::sort(pts.begin(), pts.end(), [&](auto& a, auto& b) {
            return std::fabs(a.first - gamma0) < std::fabs(b.first - gamma0);
        });
        if (pts.size() > 5) pts.resize(5);
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (auto& [x, y] : pts) { sx += x; sy += y; sxx += x * x; sxy += x * y; }
        const double n = static_cast<double>(pts.size());
        const double den = n * sxx - sx * sx;
        if (std::fabs(den) < 1e-30) return sy / n;
        const double slope = (n * sxy - sx * sy) / den;
        const double icept = (sy - slope * sx) / n;
        return icept + slope * gamma0;
    };

    JumpReport rep;
    rep.left_limit = fit_extrapolate(true);
    rep.right_limit = fit_extrapolate(false);
    rep.rho0 = rep.left_limit;
    for (const auto& s : f.samples)
        if (std::fabs(s.gamma - gamma0) <= 1e-12) rep.rho0 = std::min(rep.rho0, s.rho_min);
    rep.rho1 = std::numeric_limits<double>::infinity();
    for (const auto& s : f.samples)
        if (s.gamma > gamma0 + 1e-15)
            rep.rho1 = std::min(rep.rho1, s.rho_min * std::cos(s.gamma) / std::cos(gamma0));
    rep.gap = rep.right_limit - rep.rho0;
    rep.significant = rep.gap > 1e-3 * rep.rho0;
    return rep;
}

// Minimal-decay resonator on [0, s_plus] for a modulus rho on the jump ray:
// the minimum-time half-optimizer rescaled to kappa = rho e^{i gamma0},
// padded to s_plus with the outer permittivity, where the trajectory parks
// on the equilibrium eta+.
inline PermittivityProfile extend_min_decay_resonator(const OptimalResonator& opt, double rho,
                                                      double s_plus, const ConstraintBox& box) {
    const bool at_n1 = eps_equal(box.n_inf, box.n1, 1e-12);
    const bool at_n2 = eps_equal(box.n_inf, box.n2, 1e-12);
    if (!at_n1 && !at_n2)
        throw std::invalid_argument("extend_min_decay_resonator: eta+ must equal n1 or n2");
    const double rho0 = std::abs(opt.kappa);
    if (rho < rho0 * (1.0 - 1e-12))
        throw std::invalid_argument("extend_min_decay_resonator: rho below the frontier value");

    // Right half of the symmetric optimizer, rescaled from rho0 to rho.
    const double ell = 0.5 * opt.total_length;
    std::vector<Layer> half;
    double a = opt.profile.s_minus;
    for (const auto& l : opt.profile.layers) {
        const double b = a + l.width;
        if (b > 0.0) half.push_back({b - std::max(a, 0.0), l.eps});
        a = b;
    }
    const double tau = rho / rho0;
    PermittivityProfile out;
    out.eps_inf = box.eps_inf();
    out.s_minus = 0.0;
    double tmin = 0.0;
    for (auto& l : half) {
        l.width /= tau;
        tmin += l.width;
        out.layers.push_back(l);
    }
    (void)ell;
    if (tmin > s_plus * (1.0 + 1e-12))
        throw std::invalid_argument("extend_min_decay_resonator: rho too small for the span");
    if (s_plus - tmin > 0.0) out.layers.push_back({s_plus - tmin, box.eps_inf()});
    return out;
}

} // namespace resopt
