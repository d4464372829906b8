#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "resopt/extremal.hpp"
#include "resopt/medium.hpp"
#include "resopt/riccati.hpp"
#include "resopt/structure.hpp"

// Minimum-time shooting for symmetric resonators: launch the extremal mode
// from the left outgoing condition over a grid of launch phases, locate the
// turning point of each shot, select the phases whose mode is odd or even
// about it, and assemble the minimal-length symmetric profile by mirroring.

namespace resopt {

enum class Parity { Odd, Even, None };

inline const char* parity_name(Parity p) {
    switch (p) {
        case Parity::Odd: return "odd";
        case Parity::Even: return "even";
        default: return "none";
    }
}

struct ShotSample {
    double xi = 0.0;
    double p = std::numeric_limits<double>::infinity();   // turning position
    double l = std::numeric_limits<double>::infinity();   // p - s_eff
    double d = std::numeric_limits<double>::quiet_NaN();  // Re(conj(y) y') at p
    double d_im_rel = 0.0;       // |Im(conj(y) y')| / (|y||y'|) at p
    Parity parity_hint = Parity::None;
};

struct ShootOptions {
    double horizon_half_waves = 20.0;   // in slow-material half-waves
    int sample_stride = 16;
    double parity_tol = 1e-8;
};

struct ShootOutcome {
    ShotSample sample;
    ExtremalRecord record;     // from the launch to the turning point
    ModeState at_p;            // mode state at the turning point (when finite)
    double s_eff = 0.0;        // start after trimming a parked outer-medium prefix
    complex gauge{1.0, 0.0};   // unit mode value at s_eff
};

// Mode state along an already-computed record (closed form within a layer).
inline ModeState propagate_extremal_probe(const ExtremalRecord& rec, const ModeState& launch, double s) {
    ModeState st = launch;
    st.s = rec.span_begin;
    double a = rec.span_begin;
    std::size_t i = 0;
    while (i < rec.switch_points.size() && rec.switch_points[i] < s) {
        layer_step(st.y, st.dy, rec.layer_eps[i], rec.kappa, rec.switch_points[i] - a);
        a = rec.switch_points[i];
        st.s = a;
        ++i;
    }
    layer_step(st.y, st.dy, rec.layer_eps[i], rec.kappa, s - a);
    st.s = s;
    return st;
}

namespace detail {

// Complex-argument layer evolution from an anchor state.
inline std::pair<complex, complex> layer_state_at(const ModeState& anchor, double eps,
                                                  complex kappa, complex s) {
    const complex kq = std::sqrt(eps) * kappa;
    const complex a = kq * (s - anchor.s);
    const complex c = std::cos(a), sn = std::sin(a);
    return {anchor.y * c + anchor.dy * (sn / kq), -kq * anchor.y * sn + anchor.dy * c};
}

// Root of y (odd) or y' (even) near the turning point, over complex s.  The
// imaginary part is the symmetry defect of the shot, crossing zero
// transversally in xi; the real part is the machine-sharp center position.
// The direct zero of the monotone G0 is cubic at a symmetric pass and
// resolves the center orders of magnitude worse.
inline std::optional<complex> parity_root(const ExtremalRecord& rec, Parity par, complex kappa) {
    if (!rec.turning_found || par == Parity::None) return std::nullopt;
    const ModeState anchor = rec.switch_states.empty() ? rec.mode_samples.front()
                                                       : rec.switch_states.back();
    const double eps = rec.layer_eps.back();
    const double hw = half_wave(eps, kappa);
    complex s{rec.turning.p0, 0.0};
    for (int it = 0; it < 60; ++it) {
        auto [y, dy] = layer_state_at(anchor, eps, kappa, s);
        complex step;
        if (par == Parity::Odd) {
            if (dy == complex{0.0, 0.0}) return std::nullopt;
            step = y / dy;
        } else {
            const complex ddy = -kappa * kappa * eps * y;   // y'' in the layer
            if (ddy == complex{0.0, 0.0}) return std::nullopt;
            step = dy / ddy;
        }
        s -= step;
        if (std::abs(s - complex{rec.turning.p0, 0.0}) > hw) return std::nullopt;
        if (std::abs(step) <= 1e-15 * std::max(1.0, std::abs(s))) return s;
    }
    return std::nullopt;
}

} // namespace detail

inline ShootOutcome theta_shoot_full(double xi, complex kappa, const ConstraintBox& box,
                                     const ShootOptions& opt = {}) {
    if (!in_c4(kappa)) throw std::invalid_argument("theta_shoot: kappa must lie in the open fourth quadrant");
    const complex g = std::exp(complex{0.0, xi});
    ModeState launch{0.0, g, complex{0.0, -1.0} * kappa * box.n_inf * g, kappa};
    const double horizon = opt.horizon_half_waves * half_wave(box.eps1(), kappa);

    PropagateOptions popt;
    popt.stop_at_turning = true;
    popt.sample_stride = opt.sample_stride;
    ShootOutcome out;
    out.record = propagate_extremal(launch, kappa, box, 0.0, horizon, popt);

    // A launch parked on the unstable outer equilibrium (-n_inf with the
    // matching control) is outer medium, not resonator: trim it.
    out.s_eff = 0.0;
    out.gauge = g;
    if (!out.record.stationary_intervals.empty()) {
        const auto& iv = out.record.stationary_intervals.front();
        if (iv.begin == 0.0 && eps_equal(iv.eps, box.eps_inf())) {
            out.s_eff = iv.end;
            ModeState at_eff = propagate_extremal_probe(out.record, launch, out.s_eff);
            out.gauge = at_eff.y / std::abs(at_eff.y);
        }
    }

    ShotSample& smp = out.sample;
    smp.xi = xi;
    if (!out.record.turning_found) return out;

    out.at_p = out.record.mode_samples.back();
    smp.p = out.record.turning.p0;

    // Parity classification at the sharp symmetry roots; the raw G0 zero is
    // too soft to resolve |y| against the 1e-8 tolerance.
    auto classify = [&](Parity par) -> std::optional<ModeState> {
        auto root = detail::parity_root(out.record, par, kappa);
        if (!root) return std::nullopt;
        const ModeState anchor = out.record.switch_states.empty()
                                     ? out.record.mode_samples.front()
                                     : out.record.switch_states.back();
        auto [y, dy] = detail::layer_state_at(anchor, out.record.layer_eps.back(), kappa,
                                              complex{root->real(), 0.0});
        ModeState st{root->real(), y, dy, kappa};
        const double ay = std::abs(y);
        const double ady = std::abs(dy) / std::abs(kappa);
        const bool fires = par == Parity::Odd ? (ay <= opt.parity_tol * ady)
                                              : (ady <= opt.parity_tol * ay);
        if (!fires) return std::nullopt;
        return st;
    };
    if (auto st = classify(Parity::Odd)) {
        smp.parity_hint = Parity::Odd;
        out.at_p = *st;
        smp.p = st->s;
    } else if (auto st = classify(Parity::Even)) {
        smp.parity_hint = Parity::Even;
        out.at_p = *st;
        smp.p = st->s;
    }

    smp.l = smp.p - out.s_eff;
    const complex prod = std::conj(out.at_p.y) * out.at_p.dy;
    smp.d = prod.real();
    const double mag = std::abs(out.at_p.y) * std::abs(out.at_p.dy);
    smp.d_im_rel = mag > 0.0 ? std::fabs(prod.imag()) / mag : 0.0;
    return out;
}

inline ShotSample theta_shoot(double xi, complex kappa, const ConstraintBox& box,
                              const ShootOptions& opt = {}) {
    return theta_shoot_full(xi, kappa, box, opt).sample;
}

struct ScanResult {
    std::vector<ShotSample> samples;   // the grid, sorted by xi
    std::vector<ShotSample> zeros;     // refined symmetric candidates
};

// Sweep the launch phase over a grid, bracket the sign changes of d and
// refine each to a symmetric candidate.  Plateau candidates (an interval of
// phases producing the same resonator, as happens at the explicit optimum)
// are collected straight from the grid.
inline ScanResult scan_xi(complex kappa, const ConstraintBox& box, int nu,
                          double xi_lo = 0.0, double xi_hi = pi,
                          const ShootOptions& opt = {}) {
    if (nu < 2) throw std::invalid_argument("scan_xi: need at least two grid intervals");
    ScanResult res;
    res.samples.reserve(static_cast<std::size_t>(nu) + 1);
    for (int n = 0; n <= nu; ++n) {
        const double xi = xi_lo + (xi_hi - xi_lo) * static_cast<double>(n) / nu;
        res.samples.push_back(theta_shoot(xi, kappa, box, opt));
    }

    auto refine_bracket = [&](double a, double b) -> std::optional<ShotSample> {
        const double a0 = a, b0 = b;
        auto d_of = [&](double xi) { return theta_shoot(xi, kappa, box, opt); };
        ShotSample sa = d_of(a);
        // Stage 1: bisection on the sign of d.  At an odd zero the turning
        // point underneath d is a cubic root of G0 and smears the zero by up
        // to ~1e-7 in xi, so this only seeds stage 2.
        for (int it = 0; it < 24; ++it) {
            const double mid = 0.5 * (a + b);
            ShotSample sm = d_of(mid);
            if (!std::isfinite(sm.p)) return std::nullopt;
            if ((sm.d <= 0.0) == (sa.d <= 0.0)) { a = mid; sa = sm; }
            else b = mid;
        }
        // Parity from the dominant vanishing component at the bracket center.
        double xi_best = 0.5 * (a + b);
        ShootOutcome mid_out = theta_shoot_full(xi_best, kappa, box, opt);
        if (!mid_out.record.turning_found) return std::nullopt;
        const double ay = std::abs(mid_out.at_p.y);
        const double ady = std::abs(mid_out.at_p.dy) / std::abs(kappa);
        const Parity par = (ay < ady) ? Parity::Odd : Parity::Even;

        // Stage 2: secant on the sharp symmetry defect Im s0(xi), which is
        // smooth and crosses zero transversally at the symmetric phase.
        auto defect = [&](double xi) -> std::optional<double> {
            ShootOutcome o = theta_shoot_full(xi, kappa, box, opt);
            auto root = detail::parity_root(o.record, par, kappa);
            if (!root) return std::nullopt;
            return root->imag();
        };
        double x0 = xi_best;
        double x1 = xi_best - 1e-4 * (b0 - a0);
        auto f0 = defect(x0), f1 = defect(x1);
        if (f0 && f1) {
            for (int it = 0; it < 60; ++it) {
                if (*f1 == *f0) break;
                double x2 = x1 - *f1 * (x1 - x0) / (*f1 - *f0);
                const double lo = a0 - (b0 - a0), hi = b0 + (b0 - a0);
                x2 = std::min(hi, std::max(lo, x2));
                if (std::fabs(x2 - x1) <= 1e-14) { x1 = x2; break; }
                auto f2 = defect(x2);
                if (!f2) break;
                x0 = x1; f0 = f1;
                x1 = x2; f1 = f2;
            }
            xi_best = x1;
        }
        ShotSample final = d_of(xi_best);
        if (final.parity_hint == Parity::None) return std::nullopt;   // asymmetric residue
        return final;
    };

    for (std::size_t i = 0; i + 1 < res.samples.size(); ++i) {
        const ShotSample& s0 = res.samples[i];
        const ShotSample& s1 = res.samples[i + 1];
        if (s0.parity_hint != Parity::None) res.zeros.push_back(s0);   // plateau candidate
        if (!std::isfinite(s0.p) || !std::isfinite(s1.p)) continue;
        if (s0.parity_hint != Parity::None || s1.parity_hint != Parity::None) continue;
        if ((s0.d <= 0.0) != (s1.d <= 0.0)) {
            if (auto z = refine_bracket(s0.xi, s1.xi)) res.zeros.push_back(*z);
        }
    }
    if (!res.samples.empty() && res.samples.back().parity_hint != Parity::None)
        res.zeros.push_back(res.samples.back());
    return res;
}

struct LayerRow {
    double left_edge = 0.0;   // b_n, meters, center-of-resonator coordinates
    double width = 0.0;
    double eps = 0.0;
};

struct OptimalResonator {
    double xi_star = 0.0;
    Parity parity = Parity::None;
    PermittivityProfile profile;          // symmetric about 0
    double total_length = 0.0;            // meters
    std::vector<LayerRow> layer_table;
    double lambda0 = 0.0;
    complex kappa{1.0, -1.0};
    int multiplicity = 1;
    ExtremalRecord record;                // full-span extremal record
    std::string structure;
    std::string structure_family;
};

struct NoSymmetricOptimum : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

inline std::optional<OptimalResonator> assemble_candidate(double xi, complex kappa,
                                                          const ConstraintBox& box,
                                                          const ShootOptions& opt) {
    ShootOutcome out = theta_shoot_full(xi, kappa, box, opt);
    if (!out.record.turning_found || out.sample.parity_hint == Parity::None) return std::nullopt;
    const Parity par = out.sample.parity_hint;

    auto root = parity_root(out.record, par, kappa);
    const double p_sharp = root ? root->real() : out.record.turning.p0;

    // Half profile from the effective start to the center.
    std::vector<Layer> half;
    double a = out.s_eff;
    std::size_t i0 = 0;
    while (i0 < out.record.switch_points.size() && out.record.switch_points[i0] <= out.s_eff)
        ++i0;
    for (std::size_t i = i0; i < out.record.switch_points.size(); ++i) {
        const double b = out.record.switch_points[i];
        if (b >= p_sharp) break;
        half.push_back({b - a, out.record.layer_eps[i]});
        a = b;
    }
    half.push_back({p_sharp - a, out.record.layer_eps.back()});
    if (half.back().width <= 0.0) return std::nullopt;

    const double l = p_sharp - out.s_eff;
    OptimalResonator cand;
    cand.xi_star = xi;
    cand.parity = par;
    cand.kappa = kappa;
    cand.total_length = 2.0 * l;
    cand.profile.eps_inf = box.eps_inf();
    cand.profile.s_minus = -l;
    for (std::size_t i = 0; i < half.size() - 1; ++i) cand.profile.layers.push_back(half[i]);
    cand.profile.layers.push_back({2.0 * half.back().width, half.back().eps});
    for (std::size_t i = half.size() - 1; i-- > 0;) cand.profile.layers.push_back(half[i]);

    double edge = -l;
    for (const auto& layer : cand.profile.layers) {
        cand.layer_table.push_back({edge, layer.width, layer.eps});
        edge += layer.width;
    }

    // Must actually carry the resonance.
    const complex r = boundary_residual(cand.profile, kappa, BoundaryPair::full(box.n_inf));
    if (std::abs(r) > 1e-9) return std::nullopt;

    // Full-span extremal record launched with the mode gauge at the edge.
    // A one-layer candidate exists for a whole interval of launch phases; the
    // phase that extends across the mirror is the abnormal gauge, fixed by
    // the central permittivity (y^2 real at the edges, rotating into the
    // half-plane that keeps the control consistent).
    complex gauge = out.gauge;
    if (half.size() == 1)
        gauge = eps_equal(half.back().eps, box.eps2()) ? complex{0.0, 1.0} : complex{1.0, 0.0};
    ModeState launch{-l, gauge, complex{0.0, -1.0} * kappa * box.n_inf * gauge, kappa};
    PropagateOptions popt;
    popt.sample_stride = 8;
    cand.record = propagate_extremal(launch, kappa, box, -l, l, popt);
    if (cand.record.switch_points.size() != cand.profile.layers.size() - 1) return std::nullopt;
    for (std::size_t i = 0; i + 1 < cand.profile.layers.size(); ++i) {
        const double expect = cand.layer_table[i + 1].left_edge;
        if (std::fabs(cand.record.switch_points[i] - expect) > 1e-8 * std::max(l, 1e-300))
            return std::nullopt;
    }

    if (cand.profile.layers.size() == 1) {
        // Whole resonator is one central layer: an abnormal gauge always
        // exists for it, so the extremal classification is abnormal.
        cand.lambda0 = 0.0;
        cand.record.lambda0 = 0.0;
        cand.record.kind = ExtremalKind::Abnormal;
    } else {
        cand.lambda0 = cand.record.lambda0;
    }

    StructureCode sc = encode_structure(cand.record, box);
    cand.structure = sc.text;
    cand.structure_family = sc.family;
    return cand;
}

inline bool same_layer_table(const OptimalResonator& a, const OptimalResonator& b, double rel = 1e-11) {
    if (a.layer_table.size() != b.layer_table.size()) return false;
    for (std::size_t i = 0; i < a.layer_table.size(); ++i) {
        const auto& x = a.layer_table[i];
        const auto& y = b.layer_table[i];
        if (!eps_equal(x.eps, y.eps)) return false;
        if (std::fabs(x.width - y.width) > rel * std::max(std::fabs(x.width), std::fabs(y.width)))
            return false;
    }
    return true;
}

} // namespace detail

// Minimal-length symmetric resonator generating the resonance kappa, among
// the requested parity class (Parity::None means best of both).
inline OptimalResonator optimize_symmetric(complex kappa, const ConstraintBox& box,
                                           Parity parity_request, int nu = 20000,
                                           const ShootOptions& opt = {}) {
    if (!in_c4(kappa)) throw std::invalid_argument("optimize_symmetric: kappa must lie in the open fourth quadrant");
    ScanResult scan = scan_xi(kappa, box, nu, 0.0, pi, opt);

    // Compact plateau runs: consecutive grid candidates with the same parity
    // and length are one flat-minimum family; keep the first of each run.
    std::vector<std::pair<ShotSample, int>> work;
    for (const auto& z : scan.zeros) {
        if (!work.empty()) {
            const ShotSample& prev = work.back().first;
            const bool both_plateau = prev.parity_hint == z.parity_hint &&
                                      std::isfinite(prev.l) && std::isfinite(z.l) &&
                                      std::fabs(prev.l - z.l) <= 1e-9 * std::fabs(z.l) &&
                                      std::fabs(prev.xi - z.xi) <= 4.0 * pi / nu * (work.back().second + 1);
            if (both_plateau) { work.back().second += 1; continue; }
        }
        work.emplace_back(z, 1);
    }

    std::vector<OptimalResonator> cands;
    for (const auto& [z, run] : work) {
        auto c = detail::assemble_candidate(z.xi, kappa, box, opt);
        if (!c) continue;
        c->multiplicity = run;
        if (parity_request != Parity::None && c->parity != parity_request) continue;
        bool merged = false;
        for (auto& existing : cands) {
            if (detail::same_layer_table(existing, *c)) {
                existing.multiplicity += run;
                merged = true;
                break;
            }
        }
        if (!merged) cands.push_back(std::move(*c));
    }
    if (cands.empty())
        throw NoSymmetricOptimum("optimize_symmetric: no symmetric candidate on the grid");

    std::size_t best = 0;
    for (std::size_t i = 1; i < cands.size(); ++i)
        if (cands[i].total_length < cands[best].total_length) best = i;
    // Merge co-minimal candidates (flat minima) into the multiplicity count.
    for (std::size_t i = 0; i < cands.size(); ++i) {
        if (i == best) continue;
        if (std::fabs(cands[i].total_length - cands[best].total_length) <=
            1e-9 * cands[best].total_length)
            cands[best].multiplicity += cands[i].multiplicity;
    }
    return cands[best];
}

// Closed-form first odd resonance of the single high-index layer on
// [-s_plus, s_plus] in an outer medium n_inf < n2.
inline complex explicit_kappa0(double n_inf, double n2, double s_plus) {
    if (!(0.0 < n_inf && n_inf < n2)) throw std::invalid_argument("explicit_kappa0: need 0 < n_inf < n2");
    if (!(s_plus > 0.0)) throw std::invalid_argument("explicit_kappa0: need s_plus > 0");
    const double lnr = std::log((n2 + n_inf) / (n2 - n_inf));
    return complex{pi / (2.0 * s_plus * n2), -lnr / (2.0 * s_plus * n2)};
}

} // namespace resopt
