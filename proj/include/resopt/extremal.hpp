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

#include "resopt/medium.hpp"
#include "resopt/riccati.hpp"
#include "resopt/sphere.hpp"

// Bang-bang dynamics of the extremal equation -y'' = kappa^2 y E(y), where
// E(y) switches between the two admissible permittivities with the sign of
// Im y^2.  Switch-point iteration, transversality bookkeeping, the
// quarter-wave period maps of abnormal trajectories and the PMP report.

namespace resopt {

enum class ExtremalKind { Abnormal, Normal };

struct StationaryInterval {
    double begin = 0.0;
    double end = 0.0;
    double eps = 0.0;
};

struct ExtremalRecord {
    double span_begin = 0.0;
    double span_end = 0.0;
    complex kappa{1.0, -1.0};

    std::vector<double> switch_points;       // b_j, strictly increasing
    std::vector<ModeState> switch_states;    // mode at each b_j
    std::vector<double> layer_eps;           // one per interval (switch_points.size() + 1)
    TurningPoint turning;
    bool turning_found = false;

    double lambda0 = 0.0;                    // Im(eps y^2 + (y'/kappa)^2), launch gauge
    double lambda0_spread = 0.0;             // max deviation across samples
    double y_scale = 0.0;                    // max over samples of max(|y|, |y'|/|kappa|)
    ExtremalKind kind = ExtremalKind::Normal;
    bool near_threshold = false;             // |lambda0| within a decade of the threshold

    std::vector<ModeState> mode_samples;
    std::vector<StationaryInterval> stationary_intervals;

    double eps_at(double s) const {
        std::size_t i = 0;
        while (i < switch_points.size() && s >= switch_points[i]) ++i;
        return layer_eps.at(i);
    }

    bool in_stationary(double s) const {
        for (const auto& iv : stationary_intervals)
            if (s >= iv.begin && s <= iv.end) return true;
        return false;
    }
};

inline double lambda_sample(const ModeState& st, double eps) {
    const complex w = eps * st.y * st.y + (st.dy / st.kappa) * (st.dy / st.kappa);
    return w.imag();
}

inline double state_scale(const ModeState& st) {
    return std::max(std::abs(st.y), std::abs(st.dy) / std::abs(st.kappa));
}

inline double half_wave(double eps, complex kappa) {
    return pi / (std::sqrt(eps) * kappa.real());
}

namespace detail {

inline ModeState at_offset(const ModeState& anchor, double eps, double s) {
    ModeState st = anchor;
    layer_step(st.y, st.dy, eps, anchor.kappa, s - anchor.s);
    st.s = s;
    return st;
}

inline double im_y2(const ModeState& st) { return (st.y * st.y).imag(); }
inline double im_y2_deriv(const ModeState& st) { return (2.0 * st.y * st.dy).imag(); }

// Half-width of the window around the turning point inside which the sign
// of Im y^2 cannot be trusted pointwise: a symmetric pass has a quartic
// touch there, with a floating-point noise core of radius (eps_m/qhat)^(1/4)
// in phase.  The factor 30 puts the window ends at signal-to-noise 30^4.
inline double turning_guard(double eps, complex kappa) {
    const double qhat = -kappa.imag() / kappa.real();
    return 30.0 * std::pow(2.2e-16 / qhat, 0.25) / (std::sqrt(eps) * std::abs(kappa));
}

struct LayerScan {
    bool switched = false;       // ended at an admissible root of Im y^2
    bool hit_turning = false;    // stop_at_turning and the G0 zero was crossed
    ModeState end;               // state at the switch / turning / s_limit
};

// March through one interval of constant control, locating the first
// admissible root of Im y^2 and, along the way, the unique zero of the
// monotone G0.  Dense sampling at 64 points per half-wave keeps at most one
// sign change per subinterval.
inline LayerScan advance_layer(const ModeState& anchor, double eps, complex kappa,
                               double s_limit, TurningPoint& turning, bool& have_turning,
                               bool stop_at_turning,
                               std::vector<ModeState>* samples, int sample_stride) {
    const double h = half_wave(eps, kappa) / 64.0;
    const double guard = turning_guard(eps, kappa);
    const double dead = 1e-9 * half_wave(eps, kappa);

    auto bisect_root = [&](double lo, double hi, auto&& f) {
        // f < 0 at lo, f >= 0 at hi (or the mirrored orientation).
        double flo = f(at_offset(anchor, eps, lo));
        for (int it = 0; it < 110 && (hi - lo) > 4.0 * 2.3e-16 * std::max(1.0, std::fabs(hi)); ++it) {
            const double mid = 0.5 * (lo + hi);
            const double fm = f(at_offset(anchor, eps, mid));
            if ((fm <= 0.0) == (flo <= 0.0)) { lo = mid; flo = fm; }
            else hi = mid;
        }
        return 0.5 * (lo + hi);
    };

    auto polish_switch = [&](double root) {
        ModeState m = at_offset(anchor, eps, root);
        for (int it = 0; it < 2; ++it) {
            const double d = im_y2_deriv(m);
            if (d == 0.0) break;
            const double step = im_y2(m) / d;
            if (!std::isfinite(step) || std::fabs(step) > h) break;
            m = at_offset(anchor, eps, m.s - step);
        }
        return m.s;
    };

    // Inside the window around a turning point the pointwise sign of Im y^2
    // is unreliable (quartic touch with a floating-point noise core).  The
    // window is resolved as a whole by its endpoint signs: either exactly one
    // genuine crossing, or none.
    double win_lo = 0.0, win_hi = -1.0;     // empty
    auto resolve_window = [&](double p0) -> std::optional<double> {
        win_lo = std::max(anchor.s + dead, p0 - guard);
        win_hi = std::min(s_limit, p0 + guard);
        if (win_hi <= win_lo) return std::nullopt;
        const double qa = im_y2(at_offset(anchor, eps, win_lo));
        const double qb = im_y2(at_offset(anchor, eps, win_hi));
        if ((qa <= 0.0) == (qb <= 0.0)) return std::nullopt;
        const double root = bisect_root(win_lo, win_hi, [](const ModeState& m) { return im_y2(m); });
        const double s_star = polish_switch(root);
        if (s_star < anchor.s + dead || s_star > s_limit - dead) return std::nullopt;
        return s_star;
    };

    ModeState prev = anchor;
    double q_prev = im_y2(prev);
    double g_prev = g0(prev);
    int k = 1;
    while (true) {
        double t = anchor.s + static_cast<double>(k) * h;
        bool last = false;
        if (t >= s_limit) { t = s_limit; last = true; }
        const ModeState cur = at_offset(anchor, eps, t);
        const double q_cur = im_y2(cur);
        const double g_cur = g0(cur);

        // Candidate turning in this subinterval (not committed until it is
        // known that no switch precedes it: a switch changes the trajectory
        // and with it the turning point).
        bool p0_cand = false;
        ModeState p0_state;
        if (!have_turning && g_prev < 0.0 && g_cur >= 0.0) {
            double root = bisect_root(prev.s, t, [](const ModeState& m) { return g0(m); });
            ModeState m = at_offset(anchor, eps, root);
            for (int it = 0; it < 2; ++it) {   // Newton polish on the closed-form derivative
                const double d = g_tau_derivative(m, 0.0, eps);
                if (d <= 0.0) break;
                const double step = g0(m) / d;
                if (!std::isfinite(step)) break;
                m = at_offset(anchor, eps, m.s - step);
            }
            p0_cand = true;
            p0_state = m;
        }

        std::optional<double> q_root;
        if ((q_prev < 0.0 && q_cur >= 0.0) || (q_prev > 0.0 && q_cur <= 0.0) ||
            (q_prev == 0.0 && q_cur != 0.0 && prev.s > anchor.s)) {
            const double s_star = polish_switch(
                bisect_root(prev.s, t, [](const ModeState& m) { return im_y2(m); }));
            if (s_star >= anchor.s + dead && s_star <= s_limit - dead) q_root = s_star;
        }

        if (p0_cand) {
            std::optional<double> ws = resolve_window(p0_state.s);
            if (q_root && *q_root >= win_lo && *q_root <= win_hi) q_root.reset();
            // Earliest event wins.
            std::optional<double> first_switch = q_root;
            if (ws && (!first_switch || *ws < *first_switch)) first_switch = ws;
            if (first_switch && *first_switch < p0_state.s) {
                // The switch precedes the turning; the turning belongs to the
                // next layer's trajectory and is discarded.
                return {true, false, at_offset(anchor, eps, *first_switch)};
            }
            turning = {p0_state.s, state_x(p0_state)};
            have_turning = true;
            if (stop_at_turning) return {false, true, p0_state};
            if (first_switch) return {true, false, at_offset(anchor, eps, *first_switch)};
        } else {
            if (q_root && win_hi > win_lo && *q_root >= win_lo && *q_root <= win_hi)
                q_root.reset();   // inside an already-resolved window
            if (q_root) return {true, false, at_offset(anchor, eps, *q_root)};
        }

        if (samples && (k % sample_stride) == 0) samples->push_back(cur);
        if (last) return {false, false, cur};
        prev = cur;
        q_prev = q_cur;
        g_prev = g_cur;
        ++k;
    }
}

inline double initial_control(const ModeState& st, const ConstraintBox& box) {
    const double sc2 = state_scale(st) * state_scale(st);
    const double q = im_y2(st);
    if (std::fabs(q) > 1e-12 * sc2) return q > 0.0 ? box.eps2() : box.eps1();
    const double r = im_y2_deriv(st);
    if (std::fabs(r) > 1e-12 * sc2 * std::abs(st.kappa)) return r > 0.0 ? box.eps2() : box.eps1();
    // Launch exactly on a degenerate root: pick the self-consistent branch.
    const complex k2 = st.kappa * st.kappa;
    const double acc2 = (2.0 * (st.dy * st.dy - k2 * box.eps2() * st.y * st.y)).imag();
    return acc2 >= 0.0 ? box.eps2() : box.eps1();
}

} // namespace detail

struct PropagateOptions {
    int max_switches = 10000;
    int sample_stride = 8;
    bool stop_at_turning = false;
};

// Integrate the bang-bang extremal equation exactly layer by layer over
// [span_begin, span_end], switching control at each admissible root of
// Im y^2 and recording the transversality constant along the way.
inline ExtremalRecord propagate_extremal(const ModeState& y0, complex kappa,
                                         const ConstraintBox& box,
                                         double span_begin, double span_end,
                                         const PropagateOptions& opt = {}) {
    if (!in_c4(kappa)) throw std::invalid_argument("propagate_extremal: kappa must lie in the open fourth quadrant");
    if (y0.y == complex{0.0, 0.0} && y0.dy == complex{0.0, 0.0})
        throw std::invalid_argument("propagate_extremal: trivial initial data");
    if (!(span_end > span_begin)) throw std::invalid_argument("propagate_extremal: empty span");

    ExtremalRecord rec;
    rec.span_begin = span_begin;
    rec.span_end = span_end;
    rec.kappa = kappa;

    ModeState anchor = y0;
    anchor.s = span_begin;
    anchor.kappa = kappa;
    double eps = detail::initial_control(anchor, box);
    rec.layer_eps.push_back(eps);

    std::vector<std::pair<double, double>> lam;   // (sample, weight-free)
    auto push_lambda = [&](const ModeState& st, double e) { lam.emplace_back(lambda_sample(st, e), st.s); };
    auto track_scale = [&](const ModeState& st) { rec.y_scale = std::max(rec.y_scale, state_scale(st)); };

    push_lambda(anchor, eps);
    track_scale(anchor);
    rec.mode_samples.push_back(anchor);

    bool stationary_open = false;
    double stationary_start = 0.0;
    {
        // A launch sitting exactly on +-sqrt(eps) of its own control is parked.
        const SpherePoint x0 = state_x(anchor);
        if (!x0.is_infinity()) {
            const complex xv = x0.value();
            const double root = std::sqrt(eps);
            if (std::abs(xv - root) <= 1e-12 * root || std::abs(xv + root) <= 1e-12 * root) {
                stationary_open = true;
                stationary_start = span_begin;
            }
        }
    }

    auto maybe_renormalize = [&](ModeState& st) {
        const double sc = state_scale(st);
        if (sc < 1e120) return;
        const double inv = 1.0 / sc;
        st.y *= inv; st.dy *= inv;
        for (auto& m : rec.mode_samples) { m.y *= inv; m.dy *= inv; }
        for (auto& m : rec.switch_states) { m.y *= inv; m.dy *= inv; }
        for (auto& l : lam) l.first *= inv * inv;
        rec.y_scale *= inv;
    };

    while (true) {
        detail::LayerScan scan = detail::advance_layer(anchor, eps, kappa, span_end,
                                                       rec.turning, rec.turning_found,
                                                       opt.stop_at_turning,
                                                       &rec.mode_samples, opt.sample_stride);
        track_scale(scan.end);
        if (scan.switched) {
            const double b = scan.end.s;
            if (stationary_open) {
                rec.stationary_intervals.push_back({stationary_start, b, eps});
                stationary_open = false;
            }
            rec.switch_points.push_back(b);
            rec.switch_states.push_back(scan.end);
            push_lambda(scan.end, eps);
            const double eps_new = (eps == box.eps1()) ? box.eps2() : box.eps1();
            push_lambda(scan.end, eps_new);
            eps = eps_new;
            rec.layer_eps.push_back(eps);

            // A switch landing exactly on +-sqrt(eps_new) parks the state there.
            const SpherePoint x = state_x(scan.end);
            const double root = std::sqrt(eps);
            if (!x.is_infinity()) {
                const complex xv = x.value();
                const double root_new = std::sqrt(eps_new);
                if (std::abs(xv - root_new) <= 1e-12 * root_new ||
                    std::abs(xv + root_new) <= 1e-12 * root_new) {
                    stationary_open = true;
                    stationary_start = b;
                }
            }
            (void)root;
            anchor = scan.end;
            maybe_renormalize(anchor);
            if (static_cast<int>(rec.switch_points.size()) > opt.max_switches)
                throw std::runtime_error("propagate_extremal: runaway switch iteration");
            continue;
        }
        if (stationary_open) {
            rec.stationary_intervals.push_back({stationary_start, scan.end.s, eps});
            stationary_open = false;
        }
        rec.mode_samples.push_back(scan.end);
        push_lambda(scan.end, eps);
        anchor = scan.end;
        break;   // turning stop or span end
    }

    double lo = lam.front().first, hi = lam.front().first;
    for (const auto& l : lam) { lo = std::min(lo, l.first); hi = std::max(hi, l.first); }
    rec.lambda0 = lam.front().first;
    rec.lambda0_spread = hi - lo;
    const double thresh = 1e-8 * rec.y_scale * rec.y_scale;
    rec.kind = (std::fabs(rec.lambda0) <= thresh) ? ExtremalKind::Abnormal : ExtremalKind::Normal;
    rec.near_threshold = std::fabs(rec.lambda0) > 0.1 * thresh && std::fabs(rec.lambda0) < 10.0 * thresh;
    return rec;
}

// First admissible root of Im y^2 after state.s under the given control.
// The structural width theorems bound the gap by two half-waves; exceeding
// that indicates corrupted input.
inline double next_switch(const ModeState& state, double eps, complex kappa,
                          const TurningPoint& p0_hint) {
    if (!in_c4(kappa)) throw std::invalid_argument("next_switch: kappa must lie in the open fourth quadrant");
    TurningPoint turning = p0_hint;
    bool have = p0_hint.finite();
    ModeState st = state;
    st.kappa = kappa;
    detail::LayerScan scan = detail::advance_layer(st, eps, kappa,
                                                   state.s + 2.0 * half_wave(eps, kappa) * (1.0 + 1e-9),
                                                   turning, have, false, nullptr, 1 << 30);
    if (!scan.switched)
        throw std::runtime_error("next_switch: no root of Im y^2 within two half-waves");
    return scan.end.s;
}

// Independent switch locator: the first time the explicit spiral
// Phi(s) = theta^{1/2}(b_j) e^{-i kq (s - b_j)} meets the Joukowski preimage
// of the ray through zeta, with zeta chosen by the turning-point position.
// Cross-checks the Im y^2 root above.
inline double next_switch_spiral(const ModeState& state, double eps, complex kappa,
                                 const TurningPoint& p0_hint) {
    if (!in_c4(kappa)) throw std::invalid_argument("next_switch_spiral: kappa in C4 required");
    const SpherePoint x = state_x(state);
    const SpiralPhase ph = spiral_phase(x, eps, kappa);
    if (ph.value.is_zero() || ph.value.is_infinity())
        throw std::domain_error("next_switch_spiral: equilibrium state");

    const complex theta0 = ph.value.value();
    const complex phi0 = principal_sqrt(theta0);
    const complex j0 = joukowski(phi0);
    const complex kq = std::sqrt(eps) * kappa;
    const double hw = half_wave(eps, kappa);

    complex zeta;
    const bool p0_in_window = p0_hint.finite() && p0_hint.p0 > state.s &&
                              p0_hint.p0 <= state.s + 2.0 * hw;
    if (p0_in_window) {
        zeta = p0_hint.x_at_p0.is_infinity() ? -j0 : j0;
    } else {
        zeta = (g0(state) < 0.0) ? complex{0.0, -1.0} * j0 : complex{0.0, 1.0} * j0;
    }

    auto w_at = [&](double s) {
        return joukowski(phi0 * std::exp(complex{0.0, -1.0} * kq * (s - state.s)));
    };
    auto cross = [&](complex w) { return (std::conj(zeta) * w).imag(); };
    auto dot = [&](complex w) { return (std::conj(zeta) * w).real(); };

    const double h = hw / 256.0;
    const double dead = 1e-9 * hw;
    double prev = state.s;
    double c_prev = cross(w_at(prev));
    for (int k = 1; static_cast<double>(k) * h <= 2.0 * hw * (1.0 + 1e-9); ++k) {
        const double t = state.s + static_cast<double>(k) * h;
        const double c_cur = cross(w_at(t));
        if ((c_prev < 0.0 && c_cur >= 0.0) || (c_prev > 0.0 && c_cur <= 0.0)) {
            double lo = prev, hi = t;
            double flo = cross(w_at(lo));
            for (int it = 0; it < 100 && (hi - lo) > 4.0 * 2.3e-16 * std::max(1.0, std::fabs(hi)); ++it) {
                const double mid = 0.5 * (lo + hi);
                const double fm = cross(w_at(mid));
                if ((fm <= 0.0) == (flo <= 0.0)) { lo = mid; flo = fm; }
                else hi = mid;
            }
            const double s_star = 0.5 * (lo + hi);
            if (s_star > state.s + dead && dot(w_at(s_star)) > 0.0) return s_star;
        }
        prev = t;
        c_prev = c_cur;
    }
    throw std::runtime_error("next_switch_spiral: no ray crossing within two half-waves");
}

// Quarter-wave step map of abnormal trajectories:
// x(b_{j+1}) = f_{M(eps)}(x(b_j)) with M(eps) = [[1, sqrt(eps) q1], [q1/sqrt(eps), 1]]
// and q1 = (1 + e^{-q pi})/(1 - e^{-q pi}), q = -Im kappa / Re kappa.
inline double abnormal_q1(complex kappa) {
    const double q = -kappa.imag() / kappa.real();
    if (!(q > 0.0)) throw std::invalid_argument("abnormal_q1: need Re kappa > 0 > Im kappa");
    const double e = std::exp(-q * pi);
    return (1.0 + e) / (1.0 - e);
}

inline MobiusMap abnormal_period_map(double eps, complex kappa) {
    if (!(eps > 0.0)) throw std::invalid_argument("abnormal_period_map: eps must be positive");
    const double q1 = abnormal_q1(kappa);
    const double root = std::sqrt(eps);
    return {complex{1.0, 0.0}, complex{root * q1, 0.0}, complex{q1 / root, 0.0}, complex{1.0, 0.0}};
}

// Fixed points of the two-layer composition f_{M(e2) M(e1)} together with
// its multiplier: hyperbolic with the attractor on the positive half-line.
struct ComposedFixedPoints {
    double x_minus = 0.0;   // repulsive, in R-
    double x_plus = 0.0;    // attractive, in R+
    double lambda = 0.0;    // multiplier > 1
};

inline ComposedFixedPoints composed_fixed_points(const ConstraintBox& box, complex kappa, double r) {
    if (!(r > 0.0)) throw std::invalid_argument("composed_fixed_points: ratio must be positive");
    const double q1 = abnormal_q1(kappa);
    const double g = std::sqrt(box.n1 * box.n2);
    const double u = q1 * (1.0 / std::sqrt(r) - std::sqrt(r));
    const double disc = std::sqrt(u * u + 4.0);
    ComposedFixedPoints out;
    out.x_plus = 0.5 * g * (u + disc);
    out.x_minus = 0.5 * g * (u - disc);
    const double ratio = box.n2 / box.n1;
    const double jr = 0.5 * (ratio + 1.0 / ratio);
    const double trace_half = (q1 * q1 * jr + 1.0) / (q1 * q1 - 1.0);
    out.lambda = trace_half + std::sqrt(trace_half * trace_half - 1.0);
    return out;
}

struct PmpViolation {
    double s = 0.0;
    std::string what;
};

struct PmpReport {
    bool sign_rule_ok = true;         // Im y^2 sign vs control
    bool lambda_nonnegative = true;
    bool lambda_constant = true;
    bool abnormal_switches_real = true;   // x^2(b_j) real for abnormal records
    std::vector<PmpViolation> violations;

    bool pass() const {
        return sign_rule_ok && lambda_nonnegative && lambda_constant && abnormal_switches_real;
    }
};

inline PmpReport pmp_check(const ExtremalRecord& rec) {
    PmpReport rep;
    const double sc2 = rec.y_scale * rec.y_scale;

    double eps_lo = std::numeric_limits<double>::infinity(), eps_hi = 0.0;
    for (double e : rec.layer_eps) { eps_lo = std::min(eps_lo, e); eps_hi = std::max(eps_hi, e); }

    for (const auto& st : rec.mode_samples) {
        if (rec.in_stationary(st.s)) continue;
        const double q = detail::im_y2(st);
        if (std::fabs(q) <= 1e-8 * sc2) continue;   // too close to a switch to attribute
        const double eps = rec.eps_at(st.s);
        const double want = q > 0.0 ? eps_hi : eps_lo;
        if (!eps_equal(eps, want, 1e-9)) {
            rep.sign_rule_ok = false;
            rep.violations.push_back({st.s, "control contradicts the sign of Im y^2"});
        }
    }

    if (rec.lambda0 < -1e-9 * sc2) {
        rep.lambda_nonnegative = false;
        rep.violations.push_back({rec.span_begin, "negative transversality constant"});
    }
    if (rec.lambda0_spread > 1e-9 * sc2) {
        rep.lambda_constant = false;
        rep.violations.push_back({rec.span_begin, "transversality constant drifts along the span"});
    }

    if (rec.kind == ExtremalKind::Abnormal) {
        for (const auto& st : rec.switch_states) {
            const SpherePoint x = state_x(st);
            if (x.is_infinity() || x.is_zero()) continue;
            const complex x2 = x.value() * x.value();
            if (std::fabs(x2.imag()) > 1e-8 * std::abs(x2)) {
                rep.abnormal_switches_real = false;
                rep.violations.push_back({st.s, "abnormal switch with x^2 off the real line"});
            }
        }
    }
    return rep;
}

// Record assembled from a concrete profile and a left launch: switch points
// are the material interfaces, and the transversality samples expose whether
// the pair (profile, mode) is extremal.  Drives the CLI `verify` command.
inline ExtremalRecord record_from_profile(const PermittivityProfile& p, complex kappa,
                                          const ModeState& launch, int samples_per_layer = 24) {
    if (!in_c4(kappa)) throw std::invalid_argument("record_from_profile: kappa in C4 required");
    ExtremalRecord rec;
    rec.span_begin = p.s_minus;
    rec.span_end = p.s_plus();
    rec.kappa = kappa;

    std::vector<std::pair<double, double>> lam;
    ModeState st = launch;
    st.kappa = kappa;
    double a = p.s_minus;
    rec.layer_eps.reserve(p.layers.size());
    for (std::size_t i = 0; i < p.layers.size(); ++i) {
        const Layer& l = p.layers[i];
        rec.layer_eps.push_back(l.eps);
        if (i > 0) {
            rec.switch_points.push_back(a);
            rec.switch_states.push_back(st);
            lam.emplace_back(lambda_sample(st, p.layers[i - 1].eps), a);
            lam.emplace_back(lambda_sample(st, l.eps), a);
        }
        const double root = std::sqrt(l.eps);
        bool parked = true;
        for (int k = 0; k <= samples_per_layer; ++k) {
            const double s = a + l.width * static_cast<double>(k) / samples_per_layer;
            ModeState m = propagate_mode(p, kappa, st, s);
            rec.mode_samples.push_back(m);
            lam.emplace_back(lambda_sample(m, l.eps), s);
            rec.y_scale = std::max(rec.y_scale, state_scale(m));
            const SpherePoint x = state_x(m);
            if (x.is_infinity()) { parked = false; }
            else {
                const complex xv = x.value();
                if (std::abs(xv - root) > 1e-10 * root && std::abs(xv + root) > 1e-10 * root)
                    parked = false;
            }
        }
        if (parked) rec.stationary_intervals.push_back({a, a + l.width, l.eps});
        st = propagate_mode(p, kappa, st, a + l.width);
        a += l.width;
    }
    if (rec.layer_eps.empty()) rec.layer_eps.push_back(p.eps_inf);

    ModeState relaunch = launch;
    relaunch.kappa = kappa;
    rec.turning = turning_point(p, kappa, relaunch, rec.span_end);
    rec.turning_found = rec.turning.finite();

    double lo = lam.empty() ? 0.0 : lam.front().first, hi = lo;
    for (const auto& l : lam) { lo = std::min(lo, l.first); hi = std::max(hi, l.first); }
    rec.lambda0 = lam.empty() ? 0.0 : lam.front().first;
    rec.lambda0_spread = hi - lo;
    const double thresh = 1e-8 * rec.y_scale * rec.y_scale;
    rec.kind = (std::fabs(rec.lambda0) <= thresh) ? ExtremalKind::Abnormal : ExtremalKind::Normal;
    rec.near_threshold = std::fabs(rec.lambda0) > 0.1 * thresh && std::fabs(rec.lambda0) < 10.0 * thresh;
    return rec;
}

} // namespace resopt
