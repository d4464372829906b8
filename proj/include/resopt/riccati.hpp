#pragma once

#include <cmath>
#include <complex>
#include <limits>
#include <stdexcept>

#include "resopt/medium.hpp"
#include "resopt/sphere.hpp"

// The control flow x' = i kappa (-x^2 + eps) on the sphere under constant
// controls, its exact spiral-phase representation, the monotone functions
// G_tau and turning-point location.

namespace resopt {

// Phase variable theta = I(x / sqrt(eps)).  Under a constant control it
// evolves as the logarithmic spiral theta(s) = theta(s0) e^{-2 i kq (s-s0)}
// with kq = sqrt(eps) kappa; the equilibria x = +-sqrt(eps) map to 0 and
// infinity.
struct SpiralPhase {
    SpherePoint value;
    double eps = 1.0;
    complex kappa{1.0, -1.0};
};

inline SpiralPhase spiral_phase(const SpherePoint& x, double eps, complex kappa) {
    if (!(eps > 0.0)) throw std::invalid_argument("spiral_phase: eps must be positive");
    auto [num, den] = x.homogeneous();
    const double root = std::sqrt(eps);
    SpherePoint scaled = SpherePoint::from_homogeneous(num, den * root);
    return {involution_I(scaled), eps, kappa};
}

inline SpherePoint spiral_phase_to_state(const SpiralPhase& th) {
    SpherePoint u = involution_I(th.value);
    auto [num, den] = u.homogeneous();
    return SpherePoint::from_homogeneous(num * std::sqrt(th.eps), den);
}

// Exact constant-control flow over time t.  Total on the sphere; the
// equilibria are exact fixed points and passes through infinity are handled
// by the chart switch inside the homogeneous arithmetic.
inline SpherePoint flow_const(const SpherePoint& x0, double eps, complex kappa, double t) {
    if (!(eps > 0.0)) throw std::invalid_argument("flow_const: eps must be positive");
    if (!std::isfinite(t)) throw std::invalid_argument("flow_const: non-finite time");
    SpiralPhase th = spiral_phase(x0, eps, kappa);
    if (th.value.is_zero() || th.value.is_infinity()) return x0;   // equilibrium

    const complex kq = std::sqrt(eps) * kappa;
    const complex expo = complex{0.0, -2.0} * kq * t;
    auto [num, den] = th.value.homogeneous();
    if (expo.real() > 700.0) {
        th.value = SpherePoint::infinity();       // driven into the unstable pole
    } else if (expo.real() < -700.0) {
        th.value = SpherePoint::zero();           // collapsed onto the stable pole
    } else {
        th.value = SpherePoint::from_homogeneous(num * std::exp(expo), den);
    }
    return spiral_phase_to_state(th).canonical();
}

// G_tau(s) = Re(e^{i(tau - pi/2)} conj(y) y'): strictly increasing along any
// trajectory when kappa lies in the fourth quadrant and tau in [0, -2 arg kappa].
// Its unique zero is where the trajectory meets the no-return line L_tau.
inline double g_tau_unchecked(const ModeState& st, double tau) {
    const complex w = std::exp(complex{0.0, tau - pi / 2.0}) * std::conj(st.y) * st.dy;
    return w.real();
}

inline double g_tau(const ModeState& st, double tau) {
    if (!in_c4(st.kappa)) throw std::invalid_argument("g_tau: kappa must lie in the open fourth quadrant");
    const double hi = -2.0 * principal_arg(st.kappa);
    if (tau < -1e-12 || tau > hi + 1e-12)
        throw std::invalid_argument("g_tau: tau outside [0, -2 arg kappa]");
    return g_tau_unchecked(st, tau);
}

// d/ds G_tau, in closed form from |y|, |y'| and the layer permittivity.
inline double g_tau_derivative(const ModeState& st, double tau, double eps) {
    const complex ph = std::exp(complex{0.0, tau - pi / 2.0});
    return std::norm(st.dy) * ph.real() + std::norm(st.y) * eps * (ph * (-st.kappa * st.kappa)).real();
}

inline double g0(const ModeState& st) { return (std::conj(st.y) * st.dy).imag(); }

// State value x = y'/(i kappa y) of a mode state, as a sphere point.
inline SpherePoint state_x(const ModeState& st) {
    return SpherePoint::from_homogeneous(st.dy, complex{0.0, 1.0} * st.kappa * st.y);
}

struct TurningPoint {
    double p0 = std::numeric_limits<double>::infinity();   // +-inf when no turning in span
    SpherePoint x_at_p0;

    bool finite() const { return std::isfinite(p0); }
};

// Locate the zero of the strictly monotone G_0 along the mode propagated
// through a concrete profile.  Per-layer bracketing (monotonicity makes the
// breakpoint scan exhaustive), bisection, then two Newton polish steps.
inline TurningPoint turning_point(const PermittivityProfile& p, complex kappa,
                                  const ModeState& start, double s_max) {
    if (!in_c4(kappa)) throw std::invalid_argument("turning_point: kappa must lie in the open fourth quadrant");
    if (!(s_max > start.s) && g0(start) < 0.0)
        throw std::invalid_argument("turning_point: empty span");

    ModeState st = start;
    double g_here = g0(st);
    if (g_here == 0.0) return {st.s, state_x(st)};
    if (g_here > 0.0) return {-std::numeric_limits<double>::infinity(), SpherePoint{}};

    // Breakpoints of the medium inside the span.
    std::vector<double> cuts;
    double a = p.s_minus;
    for (const auto& l : p.layers) {
        a += l.width;
        if (a > st.s && a < s_max) cuts.push_back(a);
    }
    cuts.push_back(s_max);

    for (double cut : cuts) {
        ModeState nxt = propagate_mode(p, kappa, st, cut);
        double g_next = g0(nxt);
        if (g_next < 0.0) { st = nxt; g_here = g_next; continue; }

        // Bracketed in [st.s, cut] within a single layer.
        const double eps_layer = p.eps_at(0.5 * (st.s + cut));
        double lo = st.s, hi = cut;
        ModeState at_lo = st;
        for (int it = 0; it < 200 && (hi - lo) > 1e-13 * std::max(1.0, std::fabs(hi)); ++it) {
            const double mid = 0.5 * (lo + hi);
            ModeState m = propagate_mode(p, kappa, at_lo, mid);
            if (g0(m) < 0.0) { lo = mid; at_lo = m; } else { hi = mid; }
        }
        double s_root = 0.5 * (lo + hi);
        ModeState m = propagate_mode(p, kappa, at_lo, s_root);
        for (int it = 0; it < 2; ++it) {
            const double d = g_tau_derivative(m, 0.0, eps_layer);
            if (d <= 0.0) break;
            const double step = g0(m) / d;
            const double s_new = s_root - step;
            if (!(s_new > lo - (hi - lo) && s_new < hi + (hi - lo))) break;
            m = propagate_mode(p, kappa, m, s_new);
            s_root = s_new;
        }
        return {s_root, state_x(m)};
    }
    return {std::numeric_limits<double>::infinity(), SpherePoint{}};
}

} // namespace resopt
