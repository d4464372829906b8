#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "resopt/sphere.hpp"

// Piecewise-constant permittivity profiles, exact per-layer mode propagation,
// boundary residuals defining resonances, constant-resonator spectra and the
// scaling covariance.  All lengths in meters, wavenumbers in 1/m.

namespace resopt {

struct ConstraintBox {
    double n1 = 1.0;      // lower refractive index
    double n2 = 2.0;      // upper refractive index
    double n_inf = 1.0;   // outer medium

    ConstraintBox() = default;
    ConstraintBox(double a, double b, double outer) : n1(a), n2(b), n_inf(outer) {
        if (!(0.0 < n1 && n1 < n2) || !(n_inf > 0.0))
            throw std::invalid_argument("ConstraintBox: need 0 < n1 < n2 and n_inf > 0");
    }

    double eps1() const { return n1 * n1; }
    double eps2() const { return n2 * n2; }
    double eps_inf() const { return n_inf * n_inf; }
};

struct Layer {
    double width = 0.0;   // meters, > 0
    double eps = 1.0;     // relative permittivity
};

struct PermittivityProfile {
    double eps_inf = 1.0;
    double s_minus = 0.0;              // left edge in meters
    std::vector<Layer> layers;

    double s_plus() const {
        double s = s_minus;
        for (const auto& l : layers) s += l.width;
        return s;
    }

    double eps_at(double s) const {
        double a = s_minus;
        for (const auto& l : layers) {
            if (s >= a && s < a + l.width) return l.eps;
            a += l.width;
        }
        return eps_inf;
    }

    bool feasible(const ConstraintBox& box, double rel_tol = 1e-12) const {
        for (const auto& l : layers) {
            if (l.eps < box.eps1() * (1.0 - rel_tol) - rel_tol) return false;
            if (l.eps > box.eps2() * (1.0 + rel_tol) + rel_tol) return false;
        }
        return true;
    }
};

inline bool eps_equal(double a, double b, double rel_tol = 1e-12) {
    return std::fabs(a - b) <= rel_tol * std::max(std::fabs(a), std::fabs(b));
}

// Merge equal-permittivity neighbours, drop zero-width layers and trim
// leading/trailing layers that match the outer medium (they belong to it).
inline PermittivityProfile canonicalize(const PermittivityProfile& p) {
    PermittivityProfile out;
    out.eps_inf = p.eps_inf;
    out.s_minus = p.s_minus;

    std::vector<Layer> merged;
    for (const auto& l : p.layers) {
        if (l.width <= 0.0) continue;
        if (!merged.empty() && eps_equal(merged.back().eps, l.eps))
            merged.back().width += l.width;
        else
            merged.push_back(l);
    }
    std::size_t lo = 0, hi = merged.size();
    double shift = 0.0;
    while (lo < hi && eps_equal(merged[lo].eps, p.eps_inf)) shift += merged[lo++].width;
    while (hi > lo && eps_equal(merged[hi - 1].eps, p.eps_inf)) --hi;
    out.s_minus += shift;
    out.layers.assign(merged.begin() + static_cast<std::ptrdiff_t>(lo),
                      merged.begin() + static_cast<std::ptrdiff_t>(hi));
    return out;
}

inline double effective_length(const PermittivityProfile& p) {
    const PermittivityProfile c = canonicalize(p);
    double L = 0.0;
    for (const auto& l : c.layers) L += l.width;
    return L;
}

struct ModeState {
    double s = 0.0;       // position, meters
    complex y{1.0, 0.0};
    complex dy{0.0, 0.0}; // y'
    complex kappa{1.0, -1.0};
};

// Boundary values of x = y'/(i kappa y) at the two ends.
struct BoundaryPair {
    SpherePoint eta_minus;
    SpherePoint eta_plus;

    BoundaryPair(SpherePoint m, SpherePoint pl) : eta_minus(m), eta_plus(pl) {
        if (chordal_distance(m, pl) == 0.0)
            throw std::invalid_argument("BoundaryPair: eta_minus must differ from eta_plus");
    }

    static BoundaryPair full(double n_inf) {
        return {SpherePoint::from_complex(complex{-n_inf, 0.0}),
                SpherePoint::from_complex(complex{n_inf, 0.0})};
    }
    static BoundaryPair odd(double n_inf) {
        return {SpherePoint::infinity(), SpherePoint::from_complex(complex{n_inf, 0.0})};
    }
    static BoundaryPair even(double n_inf) {
        return {SpherePoint::zero(), SpherePoint::from_complex(complex{n_inf, 0.0})};
    }
};

// One closed-form step through material of permittivity eps: the 2x2 map
// (y, y') -> (y cos(kq t) + y' sin(kq t)/kq, -kq y sin(kq t) + y' cos(kq t))
// with kq = sqrt(eps) kappa.  Unit determinant, so the Wronskian is conserved.
inline void layer_step(complex& y, complex& dy, double eps, complex kappa, double dt) {
    if (dt == 0.0) return;
    const complex kq = std::sqrt(eps) * kappa;
    const complex a = kq * dt;
    const complex c = std::cos(a), s = std::sin(a);
    const complex y1 = y * c + dy * (s / kq);
    const complex dy1 = -kq * y * s + dy * c;
    y = y1;
    dy = dy1;
}

inline ModeState propagate_mode(const PermittivityProfile& p, complex kappa,
                                const ModeState& start, double s_target) {
    if (!std::isfinite(start.y.real()) || !std::isfinite(start.y.imag()) ||
        !std::isfinite(start.dy.real()) || !std::isfinite(start.dy.imag()) ||
        !std::isfinite(start.s) || !std::isfinite(s_target))
        throw std::invalid_argument("propagate_mode: non-finite input");

    // Breakpoints of the piecewise medium.
    std::vector<double> edges;
    edges.push_back(p.s_minus);
    double a = p.s_minus;
    for (const auto& l : p.layers) { a += l.width; edges.push_back(a); }

    complex y = start.y, dy = start.dy;
    double s = start.s;
    const double dir = (s_target >= s) ? 1.0 : -1.0;
    while (s != s_target) {
        // Next breakpoint in the travel direction, capped at the target.
        double next = s_target;
        for (double e : edges) {
            if (dir > 0.0 && e > s && e < next) next = e;
            if (dir < 0.0 && e < s && e > next) next = e;
        }
        const double mid = 0.5 * (s + next);
        layer_step(y, dy, p.eps_at(mid), kappa, next - s);
        s = next;
    }
    return {s_target, y, dy, kappa};
}

// Launch normalization for the left condition x(s-) = eta_minus.
inline ModeState launch_left(const PermittivityProfile& p, complex kappa, const SpherePoint& eta_minus) {
    if (eta_minus.is_infinity()) return {p.s_minus, complex{0.0, 0.0}, complex{1.0, 0.0}, kappa};
    const complex em = eta_minus.value();
    return {p.s_minus, complex{1.0, 0.0}, complex{0.0, 1.0} * kappa * em, kappa};
}

// Scale-free defect of the right boundary condition after propagating the
// unique (up to scale) solution of the left condition across the profile.
// Zero exactly at the (eta-, eta+)-eigenvalues of the profile.
inline complex boundary_residual(const PermittivityProfile& p, complex kappa, const BoundaryPair& bp) {
    if (kappa == complex{0.0, 0.0}) throw std::invalid_argument("boundary_residual: kappa = 0");
    const ModeState end = propagate_mode(p, kappa, launch_left(p, kappa, bp.eta_minus), p.s_plus());
    const double scale = std::max(std::abs(end.y), std::abs(end.dy) / std::abs(kappa));
    if (bp.eta_plus.is_infinity()) return end.y / scale;
    const complex ep = bp.eta_plus.value();
    const complex defect = end.dy - complex{0.0, 1.0} * kappa * ep * end.y;
    return defect / (std::abs(kappa) * scale * std::max(1.0, std::abs(ep)));
}

// Spectrum of the constant resonator eps on an interval of length L:
//   k_n = -i Ln(theta-/theta+) / (2 L sqrt(eps)) + pi n / (L sqrt(eps)),
// where theta+- = I(eta+- / sqrt(eps)).  Principal branch, so n = 0 indexes
// the mode nearest the imaginary axis; other conventions shift by pi/(L sqrt(eps)).
inline std::vector<complex> constant_spectrum(double eps, double L, const BoundaryPair& bp,
                                              int n_first, int n_last) {
    if (!(eps > 0.0) || !(L > 0.0)) throw std::invalid_argument("constant_spectrum: need eps > 0, L > 0");
    if (n_last < n_first) throw std::invalid_argument("constant_spectrum: empty index range");
    const double root = std::sqrt(eps);

    auto theta_of = [&](const SpherePoint& eta) {
        auto [num, den] = eta.homogeneous();
        return involution_map().apply(SpherePoint::from_homogeneous(num / root, den));
    };
    const SpherePoint tm = theta_of(bp.eta_minus);
    const SpherePoint tp = theta_of(bp.eta_plus);
    if (tm.is_zero() || tm.is_infinity() || tp.is_zero() || tp.is_infinity())
        throw std::domain_error("constant_spectrum: equilibrium boundary value eta = +-sqrt(eps)");

    const complex ratio = tm.value() / tp.value();
    const complex base = complex{0.0, -1.0} * principal_log(ratio) / (2.0 * L * root);
    std::vector<complex> out;
    out.reserve(static_cast<std::size_t>(n_last - n_first + 1));
    for (int n = n_first; n <= n_last; ++n)
        out.push_back(base + pi * static_cast<double>(n) / (L * root));
    return out;
}

// Spatial rescaling: widths shrink by 1/tau and every resonance moves from
// kappa to tau * kappa.
inline PermittivityProfile scale_profile(const PermittivityProfile& p, double tau) {
    if (!(tau > 0.0)) throw std::invalid_argument("scale_profile: tau must be positive");
    PermittivityProfile out = p;
    out.s_minus = p.s_minus / tau;
    for (auto& l : out.layers) l.width /= tau;
    return out;
}

// Complex secant polishing of a boundary-residual zero.
inline complex refine_resonance(const PermittivityProfile& p, complex kappa_guess,
                                const BoundaryPair& bp, int max_iter = 100,
                                double tol = 1e-13) {
    auto f = [&](complex k) { return boundary_residual(p, k, bp); };
    complex k0 = kappa_guess;
    complex k1 = kappa_guess * (1.0 + 1e-7) + complex{0.0, -1e-9} * std::abs(kappa_guess);
    complex f0 = f(k0), f1 = f(k1);
    for (int it = 0; it < max_iter; ++it) {
        if (std::abs(f1) <= tol) return k1;
        const complex df = f1 - f0;
        if (df == complex{0.0, 0.0}) break;
        complex k2 = k1 - f1 * (k1 - k0) / df;
        if (!std::isfinite(k2.real()) || !std::isfinite(k2.imag())) break;
        // Keep the step from leaving the guess's basin entirely.
        const double cap = 0.5 * std::abs(kappa_guess);
        if (std::abs(k2 - k1) > cap) k2 = k1 + (k2 - k1) * (cap / std::abs(k2 - k1));
        k0 = k1; f0 = f1;
        k1 = k2; f1 = f(k1);
    }
    if (std::abs(f1) <= 1e-12) return k1;
    throw std::runtime_error("refine_resonance: no convergence");
}

} // namespace resopt
