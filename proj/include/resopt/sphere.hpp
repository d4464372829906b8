#pragma once

#include <cmath>
#include <complex>
#include <limits>
#include <stdexcept>
#include <utility>

// Riemann-sphere primitives shared by the flow, extremal and shooting code:
// two-chart points, Moebius maps, the Joukowski transform and its branches,
// sector classification and no-return lines.

namespace resopt {

using complex = std::complex<double>;

inline constexpr double pi = 3.141592653589793238462643383279502884;

// Branches continuous on C minus the negative real half-line, with
// arg(1) = 0 and arg(z) = +pi on the cut itself (signed zeros normalized).
inline complex normalize_cut(complex z) {
    if (z.imag() == 0.0) return {z.real(), +0.0};
    return z;
}
inline double principal_arg(complex z) { return std::arg(normalize_cut(z)); }
inline complex principal_log(complex z) { return std::log(normalize_cut(z)); }
inline complex principal_sqrt(complex z) { return std::sqrt(normalize_cut(z)); }

inline bool in_c4(complex kappa) { return kappa.real() > 0.0 && kappa.imag() < 0.0; }

inline double wrap_2pi(double a) {
    a = std::fmod(a, 2.0 * pi);
    if (a < 0.0) a += 2.0 * pi;
    return a;
}

enum class Chart { Standard, Inverted };

// A point of the extended plane stored in one of two charts.  The Standard
// chart stores x itself, the Inverted chart stores -1/x; infinity is
// (Inverted, 0).  Canonical form keeps |coord| <= 1.
struct SpherePoint {
    Chart chart = Chart::Standard;
    complex coord{0.0, 0.0};

    SpherePoint() = default;
    SpherePoint(Chart c, complex z) : chart(c), coord(z) {}

    static SpherePoint zero() { return {Chart::Standard, complex{0.0, 0.0}}; }
    static SpherePoint infinity() { return {Chart::Inverted, complex{0.0, 0.0}}; }

    static SpherePoint from_complex(complex z) {
        if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return infinity();
        return SpherePoint{Chart::Standard, z}.canonical();
    }

    // Numerator/denominator pair with x = num/den.
    std::pair<complex, complex> homogeneous() const {
        if (chart == Chart::Standard) return {coord, complex{1.0, 0.0}};
        return {complex{-1.0, 0.0}, coord};
    }

    static SpherePoint from_homogeneous(complex num, complex den) {
        const double an = std::abs(num), ad = std::abs(den);
        if (an == 0.0 && ad == 0.0) throw std::domain_error("sphere point 0/0");
        if (an <= ad) return {Chart::Standard, num / den};
        return {Chart::Inverted, -den / num};
    }

    SpherePoint other_chart() const {
        if (!std::isfinite(coord.real()) || !std::isfinite(coord.imag()))
            return {chart == Chart::Standard ? Chart::Inverted : Chart::Standard, complex{0.0, 0.0}};
        if (coord == complex{0.0, 0.0})
            return {chart == Chart::Standard ? Chart::Inverted : Chart::Standard,
                    complex{std::numeric_limits<double>::infinity(), 0.0}};
        return {chart == Chart::Standard ? Chart::Inverted : Chart::Standard, -1.0 / coord};
    }

    SpherePoint canonical() const {
        if (!std::isfinite(coord.real()) || !std::isfinite(coord.imag())) return other_chart();
        if (std::abs(coord) > 1.0) return other_chart();
        return *this;
    }

    bool is_infinity() const {
        SpherePoint c = canonical();
        return c.chart == Chart::Inverted && c.coord == complex{0.0, 0.0};
    }
    bool is_zero() const {
        SpherePoint c = canonical();
        return c.chart == Chart::Standard && c.coord == complex{0.0, 0.0};
    }

    // Value as a plain complex number; infinity maps to (inf, 0).
    complex value() const {
        if (chart == Chart::Standard) return coord;
        if (coord == complex{0.0, 0.0}) return {std::numeric_limits<double>::infinity(), 0.0};
        return -1.0 / coord;
    }
};

// Fubini-Study (chordal) distance, robust across charts and at infinity.
inline double chordal_distance(const SpherePoint& p, const SpherePoint& q) {
    auto [np, dp] = p.homogeneous();
    auto [nq, dq] = q.homogeneous();
    const double num = std::abs(np * dq - nq * dp);
    const double den = std::sqrt((std::norm(np) + std::norm(dp)) * (std::norm(nq) + std::norm(dq)));
    return num / den;
}

struct MobiusMap {
    complex a11{1.0, 0.0}, a12{0.0, 0.0}, a21{0.0, 0.0}, a22{1.0, 0.0};

    complex det() const { return a11 * a22 - a12 * a21; }

    complex apply(complex z) const { return (a11 * z + a12) / (a21 * z + a22); }

    SpherePoint apply(const SpherePoint& p) const {
        auto [num, den] = p.homogeneous();
        complex n2 = a11 * num + a12 * den;
        complex d2 = a21 * num + a22 * den;
        const double m = std::max(std::abs(n2), std::abs(d2));
        if (m > 0.0 && std::isfinite(m)) { n2 /= m; d2 /= m; }
        return SpherePoint::from_homogeneous(n2, d2);
    }

    // Matrix product; f_{AB} = f_A o f_B.
    MobiusMap compose(const MobiusMap& b) const {
        return {a11 * b.a11 + a12 * b.a21, a11 * b.a12 + a12 * b.a22,
                a21 * b.a11 + a22 * b.a21, a21 * b.a12 + a22 * b.a22};
    }

    static MobiusMap identity() { return {}; }
};

// The involution z -> (1 - z)/(1 + z).  Swaps 0 <-> 1 and -1 <-> infinity;
// satisfies I(-z) = 1/I(z) and I(1/z) = -I(z).
inline const MobiusMap& involution_map() {
    static const MobiusMap m{complex{-1.0, 0.0}, complex{1.0, 0.0},
                             complex{1.0, 0.0}, complex{1.0, 0.0}};
    return m;
}

inline SpherePoint involution_I(const SpherePoint& z) { return involution_map().apply(z); }
inline complex involution_I(complex z) { return (1.0 - z) / (1.0 + z); }

// Joukowski transform J(z) = (z + 1/z)/2.
inline complex joukowski(complex z) {
    if (z == complex{0.0, 0.0}) throw std::domain_error("joukowski: z = 0");
    return 0.5 * (z + 1.0 / z);
}

// Branches of the inverse Joukowski map.  branch = +1 picks |z| > 1,
// branch = -1 picks |z| < 1.  The segment [-1, 1] is the branch cut where
// both preimages sit on the unit circle.
inline complex inv_joukowski(complex zeta, int branch) {
    if (branch != 1 && branch != -1) throw std::invalid_argument("inv_joukowski: branch must be +-1");
    if (std::abs(zeta.imag()) <= 1e-14 * (1.0 + std::abs(zeta.real())) &&
        std::abs(zeta.real()) <= 1.0 + 1e-14)
        throw std::domain_error("inv_joukowski: zeta on the branch cut [-1, 1]");
    complex w = principal_sqrt(zeta * zeta - 1.0);
    // Orient the root so that zeta + w is the larger of the reciprocal pair.
    if (zeta.real() * w.real() + zeta.imag() * w.imag() < 0.0) w = -w;
    const complex big = zeta + w;
    return branch == 1 ? big : 1.0 / big;
}

enum class BoundaryKind { RealAxis, ImagAxis, NoReturnL0, Zero, Infinity };

// Sector classification of the plane cut by the real axis, the imaginary
// axis and the no-return line L0 = i e^{-i arg kappa} R.  Indices follow the
// counterclockwise order starting from the open first quadrant.
struct SectorResult {
    bool on_boundary = false;
    int index = 0;               // 1..6 when !on_boundary
    BoundaryKind boundary = BoundaryKind::RealAxis;
};

inline double sphere_point_angle(const SpherePoint& p) {
    auto [num, den] = p.homogeneous();
    return wrap_2pi(principal_arg(num) - principal_arg(den));
}

inline SectorResult sector_of(const SpherePoint& x, complex kappa,
                              double angle_tol = 1e-10) {
    if (!in_c4(kappa)) throw std::invalid_argument("sector_of: kappa must lie in the open fourth quadrant");
    if (x.is_zero()) return {true, 0, BoundaryKind::Zero};
    if (x.is_infinity()) return {true, 0, BoundaryKind::Infinity};

    const double gamma = principal_arg(kappa);         // in (-pi/2, 0)
    const double theta = sphere_point_angle(x);        // in [0, 2pi)
    const double l0 = wrap_2pi(pi / 2.0 - gamma);      // direction of L0

    auto near_angle = [&](double target) {
        double d = std::fabs(wrap_2pi(theta - target + pi) - pi);
        return d <= angle_tol;
    };
    if (near_angle(0.0) || near_angle(pi)) return {true, 0, BoundaryKind::RealAxis};
    if (near_angle(pi / 2.0) || near_angle(3.0 * pi / 2.0)) return {true, 0, BoundaryKind::ImagAxis};
    if (near_angle(l0) || near_angle(l0 + pi)) return {true, 0, BoundaryKind::NoReturnL0};

    if (theta < pi / 2.0) return {false, 1, {}};
    if (theta < l0) return {false, 2, {}};
    if (theta < pi) return {false, 3, {}};
    if (theta < 3.0 * pi / 2.0) return {false, 4, {}};
    if (theta < l0 + pi) return {false, 5, {}};
    return {false, 6, {}};
}

// The no-return line L_tau = i e^{-i(tau + arg kappa)} R-hat for a spectral
// parameter in the fourth quadrant; valid for tau in [0, -2 arg kappa].
struct NoReturnLine {
    double tau = 0.0;
    complex kappa{1.0, -1.0};

    NoReturnLine(double t, complex k) : tau(t), kappa(k) {
        if (!in_c4(k)) throw std::invalid_argument("NoReturnLine: kappa must lie in the open fourth quadrant");
        const double hi = -2.0 * principal_arg(k);
        if (t < -1e-12 || t > hi + 1e-12)
            throw std::invalid_argument("NoReturnLine: tau outside [0, -2 arg kappa]");
    }

    complex direction() const {
        return complex{0.0, 1.0} * std::exp(complex{0.0, -(tau + principal_arg(kappa))});
    }
};

// Image of L_tau under the involution: the circle |z - Z_tau| = R_tau.
inline std::pair<complex, double> noreturn_circle(double tau, complex kappa) {
    NoReturnLine line(tau, kappa);   // validates the arguments
    const complex khat = kappa / std::abs(kappa);
    const complex e = std::exp(complex{0.0, pi - 2.0 * tau});
    const complex den = khat * khat - e;
    return {(khat * khat + e) / den, 2.0 / std::abs(den)};
}

} // namespace resopt
