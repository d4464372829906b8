#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "resopt/extremal.hpp"
#include "resopt/medium.hpp"
#include "resopt/riccati.hpp"
#include "resopt/sphere.hpp"

// Token encoding of extremal trajectories: segments carry the sector index
// and the control sign, markers record where the trajectory meets the real
// axis, the imaginary axis, the no-return line or the poles.  Encoded
// sequences are matched against the admissible symmetric and asymmetric
// families; anything else is validated transition by transition.

namespace resopt {

enum class MarkerClass {
    RealBelowMinusN2,   // (-inf, -n2)
    RealMinusBand,      // [-n2, -n1], endpoint flags refine the brackets
    RealMinusInner,     // (-n1, 0)
    Zero,               // {0}
    RealPlusInner,      // (0, n1)
    RealPlusBand,       // [n1, n2]
    RealAboveN2,        // (n2, +inf)
    Infinity,           // {inf}
    ImagPlus,           // i R+
    ImagMinus,          // i R-
    LineL0,             // turning point off the axes
    StationaryPlus,     // parked at +sqrt(eps)
    StationaryMinus,    // parked at -sqrt(eps)
};

struct StructureToken {
    enum Type { Segment, Marker } type = Segment;
    double s = 0.0;        // segment start / marker position
    int sector = 0;        // segments
    bool high = false;     // segments: control at the upper permittivity
    MarkerClass cls = MarkerClass::Zero;   // markers
    bool at_low = false;   // band markers: sitting on the outer endpoint (+-n2)
    bool at_high = false;  // band markers: sitting on the inner endpoint (+-n1)
    bool stationary = false;   // segment is a parked arc
};

struct StructureCode {
    std::vector<StructureToken> tokens;
    std::string text;          // serialized grammar string
    std::string family;        // matched family name, "E4", "unclassified", ...
    int m1 = 0, m2 = 0;        // repetition counts when the family uses them
    bool valid = false;        // matched a family or passed generic validation
    std::string note;          // offending transition when unclassified
};

namespace detail {

inline std::string marker_text(const StructureToken& t) {
    switch (t.cls) {
        case MarkerClass::RealBelowMinusN2: return "(-inf,-n2)";
        case MarkerClass::RealMinusBand:
            // The grammar writes the attained endpoint closed; an interior
            // point is closed toward -n1 by convention.
            return t.at_low ? "[-n2,-n1)" : "(-n2,-n1]";
        case MarkerClass::RealMinusInner: return "(-n1,0)";
        case MarkerClass::Zero: return "{0}";
        case MarkerClass::RealPlusInner: return "(0,n1)";
        case MarkerClass::RealPlusBand:
            return t.at_low ? "(n1,n2]" : "[n1,n2)";
        case MarkerClass::RealAboveN2: return "(n2,inf)";
        case MarkerClass::Infinity: return "{inf}";
        case MarkerClass::ImagPlus: return "iR+";
        case MarkerClass::ImagMinus: return "iR-";
        case MarkerClass::LineL0: return "L0";
        case MarkerClass::StationaryPlus: return "st(+)";
        case MarkerClass::StationaryMinus: return "st(-)";
    }
    return "?";
}

inline std::string token_text(const StructureToken& t) {
    if (t.type == StructureToken::Marker) return marker_text(t);
    std::string s = std::to_string(t.sector);
    s += t.high ? '+' : '-';
    if (t.stationary) s += '=';
    return s;
}

inline StructureToken classify_real_marker(double v, const ConstraintBox& box, double s) {
    StructureToken t;
    t.type = StructureToken::Marker;
    t.s = s;
    const double tol1 = 1e-9 * box.n1, tol2 = 1e-9 * box.n2;
    const double a = std::fabs(v);
    if (std::fabs(v) <= tol1 * 1e-3) { t.cls = MarkerClass::Zero; return t; }
    const bool neg = v < 0.0;
    const bool on_n1 = std::fabs(a - box.n1) <= tol1;
    const bool on_n2 = std::fabs(a - box.n2) <= tol2;
    if (a < box.n1 && !on_n1) { t.cls = neg ? MarkerClass::RealMinusInner : MarkerClass::RealPlusInner; return t; }
    if (a > box.n2 && !on_n2) { t.cls = neg ? MarkerClass::RealBelowMinusN2 : MarkerClass::RealAboveN2; return t; }
    t.cls = neg ? MarkerClass::RealMinusBand : MarkerClass::RealPlusBand;
    t.at_low = on_n2;
    t.at_high = on_n1;
    return t;
}

// Pattern elements for the family matcher.  A marker element can admit
// several token classes: the grammar's wide intervals like (-n2, 0) overlap
// two of the measured buckets.
struct MarkAlt {
    MarkerClass cls = MarkerClass::Zero;
    int band = 0;   // for band classes: -1 outer endpoint excluded, +1 inner excluded
};

struct PatElem {
    enum Kind { Seg, Mark, Group } kind = Seg;
    std::vector<int> sectors;       // Seg: admissible sector indices
    bool high = false;              // Seg
    std::vector<MarkAlt> marks;     // Mark alternatives
    std::vector<PatElem> body;      // Group
    int m_min = 0;                  // Group
};

inline PatElem seg(int sector, bool high) { return {PatElem::Seg, {sector}, high, {}, {}, 0}; }
inline PatElem seg2(int s1, int s2, bool high) { return {PatElem::Seg, {s1, s2}, high, {}, {}, 0}; }
inline PatElem mark(MarkerClass c, int band = 0) {
    return {PatElem::Mark, {}, false, {{c, band}}, {}, 0};
}
inline PatElem mark_any(std::vector<MarkAlt> alts) {
    return {PatElem::Mark, {}, false, std::move(alts), {}, 0};
}
inline PatElem grp(std::vector<PatElem> body, int m_min = 0) {
    return {PatElem::Group, {}, false, {}, std::move(body), m_min};
}

// Wide grammar intervals.
inline PatElem mark_minus_inner_wide() {    // (-n2, 0)
    return mark_any({{MarkerClass::RealMinusInner, 0}, {MarkerClass::RealMinusBand, -1}});
}
inline PatElem mark_plus_inner_wide() {     // (0, n2)
    return mark_any({{MarkerClass::RealPlusInner, 0}, {MarkerClass::RealPlusBand, -1}});
}
inline PatElem mark_above_n1() {            // (n1, +inf)
    return mark_any({{MarkerClass::RealAboveN2, 0}, {MarkerClass::RealPlusBand, +1}});
}
inline PatElem mark_below_minus_n1() {      // (-inf, -n1)
    return mark_any({{MarkerClass::RealBelowMinusN2, 0}, {MarkerClass::RealMinusBand, +1}});
}

inline bool match_elem(const PatElem& e, const StructureToken& t) {
    if (e.kind == PatElem::Seg) {
        if (t.type != StructureToken::Segment || t.stationary) return false;
        if (t.high != e.high) return false;
        for (int s : e.sectors) if (s == t.sector) return true;
        return false;
    }
    if (t.type != StructureToken::Marker) return false;
    for (const auto& alt : e.marks) {
        if (t.cls != alt.cls) continue;
        if (alt.cls == MarkerClass::RealMinusBand || alt.cls == MarkerClass::RealPlusBand) {
            if (alt.band == -1 && t.at_low) continue;    // outer endpoint excluded
            if (alt.band == +1 && t.at_high) continue;   // inner endpoint excluded
        }
        return true;
    }
    return false;
}

// Recursive matcher with backtracking over group repetition counts.
inline bool match_seq(const std::vector<PatElem>& pat, std::size_t pi,
                      const std::vector<StructureToken>& toks, std::size_t ti,
                      std::vector<int>& counts, std::size_t gslot) {
    if (pi == pat.size()) return ti == toks.size();
    const PatElem& e = pat[pi];
    if (e.kind != PatElem::Group) {
        if (ti >= toks.size() || !match_elem(e, toks[ti])) return false;
        return match_seq(pat, pi + 1, toks, ti + 1, counts, gslot);
    }
    // Try m = m_min, m_min+1, ... while the body keeps matching.
    std::size_t t = ti;
    int m = 0;
    auto body_matches_at = [&](std::size_t pos, std::size_t& next) {
        std::size_t p = pos;
        for (const auto& be : e.body) {
            if (p >= toks.size() || !match_elem(be, toks[p])) return false;
            ++p;
        }
        next = p;
        return true;
    };
    while (true) {
        if (m >= e.m_min) {
            if (gslot < counts.size()) counts[gslot] = m;
            if (match_seq(pat, pi + 1, toks, t, counts, gslot + 1)) return true;
        }
        std::size_t next = 0;
        if (!body_matches_at(t, next)) return false;
        t = next;
        ++m;
    }
}

struct Family {
    std::string name;
    std::vector<PatElem> pat;
};

inline std::vector<Family> symmetric_families() {
    using MC = MarkerClass;
    std::vector<Family> fams;
    // Abnormal, symmetric about the turning point.
    fams.push_back({"E1-onelayer-odd",
        {mark(MC::RealMinusBand, -1), seg(3, true), mark(MC::Infinity), seg(6, true),
         mark(MC::RealPlusBand, -1)}});
    fams.push_back({"E1-onelayer-even",
        {mark(MC::RealMinusBand, +1), seg(4, false), mark(MC::Zero), seg(1, false),
         mark(MC::RealPlusBand, +1)}});
    fams.push_back({"E1-stack-odd",
        {mark(MC::RealMinusBand, -1), seg(3, true),
         grp({mark(MC::RealBelowMinusN2), seg(4, false), mark(MC::RealMinusInner), seg(3, true)}, 1),
         mark(MC::Infinity),
         grp({seg(6, true), mark(MC::RealPlusInner), seg(1, false), mark(MC::RealAboveN2)}, 1),
         seg(6, true), mark(MC::RealPlusBand, -1)}});
    fams.push_back({"E1-stack-even",
        {mark(MC::RealMinusBand, +1), seg(4, false),
         grp({mark(MC::RealMinusInner), seg(3, true), mark(MC::RealBelowMinusN2), seg(4, false)}, 1),
         mark(MC::Zero),
         grp({seg(1, false), mark(MC::RealAboveN2), seg(6, true), mark(MC::RealPlusInner)}, 1),
         seg(1, false), mark(MC::RealPlusBand, +1)}});
    // Normal, symmetric.  Segments adjacent to a pass through infinity also
    // admit the neighbouring quadrant sector (the mode phase jumps there).
    fams.push_back({"E2-NS1",
        {mark(MC::RealMinusBand, -1), seg(3, true),
         grp({seg(3, false), mark_below_minus_n1(), seg(4, false), seg(4, true),
              mark_minus_inner_wide(), seg(3, true)}),
         seg2(3, 4, false), mark(MC::Infinity), seg2(6, 1, false),
         grp({seg(6, true), mark_plus_inner_wide(), seg(1, true), seg(1, false),
              mark_above_n1(), seg(6, false)}),
         seg(6, true), mark(MC::RealPlusBand, -1)}});
    fams.push_back({"E2-NS2",
        {mark(MC::RealMinusBand, -1), seg(3, true), seg(3, false), mark_below_minus_n1(),
         seg(4, false),
         grp({seg(4, true), mark_minus_inner_wide(), seg(3, true), seg(3, false),
              mark_below_minus_n1(), seg(4, false)}),
         seg(4, true), mark(MC::Zero), seg(1, true),
         grp({seg(1, false), mark_above_n1(), seg(6, false), seg(6, true),
              mark_plus_inner_wide(), seg(1, true)}),
         seg(1, false), mark_above_n1(), seg(6, false), seg(6, true),
         mark(MC::RealPlusBand, -1)}});
    fams.push_back({"E2-NS3",
        {mark(MC::RealMinusBand, +1), seg(4, false), seg(4, true), mark_minus_inner_wide(),
         seg(3, true),
         grp({seg(3, false), mark_below_minus_n1(), seg(4, false), seg(4, true),
              mark_minus_inner_wide(), seg(3, true)}),
         seg2(3, 4, false), mark(MC::Infinity), seg2(6, 1, false),
         grp({seg(6, true), mark_plus_inner_wide(), seg(1, true), seg(1, false),
              mark_above_n1(), seg(6, false)}),
         seg(6, true), mark_plus_inner_wide(), seg(1, true), seg(1, false),
         mark(MC::RealPlusBand, +1)}});
    fams.push_back({"E2-NS4",
        {mark(MC::RealMinusBand, +1), seg(4, false),
         grp({seg(4, true), mark_minus_inner_wide(), seg(3, true), seg(3, false),
              mark_below_minus_n1(), seg(4, false)}),
         seg(4, true), mark(MC::Zero), seg(1, true),
         grp({seg(1, false), mark_above_n1(), seg(6, false), seg(6, true),
              mark_plus_inner_wide(), seg(1, true)}),
         seg(1, false), mark(MC::RealPlusBand, +1)}});
    fams.push_back({"E2-NS5",
        {mark(MC::RealMinusBand, -1), seg(3, true),
         grp({seg(3, false), mark_below_minus_n1(), seg(4, false), seg(4, true),
              mark_minus_inner_wide(), seg2(3, 4, true)}),
         mark(MC::Infinity),
         grp({seg2(6, 1, true), mark_plus_inner_wide(), seg(1, true), seg(1, false),
              mark_above_n1(), seg(6, false)}),
         seg2(6, 1, true), mark(MC::RealPlusBand, -1)}});
    fams.push_back({"E2-NS6",
        {mark(MC::RealMinusBand, +1), seg(4, false), seg(4, true), mark_minus_inner_wide(),
         seg(3, true),
         grp({seg(3, false), mark_below_minus_n1(), seg(4, false), seg(4, true),
              mark_minus_inner_wide(), seg2(3, 4, true)}),
         mark(MC::Infinity),
         grp({seg2(6, 1, true), mark_plus_inner_wide(), seg(1, true), seg(1, false),
              mark_above_n1(), seg(6, false)}),
         seg2(6, 1, true), mark_plus_inner_wide(), seg(1, true), seg(1, false),
         mark(MC::RealPlusBand, +1)}});
    return fams;
}

inline std::vector<Family> asymmetric_abnormal_families() {
    using MC = MarkerClass;
    std::vector<Family> fams;
    auto up_group = [] { return grp({seg(3, true), mark(MC::RealBelowMinusN2),
                                     seg(4, false), mark(MC::RealMinusInner)}); };
    auto up_group_r = [] { return grp({seg(4, false), mark(MC::RealMinusInner),
                                       seg(3, true), mark(MC::RealBelowMinusN2)}); };
    auto dn_group = [] { return grp({seg(1, false), mark(MC::RealAboveN2),
                                     seg(6, true), mark(MC::RealPlusInner)}); };
    auto dn_group_r = [] { return grp({seg(6, true), mark(MC::RealPlusInner),
                                       seg(1, false), mark(MC::RealAboveN2)}); };
    fams.push_back({"E3-A1",
        {mark(MC::RealMinusBand, -1), up_group(), seg(3, true), mark(MC::LineL0), seg(2, true),
         mark(MC::ImagPlus), dn_group(), seg(1, false), mark(MC::RealPlusBand, +1)}});
    fams.push_back({"E3-A2",
        {mark(MC::RealMinusBand, -1), up_group(), seg(3, true), mark(MC::LineL0), seg(2, true),
         mark(MC::ImagPlus), dn_group(), seg(1, false), mark(MC::RealAboveN2), seg(6, true),
         mark(MC::RealPlusBand, -1)}});
    fams.push_back({"E3-A3",
        {mark(MC::RealMinusBand, +1), up_group_r(), seg(4, false), mark(MC::RealMinusInner),
         seg(3, true), mark(MC::LineL0), seg(2, true), mark(MC::ImagPlus), dn_group(),
         seg(1, false), mark(MC::RealPlusBand, +1)}});
    fams.push_back({"E3-A4",
        {mark(MC::RealMinusBand, +1), up_group_r(), seg(4, false), mark(MC::RealMinusInner),
         seg(3, true), mark(MC::LineL0), seg(2, true), mark(MC::ImagPlus), dn_group(),
         seg(1, false), mark(MC::RealAboveN2), seg(6, true), mark(MC::RealPlusBand, -1)}});
    fams.push_back({"E3-A5",
        {mark(MC::RealMinusBand, -1), up_group(), seg(3, true), mark(MC::RealBelowMinusN2),
         seg(4, false), mark(MC::ImagMinus), seg(5, true), mark(MC::LineL0), dn_group_r(),
         seg(6, true), mark(MC::RealPlusBand, -1)}});
    fams.push_back({"E3-A6",
        {mark(MC::RealMinusBand, -1), up_group(), seg(3, true), mark(MC::RealBelowMinusN2),
         seg(4, false), mark(MC::ImagMinus), seg(5, true), mark(MC::LineL0), dn_group_r(),
         seg(6, true), mark(MC::RealPlusInner), seg(1, false), mark(MC::RealPlusBand, +1)}});
    fams.push_back({"E3-A7",
        {mark(MC::RealMinusBand, +1), up_group_r(), seg(4, false), mark(MC::ImagMinus),
         seg(5, true), mark(MC::LineL0), dn_group_r(), seg(6, true),
         mark(MC::RealPlusBand, -1)}});
    fams.push_back({"E3-A8",
        {mark(MC::RealMinusBand, +1), up_group_r(), seg(4, false), mark(MC::ImagMinus),
         seg(5, true), mark(MC::LineL0), dn_group_r(), seg(6, true), mark(MC::RealPlusInner),
         seg(1, false), mark(MC::RealPlusBand, +1)}});
    return fams;
}

} // namespace detail

// Tokenize an extremal record: segments between consecutive events carry the
// sector of the arc and the control sign; events are switch points landing on
// an axis, in-layer axis crossings, and the turning point.
inline std::vector<StructureToken> tokenize_structure(const ExtremalRecord& rec,
                                                      const ConstraintBox& box) {
    struct Event { double s; StructureToken tok; bool silent = false; };
    std::vector<Event> events;
    const complex kappa = rec.kappa;
    const double span = rec.span_end - rec.span_begin;
    const double merge_tol = 1e-11 * std::max(span, std::fabs(rec.span_end));

    auto x_marker = [&](const SpherePoint& x, double s) -> std::optional<StructureToken> {
        if (x.is_zero()) { StructureToken t; t.type = StructureToken::Marker; t.cls = MarkerClass::Zero; t.s = s; return t; }
        if (x.is_infinity()) { StructureToken t; t.type = StructureToken::Marker; t.cls = MarkerClass::Infinity; t.s = s; return t; }
        const complex v = x.value();
        if (std::fabs(v.imag()) <= 1e-9 * std::abs(v))
            return detail::classify_real_marker(v.real(), box, s);
        if (std::fabs(v.real()) <= 1e-9 * std::abs(v)) {
            StructureToken t; t.type = StructureToken::Marker; t.s = s;
            t.cls = v.imag() > 0.0 ? MarkerClass::ImagPlus : MarkerClass::ImagMinus;
            return t;
        }
        return std::nullopt;
    };

    // Boundary markers for the span ends when they sit on the real axis.
    {
        const ModeState& first = rec.mode_samples.front();
        if (auto t = x_marker(state_x(first), rec.span_begin)) events.push_back({rec.span_begin, *t});
        const ModeState& last = rec.mode_samples.back();
        if (auto t = x_marker(state_x(last), rec.span_end)) events.push_back({rec.span_end, *t});
    }

    // Switch points: markers only when the switch value sits on an axis
    // (abnormal switches); normal switches still break the segment run.
    for (std::size_t i = 0; i < rec.switch_points.size(); ++i) {
        if (auto t = x_marker(state_x(rec.switch_states[i]), rec.switch_points[i])) {
            events.push_back({rec.switch_points[i], *t});
        } else {
            StructureToken silent;
            silent.type = StructureToken::Marker;
            silent.s = rec.switch_points[i];
            events.push_back({rec.switch_points[i], silent, true});
        }
    }

    // Turning point off the axes: the only place the trajectory meets L0.
    // Turnings through or near the poles are owned by the sharp axis scans
    // (the raw G0 zero is cubic there and its position is soft).
    if (rec.turning_found && rec.turning.p0 > rec.span_begin && rec.turning.p0 < rec.span_end) {
        const SpherePoint xp = rec.turning.x_at_p0.canonical();
        const bool near_pole = std::abs(xp.coord) <= 1e-5 ||
                               std::abs(xp.other_chart().coord) <= 1e-5;
        if (!near_pole) {
            StructureToken t;
            t.type = StructureToken::Marker;
            t.s = rec.turning.p0;
            t.cls = MarkerClass::LineL0;
            events.push_back({t.s, t});
        }
    }

    // In-layer crossings of the real and imaginary axes, scanned between
    // consecutive structural boundaries with the closed-form mode.
    std::vector<double> bounds;
    bounds.push_back(rec.span_begin);
    for (double b : rec.switch_points) bounds.push_back(b);
    bounds.push_back(rec.span_end);

    auto anchor_at = [&](double s) -> ModeState {
        // Nearest recorded state not past s (switch states are exact anchors).
        ModeState best = rec.mode_samples.front();
        for (const auto& m : rec.mode_samples)
            if (m.s <= s + merge_tol && m.s > best.s) best = m;
        for (const auto& m : rec.switch_states)
            if (m.s <= s + merge_tol && m.s > best.s) best = m;
        return best;
    };

    // A crossing of the real (imaginary) axis is classified from the state at
    // the bisected root of the sign function itself; passes within a chart
    // whisker of the poles are the {0} / {inf} markers.
    auto classify_crossing = [&](const ModeState& m, bool real_axis) -> StructureToken {
        const SpherePoint x = state_x(m).canonical();
        const double small = 1e-7;
        if (x.chart == Chart::Inverted && std::abs(x.coord) <= small) {
            StructureToken t; t.type = StructureToken::Marker; t.cls = MarkerClass::Infinity; t.s = m.s;
            return t;
        }
        if (x.chart == Chart::Standard && std::abs(x.coord) <= small) {
            StructureToken t; t.type = StructureToken::Marker; t.cls = MarkerClass::Zero; t.s = m.s;
            return t;
        }
        const complex v = x.value();
        if (real_axis) return detail::classify_real_marker(v.real(), box, m.s);
        StructureToken t;
        t.type = StructureToken::Marker;
        t.s = m.s;
        t.cls = v.imag() > 0.0 ? MarkerClass::ImagPlus : MarkerClass::ImagMinus;
        return t;
    };

    const double same_class_dedup = 1e-6 * span;
    auto push_event = [&](const StructureToken& tok) {
        for (const auto& e : events) {
            if (!e.silent && e.tok.cls == tok.cls && std::fabs(e.s - tok.s) <= same_class_dedup)
                return;
            if (std::fabs(e.s - tok.s) <= merge_tol) return;
        }
        events.push_back({tok.s, tok});
    };

    for (std::size_t bi = 0; bi + 1 < bounds.size(); ++bi) {
        const double a = bounds[bi], b = bounds[bi + 1];
        const double eps = rec.eps_at(0.5 * (a + b));
        ModeState anchor = anchor_at(a);
        anchor = detail::at_offset(anchor, eps, a);
        const double h = half_wave(eps, kappa) / 128.0;
        auto sreal = [&](const ModeState& m) {   // zero exactly on R-hat
            return (m.dy * std::conj(complex{0.0, 1.0} * kappa * m.y)).imag();
        };
        auto simag = [&](const ModeState& m) {   // zero exactly on i R-hat
            return (m.dy * std::conj(complex{0.0, 1.0} * kappa * m.y)).real();
        };
        ModeState prev = anchor;
        double fr = sreal(prev), fi = simag(prev);
        for (double t = a + h; t < b + h; t += h) {
            const double tc = std::min(t, b);
            ModeState cur = detail::at_offset(anchor, eps, tc);
            const double gr = sreal(cur), gi = simag(cur);
            auto bisect = [&](auto&& f, double flo) {
                double lo = prev.s, hi = tc;
                for (int it = 0; it < 80; ++it) {
                    const double mid = 0.5 * (lo + hi);
                    if (mid == lo || mid == hi) break;
                    const double fm = f(detail::at_offset(anchor, eps, mid));
                    if ((fm <= 0.0) == (flo <= 0.0)) { lo = mid; flo = fm; }
                    else hi = mid;
                }
                return 0.5 * (lo + hi);
            };
            if ((fr < 0.0 && gr >= 0.0) || (fr > 0.0 && gr <= 0.0)) {
                const double s0 = bisect(sreal, fr);
                if (s0 > a + merge_tol && s0 < b - merge_tol)
                    push_event(classify_crossing(detail::at_offset(anchor, eps, s0), true));
            }
            if ((fi < 0.0 && gi >= 0.0) || (fi > 0.0 && gi <= 0.0)) {
                const double s0 = bisect(simag, fi);
                if (s0 > a + merge_tol && s0 < b - merge_tol)
                    push_event(classify_crossing(detail::at_offset(anchor, eps, s0), false));
            }
            prev = cur; fr = gr; fi = gi;
            if (tc >= b) break;
        }
    }

    std::sort(events.begin(), events.end(), [](const Event& x, const Event& y) { return x.s < y.s; });

    // Interleave segments between consecutive events.
    std::vector<StructureToken> tokens;
    auto segment_between = [&](double a, double b) -> std::optional<StructureToken> {
        if (b - a <= merge_tol) return std::nullopt;
        StructureToken t;
        t.type = StructureToken::Segment;
        t.s = a;
        const double eps = rec.eps_at(0.5 * (a + b));
        t.high = eps_equal(eps, box.eps2());
        for (const auto& iv : rec.stationary_intervals)
            if (a >= iv.begin - merge_tol && b <= iv.end + merge_tol) t.stationary = true;
        // Sector from an interior probe, stepping aside from boundaries.
        ModeState anchor = anchor_at(a);
        anchor = detail::at_offset(anchor, eps, a);
        for (int probe = 1; probe <= 7; ++probe) {
            const double frac = static_cast<double>(probe) / 8.0;
            ModeState m = detail::at_offset(anchor, eps, a + frac * (b - a));
            SectorResult sr = sector_of(state_x(m), rec.kappa, 1e-12);
            if (!sr.on_boundary) { t.sector = sr.index; return t; }
        }
        t.sector = 0;
        return t;
    };

    double cursor = rec.span_begin;
    for (const auto& e : events) {
        if (auto s = segment_between(cursor, e.s)) tokens.push_back(*s);
        if (!e.silent) tokens.push_back(e.tok);
        cursor = std::max(cursor, e.s);
    }
    if (auto s = segment_between(cursor, rec.span_end)) tokens.push_back(*s);
    return tokens;
}

// Generic admissibility of a token run: every switch between segments of
// opposite sign without an axis marker must obey the sector-switch rule, and
// the no-return crossings must follow the one-way order.
inline std::optional<std::string> generic_violation(const std::vector<StructureToken>& toks) {
    for (std::size_t i = 0; i + 1 < toks.size(); ++i) {
        const auto& a = toks[i];
        const auto& b = toks[i + 1];
        if (a.type == StructureToken::Segment && b.type == StructureToken::Segment) {
            if (a.stationary || b.stationary) continue;
            if (a.high == b.high)
                return "adjacent same-control segments without a crossing marker";
            if (a.sector != b.sector)
                return "control switch across a sector boundary";
            const bool to_low = a.high && !b.high;
            const bool odd_sector = (a.sector == 1 || a.sector == 3 || a.sector == 5);
            if (to_low != odd_sector)
                return "switch direction contradicts the sector rule";
        }
    }
    return std::nullopt;
}

inline StructureCode encode_structure(const ExtremalRecord& rec, const ConstraintBox& box) {
    StructureCode code;
    code.tokens = tokenize_structure(rec, box);

    bool has_stationary = false;
    for (const auto& t : code.tokens) has_stationary |= t.stationary;

    std::vector<int> counts(4, 0);
    if (!has_stationary) {
        auto try_families = [&](const std::vector<detail::Family>& fams) -> bool {
            for (const auto& f : fams) {
                std::fill(counts.begin(), counts.end(), 0);
                if (detail::match_seq(f.pat, 0, code.tokens, 0, counts, 0)) {
                    code.family = f.name;
                    code.m1 = counts[0];
                    code.m2 = counts[1];
                    code.valid = true;
                    return true;
                }
            }
            return false;
        };
        if (!try_families(detail::symmetric_families()))
            try_families(detail::asymmetric_abnormal_families());
    }
    if (code.family.empty()) {
        if (auto v = generic_violation(code.tokens)) {
            code.family = "unclassified";
            code.note = *v;
            code.valid = false;
        } else {
            code.family = has_stationary ? "stationary" : "E4";
            code.valid = true;
        }
    }

    for (std::size_t i = 0; i < code.tokens.size(); ++i) {
        if (i) code.text += ' ';
        code.text += detail::token_text(code.tokens[i]);
    }
    return code;
}

} // namespace resopt
