#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "resopt/medium.hpp"
#include "resopt/riccati.hpp"
#include "resopt/sphere.hpp"

// Coarse dynamic-programming oracle for the minimum-time problem: value
// iteration on a two-chart grid covering the sphere, with the exact
// constant-control flow as the one-step propagator.  Meant for few-percent
// cross-checks of the shooting results, not precision.

namespace resopt {

struct SphereGrid {
    int n = 201;                 // nodes per side and chart
    double extent = 1.05;        // chart square [-extent, extent]^2

    double h() const { return 2.0 * extent / (n - 1); }
    complex node(int i, int j) const {
        return {-extent + h() * static_cast<double>(i), -extent + h() * static_cast<double>(j)};
    }
    std::size_t idx(int i, int j) const {
        return static_cast<std::size_t>(i) * static_cast<std::size_t>(n) + static_cast<std::size_t>(j);
    }

    // Chart coordinate of a sphere point inside this grid, if any.
    std::optional<complex> coord_in_chart(const SpherePoint& p, int chart) const {
        SpherePoint q = p.canonical();
        complex z;
        if ((q.chart == Chart::Standard) == (chart == 0)) z = q.coord;
        else {
            SpherePoint o = q.other_chart();
            if (!std::isfinite(o.coord.real()) || !std::isfinite(o.coord.imag())) return std::nullopt;
            z = o.coord;
        }
        if (std::fabs(z.real()) > extent || std::fabs(z.imag()) > extent) return std::nullopt;
        return z;
    }
};

struct ValueField {
    SphereGrid grid;
    std::array<std::vector<double>, 2> values;   // per chart, row-major
    SpherePoint target;
    complex kappa{1.0, -1.0};
    int sweeps = 0;

    // Bilinear lookup, minimized over the charts containing the point.
    double value_at(const SpherePoint& p) const {
        double best = std::numeric_limits<double>::infinity();
        for (int c = 0; c < 2; ++c) {
            auto z = grid.coord_in_chart(p, c);
            if (!z) continue;
            const double fx = (z->real() + grid.extent) / grid.h();
            const double fy = (z->imag() + grid.extent) / grid.h();
            int i = std::min(grid.n - 2, std::max(0, static_cast<int>(fx)));
            int j = std::min(grid.n - 2, std::max(0, static_cast<int>(fy)));
            const double tx = fx - i, ty = fy - j;
            const double v00 = values[c][grid.idx(i, j)];
            const double v10 = values[c][grid.idx(i + 1, j)];
            const double v01 = values[c][grid.idx(i, j + 1)];
            const double v11 = values[c][grid.idx(i + 1, j + 1)];
            if (!std::isfinite(v00) || !std::isfinite(v10) || !std::isfinite(v01) || !std::isfinite(v11))
                continue;
            const double v = (1 - tx) * (1 - ty) * v00 + tx * (1 - ty) * v10 +
                             (1 - tx) * ty * v01 + tx * ty * v11;
            best = std::min(best, v);
        }
        return best;
    }
};

// Discrete minimum-time fixed point: V(x) = min over the two extreme
// controls of dt + V(flow(x, eps, dt)), with the target cell clamped to zero
// and overlap values reconciled by the cross-chart minimum each lookup.
inline ValueField value_iteration(const SphereGrid& grid, const SpherePoint& target,
                                  complex kappa, const ConstraintBox& box, double dt,
                                  int max_sweeps = 100000) {
    if (!in_c4(kappa)) throw std::invalid_argument("value_iteration: kappa must lie in the open fourth quadrant");
    const double hw_fast = half_wave(box.eps2(), kappa);
    if (!(dt > 0.0) || dt > 0.02 * hw_fast)
        throw std::invalid_argument("value_iteration: dt must lie in (0, 0.02 half-waves of the fast material]");

    ValueField f;
    f.grid = grid;
    f.target = target.canonical();
    f.kappa = kappa;
    const std::size_t cells = static_cast<std::size_t>(grid.n) * static_cast<std::size_t>(grid.n);
    f.values[0].assign(cells, std::numeric_limits<double>::infinity());
    f.values[1].assign(cells, std::numeric_limits<double>::infinity());

    // Exact one-step endpoints for both controls, precomputed per node.
    const double eps_opt[2] = {box.eps1(), box.eps2()};
    std::array<std::vector<SpherePoint>, 2> end1, end2;
    for (int c = 0; c < 2; ++c) {
        end1[c].resize(cells);
        end2[c].resize(cells);
        for (int i = 0; i < grid.n; ++i) {
            for (int j = 0; j < grid.n; ++j) {
                const SpherePoint p{c == 0 ? Chart::Standard : Chart::Inverted, grid.node(i, j)};
                end1[c][grid.idx(i, j)] = flow_const(p, eps_opt[0], kappa, dt);
                end2[c][grid.idx(i, j)] = flow_const(p, eps_opt[1], kappa, dt);
            }
        }
    }

    // Pin the corners of every cell containing the target.
    std::vector<std::pair<int, std::size_t>> pinned;
    for (int c = 0; c < 2; ++c) {
        auto z = grid.coord_in_chart(f.target, c);
        if (!z) continue;
        const double fx = (z->real() + grid.extent) / grid.h();
        const double fy = (z->imag() + grid.extent) / grid.h();
        const int i = std::min(grid.n - 2, std::max(0, static_cast<int>(fx)));
        const int j = std::min(grid.n - 2, std::max(0, static_cast<int>(fy)));
        pinned.push_back({c, grid.idx(i, j)});
        pinned.push_back({c, grid.idx(i + 1, j)});
        pinned.push_back({c, grid.idx(i, j + 1)});
        pinned.push_back({c, grid.idx(i + 1, j + 1)});
    }
    if (pinned.empty()) throw std::invalid_argument("value_iteration: target outside the grid");
    for (auto& [c, k] : pinned) f.values[c][k] = 0.0;

    std::array<std::vector<double>, 2> next = f.values;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double change = 0.0;
        for (int c = 0; c < 2; ++c) {
            for (std::size_t k = 0; k < cells; ++k) {
                const double v1 = f.value_at(end1[c][k]);
                const double v2 = f.value_at(end2[c][k]);
                double v = dt + std::min(v1, v2);
                v = std::min(v, f.values[c][k]);   // monotone non-increasing
                next[c][k] = v;
                if (std::isfinite(v) && std::isfinite(f.values[c][k]))
                    change = std::max(change, f.values[c][k] - v);
                else if (std::isfinite(v) != std::isfinite(f.values[c][k]))
                    change = std::max(change, dt);
            }
        }
        for (auto& [c, k] : pinned) next[c][k] = 0.0;
        f.values[0].swap(next[0]);
        f.values[1].swap(next[1]);
        f.sweeps = sweep + 1;
        if (change <= dt * 1e-3) return f;
    }
    throw std::runtime_error("value_iteration: no convergence within the sweep budget");
}

struct HjbComparison {
    double value = 0.0;
    double expected = 0.0;
    double rel_dev = 0.0;
    bool pass = false;
};

inline HjbComparison compare_with_shooting(const ValueField& field, const SpherePoint& start,
                                           double expected, double tol = 0.05) {
    HjbComparison cmp;
    cmp.value = field.value_at(start);
    cmp.expected = expected;
    if (!std::isfinite(cmp.value))
        throw std::runtime_error("compare_with_shooting: start outside grid coverage");
    cmp.rel_dev = std::fabs(cmp.value - expected) / std::fabs(expected);
    cmp.pass = cmp.rel_dev <= tol;
    return cmp;
}

} // namespace resopt
