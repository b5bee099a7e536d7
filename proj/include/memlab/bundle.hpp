#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "memlab/field.hpp"
#include "memlab/spectral.hpp"

namespace memlab {

// Transverse map components u^m, m = 1..d-2, sharing one grid.
struct FieldBundle {
    std::vector<Field> comps;

    FieldBundle() = default;
    FieldBundle(const GridPtr& g, int num_components, double fill = 0.0) {
        comps.assign(num_components, Field(g, fill));
    }

    int count() const { return static_cast<int>(comps.size()); }
    GridPtr grid() const { return comps.empty() ? nullptr : comps.front().grid; }
    Field& operator[](int m) { return comps[m]; }
    const Field& operator[](int m) const { return comps[m]; }

    FieldBundle& operator+=(const FieldBundle& o) {
        for (int m = 0; m < count(); ++m) comps[m] += o.comps[m];
        return *this;
    }
    FieldBundle& operator-=(const FieldBundle& o) {
        for (int m = 0; m < count(); ++m) comps[m] -= o.comps[m];
        return *this;
    }
    FieldBundle& operator*=(double a) {
        for (auto& c : comps) c *= a;
        return *this;
    }
};

inline FieldBundle operator+(FieldBundle a, const FieldBundle& b) { return a += b; }
inline FieldBundle operator-(FieldBundle a, const FieldBundle& b) { return a -= b; }
inline FieldBundle operator*(double a, FieldBundle f) { return f *= a; }

inline void axpy(double a, const FieldBundle& x, FieldBundle& y) {
    for (int m = 0; m < y.count(); ++m) axpy(a, x[m], y[m]);
}

inline double sup_norm(const FieldBundle& u) {
    double m = 0.0;
    for (const auto& c : u.comps) m = std::max(m, sup_norm(c));
    return m;
}

inline double l2_norm_weighted(const FieldBundle& u) {
    double s = 0.0;
    for (const auto& c : u.comps) {
        double n = l2_norm_weighted(c);
        s += n * n;
    }
    return std::sqrt(s);
}

inline double sobolev_norm(const FieldBundle& u, double s) {
    double acc = 0.0;
    for (const auto& c : u.comps) {
        double n = sobolev_norm(c, s);
        acc += n * n;
    }
    return std::sqrt(acc);
}

// Uniformly sampled time history of a FieldBundle.
struct SpacetimeField {
    double t0 = 0.0;
    double dt = 0.0;
    std::vector<FieldBundle> snaps;

    int nodes() const { return static_cast<int>(snaps.size()); }
    double t_end() const { return t0 + dt * (nodes() - 1); }
    double time(int j) const { return t0 + dt * j; }
    GridPtr grid() const { return snaps.empty() ? nullptr : snaps.front().grid(); }
    int components() const { return snaps.empty() ? 0 : snaps.front().count(); }

    const FieldBundle& at(int j) const { return snaps[j]; }

    int node_at(double t, double tol = 1e-9) const {
        double r = (t - t0) / dt;
        int j = static_cast<int>(std::lround(r));
        if (j < 0 || j >= nodes() || std::fabs(r - j) > tol)
            throw std::out_of_range("SpacetimeField: t not on the stored grid");
        return j;
    }
};

inline SpacetimeField constant_history(const FieldBundle& f, double t0, double dt, int nodes) {
    SpacetimeField u;
    u.t0 = t0;
    u.dt = dt;
    u.snaps.assign(nodes, f);
    return u;
}

// Trapezoidal integral_0^t of the history; t may fall inside an interval, in
// which case the last piece integrates the linear interpolant. Additive over
// adjacent intervals to roundoff.
inline FieldBundle time_integral(const SpacetimeField& u, double t) {
    if (u.snaps.empty()) throw std::invalid_argument("time_integral: empty history");
    double tol = 1e-9 * std::max(1.0, std::fabs(u.dt));
    if (t < u.t0 - tol || t > u.t_end() + tol)
        throw std::out_of_range("time_integral: t outside stored history");
    FieldBundle acc(u.grid(), u.components());
    double s = u.t0;
    int j = 0;
    while (j + 1 < u.nodes() && s + u.dt <= t + tol) {
        axpy(u.dt / 2.0, u.snaps[j], acc);
        axpy(u.dt / 2.0, u.snaps[j + 1], acc);
        s += u.dt;
        ++j;
    }
    double rem = t - s;
    if (rem > tol) {
        // integral of the linear interpolant over [s, t]
        double th = rem / u.dt;
        FieldBundle a = u.snaps[j];
        FieldBundle b = u.snaps[j + 1];
        axpy(rem * (1.0 - th / 2.0), a, acc);
        axpy(rem * th / 2.0, b, acc);
    }
    return acc;
}

// Discrete time derivative of order 1 or 2 at a node: 2nd-order centered in
// the interior, one-sided at endpoints (3-point fallback for short histories).
inline FieldBundle time_derivative(const SpacetimeField& u, int order, int j) {
    int n = u.nodes();
    double dt = u.dt;
    FieldBundle r(u.grid(), u.components());
    auto add = [&](double c, int k) { axpy(c, u.snaps[k], r); };
    if (order == 1) {
        if (n < 2) throw std::invalid_argument("time_derivative: need >= 2 snapshots");
        if (j > 0 && j + 1 < n) {
            add(-0.5 / dt, j - 1);
            add(0.5 / dt, j + 1);
        } else if (j == 0) {
            if (n >= 3) {
                add(-1.5 / dt, 0);
                add(2.0 / dt, 1);
                add(-0.5 / dt, 2);
            } else {
                add(-1.0 / dt, 0);
                add(1.0 / dt, 1);
            }
        } else {
            if (n >= 3) {
                add(1.5 / dt, n - 1);
                add(-2.0 / dt, n - 2);
                add(0.5 / dt, n - 3);
            } else {
                add(1.0 / dt, n - 1);
                add(-1.0 / dt, n - 2);
            }
        }
        return r;
    }
    if (order == 2) {
        if (n < 3) throw std::invalid_argument("time_derivative: need >= 3 snapshots");
        double c = 1.0 / (dt * dt);
        if (j > 0 && j + 1 < n) {
            add(c, j - 1);
            add(-2.0 * c, j);
            add(c, j + 1);
        } else if (j == 0) {
            if (n >= 4) {
                add(2.0 * c, 0);
                add(-5.0 * c, 1);
                add(4.0 * c, 2);
                add(-1.0 * c, 3);
            } else {
                add(c, 0);
                add(-2.0 * c, 1);
                add(c, 2);
            }
        } else {
            if (n >= 4) {
                add(2.0 * c, n - 1);
                add(-5.0 * c, n - 2);
                add(4.0 * c, n - 3);
                add(-1.0 * c, n - 4);
            } else {
                add(c, n - 1);
                add(-2.0 * c, n - 2);
                add(c, n - 3);
            }
        }
        return r;
    }
    throw std::invalid_argument("time_derivative: order must be 1 or 2");
}

// |||u|||_{l,T} = sup_{[0,T]} sqrt( sum_{i=0}^2 ||d_t^i u||_{H^{l-i}}^2 ).
inline double spacetime_norm(const SpacetimeField& u, double l, double T) {
    if (l < 2) throw std::invalid_argument("spacetime_norm: l >= 2 required");
    if (u.nodes() < 3) throw std::invalid_argument("spacetime_norm: need >= 3 snapshots");
    double tol = 1e-9 * std::max(1.0, u.dt);
    if (T > u.t_end() + tol) throw std::out_of_range("spacetime_norm: T beyond history");
    int jmax = std::min(u.nodes() - 1,
                        static_cast<int>(std::floor((T - u.t0) / u.dt + tol)));
    double best = 0.0;
    for (int j = 0; j <= jmax; ++j) {
        double a0 = sobolev_norm(u.snaps[j], l);
        double a1 = sobolev_norm(time_derivative(u, 1, j), l - 1);
        double a2 = sobolev_norm(time_derivative(u, 2, j), l - 2);
        best = std::max(best, a0 * a0 + a1 * a1 + a2 * a2);
    }
    return std::sqrt(best);
}

// L2 norm over [0,T] x M (trapezoid in time, sqrt(w)-weighted in space).
inline double spacetime_l2(const SpacetimeField& u, double T) {
    double tol = 1e-9 * std::max(1.0, u.dt);
    int jmax = std::min(u.nodes() - 1,
                        static_cast<int>(std::floor((T - u.t0) / u.dt + tol)));
    double acc = 0.0;
    for (int j = 0; j <= jmax; ++j) {
        double nj = l2_norm_weighted(u.snaps[j]);
        double wgt = (j == 0 || j == jmax) ? 0.5 : 1.0;
        acc += wgt * nj * nj * u.dt;
    }
    return std::sqrt(acc);
}

}  // namespace memlab
