#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace memlab {

inline constexpr double two_pi = 2.0 * std::numbers::pi_v<double>;

// Antisymmetric symbol with eps(1,2) = +1 (axes are 1-based).
inline constexpr double eps_symbol(int a, int b) {
    if (a == 1 && b == 2) return 1.0;
    if (a == 2 && b == 1) return -1.0;
    return 0.0;
}

inline bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

// Periodic N1 x N2 discretization of the flat 2-torus. Row-major storage,
// index(i1, i2) = i1 * n2 + i2, node positions x_a = i_a * L_a / n_a.
// w is the volume-form factor (integrals carry sqrt(w)); defaults to 1.
struct Grid2D {
    int n1 = 0, n2 = 0;
    double L1 = two_pi, L2 = two_pi;
    std::vector<double> w;        // > 0 everywhere
    std::vector<double> sqrt_w;
    std::vector<double> inv_sqrt_w;
    bool unit_w = true;

    size_t size() const { return static_cast<size_t>(n1) * n2; }
    int idx(int i1, int i2) const { return i1 * n2 + i2; }
    double dx1() const { return L1 / n1; }
    double dx2() const { return L2 / n2; }
    double cell_area() const { return dx1() * dx2(); }
    double x1(int i1) const { return i1 * dx1(); }
    double x2(int i2) const { return i2 * dx2(); }
    int nyquist1() const { return n1 / 2; }
    int nyquist2() const { return n2 / 2; }
    // physical wavenumber of integer mode k along each axis
    double kappa1(int k) const { return two_pi * k / L1; }
    double kappa2(int k) const { return two_pi * k / L2; }
};

using GridPtr = std::shared_ptr<const Grid2D>;

inline GridPtr make_grid(int n1, int n2, double L1 = two_pi, double L2 = two_pi,
                         const std::function<double(double, double)>& w_fn = {}) {
    if (!is_power_of_two(n1) || !is_power_of_two(n2))
        throw std::invalid_argument("Grid2D: n1, n2 must be powers of two");
    if (L1 <= 0 || L2 <= 0) throw std::invalid_argument("Grid2D: periods must be positive");
    auto g = std::make_shared<Grid2D>();
    g->n1 = n1;
    g->n2 = n2;
    g->L1 = L1;
    g->L2 = L2;
    g->w.assign(g->size(), 1.0);
    if (w_fn) {
        g->unit_w = true;
        for (int i = 0; i < n1; ++i)
            for (int j = 0; j < n2; ++j) {
                double v = w_fn(g->x1(i), g->x2(j));
                if (!(v > 0.0)) throw std::invalid_argument("Grid2D: w must be positive");
                g->w[g->idx(i, j)] = v;
                if (v != 1.0) g->unit_w = false;
            }
    }
    g->sqrt_w.resize(g->size());
    g->inv_sqrt_w.resize(g->size());
    for (size_t i = 0; i < g->size(); ++i) {
        g->sqrt_w[i] = std::sqrt(g->w[i]);
        g->inv_sqrt_w[i] = 1.0 / g->sqrt_w[i];
    }
    return g;
}

// Real scalar function on a Grid2D. Value semantics; operations build new fields.
struct Field {
    GridPtr grid;
    std::vector<double> v;

    Field() = default;
    explicit Field(GridPtr g, double fill = 0.0) : grid(std::move(g)), v(grid->size(), fill) {}
    Field(GridPtr g, std::vector<double> data) : grid(std::move(g)), v(std::move(data)) {
        if (v.size() != grid->size()) throw std::invalid_argument("Field: size mismatch");
    }

    double& at(int i1, int i2) { return v[grid->idx(i1, i2)]; }
    double at(int i1, int i2) const { return v[grid->idx(i1, i2)]; }
    size_t size() const { return v.size(); }

    bool finite() const {
        for (double x : v)
            if (!std::isfinite(x)) return false;
        return true;
    }

    Field& operator+=(const Field& o) {
        for (size_t i = 0; i < v.size(); ++i) v[i] += o.v[i];
        return *this;
    }
    Field& operator-=(const Field& o) {
        for (size_t i = 0; i < v.size(); ++i) v[i] -= o.v[i];
        return *this;
    }
    Field& operator*=(double a) {
        for (double& x : v) x *= a;
        return *this;
    }
};

inline Field operator+(Field a, const Field& b) { return a += b; }
inline Field operator-(Field a, const Field& b) { return a -= b; }
inline Field operator*(double a, Field f) { return f *= a; }

inline void axpy(double a, const Field& x, Field& y) {
    for (size_t i = 0; i < y.v.size(); ++i) y.v[i] += a * x.v[i];
}

// Pointwise product; aliasing not controlled. Spectral code paths use
// multiply_dealiased from spectral.hpp instead.
inline Field hadamard(const Field& a, const Field& b) {
    Field r(a.grid);
    for (size_t i = 0; i < r.v.size(); ++i) r.v[i] = a.v[i] * b.v[i];
    return r;
}

inline Field sample(const GridPtr& g, const std::function<double(double, double)>& f) {
    Field r(g);
    for (int i = 0; i < g->n1; ++i)
        for (int j = 0; j < g->n2; ++j) r.at(i, j) = f(g->x1(i), g->x2(j));
    return r;
}

// Field from external data: rejects non-finite entries.
inline Field field_from_data(const GridPtr& g, std::vector<double> data) {
    Field f(g, std::move(data));
    if (!f.finite()) throw std::invalid_argument("Field: non-finite values rejected");
    return f;
}

inline double sup_norm(const Field& f) {
    double m = 0.0;
    for (double x : f.v) m = std::max(m, std::fabs(x));
    return m;
}

// sqrt(w)-weighted L2 quadrature norm.
inline double l2_norm_weighted(const Field& f) {
    const auto& g = *f.grid;
    double s = 0.0;
    for (size_t i = 0; i < f.v.size(); ++i) s += f.v[i] * f.v[i] * g.sqrt_w[i];
    return std::sqrt(s * g.cell_area());
}

inline double integral_weighted(const Field& f) {
    const auto& g = *f.grid;
    double s = 0.0;
    for (size_t i = 0; i < f.v.size(); ++i) s += f.v[i] * g.sqrt_w[i];
    return s * g.cell_area();
}

// Symmetric 2x2 field of metric coefficients.
struct MetricField {
    Field g11, g12, g22;

    MetricField() = default;
    explicit MetricField(const GridPtr& g) : g11(g), g12(g), g22(g) {}

    const Field& comp(int c, int d) const {
        if (c == 1 && d == 1) return g11;
        if (c == 2 && d == 2) return g22;
        return g12;
    }

    void eigen_range(double& lo, double& hi) const {
        lo = std::numeric_limits<double>::infinity();
        hi = -lo;
        for (size_t i = 0; i < g11.v.size(); ++i) {
            double tr = g11.v[i] + g22.v[i];
            double det = g11.v[i] * g22.v[i] - g12.v[i] * g12.v[i];
            double disc = std::sqrt(std::max(0.0, tr * tr / 4.0 - det));
            lo = std::min(lo, tr / 2.0 - disc);
            hi = std::max(hi, tr / 2.0 + disc);
        }
    }

    Field min_eigen_field() const {
        Field r(g11.grid);
        for (size_t i = 0; i < g11.v.size(); ++i) {
            double tr = g11.v[i] + g22.v[i];
            double det = g11.v[i] * g22.v[i] - g12.v[i] * g12.v[i];
            double disc = std::sqrt(std::max(0.0, tr * tr / 4.0 - det));
            r.v[i] = tr / 2.0 - disc;
        }
        return r;
    }
};

}  // namespace memlab
