#pragma once

#include <algorithm>
#include <complex>
#include <vector>

#include "memlab/fft.hpp"
#include "memlab/field.hpp"

namespace memlab {

using Spectrum = std::vector<std::complex<double>>;

// Integer mode of array index a on an n-point axis, k in (-n/2, n/2].
inline int mode_of(int a, int n) { return a <= n / 2 ? a : a - n; }
inline int index_of(int k, int n) { return k >= 0 ? k : k + n; }

// Fourier coefficients f_hat with f(x) = sum_k f_hat_k exp(i kappa . x).
inline Spectrum to_spectrum(const Field& f) {
    const auto& g = *f.grid;
    Spectrum s(g.size());
    for (size_t i = 0; i < s.size(); ++i) s[i] = f.v[i];
    fft::forward(s.data(), g.n1, g.n2);
    double scale = 1.0 / static_cast<double>(g.size());
    for (auto& c : s) c *= scale;
    return s;
}

inline Field from_spectrum(const GridPtr& g, Spectrum s) {
    fft::backward(s.data(), g->n1, g->n2);
    Field f(g);
    for (size_t i = 0; i < s.size(); ++i) f.v[i] = s[i].real();
    return f;
}

// Spectral partial derivative along axis 1 or 2. The Nyquist line of the
// derivative axis is zeroed (its sign is not representable for real data).
inline Field partial_derivative(const Field& f, int axis) {
    const auto& g = *f.grid;
    Spectrum s = to_spectrum(f);
    for (int a1 = 0; a1 < g.n1; ++a1) {
        int k1 = mode_of(a1, g.n1);
        for (int a2 = 0; a2 < g.n2; ++a2) {
            int k2 = mode_of(a2, g.n2);
            double kappa;
            bool nyq;
            if (axis == 1) {
                kappa = g.kappa1(k1);
                nyq = (k1 == g.nyquist1());
            } else {
                kappa = g.kappa2(k2);
                nyq = (k2 == g.nyquist2());
            }
            auto& c = s[g.idx(a1, a2)];
            c = nyq ? std::complex<double>(0.0, 0.0)
                    : std::complex<double>(0.0, kappa) * c;
        }
    }
    return from_spectrum(f.grid, std::move(s));
}

// Sharp Fourier cutoff keeping modes with |k|_inf <= N (integer modes).
inline Field low_pass(const Field& f, int N) {
    if (N < 1) throw std::invalid_argument("low_pass: N >= 1 required");
    const auto& g = *f.grid;
    if (N >= g.nyquist1() && N >= g.nyquist2()) return f;
    Spectrum s = to_spectrum(f);
    for (int a1 = 0; a1 < g.n1; ++a1) {
        int k1 = mode_of(a1, g.n1);
        for (int a2 = 0; a2 < g.n2; ++a2) {
            int k2 = mode_of(a2, g.n2);
            if (std::abs(k1) > N || std::abs(k2) > N) s[g.idx(a1, a2)] = 0.0;
        }
    }
    return from_spectrum(f.grid, std::move(s));
}

// Complement I - Pi_N.
inline Field high_pass(const Field& f, int N) {
    Field lp = low_pass(f, N);
    Field r = f;
    r -= lp;
    return r;
}

// Discrete H^s norm: sqrt( L1 L2 sum_k (1 + |kappa|^2)^s |f_hat_k|^2 ),
// kappa the physical wavenumber vector. Coincides with the unweighted L2
// quadrature norm at s = 0 (Parseval).
inline double sobolev_norm(const Field& f, double s) {
    if (s < 0) throw std::invalid_argument("sobolev_norm: s >= 0 required");
    const auto& g = *f.grid;
    Spectrum sp = to_spectrum(f);
    double acc = 0.0;
    for (int a1 = 0; a1 < g.n1; ++a1) {
        double kap1 = g.kappa1(mode_of(a1, g.n1));
        for (int a2 = 0; a2 < g.n2; ++a2) {
            double kap2 = g.kappa2(mode_of(a2, g.n2));
            double w = std::pow(1.0 + kap1 * kap1 + kap2 * kap2, s);
            acc += w * std::norm(sp[g.idx(a1, a2)]);
        }
    }
    return std::sqrt(acc * g.L1 * g.L2);
}

namespace detail {

// Embed an n-grid spectrum into an m-grid spectrum (m >= n), Nyquist lines
// of the source zeroed so the band is symmetric.
inline Spectrum pad_spectrum(const Spectrum& s, const Grid2D& g, int m1, int m2) {
    Spectrum p(static_cast<size_t>(m1) * m2, 0.0);
    for (int a1 = 0; a1 < g.n1; ++a1) {
        int k1 = mode_of(a1, g.n1);
        if (std::abs(k1) >= g.nyquist1()) continue;
        for (int a2 = 0; a2 < g.n2; ++a2) {
            int k2 = mode_of(a2, g.n2);
            if (std::abs(k2) >= g.nyquist2()) continue;
            p[static_cast<size_t>(index_of(k1, m1)) * m2 + index_of(k2, m2)] =
                s[g.idx(a1, a2)];
        }
    }
    return p;
}

inline Spectrum truncate_spectrum(const Spectrum& p, int m1, int m2, const Grid2D& g) {
    Spectrum s(g.size(), 0.0);
    for (int a1 = 0; a1 < g.n1; ++a1) {
        int k1 = mode_of(a1, g.n1);
        if (std::abs(k1) >= g.nyquist1()) continue;
        for (int a2 = 0; a2 < g.n2; ++a2) {
            int k2 = mode_of(a2, g.n2);
            if (std::abs(k2) >= g.nyquist2()) continue;
            s[g.idx(a1, a2)] = p[static_cast<size_t>(index_of(k1, m1)) * m2 + index_of(k2, m2)];
        }
    }
    return s;
}

}  // namespace detail

// Band-limited samples of a field on the 3/2 zero-padded grid. Products of
// two padded fields are alias-free on the stored band.
struct PaddedField {
    GridPtr grid;     // source grid
    int m1 = 0, m2 = 0;
    std::vector<double> v;  // physical values on the padded grid
};

inline PaddedField pad_field(const Field& f) {
    const auto& g = *f.grid;
    PaddedField p;
    p.grid = f.grid;
    p.m1 = 3 * g.n1 / 2;
    p.m2 = 3 * g.n2 / 2;
    Spectrum sp = detail::pad_spectrum(to_spectrum(f), g, p.m1, p.m2);
    fft::backward(sp.data(), p.m1, p.m2);
    p.v.resize(sp.size());
    for (size_t i = 0; i < sp.size(); ++i) p.v[i] = sp[i].real();
    return p;
}

namespace detail {

inline Field unpad_values(const GridPtr& g, const std::vector<double>& vals, int m1, int m2) {
    Spectrum sp(vals.size());
    for (size_t i = 0; i < sp.size(); ++i) sp[i] = vals[i];
    fft::forward(sp.data(), m1, m2);
    double scale = 1.0 / static_cast<double>(sp.size());
    for (auto& c : sp) c *= scale;
    Spectrum s = detail::truncate_spectrum(sp, m1, m2, *g);
    return from_spectrum(g, std::move(s));
}

}  // namespace detail

// Transform a pointwise product of padded samples back to the source grid,
// truncating to the symmetric band.
inline Field unpad_product(const PaddedField& a, const PaddedField& b) {
    std::vector<double> prod(a.v.size());
    for (size_t i = 0; i < prod.size(); ++i) prod[i] = a.v[i] * b.v[i];
    return detail::unpad_values(a.grid, prod, a.m1, a.m2);
}

// Accumulator of products on the padded grid; one inverse transform per
// accumulated sum instead of one per product.
struct PadAcc {
    GridPtr grid;
    int m1 = 0, m2 = 0;
    std::vector<double> v;

    explicit PadAcc(const GridPtr& g)
        : grid(g), m1(3 * g->n1 / 2), m2(3 * g->n2 / 2),
          v(static_cast<size_t>(m1) * m2, 0.0) {}

    void mac(const PaddedField& a, const PaddedField& b, double c = 1.0) {
        if (c == 1.0) {
            for (size_t i = 0; i < v.size(); ++i) v[i] += a.v[i] * b.v[i];
        } else {
            for (size_t i = 0; i < v.size(); ++i) v[i] += c * a.v[i] * b.v[i];
        }
    }

    Field out() const { return detail::unpad_values(grid, v, m1, m2); }
};

// De-aliased product via 3/2 zero padding.
inline Field multiply_dealiased(const Field& a, const Field& b) {
    return unpad_product(pad_field(a), pad_field(b));
}

// Band-limited interpolation onto a finer grid (same periods).
inline Field prolong(const Field& f, const GridPtr& fine) {
    const auto& g = *f.grid;
    if (fine->n1 < g.n1 || fine->n2 < g.n2)
        throw std::invalid_argument("prolong: target grid must be finer");
    Spectrum p = detail::pad_spectrum(to_spectrum(f), g, fine->n1, fine->n2);
    return from_spectrum(fine, std::move(p));
}

// Pointwise restriction by node sampling (exact for band-limited data).
inline Field restrict_sample(const Field& f, const GridPtr& coarse) {
    const auto& g = *f.grid;
    int r1 = g.n1 / coarse->n1, r2 = g.n2 / coarse->n2;
    if (r1 * coarse->n1 != g.n1 || r2 * coarse->n2 != g.n2)
        throw std::invalid_argument("restrict_sample: grids must nest");
    Field out(coarse);
    for (int i = 0; i < coarse->n1; ++i)
        for (int j = 0; j < coarse->n2; ++j) out.at(i, j) = f.at(i * r1, j * r2);
    return out;
}

// epsilon-conjugation of a symmetric 2x2 coefficient: M_ab = eps^{ac} eps^{bd} S_cd,
// i.e. M11 = S22, M12 = M21 = -S12, M22 = S11.
inline MetricField econj(const MetricField& S) {
    MetricField M(S.g11.grid);
    M.g11 = S.g22;
    M.g22 = S.g11;
    M.g12 = -1.0 * S.g12;
    return M;
}

// Divergence-form operator sum_ab d_a( M_ab d_b phi ) with de-aliased products.
inline Field div_form(const MetricField& M, const Field& phi) {
    Field d1 = partial_derivative(phi, 1);
    Field d2 = partial_derivative(phi, 2);
    Field flux1 = multiply_dealiased(M.g11, d1) + multiply_dealiased(M.g12, d2);
    Field flux2 = multiply_dealiased(M.g12, d1) + multiply_dealiased(M.g22, d2);
    return partial_derivative(flux1, 1) + partial_derivative(flux2, 2);
}

// Same with precomputed gradient components.
inline Field div_form_grad(const MetricField& M, const Field& d1, const Field& d2) {
    Field flux1 = multiply_dealiased(M.g11, d1) + multiply_dealiased(M.g12, d2);
    Field flux2 = multiply_dealiased(M.g12, d1) + multiply_dealiased(M.g22, d2);
    return partial_derivative(flux1, 1) + partial_derivative(flux2, 2);
}

// General (non-symmetric) conjugated divergence form
// sum_ab d_a( eps^{ac} eps^{bd} S_cd d_b phi ):
// M11 = S22, M12 = -S21, M21 = -S12, M22 = S11.
inline Field div_econj_general(const Field& S11, const Field& S12, const Field& S21,
                               const Field& S22, const Field& d1, const Field& d2) {
    Field flux1 = multiply_dealiased(S22, d1) - multiply_dealiased(S21, d2);
    Field flux2 = -1.0 * multiply_dealiased(S12, d1) + multiply_dealiased(S11, d2);
    return partial_derivative(flux1, 1) + partial_derivative(flux2, 2);
}

}  // namespace memlab
