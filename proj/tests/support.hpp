#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "memlab/bundle.hpp"
#include "memlab/field.hpp"
#include "memlab/spectral.hpp"

namespace memlab::testing {

// Real random field supported on integer modes kmin <= |k|_inf <= kmax with a
// Gaussian spectral envelope exp(-(|k|/sigma)^2). Built directly in spectrum
// space with Hermitian symmetry.
inline Field random_band_field(const GridPtr& g, int kmin, int kmax, std::mt19937_64& rng,
                               double sigma = 0.0) {
    std::normal_distribution<double> dist(0.0, 1.0);
    Spectrum s(g->size(), 0.0);
    for (int k1 = -kmax; k1 <= kmax; ++k1) {
        for (int k2 = -kmax; k2 <= kmax; ++k2) {
            int ki = std::max(std::abs(k1), std::abs(k2));
            if (ki < kmin || ki > kmax) continue;
            if (k1 < 0 || (k1 == 0 && k2 < 0)) continue;  // half-space; mirror below
            if (std::abs(k1) >= g->nyquist1() || std::abs(k2) >= g->nyquist2()) continue;
            double amp = 1.0;
            if (sigma > 0.0) {
                double kk = std::sqrt(double(k1) * k1 + double(k2) * k2);
                amp = std::exp(-(kk / sigma) * (kk / sigma));
            }
            std::complex<double> z(dist(rng), dist(rng));
            z *= amp;
            if (k1 == 0 && k2 == 0) z = std::real(z);
            s[size_t(index_of(k1, g->n1)) * g->n2 + index_of(k2, g->n2)] = z;
            s[size_t(index_of(-k1, g->n1)) * g->n2 + index_of(-k2, g->n2)] = std::conj(z);
        }
    }
    return from_spectrum(g, std::move(s));
}

inline FieldBundle random_band_bundle(const GridPtr& g, int nc, int kmin, int kmax,
                                      std::mt19937_64& rng, double sigma = 0.0) {
    FieldBundle b(g, nc);
    for (int m = 0; m < nc; ++m) b[m] = random_band_field(g, kmin, kmax, rng, sigma);
    return b;
}

// Independent second-order centered finite difference on the same grid.
inline Field fd2_derivative(const Field& f, int axis) {
    const auto& g = *f.grid;
    Field r(f.grid);
    for (int i = 0; i < g.n1; ++i) {
        int ip = (i + 1) % g.n1, im = (i - 1 + g.n1) % g.n1;
        for (int j = 0; j < g.n2; ++j) {
            int jp = (j + 1) % g.n2, jm = (j - 1 + g.n2) % g.n2;
            if (axis == 1)
                r.at(i, j) = (f.at(ip, j) - f.at(im, j)) / (2.0 * g.dx1());
            else
                r.at(i, j) = (f.at(i, jp) - f.at(i, jm)) / (2.0 * g.dx2());
        }
    }
    return r;
}

// Least-squares slope of log(y) against log(x).
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = static_cast<int>(x.size());
    for (int i = 0; i < n; ++i) {
        double lx = std::log(x[i]), ly = std::log(y[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

inline double rel_diff(double a, double b) {
    return std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), 1e-300});
}

inline double rel_sup(const Field& a, const Field& b) {
    Field d = a - b;
    return sup_norm(d) / std::max(1e-300, std::max(sup_norm(a), sup_norm(b)));
}

}  // namespace memlab::testing
