#pragma once

#include <cmath>
#include <vector>

#include "memlab/brackets.hpp"
#include "memlab/bundle.hpp"
#include "memlab/membrane.hpp"

namespace memlab {

// Amplitude/time change of variables v(t,x) -> eps^2 v(sqrt(eps) t, x).
// Forward maps the rescaled-clock trajectory onto the long physical horizon
// (same sample count, dt divided by sqrt(eps)); backward inverts it exactly.
inline SpacetimeField rescale_forward(const SpacetimeField& v, double epsilon) {
    if (v.snaps.empty()) throw std::invalid_argument("rescale_forward: empty history");
    if (!(epsilon > 0.0 && epsilon <= 1.0))
        throw std::invalid_argument("rescale_forward: epsilon in (0,1] required");
    double se = std::sqrt(epsilon);
    SpacetimeField out;
    out.t0 = v.t0 / se;
    out.dt = v.dt / se;
    out.snaps.reserve(v.nodes());
    for (const auto& s : v.snaps) out.snaps.push_back((epsilon * epsilon) * s);
    return out;
}

inline SpacetimeField rescale_backward(const SpacetimeField& v, double epsilon) {
    if (v.snaps.empty()) throw std::invalid_argument("rescale_backward: empty history");
    if (!(epsilon > 0.0 && epsilon <= 1.0))
        throw std::invalid_argument("rescale_backward: epsilon in (0,1] required");
    double se = std::sqrt(epsilon);
    SpacetimeField out;
    out.t0 = v.t0 * se;
    out.dt = v.dt * se;
    out.snaps.reserve(v.nodes());
    for (const auto& s : v.snaps) out.snaps.push_back((1.0 / (epsilon * epsilon)) * s);
    return out;
}

// Auxiliary unknown W(t,x) = v - v0 - t v1 (zero Cauchy data by construction).
inline SpacetimeField to_W(const SpacetimeField& v, const FieldBundle& v0,
                           const FieldBundle& v1) {
    SpacetimeField out = v;
    for (int j = 0; j < out.nodes(); ++j) {
        out.snaps[j] -= v0;
        axpy(-out.time(j), v1, out.snaps[j]);
    }
    return out;
}

inline SpacetimeField from_W(const SpacetimeField& W, const FieldBundle& v0,
                             const FieldBundle& v1) {
    SpacetimeField out = W;
    for (int j = 0; j < out.nodes(); ++j) {
        out.snaps[j] += v0;
        axpy(out.time(j), v1, out.snaps[j]);
    }
    return out;
}

// u(t) = u0 + int_0^t v.
inline FieldBundle reconstruct_u(const FieldBundle& u0, const SpacetimeField& v, double t) {
    FieldBundle u = u0;
    u += time_integral(v, t);
    return u;
}

struct FactorizationReport {
    Field gamma0;
    MetricField gamma_cd;
    double c0 = 0.0;                      // |d gamma0| <= c0 gamma0
    double g1 = 0.0, g2 = 0.0;            // ellipticity bounds of gamma_cd
    double g3 = 0.0, g4 = 0.0;            // eigen range of d gamma_cd (reported, may be signed)
    double c2 = 0.0;                      // induced Levi constant of gamma(u0)
    bool supplied = false;
    bool ok = true;
    int degenerate_nodes = 0;             // nodes where the extraction was floored
    double product_residual = 0.0;        // |gamma0*gamma_cd - gamma(u0)| for supplied pairs
};

// Degenerate-factorization split gamma(u0)_cd = gamma0(x) gamma_cd(x). When a
// candidate is supplied it is verified; otherwise the heuristic extraction
// gamma0 := min(1, lambda_min(gamma(u0)) / lambda_ref) is used.
inline FactorizationReport factorization_check(const FieldBundle& u0,
                                               const Field* gamma0_supplied = nullptr,
                                               const MetricField* gamma_supplied = nullptr,
                                               double lambda_ref = 1.0) {
    const GridPtr g = u0.grid();
    const auto& gr = *g;
    MetricField gam = induced_metric(u0);
    FactorizationReport rep;
    double floor_tol = 1e-12;

    if (gamma0_supplied && gamma_supplied) {
        rep.supplied = true;
        rep.gamma0 = *gamma0_supplied;
        rep.gamma_cd = *gamma_supplied;
        double res = 0.0;
        for (size_t i = 0; i < gr.size(); ++i) {
            res = std::max(res, std::fabs(rep.gamma0.v[i] * rep.gamma_cd.g11.v[i] - gam.g11.v[i]));
            res = std::max(res, std::fabs(rep.gamma0.v[i] * rep.gamma_cd.g12.v[i] - gam.g12.v[i]));
            res = std::max(res, std::fabs(rep.gamma0.v[i] * rep.gamma_cd.g22.v[i] - gam.g22.v[i]));
        }
        rep.product_residual = res;
    } else {
        rep.gamma0 = gam.min_eigen_field();
        for (auto& x : rep.gamma0.v) x = std::min(1.0, x / lambda_ref);
        rep.gamma_cd = MetricField(g);
        for (size_t i = 0; i < gr.size(); ++i) {
            double d = rep.gamma0.v[i];
            if (d <= floor_tol) {
                ++rep.degenerate_nodes;
                rep.gamma_cd.g11.v[i] = 1.0;
                rep.gamma_cd.g22.v[i] = 1.0;
            } else {
                rep.gamma_cd.g11.v[i] = gam.g11.v[i] / d;
                rep.gamma_cd.g12.v[i] = gam.g12.v[i] / d;
                rep.gamma_cd.g22.v[i] = gam.g22.v[i] / d;
            }
        }
        if (rep.degenerate_nodes > 0) rep.ok = false;  // extraction bypassed at flat nodes
    }

    // c0 over nodes with gamma0 above the floor
    Field d1 = partial_derivative(rep.gamma0, 1);
    Field d2 = partial_derivative(rep.gamma0, 2);
    double scale = std::max(1.0, sup_norm(rep.gamma0));
    for (size_t i = 0; i < gr.size(); ++i) {
        double num = std::max(std::fabs(d1.v[i]), std::fabs(d2.v[i]));
        if (num <= 1e-10 * scale) continue;
        if (rep.gamma0.v[i] <= floor_tol) {
            rep.c0 = std::numeric_limits<double>::infinity();
            rep.ok = false;
            break;
        }
        rep.c0 = std::max(rep.c0, num / rep.gamma0.v[i]);
    }

    rep.gamma_cd.eigen_range(rep.g1, rep.g2);
    {
        MetricField dgam(g);
        double lo1, hi1, lo2, hi2;
        dgam.g11 = partial_derivative(rep.gamma_cd.g11, 1);
        dgam.g12 = partial_derivative(rep.gamma_cd.g12, 1);
        dgam.g22 = partial_derivative(rep.gamma_cd.g22, 1);
        dgam.eigen_range(lo1, hi1);
        dgam.g11 = partial_derivative(rep.gamma_cd.g11, 2);
        dgam.g12 = partial_derivative(rep.gamma_cd.g12, 2);
        dgam.g22 = partial_derivative(rep.gamma_cd.g22, 2);
        dgam.eigen_range(lo2, hi2);
        rep.g3 = std::min(lo1, lo2);
        rep.g4 = std::max(hi1, hi2);
    }

    // induced Levi constant: |d_a gamma(u0)_cd xi xi| <= c2 gamma0 |xi|^2
    for (int axis = 1; axis <= 2; ++axis) {
        MetricField dg(g);
        dg.g11 = partial_derivative(gam.g11, axis);
        dg.g12 = partial_derivative(gam.g12, axis);
        dg.g22 = partial_derivative(gam.g22, axis);
        for (size_t i = 0; i < gr.size(); ++i) {
            double tr = dg.g11.v[i] + dg.g22.v[i];
            double det = dg.g11.v[i] * dg.g22.v[i] - dg.g12.v[i] * dg.g12.v[i];
            double disc = std::sqrt(std::max(0.0, tr * tr / 4.0 - det));
            double rad = std::max(std::fabs(tr / 2.0 - disc), std::fabs(tr / 2.0 + disc));
            if (rad <= 1e-10) continue;
            if (rep.gamma0.v[i] <= floor_tol) {
                rep.c2 = std::numeric_limits<double>::infinity();
                rep.ok = false;
                break;
            }
            rep.c2 = std::max(rep.c2, rad / rep.gamma0.v[i]);
        }
    }
    return rep;
}

}  // namespace memlab
