#pragma once

#include <utility>

#include "memlab/bundle.hpp"
#include "memlab/field.hpp"
#include "memlab/spectral.hpp"

namespace memlab {

// Poisson bracket {f,g} = w^{-1/2} eps^{ab} d_a f d_b g. The two cross terms
// are the same de-aliased products in both operand orders, so antisymmetry
// holds to the last bit.
inline Field poisson_bracket(const Field& f, const Field& g) {
    Field t1 = multiply_dealiased(partial_derivative(f, 1), partial_derivative(g, 2));
    Field t2 = multiply_dealiased(partial_derivative(f, 2), partial_derivative(g, 1));
    Field r = t1 - t2;
    if (!f.grid->unit_w) {
        for (size_t i = 0; i < r.v.size(); ++i) r.v[i] *= f.grid->inv_sqrt_w[i];
    }
    return r;
}

// Cyclic sum {{f,g},h} + {{g,h},f} + {{h,f},g}.
inline Field jacobi_residual(const Field& f, const Field& g, const Field& h) {
    return poisson_bracket(poisson_bracket(f, g), h) +
           poisson_bracket(poisson_bracket(g, h), f) +
           poisson_bracket(poisson_bracket(h, f), g);
}

// Induced metric gamma_cd = sum_m d_c u^m d_d u^m.
inline MetricField induced_metric(const FieldBundle& u) {
    MetricField g(u.grid());
    for (int m = 0; m < u.count(); ++m) {
        Field d1 = partial_derivative(u[m], 1);
        Field d2 = partial_derivative(u[m], 2);
        g.g11 += multiply_dealiased(d1, d1);
        g.g12 += multiply_dealiased(d1, d2);
        g.g22 += multiply_dealiased(d2, d2);
    }
    return g;
}

// Membrane right-hand side {{u^m,u^n},u_n} via nested brackets.
inline FieldBundle membrane_rhs(const FieldBundle& u) {
    FieldBundle r(u.grid(), u.count());
    for (int m = 0; m < u.count(); ++m)
        for (int n = 0; n < u.count(); ++n)
            if (n != m)  // {u^m,u^m} = 0 identically
                r[m] += poisson_bracket(poisson_bracket(u[m], u[n]), u[n]);
    return r;
}

// The same operator in local coordinates:
//   w^{-1} ( eps^{ac} eps^{bd} gamma_cd d_a d_b u^m
//            - eps^{ac} eps^{bd} d_c u^m d_d u^n d_a d_b u_n )
//   + w^{-1/2} (d_a w^{-1/2}) eps^{ab} eps^{cd} gamma_bd d_c u^m.
// The trailing first-order term is the expanded form of the lower-order part;
// it vanishes for w == 1.
inline FieldBundle membrane_rhs_local(const FieldBundle& u) {
    const GridPtr gp = u.grid();
    const auto& g = *gp;
    int nc = u.count();
    MetricField gam = induced_metric(u);
    MetricField M = econj(gam);  // M_ab = eps^{ac} eps^{bd} gamma_cd

    std::vector<Field> d1(nc), d2(nc), d11(nc), d12(nc), d22(nc);
    for (int m = 0; m < nc; ++m) {
        d1[m] = partial_derivative(u[m], 1);
        d2[m] = partial_derivative(u[m], 2);
        d11[m] = partial_derivative(d1[m], 1);
        d12[m] = partial_derivative(d1[m], 2);
        d22[m] = partial_derivative(d2[m], 2);
    }

    FieldBundle r(gp, nc);
    for (int m = 0; m < nc; ++m) {
        Field principal = multiply_dealiased(M.g11, d11[m]) +
                          2.0 * multiply_dealiased(M.g12, d12[m]) +
                          multiply_dealiased(M.g22, d22[m]);
        // - eps^{ac} eps^{bd} d_c u^m d_d u^n d_a d_b u_n, summed over n:
        // P_cd := d_c u^m d_d u^n contracted against the conjugated Hessian of u_n.
        Field cross(gp);
        for (int n = 0; n < nc; ++n) {
            // eps^{ac} eps^{bd} S_cd A_ab with S_cd = d_c u^m d_d u^n and
            // A_ab = d_a d_b u_n equals S22 A11 - 2 S12sym A12 + S11 A22 with
            // proper index bookkeeping: contribution =
            //   S_22 A_11 - S_21 A_12 - S_12 A_21 + S_11 A_22.
            Field s11 = multiply_dealiased(d1[m], d1[n]);
            Field s12 = multiply_dealiased(d1[m], d2[n]);
            Field s21 = multiply_dealiased(d2[m], d1[n]);
            Field s22 = multiply_dealiased(d2[m], d2[n]);
            cross += multiply_dealiased(s22, d11[n]) - multiply_dealiased(s21, d12[n]) -
                     multiply_dealiased(s12, d12[n]) + multiply_dealiased(s11, d22[n]);
        }
        Field val = principal - cross;
        if (!g.unit_w) {
            for (size_t i = 0; i < val.v.size(); ++i) val.v[i] *= 1.0 / g.w[i];
        }
        r[m] = std::move(val);
    }

    if (!g.unit_w) {
        // lower-order term: w^{-1/2}(d_a w^{-1/2}) eps^{ab} eps^{cd} gamma_bd d_c u^m
        Field s(gp);
        for (size_t i = 0; i < s.v.size(); ++i) s.v[i] = g.inv_sqrt_w[i];
        Field sa1 = partial_derivative(s, 1);
        Field sa2 = partial_derivative(s, 2);
        // eps^{ab} eps^{cd} gamma_bd: a,c free. Expanding the symbols:
        // (a=1): b=2; (a=2): b=1 with sign -1; (c=1): d=2; (c=2): d=1 with -1.
        // coeff(a,c) = sign_a sign_c gamma_{b(a) d(c)}.
        auto gam_bd = [&](int a, int c) {
            int b = (a == 1) ? 2 : 1;
            int d = (c == 1) ? 2 : 1;
            double sign = ((a == 1) ? 1.0 : -1.0) * ((c == 1) ? 1.0 : -1.0);
            return std::make_pair(sign, &gam.comp(b, d));
        };
        for (int m = 0; m < nc; ++m) {
            Field lot(gp);
            for (int a = 1; a <= 2; ++a) {
                const Field& sa = (a == 1) ? sa1 : sa2;
                Field ssa = hadamard(s, sa);
                for (int c = 1; c <= 2; ++c) {
                    auto [sign, gbd] = gam_bd(a, c);
                    const Field& dc = (c == 1) ? d1[m] : d2[m];
                    Field term = multiply_dealiased(*gbd, dc);
                    axpy(sign, hadamard(ssa, term), lot);
                }
            }
            r[m] += lot;
        }
    }
    return r;
}

// Constraint residual sum_m {v^m, u^m}.
inline Field constraint_residual(const FieldBundle& v, const FieldBundle& u) {
    Field r(u.grid());
    for (int m = 0; m < u.count(); ++m) r += poisson_bracket(v[m], u[m]);
    return r;
}

struct CompatibilityResiduals {
    Field first;         // sum_m {v0^m, u0^m}
    FieldBundle second;  // v1^m - {{u0^m,u0^n},u0_n}
};

inline CompatibilityResiduals initial_data_compatibility(const FieldBundle& u0,
                                                         const FieldBundle& v0,
                                                         const FieldBundle& v1) {
    CompatibilityResiduals r{constraint_residual(v0, u0), v1 - membrane_rhs(u0)};
    return r;
}

// Builder for the second compatibility condition: v1 := {{u0^m,u0^n},u0_n}.
inline FieldBundle build_compatible_v1(const FieldBundle& u0) { return membrane_rhs(u0); }

// Reduced Hamiltonian with the gauge multiplier term set to zero:
// H = int sqrt(w)/4 ( 2 p_m p^m / w + {u^m,u^n}{u_m,u_n} ).
inline double reduced_hamiltonian(const FieldBundle& u, const FieldBundle& p) {
    const auto& g = *u.grid();
    Field dens(u.grid());
    for (int m = 0; m < u.count(); ++m)
        for (size_t i = 0; i < dens.v.size(); ++i)
            dens.v[i] += 2.0 * p[m].v[i] * p[m].v[i] / g.w[i];
    // bracket energy counts each unordered pair once
    for (int m = 0; m < u.count(); ++m)
        for (int n = m + 1; n < u.count(); ++n) {
            Field b = poisson_bracket(u[m], u[n]);
            for (size_t i = 0; i < dens.v.size(); ++i) dens.v[i] += b.v[i] * b.v[i];
        }
    dens *= 0.25;
    return integral_weighted(dens);
}

}  // namespace memlab
