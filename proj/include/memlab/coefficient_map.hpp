#pragma once

#include <memory>
#include <sstream>
#include <vector>

#include "memlab/degenerate_wave.hpp"
#include "memlab/membrane.hpp"

namespace memlab {

struct FactorizationViolation : std::domain_error {
    using std::domain_error::domain_error;
};

// Validate the degenerate-factorization hypotheses on the supplied pair:
// 0 <= gamma0 <= 1, |d_a gamma0| <= c0 gamma0 (finite c0), gamma_x elliptic.
// Returns the fitted c0; throws with the offending nodes otherwise.
inline double validate_factorization(const Field& gamma0, const MetricField& gamma_x,
                                     double tol = 1e-10) {
    const auto& g = *gamma0.grid;
    std::vector<size_t> offenders;
    for (size_t i = 0; i < g.size(); ++i)
        if (gamma0.v[i] < -tol || gamma0.v[i] > 1.0 + tol) offenders.push_back(i);
    if (!offenders.empty()) {
        std::ostringstream os;
        os << "gamma0 outside [0,1] at " << offenders.size() << " nodes, first at index "
           << offenders.front();
        throw FactorizationViolation(os.str());
    }
    Field d1 = partial_derivative(gamma0, 1);
    Field d2 = partial_derivative(gamma0, 2);
    double scale = std::max(1.0, sup_norm(gamma0));
    double c0 = 0.0;
    for (size_t i = 0; i < g.size(); ++i) {
        double num = std::max(std::fabs(d1.v[i]), std::fabs(d2.v[i]));
        if (num <= tol * scale) continue;
        if (gamma0.v[i] <= tol) {
            std::ostringstream os;
            os << "|d gamma0| <= c0 gamma0 fails at node " << i << " (gamma0 ~ 0, |d gamma0| = "
               << num << ")";
            throw FactorizationViolation(os.str());
        }
        c0 = std::max(c0, num / gamma0.v[i]);
    }
    double lo, hi;
    gamma_x.eigen_range(lo, hi);
    if (!(lo > 0.0))
        throw FactorizationViolation("gamma_x is not elliptic (min eigenvalue " +
                                     std::to_string(lo) + ")");
    return c0;
}

// Pack the linearized membrane operator around a base trajectory into the
// degenerate-model coefficients:
//   varrho  = gamma0
//   rho     = eps^{-1} econj(gamma_x)            (principal, Levi-compatible)
//   B_a     = -eps^{-1} (d_b gamma0) G_{ba}      (from the gamma0 split)
//   rho2(t) = eps^2 econj( sym. diagonal memory coefficients of dF )
//   f(t)    = eps^3 leading first-order memory coefficient of the B-block
// The remaining (off-diagonal / memory-of-h) pieces of eps^2 dF are not
// inverted by the solver; the iteration accounts for them exactly in its
// residual bookkeeping.
inline DegenerateCoefficients map_membrane_to_toy(const std::vector<NodePack>& v_stream,
                                                  const MembraneOperator& op, double epsilon,
                                                  const Field& gamma0,
                                                  const MetricField& gamma_x) {
    validate_factorization(gamma0, gamma_x);
    const GridPtr& g = op.grid;
    DegenerateCoefficients c = DegenerateCoefficients::make(g);
    c.varrho = gamma0;
    double inv_eps = 1.0 / epsilon;
    MetricField G = econj(gamma_x);
    c.rho.g11 = inv_eps * G.g11;
    c.rho.g12 = inv_eps * G.g12;
    c.rho.g22 = inv_eps * G.g22;

    Field dg1 = partial_derivative(gamma0, 1);
    Field dg2 = partial_derivative(gamma0, 2);
    // B_a = -(d_b gamma0) rho_{ba}; enters the equation as +B_a d_a h.
    Field B1 = -1.0 * (multiply_dealiased(dg1, c.rho.g11) + multiply_dealiased(dg2, c.rho.g12));
    Field B2 = -1.0 * (multiply_dealiased(dg1, c.rho.g12) + multiply_dealiased(dg2, c.rho.g22));
    if (sup_norm(B1) > 0.0 || sup_norm(B2) > 0.0) c.set_B(B1, B2);

    if (!v_stream.empty()) {
        double e2 = epsilon * epsilon;
        auto rho2 = std::make_shared<std::vector<MetricField>>();
        auto fn = std::make_shared<std::vector<std::array<Field, 2>>>();
        rho2->reserve(v_stream.size());
        fn->reserve(v_stream.size());
        for (const auto& p : v_stream) {
            // symmetric diagonal divergence coefficient:
            // S_cd = sum_n [ g0_c^n J_d(v_n) + g0_d^n J_c(v_n) + eps J_c(v^n) J_d(v_n) ]
            MetricField S(g);
            for (int n = 0; n < op.nc; ++n) {
                S.g11 += 2.0 * multiply_dealiased(op.g01[n], p.J1[n]);
                S.g22 += 2.0 * multiply_dealiased(op.g02[n], p.J2[n]);
                S.g12 += multiply_dealiased(op.g01[n], p.J2[n]) +
                         multiply_dealiased(op.g02[n], p.J1[n]);
                S.g11 += epsilon * multiply_dealiased(p.J1[n], p.J1[n]);
                S.g12 += epsilon * multiply_dealiased(p.J1[n], p.J2[n]);
                S.g22 += epsilon * multiply_dealiased(p.J2[n], p.J2[n]);
            }
            MetricField M = econj(S);
            M.g11 *= e2;
            M.g12 *= e2;
            M.g22 *= e2;
            rho2->push_back(std::move(M));

            // leading first-order memory coefficient (per memory axis c):
            //   f_c = -+2 eps^3 [ d_1( w^{-1} J_(3-c)(v^n) d_2 v_n )
            //                    - d_2( w^{-1} J_(3-c)(v^n) d_1 v_n ) ]
            Field a1c1(g), a2c1(g), a1c2(g), a2c2(g);
            for (int n = 0; n < op.nc; ++n) {
                Field dv1 = partial_derivative(p.val[n], 1);
                Field dv2 = partial_derivative(p.val[n], 2);
                Field J2n = p.J2[n], J1n = p.J1[n];
                if (op.has_K) {
                    J2n = hadamard(J2n, op.inv_w);
                    J1n = hadamard(J1n, op.inv_w);
                }
                a1c1 += multiply_dealiased(J2n, dv2);
                a2c1 += multiply_dealiased(J2n, dv1);
                a1c2 += multiply_dealiased(J1n, dv2);
                a2c2 += multiply_dealiased(J1n, dv1);
            }
            double e3 = e2 * epsilon;
            Field f1 = (-2.0 * e3) * (partial_derivative(a1c1, 1) - partial_derivative(a2c1, 2));
            Field f2 = (2.0 * e3) * (partial_derivative(a1c2, 1) - partial_derivative(a2c2, 2));
            fn->push_back({std::move(f1), std::move(f2)});
        }
        c.rho2_nodes = rho2;
        c.f_nodes = fn;
        c.has_f = true;
    }
    return c;
}

inline DegenerateCoefficients map_membrane_to_toy(const SpacetimeField& v_hist,
                                                  const FieldBundle& u0, double epsilon,
                                                  const Field& gamma0,
                                                  const MetricField& gamma_x) {
    MembraneOperator op = MembraneOperator::build(u0, nullptr);
    auto stream = memory_stream(v_hist);
    return map_membrane_to_toy(stream, op, epsilon, gamma0, gamma_x);
}

}  // namespace memlab
