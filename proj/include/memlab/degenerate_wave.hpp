#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "memlab/bundle.hpp"
#include "memlab/field.hpp"
#include "memlab/membrane.hpp"
#include "memlab/spectral.hpp"

namespace memlab {

struct CflViolation : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct SolverFailure : std::runtime_error {
    double blowup_time;
    SolverFailure(const std::string& msg, double t) : std::runtime_error(msg), blowup_time(t) {}
};
struct ResidualTooLarge : std::runtime_error {
    using std::runtime_error::runtime_error;
};

using ForcingFn = std::function<FieldBundle(int node, double t)>;

// Coefficients of the degenerate linear model
//   d_tt h - sigma (varrho + delta) d_a(rho_ab(t) d_b h) - d_a(rho2_ab(t) d_b h)
//          + B_a d_a h - eps f_a int_0^t d_a h = g,
// applied per component of a bundle. rho may carry a scalar time modulation;
// rho2/f may be sampled per node (used by the membrane coefficient map).
struct DegenerateCoefficients {
    GridPtr grid;
    Field varrho;                // degeneracy factor, in [0,1] before regularization
    MetricField rho;             // nondegenerate SPD part
    std::function<double(double)> rho_scale;  // default 1
    std::array<Field, 2> B;      // first-order coefficients (empty fields = absent)
    std::array<Field, 2> f_mem;  // memory coefficients
    double epsilon = 1.0;        // weight of the memory term
    double principal_scale = 1.0;
    double delta = 0.0;          // applied regularization (diagnostic)
    std::shared_ptr<const std::vector<MetricField>> rho2_nodes;
    std::shared_ptr<const std::vector<std::array<Field, 2>>> f_nodes;
    ForcingFn forcing;

    bool has_B = false;
    bool has_f = false;

    double rho_scale_at(double t) const { return rho_scale ? rho_scale(t) : 1.0; }

    static DegenerateCoefficients make(const GridPtr& g) {
        DegenerateCoefficients c;
        c.grid = g;
        c.varrho = Field(g, 1.0);
        c.rho = MetricField(g);
        c.rho.g11 = Field(g, 1.0);
        c.rho.g22 = Field(g, 1.0);
        return c;
    }

    void set_B(const Field& b1, const Field& b2) {
        B = {b1, b2};
        has_B = true;
    }
    void set_f(const Field& f1, const Field& f2) {
        f_mem = {f1, f2};
        has_f = true;
    }
};

// Levi constant: smallest c5 with |B_b - varrho sum_a d_a rho_ab| <= c5 varrho
// pointwise; +infinity where the factor degenerates against a live numerator.
inline double check_levi(const DegenerateCoefficients& c, double zero_tol = 1e-12) {
    const auto& g = *c.grid;
    Field drho1 = partial_derivative(c.rho.g11, 1) + partial_derivative(c.rho.g12, 2);
    Field drho2 = partial_derivative(c.rho.g12, 1) + partial_derivative(c.rho.g22, 2);
    double scale = std::max({sup_norm(drho1), sup_norm(drho2),
                             c.has_B ? sup_norm(c.B[0]) : 0.0,
                             c.has_B ? sup_norm(c.B[1]) : 0.0, 1.0});
    double c5 = 0.0;
    for (size_t i = 0; i < g.size(); ++i) {
        for (int b = 0; b < 2; ++b) {
            double Bb = c.has_B ? c.B[b].v[i] : 0.0;
            double da = (b == 0 ? drho1.v[i] : drho2.v[i]);
            double num = std::fabs(Bb - c.varrho.v[i] * da);
            if (num <= zero_tol * scale) continue;
            if (c.varrho.v[i] <= zero_tol) return std::numeric_limits<double>::infinity();
            c5 = std::max(c5, num / c.varrho.v[i]);
        }
    }
    return c5;
}

// varrho -> varrho + delta (strictly hyperbolic regularization).
inline DegenerateCoefficients regularize(const DegenerateCoefficients& c, double delta) {
    if (!(delta > 0.0)) throw std::invalid_argument("regularize: delta > 0 required");
    DegenerateCoefficients r = c;
    for (auto& x : r.varrho.v) x += delta;
    r.delta += delta;
    return r;
}

namespace detail_wave {

struct RhoBounds {
    double eig_hi = 0.0;     // max eigenvalue of rho
    double scale_hi = 1.0;   // max |rho_scale| over [0,T]
    double varrho_hi = 0.0;
};

inline RhoBounds rho_bounds(const DegenerateCoefficients& c, double T) {
    RhoBounds b;
    double lo;
    c.rho.eigen_range(lo, b.eig_hi);
    b.varrho_hi = sup_norm(c.varrho);
    if (c.rho_scale) {
        for (int i = 0; i <= 64; ++i)
            b.scale_hi = std::max(b.scale_hi, std::fabs(c.rho_scale(T * i / 64.0)));
    }
    return b;
}

}  // namespace detail_wave

inline double cfl_dt_max(const DegenerateCoefficients& c, double T, double safety = 0.45) {
    auto b = detail_wave::rho_bounds(c, T);
    double speed2 = c.principal_scale * b.varrho_hi * b.eig_hi * b.scale_hi;
    if (c.rho2_nodes && !c.rho2_nodes->empty()) {
        double lo, hi;
        (*c.rho2_nodes)[0].eigen_range(lo, hi);
        speed2 += std::fabs(hi);
    }
    double dx = std::min(c.grid->dx1(), c.grid->dx2());
    if (speed2 <= 0.0) return safety * dx;  // memory/first-order dynamics only
    return safety * dx / std::sqrt(speed2);
}

// Solver right-hand side (everything except d_tt and the forcing), evaluated
// from the state and its memory integrals. The time stepper and the residual
// bookkeeping both call this.
inline FieldBundle solver_rhs(const DegenerateCoefficients& c, const FieldBundle& h,
                              const std::array<FieldBundle, 2>& J, int node, double t) {
    const GridPtr& g = c.grid;
    int nc = h.count();
    double rs = c.rho_scale_at(t);
    FieldBundle out(g, nc);
    for (int m = 0; m < nc; ++m) {
        Field d1 = partial_derivative(h[m], 1);
        Field d2 = partial_derivative(h[m], 2);
        // sigma (varrho) div(rho grad h): varrho already carries the regularization
        Field flux1 = multiply_dealiased(c.rho.g11, d1) + multiply_dealiased(c.rho.g12, d2);
        Field flux2 = multiply_dealiased(c.rho.g12, d1) + multiply_dealiased(c.rho.g22, d2);
        if (rs != 1.0) {
            flux1 *= rs;
            flux2 *= rs;
        }
        flux1 = multiply_dealiased(c.varrho, flux1);
        flux2 = multiply_dealiased(c.varrho, flux2);
        Field acc = partial_derivative(flux1, 1) + partial_derivative(flux2, 2);
        if (c.principal_scale != 1.0) acc *= c.principal_scale;
        if (c.rho2_nodes) {
            const MetricField& r2 = (*c.rho2_nodes)[node];
            acc += div_form_grad(r2, d1, d2);
        }
        if (c.has_B) {
            acc -= multiply_dealiased(c.B[0], d1) + multiply_dealiased(c.B[1], d2);
        }
        if (c.f_nodes) {
            const auto& fn = (*c.f_nodes)[node];
            acc += c.epsilon * (multiply_dealiased(fn[0], J[0][m]) +
                                multiply_dealiased(fn[1], J[1][m]));
        } else if (c.has_f) {
            acc += c.epsilon * (multiply_dealiased(c.f_mem[0], J[0][m]) +
                                multiply_dealiased(c.f_mem[1], J[1][m]));
        }
        out[m] = std::move(acc);
    }
    return out;
}

// Explicit second-order (leapfrog) march of the first-order system
// (h, dt h, memory). Refuses the step size above the CFL bound; aborts on
// non-finite values with the detection time.
inline SpacetimeField solve_linear(const DegenerateCoefficients& c, const FieldBundle& h0,
                                   const FieldBundle& h1, double T, double dt,
                                   double cfl_safety = 0.45) {
    double dt_max = cfl_dt_max(c, T, cfl_safety);
    if (dt > dt_max)
        throw CflViolation("solve_linear: dt " + std::to_string(dt) + " exceeds CFL bound " +
                           std::to_string(dt_max));
    const GridPtr& g = c.grid;
    int nc = h0.count();
    int steps = static_cast<int>(std::lround(T / dt));
    SpacetimeField out;
    out.t0 = 0.0;
    out.dt = dt;
    out.snaps.reserve(steps + 1);

    std::array<FieldBundle, 2> J{FieldBundle(g, nc), FieldBundle(g, nc)};
    auto grad_bundle = [&](const FieldBundle& u, int axis) {
        FieldBundle d(g, nc);
        for (int m = 0; m < nc; ++m) d[m] = partial_derivative(u[m], axis);
        return d;
    };
    auto forcing_at = [&](int node, double t) {
        return c.forcing ? c.forcing(node, t) : FieldBundle(g, nc);
    };

    FieldBundle hprev = h0;
    FieldBundle rhs0 = solver_rhs(c, h0, J, 0, 0.0) + forcing_at(0, 0.0);
    FieldBundle hcur = h0;
    axpy(dt, h1, hcur);
    axpy(dt * dt / 2.0, rhs0, hcur);
    out.snaps.push_back(h0);
    out.snaps.push_back(hcur);
    FieldBundle d1p = grad_bundle(h0, 1), d2p = grad_bundle(h0, 2);
    FieldBundle d1c = grad_bundle(hcur, 1), d2c = grad_bundle(hcur, 2);
    advance_memory(J[0], dt, d1p, d1c);
    advance_memory(J[1], dt, d2p, d2c);

    for (int n = 1; n < steps; ++n) {
        double t = n * dt;
        FieldBundle rhs = solver_rhs(c, hcur, J, n, t) + forcing_at(n, t);
        FieldBundle hnext = 2.0 * hcur - hprev;
        axpy(dt * dt, rhs, hnext);
        if (n % 16 == 0 || n + 1 == steps) {
            for (const auto& comp : hnext.comps)
                if (!comp.finite())
                    throw SolverFailure("solve_linear: non-finite state", t + dt);
        }
        FieldBundle d1n = grad_bundle(hnext, 1), d2n = grad_bundle(hnext, 2);
        advance_memory(J[0], dt, d1c, d1n);
        advance_memory(J[1], dt, d2c, d2n);
        d1c = std::move(d1n);
        d2c = std::move(d2n);
        hprev = std::move(hcur);
        hcur = std::move(hnext);
        out.snaps.push_back(hcur);
    }
    return out;
}

// Interior-node residual of the discrete equation (zero to roundoff on
// stepper output when the same forcing is supplied).
inline double discrete_residual_sup(const DegenerateCoefficients& c, const SpacetimeField& h) {
    auto packs = memory_stream(h);
    double worst = 0.0;
    for (int n = 1; n + 1 < h.nodes(); ++n) {
        double t = h.time(n);
        FieldBundle acc = time_derivative(h, 2, n);
        std::array<FieldBundle, 2> J{packs[n].J1, packs[n].J2};
        acc -= solver_rhs(c, h.snaps[n], J, n, t);
        if (c.forcing) acc -= c.forcing(n, t);
        worst = std::max(worst, sup_norm(acc));
    }
    return worst;
}

// Pointwise-in-x auxiliary ODE family  y'' - y' - y = g  with the same
// explicit second-order discretization.
inline SpacetimeField auxiliary_tilde_solve(const ForcingFn& g_fn, const FieldBundle& h0,
                                            const FieldBundle& h1, double T, double dt) {
    const GridPtr& g = h0.grid();
    int nc = h0.count();
    int steps = static_cast<int>(std::lround(T / dt));
    SpacetimeField out;
    out.t0 = 0.0;
    out.dt = dt;
    auto forcing_at = [&](int node, double t) {
        return g_fn ? g_fn(node, t) : FieldBundle(g, nc);
    };
    FieldBundle hprev = h0;
    FieldBundle acc0 = forcing_at(0, 0.0) + h0;
    axpy(1.0, h1, acc0);  // y''(0) = y'(0) + y(0) + g(0)
    FieldBundle hcur = h0;
    axpy(dt, h1, hcur);
    axpy(dt * dt / 2.0, acc0, hcur);
    out.snaps.push_back(h0);
    out.snaps.push_back(hcur);
    double a = 1.0 / (dt * dt) - 1.0 / (2.0 * dt);
    for (int n = 1; n < steps; ++n) {
        double t = n * dt;
        FieldBundle rhs = forcing_at(n, t);
        FieldBundle hnext(g, nc);
        axpy(2.0 / (dt * dt), hcur, hnext);
        axpy(-1.0 / (dt * dt) - 1.0 / (2.0 * dt), hprev, hnext);
        axpy(1.0, hcur, hnext);
        axpy(1.0, rhs, hnext);
        hnext *= 1.0 / a;
        hprev = std::move(hcur);
        hcur = std::move(hnext);
        out.snaps.push_back(hcur);
    }
    return out;
}

// phi weight in the energy functional: explicit field, unit, or varrho^{-1}.
struct PhiUnit {};
struct PhiInverseVarrho {};
using PhiSpec = std::variant<PhiUnit, PhiInverseVarrho, Field>;

namespace detail_wave {

inline Field phi_field(const PhiSpec& phi, const DegenerateCoefficients& c) {
    if (std::holds_alternative<PhiUnit>(phi)) return Field(c.grid, 1.0);
    if (std::holds_alternative<PhiInverseVarrho>(phi)) {
        Field r(c.grid);
        for (size_t i = 0; i < r.v.size(); ++i) {
            double x = c.varrho.v[i];
            if (!(x > 0.0))
                throw std::domain_error("phi = varrho^{-1} requires varrho > 0 (regularize first)");
            r.v[i] = 1.0 / x;
        }
        return r;
    }
    return std::get<Field>(phi);
}

// spatial integrand  phi (h_t^2 + varrho rho_ab d_a h d_b h + h^2) sqrt(w)
inline double energy_slice(const SpacetimeField& h, const DegenerateCoefficients& c,
                           const Field& phi, int node) {
    const auto& g = *c.grid;
    double t = h.time(node);
    double rs = c.rho_scale_at(t);
    FieldBundle ht = time_derivative(h, 1, node);
    double acc = 0.0;
    for (int m = 0; m < h.components(); ++m) {
        Field d1 = partial_derivative(h.snaps[node][m], 1);
        Field d2 = partial_derivative(h.snaps[node][m], 2);
        for (size_t i = 0; i < g.size(); ++i) {
            double quad = c.rho.g11.v[i] * d1.v[i] * d1.v[i] +
                          2.0 * c.rho.g12.v[i] * d1.v[i] * d2.v[i] +
                          c.rho.g22.v[i] * d2.v[i] * d2.v[i];
            double e = ht[m].v[i] * ht[m].v[i] + c.varrho.v[i] * rs * quad +
                       h.snaps[node][m].v[i] * h.snaps[node][m].v[i];
            acc += phi.v[i] * e * g.sqrt_w[i];
        }
    }
    return acc * g.cell_area();
}

}  // namespace detail_wave

// int_{[0,t] x M} e^{-lambda s} phi (h_s^2 + varrho rho dh dh + h^2) sqrt(w),
// trapezoidal in time, grid quadrature in space.
inline double weighted_energy(const SpacetimeField& h, const DegenerateCoefficients& c,
                              const PhiSpec& phi, double lambda, double t) {
    Field phif = detail_wave::phi_field(phi, c);
    int jmax = h.node_at(t);
    double acc = 0.0;
    for (int j = 0; j <= jmax; ++j) {
        double w = (j == 0 || j == jmax) ? 0.5 : 1.0;
        acc += w * h.dt * std::exp(-lambda * h.time(j)) *
               detail_wave::energy_slice(h, c, phif, j);
    }
    return acc;
}

enum class EnergyLemma { lemma2_3, lemma2_4, lemma2_5, lemma2_6 };

struct EnergyMargin {
    std::string name;
    double lhs = 0.0, rhs = 0.0, margin = 0.0;
};

struct EnergyReport {
    EnergyLemma which;
    double lambda = 0.0;
    double lambda0 = std::numeric_limits<double>::quiet_NaN();  // empirical threshold
    std::map<std::string, double> constants;
    std::vector<EnergyMargin> margins;
    bool pass = false;
    double residual_presolve = 0.0;
};

struct EnergyAuditOptions {
    double configured_c = 50.0;   // constant the inequality is checked against
    double sobolev_s = 2.0;       // index for the lemma2_6 form
    double residual_tol = 1e-6;   // pre-check on the discrete residual
    bool find_lambda0 = false;    // bisect the empirical threshold
    double lambda_hi = 64.0;
};

namespace detail_wave {

struct Quadratures {
    double bulk_e = 0.0;      // intint e^{-l t} (h_t^2 + varrho rho dh dh + h^2), phi-weighted
    double bulk_flat = 0.0;   // intint e^{-l t} (h_t^2 + |Dh|^2 + h^2)
    double data_e = 0.0;      // t = 0 slice, phi-weighted
    double data5 = 0.0;       // int (h0^2 + h1^2 + |Dh0|^2 + |Dh1|^2)
    double force_e = 0.0;     // intint e^{-l t} phi (eps f^2 J^2 + g^2)
    double g2 = 0.0;          // intint e^{-l t} (g^2 + |Dg|^2)
    double fJ2 = 0.0;         // intint e^{-l t} f^2 J^2
};

inline double l2sq_weighted(const Field& f) {
    double n = l2_norm_weighted(f);
    return n * n;
}

inline Quadratures collect(const SpacetimeField& h, const DegenerateCoefficients& c,
                           const Field& phi, double lambda) {
    const auto& g = *c.grid;
    Quadratures q;
    auto packs = memory_stream(h);
    int nmax = h.nodes() - 1;
    for (int j = 0; j <= nmax; ++j) {
        double t = h.time(j);
        double wt = ((j == 0 || j == nmax) ? 0.5 : 1.0) * h.dt;
        double el = std::exp(-lambda * t);
        FieldBundle ht = time_derivative(h, 1, j);
        FieldBundle gt = c.forcing ? c.forcing(j, t) : FieldBundle(c.grid, h.components());
        double rs = c.rho_scale_at(t);
        double slice_e = 0.0, slice_flat = 0.0, slice_force = 0.0, slice_g2 = 0.0,
               slice_fJ = 0.0;
        for (int m = 0; m < h.components(); ++m) {
            Field d1 = partial_derivative(h.snaps[j][m], 1);
            Field d2 = partial_derivative(h.snaps[j][m], 2);
            Field dg1 = partial_derivative(gt[m], 1);
            Field dg2 = partial_derivative(gt[m], 2);
            for (size_t i = 0; i < g.size(); ++i) {
                double quad = c.rho.g11.v[i] * d1.v[i] * d1.v[i] +
                              2.0 * c.rho.g12.v[i] * d1.v[i] * d2.v[i] +
                              c.rho.g22.v[i] * d2.v[i] * d2.v[i];
                double hv = h.snaps[j][m].v[i], htv = ht[m].v[i];
                double sw = g.sqrt_w[i];
                slice_e += phi.v[i] * (htv * htv + c.varrho.v[i] * rs * quad + hv * hv) * sw;
                slice_flat +=
                    (htv * htv + d1.v[i] * d1.v[i] + d2.v[i] * d2.v[i] + hv * hv) * sw;
                double f1 = c.has_f ? c.f_mem[0].v[i] : 0.0;
                double f2 = c.has_f ? c.f_mem[1].v[i] : 0.0;
                double J1 = packs[j].J1[m].v[i], J2 = packs[j].J2[m].v[i];
                double fJ = f1 * f1 * J1 * J1 + f2 * f2 * J2 * J2;
                double gv = gt[m].v[i];
                slice_force += phi.v[i] * (c.epsilon * fJ + gv * gv) * sw;
                slice_fJ += fJ * sw;
                slice_g2 += (gv * gv + dg1.v[i] * dg1.v[i] + dg2.v[i] * dg2.v[i]) * sw;
            }
        }
        double ca = g.cell_area();
        q.bulk_e += wt * el * slice_e * ca;
        q.bulk_flat += wt * el * slice_flat * ca;
        q.force_e += wt * el * slice_force * ca;
        q.g2 += wt * el * slice_g2 * ca;
        q.fJ2 += wt * el * slice_fJ * ca;
        if (j == 0) {
            q.data_e = slice_e * ca;
            double d5 = 0.0;
            FieldBundle h1 = time_derivative(h, 1, 0);
            for (int m = 0; m < h.components(); ++m) {
                d5 += l2sq_weighted(h.snaps[0][m]) + l2sq_weighted(h1[m]);
                d5 += l2sq_weighted(partial_derivative(h.snaps[0][m], 1));
                d5 += l2sq_weighted(partial_derivative(h.snaps[0][m], 2));
                d5 += l2sq_weighted(partial_derivative(h1[m], 1));
                d5 += l2sq_weighted(partial_derivative(h1[m], 2));
            }
            q.data5 = d5;
        }
    }
    return q;
}

}  // namespace detail_wave

// Evaluate both sides of the chosen weighted energy inequality on a computed
// solution; fits the smallest admissible constant and (optionally) bisects
// the empirical lambda threshold.
inline EnergyReport verify_energy_inequality(const SpacetimeField& sol,
                                             const DegenerateCoefficients& c, EnergyLemma which,
                                             double lambda,
                                             const EnergyAuditOptions& opt = {}) {
    EnergyReport rep;
    rep.which = which;
    rep.lambda = lambda;
    double scale = 0.0;
    for (const auto& s : sol.snaps) scale = std::max(scale, sup_norm(s));
    rep.residual_presolve = discrete_residual_sup(c, sol);
    if (rep.residual_presolve > opt.residual_tol * std::max(1.0, scale))
        throw ResidualTooLarge("verify_energy_inequality: trajectory does not solve the system "
                               "(residual " +
                               std::to_string(rep.residual_presolve) + ")");

    PhiSpec phi = PhiUnit{};
    if (which == EnergyLemma::lemma2_4) phi = PhiInverseVarrho{};
    Field phif = detail_wave::phi_field(phi, c);

    auto margin_at = [&](double lam) -> std::pair<double, EnergyMargin> {
        auto q = detail_wave::collect(sol, c, phif, lam);
        EnergyMargin m;
        double cfit = 0.0;
        switch (which) {
            case EnergyLemma::lemma2_3:
            case EnergyLemma::lemma2_4: {
                // (lam - c) bulk <= data + force
                m.name = which == EnergyLemma::lemma2_3 ? "E2-4" : "E2-17";
                m.lhs = (lam - opt.configured_c) * q.bulk_e;
                m.rhs = q.data_e + q.force_e;
                cfit = lam - (q.data_e + q.force_e) / std::max(q.bulk_e, 1e-300);
                break;
            }
            case EnergyLemma::lemma2_5: {
                // lam bulk <= c (data5 + g2 + eps fJ2)
                m.name = "E2-26";
                m.lhs = lam * q.bulk_flat;
                m.rhs = opt.configured_c * (q.data5 + q.g2 + c.epsilon * q.fJ2);
                cfit = lam * q.bulk_flat /
                       std::max(q.data5 + q.g2 + c.epsilon * q.fJ2, 1e-300);
                break;
            }
            case EnergyLemma::lemma2_6: {
                m.name = "E2-28";
                double T = sol.t_end();
                double lhs = spacetime_norm(sol, opt.sobolev_s, T);
                double nh0 = sobolev_norm(sol.snaps[0], opt.sobolev_s);
                double nh1 = sobolev_norm(time_derivative(sol, 1, 0), opt.sobolev_s);
                SpacetimeField gf;
                gf.t0 = sol.t0;
                gf.dt = sol.dt;
                for (int j = 0; j < sol.nodes(); ++j)
                    gf.snaps.push_back(c.forcing ? c.forcing(j, sol.time(j))
                                                 : FieldBundle(c.grid, sol.components()));
                double ng = spacetime_norm(gf, opt.sobolev_s, T);
                m.lhs = lhs;
                m.rhs = opt.configured_c * (nh0 + nh1 + ng);
                cfit = lhs / std::max(nh0 + nh1 + ng, 1e-300);
                break;
            }
        }
        m.margin = m.rhs - m.lhs;
        return {cfit, m};
    };

    auto [cfit, margin] = margin_at(lambda);
    rep.constants["c_fit"] = cfit;
    rep.constants["c_configured"] = opt.configured_c;
    rep.margins.push_back(margin);
    rep.pass = margin.margin >= 0.0;

    if (opt.find_lambda0 && which != EnergyLemma::lemma2_6) {
        // smallest lambda at which the configured-constant inequality holds
        double lo = 1e-3, hi = opt.lambda_hi;
        auto holds = [&](double lam) { return margin_at(lam).second.margin >= 0.0; };
        if (holds(lo)) {
            rep.lambda0 = lo;
        } else if (!holds(hi)) {
            rep.lambda0 = std::numeric_limits<double>::infinity();
        } else {
            for (int it = 0; it < 48; ++it) {
                double mid = 0.5 * (lo + hi);
                (holds(mid) ? hi : lo) = mid;
            }
            rep.lambda0 = hi;
        }
        if (std::isfinite(rep.lambda0)) {
            auto sweep = {0.5 * rep.lambda0, rep.lambda0, 2.0 * rep.lambda0};
            for (double lam : sweep) {
                auto [cf, mg] = margin_at(lam);
                mg.name += "@lambda=" + std::to_string(lam);
                rep.margins.push_back(mg);
            }
        }
    }
    return rep;
}

}  // namespace memlab
