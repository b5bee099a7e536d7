#pragma once

#include <cmath>
#include <vector>

#include "memlab/evolve.hpp"
#include "memlab/membrane.hpp"
#include "memlab/rescale.hpp"

namespace memlab {

// Independent reference solver for the frame-weighted membrane family:
// 4th-order centered finite differences on a refined grid, pointwise
// products, its own memory bookkeeping. Shares no operator assembly with the
// spectral path (initial data are transferred by band-limited interpolation).

namespace detail_oracle {

inline Field fd4_derivative(const Field& f, int axis) {
    const auto& g = *f.grid;
    Field r(f.grid);
    double inv12;
    if (axis == 1) {
        inv12 = 1.0 / (12.0 * g.dx1());
        for (int i = 0; i < g.n1; ++i) {
            int ip = (i + 1) % g.n1, ip2 = (i + 2) % g.n1;
            int im = (i - 1 + g.n1) % g.n1, im2 = (i - 2 + g.n1) % g.n1;
            for (int j = 0; j < g.n2; ++j)
                r.at(i, j) = (8.0 * (f.at(ip, j) - f.at(im, j)) - (f.at(ip2, j) - f.at(im2, j))) *
                             inv12;
        }
    } else {
        inv12 = 1.0 / (12.0 * g.dx2());
        for (int i = 0; i < g.n1; ++i) {
            for (int j = 0; j < g.n2; ++j) {
                int jp = (j + 1) % g.n2, jp2 = (j + 2) % g.n2;
                int jm = (j - 1 + g.n2) % g.n2, jm2 = (j - 2 + g.n2) % g.n2;
                r.at(i, j) = (8.0 * (f.at(i, jp) - f.at(i, jm)) - (f.at(i, jp2) - f.at(i, jm2))) *
                             inv12;
            }
        }
    }
    return r;
}

struct FdState {
    std::vector<Field> d1, d2;
    FdState(const FieldBundle& u) {
        for (int m = 0; m < u.count(); ++m) {
            d1.push_back(fd4_derivative(u[m], 1));
            d2.push_back(fd4_derivative(u[m], 2));
        }
    }
};

}  // namespace detail_oracle

struct OracleOptions {
    int refine = 2;          // grid refinement factor
    int diag_stride = 16;    // diagnostics cadence
    bool nonlinear = true;   // false: drop the F groups (linear reference)
    double cfl_safety = 0.4;
};

struct OracleResult {
    SpacetimeField v;  // on the problem grid
    SpacetimeField u;  // u = u0 + int v
    std::vector<double> t_diag, constraint_sup, hamiltonian, energy;
    bool blew_up = false;
    double blowup_time = 0.0;
    double dt = 0.0;
};

// Method-of-lines solve of d_tt v = wA A(v) + wQ Q(v) + wC C(v) + wL L(v)
// in the requested frame, by the independent finite-difference path.
inline OracleResult direct_solve_family(const MembraneProblem& p, Frame frame, double dt,
                                        const OracleOptions& opt = {}) {
    using namespace detail_oracle;
    FrameWeights fw = FrameWeights::make(frame, p.epsilon);
    const GridPtr coarse = p.grid;
    auto g = make_grid(coarse->n1 * opt.refine, coarse->n2 * opt.refine, coarse->L1, coarse->L2);
    int nc = p.num_components();

    FieldBundle u0(g, nc), v0(g, nc), v1(g, nc);
    for (int m = 0; m < nc; ++m) {
        u0[m] = prolong(p.u0[m], g);
        v0[m] = fw.amp_v0 * prolong(p.v0[m], g);
        v1[m] = fw.amp_v1 * prolong(p.v1[m], g);
    }

    // frozen metric and its conjugation, assembled by finite differences
    FdState du0(u0);
    MetricField M(g);  // M_ab = eps conj of gamma(u0)
    {
        Field g11(g), g12(g), g22(g);
        for (int m = 0; m < nc; ++m) {
            g11 += hadamard(du0.d1[m], du0.d1[m]);
            g12 += hadamard(du0.d1[m], du0.d2[m]);
            g22 += hadamard(du0.d2[m], du0.d2[m]);
        }
        M.g11 = g22;
        M.g12 = -1.0 * g12;
        M.g22 = g11;
    }
    double mlo, mhi;
    M.eigen_range(mlo, mhi);
    double speed2 = fw.wA * std::max(mhi, 1e-12);
    double dt_max = opt.cfl_safety * std::min(g->dx1(), g->dx2()) / std::sqrt(speed2);
    if (dt > dt_max)
        throw CflViolation("direct_solve_family: dt exceeds the CFL bound " +
                           std::to_string(dt_max));

    double T = p.T * fw.horizon;
    int steps = static_cast<int>(std::lround(T / dt));

    auto rhs_at = [&](const FieldBundle& v, const std::array<FieldBundle, 2>& J) {
        FdState dv(v);
        FieldBundle out(g, nc);
        // principal part
        for (int m = 0; m < nc; ++m) {
            Field f1 = hadamard(M.g11, dv.d1[m]) + hadamard(M.g12, dv.d2[m]);
            Field f2 = hadamard(M.g12, dv.d1[m]) + hadamard(M.g22, dv.d2[m]);
            out[m] = fw.wA * (fd4_derivative(f1, 1) + fd4_derivative(f2, 2));
        }
        if (!opt.nonlinear) return out;
        // quadratic memory terms (T1 + T2)
        Field S11(g), S12(g), S21(g), S22(g);
        for (int n = 0; n < nc; ++n) {
            S11 += hadamard(du0.d1[n], J[0][n]);
            S12 += hadamard(du0.d1[n], J[1][n]);
            S21 += hadamard(du0.d2[n], J[0][n]);
            S22 += hadamard(du0.d2[n], J[1][n]);
        }
        Field Q11 = S11 + S11, Q12 = S12 + S21, Q22 = S22 + S22;  // symmetrized sum
        for (int m = 0; m < nc; ++m) {
            Field f1 = hadamard(Q22, dv.d1[m]) - 1.0 * hadamard(Q12, dv.d2[m]);
            Field f2 = -1.0 * hadamard(Q12, dv.d1[m]) + hadamard(Q11, dv.d2[m]);
            axpy(fw.wQ, fd4_derivative(f1, 1) + fd4_derivative(f2, 2), out[m]);
        }
        if (fw.wC != 0.0) {
            // cubic divergence term (T3)
            Field G11(g), G12(g), G22(g);
            for (int n = 0; n < nc; ++n) {
                G11 += hadamard(J[0][n], J[0][n]);
                G12 += hadamard(J[0][n], J[1][n]);
                G22 += hadamard(J[1][n], J[1][n]);
            }
            for (int m = 0; m < nc; ++m) {
                Field f1 = hadamard(G22, dv.d1[m]) - 1.0 * hadamard(G12, dv.d2[m]);
                Field f2 = -1.0 * hadamard(G12, dv.d1[m]) + hadamard(G11, dv.d2[m]);
                axpy(fw.wC, fd4_derivative(f1, 1) + fd4_derivative(f2, 2), out[m]);
            }
            // cubic curl term (T4), unit w
            for (int m = 0; m < nc; ++m) {
                Field a1(g), a2(g);
                for (int n = 0; n < nc; ++n) {
                    Field P = hadamard(J[0][m], J[1][n]) - 1.0 * hadamard(J[1][m], J[0][n]);
                    a1 += hadamard(P, dv.d2[n]);
                    a2 += hadamard(P, dv.d1[n]);
                }
                axpy(-2.0 * fw.wC, fd4_derivative(a1, 1) - 1.0 * fd4_derivative(a2, 2), out[m]);
            }
        }
        return out;
    };

    OracleResult res;
    res.dt = dt;
    res.v.t0 = res.u.t0 = 0.0;
    res.v.dt = res.u.dt = dt;

    std::array<FieldBundle, 2> J{FieldBundle(g, nc), FieldBundle(g, nc)};
    FieldBundle Uint(g, nc);
    auto push = [&](const FieldBundle& v) {
        FieldBundle vc(coarse, nc), uc(coarse, nc);
        for (int m = 0; m < nc; ++m) {
            vc[m] = restrict_sample(v[m], coarse);
            Field u = u0[m] + Uint[m];
            uc[m] = restrict_sample(u, coarse);
        }
        res.v.snaps.push_back(std::move(vc));
        res.u.snaps.push_back(std::move(uc));
    };
    auto diag = [&](int n, const FieldBundle& vcur, const FieldBundle& vprev) {
        if (n % opt.diag_stride != 0 && n != steps) return;
        res.t_diag.push_back(n * dt);
        FieldBundle u = u0;
        u += Uint;
        FdState duu(u);
        FdState dvv(vcur);
        Field con(g);
        double en = 0.0;
        for (int m = 0; m < nc; ++m) {
            con += hadamard(dvv.d1[m], duu.d2[m]) - 1.0 * hadamard(dvv.d2[m], duu.d1[m]);
            Field vt = (1.0 / dt) * (vcur[m] - vprev[m]);
            for (size_t i = 0; i < g->size(); ++i)
                en += vt.v[i] * vt.v[i] + dvv.d1[m].v[i] * dvv.d1[m].v[i] +
                      dvv.d2[m].v[i] * dvv.d2[m].v[i];
        }
        res.constraint_sup.push_back(sup_norm(con));
        res.energy.push_back(en * g->cell_area());
        double ham = 0.0;
        for (int m = 0; m < nc; ++m)
            for (int n2 = m + 1; n2 < nc; ++n2) {
                Field b = hadamard(duu.d1[m], duu.d2[n2]) - 1.0 * hadamard(duu.d2[m], duu.d1[n2]);
                for (size_t i = 0; i < g->size(); ++i) ham += b.v[i] * b.v[i];
            }
        for (int m = 0; m < nc; ++m)
            for (size_t i = 0; i < g->size(); ++i)
                ham += 2.0 * vcur[m].v[i] * vcur[m].v[i];
        res.hamiltonian.push_back(0.25 * ham * g->cell_area());
    };

    FieldBundle vprev = v0;
    FieldBundle rhs0 = rhs_at(v0, J);
    FieldBundle vcur = v0;
    axpy(dt, v1, vcur);
    axpy(dt * dt / 2.0, rhs0, vcur);
    push(v0);
    // memory update uses the plain trapezoid of FD gradients
    auto advance = [&](const FieldBundle& a, const FieldBundle& b) {
        FdState da(a), db(b);
        for (int m = 0; m < nc; ++m) {
            axpy(dt / 2.0, da.d1[m], J[0][m]);
            axpy(dt / 2.0, db.d1[m], J[0][m]);
            axpy(dt / 2.0, da.d2[m], J[1][m]);
            axpy(dt / 2.0, db.d2[m], J[1][m]);
            axpy(dt / 2.0, a[m], Uint[m]);
            axpy(dt / 2.0, b[m], Uint[m]);
        }
    };
    advance(vprev, vcur);
    push(vcur);
    diag(0, v0, v0);

    for (int n = 1; n < steps; ++n) {
        FieldBundle rhs = rhs_at(vcur, J);
        FieldBundle vnext = 2.0 * vcur - vprev;
        axpy(dt * dt, rhs, vnext);
        if (n % 16 == 0 || n + 1 == steps) {
            for (const auto& comp : vnext.comps)
                if (!comp.finite()) {
                    res.blew_up = true;
                    res.blowup_time = (n + 1) * dt;
                    return res;
                }
        }
        advance(vcur, vnext);
        vprev = std::move(vcur);
        vcur = std::move(vnext);
        push(vcur);
        diag(n + 1, vcur, vprev);
    }
    return res;
}

// Literal coupled bracket-system march (the time-differentiated membrane
// system with coefficients from the co-evolved embedding); spectral assembly,
// since constraint preservation hinges on the discrete Jacobi identity.
inline OracleResult direct_solve_bracket(const MembraneProblem& p, double dt,
                                         int diag_stride = 16) {
    BracketTrajectory tr = evolve_bracket(p.u0, p.v0, p.v1, p.T, dt, diag_stride);
    OracleResult res;
    res.dt = dt;
    res.v = std::move(tr.v);
    res.u = std::move(tr.u);
    res.t_diag = std::move(tr.diag.t);
    res.constraint_sup = std::move(tr.diag.constraint_sup);
    res.hamiltonian = std::move(tr.diag.hamiltonian);
    res.energy = std::move(tr.diag.energy);
    res.blew_up = tr.diag.blew_up;
    res.blowup_time = tr.diag.blowup_time;
    return res;
}

struct SnapshotDiff {
    double t = 0.0;
    double abs_l2 = 0.0, rel_l2 = 0.0;
    double abs_h1 = 0.0, rel_h1 = 0.0;
    double abs_sup = 0.0, rel_sup = 0.0;
};

struct CompareReport {
    std::vector<SnapshotDiff> snapshots;
    double rel_l2_aggregate = 0.0;
    double rel_sup_aggregate = 0.0;
    bool time_interpolated = false;
};

// Per-snapshot and aggregate differences of two trajectories on one grid;
// b is linearly interpolated onto a's times when the grids disagree.
inline CompareReport compare(const SpacetimeField& a, const SpacetimeField& b,
                             int stride = 1) {
    if (a.grid()->n1 != b.grid()->n1 || a.grid()->n2 != b.grid()->n2)
        throw std::invalid_argument("compare: spatial grids differ");
    double t_lo = std::max(a.t0, b.t0);
    double t_hi = std::min(a.t_end(), b.t_end());
    if (t_hi < t_lo) throw std::invalid_argument("compare: disjoint time ranges");
    CompareReport rep;
    double acc_num = 0.0, acc_den = 0.0;
    for (int j = 0; j < a.nodes(); j += stride) {
        double t = a.time(j);
        if (t < t_lo - 1e-12 || t > t_hi + 1e-12) continue;
        // sample b at time t
        double r = (t - b.t0) / b.dt;
        int k = static_cast<int>(std::floor(r));
        double th = r - k;
        k = std::clamp(k, 0, b.nodes() - 1);
        int k1 = std::min(k + 1, b.nodes() - 1);
        FieldBundle bs = b.snaps[k];
        if (th > 1e-9 && k1 != k) {
            rep.time_interpolated = true;
            bs *= (1.0 - th);
            axpy(th, b.snaps[k1], bs);
        }
        FieldBundle diff = a.snaps[j];
        diff -= bs;
        SnapshotDiff d;
        d.t = t;
        d.abs_l2 = l2_norm_weighted(diff);
        d.rel_l2 = d.abs_l2 / std::max(l2_norm_weighted(bs), 1e-300);
        d.abs_h1 = sobolev_norm(diff, 1.0);
        d.rel_h1 = d.abs_h1 / std::max(sobolev_norm(bs, 1.0), 1e-300);
        d.abs_sup = sup_norm(diff);
        d.rel_sup = d.abs_sup / std::max(sup_norm(bs), 1e-300);
        rep.snapshots.push_back(d);
        acc_num += d.abs_l2 * d.abs_l2;
        acc_den += l2_norm_weighted(bs) * l2_norm_weighted(bs);
        rep.rel_sup_aggregate = std::max(rep.rel_sup_aggregate, d.rel_sup);
    }
    rep.rel_l2_aggregate = std::sqrt(acc_num / std::max(acc_den, 1e-300));
    return rep;
}

}  // namespace memlab
