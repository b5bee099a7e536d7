#pragma once

#include <cmath>
#include <vector>

#include "memlab/brackets.hpp"
#include "memlab/degenerate_wave.hpp"
#include "memlab/membrane.hpp"

namespace memlab {

enum class Frame { rescaled, physical };

// Weights of the evolution d_tt v = wA A(v) + wQ Q(v) + wC C(v) + wL L(v),
// where A is the frozen-metric principal part and Q/C/L are the homogeneity
// groups of the nonlinearity. The physical frame is the exact pullback of the
// rescaled one under v -> eps^2 v(sqrt(eps) t).
struct FrameWeights {
    double wA = 1.0, wQ = 0.0, wC = 0.0, wL = 0.0;
    double amp_v0 = 1.0, amp_v1 = 1.0;  // data scaling relative to the problem fields
    double horizon = 1.0;               // horizon scaling relative to problem.T

    static FrameWeights make(Frame f, double eps) {
        FrameWeights w;
        if (f == Frame::rescaled) {
            w.wA = 1.0 / eps;
            w.wQ = eps * eps;
            w.wC = eps * eps * eps;
            w.wL = w.wC;
        } else {
            double se = std::sqrt(eps);
            w.wA = 1.0;
            w.wQ = eps * se;
            w.wC = eps;
            w.wL = eps * eps * eps * eps;
            w.amp_v0 = eps * eps;
            w.amp_v1 = eps * eps * se;
            w.horizon = 1.0 / se;
        }
        return w;
    }
};

struct EvolveDiagnostics {
    std::vector<double> t;
    std::vector<double> energy;          // int (v_t^2 + |Dv|^2)
    std::vector<double> constraint_sup;  // sup |sum_m {v^m, u^m}|, u = u0 + int v
    std::vector<double> hamiltonian;     // reduced Hamiltonian H(u, sqrt(w) v)
    bool blew_up = false;
    double blowup_time = 0.0;
};

namespace detail_evolve {

inline double standard_energy(const FieldBundle& v, const FieldBundle& vprev, double dt) {
    const auto& g = *v.grid();
    double acc = 0.0;
    for (int m = 0; m < v.count(); ++m) {
        Field vt = (1.0 / dt) * (v[m] - vprev[m]);
        Field d1 = partial_derivative(v[m], 1);
        Field d2 = partial_derivative(v[m], 2);
        for (size_t i = 0; i < g.size(); ++i)
            acc += vt.v[i] * vt.v[i] + d1.v[i] * d1.v[i] + d2.v[i] * d2.v[i];
    }
    return acc * g.cell_area();
}

inline FieldBundle momentum_of(const FieldBundle& v) {
    FieldBundle p = v;
    const auto& g = *v.grid();
    if (!g.unit_w)
        for (auto& c : p.comps)
            for (size_t i = 0; i < c.v.size(); ++i) c.v[i] *= g.sqrt_w[i];
    return p;
}

}  // namespace detail_evolve

// Direct leapfrog march of the frame-weighted membrane system on the
// spectral grid. Memory integrals advance with the shared trapezoid rule.
inline SpacetimeField evolve_membrane(const MembraneProblem& p, Frame frame, double dt,
                                      EvolveDiagnostics* diag = nullptr, int diag_stride = 16,
                                      double cfl_safety = 0.45) {
    FrameWeights fw = FrameWeights::make(frame, p.epsilon);
    const GridPtr& g = p.grid;
    int nc = p.num_components();
    MembraneOperator op = MembraneOperator::build(p.u0);

    double glo, ghi;
    op.gamma_u0.eigen_range(glo, ghi);
    double speed2 = fw.wA * std::max(ghi, 1e-12);
    double dt_max = cfl_safety * std::min(g->dx1(), g->dx2()) / std::sqrt(speed2);
    if (dt > dt_max)
        throw CflViolation("evolve_membrane: dt " + std::to_string(dt) + " exceeds CFL bound " +
                           std::to_string(dt_max));

    double T = p.T * fw.horizon;
    int steps = static_cast<int>(std::lround(T / dt));

    FieldBundle v0 = fw.amp_v0 * p.v0;
    FieldBundle v1 = fw.amp_v1 * p.v1;

    SpacetimeField out;
    out.t0 = 0.0;
    out.dt = dt;
    out.snaps.reserve(steps + 1);

    NodePack pack(g, nc);
    pack.val = v0;
    FieldBundle Uint(g, nc);  // running int_0^t v for diagnostics

    auto grad1 = [&](const FieldBundle& u) {
        FieldBundle d(g, nc);
        for (int m = 0; m < nc; ++m) d[m] = partial_derivative(u[m], 1);
        return d;
    };
    auto grad2 = [&](const FieldBundle& u) {
        FieldBundle d(g, nc);
        for (int m = 0; m < nc; ++m) d[m] = partial_derivative(u[m], 2);
        return d;
    };
    auto rhs_at = [&](const NodePack& s) {
        FieldBundle r = fw.wA * op.principal(s.val);
        r += eval_F_weighted(op, s, fw.wQ, fw.wC, fw.wL);
        return r;
    };
    auto record = [&](int n, const FieldBundle& vcur, const FieldBundle& vprev) {
        if (!diag || (n % diag_stride != 0 && n != steps)) return;
        diag->t.push_back(n * dt);
        diag->energy.push_back(detail_evolve::standard_energy(vcur, vprev, dt));
        FieldBundle u = p.u0 + Uint;
        diag->constraint_sup.push_back(sup_norm(constraint_residual(vcur, u)));
        diag->hamiltonian.push_back(reduced_hamiltonian(u, detail_evolve::momentum_of(vcur)));
    };

    FieldBundle vprev = v0;
    FieldBundle rhs0 = rhs_at(pack);
    FieldBundle vcur = v0;
    axpy(dt, v1, vcur);
    axpy(dt * dt / 2.0, rhs0, vcur);
    out.snaps.push_back(v0);
    out.snaps.push_back(vcur);
    FieldBundle d1p = grad1(v0), d2p = grad2(v0);
    FieldBundle d1c = grad1(vcur), d2c = grad2(vcur);
    advance_memory(pack.J1, dt, d1p, d1c);
    advance_memory(pack.J2, dt, d2p, d2c);
    advance_memory(Uint, dt, vprev, vcur);
    record(0, v0, v0);

    for (int n = 1; n < steps; ++n) {
        pack.val = vcur;
        FieldBundle rhs = rhs_at(pack);
        FieldBundle vnext = 2.0 * vcur - vprev;
        axpy(dt * dt, rhs, vnext);
        if (n % 16 == 0 || n + 1 == steps) {
            for (const auto& comp : vnext.comps)
                if (!comp.finite()) {
                    if (diag) {
                        diag->blew_up = true;
                        diag->blowup_time = (n + 1) * dt;
                    }
                    throw SolverFailure("evolve_membrane: non-finite state", (n + 1) * dt);
                }
        }
        FieldBundle d1n = grad1(vnext), d2n = grad2(vnext);
        advance_memory(pack.J1, dt, d1c, d1n);
        advance_memory(pack.J2, dt, d2c, d2n);
        advance_memory(Uint, dt, vcur, vnext);
        d1c = std::move(d1n);
        d2c = std::move(d2n);
        vprev = std::move(vcur);
        vcur = std::move(vnext);
        out.snaps.push_back(vcur);
        record(n + 1, vcur, vprev);
    }
    return out;
}

struct BracketTrajectory {
    SpacetimeField v;  // velocity (second-order unknown)
    SpacetimeField u;  // co-evolved embedding u = u0 + int v
    EvolveDiagnostics diag;
};

// Coupled march of the literal time-differentiated bracket system: v steps by
// leapfrog with coefficients assembled from the co-evolved u at each node.
// Constraint preservation here is structural (compatible data).
inline BracketTrajectory evolve_bracket(const FieldBundle& u0, const FieldBundle& v0,
                                        const FieldBundle& v1, double T, double dt,
                                        int diag_stride = 16, double cfl_safety = 0.4) {
    const GridPtr& g = u0.grid();
    int nc = u0.count();
    MetricField gam = induced_metric(u0);
    double glo, ghi;
    gam.eigen_range(glo, ghi);
    double dt_max = cfl_safety * std::min(g->dx1(), g->dx2()) /
                    std::sqrt(std::max(2.0 * ghi, 1e-12));
    if (dt > dt_max)
        throw CflViolation("evolve_bracket: dt " + std::to_string(dt) + " exceeds CFL bound " +
                           std::to_string(dt_max));
    int steps = static_cast<int>(std::lround(T / dt));

    BracketTrajectory out;
    out.v.t0 = out.u.t0 = 0.0;
    out.v.dt = out.u.dt = dt;

    FieldBundle ucur = u0;
    FieldBundle vprev = v0;
    FieldBundle rhs0 = modified_rhs_state(ucur, v0);
    FieldBundle vcur = v0;
    axpy(dt, v1, vcur);
    axpy(dt * dt / 2.0, rhs0, vcur);
    out.v.snaps.push_back(v0);
    out.u.snaps.push_back(u0);
    FieldBundle unext = ucur;
    advance_memory(unext, dt, vprev, vcur);
    ucur = unext;
    out.v.snaps.push_back(vcur);
    out.u.snaps.push_back(ucur);

    auto record = [&](int n) {
        if (n % diag_stride != 0 && n != steps) return;
        out.diag.t.push_back(n * dt);
        out.diag.energy.push_back(detail_evolve::standard_energy(vcur, vprev, dt));
        out.diag.constraint_sup.push_back(sup_norm(constraint_residual(vcur, ucur)));
        out.diag.hamiltonian.push_back(
            reduced_hamiltonian(ucur, detail_evolve::momentum_of(vcur)));
    };
    record(1);

    for (int n = 1; n < steps; ++n) {
        FieldBundle rhs = modified_rhs_state(ucur, vcur);
        FieldBundle vnext = 2.0 * vcur - vprev;
        axpy(dt * dt, rhs, vnext);
        if (n % 16 == 0 || n + 1 == steps) {
            for (const auto& comp : vnext.comps)
                if (!comp.finite()) {
                    out.diag.blew_up = true;
                    out.diag.blowup_time = (n + 1) * dt;
                    throw SolverFailure("evolve_bracket: non-finite state", (n + 1) * dt);
                }
        }
        unext = ucur;
        advance_memory(unext, dt, vcur, vnext);
        vprev = std::move(vcur);
        vcur = std::move(vnext);
        ucur = std::move(unext);
        out.v.snaps.push_back(vcur);
        out.u.snaps.push_back(ucur);
        record(n + 1);
    }
    return out;
}

}  // namespace memlab
