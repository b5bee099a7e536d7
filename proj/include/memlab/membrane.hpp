#pragma once

#include <array>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "memlab/brackets.hpp"
#include "memlab/bundle.hpp"
#include "memlab/field.hpp"
#include "memlab/spectral.hpp"

namespace memlab {

inline FieldBundle low_pass(const FieldBundle& u, int N) {
    if (!u.comps.empty() && N >= u.grid()->nyquist1() && N >= u.grid()->nyquist2()) return u;
    FieldBundle r = u;
    for (auto& c : r.comps) c = low_pass(c, N);
    return r;
}

// Membrane initial-value problem on the rescaled clock. gamma0/gamma_x hold a
// supplied degenerate factorization gamma(u0)_cd = gamma0(x) gamma_x(x)_cd.
struct MembraneProblem {
    GridPtr grid;
    FieldBundle u0, v0, v1;
    double epsilon = 1e-3;
    double T = 0.5;
    std::optional<Field> gamma0;
    std::optional<MetricField> gamma_x;
    std::string name;

    int num_components() const { return u0.count(); }
};

// Snapshot of an evolving bundle together with its memory integrals
// J_c = int_0^t d_c(.) dt' (running trapezoid).
struct NodePack {
    FieldBundle val;
    FieldBundle J1, J2;

    NodePack() = default;
    NodePack(const GridPtr& g, int nc) : val(g, nc), J1(g, nc), J2(g, nc) {}
};

// One trapezoid increment of the memory integrals; both the steppers and the
// free-standing stream builder go through here so histories agree bit for bit.
inline void advance_memory(FieldBundle& J, double dt, const FieldBundle& d_prev,
                           const FieldBundle& d_next) {
    axpy(dt / 2.0, d_prev, J);
    axpy(dt / 2.0, d_next, J);
}

// Memory streams J_c for every node of a sampled history.
inline std::vector<NodePack> memory_stream(const SpacetimeField& v) {
    std::vector<NodePack> out;
    out.reserve(v.nodes());
    GridPtr g = v.grid();
    int nc = v.components();
    FieldBundle d1p(g, nc), d2p(g, nc);
    for (int j = 0; j < v.nodes(); ++j) {
        FieldBundle d1(g, nc), d2(g, nc);
        for (int m = 0; m < nc; ++m) {
            d1[m] = partial_derivative(v.snaps[j][m], 1);
            d2[m] = partial_derivative(v.snaps[j][m], 2);
        }
        NodePack p(g, nc);
        p.val = v.snaps[j];
        if (j == 0) {
            out.push_back(std::move(p));
        } else {
            p.J1 = out.back().J1;
            p.J2 = out.back().J2;
            advance_memory(p.J1, v.dt, d1p, d1);
            advance_memory(p.J2, v.dt, d2p, d2);
            out.push_back(std::move(p));
        }
        d1p = std::move(d1);
        d2p = std::move(d2);
    }
    return out;
}

// Frozen u0-derived data shared by every operator evaluation, including
// padded samples of the gradients and the K-term coefficients.
struct MembraneOperator {
    GridPtr grid;
    int nc = 0;
    FieldBundle u0;
    std::vector<Field> g01, g02;  // d_1 u0^n, d_2 u0^n
    std::vector<PaddedField> g01p, g02p;
    MetricField gamma_u0;
    MetricField M_u0;  // econj(gamma_u0)
    bool has_K = false;
    Field s_w;          // w^{-1/2}
    Field k1_w, k2_w;   // k_d = eps^{cd} d_c s
    Field inv_w;        // 1/w
    Field c1_l5, c2_l5;  // k-contracted gamma(u0) rows of the linear K-term
    PaddedField k1p, k2p, c1p, c2p;

    static MembraneOperator build(const FieldBundle& u0_in,
                                  const MetricField* gamma_supplied = nullptr) {
        MembraneOperator op;
        op.grid = u0_in.grid();
        op.nc = u0_in.count();
        op.u0 = u0_in;
        op.g01.resize(op.nc);
        op.g02.resize(op.nc);
        for (int m = 0; m < op.nc; ++m) {
            op.g01[m] = partial_derivative(u0_in[m], 1);
            op.g02[m] = partial_derivative(u0_in[m], 2);
            op.g01p.push_back(pad_field(op.g01[m]));
            op.g02p.push_back(pad_field(op.g02[m]));
        }
        op.gamma_u0 = gamma_supplied ? *gamma_supplied : induced_metric(u0_in);
        op.M_u0 = econj(op.gamma_u0);
        const auto& g = *op.grid;
        op.has_K = !g.unit_w;
        if (op.has_K) {
            op.s_w = Field(op.grid);
            op.inv_w = Field(op.grid);
            for (size_t i = 0; i < g.size(); ++i) {
                op.s_w.v[i] = g.inv_sqrt_w[i];
                op.inv_w.v[i] = 1.0 / g.w[i];
            }
            op.k1_w = -1.0 * partial_derivative(op.s_w, 2);
            op.k2_w = partial_derivative(op.s_w, 1);
            op.k1p = pad_field(op.k1_w);
            op.k2p = pad_field(op.k2_w);
            op.c1_l5 = multiply_dealiased(op.k1_w, op.gamma_u0.g12) +
                       multiply_dealiased(op.k2_w, op.gamma_u0.g22);
            op.c2_l5 = multiply_dealiased(op.k1_w, op.gamma_u0.g11) +
                       multiply_dealiased(op.k2_w, op.gamma_u0.g12);
            op.c1p = pad_field(op.c1_l5);
            op.c2p = pad_field(op.c2_l5);
        }
        return op;
    }

    const Field& g0(int axis, int n) const { return axis == 1 ? g01[n] : g02[n]; }

    // A(phi)^m = sum_ab d_a( eps^{ac} eps^{bd} gamma(u0)_cd d_b phi^m ).
    FieldBundle principal(const FieldBundle& phi) const {
        FieldBundle r(grid, phi.count());
        for (int m = 0; m < phi.count(); ++m) r[m] = div_form(M_u0, phi[m]);
        return r;
    }
};

// Per-term diagnostic log: (name, sup norm of the term).
using TermLog = std::vector<std::pair<std::string, double>>;

namespace detail_membrane {

struct Grad {
    std::vector<Field> d1, d2;
};

inline Grad grad_of(const FieldBundle& u) {
    Grad g;
    g.d1.resize(u.count());
    g.d2.resize(u.count());
    for (int m = 0; m < u.count(); ++m) {
        g.d1[m] = partial_derivative(u[m], 1);
        g.d2[m] = partial_derivative(u[m], 2);
    }
    return g;
}

// padded atoms of one operand: memory integrals and gradient components
struct PaddedNode {
    std::vector<PaddedField> J1, J2, d1, d2;
};

inline PaddedNode pad_node(const NodePack& p, const Grad& dz) {
    PaddedNode o;
    int nc = p.val.count();
    o.J1.reserve(nc);
    o.J2.reserve(nc);
    o.d1.reserve(nc);
    o.d2.reserve(nc);
    for (int m = 0; m < nc; ++m) {
        o.J1.push_back(pad_field(p.J1[m]));
        o.J2.push_back(pad_field(p.J2[m]));
        o.d1.push_back(pad_field(dz.d1[m]));
        o.d2.push_back(pad_field(dz.d2[m]));
    }
    return o;
}

inline void log_term(TermLog* log, const std::string& name, const FieldBundle& t) {
    if (log) log->emplace_back(name, sup_norm(t));
}

// Q-form (quadratic memory terms T1/T2):
//   Q(x; z)^m = d_a( eps^{ac} eps^{bd} S_cd d_b z^m ),  S_cd = sum_n g0_c^n J_d(x_n);
//   the transposed variant uses S_cd = sum_n g0_d^n J_c(x_n).
inline FieldBundle q_form(const MembraneOperator& op, const PaddedNode& x, const PaddedNode& z,
                          bool transposed) {
    const GridPtr& g = op.grid;
    PadAcc S11(g), S12(g), S21(g), S22(g);
    for (int n = 0; n < op.nc; ++n) {
        S11.mac(op.g01p[n], x.J1[n]);
        S12.mac(op.g01p[n], x.J2[n]);
        S21.mac(op.g02p[n], x.J1[n]);
        S22.mac(op.g02p[n], x.J2[n]);
    }
    Field f11 = S11.out(), f12 = S12.out(), f21 = S21.out(), f22 = S22.out();
    if (transposed) std::swap(f12, f21);
    PaddedField p11 = pad_field(f11), p12 = pad_field(f12);
    PaddedField p21 = pad_field(f21), p22 = pad_field(f22);
    FieldBundle r(g, op.nc);
    for (int m = 0; m < op.nc; ++m) {
        PadAcc fl1(g), fl2(g);
        fl1.mac(p22, z.d1[m]);
        fl1.mac(p21, z.d2[m], -1.0);
        fl2.mac(p12, z.d1[m], -1.0);
        fl2.mac(p11, z.d2[m]);
        r[m] = partial_derivative(fl1.out(), 1) + partial_derivative(fl2.out(), 2);
    }
    return r;
}

// Cubic divergence form (T3):
//   B3(x, y; z)^m = d_a( eps^{ac} eps^{bd} G_cd d_b z^m ),  G_cd = sum_n J_c(x^n) J_d(y_n).
inline FieldBundle b3_form(const MembraneOperator& op, const PaddedNode& x, const PaddedNode& y,
                           const PaddedNode& z) {
    const GridPtr& g = op.grid;
    PadAcc G11(g), G12(g), G21(g), G22(g);
    for (int n = 0; n < op.nc; ++n) {
        G11.mac(x.J1[n], y.J1[n]);
        G12.mac(x.J1[n], y.J2[n]);
        G21.mac(x.J2[n], y.J1[n]);
        G22.mac(x.J2[n], y.J2[n]);
    }
    PaddedField p11 = pad_field(G11.out()), p12 = pad_field(G12.out());
    PaddedField p21 = pad_field(G21.out()), p22 = pad_field(G22.out());
    FieldBundle r(g, op.nc);
    for (int m = 0; m < op.nc; ++m) {
        PadAcc fl1(g), fl2(g);
        fl1.mac(p22, z.d1[m]);
        fl1.mac(p21, z.d2[m], -1.0);
        fl2.mac(p12, z.d1[m], -1.0);
        fl2.mac(p11, z.d2[m]);
        r[m] = partial_derivative(fl1.out(), 1) + partial_derivative(fl2.out(), 2);
    }
    return r;
}

// Cubic curl-like form (T4, without its -2 eps factor), factorized through
//   Y_{c,d} = sum_n J_c(y^n) q_d[n],  q_d = w^{-1} d_d z:
//   r^m = d_1( J_1(x^m) Y_{2,2} - J_2(x^m) Y_{1,2} )
//       - d_2( J_1(x^m) Y_{2,1} - J_2(x^m) Y_{1,1} ).
inline FieldBundle d3_form(const MembraneOperator& op, const PaddedNode& x, const PaddedNode& y,
                           const PaddedNode& z, const Grad& zg) {
    const GridPtr& g = op.grid;
    const std::vector<PaddedField>*q1 = &z.d1, *q2 = &z.d2;
    std::vector<PaddedField> wq1, wq2;
    if (op.has_K) {
        for (int n = 0; n < op.nc; ++n) {
            wq1.push_back(pad_field(hadamard(op.inv_w, zg.d1[n])));
            wq2.push_back(pad_field(hadamard(op.inv_w, zg.d2[n])));
        }
        q1 = &wq1;
        q2 = &wq2;
    }
    PadAcc Y22(g), Y12(g), Y21(g), Y11(g);
    for (int n = 0; n < op.nc; ++n) {
        Y22.mac(y.J2[n], (*q2)[n]);
        Y12.mac(y.J1[n], (*q2)[n]);
        Y21.mac(y.J2[n], (*q1)[n]);
        Y11.mac(y.J1[n], (*q1)[n]);
    }
    PaddedField pY22 = pad_field(Y22.out()), pY12 = pad_field(Y12.out());
    PaddedField pY21 = pad_field(Y21.out()), pY11 = pad_field(Y11.out());
    FieldBundle r(g, op.nc);
    for (int m = 0; m < op.nc; ++m) {
        PadAcc a1(g), a2(g);
        a1.mac(x.J1[m], pY22);
        a1.mac(x.J2[m], pY12, -1.0);
        a2.mac(x.J1[m], pY21);
        a2.mac(x.J2[m], pY11, -1.0);
        r[m] = partial_derivative(a1.out(), 1) - partial_derivative(a2.out(), 2);
    }
    return r;
}

// K-weighted cubic form (T5 part 2, without its 2 eps factor):
//   r^m = s ( J_1(x^m) Z_2 - J_2(x^m) Z_1 ),  Z_c = sum_n J_c(y^n) (k_d d_d z^n).
inline FieldBundle e5_form(const MembraneOperator& op, const PaddedNode& x, const PaddedNode& y,
                           const PaddedNode& z) {
    const GridPtr& g = op.grid;
    FieldBundle r(g, op.nc);
    if (!op.has_K) return r;
    PadAcc Z1(g), Z2(g);
    for (int n = 0; n < op.nc; ++n) {
        PadAcc q(g);
        q.mac(op.k1p, z.d1[n]);
        q.mac(op.k2p, z.d2[n]);
        PaddedField kdz = pad_field(q.out());
        Z1.mac(y.J1[n], kdz);
        Z2.mac(y.J2[n], kdz);
    }
    PaddedField pZ1 = pad_field(Z1.out()), pZ2 = pad_field(Z2.out());
    for (int m = 0; m < op.nc; ++m) {
        PadAcc a(g);
        a.mac(x.J1[m], pZ2);
        a.mac(x.J2[m], pZ1, -1.0);
        r[m] = hadamard(op.s_w, a.out());
    }
    return r;
}

// K-weighted linear term (T5 part 1, without its eps factor):
//   L5(z)^m = s ( c1 d_1 z^m - c2 d_2 z^m ),  c-rows precomputed in the operator.
inline FieldBundle l5_form(const MembraneOperator& op, const PaddedNode& z) {
    const GridPtr& g = op.grid;
    FieldBundle r(g, op.nc);
    if (!op.has_K) return r;
    for (int m = 0; m < op.nc; ++m) {
        PadAcc a(g);
        a.mac(op.c1p, z.d1[m]);
        a.mac(op.c2p, z.d2[m], -1.0);
        r[m] = hadamard(op.s_w, a.out());
    }
    return r;
}

}  // namespace detail_membrane

// Nonlinearity with independent weights on its homogeneity groups:
// wQ (T1+T2, quadratic memory), wC (T3/T4/T5-cubic), wL (K-weighted linear).
// The rescaled-frame F(v) is (wQ, wC, wL) = (1, eps, eps); the exact pullback
// to the long-horizon frame reweights the groups.
inline FieldBundle eval_F_weighted(const MembraneOperator& op, const NodePack& v, double wQ,
                                   double wC, double wL, TermLog* log = nullptr) {
    using namespace detail_membrane;
    Grad dv = grad_of(v.val);
    PaddedNode pv = pad_node(v, dv);
    FieldBundle t1 = wQ * q_form(op, pv, pv, false);
    FieldBundle t2 = wQ * q_form(op, pv, pv, true);
    FieldBundle t3 = wC * b3_form(op, pv, pv, pv);
    FieldBundle t4 = (-2.0 * wC) * d3_form(op, pv, pv, pv, dv);
    log_term(log, "F.T1", t1);
    log_term(log, "F.T2", t2);
    log_term(log, "F.T3", t3);
    log_term(log, "F.T4", t4);
    FieldBundle r = t1 + t2 + t3 + t4;
    if (op.has_K) {
        FieldBundle t5 = wL * l5_form(op, pv) + (2.0 * wC) * e5_form(op, pv, pv, pv);
        log_term(log, "F.T5", t5);
        r += t5;
    } else if (log) {
        log->emplace_back("F.T5", 0.0);
    }
    return r;
}

inline FieldBundle eval_F(const MembraneOperator& op, const NodePack& v, double eps,
                          TermLog* log = nullptr) {
    return eval_F_weighted(op, v, 1.0, eps, eps, log);
}

// Frechet derivative dF(v)[h]. Grouped into the 13 loggable lines of the
// linearized operator; lines 11-13 bundle the K-weighted pieces.
inline FieldBundle eval_dF(const MembraneOperator& op, const NodePack& v, const NodePack& h,
                           double eps, TermLog* log = nullptr) {
    using namespace detail_membrane;
    Grad dv = grad_of(v.val);
    Grad dh = grad_of(h.val);
    PaddedNode pv = pad_node(v, dv);
    PaddedNode ph = pad_node(h, dh);
    FieldBundle r(op.grid, op.nc);
    auto acc = [&](const char* name, FieldBundle t) {
        log_term(log, name, t);
        r += t;
    };
    acc("dF.01", q_form(op, pv, ph, false));
    acc("dF.02", q_form(op, ph, pv, false));
    acc("dF.03", q_form(op, pv, ph, true));
    acc("dF.04", q_form(op, ph, pv, true));
    acc("dF.05", eps * b3_form(op, pv, pv, ph));
    acc("dF.06", eps * b3_form(op, ph, pv, pv));
    acc("dF.07", eps * b3_form(op, pv, ph, pv));
    acc("dF.08", (-2.0 * eps) * d3_form(op, ph, pv, pv, dv));
    acc("dF.09", (-2.0 * eps) * d3_form(op, pv, ph, pv, dv));
    acc("dF.10", (-2.0 * eps) * d3_form(op, pv, pv, ph, dh));
    if (op.has_K) {
        acc("dF.11", eps * l5_form(op, ph) + (2.0 * eps) * e5_form(op, ph, pv, pv));
        acc("dF.12", (2.0 * eps) * e5_form(op, pv, ph, pv));
        acc("dF.13", (2.0 * eps) * e5_form(op, pv, pv, ph));
    } else if (log) {
        log->emplace_back("dF.11", 0.0);
        log->emplace_back("dF.12", 0.0);
        log->emplace_back("dF.13", 0.0);
    }
    return r;
}

// Taylor remainder R(h) = F(v+h) - F(v) - dF(v)h, written out term by term.
inline FieldBundle eval_R(const MembraneOperator& op, const NodePack& v, const NodePack& h,
                          double eps, TermLog* log = nullptr) {
    using namespace detail_membrane;
    Grad dv = grad_of(v.val);
    Grad dh = grad_of(h.val);
    PaddedNode pv = pad_node(v, dv);
    PaddedNode ph = pad_node(h, dh);
    FieldBundle r(op.grid, op.nc);
    auto acc = [&](const char* name, FieldBundle t) {
        log_term(log, name, t);
        r += t;
    };
    acc("R.01", q_form(op, ph, ph, false));
    acc("R.02", q_form(op, ph, ph, true));
    acc("R.03", eps * b3_form(op, ph, ph, pv));
    acc("R.04", eps * b3_form(op, ph, pv, ph));
    acc("R.05", eps * b3_form(op, pv, ph, ph));
    acc("R.06", eps * b3_form(op, ph, ph, ph));
    acc("R.07", (-2.0 * eps) * d3_form(op, ph, ph, pv, dv));
    acc("R.08", (-2.0 * eps) * d3_form(op, ph, pv, ph, dh));
    acc("R.09", (-2.0 * eps) * d3_form(op, pv, ph, ph, dh));
    acc("R.10", (-2.0 * eps) * d3_form(op, ph, ph, ph, dh));
    if (op.has_K) {
        acc("R.11", (2.0 * eps) * e5_form(op, ph, ph, pv));
        acc("R.12", (2.0 * eps) * e5_form(op, ph, pv, ph));
        acc("R.13", (2.0 * eps) * e5_form(op, pv, ph, ph));
        acc("R.14", (2.0 * eps) * e5_form(op, ph, ph, ph));
    }
    return r;
}

// ---- spec-level wrappers on sampled histories ----

inline NodePack node_at(const SpacetimeField& hist, double t) {
    auto stream = memory_stream(hist);
    return stream[hist.node_at(t)];
}

inline FieldBundle nonlinear_F(const SpacetimeField& W_hist, const FieldBundle& u0,
                               double epsilon, double t, TermLog* log = nullptr) {
    MembraneOperator op = MembraneOperator::build(u0);
    return eval_F(op, node_at(W_hist, t), epsilon, log);
}

inline FieldBundle frechet_derivative(const SpacetimeField& W_hist, const SpacetimeField& h_hist,
                                      const FieldBundle& u0, double epsilon, double t,
                                      TermLog* log = nullptr) {
    if (W_hist.nodes() != h_hist.nodes() || W_hist.dt != h_hist.dt)
        throw std::invalid_argument("frechet_derivative: mismatched histories");
    MembraneOperator op = MembraneOperator::build(u0);
    return eval_dF(op, node_at(W_hist, t), node_at(h_hist, t), epsilon, log);
}

inline FieldBundle remainder_R(const SpacetimeField& W_hist, const SpacetimeField& h_hist,
                               const FieldBundle& u0, double epsilon, double t,
                               TermLog* log = nullptr) {
    if (W_hist.nodes() != h_hist.nodes() || W_hist.dt != h_hist.dt)
        throw std::invalid_argument("remainder_R: mismatched histories");
    MembraneOperator op = MembraneOperator::build(u0);
    return eval_R(op, node_at(W_hist, t), node_at(h_hist, t), epsilon, log);
}

// Right-hand side of the time-differentiated membrane system assembled from
// an instantaneous state (u, v). Local-coordinate form derived from the
// nested brackets:
//   div( econj(gamma(u)) w^{-1} grad v )
//   + 2 sum_n [ d_1( w^{-1} UP^{mn} d_2 v^n ) - d_2( w^{-1} UP^{mn} d_1 v^n ) ]
//   - A3 - P2   (first-order w-derivative corrections; zero for w == 1),
// UP^{mn} = d_1 u^m d_2 u^n - d_2 u^m d_1 u^n.
inline FieldBundle modified_rhs_state(const FieldBundle& u, const FieldBundle& v) {
    using namespace detail_membrane;
    GridPtr g = u.grid();
    const auto& gr = *g;
    int nc = u.count();
    Grad du = grad_of(u);
    Grad dv = grad_of(v);
    MetricField gamma_u(g);
    for (int n = 0; n < nc; ++n) {
        gamma_u.g11 += multiply_dealiased(du.d1[n], du.d1[n]);
        gamma_u.g12 += multiply_dealiased(du.d1[n], du.d2[n]);
        gamma_u.g22 += multiply_dealiased(du.d2[n], du.d2[n]);
    }
    Field inv_w(g, 1.0), s_w(g, 1.0);
    if (!gr.unit_w) {
        for (size_t i = 0; i < gr.size(); ++i) {
            inv_w.v[i] = 1.0 / gr.w[i];
            s_w.v[i] = gr.inv_sqrt_w[i];
        }
    }

    FieldBundle r(g, nc);
    MetricField Mw = econj(gamma_u);
    if (!gr.unit_w) {
        Mw.g11 = hadamard(Mw.g11, inv_w);
        Mw.g12 = hadamard(Mw.g12, inv_w);
        Mw.g22 = hadamard(Mw.g22, inv_w);
    }
    for (int m = 0; m < nc; ++m) r[m] = div_form_grad(Mw, dv.d1[m], dv.d2[m]);

    // 2 d_a( eps^{ab} eps^{cd} w^{-1} d_c u^m d_d u^n d_b v_n ), factorized as
    // in the cubic curl form above with U = grad u in both memory slots.
    {
        std::vector<PaddedField> U1p, U2p, q1p, q2p;
        for (int n = 0; n < nc; ++n) {
            U1p.push_back(pad_field(du.d1[n]));
            U2p.push_back(pad_field(du.d2[n]));
            Field z1 = gr.unit_w ? dv.d1[n] : hadamard(inv_w, dv.d1[n]);
            Field z2 = gr.unit_w ? dv.d2[n] : hadamard(inv_w, dv.d2[n]);
            q1p.push_back(pad_field(z1));
            q2p.push_back(pad_field(z2));
        }
        PadAcc Y22(g), Y12(g), Y21(g), Y11(g);
        for (int n = 0; n < nc; ++n) {
            Y22.mac(U2p[n], q2p[n]);
            Y12.mac(U1p[n], q2p[n]);
            Y21.mac(U2p[n], q1p[n]);
            Y11.mac(U1p[n], q1p[n]);
        }
        PaddedField pY22 = pad_field(Y22.out()), pY12 = pad_field(Y12.out());
        PaddedField pY21 = pad_field(Y21.out()), pY11 = pad_field(Y11.out());
        for (int m = 0; m < nc; ++m) {
            PadAcc a1(g), a2(g);
            a1.mac(U1p[m], pY22);
            a1.mac(U2p[m], pY12, -1.0);
            a2.mac(U1p[m], pY21);
            a2.mac(U2p[m], pY11, -1.0);
            r[m] += 2.0 * (partial_derivative(a1.out(), 1) - partial_derivative(a2.out(), 2));
        }
    }

    if (!gr.unit_w) {
        Field q1 = hadamard(s_w, partial_derivative(s_w, 1));
        Field q2 = hadamard(s_w, partial_derivative(s_w, 2));
        for (int m = 0; m < nc; ++m) {
            Field a3 = hadamard(q1, multiply_dealiased(gamma_u.g22, dv.d1[m]) -
                                        multiply_dealiased(gamma_u.g12, dv.d2[m])) +
                       hadamard(q2, multiply_dealiased(gamma_u.g11, dv.d2[m]) -
                                        multiply_dealiased(gamma_u.g12, dv.d1[m]));
            r[m] -= a3;
        }
        Field dw1 = partial_derivative(inv_w, 1);
        Field dw2 = partial_derivative(inv_w, 2);
        for (int m = 0; m < nc; ++m) {
            Field p2(g);
            for (int n = 0; n < nc; ++n) {
                Field UP = multiply_dealiased(du.d1[m], du.d2[n]) -
                           multiply_dealiased(du.d2[m], du.d1[n]);
                p2 += hadamard(dw1, multiply_dealiased(UP, dv.d2[n])) -
                      hadamard(dw2, multiply_dealiased(UP, dv.d1[n]));
            }
            r[m] -= p2;
        }
    }
    return r;
}

// Same right-hand side at time t of a sampled velocity history, with
// gamma(u) assembled through the memory split of u = u0 + int_0^t v.
inline FieldBundle modified_rhs(const FieldBundle& u0, const SpacetimeField& v_hist, double t) {
    FieldBundle u = u0;
    u += time_integral(v_hist, t);
    return modified_rhs_state(u, v_hist.snaps[v_hist.node_at(t)]);
}

}  // namespace memlab
