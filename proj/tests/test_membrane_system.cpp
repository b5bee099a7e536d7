#include <catch2/catch_amalgamated.hpp>

#include "memlab/brackets.hpp"
#include "memlab/membrane.hpp"
#include "support.hpp"

using namespace memlab;
using namespace memlab::testing;

namespace {

SpacetimeField history_from(double dt, int nodes, const std::function<FieldBundle(double)>& f) {
    SpacetimeField u;
    u.t0 = 0.0;
    u.dt = dt;
    for (int j = 0; j < nodes; ++j) u.snaps.push_back(f(j * dt));
    return u;
}

// random smooth history a + t b + t^2 c
SpacetimeField random_history(const GridPtr& g, int nc, double dt, int nodes,
                              std::mt19937_64& rng, double amp = 1.0) {
    FieldBundle a = random_band_bundle(g, nc, 1, 4, rng);
    FieldBundle b = random_band_bundle(g, nc, 1, 4, rng);
    FieldBundle c = random_band_bundle(g, nc, 1, 4, rng);
    return history_from(dt, nodes, [&](double t) {
        FieldBundle s = a;
        axpy(t, b, s);
        axpy(t * t, c, s);
        s *= amp;
        return s;
    });
}

double bundle_norm(const FieldBundle& b) { return sup_norm(b); }

}  // namespace

TEST_CASE("nonlinear_F basics") {
    auto g = make_grid(32, 32);
    std::mt19937_64 rng(71);
    FieldBundle u0(g, 4);
    u0[0] = sample(g, [](double x1, double) { return std::sin(x1); });
    u0[1] = sample(g, [](double x1, double) { return std::cos(x1); });
    u0[2] = sample(g, [](double, double x2) { return std::sin(x2); });
    u0[3] = sample(g, [](double, double x2) { return std::cos(x2); });

    SECTION("F(0) = 0 exactly") {
        SpacetimeField zero = constant_history(FieldBundle(g, 4), 0.0, 0.1, 5);
        REQUIRE(bundle_norm(nonlinear_F(zero, u0, 0.3, 0.4)) == 0.0);
    }

    SECTION("term scaling exponents in the amplitude") {
        MembraneOperator op = MembraneOperator::build(u0);
        SpacetimeField W = random_history(g, 4, 0.1, 6, rng);
        auto packs = memory_stream(W);
        const NodePack& base = packs[5];
        auto norms_at = [&](double tau) {
            NodePack p(g, 4);
            p.val = tau * base.val;
            p.J1 = tau * base.J1;
            p.J2 = tau * base.J2;
            TermLog log;
            eval_F(op, p, 0.3, &log);
            return log;
        };
        auto n1 = norms_at(1.0), n2 = norms_at(0.5);
        auto ratio = [&](int i) { return n1[i].second / n2[i].second; };
        REQUIRE(ratio(0) == Catch::Approx(4.0).epsilon(1e-9));   // T1 quadratic
        REQUIRE(ratio(1) == Catch::Approx(4.0).epsilon(1e-9));   // T2 quadratic
        REQUIRE(ratio(2) == Catch::Approx(8.0).epsilon(1e-9));   // T3 cubic
        REQUIRE(ratio(3) == Catch::Approx(8.0).epsilon(1e-9));   // T4 cubic
    }

    SECTION("linear K-term scaling on a weighted grid") {
        auto gw = make_grid(32, 32, two_pi, two_pi, [](double x1, double x2) {
            return 1.0 + 0.25 * std::cos(x1) + 0.15 * std::sin(x2);
        });
        FieldBundle u0w(gw, 2);
        u0w[0] = sample(gw, [](double x1, double) { return std::sin(x1); });
        u0w[1] = sample(gw, [](double, double x2) { return std::sin(x2); });
        MembraneOperator op = MembraneOperator::build(u0w);
        std::mt19937_64 r2(5);
        SpacetimeField W = random_history(gw, 2, 0.1, 6, r2);
        auto packs = memory_stream(W);
        std::vector<double> taus{1e-2, 1e-3, 1e-4}, t5;
        for (double tau : taus) {
            NodePack p(gw, 2);
            p.val = tau * packs[5].val;
            p.J1 = tau * packs[5].J1;
            p.J2 = tau * packs[5].J2;
            TermLog log;
            eval_F(op, p, 0.3, &log);
            t5.push_back(log[4].second);
        }
        REQUIRE(loglog_slope(taus, t5) == Catch::Approx(1.0).margin(0.02));
    }

    SECTION("single-mode W against an independent fine-grid evaluation") {
        auto gf = make_grid(64, 64);
        SpacetimeField W = history_from(0.05, 9, [&](double t) {
            FieldBundle s(g, 4);
            s[0] = t * sample(g, [](double x1, double x2) { return std::sin(x1 + 2.0 * x2); });
            return s;
        });
        double eps = 0.2, t = 0.4;
        TermLog log;
        FieldBundle F = nonlinear_F(W, u0, eps, t, &log);

        // independent path: pointwise products on the doubled grid
        FieldBundle u0f(gf, 4);
        for (int m = 0; m < 4; ++m) u0f[m] = prolong(u0[m], gf);
        Field base = sample(gf, [](double x1, double x2) { return std::sin(x1 + 2.0 * x2); });
        FieldBundle Wf(gf, 4), J1f(gf, 4), J2f(gf, 4);
        Wf[0] = t * base;
        J1f[0] = (t * t / 2.0) * partial_derivative(base, 1);  // exact memory of t*base
        J2f[0] = (t * t / 2.0) * partial_derivative(base, 2);
        std::vector<Field> G1(4), G2(4), D1(4), D2(4);
        for (int m = 0; m < 4; ++m) {
            G1[m] = partial_derivative(u0f[m], 1);
            G2[m] = partial_derivative(u0f[m], 2);
            D1[m] = partial_derivative(Wf[m], 1);
            D2[m] = partial_derivative(Wf[m], 2);
        }
        auto div_econj_pw = [&](const Field& S11, const Field& S12, const Field& S21,
                                const Field& S22, const Field& d1, const Field& d2) {
            Field f1 = hadamard(S22, d1) - hadamard(S21, d2);
            Field f2 = -1.0 * hadamard(S12, d1) + hadamard(S11, d2);
            return partial_derivative(f1, 1) + partial_derivative(f2, 2);
        };
        FieldBundle T1(gf, 4), T2(gf, 4), T3(gf, 4), T4(gf, 4);
        Field S11(gf), S12(gf), S21(gf), S22(gf), Q11(gf), Q12(gf), Q21(gf), Q22(gf);
        for (int n = 0; n < 4; ++n) {
            S11 += hadamard(G1[n], J1f[n]);
            S12 += hadamard(G1[n], J2f[n]);
            S21 += hadamard(G2[n], J1f[n]);
            S22 += hadamard(G2[n], J2f[n]);
            Q11 += hadamard(J1f[n], J1f[n]);
            Q12 += hadamard(J1f[n], J2f[n]);
            Q21 += hadamard(J2f[n], J1f[n]);
            Q22 += hadamard(J2f[n], J2f[n]);
        }
        for (int m = 0; m < 4; ++m) {
            T1[m] = div_econj_pw(S11, S12, S21, S22, D1[m], D2[m]);
            T2[m] = div_econj_pw(S11, S21, S12, S22, D1[m], D2[m]);  // transposed coefficient
            T3[m] = eps * div_econj_pw(Q11, Q12, Q21, Q22, D1[m], D2[m]);
            Field a1(gf), a2(gf);
            for (int n = 0; n < 4; ++n) {
                Field P = hadamard(J1f[m], J2f[n]) - hadamard(J2f[m], J1f[n]);
                a1 += hadamard(P, D2[n]);
                a2 += hadamard(P, D1[n]);
            }
            T4[m] = (-2.0 * eps) * (partial_derivative(a1, 1) - partial_derivative(a2, 2));
        }
        FieldBundle Ff = T1 + T2 + T3 + T4;  // T5 = 0 on w == 1
        FieldBundle Fr(g, 4);
        for (int m = 0; m < 4; ++m) Fr[m] = restrict_sample(Ff[m], g);
        double scale = std::max(bundle_norm(F), 1e-300);
        REQUIRE(bundle_norm(F - Fr) < 1e-8 * scale);
        REQUIRE(std::fabs(log[0].second - sup_norm(T1[0])) < 1e-6 * scale);
        REQUIRE(std::fabs(log[1].second - sup_norm(T2[0])) < 1e-6 * scale);
        REQUIRE(std::fabs(log[3].second - sup_norm(T4[0])) < 1e-6 * scale);
    }
}

TEST_CASE("Taylor identity and Frechet derivative") {
    auto gw = make_grid(32, 32, two_pi, two_pi, [](double x1, double x2) {
        return 1.0 + 0.2 * std::cos(x1) + 0.1 * std::sin(x1 + x2);
    });
    std::mt19937_64 rng(301);
    FieldBundle u0 = random_band_bundle(gw, 3, 1, 3, rng);
    MembraneOperator op = MembraneOperator::build(u0);
    double eps = 0.4;

    SECTION("identity F(v+h) = F(v) + dF(v)h + R(h) to roundoff, 20 draws") {
        for (int draw = 0; draw < 20; ++draw) {
            SpacetimeField v = random_history(gw, 3, 0.07, 6, rng);
            SpacetimeField h = random_history(gw, 3, 0.07, 6, rng, 0.7);
            SpacetimeField vh = v;
            for (int j = 0; j < v.nodes(); ++j) vh.snaps[j] += h.snaps[j];
            int node = 5;
            auto pv = memory_stream(v)[node];
            auto ph = memory_stream(h)[node];
            auto pvh = memory_stream(vh)[node];
            FieldBundle lhs = eval_F(op, pvh, eps);
            FieldBundle rhs =
                eval_F(op, pv, eps) + eval_dF(op, pv, ph, eps) + eval_R(op, pv, ph, eps);
            double scale = std::max({bundle_norm(lhs), bundle_norm(rhs), 1e-300});
            REQUIRE(bundle_norm(lhs - rhs) < 1e-12 * scale);
        }
    }

    SECTION("dF is linear in h") {
        SpacetimeField v = random_history(gw, 3, 0.07, 6, rng);
        SpacetimeField h1 = random_history(gw, 3, 0.07, 6, rng);
        SpacetimeField h2 = random_history(gw, 3, 0.07, 6, rng);
        auto pv = memory_stream(v)[5];
        auto p1 = memory_stream(h1)[5];
        auto p2 = memory_stream(h2)[5];
        NodePack comb(gw, 3);
        comb.val = 2.5 * p1.val + p2.val;
        comb.J1 = 2.5 * p1.J1 + p2.J1;
        comb.J2 = 2.5 * p1.J2 + p2.J2;
        FieldBundle lhs = eval_dF(op, pv, comb, eps);
        FieldBundle rhs = 2.5 * eval_dF(op, pv, p1, eps) + eval_dF(op, pv, p2, eps);
        REQUIRE(bundle_norm(lhs - rhs) < 1e-12 * bundle_norm(lhs));
    }

    SECTION("central differences converge to dF at second order") {
        SpacetimeField v = random_history(gw, 3, 0.07, 6, rng);
        SpacetimeField h = random_history(gw, 3, 0.07, 6, rng);
        auto pv = memory_stream(v)[5];
        auto ph = memory_stream(h)[5];
        FieldBundle dF = eval_dF(op, pv, ph, eps);
        std::vector<double> taus{0.4, 0.2, 0.1, 0.05}, errs;
        for (double tau : taus) {
            NodePack plus(gw, 3), minus(gw, 3);
            plus.val = pv.val + tau * ph.val;
            plus.J1 = pv.J1 + tau * ph.J1;
            plus.J2 = pv.J2 + tau * ph.J2;
            minus.val = pv.val - tau * ph.val;
            minus.J1 = pv.J1 - tau * ph.J1;
            minus.J2 = pv.J2 - tau * ph.J2;
            FieldBundle cd =
                (1.0 / (2.0 * tau)) * (eval_F(op, plus, eps) - eval_F(op, minus, eps));
            errs.push_back(bundle_norm(cd - dF));
        }
        REQUIRE(loglog_slope(taus, errs) == Catch::Approx(2.0).margin(0.1));
    }

    SECTION("dF at W = 0 keeps only the K-weighted linear term") {
        NodePack zero(gw, 3);
        std::mt19937_64 r2(9);
        SpacetimeField h = random_history(gw, 3, 0.07, 6, r2);
        auto ph = memory_stream(h)[5];
        TermLog log;
        FieldBundle out = eval_dF(op, zero, ph, eps, &log);
        for (const auto& [name, norm] : log) {
            if (name != "dF.11") REQUIRE(norm == 0.0);
        }
        REQUIRE(bundle_norm(out) > 0.0);  // w != 1 here, so the term is alive
        auto g1 = make_grid(32, 32);
        FieldBundle u01 = random_band_bundle(g1, 2, 1, 3, r2);
        MembraneOperator op1 = MembraneOperator::build(u01);
        NodePack z1(g1, 2);
        SpacetimeField h1 = random_history(g1, 2, 0.07, 6, r2);
        REQUIRE(bundle_norm(eval_dF(op1, z1, memory_stream(h1)[5], eps)) == 0.0);
    }
}

TEST_CASE("remainder structure") {
    auto g = make_grid(32, 32);
    std::mt19937_64 rng(401);
    FieldBundle u0(g, 4);
    u0[0] = sample(g, [](double x1, double) { return std::sin(x1); });
    u0[1] = sample(g, [](double x1, double) { return std::cos(x1); });
    u0[2] = sample(g, [](double, double x2) { return std::sin(x2); });
    u0[3] = sample(g, [](double, double x2) { return std::cos(x2); });
    MembraneOperator op = MembraneOperator::build(u0);
    double eps = 0.3;

    SECTION("R(0) = 0") {
        SpacetimeField v = random_history(g, 4, 0.07, 6, rng);
        NodePack zero(g, 4);
        REQUIRE(bundle_norm(eval_R(op, memory_stream(v)[5], zero, eps)) == 0.0);
    }

    SECTION("R(tau h) is quadratic as tau -> 0") {
        SpacetimeField v = random_history(g, 4, 0.07, 6, rng);
        SpacetimeField h = random_history(g, 4, 0.07, 6, rng);
        auto pv = memory_stream(v)[5];
        auto ph = memory_stream(h)[5];
        std::vector<double> taus{1e-1, 3e-2, 1e-2, 3e-3}, ns;
        for (double tau : taus) {
            NodePack p(g, 4);
            p.val = tau * ph.val;
            p.J1 = tau * ph.J1;
            p.J2 = tau * ph.J2;
            ns.push_back(bundle_norm(eval_R(op, pv, p, eps)));
        }
        REQUIRE(loglog_slope(taus, ns) == Catch::Approx(2.0).margin(0.1));
    }

    SECTION("Lemma-form bound with a finite fitted constant, s = 2") {
        double worst = 0.0;
        double dt = 0.06;
        int nodes = 7;
        for (int draw = 0; draw < 20; ++draw) {
            SpacetimeField v = random_history(g, 4, dt, nodes, rng, 0.5);
            SpacetimeField h = random_history(g, 4, dt, nodes, rng, 0.3);
            auto sv = memory_stream(v);
            auto sh = memory_stream(h);
            SpacetimeField R;
            R.t0 = 0;
            R.dt = dt;
            for (int j = 0; j < nodes; ++j) R.snaps.push_back(eval_R(op, sv[j], sh[j], eps));
            double T = dt * (nodes - 1);
            double lhs = spacetime_norm(R, 2.0, T);
            double nh = spacetime_norm(h, 4.0, T);
            double nw = spacetime_norm(v, 3.0, T);
            double rhs = nh * nh * (1.0 + nw) + nh * nh * nh;
            worst = std::max(worst, lhs / rhs);
        }
        REQUIRE(std::isfinite(worst));
        REQUIRE(worst > 0.0);
        REQUIRE(worst < 1e3);  // sane scale for band-4 data on the 2pi torus
    }

    SECTION("eps-weighted terms vanish linearly in eps") {
        SpacetimeField v = random_history(g, 4, 0.07, 6, rng);
        auto pv = memory_stream(v)[5];
        std::vector<double> epss{1e-1, 1e-2, 1e-3}, cubic;
        for (double e : epss) {
            TermLog log;
            eval_F(op, pv, e, &log);
            cubic.push_back(log[2].second + log[3].second);
        }
        REQUIRE(loglog_slope(epss, cubic) == Catch::Approx(1.0).margin(0.05));
    }
}

TEST_CASE("modified_rhs") {
    SECTION("zero velocity history") {
        auto g = make_grid(32, 32);
        std::mt19937_64 rng(21);
        FieldBundle u0 = random_band_bundle(g, 3, 1, 3, rng);
        SpacetimeField v = constant_history(FieldBundle(g, 3), 0.0, 0.05, 5);
        REQUIRE(bundle_norm(modified_rhs(u0, v, 0.2)) == 0.0);
    }

    SECTION("t = 0 with constant-in-time v matches the frozen-coefficient assembly") {
        auto g = make_grid(32, 32);
        std::mt19937_64 rng(23);
        FieldBundle u0 = random_band_bundle(g, 3, 1, 3, rng);
        FieldBundle vb = random_band_bundle(g, 3, 1, 3, rng);
        SpacetimeField v = constant_history(vb, 0.0, 0.05, 5);
        FieldBundle got = modified_rhs(u0, v, 0.0);
        MembraneOperator op = MembraneOperator::build(u0);
        FieldBundle expect = op.principal(vb);
        for (int m = 0; m < 3; ++m) {
            Field a1(g), a2(g);
            for (int n = 0; n < 3; ++n) {
                Field UP = multiply_dealiased(op.g01[m], op.g02[n]) -
                           multiply_dealiased(op.g02[m], op.g01[n]);
                a1 += multiply_dealiased(UP, partial_derivative(vb[n], 2));
                a2 += multiply_dealiased(UP, partial_derivative(vb[n], 1));
            }
            expect[m] += 2.0 * (partial_derivative(a1, 1) - partial_derivative(a2, 2));
        }
        REQUIRE(bundle_norm(got - expect) < 1e-10 * std::max(1.0, bundle_norm(expect)));
    }

    SECTION("manufactured linear-in-t history against the doubled-resolution evaluation") {
        auto g = make_grid(32, 32), gf = make_grid(64, 64);
        FieldBundle u0(g, 2), u0f(gf, 2);
        u0[0] = sample(g, [](double x1, double) { return std::sin(x1); });
        u0[1] = sample(g, [](double, double x2) { return std::sin(x2); });
        for (int m = 0; m < 2; ++m) u0f[m] = prolong(u0[m], gf);
        double dt = 1e-3, t = 0.2;
        int nodes = 201;
        auto vfun = [](const GridPtr& gg, double tt) {
            FieldBundle s(gg, 2);
            s[0] = tt * sample(gg, [](double x1, double) { return std::sin(x1); });
            return s;
        };
        SpacetimeField v = history_from(dt, nodes, [&](double tt) { return vfun(g, tt); });
        SpacetimeField vf = history_from(dt, nodes, [&](double tt) { return vfun(gf, tt); });
        FieldBundle coarse = modified_rhs(u0, v, t);
        FieldBundle fine = modified_rhs(u0f, vf, t);
        FieldBundle fr(g, 2);
        for (int m = 0; m < 2; ++m) fr[m] = restrict_sample(fine[m], g);
        REQUIRE(bundle_norm(coarse - fr) < 1e-6 * bundle_norm(coarse));
    }

    SECTION("agrees with the time derivative of the nested-bracket RHS") {
        for (bool weighted : {false, true}) {
            auto g = weighted
                         ? make_grid(64, 64, two_pi, two_pi,
                                     [](double x1, double x2) {
                                         return 1.0 + 0.2 * std::cos(x1) + 0.1 * std::sin(x2);
                                     })
                         : make_grid(64, 64);
            double c = 0.7;
            auto u_at = [&](double t) {
                FieldBundle u(g, 4);
                u[0] = sample(g, [&](double x1, double) { return std::sin(x1 + c * t); });
                u[1] = sample(g, [&](double x1, double) { return std::cos(x1 + c * t); });
                u[2] = sample(g, [&](double, double x2) { return std::sin(x2); });
                u[3] = sample(g, [&](double, double x2) { return std::cos(x2); });
                return u;
            };
            auto v_at = [&](double t) {
                FieldBundle v(g, 4);
                v[0] = c * sample(g, [&](double x1, double) { return std::cos(x1 + c * t); });
                v[1] = -c * sample(g, [&](double x1, double) { return std::sin(x1 + c * t); });
                return v;
            };
            double t = 0.3, dt = 5e-4;
            int nodes = 601;
            SpacetimeField v = history_from(dt, nodes, v_at);
            REQUIRE(sup_norm(constraint_residual(v_at(t), u_at(t))) < 1e-10);
            FieldBundle got = modified_rhs(u_at(0.0), v, t);
            FieldBundle f1 = membrane_rhs(u_at(t + dt)), fm1 = membrane_rhs(u_at(t - dt));
            FieldBundle f2 = membrane_rhs(u_at(t + 2 * dt)), fm2 = membrane_rhs(u_at(t - 2 * dt));
            FieldBundle ddt = (1.0 / (12.0 * dt)) * (8.0 * (f1 - fm1) - (f2 - fm2));
            REQUIRE(bundle_norm(got - ddt) < 1e-4 * std::max(1.0, bundle_norm(ddt)));
        }
    }
}
