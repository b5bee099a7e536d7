#pragma once

#include <chrono>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "memlab/coefficient_map.hpp"
#include "memlab/degenerate_wave.hpp"
#include "memlab/evolve.hpp"
#include "memlab/membrane.hpp"
#include "memlab/rescale.hpp"

namespace memlab {

// Dyadic index schedule: s_l = s_bar + (s - s_bar)/2^l, N_l = 2^l.
struct IterationSchedule {
    double s_bar = 2.0, s = 4.0, s0 = 2.0, s_tilde = 4.5;
    int k = 6;
    double d = 0.5;
    int max_levels = 8;
    double floor_tolerance = 1e-10;
    std::vector<double> s_l;
    std::vector<int> N_l;
    std::vector<double> alpha_l;
};

inline IterationSchedule make_schedule(double s_bar, double s, double s0, int k, double d,
                                       int max_levels, double floor_tolerance = 1e-10,
                                       double s_tilde = std::numeric_limits<double>::quiet_NaN()) {
    if (std::isnan(s_tilde)) s_tilde = 0.5 * (s + (k - 1));
    if (!(2.0 <= s0 && s0 < s_bar && s_bar < s && s < s_tilde && s_tilde <= k - 1))
        throw std::invalid_argument(
            "make_schedule: index chain 2 <= s0 < s_bar < s < s_tilde <= k-1 violated");
    if (!(d > 0.0 && d < 1.0)) throw std::invalid_argument("make_schedule: d in (0,1) required");
    if (max_levels < 1) throw std::invalid_argument("make_schedule: max_levels >= 1");
    IterationSchedule sc;
    sc.s_bar = s_bar;
    sc.s = s;
    sc.s0 = s0;
    sc.s_tilde = s_tilde;
    sc.k = k;
    sc.d = d;
    sc.max_levels = max_levels;
    sc.floor_tolerance = floor_tolerance;
    for (int l = 0; l <= max_levels + 1; ++l) {
        sc.s_l.push_back(s_bar + (s - s_bar) / std::pow(2.0, l));
        sc.N_l.push_back(1 << l);
        sc.alpha_l.push_back(l == 0 ? 0.0 : sc.s_l[l - 1] - sc.s_l[l]);
    }
    return sc;
}

struct LevelRecord {
    int l = 0;
    int N = 0;
    double s_l = 0.0;
    double norm_h = 0.0;   // |||h^l|||_{s_l, T}
    double norm_E = 0.0;   // |||E^l|||_{s_l, T}
    double delta = 0.0;    // regularization used by the solve that produced h^l
    double mismatch_norm = 0.0, taylor_norm = 0.0, window_norm = 0.0;
    double wallclock_ms = 0.0;
};

struct ConvergenceReport {
    std::vector<LevelRecord> levels;
    bool converged = false;
    bool diverged = false;
    bool ball_exit = false;
    int fail_level = -1;
    double d_fit = std::numeric_limits<double>::quiet_NaN();
    double slope_fit = std::numeric_limits<double>::quiet_NaN();
    double norm_W0 = 0.0, norm_E0 = 0.0;
    double floor = 0.0;
    double epsilon = 0.0;
    double dt = 0.0;
};

struct NashMoserOptions {
    double delta0 = 5e-2;
    double delta_couple = 10.0;  // gain of the residual-proportional delta schedule
    double R_ball = 0.9;
    double dt = 0.0;  // 0 -> from the CFL bound
    double cfl_safety = 0.4;
    bool nonlinear = true;   // false: F disabled (linear sanity mode)
    bool smoothing = true;   // false: all cutoffs at Nyquist
    double smallness_limit = 1e6;
};

enum class SeedMode { linear_solve, zero };

// Nash-Moser state: level, iterate (as node streams), residual, telescoped
// increments.
struct IterationState {
    int level = 0;
    std::vector<NodePack> v;           // current iterate v^l = ell + sum h^i (values + memory)
    std::vector<FieldBundle> E;        // residual field at every node
    std::vector<SpacetimeField> h_list;  // h^0 = W^0, then increments
    std::vector<FieldBundle> W;        // running sum of increments (telescoping check)
    double norm_E = 0.0;               // |||E^l|||_{s_{l+1}, T}
    double norm_E0 = 0.0;              // initial residual norm (delta coupling reference)
};

// sup over stored times of the spatial H^s norm (no time derivatives); the
// ball and smallness gates use this reading, since the full spacetime norm
// carries the eps^{-1} oscillation of the second time derivative.
inline double sup_sobolev(const std::vector<FieldBundle>& snaps, double s) {
    double best = 0.0;
    for (const auto& f : snaps) best = std::max(best, sobolev_norm(f, s));
    return best;
}

namespace detail_nm {

inline SpacetimeField wrap(const std::vector<FieldBundle>& snaps, double dt) {
    SpacetimeField f;
    f.t0 = 0.0;
    f.dt = dt;
    f.snaps = snaps;
    return f;
}

inline SpacetimeField wrap_vals(const std::vector<NodePack>& packs, double dt) {
    SpacetimeField f;
    f.t0 = 0.0;
    f.dt = dt;
    for (const auto& p : packs) f.snaps.push_back(p.val);
    return f;
}

}  // namespace detail_nm

// G_N(X) = d_tt X - eps^{-1} A(X) - eps^2 Pi_N F(X) evaluated on a sampled
// history (centered time differences; one-sided at the ends).
inline SpacetimeField approx_operator(const SpacetimeField& X, const MembraneProblem& p, int N) {
    MembraneOperator op = MembraneOperator::build(p.u0);
    auto stream = memory_stream(X);
    SpacetimeField out;
    out.t0 = X.t0;
    out.dt = X.dt;
    double e2 = p.epsilon * p.epsilon;
    for (int j = 0; j < X.nodes(); ++j) {
        FieldBundle r = time_derivative(X, 2, j);
        axpy(-1.0 / p.epsilon, op.principal(X.snaps[j]), r);
        FieldBundle f = eval_F(op, stream[j], p.epsilon);
        axpy(-e2, low_pass(f, N), r);
        out.snaps.push_back(std::move(r));
    }
    return out;
}

class NashMoserDriver {
  public:
    NashMoserDriver(const MembraneProblem& p, const IterationSchedule& sc,
                    const NashMoserOptions& o = {})
        : problem(p), sched(sc), opt(o), op(MembraneOperator::build(p.u0)) {
        if (p.gamma0 && p.gamma_x) {
            gamma0 = *p.gamma0;
            gamma_x = *p.gamma_x;
        } else {
            auto fac = factorization_check(p.u0);
            gamma0 = fac.gamma0;
            gamma_x = fac.gamma_cd;
        }
        base_coeffs =
            map_membrane_to_toy(std::vector<NodePack>{}, op, p.epsilon, gamma0, gamma_x);
        double dtmax = cfl_dt_max(regularize(base_coeffs, opt.delta0), p.T, opt.cfl_safety);
        dt = opt.dt > 0.0 ? opt.dt : dtmax;
        if (dt > dtmax)
            throw CflViolation("nash_moser: dt exceeds the CFL bound " + std::to_string(dtmax));
        steps = std::max(4, static_cast<int>(std::lround(p.T / dt)));
        dt = p.T / steps;
        // ell(t) = v0 + t v1 node stream with exact trapezoid memory
        SpacetimeField ellf;
        ellf.t0 = 0.0;
        ellf.dt = dt;
        for (int j = 0; j <= steps; ++j) {
            FieldBundle s = p.v0;
            axpy(j * dt, p.v1, s);
            ellf.snaps.push_back(std::move(s));
        }
        ell_stream = memory_stream(ellf);
        ellA.reserve(steps + 1);
        for (const auto& pk : ell_stream)
            ellA.push_back((1.0 / p.epsilon) * op.principal(pk.val));
    }

    int cutoff(int level_index) const {
        if (!opt.smoothing) return std::max(problem.grid->nyquist1(), problem.grid->nyquist2());
        return sched.N_l[std::min<size_t>(level_index, sched.N_l.size() - 1)];
    }

    // Seed W^0 and the initial residual E^0 = G_{N_1}(v^0).
    IterationState init(SeedMode mode = SeedMode::linear_solve) {
        IterationState st;
        st.level = 0;
        int nc = problem.num_components();
        SpacetimeField W0;
        if (mode == SeedMode::zero) {
            W0 = constant_history(FieldBundle(problem.grid, nc), 0.0, dt, steps + 1);
        } else {
            DegenerateCoefficients c = regularize(base_coeffs, opt.delta0);
            c.forcing = [this](int node, double) { return ellA[node]; };
            W0 = solve_linear(c, FieldBundle(problem.grid, nc), FieldBundle(problem.grid, nc),
                              problem.T, dt, 1.0);
        }
        st.h_list.push_back(W0);
        auto w_stream = memory_stream(W0);
        st.v = ell_stream;
        st.W.assign(steps + 1, FieldBundle(problem.grid, nc));
        for (int j = 0; j <= steps; ++j) {
            st.v[j].val += w_stream[j].val;
            st.v[j].J1 += w_stream[j].J1;
            st.v[j].J2 += w_stream[j].J2;
            st.W[j] += W0.snaps[j];
        }
        // E^0(n) = [S_delta0(W0) - eps^{-1} A(W0)] - eps^2 Pi_{N_1} F(v^0); the
        // bracket vanishes for the zero seed.
        st.E.clear();
        double e2 = problem.epsilon * problem.epsilon;
        int N1 = cutoff(1);
        DegenerateCoefficients cd = regularize(base_coeffs, opt.delta0);
        for (int j = 0; j <= steps; ++j) {
            FieldBundle e(problem.grid, nc);
            if (mode == SeedMode::linear_solve) {
                std::array<FieldBundle, 2> J{w_stream[j].J1, w_stream[j].J2};
                e = solver_rhs(cd, W0.snaps[j], J, j, j * dt);
                axpy(-1.0 / problem.epsilon, op.principal(W0.snaps[j]), e);
            } else {
                e -= ellA[j];  // G(ell) carries the full data forcing
            }
            if (opt.nonlinear) {
                FieldBundle f = eval_F(op, st.v[j], problem.epsilon);
                axpy(-e2, low_pass(f, N1), e);
            }
            st.E.push_back(std::move(e));
        }
        st.norm_E = spacetime_norm(detail_nm::wrap(st.E, dt), sched.s0, problem.T);
        st.norm_E0 = st.norm_E;
        return st;
    }

    // One iteration level: solve E^l + L(h^{l+1}) = 0 with the delta-coupled
    // degenerate solver, update the iterate, and rebuild the residual through
    // the exact discrete identity (solver mismatch + Taylor remainder +
    // smoothing-window change).
    IterationState step(const IterationState& in, LevelRecord* rec = nullptr) {
        auto t_start = std::chrono::steady_clock::now();
        int nc = problem.num_components();
        int lev = in.level;
        int Ncur = cutoff(lev + 1);
        int Nnext = cutoff(lev + 2);
        double eps = problem.epsilon;
        double e2 = eps * eps;
        // regularization coupled to the residual in units of the initial one,
        // so the delta-induced solve error contracts with the Newton error
        double ratio = in.norm_E0 > 0.0 ? std::min(1.0, in.norm_E / in.norm_E0) : 1.0;
        double delta = std::min(opt.delta0, opt.delta0 * opt.delta_couple * ratio);
        if (!(delta > 0.0)) delta = opt.delta0;
        if (!opt.nonlinear && sup_norm(base_coeffs.varrho) > 0.0) delta = 0.0;

        DegenerateCoefficients c = opt.nonlinear
                                       ? map_membrane_to_toy(in.v, op, eps, gamma0, gamma_x)
                                       : base_coeffs;
        if (delta > 0.0) c = regularize(c, delta);
        c.forcing = [&in](int node, double) { return -1.0 * in.E[node]; };
        FieldBundle zero(problem.grid, nc);
        SpacetimeField h = solve_linear(c, zero, zero, problem.T, dt, 1.0);
        auto h_stream = memory_stream(h);

        IterationState out;
        out.level = lev + 1;
        out.norm_E0 = in.norm_E0;
        out.h_list = in.h_list;
        out.h_list.push_back(h);
        out.v = in.v;
        out.W = in.W;
        for (int j = 0; j <= steps; ++j) {
            out.v[j].val += h_stream[j].val;
            out.v[j].J1 += h_stream[j].J1;
            out.v[j].J2 += h_stream[j].J2;
            out.W[j] += h.snaps[j];
        }

        double mis_sup = 0.0, tay_sup = 0.0, win_sup = 0.0;
        out.E.clear();
        for (int j = 0; j <= steps; ++j) {
            // solver-vs-target mismatch, time-local
            std::array<FieldBundle, 2> J{h_stream[j].J1, h_stream[j].J2};
            FieldBundle mis = solver_rhs(c, h.snaps[j], J, j, j * dt);
            axpy(-1.0 / eps, op.principal(h.snaps[j]), mis);
            if (opt.nonlinear) {
                FieldBundle df = eval_dF(op, in.v[j], h_stream[j], eps);
                axpy(-e2, low_pass(df, Ncur), mis);
            }
            FieldBundle e = mis;
            if (opt.nonlinear) {
                FieldBundle tay =
                    (-e2) * low_pass(eval_R(op, in.v[j], h_stream[j], eps), Ncur);
                FieldBundle win(problem.grid, nc);
                if (Nnext != Ncur) {
                    FieldBundle f = eval_F(op, out.v[j], eps);
                    win = (-e2) * (low_pass(f, Nnext) - low_pass(f, Ncur));
                }
                tay_sup = std::max(tay_sup, sup_norm(tay));
                win_sup = std::max(win_sup, sup_norm(win));
                e += tay;
                e += win;
            }
            mis_sup = std::max(mis_sup, sup_norm(mis));
            out.E.push_back(std::move(e));
        }
        double sl = sched.s_l[std::min<size_t>(lev + 1, sched.s_l.size() - 1)];
        out.norm_E = spacetime_norm(detail_nm::wrap(out.E, dt), sl, problem.T);
        if (rec) {
            rec->l = out.level;
            rec->N = Ncur;
            rec->s_l = sl;
            rec->norm_h = spacetime_norm(h, sl, problem.T);
            rec->norm_E = out.norm_E;
            rec->delta = delta;
            rec->mismatch_norm = mis_sup;
            rec->taylor_norm = tay_sup;
            rec->window_norm = win_sup;
            rec->wallclock_ms = std::chrono::duration<double, std::milli>(
                                    std::chrono::steady_clock::now() - t_start)
                                    .count();
        }
        return out;
    }

    struct RunResult {
        SpacetimeField v_limit;  // ell + sum h^i
        ConvergenceReport report;
        IterationState state;
    };

    RunResult run(SeedMode mode = SeedMode::linear_solve) {
        RunResult rr;
        rr.report.epsilon = problem.epsilon;
        rr.report.dt = dt;
        rr.report.floor = sched.floor_tolerance;
        IterationState st = init(mode);
        rr.report.norm_E0 = st.norm_E;
        rr.report.norm_W0 = spacetime_norm(detail_nm::wrap(st.W, dt), sched.s0, problem.T);
        if (rr.report.norm_W0 > opt.smallness_limit || rr.report.norm_E0 > opt.smallness_limit)
            throw std::runtime_error("nash_moser: seed violates the smallness requirement");
        {
            LevelRecord r0;
            r0.l = 0;
            r0.N = cutoff(1);
            r0.s_l = sched.s0;
            r0.norm_E = st.norm_E;
            r0.delta = opt.delta0;
            rr.report.levels.push_back(r0);
        }
        int grow_streak = 0;
        for (int l = 0; l < sched.max_levels; ++l) {
            LevelRecord rec;
            IterationState next = step(st, &rec);
            rr.report.levels.push_back(rec);
            double seed_scale = std::max(1.0, sup_sobolev(next.h_list.front().snaps, sched.s_bar));
            std::vector<FieldBundle> excess = next.W;
            for (int j = 0; j <= steps; ++j) excess[j] -= next.h_list.front().snaps[j];
            double ballnorm = sup_sobolev(excess, sched.s_bar) / seed_scale;
            if (ballnorm >= opt.R_ball) {
                rr.report.ball_exit = true;
                rr.report.fail_level = next.level;
                st = std::move(next);
                break;
            }
            if (next.norm_E > st.norm_E) {
                if (++grow_streak >= 2) {
                    rr.report.diverged = true;
                    rr.report.fail_level = next.level;
                    st = std::move(next);
                    break;
                }
            } else {
                grow_streak = 0;
            }
            st = std::move(next);
            if (st.norm_E <= sched.floor_tolerance * std::max(1.0, st.norm_E0)) {
                rr.report.converged = true;
                break;
            }
        }
        if (!rr.report.converged && !rr.report.diverged && !rr.report.ball_exit &&
            st.norm_E <= 1e3 * sched.floor_tolerance * std::max(1.0, st.norm_E0))
            rr.report.converged = true;

        // decay fits over usable levels (above floor, l >= 1)
        std::vector<double> ls, lls;
        double e0ref = std::max(rr.report.norm_E0, 1e-300);
        for (const auto& rec : rr.report.levels) {
            double en = rec.norm_E / e0ref;
            if (rec.l < 2 || en <= rr.report.floor || en >= 1.0) continue;
            ls.push_back(rec.l);
            lls.push_back(std::log(std::log(1.0 / en)));
        }
        if (ls.size() >= 2) {
            double sx = 0, sy = 0, sxx = 0, sxy = 0;
            for (size_t i = 0; i < ls.size(); ++i) {
                sx += ls[i];
                sy += lls[i];
                sxx += ls[i] * ls[i];
                sxy += ls[i] * lls[i];
            }
            double n = static_cast<double>(ls.size());
            rr.report.slope_fit = (n * sxy - sx * sy) / (n * sxx - sx * sx);
            const auto& last = rr.report.levels.back();
            double en = last.norm_E / e0ref;
            if (en > 0.0 && en < 1.0)
                rr.report.d_fit = std::pow(en, 1.0 / std::pow(2.0, last.l));
        }
        rr.v_limit = detail_nm::wrap_vals(st.v, dt);
        rr.state = std::move(st);
        return rr;
    }

    const MembraneProblem problem;
    const IterationSchedule sched;
    const NashMoserOptions opt;
    MembraneOperator op;
    Field gamma0;
    MetricField gamma_x;
    DegenerateCoefficients base_coeffs;
    double dt = 0.0;
    int steps = 0;
    std::vector<NodePack> ell_stream;
    std::vector<FieldBundle> ellA;
};

struct UniquenessReport {
    double final_rel_l2 = 0.0;
    std::vector<double> diff_norms;  // |||v_a^l - v_b^l|||_{s_l, T} per level
    bool agree = false;
    ConvergenceReport run_a, run_b;
};

// Contraction check: two admissible starts must collapse onto one limit.
inline UniquenessReport uniqueness_check(const MembraneProblem& p, const IterationSchedule& sc,
                                         const NashMoserOptions& base_opt = {},
                                         double tol = 1e-6) {
    NashMoserOptions oa = base_opt;
    NashMoserOptions ob = base_opt;
    ob.delta0 = base_opt.delta0 * 2.0;  // distinct admissible seed solve
    NashMoserDriver da(p, sc, oa), db(p, sc, ob);

    UniquenessReport rep;
    IterationState sa = da.init(), sb = db.init();
    {
        SpacetimeField diff = detail_nm::wrap_vals(sa.v, da.dt);
        for (int j = 0; j < diff.nodes(); ++j) diff.snaps[j] -= sb.v[j].val;
        rep.diff_norms.push_back(spacetime_norm(diff, sc.s_l[0], p.T));
    }
    for (int l = 0; l < sc.max_levels; ++l) {
        sa = da.step(sa);
        sb = db.step(sb);
        SpacetimeField diff = detail_nm::wrap_vals(sa.v, da.dt);
        for (int j = 0; j < diff.nodes(); ++j) diff.snaps[j] -= sb.v[j].val;
        rep.diff_norms.push_back(
            spacetime_norm(diff, sc.s_l[std::min<size_t>(l + 1, sc.s_l.size() - 1)], p.T));
        if (sa.norm_E <= sc.floor_tolerance && sb.norm_E <= sc.floor_tolerance) break;
    }
    SpacetimeField va = detail_nm::wrap_vals(sa.v, da.dt);
    SpacetimeField vb = detail_nm::wrap_vals(sb.v, db.dt);
    SpacetimeField diff = va;
    for (int j = 0; j < diff.nodes(); ++j) diff.snaps[j] -= vb.snaps[j];
    rep.final_rel_l2 = spacetime_l2(diff, p.T) / std::max(spacetime_l2(va, p.T), 1e-300);
    rep.agree = rep.final_rel_l2 <= tol;
    return rep;
}

}  // namespace memlab
