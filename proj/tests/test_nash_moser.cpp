#include <catch2/catch_amalgamated.hpp>

#include "memlab/nash_moser.hpp"
#include "memlab/presets.hpp"
#include "support.hpp"

using namespace memlab;
using namespace memlab::testing;

TEST_CASE("schedule values and validation") {
    SECTION("index sequence and tables") {
        auto sc = make_schedule(2.5, 4.0, 2.0, 6, 0.5, 6);
        REQUIRE(sc.s_l[0] == Catch::Approx(4.0));
        REQUIRE(sc.N_l[3] == 8);
        // formula values with s_bar = 2, s = 4 (computed directly)
        auto sl = [](double sbar, double s, int l) { return sbar + (s - sbar) / std::pow(2.0, l); };
        REQUIRE(sl(2.0, 4.0, 1) == Catch::Approx(3.0));
        REQUIRE(sl(2.0, 4.0, 2) == Catch::Approx(2.5));
        REQUIRE(sl(2.0, 4.0, 1) - sl(2.0, 4.0, 2) == Catch::Approx(0.5));
        // monotone decrease to s_bar
        for (size_t l = 1; l < sc.s_l.size(); ++l) REQUIRE(sc.s_l[l] < sc.s_l[l - 1]);
        REQUIRE(sc.s_l.back() > sc.s_bar);
    }
    SECTION("violated chains throw") {
        REQUIRE_THROWS_AS(make_schedule(2.0, 4.0, 2.5, 6, 0.5, 6), std::invalid_argument);
        REQUIRE_THROWS_AS(make_schedule(2.5, 4.0, 2.0, 4, 0.5, 6), std::invalid_argument);
        REQUIRE_THROWS_AS(make_schedule(2.5, 4.0, 2.0, 6, 1.5, 6), std::invalid_argument);
        REQUIRE_THROWS_AS(make_schedule(2.5, 2.4, 2.0, 6, 0.5, 6), std::invalid_argument);
    }
}

TEST_CASE("approximate operator") {
    Preset pre = make_preset("nondegenerate-small", 16);
    MembraneProblem& p = pre.problem;
    double dt = 4e-3;
    int nodes = 26;

    SECTION("zero input gives zero") {
        SpacetimeField z = constant_history(FieldBundle(p.grid, 4), 0.0, dt, nodes);
        SpacetimeField r = approx_operator(z, p, 2);
        for (const auto& s : r.snaps) REQUIRE(sup_norm(s) == 0.0);
    }
    SECTION("cutoff at or beyond Nyquist is the unsmoothed operator") {
        std::mt19937_64 rng(77);
        SpacetimeField X;
        X.t0 = 0;
        X.dt = dt;
        FieldBundle a = random_band_bundle(p.grid, 4, 1, 3, rng);
        FieldBundle b = random_band_bundle(p.grid, 4, 1, 3, rng);
        for (int j = 0; j < nodes; ++j) {
            FieldBundle s = a;
            axpy(j * dt, b, s);
            X.snaps.push_back(s);
        }
        SpacetimeField r1 = approx_operator(X, p, p.grid->nyquist1());
        SpacetimeField r2 = approx_operator(X, p, 4 * p.grid->nyquist1());
        for (int j = 0; j < nodes; ++j)
            REQUIRE(sup_norm(r1.snaps[j] - r2.snaps[j]) == 0.0);
    }
    SECTION("smoothing-window tail obeys the approximation estimate") {
        // || G_N(X) - G(X) ||_{H^{s1}} <= C N^{s1-s2} || F(X) ||_{H^{s2}}, s1 < s2
        std::mt19937_64 rng(78);
        SpacetimeField X;
        X.t0 = 0;
        X.dt = dt;
        FieldBundle a = random_band_bundle(p.grid, 4, 1, 7, rng, 3.0);
        FieldBundle b = random_band_bundle(p.grid, 4, 1, 7, rng, 3.0);
        for (int j = 0; j < nodes; ++j) {
            FieldBundle s = a;
            axpy(j * dt, b, s);
            X.snaps.push_back(s);
        }
        int jprobe = nodes - 1;
        MembraneOperator op = MembraneOperator::build(p.u0);
        auto stream = memory_stream(X);
        FieldBundle Fx = eval_F(op, stream[jprobe], p.epsilon);
        double s1 = 1.0, s2 = 3.0;
        double denom = sobolev_norm(Fx, s2);
        SpacetimeField full = approx_operator(X, p, p.grid->nyquist1());
        std::vector<double> ratios;
        for (int N : {2, 4, 8}) {
            SpacetimeField gn = approx_operator(X, p, N);
            FieldBundle diff = gn.snaps[jprobe] - full.snaps[jprobe];
            double lhs = sobolev_norm(diff, s1);
            ratios.push_back(lhs / (std::pow(double(N), s1 - s2) * denom));
        }
        for (double r : ratios) REQUIRE(r < 4.0);
    }
}

TEST_CASE("driver fundamentals") {
    Preset pre = make_preset("nondegenerate-small", 16);
    MembraneProblem& p = pre.problem;

    SECTION("linear mode converges in one step to roundoff") {
        NashMoserOptions opt = pre.nm;
        opt.nonlinear = false;
        NashMoserDriver drv(p, pre.schedule, opt);
        auto rr = drv.run();
        REQUIRE(rr.report.converged);
        REQUIRE(rr.report.levels.size() >= 2);
        double e0 = rr.report.levels[0].norm_E;
        double e1 = rr.report.levels[1].norm_E;
        REQUIRE(e0 > 0.0);
        REQUIRE(e1 < 1e-9 * e0);
    }

    SECTION("zero residual keeps the iterate fixed") {
        NashMoserDriver drv(p, pre.schedule, pre.nm);
        IterationState st = drv.init();
        for (auto& e : st.E) e *= 0.0;
        st.norm_E = 0.0;
        IterationState next = drv.step(st);
        REQUIRE(sup_norm(next.h_list.back().snaps[next.h_list.back().nodes() - 1]) == 0.0);
        for (int j = 0; j < static_cast<int>(st.v.size()); ++j)
            REQUIRE(sup_norm(next.v[j].val - st.v[j].val) == 0.0);
    }

    SECTION("telescoping of the increments is exact") {
        NashMoserDriver drv(p, pre.schedule, pre.nm);
        IterationState st = drv.init();
        st = drv.step(st);
        st = drv.step(st);
        for (int j = 0; j < static_cast<int>(st.W.size()); ++j) {
            FieldBundle sum(p.grid, 4);
            for (const auto& h : st.h_list) sum += h.snaps[j];
            Field diff = sum[0] - st.W[j][0];
            REQUIRE(sup_norm(diff) == 0.0);
        }
    }

    SECTION("stored residual matches the re-applied approximate operator") {
        NashMoserDriver drv(p, pre.schedule, pre.nm);
        IterationState st = drv.init();
        LevelRecord rec;
        st = drv.step(st, &rec);
        SpacetimeField vtraj = detail_nm::wrap_vals(st.v, drv.dt);
        SpacetimeField re = approx_operator(vtraj, p, drv.cutoff(st.level + 1));
        double scale = 0.0;
        for (const auto& e : st.E) scale = std::max(scale, sup_norm(e));
        double worst = 0.0;
        for (int j = 1; j + 1 < static_cast<int>(st.E.size()); ++j)
            worst = std::max(worst, sup_norm(re.snaps[j] - st.E[j]));
        REQUIRE(worst < 1e-10 * std::max(1.0, scale));
    }

    SECTION("nonlinear run converges with decaying residuals inside the ball") {
        NashMoserOptions opt = pre.nm;
        NashMoserDriver drv(p, pre.schedule, opt);
        auto rr = drv.run();
        REQUIRE(rr.report.converged);
        REQUIRE_FALSE(rr.report.diverged);
        REQUIRE_FALSE(rr.report.ball_exit);
        REQUIRE(rr.report.levels.size() >= 3);
        for (size_t i = 2; i < rr.report.levels.size(); ++i)
            REQUIRE(rr.report.levels[i].norm_E < rr.report.levels[i - 1].norm_E);
        // ball invariance of the accepted iterates (seed-relative reading)
        std::vector<FieldBundle> excess = rr.state.W;
        for (size_t j = 0; j < excess.size(); ++j)
            excess[j] -= rr.state.h_list.front().snaps[j];
        double seed_scale =
            std::max(1.0, sup_sobolev(rr.state.h_list.front().snaps, pre.schedule.s_bar));
        REQUIRE(sup_sobolev(excess, pre.schedule.s_bar) / seed_scale < opt.R_ball);
    }
}

TEST_CASE("uniqueness contraction") {
    Preset pre = make_preset("nondegenerate-small", 16);
    auto sc = pre.schedule;
    sc.max_levels = 4;
    UniquenessReport rep = uniqueness_check(pre.problem, sc, pre.nm, 1e-6);
    REQUIRE(rep.agree);
    REQUIRE(rep.final_rel_l2 <= 1e-6);
    // the difference sequence collapses
    REQUIRE(rep.diff_norms.back() < rep.diff_norms.front());
}
