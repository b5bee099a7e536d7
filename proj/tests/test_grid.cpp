#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>

#include "memlab/bundle.hpp"
#include "memlab/field.hpp"
#include "memlab/io.hpp"
#include "memlab/spectral.hpp"
#include "support.hpp"

using namespace memlab;
using namespace memlab::testing;

TEST_CASE("grid construction invariants") {
    REQUIRE_THROWS_AS(make_grid(48, 32), std::invalid_argument);
    REQUIRE_THROWS_AS(make_grid(0, 32), std::invalid_argument);
    REQUIRE_THROWS_AS(make_grid(32, 32, two_pi, two_pi,
                                [](double x, double) { return std::cos(x); }),
                      std::invalid_argument);
    auto g = make_grid(32, 16, two_pi, 1.0);
    REQUIRE(g->dx1() == Catch::Approx(two_pi / 32));
    REQUIRE(g->cell_area() == Catch::Approx(two_pi / 32 / 16));
    REQUIRE(eps_symbol(1, 2) == 1.0);
    REQUIRE(eps_symbol(2, 1) == -1.0);
    REQUIRE(eps_symbol(1, 1) == 0.0);
}

TEST_CASE("field_from_data rejects non-finite values") {
    auto g = make_grid(4, 4);
    std::vector<double> bad(g->size(), 0.0);
    bad[3] = std::nan("");
    REQUIRE_THROWS_AS(field_from_data(g, bad), std::invalid_argument);
}

TEST_CASE("spectral derivative exact on single modes") {
    auto g = make_grid(64, 64);
    Field f = sample(g, [](double x1, double) { return std::sin(x1); });
    Field df = partial_derivative(f, 1);
    Field expect = sample(g, [](double x1, double) { return std::cos(x1); });
    REQUIRE(rel_sup(df, expect) < 1e-12);

    Field c(g, 3.7);
    REQUIRE(sup_norm(partial_derivative(c, 1)) < 1e-13);
    REQUIRE(sup_norm(partial_derivative(c, 2)) < 1e-13);
}

TEST_CASE("spectral derivative matches FD2 oracle within its error band") {
    auto g = make_grid(64, 64);
    Field f = sample(g, [](double x1, double x2) { return std::sin(x1) * std::cos(2.0 * x2); });
    Field spec = partial_derivative(f, 2);
    Field fd = fd2_derivative(f, 2);
    // FD2 truncation for mode k: amplitude error (k - sin(k dx)/dx) ~ k^3 dx^2 / 6
    double dx = g->dx2();
    double band = std::pow(2.0, 3) * dx * dx / 6.0;
    Field diff = spec - fd;
    REQUIRE(sup_norm(diff) < 1.5 * band);
    REQUIRE(sup_norm(diff) > 0.5 * band);  // the oracle really is second order
}

TEST_CASE("sobolev norm basics") {
    SECTION("constant on unit-area torus") {
        auto g = make_grid(32, 32, 1.0, 1.0);
        Field one(g, 1.0);
        for (double s : {0.0, 1.0, 2.5}) REQUIRE(sobolev_norm(one, s) == Catch::Approx(1.0));
    }
    SECTION("single mode picks up (1+|k|^2)^{s/2}") {
        auto g = make_grid(32, 32);
        Field f = sample(g, [](double x1, double) { return std::sin(x1); });
        double l2 = sobolev_norm(f, 0.0);
        REQUIRE(l2 == Catch::Approx(std::sqrt(2.0) * std::numbers::pi));
        REQUIRE(sobolev_norm(f, 1.0) == Catch::Approx(std::sqrt(2.0) * l2));
    }
    SECTION("monotone in s, negative s rejected") {
        auto g = make_grid(32, 32);
        std::mt19937_64 rng(7);
        Field f = random_band_field(g, 1, 5, rng);
        REQUIRE(sobolev_norm(f, 1.0) <= sobolev_norm(f, 2.0));
        REQUIRE(sobolev_norm(f, 0.0) <= sobolev_norm(f, 0.5));
        REQUIRE_THROWS_AS(sobolev_norm(f, -1.0), std::invalid_argument);
    }
    SECTION("s = 2 equivalent to derivative quadrature within 5%") {
        // Modes with |k|^2 >= 9 keep the weight ratio
        // (1+|k|^2)^2 / (1+|k|^2+|k|^4) below (1.05)^2.
        auto g = make_grid(64, 64);
        std::mt19937_64 rng(11);
        Field f = random_band_field(g, 3, 6, rng);
        double h2 = sobolev_norm(f, 2.0);
        Field d1 = partial_derivative(f, 1), d2 = partial_derivative(f, 2);
        Field d11 = partial_derivative(d1, 1), d12 = partial_derivative(d1, 2);
        Field d21 = partial_derivative(d2, 1), d22 = partial_derivative(d2, 2);
        double q = 0.0;
        for (const Field* p : {&f, &d1, &d2, &d11, &d12, &d21, &d22}) {
            double n = l2_norm_weighted(*p);
            q += n * n;
        }
        double ratio = h2 / std::sqrt(q);
        REQUIRE(ratio > 0.95);
        REQUIRE(ratio < 1.05);
    }
    SECTION("Parseval at s = 0 against weighted quadrature, w == 1") {
        auto g = make_grid(64, 64);
        std::mt19937_64 rng(3);
        Field f = random_band_field(g, 1, 20, rng, 8.0);
        REQUIRE(rel_diff(sobolev_norm(f, 0.0), l2_norm_weighted(f)) < 1e-10);
    }
}

TEST_CASE("low_pass cutoff behavior") {
    auto g = make_grid(32, 32);
    Field f3 = sample(g, [](double x1, double) { return std::sin(3.0 * x1); });
    Field f9 = sample(g, [](double x1, double) { return std::sin(9.0 * x1); });

    REQUIRE(rel_sup(low_pass(f3, 4), f3) < 1e-13);
    REQUIRE(sup_norm(low_pass(f9, 8)) < 1e-13 * sup_norm(f9));

    std::mt19937_64 rng(19);
    Field f = random_band_field(g, 1, 15, rng);
    SECTION("idempotent and linear") {
        Field lp = low_pass(f, 5);
        REQUIRE(rel_sup(low_pass(lp, 5), lp) < 1e-13);
        Field a = random_band_field(g, 1, 15, rng);
        Field lhs = low_pass(f + 2.0 * a, 5);
        Field rhs = low_pass(f, 5) + 2.0 * low_pass(a, 5);
        REQUIRE(rel_sup(lhs, rhs) < 1e-13);
    }
    SECTION("identity at and beyond Nyquist") {
        Field lp = low_pass(f, g->nyquist1());
        REQUIRE(std::equal(lp.v.begin(), lp.v.end(), f.v.begin()));
    }
    SECTION("commutes with spectral derivative") {
        Field a = partial_derivative(low_pass(f, 6), 1);
        Field b = low_pass(partial_derivative(f, 1), 6);
        REQUIRE(rel_sup(a, b) < 1e-12);
    }
}

TEST_CASE("smoothing estimates hold with a uniform fitted constant") {
    auto g = make_grid(64, 64);
    std::mt19937_64 rng(23);
    Field f = random_band_field(g, 1, 31, rng, 12.0);
    struct Pair {
        double s1, s2;
    };
    for (Pair p : {Pair{3, 1}, Pair{2, 0}}) {
        std::vector<double> ratios;
        for (int N = 2; N <= 32; N *= 2) {
            double lhs = sobolev_norm(low_pass(f, N), p.s1);
            double rhs = std::pow(double(N), p.s1 - p.s2) * sobolev_norm(f, p.s2);
            ratios.push_back(lhs / rhs);
        }
        double cmax = *std::max_element(ratios.begin(), ratios.end());
        double cmin = *std::min_element(ratios.begin(), ratios.end());
        REQUIRE(cmax < 4.0);           // bounded fitted constant
        REQUIRE(cmax / cmin < 8.0);    // no N-trend
    }
    // approximation direction, s1 <= s2
    std::vector<double> ratios;
    for (int N = 2; N <= 32; N *= 2) {
        double lhs = sobolev_norm(high_pass(f, N), 1.0);
        double rhs = std::pow(double(N), 1.0 - 3.0) * sobolev_norm(f, 3.0);
        ratios.push_back(lhs / rhs);
    }
    REQUIRE(*std::max_element(ratios.begin(), ratios.end()) < 4.0);
}

TEST_CASE("dealiased product obeys Leibniz rule") {
    auto g = make_grid(64, 64);
    std::mt19937_64 rng(31);
    Field f = random_band_field(g, 1, 10, rng);
    Field h = random_band_field(g, 1, 10, rng);
    Field lhs = partial_derivative(multiply_dealiased(f, h), 1);
    Field rhs = multiply_dealiased(partial_derivative(f, 1), h) +
                multiply_dealiased(f, partial_derivative(h, 1));
    double scale = sup_norm(lhs);
    REQUIRE(sup_norm(lhs - rhs) < 1e-8 * scale);
}

TEST_CASE("time_integral quadrature") {
    auto g = make_grid(8, 8);
    Field f = sample(g, [](double x1, double) { return std::sin(x1); });
    FieldBundle fb(g, 1);
    fb[0] = f;

    SECTION("constant integrand") {
        SpacetimeField u = constant_history(fb, 0.0, 0.01, 101);
        FieldBundle I = time_integral(u, 0.7);
        Field expect = 0.7 * f;
        REQUIRE(rel_sup(I[0], expect) < 1e-12);
        REQUIRE(sup_norm(time_integral(u, 0.0)[0]) == 0.0);
    }
    SECTION("cos(t) integrand hits sin(t) within O(dt^2)") {
        double dt = 1e-3;
        int n = static_cast<int>(std::lround(std::numbers::pi / 2 / dt)) + 1;
        SpacetimeField u;
        u.t0 = 0;
        u.dt = dt;
        for (int j = 0; j < n; ++j) {
            FieldBundle s(g, 1);
            s[0] = std::cos(j * dt) * f;
            u.snaps.push_back(s);
        }
        FieldBundle I = time_integral(u, (n - 1) * dt);
        Field expect = std::sin((n - 1) * dt) * f;
        REQUIRE(sup_norm(I[0] - expect) < 1e-5);
    }
    SECTION("additive over adjacent intervals") {
        double dt = 0.1;
        SpacetimeField u;
        u.t0 = 0;
        u.dt = dt;
        for (int j = 0; j < 11; ++j) {
            FieldBundle s(g, 1);
            s[0] = (1.0 + 0.3 * j) * f;
            u.snaps.push_back(s);
        }
        FieldBundle whole = time_integral(u, 1.0);
        FieldBundle acc(g, 1);
        for (int j = 0; j < 10; ++j) {
            axpy(dt / 2, u.snaps[j], acc);
            axpy(dt / 2, u.snaps[j + 1], acc);
        }
        REQUIRE(rel_sup(whole[0], acc[0]) < 1e-13);
        REQUIRE_THROWS_AS(time_integral(u, 1.5), std::out_of_range);
    }
}

TEST_CASE("spacetime norm") {
    auto g = make_grid(16, 16, 1.0, 1.0);
    Field f = sample(g, [](double x1, double) { return std::sin(two_pi * x1); });
    FieldBundle fb(g, 1);
    fb[0] = f;

    SECTION("constant in time reduces to H^l") {
        SpacetimeField u = constant_history(fb, 0.0, 0.1, 8);
        REQUIRE(rel_diff(spacetime_norm(u, 2.0, 0.7), sobolev_norm(f, 2.0)) < 1e-12);
    }
    SECTION("linear in time") {
        double T = 0.5, dt = 0.05;
        SpacetimeField u;
        u.t0 = 0;
        u.dt = dt;
        for (int j = 0; j <= 10; ++j) {
            FieldBundle s(g, 1);
            s[0] = (j * dt) * f;
            u.snaps.push_back(s);
        }
        double nl = sobolev_norm(f, 3.0), nl1 = sobolev_norm(f, 2.0);
        double expect = std::sqrt(T * T * nl * nl + nl1 * nl1);
        REQUIRE(rel_diff(spacetime_norm(u, 3.0, T), expect) < 1e-10);
    }
    SECTION("manufactured sin(t) profile against closed form") {
        double dt = 1e-3;
        int n = 1001;
        SpacetimeField u;
        u.t0 = 0;
        u.dt = dt;
        for (int j = 0; j < n; ++j) {
            FieldBundle s(g, 1);
            s[0] = std::sin(j * dt) * f;
            u.snaps.push_back(s);
        }
        double c0 = sobolev_norm(f, 2.0), c1 = sobolev_norm(f, 1.0), c2 = sobolev_norm(f, 0.0);
        double best = 0.0;
        for (double t : {0.0, 0.25, 0.5, 0.75, 1.0}) {
            double v = std::sin(t) * std::sin(t) * (c0 * c0 + c2 * c2) +
                       std::cos(t) * std::cos(t) * c1 * c1;
            best = std::max(best, v);
        }
        REQUIRE(rel_diff(spacetime_norm(u, 2.0, 1.0), std::sqrt(best)) < 1e-3);
        REQUIRE_THROWS_AS(spacetime_norm(u, 2.0, 2.0), std::out_of_range);
    }
}

TEST_CASE("binary and CSV serialization") {
    namespace fs = std::filesystem;
    auto dir = fs::temp_directory_path() / "memlab_io_test";
    fs::create_directories(dir);
    auto g = make_grid(16, 8, two_pi, 1.0);
    std::mt19937_64 rng(5);
    Field f = random_band_field(g, 1, 3, rng);
    std::string bin = (dir / "f.bin").string();
    write_field_binary(f, bin);
    Field back = read_field_binary(bin);
    REQUIRE(back.grid->n1 == 16);
    REQUIRE(back.grid->n2 == 8);
    REQUIRE(back.grid->L2 == Catch::Approx(1.0));
    REQUIRE(std::equal(f.v.begin(), f.v.end(), back.v.begin()));
    write_field_csv(f, (dir / "f.csv").string());
    REQUIRE(fs::file_size(dir / "f.csv") > 0);
    fs::remove_all(dir);
}
