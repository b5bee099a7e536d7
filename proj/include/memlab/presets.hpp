#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "memlab/brackets.hpp"
#include "memlab/degenerate_wave.hpp"
#include "memlab/membrane.hpp"
#include "memlab/nash_moser.hpp"

namespace memlab {

struct Preset {
    std::string name;
    std::string description;
    bool toy_only = false;       // relaxed-levi has no membrane realization
    MembraneProblem problem;     // empty for toy-only presets
    DegenerateCoefficients toy;  // linear-model coefficients (mapped or native)
    NashMoserOptions nm;
    IterationSchedule schedule;
};

inline std::vector<std::string> preset_names() {
    return {"nondegenerate-small", "nondegenerate-stiff", "degenerate-zero", "degenerate-tiny",
            "relaxed-levi"};
}

// The orthonormal trigonometric embedding of the flat torus: gamma(u0) is the
// identity exactly, and the compatible initial acceleration is -amp^3 u0.
inline FieldBundle clifford_bundle(const GridPtr& g, double amp = 1.0) {
    FieldBundle u(g, 4);
    u[0] = amp * sample(g, [](double x1, double) { return std::sin(x1); });
    u[1] = amp * sample(g, [](double x1, double) { return std::cos(x1); });
    u[2] = amp * sample(g, [](double, double x2) { return std::sin(x2); });
    u[3] = amp * sample(g, [](double, double x2) { return std::cos(x2); });
    return u;
}

inline Preset make_preset(const std::string& name, int grid_n = 32, double epsilon_override = 0.0,
                          double T_override = 0.0) {
    auto g = make_grid(grid_n, grid_n);
    Preset p;
    p.name = name;
    p.schedule = make_schedule(2.5, 4.0, 2.0, 6, 0.5, 7, 1e-10);
    p.nm.delta0 = 5e-2;
    p.nm.R_ball = 0.9;

    auto identity_metric = [&]() {
        MetricField I(g);
        I.g11 = Field(g, 1.0);
        I.g22 = Field(g, 1.0);
        return I;
    };
    auto shear_velocity = [&](double a) {
        FieldBundle v0(g, 4);
        v0[0] = a * sample(g, [](double x1, double) { return std::cos(x1); });
        v0[1] = -a * sample(g, [](double x1, double) { return std::sin(x1); });
        return v0;
    };

    if (name == "nondegenerate-small") {
        p.description = "unit factor, identity metric, small compatible data";
        p.problem.grid = g;
        p.problem.u0 = clifford_bundle(g);
        p.problem.v0 = shear_velocity(0.08);
        p.problem.v1 = build_compatible_v1(p.problem.u0);
        p.problem.epsilon = 1e-3;
        p.problem.T = 0.5;
        p.problem.gamma0 = Field(g, 1.0);
        p.problem.gamma_x = identity_metric();
    } else if (name == "nondegenerate-stiff") {
        p.description = "unit factor, identity metric, larger mixed-mode data";
        p.problem.grid = g;
        p.problem.u0 = clifford_bundle(g);
        p.problem.v0 = shear_velocity(0.25);
        p.problem.v0[2] += 0.1 * sample(g, [](double, double x2) { return std::cos(2.0 * x2); });
        p.problem.v1 = build_compatible_v1(p.problem.u0);
        p.problem.epsilon = 1e-3;
        p.problem.T = 0.5;
        p.problem.gamma0 = Field(g, 1.0);
        p.problem.gamma_x = identity_metric();
    } else if (name == "degenerate-zero") {
        p.description = "fully degenerate factor (constant embedding)";
        p.problem.grid = g;
        p.problem.u0 = FieldBundle(g, 4);
        p.problem.v0 = shear_velocity(0.08);
        p.problem.v1 = FieldBundle(g, 4);  // compatible: the bracket RHS of a constant is zero
        p.problem.epsilon = 1e-3;
        p.problem.T = 0.5;
        p.problem.gamma0 = Field(g, 0.0);
        p.problem.gamma_x = identity_metric();
    } else if (name == "degenerate-tiny") {
        p.description = "uniformly tiny factor gamma0 = 1e-3";
        double amp = std::sqrt(1e-3);
        p.problem.grid = g;
        p.problem.u0 = clifford_bundle(g, amp);
        p.problem.v0 = shear_velocity(0.08);
        p.problem.v1 = build_compatible_v1(p.problem.u0);
        p.problem.epsilon = 1e-3;
        p.problem.T = 0.5;
        p.problem.gamma0 = Field(g, 1e-3);
        p.problem.gamma_x = identity_metric();
    } else if (name == "relaxed-levi") {
        p.description =
            "toy model with |d varrho| <= c sqrt(varrho) only - outside the Levi hypotheses";
        p.toy_only = true;
        p.toy = DegenerateCoefficients::make(g);
        p.toy.varrho = sample(g, [](double x1, double) {
            double q = 0.5 * (1.0 + std::cos(x1));
            return q * q;
        });
        Field d1 = partial_derivative(p.toy.rho.g11, 1) + partial_derivative(p.toy.rho.g12, 2);
        Field d2 = partial_derivative(p.toy.rho.g12, 1) + partial_derivative(p.toy.rho.g22, 2);
        Field root(g);
        for (size_t i = 0; i < g->size(); ++i) root.v[i] = 0.1 * std::sqrt(p.toy.varrho.v[i]);
        p.toy.set_B(hadamard(p.toy.varrho, d1) + root, hadamard(p.toy.varrho, d2));
        p.toy.set_f(Field(g, 0.3), Field(g));
        p.toy.epsilon = 0.2;
        p.toy.forcing = [g](int, double t) {
            FieldBundle out(g, 1);
            out[0] = std::exp(-t) *
                     sample(g, [](double x1, double x2) { return std::sin(x1) * std::cos(x2); });
            return out;
        };
    } else {
        throw std::invalid_argument("unknown preset: " + name);
    }

    if (!p.toy_only) {
        if (epsilon_override > 0.0) p.problem.epsilon = epsilon_override;
        if (T_override > 0.0) p.problem.T = T_override;
        p.problem.name = name;
        p.toy = map_membrane_to_toy(std::vector<NodePack>{},
                                    MembraneOperator::build(p.problem.u0), p.problem.epsilon,
                                    *p.problem.gamma0, *p.problem.gamma_x);
    }
    return p;
}

}  // namespace memlab
