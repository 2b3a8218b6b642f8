// Tests for the scalar eta equation and the per-mode gain equations.
//
// Oracles, all independent of the solver code paths:
//  - eta for the reference model has a logistic closed form obtained by
//    separating variables on deta/dt = (eta - r1)(eta - r2);
//  - the mode discriminant has exact rational/pi values for the eigenvalues
//    used here, and must also equal B_t^2 + C A_t - dB/dt along the path;
//  - for the unit-eigenvalue flat kernel the mode gain collapses to -eta
//    (stationary-aggregate identity), checked sample by sample;
//  - residuals: central-differencing the returned pi must satisfy the mode
//    equation to quadrature order;
//  - backward sensitivity of the mode flow has an exactly computable
//    contraction factor for the flat-kernel case.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "graphon_lq/riccati.hpp"

using namespace glq;

namespace {

GameCoefficients reference_model() {
    GameCoefficients c;
    c.a = -1.0;
    c.b = 1.0;
    c.c = 1.0;
    c.running_cost << 1, 0, -1, 0, 1, 0, -1, 0, 1;
    c.terminal_cost << 1, -1, -1, 1;
    c.horizon = 3.0;
    c.initial_mean = 8.0;
    c.initial_variance = 0.25;
    return c;
}

// Closed-form eta for the reference model: deta/dt = eta^2 + 2 eta - 1 with
// eta(3) = 1. Roots r1,2 = -1 ± sqrt(2); u = (eta - r1)/(eta - r2) satisfies
// d(log u)/dt = r1 - r2 = 2 sqrt(2).
double eta_oracle(double t) {
    const double s2 = std::numbers::sqrt2;
    const double r1 = -1.0 + s2, r2 = -1.0 - s2;
    const double u_T = (1.0 - r1) / (1.0 - r2);
    const double u = u_T * std::exp(2.0 * s2 * (t - 3.0));
    return (r1 - r2 * u) / (1.0 - u);
}

}  // namespace

TEST_CASE("eta matches its logistic closed form everywhere") {
    const GammaMatrices gm = assemble_gamma(reference_model());
    const RiccatiSolution sol = solve_eta(gm, 3.0, 3.0 / 2000.0);

    CHECK(sol.eta.back() == 1.0);  // terminal condition bit-exact
    double worst = 0.0;
    for (int j = 0; j < sol.eta.grid.samples(); ++j)
        worst = std::max(worst, std::abs(sol.eta.at_dense(j) - eta_oracle(sol.eta.grid.time_at(j))));
    CHECK(worst <= 1e-10);

    // The Richardson estimate should bound the true error up to a modest
    // constant and itself be tiny at this step.
    CHECK(sol.error_estimate > 0.0);
    CHECK(sol.error_estimate <= 1e-9);
    double node_err = 0.0;
    for (int i = 0; i <= sol.eta.grid.intervals(); ++i)
        node_err = std::max(node_err,
                            std::abs(sol.eta.at_node(i) - eta_oracle(3.0 / 2000.0 * i)));
    CHECK(node_err <= 5.0 * sol.error_estimate + 1e-13);
}

TEST_CASE("eta invariant cases") {
    GammaMatrices flat;
    flat.gamma << 0.4, 0, 0, 0.4;
    flat.gamma_t << 2.5, 0.0;
    RiccatiSolution sol = solve_eta(flat, 2.0, 0.01);
    for (int j = 0; j < sol.eta.grid.samples(); ++j) CHECK(sol.eta.at_dense(j) == 2.5);

    GammaMatrices zero;
    zero.gamma << 0.3, -1.0, 0.0, -0.3;
    zero.gamma_t << 0.0, 0.0;
    sol = solve_eta(zero, 2.0, 0.01);
    for (int j = 0; j < sol.eta.grid.samples(); ++j) CHECK(sol.eta.at_dense(j) == 0.0);
}

TEST_CASE("eta blow-up is reported with the escape time") {
    // deta/dt = (eta+1)^2 + 4, eta(3) = 1: backward escape at 3 - 3 pi / 8.
    GameCoefficients m;
    m.a = -1.0;
    m.b = 1.0;
    m.running_cost << -5, 0, 0, 0, 1, 0, 0, 0, 0;
    m.terminal_cost << 1, 0, 0, 0;
    m.horizon = 3.0;
    const GammaMatrices gm = assemble_gamma(m);
    try {
        (void)solve_eta(gm, 3.0, 3.0 / 2000.0);
        FAIL("expected numerical_error");
    } catch (const numerical_error& e) {
        REQUIRE(e.has_time());
        const double pole = 3.0 - 3.0 * std::numbers::pi / 8.0;
        CHECK(std::abs(e.time() - pole) <= 2.0 * (3.0 / 2000.0));
    }
}

TEST_CASE("solve_eta rejects steps that do not divide the horizon") {
    const GammaMatrices gm = assemble_gamma(reference_model());
    CHECK_THROWS_AS((void)solve_eta(gm, 3.0, 0.07), std::invalid_argument);
    CHECK_THROWS_AS((void)solve_eta(gm, 3.0, -0.1), std::invalid_argument);
}

TEST_CASE("mode classification: exact discriminants and branches") {
    const GammaMatrices gm = assemble_gamma(reference_model());
    const RiccatiSolution eta = solve_eta(gm, 3.0, 3.0 / 2000.0);

    SUBCASE("unit eigenvalue hits the degenerate growing-exponential branch") {
        const ModeReport r = check_mode_wellposedness(gm, eta, 1.0);
        CHECK(r.d == 0.25);  // ¼(2·(-1)+1)² + (-1)(1)(1) + 1, exact in binary
        CHECK(r.b_terminal == 1.5);
        CHECK(r.c == 1.0);
        CHECK(r.k_mixed == 0.5);  // equals sqrt(D) exactly
        CHECK(r.branch == ModeBranch::growing_exponential);
        CHECK(r.closed_form_available);
        CHECK(r.well_posed);
        CHECK_FALSE(r.has_root);
    }

    SUBCASE("power-law eigenvalue 5/9: rational discriminant, no root") {
        const double lam = 5.0 / 9.0;
        const ModeReport r = check_mode_wellposedness(gm, eta, lam);
        CHECK(r.d == doctest::Approx(313.0 / 324.0).epsilon(1e-15));
        CHECK(r.k_mixed == doctest::Approx(7.0 / 6.0).epsilon(1e-15));
        CHECK(r.branch == ModeBranch::general);
        const double sq = std::sqrt(313.0 / 324.0);
        CHECK(r.f == doctest::Approx((7.0 / 6.0 + sq) / (7.0 / 6.0 - sq)).epsilon(1e-12));
        CHECK(r.f > 1.0);  // outside [e^{-2 sq T}, 1] -> no root
        CHECK_FALSE(r.has_root);
        CHECK(r.well_posed);
    }

    SUBCASE("leading min/max eigenvalue 1/pi^2") {
        const double pi2 = std::numbers::pi * std::numbers::pi;
        const ModeReport r = check_mode_wellposedness(gm, eta, 1.0 / pi2);
        CHECK(r.d ==
              doctest::Approx(2.0 - 2.0 / pi2 + 0.25 / (pi2 * pi2)).epsilon(1e-15));
        CHECK(r.branch == ModeBranch::general);
        CHECK(r.f == doctest::Approx(6.29861).epsilon(1e-4));
        CHECK(r.well_posed);
    }

    SUBCASE("zero eigenvalue is the linear ODE branch") {
        const ModeReport r = check_mode_wellposedness(gm, eta, 0.0);
        CHECK(r.branch == ModeBranch::linear_ode);
        CHECK(r.well_posed);
    }

    SUBCASE("the uniform-in-mode bound fails for this model (weak, not wrong)") {
        const ModeReport r = check_mode_wellposedness(gm, eta, 0.5);
        CHECK_FALSE(r.sufficient_condition_met);
        // ...even though D(lambda) = ¼λ² - 2λ + 2 > 0 for every λ in [0,1].
        for (double lam : {0.0, 0.25, 0.5, 0.75, 1.0})
            CHECK(mode_discriminant(gm, lam) > 0.0);
    }
}

TEST_CASE("a terminal-weight flip creates a root at T - log 2") {
    // Same Gamma block, terminal pair (-2, 0): K = -3/2, D = 1/4, F = 1/2,
    // which lies inside [e^{-3}, 1] -> theta vanishes at t* = 3 - log 2.
    GammaMatrices gm = assemble_gamma(reference_model());
    gm.gamma_t << -2.0, 0.0;
    const RiccatiSolution eta = solve_eta(gm, 3.0, 3.0 / 2000.0);

    const ModeReport r = check_mode_wellposedness(gm, eta, 1.0);
    CHECK(r.k_mixed == -1.5);
    CHECK(r.f == doctest::Approx(0.5).epsilon(1e-15));
    REQUIRE(r.has_root);
    CHECK(r.root_time == doctest::Approx(3.0 - std::log(2.0)).epsilon(1e-12));
    CHECK_FALSE(r.well_posed);

    try {
        (void)solve_pi(gm, eta, 1.0);
        FAIL("expected numerical_error");
    } catch (const numerical_error& e) {
        REQUIRE(e.has_time());
        CHECK(e.time() == doctest::Approx(3.0 - std::log(2.0)).epsilon(1e-12));
    }
}

TEST_CASE("discriminant is constant along the path (two-way computation)") {
    const GammaMatrices gm = assemble_gamma(reference_model());
    const RiccatiSolution eta = solve_eta(gm, 3.0, 3.0 / 2000.0);
    const auto eta_rhs = make_eta_rhs(gm);
    for (double lam : {5.0 / 9.0, 0.3, 1.0}) {
        const double d_formula = mode_discriminant(gm, lam);
        const double c = mode_quadratic_coeff(gm, lam);
        for (int j = 0; j < eta.eta.grid.samples(); j += 100) {
            const double e = eta.eta.at_dense(j);
            const double b = mode_linear_coeff(gm, lam, e);
            const double a = mode_affine_coeff(gm, e);
            const double bdot = -gm.g12() * eta_rhs(0.0, e);  // dB/dt, analytic
            CHECK(b * b + c * a - bdot == doctest::Approx(d_formula).epsilon(1e-12));
        }
    }
}

TEST_CASE("closed-form mode gains: terminal pin, RK4 agreement, residual") {
    const GammaMatrices gm = assemble_gamma(reference_model());
    const RiccatiSolution eta = solve_eta(gm, 3.0, 3.0 / 2000.0);

    for (double lam : {5.0 / 9.0, 1.0 / (std::numbers::pi * std::numbers::pi), 0.03}) {
        const ModeRiccati mode = solve_pi(gm, eta, lam);
        CHECK(mode.method == RiccatiMethod::closed_form);
        CHECK(mode.pi.back() == gm.t2());  // bit-exact terminal value
        CHECK(mode.cross_check_error <= 1e-9);

        // Central-difference residual of the mode equation at dense samples.
        const double h = 0.5 * mode.pi.grid.dt();
        double worst = 0.0;
        for (int j = 2; j + 2 < mode.pi.grid.samples(); j += 5) {
            const double dpi = (mode.pi.at_dense(j + 1) - mode.pi.at_dense(j - 1)) / (2.0 * h);
            const double e = eta.eta.at_dense(j);
            const double rhs = mode_quadratic_coeff(gm, lam) * mode.pi.at_dense(j) *
                                   mode.pi.at_dense(j) +
                               2.0 * mode_linear_coeff(gm, lam, e) * mode.pi.at_dense(j) -
                               mode_affine_coeff(gm, e);
            worst = std::max(worst, std::abs(dpi - rhs));
        }
        // O(dt^2) central-difference truncation; measured constant ~1.3e-5
        // at this step for the stiffest of the three modes.
        CHECK(worst <= 5e-5);
    }
}

TEST_CASE("unit eigenvalue: the mode gain is exactly minus eta") {
    // With the flat unit kernel the aggregate equals the mean state, and the
    // stationary structure of the reference model forces pi = -eta. This ties
    // the closed form to an entirely different fixed-point argument.
    const GammaMatrices gm = assemble_gamma(reference_model());
    const RiccatiSolution eta = solve_eta(gm, 3.0, 3.0 / 2000.0);
    const ModeRiccati mode = solve_pi(gm, eta, 1.0);
    CHECK(mode.report.branch == ModeBranch::growing_exponential);
    double worst = 0.0;
    for (int j = 0; j < mode.pi.grid.samples(); ++j)
        worst = std::max(worst, std::abs(mode.pi.at_dense(j) + eta.eta.at_dense(j)));
    CHECK(worst <= 1e-10);
    CHECK(mode.cross_check_error <= 1e-9);
}

TEST_CASE("zero eigenvalue: integrating factor vs RK4") {
    const GammaMatrices gm = assemble_gamma(reference_model());
    const RiccatiSolution eta = solve_eta(gm, 3.0, 3.0 / 2000.0);
    const ModeRiccati mode = solve_pi(gm, eta, 0.0);
    CHECK(mode.method == RiccatiMethod::linear_ode);
    CHECK(mode.pi.back() == gm.t2());
    CHECK(mode.cross_check_error <= 1e-9);
}

TEST_CASE("a control that never reaches the drift leaves every mode linear") {
    // b = 0 gives G12 = -b^2/f22 = 0, so the quadratic coefficient -G12 lambda
    // vanishes for every eigenvalue, not only for lambda = 0. All modes must
    // route to the integrating factor: the exponential closed forms divide by
    // the quadratic coefficient and would emit NaNs here. The RK4 cross-check
    // also exercises the lambda dependence of the linear coefficient, which
    // survives even when the quadratic term dies.
    GameCoefficients m = reference_model();
    m.b = 0.0;
    const GammaMatrices gm = assemble_gamma(m);
    REQUIRE(gm.g12() == 0.0);
    const RiccatiSolution eta = solve_eta(gm, 3.0, 3.0 / 2000.0);
    for (const double lam : {1.0, 0.4, 0.0}) {
        const ModeReport r = check_mode_wellposedness(gm, eta, lam);
        CHECK(r.branch == ModeBranch::linear_ode);
        CHECK(r.well_posed);
        const ModeRiccati mode = solve_pi(gm, eta, lam);
        CHECK(mode.method == RiccatiMethod::linear_ode);
        CHECK(std::isfinite(mode.pi.front()));
        CHECK(mode.pi.back() == gm.t2());
        CHECK(mode.cross_check_error <= 1e-9);
    }
    // Two eigenvalues with different linear coefficients must give different
    // gains (the aggregate cross-weight feeds lambda into the drift shift).
    const ModeRiccati m1 = solve_pi(gm, eta, 1.0);
    const ModeRiccati m0 = solve_pi(gm, eta, 0.0);
    CHECK(std::abs(m1.pi.front() - m0.pi.front()) > 1e-6);
}

TEST_CASE("zero aggregate coupling and zero terminal give the zero gain") {
    GameCoefficients m = reference_model();
    m.c = 0.0;
    m.running_cost(0, 2) = m.running_cost(2, 0) = 0.0;  // kills G_Z
    m.terminal_cost(0, 1) = m.terminal_cost(1, 0) = 0.0;
    const GammaMatrices gm = assemble_gamma(m);
    const RiccatiSolution eta = solve_eta(gm, 3.0, 3.0 / 2000.0);
    const ModeRiccati mode = solve_pi(gm, eta, 0.7);
    // Exactly zero in exact arithmetic. The closed form evaluates B_t from
    // the numerically integrated eta, so the residue is the eta solve error
    // scaled by G12/C, not pure rounding.
    double worst = 0.0;
    for (int j = 0; j < mode.pi.grid.samples(); ++j)
        worst = std::max(worst, std::abs(mode.pi.at_dense(j)));
    CHECK(worst <= 1e-10);
}

TEST_CASE("backward mode flow: non-collapsing sensitivity with known contraction") {
    // For the unit-eigenvalue reference mode, the linearized backward flow of
    // the mode equation has constant rate 2(C pi + B) = 1, so a terminal
    // perturbation shrinks by exactly e^{-3} over the horizon — it must
    // neither vanish (silent multi-solution) nor stay put.
    const GammaMatrices gm = assemble_gamma(reference_model());
    const RiccatiSolution eta = solve_eta(gm, 3.0, 3.0 / 2000.0);
    const TimeGrid& grid = eta.eta.grid;

    const auto rhs = [&](double t, double p) {
        const double h = 0.5 * grid.dt();
        const auto j = static_cast<int>(std::llround(t / h));
        const double e = eta.eta.at_dense(std::clamp(j, 0, grid.samples() - 1));
        return mode_quadratic_coeff(gm, 1.0) * p * p +
               2.0 * mode_linear_coeff(gm, 1.0, e) * p - mode_affine_coeff(gm, e);
    };
    ScalarPath base(grid), bumped(grid);
    double esc = 0.0;
    REQUIRE(rk4_backward(grid, gm.t2(), rhs, base, 1e8, &esc));
    const double delta_T = 1e-6;
    REQUIRE(rk4_backward(grid, gm.t2() + delta_T, rhs, bumped, 1e8, &esc));
    const double ratio = (bumped.front() - base.front()) / delta_T;
    CHECK(ratio == doctest::Approx(std::exp(-3.0)).epsilon(1e-3));
}
