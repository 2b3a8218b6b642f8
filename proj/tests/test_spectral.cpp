// Tests for the spectral equilibrium construction.
//
// Strategy: every quantity with a closed form (constant-kernel stationarity,
// discrete sine sums, rank-1 projections, block-kernel aggregates) is checked
// against that form; everything else is checked by independent-route
// agreement — the v = pi z ansatz against direct backward integration, the
// reconstructed offset against its modal sum, the operator identity
// W m = Zhat, and above all the Picard fixed-point oracle, which rebuilds the
// aggregate surface from the gridded kernel operator without touching modes
// or closed forms.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "graphon_lq/errors.hpp"
#include "graphon_lq/game_model.hpp"
#include "graphon_lq/graphon.hpp"
#include "graphon_lq/spectral_equilibrium.hpp"

using namespace glq;

namespace {

// Scalar interaction model used throughout: mean-reverting drift, unit
// control gain, full cost coupling between state, control and aggregate.
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

// Variant with no aggregate coupling anywhere: the population drops out.
GameCoefficients decoupled_model() {
    GameCoefficients c = reference_model();
    c.c = 0.0;
    c.running_cost << 1, 0, 0, 0, 1, 0, 0, 0, 1;
    c.terminal_cost << 1, 0, 0, 1;
    return c;
}

// Sup gap between the solver aggregate and an oracle surface on the oracle's
// (coarser) dense grid; requires the step ratio to be integral.
double surface_gap(const EquilibriumSolution& sol, const FixedPointResult& fp) {
    const auto ratio = static_cast<int>(std::llround(fp.grid.dt() / sol.grid.dt()));
    REQUIRE(std::abs(fp.grid.dt() - ratio * sol.grid.dt()) < 1e-12);
    double sup = 0.0;
    for (Eigen::Index i = 0; i < fp.zhat.rows(); ++i) {
        for (Eigen::Index j = 0; j < fp.zhat.cols(); ++j) {
            sup = std::max(sup, std::abs(sol.zhat(i, j * ratio) - fp.zhat(i, j)));
        }
    }
    return sup;
}

}  // namespace

TEST_CASE("initial projection matches closed forms per family") {
    const double m0 = 8.0;

    SUBCASE("constant kernel: single flat mode carries the full mean") {
        const auto sg = Graphon::constant(1.0).decompose(40, 200);
        const auto xk = project_initial(sg, m0);
        REQUIRE(xk.size() == 1);
        CHECK(xk[0] == doctest::Approx(8.0).epsilon(1e-14));
    }

    SUBCASE("min-max kernel: discrete sine sums in closed form") {
        const auto sg = Graphon::min_max().decompose(40, 200);
        const auto xk = project_initial(sg, m0);
        REQUIRE(xk.size() == 40);
        for (int k = 1; k <= 40; ++k) {
            const double got = xk[static_cast<std::size_t>(k - 1)];
            if (k % 2 == 0) {
                // Midpoint sums of even sine modes cancel exactly.
                CHECK(std::abs(got) <= 1e-13);
                continue;
            }
            // Exact value of the midpoint sum: sum_i sin(a(i+1/2)) with
            // a = pi k / M telescopes to 1 / sin(a/2).
            const double discrete =
                m0 * std::numbers::sqrt2 / (200.0 * std::sin(std::numbers::pi * k / 400.0));
            CHECK(got == doctest::Approx(discrete).epsilon(1e-12));
            // Continuum limit 2 sqrt(2) m0 / (pi k), quadrature error
            // (pi k / 2M)^2 / 6 relative.
            const double continuum = m0 * 2.0 * std::numbers::sqrt2 / (std::numbers::pi * k);
            CHECK(std::abs(got - continuum) <= 2.5e-5 * k * k * std::abs(continuum) + 1e-12);
        }
    }

    SUBCASE("power-law kernel: quadrature tracks the analytic integral") {
        const auto sg = Graphon::power_law(-0.4).decompose(40, 200);
        const auto xk = project_initial(sg, m0);
        REQUIRE(xk.size() == 1);
        // Continuum: m0 <1, phi> = m0 sqrt(1.8) / 1.4; the x^0.4 endpoint
        // derivative singularity costs ~4e-4 at M = 200.
        const double continuum = m0 * std::sqrt(1.8) / 1.4;
        CHECK(std::abs(xk[0] - continuum) <= 1e-3);
        // First aggregate coefficient z_0 = lambda x^1.
        CHECK(sg.eigenvalue(0) * xk[0] == doctest::Approx(4.25918).epsilon(2e-4));
    }
}

TEST_CASE("constant-kernel mode is stationary with costate -8 eta") {
    // For w = 1 the single mode has pi = -eta and the z drift cancels
    // identically, so z stays at its initial value 8 and v = -8 eta.
    const GameCoefficients coeffs = reference_model();
    const GammaMatrices gm = assemble_gamma(coeffs);
    const auto sg = Graphon::constant(1.0).decompose(40, 200);
    const RiccatiSolution eta = solve_eta(gm, coeffs.horizon, coeffs.horizon / 2000.0);

    const auto modes = solve_modes(gm, eta, sg, project_initial(sg, coeffs.initial_mean));
    REQUIRE(modes.size() == 1);
    const ModeTrajectory& mode = modes[0];
    CHECK(mode.lambda == doctest::Approx(1.0).epsilon(1e-14));

    double z_dev = 0.0;
    double v_dev = 0.0;
    for (int j = 0; j < eta.eta.grid.samples(); ++j) {
        z_dev = std::max(z_dev, std::abs(mode.z.at_dense(j) - 8.0));
        v_dev = std::max(v_dev, std::abs(mode.v.at_dense(j) + 8.0 * eta.eta.at_dense(j)));
    }
    CHECK(z_dev <= 1e-10);
    CHECK(v_dev <= 1e-10);
    // Terminal condition is pinned exactly, and the two v routes agree.
    CHECK(mode.v.back() == gm.t2() * mode.z.back());
    CHECK(mode.ansatz_residual <= 1e-10);
}

TEST_CASE("even min-max modes vanish identically") {
    const GameCoefficients coeffs = reference_model();
    const GammaMatrices gm = assemble_gamma(coeffs);
    const auto sg = Graphon::min_max().decompose(8, 200);
    const RiccatiSolution eta = solve_eta(gm, coeffs.horizon, coeffs.horizon / 2000.0);

    const auto modes = solve_modes(gm, eta, sg, project_initial(sg, coeffs.initial_mean));
    REQUIRE(modes.size() == 8);
    for (int k = 1; k < 8; k += 2) {  // even sine orders sit at odd storage index
        const ModeTrajectory& mode = modes[static_cast<std::size_t>(k)];
        // The midpoint sine sums cancel in exact arithmetic; floating-point
        // accumulation leaves ~1e-16 in the projection, which the linear
        // dynamics never amplify.
        for (int j = 0; j < eta.eta.grid.samples(); j += 500) {
            CHECK(std::abs(mode.z.at_dense(j)) <= 1e-15);
            CHECK(std::abs(mode.v.at_dense(j)) <= 1e-15);
        }
    }
    // The dual integration route agrees on every mode, zero or not.
    for (const ModeTrajectory& mode : modes) CHECK(mode.ansatz_residual <= 1e-10);
}

TEST_CASE("constant kernel equilibrium degenerates to the mean-field game") {
    const GameCoefficients coeffs = reference_model();
    const auto sol = solve_equilibrium(coeffs, Graphon::constant(1.0));

    const int samples = sol.grid.samples();
    REQUIRE(sol.zhat.rows() == 200);
    REQUIRE(sol.zhat.cols() == samples);

    SUBCASE("aggregate is index-uniform and equals the stationary mean") {
        for (int j = 0; j < samples; j += 100) {
            CHECK((sol.zhat.col(j).maxCoeff() - sol.zhat.col(j).minCoeff()) <= 1e-12);
            CHECK(std::abs(sol.zhat(0, j) - 8.0) <= 1e-10);
            CHECK(std::abs(sol.mean(0, j) - 8.0) <= 1e-10);
        }
    }

    SUBCASE("offset collapses to -8 eta and terminal conditions are exact") {
        for (int j = 0; j < samples; j += 100) {
            CHECK(std::abs(sol.zeta(0, j) + 8.0 * sol.eta.eta.at_dense(j)) <= 1e-10);
        }
        const GammaMatrices gm = assemble_gamma(coeffs);
        for (int i = 0; i < 200; i += 50) {
            CHECK(sol.zeta(i, samples - 1) == gm.t2() * sol.zhat(i, samples - 1));
        }
    }

    SUBCASE("variance solves its forward equation") {
        CHECK(sol.variance.front() == 0.25);
        const GammaMatrices gm = assemble_gamma(coeffs);
        const double h = 0.5 * sol.grid.dt();
        double residual = 0.0;
        for (int j = 2; j < samples - 2; j += 7) {
            const double rate =
                (sol.variance.at_dense(j + 1) - sol.variance.at_dense(j - 1)) / (2.0 * h);
            const double rhs = 2.0 * (gm.g11() + gm.g12() * sol.eta.eta.at_dense(j)) *
                                   sol.variance.at_dense(j) +
                               1.0;
            residual = std::max(residual, std::abs(rate - rhs));
        }
        CHECK(residual <= 5e-5);  // central-difference truncation at dt = 3/2000
    }

    SUBCASE("recorded diagnostics are at solver accuracy") {
        CHECK(sol.mode_ansatz_residual <= 1e-10);
        CHECK(sol.zeta_modal_residual <= 1e-10);
        CHECK(sol.operator_consistency_residual <= 1e-10);
    }

    SUBCASE("feedback law at the terminal time has gain -1 and offset Zhat_T") {
        // f12 = f23 = 0 here, so the gain is -b eta_T / f22 = -1 and the
        // offset is -b zeta_T / f22 = +Zhat_T (terminal zeta is -Zhat_T).
        const double zhat_T = sol.zhat_at(0.3, 3.0);
        CHECK(feedback_control(sol, 0.3, 3.0, 1.5) ==
              doctest::Approx(-1.5 + zhat_T).epsilon(1e-12));
        // Interior consistency against the published coefficient paths.
        const double t = 1.2345;
        const double eta_t = sol.eta.eta.at_time(t);
        const double expected = feedback_state_gain(coeffs, eta_t) * 0.7 +
                                feedback_offset(coeffs, sol.zhat_at(0.6, t), sol.zeta_at(0.6, t));
        CHECK(feedback_control(sol, 0.6, t, 0.7) == doctest::Approx(expected).epsilon(1e-13));
    }
}

TEST_CASE("power-law aggregate decays under mean reversion") {
    const GameCoefficients coeffs = reference_model();
    const auto sol = solve_equilibrium(coeffs, Graphon::power_law(-0.4));
    const auto sg = Graphon::power_law(-0.4).decompose(40, 200);
    const int samples = sol.grid.samples();

    // Initial column is lambda x^1 phi(x) exactly.
    const auto xk = project_initial(sg, coeffs.initial_mean);
    for (int i = 0; i < 200; i += 40) {
        CHECK(sol.zhat(i, 0) ==
              doctest::Approx(sg.eigenvalue(0) * xk[0] * sg.eigenfunctions()(i, 0))
                  .epsilon(1e-12));
    }

    // Rank-1 kernel: the decay ratio is index-independent; mean reversion
    // pulls the aggregate down by roughly a factor of nine over the horizon.
    for (int i = 0; i < 200; i += 40) {
        const double ratio = sol.zhat(i, samples - 1) / sol.zhat(i, 0);
        CHECK(ratio >= 0.05);
        CHECK(ratio <= 0.2);
    }
    CHECK(sol.operator_consistency_residual <= 1e-10);
    CHECK(sol.zeta_modal_residual <= 1e-10);
}

TEST_CASE("min-max equilibrium keeps kernel symmetry and interior dominance") {
    const GameCoefficients coeffs = reference_model();
    const auto sol = solve_equilibrium(coeffs, Graphon::min_max());
    const int samples = sol.grid.samples();
    REQUIRE(sol.modes.size() == 40);

    // w(1-x, 1-y) = w(x,y) and the initial profile is flat, so the solution
    // is symmetric about x = 1/2.
    double sym_dev = 0.0;
    for (int i = 0; i < 100; i += 9) {
        for (int j = 0; j < samples; j += 250) {
            sym_dev = std::max(sym_dev, std::abs(sol.zhat(i, j) - sol.zhat(199 - i, j)));
            sym_dev = std::max(sym_dev, std::abs(sol.mean(i, j) - sol.mean(199 - i, j)));
        }
    }
    CHECK(sym_dev <= 1e-12);

    // Central players feel the strongest aggregate; the kernel vanishes
    // toward the boundary.
    CHECK(std::abs(sol.zhat(100, 0)) > 10.0 * std::abs(sol.zhat(0, 0)));

    // Aggregate decay is stronger than for the rank-1 families (all modes
    // decay and the spectrum is summable).
    const double ratio = sol.zhat(100, samples - 1) / sol.zhat(100, 0);
    CHECK(ratio >= 0.002);
    CHECK(ratio <= 0.05);

    CHECK(sol.mode_ansatz_residual <= 1e-10);
    CHECK(sol.zeta_modal_residual <= 1e-10);
    CHECK(sol.operator_consistency_residual <= 1e-10);
}

TEST_CASE("block kernel equilibrium is block-constant with exact initial aggregate") {
    Eigen::MatrixXd cells(2, 2);
    cells << 0.8, 0.2, 0.2, 0.6;
    const GameCoefficients coeffs = reference_model();
    SolverOptions options;
    options.k_modes = 8;
    const auto sol = solve_equilibrium(coeffs, Graphon::grid(cells), options);

    // Within each block all indices are exchangeable.
    double dev = 0.0;
    for (int i = 1; i < 100; ++i) dev = std::max(dev, std::abs(sol.zhat(i, 0) - sol.zhat(0, 0)));
    for (int i = 101; i < 200; ++i)
        dev = std::max(dev, std::abs(sol.zhat(i, 0) - sol.zhat(100, 0)));
    CHECK(dev <= 1e-12);

    // Initial aggregate = row average of the kernel times m0.
    CHECK(sol.zhat(0, 0) == doctest::Approx(8.0 * 0.5 * (0.8 + 0.2)).epsilon(1e-12));
    CHECK(sol.zhat(150, 0) == doctest::Approx(8.0 * 0.5 * (0.2 + 0.6)).epsilon(1e-12));
    CHECK(sol.operator_consistency_residual <= 1e-10);
}

TEST_CASE("surface lookup interpolates bilinearly and clamps") {
    const GameCoefficients coeffs = reference_model();
    SolverOptions options;
    options.grid_size = 50;
    options.dt = coeffs.horizon / 500.0;
    const auto sol = solve_equilibrium(coeffs, Graphon::min_max(), options);

    // Node/sample lookup reproduces the stored entry (up to the rounding of
    // the coordinate transform itself).
    const double x3 = sol.nodes[3];
    CHECK(sol.zhat_at(x3, sol.grid.time_at(10)) == doctest::Approx(sol.zhat(3, 10)).epsilon(1e-14));
    // Halfway between nodes 3 and 4 -> average of the rows.
    const double xm = 0.5 * (sol.nodes[3] + sol.nodes[4]);
    CHECK(sol.zhat_at(xm, 0.0) ==
          doctest::Approx(0.5 * (sol.zhat(3, 0) + sol.zhat(4, 0))).epsilon(1e-13));
    // Clamping beyond the domain.
    CHECK(sol.zhat_at(-0.5, 0.0) == sol.zhat(0, 0));
    CHECK(sol.zhat_at(1.5, 0.0) == sol.zhat(49, 0));
    CHECK(sol.mean_at(0.5, 99.0) == sol.mean_at(0.5, coeffs.horizon));
}

TEST_CASE("fixed point oracle: decoupled model converges immediately") {
    const GameCoefficients coeffs = decoupled_model();
    const GammaMatrices gm = assemble_gamma(coeffs);
    const auto sg = Graphon::constant(0.5).decompose(4, 100);
    const RiccatiSolution eta = solve_eta(gm, coeffs.horizon, coeffs.horizon / 1000.0);

    SUBCASE("zero initial mean: the zero surface is the fixed point") {
        const auto fp = fixed_point_oracle(gm, eta, sg, 0.0, coeffs.horizon / 500.0);
        CHECK(fp.iterations == 1);
        CHECK(fp.zhat.cwiseAbs().maxCoeff() == 0.0);
    }

    SUBCASE("decoupled mean: one corrective sweep then a fixed point") {
        // The mean evolves autonomously, so sweep one replaces the frozen
        // initial guess and sweep two reproduces it unchanged.
        const auto fp = fixed_point_oracle(gm, eta, sg, 8.0, coeffs.horizon / 500.0);
        CHECK(fp.iterations == 2);
        CHECK(fp.residual_history.back() <= 1e-12);
        // t = 0 column: W m0 = 0.5 * 8, uniform in x.
        for (Eigen::Index i = 0; i < fp.zhat.rows(); i += 25) {
            CHECK(fp.zhat(i, 0) == doctest::Approx(4.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("fixed point oracle agrees with the spectral construction") {
    const GameCoefficients coeffs = reference_model();
    const GammaMatrices gm = assemble_gamma(coeffs);
    const double dt_oracle = coeffs.horizon / 1000.0;

    SUBCASE("constant kernel") {
        const auto sol = solve_equilibrium(coeffs, Graphon::constant(1.0));
        const auto sg = Graphon::constant(1.0).decompose(40, 200);
        const auto fp = fixed_point_oracle(gm, sol.eta, sg, 8.0, dt_oracle);
        // The flat stationary surface is the fixed point on the nose.
        CHECK(fp.iterations <= 2);
        CHECK(surface_gap(sol, fp) <= 1e-9);
    }

    SUBCASE("power-law kernel") {
        const auto sol = solve_equilibrium(coeffs, Graphon::power_law(-0.4));
        const auto sg = Graphon::power_law(-0.4).decompose(40, 200);
        const auto fp = fixed_point_oracle(gm, sol.eta, sg, 8.0, dt_oracle);
        CHECK(fp.iterations <= 60);  // measured 24 sweeps, contraction ~0.07
        CHECK(surface_gap(sol, fp) <= 1e-7);
        // Plain sweeps contract geometrically once started.
        for (std::size_t j = 1; j + 1 < fp.residual_history.size(); ++j) {
            CHECK(fp.residual_history[j + 1] <= 0.9 * fp.residual_history[j]);
        }
    }

    SUBCASE("min-max kernel") {
        const auto sol = solve_equilibrium(coeffs, Graphon::min_max());
        const auto sg = Graphon::min_max().decompose(40, 200);
        const auto fp = fixed_point_oracle(gm, sol.eta, sg, 8.0, dt_oracle);
        CHECK(fp.iterations <= 30);  // measured 9 sweeps
        CHECK(surface_gap(sol, fp) <= 1e-8);
    }
}

TEST_CASE("full-kernel oracle isolates the truncation gap") {
    const GameCoefficients coeffs = reference_model();
    const GammaMatrices gm = assemble_gamma(coeffs);
    const double dt_oracle = coeffs.horizon / 1000.0;

    SUBCASE("rank-1 kernel is reproduced exactly by its truncation") {
        const auto sol = solve_equilibrium(coeffs, Graphon::power_law(-0.4));
        const auto sg = Graphon::power_law(-0.4).decompose(40, 200);
        const auto fp = fixed_point_oracle(gm, sol.eta, sg, 8.0, dt_oracle, 1e-8, 200, 0.0,
                                           /*full_kernel=*/true);
        CHECK(surface_gap(sol, fp) <= 1e-7);
    }

    SUBCASE("min-max at 40 modes: gap matches the spectral tail, not solver error") {
        const auto sol = solve_equilibrium(coeffs, Graphon::min_max());
        const auto sg = Graphon::min_max().decompose(40, 200);
        const auto fp = fixed_point_oracle(gm, sol.eta, sg, 8.0, dt_oracle, 1e-8, 200, 0.0,
                                           /*full_kernel=*/true);
        const double gap = surface_gap(sol, fp);
        // Measured 1.4e-4: orders of magnitude above the 1e-10 truncated-
        // operator agreement, far below any O(1) modeling error.
        CHECK(gap >= 2e-5);
        CHECK(gap <= 5e-4);
    }
}

TEST_CASE("solver and oracle refusals") {
    const GameCoefficients coeffs = reference_model();

    SUBCASE("excessive spectral truncation") {
        SolverOptions options;
        options.k_modes = 10;
        options.max_truncation_residual = 1e-9;
        CHECK_THROWS_AS((void)solve_equilibrium(coeffs, Graphon::min_max(), options),
                        numerical_error);
    }

    SUBCASE("degenerate control cost") {
        GameCoefficients bad = coeffs;
        bad.running_cost(1, 1) = -1.0;
        CHECK_THROWS_AS((void)solve_equilibrium(bad, Graphon::constant(1.0)), model_error);
    }

    SUBCASE("coefficient blow-up carries its escape time") {
        GameCoefficients hot = coeffs;
        hot.running_cost(0, 0) = -5.0;  // destabilizes the coefficient equation
        try {
            (void)solve_equilibrium(hot, Graphon::constant(1.0));
            FAIL("expected a numerical_error");
        } catch (const numerical_error& e) {
            REQUIRE(e.has_time());
            CHECK(e.time() > 0.0);
            CHECK(e.time() < coeffs.horizon);
        }
    }

    SUBCASE("step must divide the horizon") {
        SolverOptions options;
        options.dt = 0.7;
        CHECK_THROWS_AS((void)solve_equilibrium(coeffs, Graphon::constant(1.0), options),
                        std::invalid_argument);
    }

    SUBCASE("oracle step must refine eta's step integrally") {
        const GammaMatrices gm = assemble_gamma(coeffs);
        const auto sg = Graphon::constant(1.0).decompose(4, 50);
        const RiccatiSolution eta = solve_eta(gm, coeffs.horizon, coeffs.horizon / 1000.0);
        CHECK_THROWS_AS((void)fixed_point_oracle(gm, eta, sg, 8.0, coeffs.horizon / 400.0),
                        std::invalid_argument);
        CHECK_THROWS_AS((void)fixed_point_oracle(gm, eta, sg, 8.0, coeffs.horizon / 500.0, 1e-8,
                                                 200, /*damping=*/1.0),
                        std::invalid_argument);
    }
}
