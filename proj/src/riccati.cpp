#include "graphon_lq/riccati.hpp"

#include <algorithm>
#include <cmath>

namespace glq {

namespace {

// Exact dense-sample lookup for RK4 stage times (all stage times of a solve
// on the same grid land on stored samples; llround absorbs rounding in t).
double sample_at(const ScalarPath& path, double t) {
    const double h = 0.5 * path.grid.dt();
    const auto j = static_cast<int>(std::llround(t / h));
    return path.at_dense(std::clamp(j, 0, path.grid.samples() - 1));
}

int intervals_from(double horizon, double dt) {
    if (!(dt > 0.0)) throw std::invalid_argument("solve_eta: step must be positive");
    const double ratio = horizon / dt;
    const auto n = static_cast<int>(std::llround(ratio));
    if (n < 1 || std::abs(ratio - static_cast<double>(n)) > 1e-9 * std::max(1.0, ratio))
        throw std::invalid_argument("solve_eta: step must divide the horizon");
    return n;
}

// Right-hand side of the mode equation dpi/dt = C pi^2 + 2 B_t pi - A_t with
// eta tapped from its dense storage.
template <class EtaPath>
auto make_pi_rhs(const GammaMatrices& gm, const EtaPath& eta, double lambda) {
    const double c = mode_quadratic_coeff(gm, lambda);
    const double beta = mode_shift(gm, lambda);
    const double g12 = gm.g12(), z1 = gm.z1(), z2 = gm.z2();
    return [c, beta, g12, z1, z2, &eta](double t, double p) {
        const double e = sample_at(eta, t);
        const double b = -g12 * e - beta;
        const double a = z1 * e - z2;
        return (c * p + 2.0 * b) * p - a;
    };
}

// Fills pi from the linearized closed form on the stored grid. `rep` must
// describe a root-free closed-form branch.
void fill_closed_form(ScalarPath& pi, const GammaMatrices& gm, const ScalarPath& eta,
                      const ModeReport& rep) {
    const TimeGrid& grid = pi.grid;
    const double horizon = grid.horizon();
    const double inv_c = 1.0 / rep.c;
    const double sq = rep.d > 0.0 ? std::sqrt(rep.d) : 0.0;
    for (int j = 0; j < grid.samples(); ++j) {
        const double s = std::max(0.0, horizon - grid.time_at(j));  // backward variable
        double log_slope;  // dtheta/dt / theta at this time
        switch (rep.branch) {
            case ModeBranch::growing_exponential: log_slope = -sq; break;
            case ModeBranch::linear: log_slope = -rep.k_mixed / (1.0 + rep.k_mixed * s); break;
            default: {  // general: stable ratio form, r in (0,1]
                const double r = std::exp(-2.0 * sq * s);
                log_slope = -sq * (rep.f + r) / (rep.f - r);
                break;
            }
        }
        const double b_t = mode_linear_coeff(gm, rep.lambda, eta.at_dense(j));
        pi.values[static_cast<std::size_t>(j)] = -inv_c * (log_slope + b_t);
    }
    // The closed form reproduces the terminal condition identically in exact
    // arithmetic; pin it bit-exactly.
    pi.values.back() = gm.t2();
}

// Vanishing quadratic coefficient (lambda = 0 or G12 = 0):
// dpi/dt = 2 B_t pi - A_t solved backward by the integrating
// factor, evaluated with step-local quadratures so nothing overflows:
//   pi_i = exp(-2 I_i) pi_{i+1} + Simpson of exp(-2 I(t_i..s)) A_s over the step,
// where I_i = int_{t_i}^{t_{i+1}} B and the half-step integral of B comes from
// the cubic Hermite interpolant of B (derivative of B known analytically from
// the eta equation). Midpoints are Hermite-filled from the ODE right-hand
// side, keeping the dense-output order.
ScalarPath integrating_factor_solve(const GammaMatrices& gm, const ScalarPath& eta,
                                    double lambda) {
    const TimeGrid& grid = eta.grid;
    const double dt = grid.dt();
    const auto eta_rhs = make_eta_rhs(gm);
    const double g12 = gm.g12(), z1 = gm.z1(), z2 = gm.z2();
    const double beta0 = mode_shift(gm, lambda);

    const auto b_of = [&](int dense) { return -g12 * eta.at_dense(dense) - beta0; };
    const auto a_of = [&](int dense) { return z1 * eta.at_dense(dense) - z2; };
    // d/dt B_t = -G12 * deta/dt (the eta equation is autonomous).
    const auto bdot_of = [&](int dense) { return -g12 * eta_rhs(0.0, eta.at_dense(dense)); };

    ScalarPath pi(grid);
    double next = gm.t2();
    pi.values.back() = next;
    for (int i = grid.intervals() - 1; i >= 0; --i) {
        const int j0 = TimeGrid::node(i), jm = TimeGrid::midpoint(i), j1 = TimeGrid::node(i + 1);
        // Simpson over the full step for int B.
        const double int_full = dt / 6.0 * (b_of(j0) + 4.0 * b_of(jm) + b_of(j1));
        // Cubic-Hermite quadrature of B over the left half step.
        const double int_half = dt * (13.0 / 32.0 * b_of(j0) + 3.0 / 32.0 * b_of(j1)) +
                                dt * dt * (11.0 / 192.0 * bdot_of(j0) - 5.0 / 192.0 * bdot_of(j1));
        // Simpson of exp(-2 int_{t_i}^s B) A_s over the step.
        const double source = dt / 6.0 *
                              (a_of(j0) + 4.0 * std::exp(-2.0 * int_half) * a_of(jm) +
                               std::exp(-2.0 * int_full) * a_of(j1));
        const double here = std::exp(-2.0 * int_full) * next + source;
        const double f_here = 2.0 * b_of(j0) * here - a_of(j0);
        const double f_next = 2.0 * b_of(j1) * next - a_of(j1);
        pi.values[static_cast<std::size_t>(jm)] = hermite_midpoint(here, f_here, next, f_next, dt);
        pi.values[static_cast<std::size_t>(j0)] = here;
        next = here;
    }
    return pi;
}

double max_node_diff(const ScalarPath& a, const ScalarPath& b, int stride_b = 1) {
    double worst = 0.0;
    for (int i = 0; i <= a.grid.intervals(); ++i)
        worst = std::max(worst, std::abs(a.at_node(i) - b.at_node(i * stride_b)));
    return worst;
}

}  // namespace

RiccatiSolution solve_eta(const GammaMatrices& gm, double horizon, double dt, double blowup_cap) {
    const int n = intervals_from(horizon, dt);
    const TimeGrid grid(horizon, n);
    RiccatiSolution out{ScalarPath(grid), RiccatiMethod::rk4, 0.0};
    const auto rhs = make_eta_rhs(gm);
    double escape = 0.0;
    if (!rk4_backward(grid, gm.t1(), rhs, out.eta, blowup_cap, &escape))
        throw numerical_error("eta Riccati equation blew up during backward integration", escape);

    // Step-halving Richardson estimate: a half-step run shares every node of
    // the primary grid; RK4's O(dt^4) global error makes the node gap itself
    // (within 16/15) the primary run's error.
    const TimeGrid half_grid(horizon, 2 * n);
    ScalarPath eta_half(half_grid);
    if (!rk4_backward(half_grid, gm.t1(), rhs, eta_half, blowup_cap, &escape))
        throw numerical_error("eta Riccati equation blew up at half step", escape);
    out.error_estimate = 16.0 / 15.0 * max_node_diff(out.eta, eta_half, 2);
    return out;
}

ModeReport check_mode_wellposedness(const GammaMatrices& gm, const RiccatiSolution& eta,
                                    double lambda) {
    const double horizon = eta.eta.grid.horizon();
    ModeReport rep;
    rep.lambda = lambda;
    rep.c = mode_quadratic_coeff(gm, lambda);
    rep.d = mode_discriminant(gm, lambda);
    rep.b_terminal = mode_linear_coeff(gm, lambda, gm.t1());
    rep.k_mixed = rep.b_terminal + rep.c * gm.t2();

    // Uniform-in-mode discriminant bound (informational; see check_assumptions).
    if (gm.z1() != 0.0) {
        const double shifted = gm.g11() + gm.g12() * gm.z2() / gm.z1();
        rep.sufficient_condition_met =
            gm.g11() * gm.g11() >= shifted * shifted - gm.g12() * gm.g21();
    } else {
        rep.sufficient_condition_met = gm.g11() * gm.g11() + gm.g12() * gm.g21() >= 0.0;
    }

    // The quadratic term vanishes when lambda = 0 and also when the control
    // gain does not reach the drift (G12 = 0); either way the equation is
    // linear and the exponential/general closed forms (which divide by the
    // quadratic coefficient) do not apply.
    if (rep.c == 0.0) {
        rep.branch = ModeBranch::linear_ode;
        rep.closed_form_available = true;  // integrating factor, no quadratic term
        rep.well_posed = true;
        return rep;
    }

    const double scale = std::max({1.0, std::abs(rep.k_mixed), std::sqrt(std::abs(rep.d))});
    constexpr double tol = 1e-12;

    if (rep.d < -tol * scale * scale) {
        rep.branch = ModeBranch::oscillatory;
        rep.closed_form_available = false;
        // Guarded RK4 probe decides well-posedness for the oscillatory case.
        ScalarPath probe(eta.eta.grid);
        double escape = 0.0;
        rep.well_posed =
            rk4_backward(eta.eta.grid, gm.t2(), make_pi_rhs(gm, eta.eta, lambda), probe, 1e8,
                         &escape);
        return rep;
    }

    if (std::abs(rep.d) <= tol * scale * scale) {
        rep.branch = ModeBranch::linear;  // theta family 1 + K s
        if (rep.k_mixed < 0.0 && 1.0 + rep.k_mixed * horizon <= 0.0) {
            rep.has_root = true;
            rep.root_time = horizon + 1.0 / rep.k_mixed;  // s* = -1/K
        }
        rep.closed_form_available = !rep.has_root;
        rep.well_posed = !rep.has_root;
        return rep;
    }

    const double sq = std::sqrt(rep.d);
    if (std::abs(rep.k_mixed - sq) <= tol * scale) {
        // F would divide by zero; theta is the pure growing exponential,
        // which never vanishes.
        rep.branch = ModeBranch::growing_exponential;
        rep.closed_form_available = true;
        rep.well_posed = true;
        return rep;
    }

    rep.branch = ModeBranch::general;
    rep.f = (rep.k_mixed + sq) / (rep.k_mixed - sq);
    // theta_t = nu_{T-t} vanishes iff F = e^{-2 sqrt(D) s} for some s in
    // [0,T]; endpoints included (a terminal-time pole is still a pole).
    if (rep.f >= std::exp(-2.0 * sq * horizon) && rep.f <= 1.0) {
        rep.has_root = true;
        rep.root_time = horizon + std::log(rep.f) / (2.0 * sq);
    }
    rep.closed_form_available = !rep.has_root;
    rep.well_posed = !rep.has_root;
    return rep;
}

ModeRiccati solve_pi(const GammaMatrices& gm, const RiccatiSolution& eta, double lambda,
                     int mode_index, double blowup_cap) {
    const TimeGrid& grid = eta.eta.grid;
    ModeRiccati out{mode_index, lambda, ScalarPath(grid), RiccatiMethod::closed_form, {}, 0.0};
    out.report = check_mode_wellposedness(gm, eta, lambda);
    if (out.report.has_root)
        throw numerical_error("mode Riccati equation is ill-posed: linearized solution vanishes",
                              out.report.root_time);

    double escape = 0.0;
    switch (out.report.branch) {
        case ModeBranch::linear_ode: {
            out.method = RiccatiMethod::linear_ode;
            out.pi = integrating_factor_solve(gm, eta.eta, lambda);
            ScalarPath alt(grid);
            if (!rk4_backward(grid, gm.t2(), make_pi_rhs(gm, eta.eta, lambda), alt, blowup_cap,
                              &escape))
                throw numerical_error("linear mode equation cross-check blew up", escape);
            out.cross_check_error = max_node_diff(out.pi, alt);
            break;
        }
        case ModeBranch::oscillatory: {
            out.method = RiccatiMethod::rk4;
            if (!rk4_backward(grid, gm.t2(), make_pi_rhs(gm, eta.eta, lambda), out.pi, blowup_cap,
                              &escape))
                throw numerical_error("mode Riccati equation blew up (oscillatory fallback)",
                                      escape);
            // No independent method exists here; cross-check by step halving,
            // with eta re-solved on the fine grid so stage times stay exact.
            const RiccatiSolution eta_fine =
                solve_eta(gm, grid.horizon(), 0.5 * grid.dt(), blowup_cap);
            ScalarPath fine(eta_fine.eta.grid);
            if (!rk4_backward(eta_fine.eta.grid, gm.t2(),
                              make_pi_rhs(gm, eta_fine.eta, lambda), fine, blowup_cap, &escape))
                throw numerical_error("mode Riccati half-step cross-check blew up", escape);
            out.cross_check_error = max_node_diff(out.pi, fine, 2);
            break;
        }
        default: {
            out.method = RiccatiMethod::closed_form;
            fill_closed_form(out.pi, gm, eta.eta, out.report);
            ScalarPath alt(grid);
            if (!rk4_backward(grid, gm.t2(), make_pi_rhs(gm, eta.eta, lambda), alt, blowup_cap,
                              &escape))
                throw numerical_error("mode Riccati RK4 cross-check blew up", escape);
            out.cross_check_error = max_node_diff(out.pi, alt);
            break;
        }
    }
    return out;
}

}  // namespace glq
