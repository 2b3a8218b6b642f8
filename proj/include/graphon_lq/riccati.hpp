// Riccati layer: the scalar decoupling gain eta and the per-mode gains pi_k.
//
// eta solves the autonomous backward Riccati equation
//
//   deta/dt = -G12 eta^2 - (G11 - G22) eta + G21,   eta_T = G_T1,
//
// integrated by classical RK4 with a step-halving error estimate and explicit
// blow-up detection.
//
// Each spectral mode k of the graphon contributes a scalar Riccati equation
// with time-varying coefficients for the gain pi_k tying the mode's costate
// aggregate to its state aggregate:
//
//   dpi/dt = C pi^2 + 2 B_t pi - A_t,   pi_T = G_T2,
//
//   C   = -G12 lambda_k                     (constant)
//   B_t = -G12 eta_t - beta,  beta = ½(G11 - G22 + G_Z1 lambda_k)
//   A_t = G_Z1 eta_t - G_Z2.
//
// The substitution pi = -(1/C)(dtheta/dt / theta + B) linearizes the equation
// into d²theta/dt² = D theta with the CONSTANT discriminant
//
//   D = beta^2 + G12 lambda_k G_Z2 + G12 G21,
//
// every eta-dependent term cancelling algebraically (this is also checked
// numerically in the tests). Solving the linearized equation with its mixed
// terminal condition yields theta_t = nu_{T-t} with
//
//   nu_s = F e^{sqrt(D) s} - e^{-sqrt(D) s},
//   F    = (K + sqrt(D)) / (K - sqrt(D)),   K = B_T + C G_T2,
//
// valid while nu has no root on [0,T]. Degenerate cases get their own
// branches: K = sqrt(D) makes F undefined and nu collapses to the pure
// growing exponential e^{sqrt(D) s}; D = 0 gives the affine family 1 + K s;
// a vanishing quadratic coefficient (lambda_k = 0, or a control gain that
// never reaches the drift) leaves a linear ODE solved by an integrating
// factor; D < 0 has no real closed form and falls back to guarded RK4.
#pragma once

#include <limits>

#include "graphon_lq/errors.hpp"
#include "graphon_lq/game_model.hpp"
#include "graphon_lq/ode_grid.hpp"

namespace glq {

enum class RiccatiMethod { closed_form, rk4, linear_ode };
enum class ModeBranch { general, growing_exponential, linear, linear_ode, oscillatory };

[[nodiscard]] constexpr const char* to_string(RiccatiMethod m) {
    switch (m) {
        case RiccatiMethod::closed_form: return "closed_form";
        case RiccatiMethod::rk4: return "rk4";
        case RiccatiMethod::linear_ode: return "linear_ode";
    }
    return "?";
}
[[nodiscard]] constexpr const char* to_string(ModeBranch b) {
    switch (b) {
        case ModeBranch::general: return "general";
        case ModeBranch::growing_exponential: return "growing_exponential";
        case ModeBranch::linear: return "linear";
        case ModeBranch::linear_ode: return "linear_ode";
        case ModeBranch::oscillatory: return "oscillatory";
    }
    return "?";
}

// Mode-equation coefficient helpers (exposed so the tests can re-derive the
// discriminant along the eta path and confirm it is constant).
[[nodiscard]] inline double mode_quadratic_coeff(const GammaMatrices& gm, double lambda) {
    return -gm.g12() * lambda;  // C
}
[[nodiscard]] inline double mode_shift(const GammaMatrices& gm, double lambda) {
    return 0.5 * (gm.g11() - gm.g22() + gm.z1() * lambda);  // beta
}
[[nodiscard]] inline double mode_linear_coeff(const GammaMatrices& gm, double lambda,
                                              double eta_t) {
    return -gm.g12() * eta_t - mode_shift(gm, lambda);  // B_t
}
[[nodiscard]] inline double mode_affine_coeff(const GammaMatrices& gm, double eta_t) {
    return gm.z1() * eta_t - gm.z2();  // A_t
}
[[nodiscard]] inline double mode_discriminant(const GammaMatrices& gm, double lambda) {
    const double beta = mode_shift(gm, lambda);
    return beta * beta + gm.g12() * lambda * gm.z2() + gm.g12() * gm.g21();  // D
}

// Solution of the scalar eta equation.
struct RiccatiSolution {
    ScalarPath eta;
    RiccatiMethod method = RiccatiMethod::rk4;
    // Step-halving (Richardson) estimate of the max node error.
    double error_estimate = 0.0;
};

// Backward RK4 solve of eta on [0, horizon] with step dt (horizon/dt must be
// an integer). Throws numerical_error carrying the escape time if |eta|
// crosses `blowup_cap`; throws std::invalid_argument for a bad step.
[[nodiscard]] RiccatiSolution solve_eta(const GammaMatrices& gm, double horizon, double dt,
                                        double blowup_cap = 1e8);

// Well-posedness classification of one mode equation. All quantities are
// derived from the reduced coefficients, the eigenvalue, and the horizon;
// `well_posed` for the oscillatory branch is decided by a guarded RK4 probe.
struct ModeReport {
    double lambda = 0.0;
    ModeBranch branch = ModeBranch::general;
    double d = 0.0;           // discriminant D
    double b_terminal = 0.0;  // B_T
    double c = 0.0;           // C
    double k_mixed = 0.0;     // K = B_T + C G_T2
    double f = std::numeric_limits<double>::quiet_NaN();  // F (general branch only)
    bool closed_form_available = false;
    bool has_root = false;  // theta vanishes somewhere on [0,T] -> ill-posed
    double root_time = std::numeric_limits<double>::quiet_NaN();
    bool well_posed = false;
    bool sufficient_condition_met = false;  // uniform-in-mode discriminant bound
};

[[nodiscard]] ModeReport check_mode_wellposedness(const GammaMatrices& gm,
                                                  const RiccatiSolution& eta, double lambda);

// Solution of one mode equation, on the same grid as eta.
struct ModeRiccati {
    int mode_index = 0;
    double lambda = 0.0;
    ScalarPath pi;
    RiccatiMethod method = RiccatiMethod::closed_form;
    ModeReport report;
    // Max node discrepancy against the alternative method (RK4 for the
    // closed-form and integrating-factor branches; step-halving for the RK4
    // fallback, which has no independent alternative).
    double cross_check_error = 0.0;
};

// Solves the mode equation for one eigenvalue. Branch selection follows the
// classification in check_mode_wellposedness; a root of theta on [0,T] or a
// blow-up of the RK4 fallback throws numerical_error (the mode is ill-posed).
[[nodiscard]] ModeRiccati solve_pi(const GammaMatrices& gm, const RiccatiSolution& eta,
                                   double lambda, int mode_index = 0, double blowup_cap = 1e8);

}  // namespace glq
