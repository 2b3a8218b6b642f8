// Spectral construction of the graphon-game equilibrium.
//
// With eta and the per-mode gains pi_k in hand, the deterministic part of the
// equilibrium reduces to one forward linear ODE per spectral mode:
//
//   dz_k/dt = (G11 + G12 eta_t + G_Z1 lambda_k + G12 lambda_k pi_k,t) z_k,
//   z_k(0)  = lambda_k <m0, phi_k>,          v_k,t = pi_k,t z_k,t,
//
// after which everything is reconstructed on the index grid:
//
//   aggregate    Zhat(x,t) = sum_k z_k,t phi_k(x)
//   offset       dzeta/dt  = zeta (G22 - G12 eta) + Zhat (G_Z2 - G_Z1 eta),
//                zeta(x,T) = G_T2 Zhat(x,T)        (backward, per index)
//   mean state   dm/dt     = (G11 + G12 eta) m + G12 zeta + G_Z1 Zhat,
//                m(x,0)    = m0                    (forward, per index)
//   variance     dV/dt     = 2 (G11 + G12 eta) V + 1,  V(0) = v0.
//
// Three structural identities double as built-in diagnostics, recorded on the
// solution: (1) the v ansatz against a direct backward integration of the
// coupled mode system, (2) zeta against its modal sum  sum_k v_k phi_k, and
// (3) the operator identity  W m_t = Zhat_t  (the modal coefficients of m
// scale to z exactly, so the truncated operator applied to the mean must
// reproduce the aggregate to ODE accuracy).
//
// fixed_point_oracle is the independent check: a plain Picard iteration on
// the aggregate surface using only the gridded kernel operator — no spectral
// modes, no closed forms — whose fixed point must agree with the spectral
// aggregate.
#pragma once

#include <Eigen/Dense>
#include <vector>

#include "graphon_lq/game_model.hpp"
#include "graphon_lq/graphon.hpp"
#include "graphon_lq/riccati.hpp"

namespace glq {

// Deterministic trajectories of one spectral mode.
struct ModeTrajectory {
    int mode_index = 0;
    double lambda = 0.0;
    ScalarPath z;   // state-aggregate coefficient
    ScalarPath v;   // costate-aggregate coefficient, v = pi z
    ScalarPath pi;  // the mode's gain (kept for export and diagnostics)
    // Sup gap between v = pi z and a direct backward integration of the
    // coupled mode system using the computed z.
    double ansatz_residual = 0.0;
};

// Full equilibrium object on the index grid x_i = (i + 1/2)/M.
struct EquilibriumSolution {
    TimeGrid grid;
    std::vector<double> nodes;  // index grid
    Eigen::MatrixXd zhat;       // M x samples aggregate surface
    Eigen::MatrixXd zeta;       // M x samples costate offset surface
    Eigen::MatrixXd mean;       // M x samples state mean surface
    ScalarPath variance;        // index-independent state variance
    std::vector<ModeTrajectory> modes;
    RiccatiSolution eta;
    GameCoefficients coefficients;

    // Recorded diagnostics (sup norms over the grid).
    double mode_ansatz_residual = 0.0;
    double zeta_modal_residual = 0.0;
    double operator_consistency_residual = 0.0;

    // Bilinear surface lookup; x clamped to [0,1], t to [0,T].
    [[nodiscard]] double zhat_at(double x, double t) const { return surface_at(zhat, x, t); }
    [[nodiscard]] double zeta_at(double x, double t) const { return surface_at(zeta, x, t); }
    [[nodiscard]] double mean_at(double x, double t) const { return surface_at(mean, x, t); }

    [[nodiscard]] double surface_at(const Eigen::MatrixXd& surface, double x, double t) const;
};

// Modal coefficients of the (constant) initial mean profile: x_k = m0 <1, phi_k>
// by grid quadrature.
[[nodiscard]] std::vector<double> project_initial(const SpectralGraphon& sg, double m0);

// Solves every retained mode. Propagates ill-posed-mode errors from the gain
// solves; each trajectory records its forward/backward ansatz residual.
[[nodiscard]] std::vector<ModeTrajectory> solve_modes(const GammaMatrices& gm,
                                                      const RiccatiSolution& eta,
                                                      const SpectralGraphon& sg,
                                                      const std::vector<double>& initial_modes,
                                                      double blowup_cap = 1e8);

// Assembles the full solution from solved modes (surfaces, variance,
// diagnostics). `threads` bounds the per-index integration workers.
[[nodiscard]] EquilibriumSolution reconstruct(const GammaMatrices& gm, const RiccatiSolution& eta,
                                              const SpectralGraphon& sg,
                                              std::vector<ModeTrajectory> modes,
                                              const GameCoefficients& coeffs, int threads = 1);

// The equilibrium feedback law at (x, t, state):
//   u = -(C_f12 + b eta_t) state / C_f22 - (C_f23 Zhat(x,t) + b zeta(x,t)) / C_f22.
[[nodiscard]] double feedback_control(const EquilibriumSolution& sol, double x, double t,
                                      double state);

struct SolverOptions {
    double dt = 0.0;  // 0 -> horizon / 2000
    int k_modes = 40;
    int grid_size = 200;
    double blowup_cap = 1e8;
    // Refuse to solve when the spectral truncation leaves more than this much
    // squared kernel mass unaccounted for.
    double max_truncation_residual = 1e-3;
    int threads = 1;
    bool aggregate_costate_literal = false;
};

// One-call pipeline: validate + reduce coefficients, decompose the graphon,
// solve eta and all modes, reconstruct. Throws model_error for assumption
// violations (hard ones), numerical_error for blow-ups / ill-posed modes /
// excessive truncation.
[[nodiscard]] EquilibriumSolution solve_equilibrium(const GameCoefficients& coeffs,
                                                    const Graphon& graphon,
                                                    const SolverOptions& options = {});

// Result of the independent grid fixed-point oracle.
struct FixedPointResult {
    TimeGrid grid;
    std::vector<double> nodes;
    Eigen::MatrixXd zhat;  // M x samples fixed-point aggregate surface
    int iterations = 0;
    std::vector<double> residual_history;  // sup-norm change per iteration
};

// Plain Picard iteration on the aggregate surface through the gridded kernel
// operator of `sg`: freeze Zhat, solve zeta backward and m forward per index,
// set the next Zhat = (operator matrix) * m, repeat until the sup change is
// below `tol`. `damping` in [0,1) blends in the previous iterate (0 = plain
// Picard). With `full_kernel` the raw-kernel quadrature operator replaces the
// truncated one, which isolates the spectral truncation error when compared
// against the default run. The oracle step must be an integer multiple of
// eta's step so every RK4 stage lands on stored eta samples. Throws
// numerical_error (with the residual tail in the message) if max_iter is
// exhausted.
[[nodiscard]] FixedPointResult fixed_point_oracle(const GammaMatrices& gm,
                                                  const RiccatiSolution& eta,
                                                  const SpectralGraphon& sg, double m0, double dt,
                                                  double tol = 1e-8, int max_iter = 200,
                                                  double damping = 0.0, bool full_kernel = false);

}  // namespace glq
