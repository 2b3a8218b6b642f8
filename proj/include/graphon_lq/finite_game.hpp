// Exact N-player games on sampled indices.
//
// Players k = 1..N with sampled indices x_k share the scalar coefficients and
// interact through the sampled aggregate Z^k = (1/N) sum_l w(x_k, x_l) X^l
// (self-weight included). For linear feedback opponents each player faces a
// linear-quadratic problem in the N-dimensional state, so the closed-loop
// Nash equilibrium is characterized by N coupled symmetric N x N Riccati
// equations: with W' = W_N / N, e = e_k, w = (W')^T e_k, R = C_f22,
//
//   s_k = C_f12 e + C_f23 w,     u_k = s_k + b P^k e,
//   F[k,:] = -(1/R) u_k^T,       A_cl = a I + c W' + b F,
//   -dP^k/dt = Q_k + (1/R)(u u^T - u s^T - s u^T) + P^k A_cl + A_cl^T P^k,
//   Q_k = C_f11 e e^T + C_f33 w w^T + C_f13 (e w^T + w e^T),
//   P^k_T = C_h11 e e^T + C_h12 (e w^T + w e^T) + C_h22 w w^T,
//
// derived from player k's HJB with value (1/2) X^T P^k X + r^k. The costate
// tensor of the underlying FBSDE is p^{kh} = (P^k X)_h; its diagonal row
// P^k[k,:] is what feedback and chaos estimates consume, so that row is kept
// on the dense time grid alongside F. Every solve runs a mandatory residual
// verification: simulated closed-loop paths must satisfy the backward drift
// identity (costate drift = -Hamiltonian gradient, opponents' reaction terms
// included) to O(dt), and the terminal costate conditions exactly.
//
// Best responses and cost evaluation against *frozen affine* opponents use
// the standard single-player reduction (N x N Riccati + affine + scalar ODE)
// and the Lyapunov route (mean + covariance ODEs), giving exact values with
// no Monte Carlo.
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "graphon_lq/game_model.hpp"
#include "graphon_lq/graphon.hpp"
#include "graphon_lq/ode_grid.hpp"

namespace glq {

struct FiniteGame {
    GameCoefficients coefficients;
    std::vector<double> indices;  // sampled or user-supplied, order preserved
    Eigen::MatrixXd weights;      // w(x_k, x_l), symmetric, entries in [0,1]
    std::uint64_t seed = 0;       // recorded for reproducibility (0 = manual indices)
    double dt = 0.0;              // Riccati/integration step

    [[nodiscard]] int player_count() const { return static_cast<int>(indices.size()); }
    [[nodiscard]] TimeGrid grid() const;
    // W' = W_N / N, the matrix actually entering dynamics and costs.
    [[nodiscard]] Eigen::MatrixXd scaled_weights() const {
        return weights / static_cast<double>(player_count());
    }
};

// Game on user-supplied indices. dt = 0 defaults to horizon / 500.
[[nodiscard]] FiniteGame assemble_game(const Graphon& kernel, const GameCoefficients& coeffs,
                                       std::vector<double> indices, double dt = 0.0,
                                       std::uint64_t seed = 0);

// Game on the first `player_count` indices of the seeded uniform stream, so
// games with the same seed and growing N extend one index sequence.
[[nodiscard]] FiniteGame sample_game(const Graphon& kernel, const GameCoefficients& coeffs,
                                     int player_count, std::uint64_t seed, double dt = 0.0);

// Time-gridded affine strategy profile: alpha^k_t = gain_t[k,:] X_t + offset_t[k].
// gain/offset are stored per dense half-grid sample of `grid`.
struct AffineProfile {
    TimeGrid grid;
    std::vector<Eigen::MatrixXd> gain;
    std::vector<Eigen::VectorXd> offset;
};

struct NashFeedback {
    TimeGrid grid;
    std::vector<Eigen::MatrixXd> gain;    // F_t per dense sample
    std::vector<Eigen::VectorXd> offset;  // identically zero for this model class
    // Row k of costate_gain[j] represents p^{kk}_t = sum_l P^k_t[k,l] X^l_t.
    std::vector<Eigen::MatrixXd> costate_gain;
    // Residual verification results (sup norms, scaled by the solution size).
    double drift_residual = 0.0;
    double terminal_residual = 0.0;

    [[nodiscard]] AffineProfile profile() const { return {grid, gain, offset}; }
};

struct SolveNashOptions {
    double blowup_cap = 1e8;
    // Desk-scale guard; raise deliberately for larger sweeps.
    int max_players = 64;
    int residual_paths = 16;
    std::uint64_t residual_seed = 1;
};

// Backward tensor-Riccati solve + mandatory closed-loop residual verification.
// Throws config_error beyond the player cap, numerical_error (with escape
// time) on Riccati blow-up or on residual-check failure.
[[nodiscard]] NashFeedback solve_nash(const FiniteGame& game,
                                      const SolveNashOptions& options = {});

struct BestResponse {
    double value = 0.0;  // optimal cost of the deviating player
    // The deviator's optimal law alpha_t = gain_row_t . X_t + offset_t,
    // stored per dense sample.
    std::vector<Eigen::VectorXd> gain_row;
    std::vector<double> offset;
};

// Exact best response of `player` against the frozen profile (which must live
// on the game's grid). Opponents' rows of `opponents.gain`/`offset` are used;
// the player's own row is ignored.
[[nodiscard]] BestResponse best_response_value(const FiniteGame& game,
                                               const AffineProfile& opponents, int player,
                                               double blowup_cap = 1e8);

// Exact closed-loop costs J^k for all players under the affine profile, by
// propagating the state mean and covariance and integrating the quadratic
// cost (Simpson on the dense grid).
[[nodiscard]] Eigen::VectorXd cost_evaluate(const FiniteGame& game, const AffineProfile& profile);

}  // namespace glq
