// Path simulation and empirical convergence statistics.
//
// One counter-based noise convention drives everything here: the Brownian
// increment of (player k, global path j, step i) is sqrt(dt) * N(k,j,i) with
//
//     N(k,j,i) = normal2(k, j/2, i)[j mod 2]
//
// drawn from CounterRng(seed, state_noise); initial states use the same
// addressing at step 0 under the initial_state role. Two consequences:
//
//   * reruns are bit-exact for any path chunking, worker count, or
//     evaluation order — the draw depends only on (seed, k, j, i); and
//   * two different systems simulated from one seed (the N-player closed
//     loop and the continuum-policy states at the sampled indices) are
//     driven by the *same* Brownian paths, so their pathwise gap measures
//     the coupling discrepancy alone, with no independent-noise variance.
//
// Time stepping is Euler–Maruyama on the nodes of a uniform grid. The step
// must place every node on a stored dense sample of the source solution
// grids (dt_sim an integer multiple of half the source step), so policy
// coefficients are read exactly and never interpolated inside the loop;
// finer steps are refused rather than silently interpolated.
//
// The player-coupling gap between an N-player Nash solve and the continuum
// equilibrium evaluated at the sampled indices is estimated as
//
//   delta = max_k ( E[ sup_t ( |X^k - X^{x_k}|^2 + |p^k - p^{x_k}|^2 ) ]
//                   + sup_t E[ |Z^k - Zhat(x_k, t)|^2 ] ),
//
// with the diagonal costate reconstructed on both sides (p^k from the solved
// costate rows, p^{x_k} = eta_t X^{x_k} + zeta(x_k, t)), sup taken over
// simulation nodes, and expectations estimated by path averages.
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "graphon_lq/finite_game.hpp"
#include "graphon_lq/graphon.hpp"
#include "graphon_lq/ode_grid.hpp"
#include "graphon_lq/spectral_equilibrium.hpp"

namespace glq {

struct SimConfig {
    int n_paths = 1000;
    // Euler–Maruyama step; 0 = the source solution's solver step. Must be an
    // integer multiple of half the source step (see file comment).
    double dt_sim = 0.0;
    std::uint64_t seed = 0;
    // Multiplies the Brownian increments only (0 = deterministic flow);
    // initial-state randomness is governed by the model's initial variance.
    double noise_scale = 1.0;
    // Vectorization block of paths; a throughput knob with no effect on
    // results (noise is addressed by global path index).
    int path_chunk = 512;
    int threads = 1;
};

// Streaming per-node first and second moments of continuum-policy states.
struct GraphonSimStats {
    TimeGrid grid;  // simulation grid; statistics sit on its nodes
    std::vector<double> indices;
    int n_paths = 0;
    Eigen::MatrixXd mean;      // players x (steps + 1)
    Eigen::MatrixXd variance;  // players x (steps + 1), unbiased
};

// Fully stored ensemble, one players-x-paths block per node.
struct PathEnsemble {
    TimeGrid grid;
    std::vector<double> indices;
    int n_paths = 0;
    std::vector<Eigen::MatrixXd> states;
};

// Simulates the continuum-policy states at the given indices: each player
// follows the equilibrium feedback of `sol` at its own index, driven by its
// own Brownian path. Streaming variant keeps moments only; the stored
// variant keeps every state (and refuses ensembles beyond ~2 GB).
[[nodiscard]] GraphonSimStats simulate_graphon_policy(const EquilibriumSolution& sol,
                                                      const std::vector<double>& indices,
                                                      const SimConfig& cfg = {});
[[nodiscard]] PathEnsemble simulate_graphon_paths(const EquilibriumSolution& sol,
                                                  const std::vector<double>& indices,
                                                  const SimConfig& cfg = {});

// The continuum equilibrium policy arranged as a finite-game strategy
// profile: diagonal gain (every player feeds back on its own state with the
// index-independent equilibrium gain) plus the per-index offset, tabulated
// on the game's dense grid. Requires the game step to be an integer multiple
// of the equilibrium solver step so every lookup is exact.
[[nodiscard]] AffineProfile graphon_profile(const FiniteGame& game,
                                            const EquilibriumSolution& sol);

struct DeltaEstimate {
    double delta_hat = 0.0;       // max over players
    double standard_error = 0.0;  // of the maximizing player's estimate
    int argmax_player = 0;
    // Components of the maximizing player's estimate. The pathwise term of
    // delta groups state and costate inside one sup; the first two fields
    // report their individual E[sup_t ...] as diagnostics.
    double state_component = 0.0;
    double costate_component = 0.0;
    double aggregate_component = 0.0;  // sup_t E[...], already part of delta
    Eigen::VectorXd per_player;
    Eigen::VectorXd per_player_se;
};

// Couples the N-player closed loop under `nash` with the continuum-policy
// states at the game's indices (shared noise, shared initial draws) and
// estimates delta as in the file comment. The feedback law must live on the
// game's grid; the game and `sol` must describe the same model; a game
// sampled under a nonzero seed must match cfg.seed (one seed reproduces the
// whole experiment). Violations throw config_error.
[[nodiscard]] DeltaEstimate estimate_delta(const FiniteGame& game, const NashFeedback& nash,
                                           const EquilibriumSolution& sol,
                                           const SimConfig& cfg = {});

// Empirical variance of the weighted empirical aggregate
// (1/N) sum_k w(x, x_k) X^{x_k}_t at a fixed probe (x, t), per player count.
struct EllnReport {
    std::vector<int> n_values;
    std::vector<double> variance;
    // Least-squares slope of log variance vs log N; NaN when any variance
    // vanishes (degenerate kernel row) or fewer than two sizes were given.
    double slope = 0.0;
    double probe_index = 0.0;
    double probe_time = 0.0;
};

// Samples indices from the seeded stream (the same stream sample_game
// consumes, so games and this check share their index prefix), simulates the
// continuum-policy states, and measures how the aggregate's variance decays
// with N. probe_time = -1 means the horizon; the probe must land on a
// simulation node.
[[nodiscard]] EllnReport elln_check(const EquilibriumSolution& sol, const Graphon& kernel,
                                    const SimConfig& cfg, const std::vector<int>& n_values,
                                    double probe_index = 0.5, double probe_time = -1.0);

struct EpsNashReport {
    Eigen::VectorXd per_player;  // cost under the profile minus best response
    double max_gap = 0.0;
};

// How much any single player can gain by deviating from the continuum
// policy inside the sampled N-player game. Both sides are computed by exact
// ODE routes (closed-loop cost evaluation vs best response), so the gaps
// carry no Monte Carlo error and are nonnegative up to solver tolerance.
[[nodiscard]] EpsNashReport eps_nash_gap(const FiniteGame& game, const EquilibriumSolution& sol);

struct ConvergenceRecord {
    int n_players = 0;
    double delta_hat = 0.0;
    double delta_se = 0.0;
    double eps_gap = 0.0;
    double elln_var = 0.0;
    // delta_hat * N / log log N, the boundedness statistic of the expected
    // convergence rate; NaN for N < 3 where log log N is not positive.
    double ratio_loglog = 0.0;
};

struct ConvergenceReport {
    std::vector<ConvergenceRecord> records;
    // Least-squares slope of log delta_hat vs log N.
    double slope = 0.0;
    // False when the gaps sit at the noise floor (e.g. decoupled models) and
    // the regression would be meaningless.
    bool regression_valid = false;
};

// Full empirical convergence study over increasing player counts: per N,
// sample a game extending one seeded index stream, solve the N-player Nash
// system, and record delta, the deviation gap, and the aggregate-variance
// probe. The equilibrium is solved once, on a grid aligned with cfg.dt_sim
// (0 = horizon / 500, matching the sampled games' default).
[[nodiscard]] ConvergenceReport convergence_sweep(const Graphon& kernel,
                                                  const GameCoefficients& coeffs,
                                                  const std::vector<int>& n_values,
                                                  const SimConfig& cfg = {},
                                                  const SolveNashOptions& nash_options = {},
                                                  SolverOptions equilibrium_options = {});

// Population occupation measure over time: at each node, the empirical
// distribution of all (player, path) states over `bins` equal-width bins
// spanning the ensemble's range. Rows sum to one.
struct OccupationHistogram {
    std::vector<double> times;
    std::vector<double> edges;  // bins + 1 monotone edges
    Eigen::MatrixXd mass;       // times x bins
};

[[nodiscard]] OccupationHistogram occupation_histogram(const PathEnsemble& ensemble, int bins);

}  // namespace glq
