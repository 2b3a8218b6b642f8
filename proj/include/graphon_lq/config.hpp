// ---------------------------------------------------------------------------
// config.hpp
//
// JSON run configuration for the command-line tool. One config describes one
// reproducible run: the kernel, the model coefficients, solver and
// simulation settings, and which CSVs to write. Parsing is strict — every
// key must be known and well-typed, and syntax errors are reported with
// line:column — so a config that loads is a config the run understands.
// Domain validation beyond shape (symmetry, positivity, well-posedness)
// stays with the solvers, which classify those failures as model or
// numerical errors rather than config errors.
//
// Schema (defaults in parentheses; see the README for the full reference):
//   graphon:      family ("constant"|"power_law"|"min_max"|"grid"),
//                 weight (1.0), exponent (-0.4), cells (grid family),
//                 K_modes (40), grid_size (200)
//   coefficients: a, b, c, C_f (3x3), C_h (2x2), T  — all required —
//                 m0 (0), v0 (0)
//   solver:       dt (0 = T/2000), M_x (alias of graphon.grid_size),
//                 blowup_cap (1e8), max_truncation_residual (1e-3),
//                 gamma_z2_literal (false)
//   simulation:   n_paths (1000), dt_sim (0 = source grid step), seed (0),
//                 N_list ([]), indices ([0.1,0.3,0.5,0.7,0.9]),
//                 path_chunk (512), max_players (64)
//   output:       directory ("out"), surfaces (true), modes (true),
//                 surface_stride (10), trajectories (false),
//                 trajectory_paths (16), histograms (false),
//                 histogram_bins (40)
// ---------------------------------------------------------------------------
#pragma once

#include <string>
#include <vector>

#include "graphon_lq/finite_game.hpp"
#include "graphon_lq/game_model.hpp"
#include "graphon_lq/graphon.hpp"
#include "graphon_lq/monte_carlo.hpp"
#include "graphon_lq/spectral_equilibrium.hpp"

namespace glq {

// Which files a run writes. All output is deterministic (no timestamps,
// 17-significant-digit floats), so rerunning a config reproduces the bytes.
struct OutputConfig {
    std::string directory = "out";
    bool surfaces = true;       // equilibrium surfaces, long format
    bool modes = true;          // per-mode trajectories
    int surface_stride = 10;    // time thinning (in grid nodes) for tables
    bool trajectories = false;  // raw simulated paths
    int trajectory_paths = 16;  // cap on exported paths
    bool histograms = false;    // occupation histograms of the ensemble
    int histogram_bins = 40;
};

// One validated run description, with library option structs already filled.
struct RunConfig {
    std::string kernel_family;
    Graphon kernel = Graphon::constant(1.0);
    GameCoefficients coefficients;
    SolverOptions solver;
    SimConfig simulation;
    SolveNashOptions nash;
    std::vector<int> n_list;                            // player counts
    std::vector<double> indices{0.1, 0.3, 0.5, 0.7, 0.9};  // simulation indices
    OutputConfig output;
};

// Parses and validates config text; `name` labels the source in messages.
// Throws config_error for syntax errors (with line:column), unknown keys,
// wrong types, and malformed shapes.
[[nodiscard]] RunConfig parse_config(const std::string& text, const std::string& name);

// Reads the file and delegates to parse_config. Throws config_error when
// the file cannot be read.
[[nodiscard]] RunConfig load_config(const std::string& path);

}  // namespace glq
