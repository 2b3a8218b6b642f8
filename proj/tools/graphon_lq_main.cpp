// ---------------------------------------------------------------------------
// graphon_lq_main.cpp
//
// Command-line driver for the solver suite. Subcommands:
//
//   check     validate a model: literal sign conditions, constructive eta
//             well-posedness, per-mode classification. JSON report on stdout.
//   solve     solve the continuum equilibrium and export surface/mode CSVs.
//   simulate  simulate continuum-policy state ensembles (per-index moments,
//             optional occupation histograms and raw trajectories).
//   nplayer   solve the exact N-player Nash system at each configured player
//             count and tabulate per-player equilibrium-quality gaps.
//   converge  convergence study over increasing N: coupling gap, deviation
//             gap, aggregate-variance probe, log-log slope.
//   oracle    independent fixed-point recomputation of the aggregate surface
//             and its discrepancy against the spectral route.
//
// Exit codes: 0 success, 1 config/usage errors, 2 model rejections
// (assumption violations), 3 numerical failures (blow-ups, ill-posed modes).
//
// Every run reads one JSON config. Commands that write data create the run
// directory and place a byte-identical snapshot of the config next to the
// CSVs; rerunning a config with the same seed reproduces every data file
// byte for byte (numbers are printed at 17 significant digits, and no
// timestamps or environment details are ever written).
// ---------------------------------------------------------------------------
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "graphon_lq/config.hpp"
#include "graphon_lq/csv.hpp"
#include "graphon_lq/errors.hpp"
#include "graphon_lq/finite_game.hpp"
#include "graphon_lq/game_model.hpp"
#include "graphon_lq/graphon.hpp"
#include "graphon_lq/monte_carlo.hpp"
#include "graphon_lq/riccati.hpp"
#include "graphon_lq/spectral_equilibrium.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Shorthand: deterministic 17-significant-digit number for stdout summaries,
// matching the CSV format exactly.
std::string num(double value) { return glq::csv_number(value); }

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw glq::config_error("cannot read config file " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

// Creates the run directory and snapshots the config bytes into it, so a run
// directory is self-describing and reproducible from its own contents.
fs::path open_run_dir(const glq::RunConfig& cfg, const std::string& config_path) {
    const fs::path dir(cfg.output.directory);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec)
        throw glq::config_error("cannot create output directory " + dir.string() + ": " +
                                ec.message());
    const std::string bytes = slurp(config_path);
    const fs::path snapshot = dir / "config.json";
    std::ofstream out(snapshot, std::ios::binary);
    if (!out || !(out << bytes) || !out.flush())
        throw glq::config_error("cannot write config snapshot " + snapshot.string());
    return dir;
}

// Step-node indices 0, stride, 2*stride, ..., with the final node always kept.
std::vector<int> thinned_steps(int intervals, int stride) {
    std::vector<int> steps;
    for (int s = 0; s <= intervals; s += stride) steps.push_back(s);
    if (steps.back() != intervals) steps.push_back(intervals);
    return steps;
}

json finite_or_null(double value) {
    return std::isfinite(value) ? json(value) : json();
}

// ------------------------------------------------------------------ check --

int cmd_check(const glq::RunConfig& cfg) {
    json report;
    try {
        const glq::GammaMatrices gm =
            glq::assemble_gamma(cfg.coefficients, cfg.solver.aggregate_costate_literal);
        const glq::ValidationReport rep =
            glq::check_assumptions(cfg.coefficients, gm, 2000, cfg.solver.blowup_cap);

        json literal = json::array();
        json warnings = json::array();
        for (const auto& check : rep.literal_checks) {
            literal.push_back({{"name", check.name},
                               {"satisfied", check.satisfied},
                               {"value", finite_or_null(check.value)},
                               {"detail", check.detail}});
            if (!check.satisfied)
                warnings.push_back("literal condition not satisfied: " + check.name + " (" +
                                   check.detail + ")");
        }
        report["literal_checks"] = literal;
        report["literal_ok"] = rep.literal_ok;
        report["numerically_well_posed"] = rep.numerically_well_posed;
        report["eta_escape_time"] = finite_or_null(rep.eta_escape_time);
        report["sufficient_condition_met"] = rep.sufficient_condition_met;
        report["warnings"] = warnings;
        report["graphon_family"] = cfg.kernel_family;

        bool modes_ok = true;
        if (rep.ok()) {
            const double horizon = cfg.coefficients.horizon;
            const double dt = cfg.solver.dt > 0.0 ? cfg.solver.dt : horizon / 2000.0;
            const glq::RiccatiSolution eta =
                glq::solve_eta(gm, horizon, dt, cfg.solver.blowup_cap);
            const glq::SpectralGraphon sg =
                cfg.kernel.decompose(cfg.solver.k_modes, cfg.solver.grid_size);
            json modes = json::array();
            for (int k = 0; k < sg.mode_count(); ++k) {
                const glq::ModeReport mr =
                    glq::check_mode_wellposedness(gm, eta, sg.eigenvalue(k));
                modes_ok = modes_ok && mr.well_posed;
                modes.push_back({{"mode", k},
                                 {"lambda", mr.lambda},
                                 {"branch", glq::to_string(mr.branch)},
                                 {"discriminant", mr.d},
                                 {"well_posed", mr.well_posed},
                                 {"has_root", mr.has_root},
                                 {"root_time", finite_or_null(mr.root_time)}});
            }
            report["modes"] = modes;
            report["truncation_residual"] = sg.truncation_residual();
        } else {
            report["modes"] = json::array();
        }

        const bool well_posed = rep.ok() && modes_ok;
        report["well_posed"] = well_posed;
        std::cout << report.dump(2) << "\n";
        return well_posed ? 0 : 2;
    } catch (const glq::model_error& err) {
        report["well_posed"] = false;
        report["error"] = err.what();
        std::cout << report.dump(2) << "\n";
        return 2;
    } catch (const glq::numerical_error& err) {
        report["well_posed"] = false;
        report["error"] = err.what();
        std::cout << report.dump(2) << "\n";
        return 2;
    }
}

// ------------------------------------------------------------------ solve --

void write_eta_csv(const fs::path& dir, const glq::EquilibriumSolution& sol) {
    std::vector<std::vector<double>> rows;
    rows.reserve(static_cast<std::size_t>(sol.grid.intervals()) + 1);
    for (int i = 0; i <= sol.grid.intervals(); ++i) {
        const double t = sol.grid.time_at(glq::TimeGrid::node(i));
        rows.push_back({t, sol.eta.eta.at_node(i), sol.variance.at_node(i)});
    }
    glq::write_csv((dir / "eta.csv").string(), {"t", "eta", "variance"}, rows);
}

void write_surfaces_csv(const fs::path& dir, const glq::EquilibriumSolution& sol, int stride) {
    const std::vector<int> steps = thinned_steps(sol.grid.intervals(), stride);
    std::vector<std::vector<double>> rows;
    rows.reserve(sol.nodes.size() * steps.size());
    for (std::size_t i = 0; i < sol.nodes.size(); ++i) {
        const auto row = static_cast<Eigen::Index>(i);
        for (const int s : steps) {
            const int dense = glq::TimeGrid::node(s);
            rows.push_back({sol.nodes[i], sol.grid.time_at(dense), sol.zhat(row, dense),
                            sol.zeta(row, dense), sol.mean(row, dense)});
        }
    }
    glq::write_csv((dir / "surfaces.csv").string(), {"x", "t", "zhat", "zeta", "mean"}, rows);
}

void write_modes_csv(const fs::path& dir, const glq::EquilibriumSolution& sol, int stride) {
    const std::vector<int> steps = thinned_steps(sol.grid.intervals(), stride);
    std::vector<std::vector<double>> rows;
    rows.reserve(sol.modes.size() * steps.size());
    for (const auto& mode : sol.modes) {
        for (const int s : steps) {
            rows.push_back({static_cast<double>(mode.mode_index), mode.lambda,
                            sol.grid.time_at(glq::TimeGrid::node(s)), mode.pi.at_node(s),
                            mode.z.at_node(s), mode.v.at_node(s)});
        }
    }
    glq::write_csv((dir / "modes.csv").string(), {"mode", "lambda", "t", "pi", "z", "v"}, rows);
}

// Sup gap between the spectral aggregate and an independently computed
// fixed-point aggregate, compared on the oracle's dense samples (which land
// exactly on stored spectral samples by construction).
struct OracleComparison {
    glq::FixedPointResult result;
    int dense_stride = 1;  // spectral dense samples per oracle dense sample
    double discrepancy = 0.0;
};

OracleComparison run_oracle(const glq::RunConfig& cfg, const glq::EquilibriumSolution& sol) {
    const glq::GammaMatrices gm =
        glq::assemble_gamma(cfg.coefficients, cfg.solver.aggregate_costate_literal);
    const glq::SpectralGraphon sg = cfg.kernel.decompose(cfg.solver.k_modes, cfg.solver.grid_size);
    const double dt = sol.grid.dt();
    // Twice the solver step keeps the two routes' grids aligned while making
    // the oracle genuinely independent of the spectral discretization; an odd
    // interval count falls back to the same step.
    const bool halves = sol.grid.intervals() % 2 == 0;
    const double oracle_dt = halves ? 2.0 * dt : dt;
    OracleComparison cmp{
        glq::fixed_point_oracle(gm, sol.eta, sg, cfg.coefficients.initial_mean, oracle_dt),
        halves ? 2 : 1, 0.0};
    for (Eigen::Index i = 0; i < cmp.result.zhat.rows(); ++i) {
        for (int j = 0; j < cmp.result.grid.samples(); ++j) {
            const double gap = std::abs(sol.zhat(i, cmp.dense_stride * j) - cmp.result.zhat(i, j));
            cmp.discrepancy = std::max(cmp.discrepancy, gap);
        }
    }
    return cmp;
}

int cmd_solve(const glq::RunConfig& cfg, const std::string& config_path, bool with_oracle) {
    const glq::EquilibriumSolution sol =
        glq::solve_equilibrium(cfg.coefficients, cfg.kernel, cfg.solver);
    const fs::path dir = open_run_dir(cfg, config_path);

    write_eta_csv(dir, sol);
    if (cfg.output.surfaces) write_surfaces_csv(dir, sol, cfg.output.surface_stride);
    if (cfg.output.modes) write_modes_csv(dir, sol, cfg.output.surface_stride);

    double truncation = 0.0;
    if (!sol.modes.empty()) {
        const glq::SpectralGraphon sg =
            cfg.kernel.decompose(cfg.solver.k_modes, cfg.solver.grid_size);
        truncation = sg.truncation_residual();
    }
    std::cout << "modes=" << sol.modes.size() << " truncation_residual=" << num(truncation)
              << "\n";
    std::cout << "mode_ansatz_residual=" << num(sol.mode_ansatz_residual)
              << " zeta_modal_residual=" << num(sol.zeta_modal_residual)
              << " operator_consistency_residual=" << num(sol.operator_consistency_residual)
              << "\n";
    if (with_oracle) {
        const OracleComparison cmp = run_oracle(cfg, sol);
        std::cout << "oracle_discrepancy=" << num(cmp.discrepancy)
                  << " oracle_iterations=" << cmp.result.iterations << "\n";
    }
    std::cout << "wrote " << (dir / "eta.csv").string() << "\n";
    if (cfg.output.surfaces) std::cout << "wrote " << (dir / "surfaces.csv").string() << "\n";
    if (cfg.output.modes) std::cout << "wrote " << (dir / "modes.csv").string() << "\n";
    return 0;
}

// --------------------------------------------------------------- simulate --

int cmd_simulate(const glq::RunConfig& cfg, const std::string& config_path) {
    const glq::EquilibriumSolution sol =
        glq::solve_equilibrium(cfg.coefficients, cfg.kernel, cfg.solver);
    const fs::path dir = open_run_dir(cfg, config_path);

    const glq::GraphonSimStats stats =
        glq::simulate_graphon_policy(sol, cfg.indices, cfg.simulation);
    {
        std::vector<std::vector<double>> rows;
        rows.reserve(cfg.indices.size() * static_cast<std::size_t>(stats.mean.cols()));
        for (std::size_t k = 0; k < stats.indices.size(); ++k) {
            for (Eigen::Index s = 0; s < stats.mean.cols(); ++s) {
                const double t = static_cast<double>(s) * stats.grid.dt();
                rows.push_back({stats.indices[k], t, stats.mean(static_cast<Eigen::Index>(k), s),
                                stats.variance(static_cast<Eigen::Index>(k), s)});
            }
        }
        glq::write_csv((dir / "sim_stats.csv").string(), {"index", "t", "mean", "variance"}, rows);
    }
    std::cout << "paths=" << stats.n_paths << " steps=" << stats.grid.intervals()
              << " indices=" << stats.indices.size() << "\n";
    std::cout << "wrote " << (dir / "sim_stats.csv").string() << "\n";

    if (cfg.output.histograms || cfg.output.trajectories) {
        const glq::PathEnsemble ens =
            glq::simulate_graphon_paths(sol, cfg.indices, cfg.simulation);
        if (cfg.output.histograms) {
            const glq::OccupationHistogram hist =
                glq::occupation_histogram(ens, cfg.output.histogram_bins);
            std::vector<std::vector<double>> rows;
            rows.reserve(hist.times.size() * static_cast<std::size_t>(hist.mass.cols()));
            for (std::size_t ti = 0; ti < hist.times.size(); ++ti) {
                for (Eigen::Index b = 0; b < hist.mass.cols(); ++b) {
                    rows.push_back({hist.times[ti], hist.edges[static_cast<std::size_t>(b)],
                                    hist.edges[static_cast<std::size_t>(b) + 1],
                                    hist.mass(static_cast<Eigen::Index>(ti), b)});
                }
            }
            glq::write_csv((dir / "histograms.csv").string(), {"t", "bin_lo", "bin_hi", "mass"},
                           rows);
            std::cout << "wrote " << (dir / "histograms.csv").string() << "\n";
        }
        if (cfg.output.trajectories) {
            const int kept = std::min(cfg.output.trajectory_paths, ens.n_paths);
            std::vector<std::vector<double>> rows;
            rows.reserve(ens.states.size() * ens.indices.size() * static_cast<std::size_t>(kept));
            for (std::size_t s = 0; s < ens.states.size(); ++s) {
                const double t = static_cast<double>(s) * ens.grid.dt();
                for (std::size_t k = 0; k < ens.indices.size(); ++k) {
                    for (int p = 0; p < kept; ++p) {
                        rows.push_back({t, ens.indices[k], static_cast<double>(p),
                                        ens.states[s](static_cast<Eigen::Index>(k), p)});
                    }
                }
            }
            glq::write_csv((dir / "trajectories.csv").string(), {"t", "index", "path", "state"},
                           rows);
            std::cout << "wrote " << (dir / "trajectories.csv").string() << "\n";
        }
    }
    return 0;
}

// ---------------------------------------------------------------- nplayer --

int cmd_nplayer(const glq::RunConfig& cfg, const std::string& config_path) {
    if (cfg.n_list.empty())
        throw glq::config_error("simulation.N_list is required for the nplayer command");
    const glq::EquilibriumSolution sol =
        glq::solve_equilibrium(cfg.coefficients, cfg.kernel, cfg.solver);
    const fs::path dir = open_run_dir(cfg, config_path);

    std::vector<std::vector<double>> rows;
    for (const int n : cfg.n_list) {
        const glq::FiniteGame game = glq::sample_game(cfg.kernel, cfg.coefficients, n,
                                                      cfg.simulation.seed, cfg.simulation.dt_sim);
        const glq::NashFeedback nash = glq::solve_nash(game, cfg.nash);
        const glq::AffineProfile nash_profile = nash.profile();
        const Eigen::VectorXd nash_costs = glq::cost_evaluate(game, nash_profile);
        const glq::EpsNashReport eps = glq::eps_nash_gap(game, sol);
        const glq::AffineProfile policy = glq::graphon_profile(game, sol);
        const Eigen::VectorXd policy_costs = glq::cost_evaluate(game, policy);

        double max_nash_gap = 0.0;
        for (int k = 0; k < n; ++k) {
            const glq::BestResponse br =
                glq::best_response_value(game, nash_profile, k, cfg.nash.blowup_cap);
            const double nash_gap = nash_costs(k) - br.value;
            max_nash_gap = std::max(max_nash_gap, std::abs(nash_gap));
            rows.push_back({static_cast<double>(n), static_cast<double>(k), game.indices[k],
                            nash_costs(k), nash_gap, policy_costs(k), eps.per_player(k)});
        }
        std::cout << "N=" << n << " drift_residual=" << num(nash.drift_residual)
                  << " terminal_residual=" << num(nash.terminal_residual)
                  << " max_nash_gap=" << num(max_nash_gap)
                  << " max_policy_gap=" << num(eps.max_gap) << "\n";
    }
    glq::write_csv((dir / "nplayer.csv").string(),
                   {"n_players", "player", "index", "nash_cost", "nash_br_gap", "policy_cost",
                    "policy_gap"},
                   rows);
    std::cout << "wrote " << (dir / "nplayer.csv").string() << "\n";
    return 0;
}

// ---------------------------------------------------------------- converge --

int cmd_converge(const glq::RunConfig& cfg, const std::string& config_path) {
    if (cfg.n_list.empty())
        throw glq::config_error("simulation.N_list is required for the converge command");
    const fs::path dir = open_run_dir(cfg, config_path);

    const glq::ConvergenceReport report = glq::convergence_sweep(
        cfg.kernel, cfg.coefficients, cfg.n_list, cfg.simulation, cfg.nash, cfg.solver);

    std::vector<std::vector<double>> rows;
    rows.reserve(report.records.size());
    for (const auto& rec : report.records) {
        rows.push_back({static_cast<double>(rec.n_players), rec.delta_hat, rec.delta_se,
                        rec.eps_gap, rec.elln_var, rec.ratio_loglog});
        std::cout << "N=" << rec.n_players << " delta_hat=" << num(rec.delta_hat)
                  << " delta_se=" << num(rec.delta_se) << " eps_gap=" << num(rec.eps_gap)
                  << " elln_var=" << num(rec.elln_var)
                  << " ratio_loglog=" << num(rec.ratio_loglog) << "\n";
    }
    glq::write_csv((dir / "convergence.csv").string(),
                   {"n_players", "delta_hat", "delta_se", "eps_gap", "elln_var", "ratio_loglog"},
                   rows);

    json summary;
    summary["slope"] = finite_or_null(report.slope);
    summary["regression_valid"] = report.regression_valid;
    std::cout << summary.dump() << "\n";
    std::cout << "wrote " << (dir / "convergence.csv").string() << "\n";
    return 0;
}

// ------------------------------------------------------------------ oracle --

int cmd_oracle(const glq::RunConfig& cfg, const std::string& config_path) {
    const glq::EquilibriumSolution sol =
        glq::solve_equilibrium(cfg.coefficients, cfg.kernel, cfg.solver);
    const fs::path dir = open_run_dir(cfg, config_path);

    const OracleComparison cmp = run_oracle(cfg, sol);
    const glq::FixedPointResult& orc = cmp.result;

    const std::vector<int> steps = thinned_steps(orc.grid.intervals(), cfg.output.surface_stride);
    std::vector<std::vector<double>> rows;
    rows.reserve(orc.nodes.size() * steps.size());
    for (std::size_t i = 0; i < orc.nodes.size(); ++i) {
        const auto row = static_cast<Eigen::Index>(i);
        for (const int s : steps) {
            const int oracle_dense = glq::TimeGrid::node(s);
            const int spectral_dense = cmp.dense_stride * oracle_dense;
            rows.push_back({orc.nodes[i], orc.grid.time_at(oracle_dense),
                            sol.zhat(row, spectral_dense), orc.zhat(row, oracle_dense)});
        }
    }
    glq::write_csv((dir / "oracle.csv").string(), {"x", "t", "zhat_spectral", "zhat_oracle"},
                   rows);

    const double final_residual =
        orc.residual_history.empty() ? 0.0 : orc.residual_history.back();
    std::cout << "oracle_discrepancy=" << num(cmp.discrepancy)
              << " oracle_iterations=" << orc.iterations
              << " final_residual=" << num(final_residual) << "\n";
    std::cout << "wrote " << (dir / "oracle.csv").string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Linear-quadratic graphon game solver suite"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_override;
    int threads = 0;
    std::int64_t seed_override = -1;
    bool with_oracle = false;

    const auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON run configuration")->required();
        sub->add_option("--out", out_override, "output directory (overrides the config)");
        sub->add_option("--threads", threads, "worker threads")
            ->envname("GRAPHON_LQ_THREADS")
            ->check(CLI::PositiveNumber);
        sub->add_option("--seed", seed_override, "simulation seed (overrides the config)")
            ->check(CLI::NonNegativeNumber);
    };

    CLI::App* c_check = app.add_subcommand("check", "validate model well-posedness");
    CLI::App* c_solve = app.add_subcommand("solve", "solve the continuum equilibrium");
    CLI::App* c_simulate = app.add_subcommand("simulate", "simulate policy ensembles");
    CLI::App* c_nplayer = app.add_subcommand("nplayer", "solve exact N-player Nash systems");
    CLI::App* c_converge = app.add_subcommand("converge", "run the N-convergence study");
    CLI::App* c_oracle = app.add_subcommand("oracle", "independent aggregate recomputation");
    for (CLI::App* sub : {c_check, c_solve, c_simulate, c_nplayer, c_converge, c_oracle})
        add_common(sub);
    c_solve->add_flag("--oracle", with_oracle,
                      "also run the fixed-point oracle and report the discrepancy");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        const int code = app.exit(err);
        return code == 0 ? 0 : 1;
    }

    try {
        glq::RunConfig cfg = glq::load_config(config_path);
        if (!out_override.empty()) cfg.output.directory = out_override;
        if (threads > 0) {
            cfg.solver.threads = threads;
            cfg.simulation.threads = threads;
        }
        if (seed_override >= 0) cfg.simulation.seed = static_cast<std::uint64_t>(seed_override);

        if (c_check->parsed()) return cmd_check(cfg);
        if (c_solve->parsed()) return cmd_solve(cfg, config_path, with_oracle);
        if (c_simulate->parsed()) return cmd_simulate(cfg, config_path);
        if (c_nplayer->parsed()) return cmd_nplayer(cfg, config_path);
        if (c_converge->parsed()) return cmd_converge(cfg, config_path);
        return cmd_oracle(cfg, config_path);
    } catch (const glq::config_error& err) {
        std::cerr << "config error: " << err.what() << "\n";
        return 1;
    } catch (const glq::model_error& err) {
        std::cerr << "model error: " << err.what() << "\n";
        return 2;
    } catch (const glq::numerical_error& err) {
        std::cerr << "numerical error: " << err.what();
        if (err.has_time()) std::cerr << " at t=" << num(err.time());
        std::cerr << "\n";
        return 3;
    } catch (const std::invalid_argument& err) {
        std::cerr << "config error: " << err.what() << "\n";
        return 1;
    } catch (const std::domain_error& err) {
        std::cerr << "config error: " << err.what() << "\n";
        return 1;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 3;
    }
}
