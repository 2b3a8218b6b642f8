#include "graphon_lq/monte_carlo.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "graphon_lq/errors.hpp"
#include "graphon_lq/game_model.hpp"
#include "graphon_lq/parallel.hpp"
#include "graphon_lq/rng.hpp"

namespace glq {
namespace {

constexpr double kAlignTol = 1e-9;
// Stored-ensemble cap, in doubles (~2 GB).
constexpr std::int64_t kMaxStoredDoubles = 250'000'000;

// Euler step count: horizon / dt_sim must be a whole number of steps.
int step_count(double dt_sim, double horizon) {
    if (!(dt_sim > 0.0)) throw config_error("simulation step must be positive");
    const double ratio = horizon / dt_sim;
    const auto n = std::llround(ratio);
    if (n < 1 || std::abs(ratio - static_cast<double>(n)) > kAlignTol * std::max(1.0, ratio))
        throw config_error("simulation step must divide the horizon evenly");
    return static_cast<int>(n);
}

// Stride of the simulation step over a source grid's dense (half-step)
// samples; refuses steps that would need interpolation inside the loop.
int dense_stride(double dt_sim, const TimeGrid& grid, const std::string& source) {
    const double ratio = dt_sim / (0.5 * grid.dt());
    const auto r = std::llround(ratio);
    if (r < 1 || std::abs(ratio - static_cast<double>(r)) > kAlignTol * std::max(1.0, ratio))
        throw config_error("simulation step must be an integer multiple of half the " + source +
                           " step, so every coefficient lookup lands on a stored sample");
    return static_cast<int>(r);
}

bool same_model(const GameCoefficients& a, const GameCoefficients& b) {
    return a.a == b.a && a.b == b.b && a.c == b.c && a.horizon == b.horizon &&
           a.initial_mean == b.initial_mean && a.initial_variance == b.initial_variance &&
           (a.running_cost - b.running_cost).cwiseAbs().maxCoeff() == 0.0 &&
           (a.terminal_cost - b.terminal_cost).cwiseAbs().maxCoeff() == 0.0;
}

void validate_indices(const std::vector<double>& indices) {
    if (indices.empty()) throw std::invalid_argument("simulation needs at least one index");
    for (const double x : indices)
        if (!(x >= 0.0 && x <= 1.0))
            throw std::invalid_argument("graphon indices must lie in [0,1]");
}

// Least-squares slope of log y against log x (all inputs positive).
double fit_log_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
    const auto n = static_cast<double>(xs.size());
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double lx = std::log(xs[i]);
        const double ly = std::log(ys[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

// --- counter-addressed draws ----------------------------------------------
//
// out(k, j) = the (player k, global path path_base + j, step) normal draw.
// Adjacent even/odd global paths consume the two outputs of one generator
// call; the value depends only on the global path index, never on chunking.

void fill_pair_normals(const CounterRng& rng, std::uint32_t step, int path_base,
                       Eigen::Ref<Eigen::MatrixXd> out) {
    const auto players = static_cast<int>(out.rows());
    const auto cols = static_cast<int>(out.cols());
    for (int k = 0; k < players; ++k) {
        const auto pk = static_cast<std::uint32_t>(k);
        int j = 0;
        while (j < cols) {
            const auto g = static_cast<std::uint32_t>(path_base + j);
            const auto pair = rng.normal2(pk, g >> 1, step);
            if ((g & 1u) == 0u && j + 1 < cols) {
                out(k, j) = pair[0];
                out(k, j + 1) = pair[1];
                j += 2;
            } else {
                out(k, j) = pair[g & 1u];
                ++j;
            }
        }
    }
}

void fill_initial_states(const GameCoefficients& coeffs, std::uint64_t seed, int path_base,
                         Eigen::Ref<Eigen::MatrixXd> x) {
    if (coeffs.initial_variance > 0.0) {
        const CounterRng init(seed, rng_role::initial_state);
        fill_pair_normals(init, 0, path_base, x);
        x.array() = x.array() * std::sqrt(coeffs.initial_variance) + coeffs.initial_mean;
    } else {
        x.setConstant(coeffs.initial_mean);
    }
}

// --- continuum-policy coefficient tables ------------------------------------
//
// Everything the per-path loop needs, tabulated once per simulation node by
// exact dense-sample lookups (the stride checks above guarantee node i of
// the simulation is dense sample i * stride of the source grid).

struct ContinuumTables {
    double dt = 0.0;
    int steps = 0;
    Eigen::VectorXd eta;     // steps + 1
    Eigen::VectorXd gain;    // equilibrium feedback gain, index-independent
    Eigen::MatrixXd offset;  // players x (steps + 1) feedback offset
    Eigen::MatrixXd zhat;    // players x (steps + 1) deterministic aggregate
    Eigen::MatrixXd zeta;    // players x (steps + 1) costate offset

    [[nodiscard]] int players() const { return static_cast<int>(zhat.rows()); }
};

ContinuumTables make_tables(const EquilibriumSolution& sol, const std::vector<double>& indices,
                            double dt_sim, int steps) {
    const int stride = dense_stride(dt_sim, sol.grid, "equilibrium solver");
    if (steps * stride != 2 * sol.grid.intervals())
        throw config_error("simulation horizon does not match the equilibrium grid");
    const auto players = static_cast<int>(indices.size());
    ContinuumTables tab;
    tab.dt = dt_sim;
    tab.steps = steps;
    tab.eta.resize(steps + 1);
    tab.gain.resize(steps + 1);
    tab.offset.resize(players, steps + 1);
    tab.zhat.resize(players, steps + 1);
    tab.zeta.resize(players, steps + 1);
    for (int i = 0; i <= steps; ++i) {
        const double t = sol.grid.time_at(i * stride);
        tab.eta(i) = sol.eta.eta.at_dense(i * stride);
        tab.gain(i) = feedback_state_gain(sol.coefficients, tab.eta(i));
        for (int k = 0; k < players; ++k) {
            tab.zhat(k, i) = sol.zhat_at(indices[static_cast<std::size_t>(k)], t);
            tab.zeta(k, i) = sol.zeta_at(indices[static_cast<std::size_t>(k)], t);
            tab.offset(k, i) = feedback_offset(sol.coefficients, tab.zhat(k, i), tab.zeta(k, i));
        }
    }
    return tab;
}

// One Euler drift update of continuum-policy states (noise added separately,
// so the coupled and standalone simulators share identical arithmetic).
void continuum_step(const ContinuumTables& tab, const GameCoefficients& coeffs, int i,
                    Eigen::MatrixXd& x) {
    const double growth = 1.0 + tab.dt * (coeffs.a + coeffs.b * tab.gain(i));
    const Eigen::VectorXd shift =
        tab.dt * (coeffs.b * tab.offset.col(i) + coeffs.c * tab.zhat.col(i));
    x *= growth;
    x.colwise() += shift;
}

struct ChunkRange {
    int base = 0;
    int cols = 0;
};

std::vector<ChunkRange> path_chunks(int n_paths, int chunk) {
    if (chunk < 1) throw config_error("path_chunk must be positive");
    std::vector<ChunkRange> ranges;
    for (int base = 0; base < n_paths; base += chunk)
        ranges.push_back({base, std::min(chunk, n_paths - base)});
    return ranges;
}

// Simulates one chunk of continuum-policy paths up to `last_node`, invoking
// visit(node, states) at node 0 and after every step.
template <class Visit>
void run_continuum_chunk(const ContinuumTables& tab, const GameCoefficients& coeffs,
                         const SimConfig& cfg, int path_base, int cols, int last_node,
                         Visit&& visit) {
    const CounterRng noise(cfg.seed, rng_role::state_noise);
    Eigen::MatrixXd x(tab.players(), cols);
    Eigen::MatrixXd dw(tab.players(), cols);
    fill_initial_states(coeffs, cfg.seed, path_base, x);
    const double scale = cfg.noise_scale * std::sqrt(tab.dt);
    visit(0, x);
    for (int i = 0; i < last_node; ++i) {
        continuum_step(tab, coeffs, i, x);
        if (cfg.noise_scale != 0.0) {
            fill_pair_normals(noise, static_cast<std::uint32_t>(i), path_base, dw);
            x += scale * dw;
        }
        visit(i + 1, x);
    }
}

double resolved_dt(const SimConfig& cfg, double fallback) {
    if (cfg.dt_sim < 0.0)
        throw config_error("simulation step must be positive (0 selects the source grid step)");
    return cfg.dt_sim > 0.0 ? cfg.dt_sim : fallback;
}

void require_paths(int n_paths, int minimum) {
    if (n_paths < minimum)
        throw config_error("n_paths = " + std::to_string(n_paths) + " is below the minimum of " +
                           std::to_string(minimum) + " for this statistic");
}

void require_increasing(const std::vector<int>& n_values) {
    if (n_values.empty()) throw config_error("the list of player counts is empty");
    int prev = 0;
    for (const int n : n_values) {
        if (n <= prev) throw config_error("player counts must be strictly increasing and positive");
        prev = n;
    }
}

std::vector<double> sample_index_stream(std::uint64_t seed, int count) {
    const CounterRng sampler(seed, rng_role::index_sampling);
    std::vector<double> indices(static_cast<std::size_t>(count));
    for (int k = 0; k < count; ++k)
        indices[static_cast<std::size_t>(k)] = sampler.uniform(static_cast<std::uint32_t>(k), 0, 0);
    return indices;
}

}  // namespace

GraphonSimStats simulate_graphon_policy(const EquilibriumSolution& sol,
                                        const std::vector<double>& indices, const SimConfig& cfg) {
    validate_indices(indices);
    require_paths(cfg.n_paths, 2);
    const double dt_sim = resolved_dt(cfg, sol.grid.dt());
    const int steps = step_count(dt_sim, sol.coefficients.horizon);
    const ContinuumTables tab = make_tables(sol, indices, dt_sim, steps);
    const int players = tab.players();
    const int nodes = steps + 1;

    const auto chunks = path_chunks(cfg.n_paths, cfg.path_chunk);
    const auto n_chunks = static_cast<int>(chunks.size());
    std::vector<Eigen::MatrixXd> sums(chunks.size());
    std::vector<Eigen::MatrixXd> squares(chunks.size());
    parallel_for(n_chunks, std::max(1, cfg.threads), [&](int c) {
        const auto& range = chunks[static_cast<std::size_t>(c)];
        Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(players, nodes);
        Eigen::MatrixXd sq = Eigen::MatrixXd::Zero(players, nodes);
        run_continuum_chunk(tab, sol.coefficients, cfg, range.base, range.cols, steps,
                            [&](int node, const Eigen::MatrixXd& x) {
                                sum.col(node) += x.rowwise().sum();
                                sq.col(node) += x.rowwise().squaredNorm();
                            });
        sums[static_cast<std::size_t>(c)] = std::move(sum);
        squares[static_cast<std::size_t>(c)] = std::move(sq);
    });

    Eigen::MatrixXd total = Eigen::MatrixXd::Zero(players, nodes);
    Eigen::MatrixXd total_sq = Eigen::MatrixXd::Zero(players, nodes);
    for (std::size_t c = 0; c < chunks.size(); ++c) {
        total += sums[c];
        total_sq += squares[c];
    }
    const auto paths = static_cast<double>(cfg.n_paths);
    GraphonSimStats stats{TimeGrid(sol.coefficients.horizon, steps), indices, cfg.n_paths,
                          total / paths, Eigen::MatrixXd()};
    stats.variance =
        ((total_sq - paths * stats.mean.cwiseProduct(stats.mean)) / (paths - 1.0)).cwiseMax(0.0);
    return stats;
}

PathEnsemble simulate_graphon_paths(const EquilibriumSolution& sol,
                                    const std::vector<double>& indices, const SimConfig& cfg) {
    validate_indices(indices);
    require_paths(cfg.n_paths, 1);
    const double dt_sim = resolved_dt(cfg, sol.grid.dt());
    const int steps = step_count(dt_sim, sol.coefficients.horizon);
    const ContinuumTables tab = make_tables(sol, indices, dt_sim, steps);
    const int players = tab.players();
    const int nodes = steps + 1;
    const std::int64_t doubles = static_cast<std::int64_t>(players) * nodes * cfg.n_paths;
    if (doubles > kMaxStoredDoubles)
        throw config_error(
            "storing this ensemble would need " + std::to_string(doubles) +
            " doubles; thin it (coarser dt_sim, fewer paths) or stream the statistics instead");

    PathEnsemble ensemble{TimeGrid(sol.coefficients.horizon, steps), indices, cfg.n_paths, {}};
    ensemble.states.assign(static_cast<std::size_t>(nodes),
                           Eigen::MatrixXd(players, cfg.n_paths));
    const auto chunks = path_chunks(cfg.n_paths, cfg.path_chunk);
    parallel_for(static_cast<int>(chunks.size()), std::max(1, cfg.threads), [&](int c) {
        const auto& range = chunks[static_cast<std::size_t>(c)];
        run_continuum_chunk(tab, sol.coefficients, cfg, range.base, range.cols, steps,
                            [&](int node, const Eigen::MatrixXd& x) {
                                ensemble.states[static_cast<std::size_t>(node)].middleCols(
                                    range.base, range.cols) = x;
                            });
    });
    return ensemble;
}

AffineProfile graphon_profile(const FiniteGame& game, const EquilibriumSolution& sol) {
    if (!same_model(game.coefficients, sol.coefficients))
        throw config_error("the finite game and the equilibrium solution describe different models");
    const TimeGrid grid = game.grid();
    const double ratio = grid.dt() / sol.grid.dt();
    const auto stride = std::llround(ratio);
    if (stride < 1 || std::abs(ratio - static_cast<double>(stride)) > kAlignTol * std::max(1.0, ratio))
        throw config_error("the game step must be an integer multiple of the equilibrium solver "
                           "step for exact policy lookups");
    const int n = game.player_count();
    const int samples = grid.samples();
    AffineProfile profile{grid, {}, {}};
    profile.gain.reserve(static_cast<std::size_t>(samples));
    profile.offset.reserve(static_cast<std::size_t>(samples));
    for (int d = 0; d < samples; ++d) {
        const double t = grid.time_at(d);
        const double eta_d = sol.eta.eta.at_dense(d * static_cast<int>(stride));
        Eigen::MatrixXd gain = Eigen::MatrixXd::Zero(n, n);
        gain.diagonal().setConstant(feedback_state_gain(game.coefficients, eta_d));
        Eigen::VectorXd offset(n);
        for (int k = 0; k < n; ++k) {
            const double x = game.indices[static_cast<std::size_t>(k)];
            offset(k) = feedback_offset(game.coefficients, sol.zhat_at(x, t), sol.zeta_at(x, t));
        }
        profile.gain.push_back(std::move(gain));
        profile.offset.push_back(std::move(offset));
    }
    return profile;
}

DeltaEstimate estimate_delta(const FiniteGame& game, const NashFeedback& nash,
                             const EquilibriumSolution& sol, const SimConfig& cfg) {
    const int n = game.player_count();
    if (!same_model(game.coefficients, sol.coefficients))
        throw config_error("the finite game and the equilibrium solution describe different models");
    if (!(nash.grid == game.grid()))
        throw config_error("the feedback law lives on a different grid than the game");
    const auto samples = static_cast<std::size_t>(game.grid().samples());
    if (nash.gain.size() != samples || nash.costate_gain.size() != samples ||
        nash.gain.front().rows() != n || nash.costate_gain.front().rows() != n)
        throw config_error("the feedback law shape does not match the game");
    if (game.seed != 0 && cfg.seed != game.seed)
        throw config_error("the game was sampled under seed " + std::to_string(game.seed) +
                           " but the simulation uses seed " + std::to_string(cfg.seed) +
                           "; one seed must reproduce the whole experiment");
    require_paths(cfg.n_paths, 2);

    const double dt_sim = resolved_dt(cfg, game.grid().dt());
    const int steps = step_count(dt_sim, game.coefficients.horizon);
    const int stride = dense_stride(dt_sim, game.grid(), "finite-game");
    if (steps * stride != 2 * game.grid().intervals())
        throw config_error("simulation horizon does not match the game grid");
    const ContinuumTables tab = make_tables(sol, game.indices, dt_sim, steps);

    // Closed-loop drift matrices of the N-player system, one per step.
    const Eigen::MatrixXd scaled = game.scaled_weights();
    const Eigen::MatrixXd base = game.coefficients.a * Eigen::MatrixXd::Identity(n, n) +
                                 game.coefficients.c * scaled;
    std::vector<Eigen::MatrixXd> drift(static_cast<std::size_t>(steps));
    for (int i = 0; i < steps; ++i)
        drift[static_cast<std::size_t>(i)] =
            base + game.coefficients.b * nash.gain[static_cast<std::size_t>(i * stride)];

    struct ChunkStats {
        Eigen::VectorXd pair_sum, pair_sq, state_sum, costate_sum;
        Eigen::MatrixXd agg_sum, agg_sq;
    };
    const auto chunks = path_chunks(cfg.n_paths, cfg.path_chunk);
    std::vector<ChunkStats> parts(chunks.size());
    parallel_for(static_cast<int>(chunks.size()), std::max(1, cfg.threads), [&](int c) {
        const auto& range = chunks[static_cast<std::size_t>(c)];
        const CounterRng noise(cfg.seed, rng_role::state_noise);
        const double scale = cfg.noise_scale * std::sqrt(dt_sim);
        Eigen::MatrixXd xn(n, range.cols), dw(n, range.cols);
        fill_initial_states(game.coefficients, cfg.seed, range.base, xn);
        Eigen::MatrixXd xc = xn;
        Eigen::ArrayXXd sup_pair = Eigen::ArrayXXd::Zero(n, range.cols);
        Eigen::ArrayXXd sup_state = sup_pair, sup_costate = sup_pair;
        ChunkStats acc;
        acc.agg_sum = Eigen::MatrixXd::Zero(n, steps + 1);
        acc.agg_sq = Eigen::MatrixXd::Zero(n, steps + 1);
        for (int i = 0; i <= steps; ++i) {
            const auto dense = static_cast<std::size_t>(i * stride);
            const Eigen::ArrayXXd state_gap = (xn - xc).array().square();
            const Eigen::MatrixXd pn = nash.costate_gain[dense] * xn;
            const Eigen::MatrixXd pc = (tab.eta(i) * xc).colwise() + tab.zeta.col(i);
            const Eigen::ArrayXXd costate_gap = (pn - pc).array().square();
            sup_state = sup_state.max(state_gap);
            sup_costate = sup_costate.max(costate_gap);
            sup_pair = sup_pair.max(state_gap + costate_gap);
            const Eigen::ArrayXXd agg_gap =
                ((scaled * xn).colwise() - tab.zhat.col(i)).array().square();
            acc.agg_sum.col(i) += agg_gap.rowwise().sum().matrix();
            acc.agg_sq.col(i) += agg_gap.square().rowwise().sum().matrix();
            if (i == steps) break;
            xn += dt_sim * (drift[static_cast<std::size_t>(i)] * xn);
            continuum_step(tab, game.coefficients, i, xc);
            if (cfg.noise_scale != 0.0) {
                fill_pair_normals(noise, static_cast<std::uint32_t>(i), range.base, dw);
                xn += scale * dw;
                xc += scale * dw;
            }
        }
        acc.pair_sum = sup_pair.rowwise().sum().matrix();
        acc.pair_sq = sup_pair.square().rowwise().sum().matrix();
        acc.state_sum = sup_state.rowwise().sum().matrix();
        acc.costate_sum = sup_costate.rowwise().sum().matrix();
        parts[static_cast<std::size_t>(c)] = std::move(acc);
    });

    Eigen::VectorXd pair_sum = Eigen::VectorXd::Zero(n), pair_sq = pair_sum,
                    state_sum = pair_sum, costate_sum = pair_sum;
    Eigen::MatrixXd agg_sum = Eigen::MatrixXd::Zero(n, steps + 1), agg_sq = agg_sum;
    for (const auto& part : parts) {
        pair_sum += part.pair_sum;
        pair_sq += part.pair_sq;
        state_sum += part.state_sum;
        costate_sum += part.costate_sum;
        agg_sum += part.agg_sum;
        agg_sq += part.agg_sq;
    }

    const auto paths = static_cast<double>(cfg.n_paths);
    DeltaEstimate est;
    est.per_player.resize(n);
    est.per_player_se.resize(n);
    Eigen::VectorXd state_mean = state_sum / paths;
    Eigen::VectorXd costate_mean = costate_sum / paths;
    Eigen::VectorXd agg_at_max(n);
    for (int k = 0; k < n; ++k) {
        const double pw_mean = pair_sum(k) / paths;
        const double pw_var =
            std::max(0.0, (pair_sq(k) - paths * pw_mean * pw_mean) / (paths - 1.0));
        Eigen::Index node_max = 0;
        const double agg_mean = agg_sum.row(k).maxCoeff(&node_max) / paths;
        const double agg_var = std::max(
            0.0, (agg_sq(k, node_max) / paths - agg_mean * agg_mean) * paths / (paths - 1.0));
        agg_at_max(k) = agg_mean;
        est.per_player(k) = pw_mean + agg_mean;
        est.per_player_se(k) = std::sqrt((pw_var + agg_var) / paths);
    }
    Eigen::Index argmax = 0;
    est.delta_hat = est.per_player.maxCoeff(&argmax);
    est.argmax_player = static_cast<int>(argmax);
    est.standard_error = est.per_player_se(argmax);
    est.state_component = state_mean(argmax);
    est.costate_component = costate_mean(argmax);
    est.aggregate_component = agg_at_max(argmax);
    return est;
}

EllnReport elln_check(const EquilibriumSolution& sol, const Graphon& kernel, const SimConfig& cfg,
                      const std::vector<int>& n_values, double probe_index, double probe_time) {
    require_increasing(n_values);
    require_paths(cfg.n_paths, 2);
    if (!(probe_index >= 0.0 && probe_index <= 1.0))
        throw config_error("the probe index must lie in [0,1]");
    const double horizon = sol.coefficients.horizon;
    const double dt_sim = resolved_dt(cfg, sol.grid.dt());
    const int steps = step_count(dt_sim, horizon);
    const double t_probe = probe_time < 0.0 ? horizon : probe_time;
    const auto probe_node = std::llround(t_probe / dt_sim);
    if (probe_node < 0 || probe_node > steps ||
        std::abs(t_probe - static_cast<double>(probe_node) * dt_sim) >
            kAlignTol * std::max(1.0, t_probe))
        throw config_error("the probe time must land on a simulation node");

    const int count = n_values.back();
    const std::vector<double> indices = sample_index_stream(cfg.seed, count);
    const ContinuumTables tab = make_tables(sol, indices, dt_sim, steps);
    Eigen::VectorXd weights(count);
    for (int k = 0; k < count; ++k)
        weights(k) = kernel.kernel(probe_index, indices[static_cast<std::size_t>(k)]);

    Eigen::MatrixXd probe_states(count, cfg.n_paths);
    const auto chunks = path_chunks(cfg.n_paths, cfg.path_chunk);
    const int last = static_cast<int>(probe_node);
    parallel_for(static_cast<int>(chunks.size()), std::max(1, cfg.threads), [&](int c) {
        const auto& range = chunks[static_cast<std::size_t>(c)];
        run_continuum_chunk(tab, sol.coefficients, cfg, range.base, range.cols, last,
                            [&](int node, const Eigen::MatrixXd& x) {
                                if (node == last)
                                    probe_states.middleCols(range.base, range.cols) = x;
                            });
    });

    EllnReport report;
    report.n_values = n_values;
    report.probe_index = probe_index;
    report.probe_time = t_probe;
    const auto paths = static_cast<double>(cfg.n_paths);
    for (const int n : n_values) {
        const Eigen::RowVectorXd agg =
            weights.head(n).transpose() * probe_states.topRows(n) / static_cast<double>(n);
        const double mean = agg.mean();
        const double var =
            std::max(0.0, (agg.squaredNorm() - paths * mean * mean) / (paths - 1.0));
        report.variance.push_back(var);
    }
    const bool positive =
        std::all_of(report.variance.begin(), report.variance.end(), [](double v) { return v > 0.0; });
    if (n_values.size() >= 2 && positive) {
        std::vector<double> ns(n_values.begin(), n_values.end());
        report.slope = fit_log_slope(ns, report.variance);
    } else {
        report.slope = std::numeric_limits<double>::quiet_NaN();
    }
    return report;
}

EpsNashReport eps_nash_gap(const FiniteGame& game, const EquilibriumSolution& sol) {
    const AffineProfile profile = graphon_profile(game, sol);
    const Eigen::VectorXd costs = cost_evaluate(game, profile);
    const int n = game.player_count();
    EpsNashReport report;
    report.per_player.resize(n);
    for (int k = 0; k < n; ++k)
        report.per_player(k) = costs(k) - best_response_value(game, profile, k).value;
    report.max_gap = report.per_player.maxCoeff();
    return report;
}

ConvergenceReport convergence_sweep(const Graphon& kernel, const GameCoefficients& coeffs,
                                    const std::vector<int>& n_values, const SimConfig& cfg,
                                    const SolveNashOptions& nash_options,
                                    SolverOptions equilibrium_options) {
    require_increasing(n_values);
    const double dt = cfg.dt_sim > 0.0 ? cfg.dt_sim : coeffs.horizon / 500.0;
    equilibrium_options.dt = dt;
    const EquilibriumSolution sol = solve_equilibrium(coeffs, kernel, equilibrium_options);

    SimConfig run = cfg;
    run.dt_sim = dt;
    SimConfig elln_run = run;
    elln_run.n_paths = std::min(cfg.n_paths, 2000);

    ConvergenceReport report;
    for (const int n : n_values) {
        const FiniteGame game = sample_game(kernel, coeffs, n, cfg.seed, dt);
        const NashFeedback nash = solve_nash(game, nash_options);
        const DeltaEstimate delta = estimate_delta(game, nash, sol, run);
        const EpsNashReport eps = eps_nash_gap(game, sol);
        const EllnReport elln = elln_check(sol, kernel, elln_run, {n});
        ConvergenceRecord record;
        record.n_players = n;
        record.delta_hat = delta.delta_hat;
        record.delta_se = delta.standard_error;
        record.eps_gap = eps.max_gap;
        record.elln_var = elln.variance.front();
        record.ratio_loglog = n >= 3 ? delta.delta_hat * n / std::log(std::log(n))
                                     : std::numeric_limits<double>::quiet_NaN();
        report.records.push_back(record);
    }

    constexpr double kNoiseFloor = 1e-12;
    const bool regressable =
        report.records.size() >= 2 &&
        std::all_of(report.records.begin(), report.records.end(),
                    [](const ConvergenceRecord& r) { return r.delta_hat > kNoiseFloor; });
    report.regression_valid = regressable;
    if (regressable) {
        std::vector<double> ns, deltas;
        for (const auto& r : report.records) {
            ns.push_back(static_cast<double>(r.n_players));
            deltas.push_back(r.delta_hat);
        }
        report.slope = fit_log_slope(ns, deltas);
    } else {
        report.slope = std::numeric_limits<double>::quiet_NaN();
    }
    return report;
}

OccupationHistogram occupation_histogram(const PathEnsemble& ensemble, int bins) {
    if (bins < 1) throw std::invalid_argument("occupation_histogram: need at least one bin");
    if (ensemble.states.empty() || ensemble.n_paths < 1)
        throw std::invalid_argument("occupation_histogram: the ensemble holds no paths");
    double lo = ensemble.states.front().minCoeff();
    double hi = ensemble.states.front().maxCoeff();
    for (const auto& block : ensemble.states) {
        lo = std::min(lo, block.minCoeff());
        hi = std::max(hi, block.maxCoeff());
    }
    if (!(hi > lo)) {  // degenerate range: a unit box around the single value
        lo -= 0.5;
        hi += 0.5;
    }
    const double width = (hi - lo) / bins;

    const auto nodes = static_cast<int>(ensemble.states.size());
    OccupationHistogram hist;
    hist.times.resize(static_cast<std::size_t>(nodes));
    hist.edges.resize(static_cast<std::size_t>(bins) + 1);
    for (int j = 0; j <= bins; ++j) hist.edges[static_cast<std::size_t>(j)] = lo + width * j;
    hist.mass = Eigen::MatrixXd::Zero(nodes, bins);
    const double weight =
        1.0 / (static_cast<double>(ensemble.states.front().rows()) * ensemble.n_paths);
    for (int node = 0; node < nodes; ++node) {
        hist.times[static_cast<std::size_t>(node)] =
            ensemble.grid.time_at(TimeGrid::node(node));
        const auto& block = ensemble.states[static_cast<std::size_t>(node)];
        for (Eigen::Index k = 0; k < block.rows(); ++k) {
            for (Eigen::Index j = 0; j < block.cols(); ++j) {
                const auto bin = static_cast<int>((block(k, j) - lo) / width);
                hist.mass(node, std::clamp(bin, 0, bins - 1)) += weight;
            }
        }
    }
    return hist;
}

}  // namespace glq
