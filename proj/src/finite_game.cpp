#include "graphon_lq/finite_game.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <set>
#include <sstream>
#include <stdexcept>
#include <utility>

#include "graphon_lq/errors.hpp"
#include "graphon_lq/rng.hpp"

namespace glq {

namespace {

constexpr double kDefaultStepDivisor = 500.0;

int intervals_for(double horizon, double dt) {
    const double ratio = horizon / dt;
    const auto n = static_cast<int>(std::llround(ratio));
    if (n < 1 || std::abs(ratio - static_cast<double>(n)) > 1e-9 * std::max(1.0, ratio))
        throw std::invalid_argument("finite game: dt must divide the horizon evenly");
    return n;
}

// Hermite midpoint for matrix-valued dense output, same stencil as the scalar
// grid helper (4th order given node values and derivatives).
Eigen::MatrixXd hermite_mid(const Eigen::MatrixXd& y0, const Eigen::MatrixXd& f0,
                            const Eigen::MatrixXd& y1, const Eigen::MatrixXd& f1, double dt) {
    return 0.5 * (y0 + y1) + 0.125 * dt * (f0 - f1);
}

struct CostEntries {
    double f11, f12, f13, f22, f23, f33;
    double h11, h12, h22;
};

CostEntries cost_entries(const GameCoefficients& c) {
    return {c.running_cost(0, 0), c.running_cost(0, 1), c.running_cost(0, 2),
            c.running_cost(1, 1), c.running_cost(1, 2), c.running_cost(2, 2),
            c.terminal_cost(0, 0), c.terminal_cost(0, 1), c.terminal_cost(1, 1)};
}

void require_profile_matches(const FiniteGame& game, const AffineProfile& profile) {
    const TimeGrid grid = game.grid();
    if (!(profile.grid == grid))
        throw std::invalid_argument("finite game: profile grid does not match the game grid");
    const auto samples = static_cast<std::size_t>(grid.samples());
    const auto n = game.player_count();
    if (profile.gain.size() != samples || profile.offset.size() != samples)
        throw std::invalid_argument("finite game: profile sample count does not match the grid");
    for (std::size_t j = 0; j < samples; ++j) {
        if (profile.gain[j].rows() != n || profile.gain[j].cols() != n ||
            profile.offset[j].size() != n)
            throw std::invalid_argument("finite game: profile dimensions do not match the game");
    }
}

}  // namespace

TimeGrid FiniteGame::grid() const {
    return TimeGrid(coefficients.horizon, intervals_for(coefficients.horizon, dt));
}

FiniteGame assemble_game(const Graphon& kernel, const GameCoefficients& coeffs,
                         std::vector<double> indices, double dt, std::uint64_t seed) {
    coeffs.validate();
    if (indices.empty()) throw std::invalid_argument("finite game: at least one player required");
    for (double x : indices)
        if (!(x >= 0.0 && x <= 1.0))
            throw std::invalid_argument("finite game: player indices must lie in [0, 1]");
    if (dt == 0.0) dt = coeffs.horizon / kDefaultStepDivisor;
    if (!(dt > 0.0) || dt > coeffs.horizon)
        throw std::invalid_argument("finite game: dt must lie in (0, horizon]");
    intervals_for(coeffs.horizon, dt);  // divisibility gate

    FiniteGame game;
    game.coefficients = coeffs;
    game.weights = kernel.sample_weights(indices);
    game.indices = std::move(indices);
    game.seed = seed;
    game.dt = dt;
    return game;
}

FiniteGame sample_game(const Graphon& kernel, const GameCoefficients& coeffs, int player_count,
                       std::uint64_t seed, double dt) {
    if (player_count < 1)
        throw std::invalid_argument("finite game: at least one player required");
    // First `player_count` values of the seeded index stream: the same seed
    // with a larger N extends the population rather than resampling it.
    const CounterRng rng(seed, rng_role::index_sampling);
    std::vector<double> indices(static_cast<std::size_t>(player_count));
    for (int k = 0; k < player_count; ++k)
        indices[static_cast<std::size_t>(k)] = rng.uniform(static_cast<std::uint32_t>(k), 0, 0);
    return assemble_game(kernel, coeffs, std::move(indices), dt, seed);
}

// ---------------------------------------------------------------------------
// Nash solve: N coupled symmetric Riccati equations, integrated backward on
// one (N^2 x N) stack so each RK4 stage costs a single matrix product.
// ---------------------------------------------------------------------------

namespace {

class NashSystem {
public:
    NashSystem(const FiniteGame& game)
        : n_(game.player_count()),
          coeffs_(game.coefficients),
          f_(cost_entries(game.coefficients)),
          wp_(game.scaled_weights()) {
        // Control-cross rows s_k = C_f12 e_k + C_f23 w_k.
        s_ = f_.f23 * wp_;
        s_.diagonal().array() += f_.f12;
    }

    [[nodiscard]] int size() const { return n_; }
    [[nodiscard]] const Eigen::MatrixXd& scaled_weights() const { return wp_; }
    [[nodiscard]] const CostEntries& entries() const { return f_; }

    [[nodiscard]] Eigen::MatrixXd terminal_stack() const {
        Eigen::MatrixXd stack = Eigen::MatrixXd::Zero(n_ * n_, n_);
        for (int k = 0; k < n_; ++k) {
            auto block = stack.middleRows(k * n_, n_);
            const Eigen::VectorXd w = wp_.row(k).transpose();
            if (f_.h22 != 0.0) block.noalias() += f_.h22 * w * w.transpose();
            if (f_.h12 != 0.0) {
                block.row(k) += f_.h12 * w.transpose();
                block.col(k) += f_.h12 * w;
            }
            block(k, k) += f_.h11;
        }
        return stack;
    }

    // Feedback rows U[k,:] = s_k + b P^k[:,k], so F = -U / C_f22 and
    // A_cl = a I + c W' + b F.
    void feedback_rows(const Eigen::MatrixXd& stack, Eigen::MatrixXd& u) const {
        u = s_;
        for (int k = 0; k < n_; ++k)
            u.row(k) += coeffs_.b * stack.middleRows(k * n_, n_).col(k).transpose();
    }

    void closed_loop(const Eigen::MatrixXd& u, Eigen::MatrixXd& a_cl) const {
        a_cl = coeffs_.c * wp_ - (coeffs_.b / f_.f22) * u;
        a_cl.diagonal().array() += coeffs_.a;
    }

    // dStack/dt at the Nash coupling (autonomous in t).
    void derivative(const Eigen::MatrixXd& stack, Eigen::MatrixXd& out) const {
        feedback_rows(stack, u_buf_);
        closed_loop(u_buf_, acl_buf_);
        gemm_buf_.noalias() = stack * acl_buf_;
        const double inv_r = 1.0 / f_.f22;
        for (int k = 0; k < n_; ++k) {
            auto gk = gemm_buf_.middleRows(k * n_, n_);
            auto ok = out.middleRows(k * n_, n_);
            const Eigen::VectorXd u = u_buf_.row(k).transpose();
            const Eigen::VectorXd s = s_.row(k).transpose();
            const Eigen::VectorXd w = wp_.row(k).transpose();
            ok = -(gk + gk.transpose());
            ok.noalias() -= inv_r * u * u.transpose();
            ok.noalias() += inv_r * (u * s.transpose() + s * u.transpose());
            if (f_.f33 != 0.0) ok.noalias() -= f_.f33 * w * w.transpose();
            if (f_.f13 != 0.0) {
                ok.row(k) -= f_.f13 * w.transpose();
                ok.col(k) -= f_.f13 * w;
            }
            ok(k, k) -= f_.f11;
        }
    }

private:
    int n_;
    GameCoefficients coeffs_;
    CostEntries f_;
    Eigen::MatrixXd wp_;
    Eigen::MatrixXd s_;
    mutable Eigen::MatrixXd u_buf_, acl_buf_, gemm_buf_;
};

// Node-extraction bundle for the dense output (feedback matrix, diagonal
// costate rows, and their time derivatives for the Hermite midpoints).
struct NodeSlice {
    Eigen::MatrixXd gain, gain_dot, rows, rows_dot;
};

void extract_slice(const NashSystem& sys, const GameCoefficients& coeffs,
                   const Eigen::MatrixXd& stack, const Eigen::MatrixXd& deriv, NodeSlice& out) {
    const int n = sys.size();
    sys.feedback_rows(stack, out.gain);
    out.gain *= -1.0 / coeffs.running_cost(1, 1);
    out.gain_dot.resize(n, n);
    out.rows.resize(n, n);
    out.rows_dot.resize(n, n);
    const double scale = -coeffs.b / coeffs.running_cost(1, 1);
    for (int k = 0; k < n; ++k) {
        out.gain_dot.row(k) = scale * deriv.middleRows(k * n, n).col(k).transpose();
        out.rows.row(k) = stack.middleRows(k * n, n).row(k);
        out.rows_dot.row(k) = deriv.middleRows(k * n, n).row(k);
    }
}

// Residual verification: simulate closed-loop paths and confirm, along them,
// that the diagonal costate drift matches the Hamiltonian gradient (with
// opponents' feedback reaction included) and that the terminal costate
// identities hold. The drift side differentiates the *stored* solution in
// time, so the check exercises the integrator, the dense storage and the
// derivation rather than re-evaluating the Riccati right-hand side.
struct ResidualReport {
    double drift = 0.0;
    double terminal = 0.0;
};

ResidualReport verify_residuals(const FiniteGame& game, const NashFeedback& law,
                                const std::vector<int>& check_nodes,
                                const std::vector<int>& witnesses,
                                const std::vector<Eigen::MatrixXd>& checkpoints,
                                const SolveNashOptions& options) {
    const int n_players = game.player_count();
    const TimeGrid grid = law.grid;
    const int n = grid.intervals();
    const double dt = grid.dt();
    const double sqrt_dt = std::sqrt(dt);
    const CostEntries f = cost_entries(game.coefficients);
    const Eigen::MatrixXd wp = game.scaled_weights();
    const double a = game.coefficients.a, b = game.coefficients.b, c = game.coefficients.c;

    const CounterRng init_rng(options.residual_seed, rng_role::initial_state);
    const CounterRng noise_rng(options.residual_seed, rng_role::state_noise);
    const double m0 = game.coefficients.initial_mean;
    const double sd0 = std::sqrt(game.coefficients.initial_variance);

    ResidualReport report;
    Eigen::VectorXd state(n_players), drift(n_players), costates(n_players),
        controls(n_players);
    for (int path = 0; path < options.residual_paths; ++path) {
        for (int k = 0; k < n_players; ++k)
            state(k) = m0 + sd0 * init_rng.normal(static_cast<std::uint32_t>(k),
                                                  static_cast<std::uint32_t>(path), 0);
        std::size_t check_slot = 0;
        for (int i = 0; i <= n; ++i) {
            const Eigen::MatrixXd& gain = law.gain[static_cast<std::size_t>(TimeGrid::node(i))];
            // Interior drift identity at node i, probed at the current state.
            if (check_slot < check_nodes.size() && check_nodes[check_slot] == i) {
                const auto& rows_next = law.costate_gain[static_cast<std::size_t>(
                    TimeGrid::node(i + 1))];
                const auto& rows_prev = law.costate_gain[static_cast<std::size_t>(
                    TimeGrid::node(i - 1))];
                const auto& rows_here = law.costate_gain[static_cast<std::size_t>(
                    TimeGrid::node(i))];
                controls.noalias() = gain * state;
                drift.noalias() = c * (wp * state);
                drift.noalias() += b * controls;
                drift += a * state;
                for (std::size_t wi = 0; wi < witnesses.size(); ++wi) {
                    const int k = witnesses[wi];
                    const Eigen::MatrixXd& pk =
                        checkpoints[check_slot * witnesses.size() + wi];
                    costates.noalias() = pk * state;  // p^{kj} for all j
                    const double z_k = wp.row(k).dot(state);
                    double h_grad = a * costates(k) + c * wp.col(k).dot(costates) +
                                    f.f11 * state(k) + f.f12 * controls(k) + f.f13 * z_k +
                                    wp(k, k) * (f.f13 * state(k) + f.f23 * controls(k) +
                                                f.f33 * z_k);
                    for (int j = 0; j < n_players; ++j)
                        if (j != k) h_grad += b * costates(j) * gain(j, k);
                    const double rows_dot_x =
                        (rows_next.row(k) - rows_prev.row(k)).dot(state) / (2.0 * dt);
                    const double lhs = rows_dot_x + rows_here.row(k).dot(drift);
                    const double scale = std::max(1.0, std::abs(costates(k)));
                    report.drift = std::max(report.drift, std::abs(lhs + h_grad) / scale);
                }
                ++check_slot;
            }
            if (i == n) break;
            // Euler-Maruyama step under the stored feedback.
            controls.noalias() = gain * state;
            drift.noalias() = c * (wp * state);
            drift.noalias() += b * controls;
            drift += a * state;
            state += dt * drift;
            for (int k = 0; k < n_players; ++k)
                state(k) += sqrt_dt * noise_rng.normal(static_cast<std::uint32_t>(k),
                                                       static_cast<std::uint32_t>(path),
                                                       static_cast<std::uint32_t>(i));
        }
        // Terminal costate identities on the simulated terminal state.
        const auto& rows_t = law.costate_gain.back();
        for (int k : witnesses) {
            const double z_k = wp.row(k).dot(state);
            const double expected = f.h11 * state(k) + f.h12 * z_k +
                                    wp(k, k) * (f.h12 * state(k) + f.h22 * z_k);
            const double got = rows_t.row(k).dot(state);
            const double scale = std::max(1.0, std::abs(expected));
            report.terminal = std::max(report.terminal, std::abs(got - expected) / scale);
        }
    }
    return report;
}

}  // namespace

NashFeedback solve_nash(const FiniteGame& game, const SolveNashOptions& options) {
    game.coefficients.validate();
    const int n_players = game.player_count();
    if (n_players > options.max_players) {
        std::ostringstream msg;
        msg << "finite game: " << n_players << " players exceeds the configured cap of "
            << options.max_players << "; raise max_players deliberately for large sweeps";
        throw config_error(msg.str());
    }
    const TimeGrid grid = game.grid();
    const int n = grid.intervals();
    const double dt = grid.dt();

    const NashSystem sys(game);
    Eigen::MatrixXd stack = sys.terminal_stack();
    Eigen::MatrixXd k1(n_players * n_players, n_players), k2 = k1, k3 = k1, k4 = k1,
                    stage = k1;

    NashFeedback law{grid, {}, {}, {}, 0.0, 0.0};
    law.gain.assign(static_cast<std::size_t>(grid.samples()), Eigen::MatrixXd());
    law.offset.assign(static_cast<std::size_t>(grid.samples()),
                      Eigen::VectorXd::Zero(n_players));
    law.costate_gain.assign(static_cast<std::size_t>(grid.samples()), Eigen::MatrixXd());

    // Interior checkpoint nodes and witness players for the residual check.
    std::set<int> node_set;
    for (int c = 1; c <= 7; ++c) {
        const int node = (n * c) / 8;
        if (node >= 1 && node <= n - 1) node_set.insert(node);
    }
    const std::vector<int> check_nodes(node_set.begin(), node_set.end());
    std::vector<int> witnesses;
    if (n_players <= 8) {
        for (int k = 0; k < n_players; ++k) witnesses.push_back(k);
    } else {
        std::set<int> picks;
        for (int w = 0; w < 8; ++w) picks.insert((w * (n_players - 1)) / 7);
        witnesses.assign(picks.begin(), picks.end());
    }
    std::vector<Eigen::MatrixXd> checkpoints(check_nodes.size() * witnesses.size());
    const auto store_checkpoint = [&](int node, const Eigen::MatrixXd& st) {
        const auto it = std::lower_bound(check_nodes.begin(), check_nodes.end(), node);
        if (it == check_nodes.end() || *it != node) return;
        const std::size_t slot = static_cast<std::size_t>(it - check_nodes.begin());
        for (std::size_t wi = 0; wi < witnesses.size(); ++wi)
            checkpoints[slot * witnesses.size() + wi] =
                st.middleRows(witnesses[wi] * n_players, n_players);
    };

    NodeSlice cur, prev;
    sys.derivative(stack, k1);
    extract_slice(sys, game.coefficients, stack, k1, cur);
    law.gain[static_cast<std::size_t>(TimeGrid::node(n))] = cur.gain;
    law.costate_gain[static_cast<std::size_t>(TimeGrid::node(n))] = cur.rows;
    store_checkpoint(n, stack);

    for (int i = n; i >= 1; --i) {
        // One backward RK4 step from node i to node i-1 (k1 already holds the
        // derivative at node i).
        stage = stack - (0.5 * dt) * k1;
        sys.derivative(stage, k2);
        stage = stack - (0.5 * dt) * k2;
        sys.derivative(stage, k3);
        stage = stack - dt * k3;
        sys.derivative(stage, k4);
        stack -= (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);

        const double max_abs = stack.cwiseAbs().maxCoeff();
        if (!std::isfinite(max_abs) || max_abs > options.blowup_cap) {
            std::ostringstream msg;
            msg << "coupled Riccati system blew up integrating backward through t = "
                << grid.time_at(TimeGrid::node(i - 1))
                << "; the sampled game appears ill-posed on this horizon";
            throw numerical_error(msg.str(), grid.time_at(TimeGrid::node(i - 1)));
        }

        prev = std::move(cur);
        sys.derivative(stack, k1);
        extract_slice(sys, game.coefficients, stack, k1, cur);
        const auto node_j = static_cast<std::size_t>(TimeGrid::node(i - 1));
        const auto mid_j = static_cast<std::size_t>(TimeGrid::midpoint(i - 1));
        law.gain[node_j] = cur.gain;
        law.costate_gain[node_j] = cur.rows;
        law.gain[mid_j] = hermite_mid(cur.gain, cur.gain_dot, prev.gain, prev.gain_dot, dt);
        law.costate_gain[mid_j] =
            hermite_mid(cur.rows, cur.rows_dot, prev.rows, prev.rows_dot, dt);
        store_checkpoint(i - 1, stack);
    }

    const ResidualReport residuals =
        verify_residuals(game, law, check_nodes, witnesses, checkpoints, options);
    law.drift_residual = residuals.drift;
    law.terminal_residual = residuals.terminal;
    // The drift identity is differentiated numerically (O(dt^2) stencil on the
    // stored costate rows against an O(1) derivation error), the terminal one
    // is exact; both gates are far above honest discretization noise.
    const double drift_gate = 500.0 * dt * dt;
    constexpr double terminal_gate = 1e-10;
    if (residuals.drift > drift_gate || residuals.terminal > terminal_gate) {
        std::ostringstream msg;
        msg << "internal consistency check failed on the Nash solution (drift residual "
            << residuals.drift << ", terminal residual " << residuals.terminal
            << "); this indicates a solver bug, not a modelling error";
        throw numerical_error(msg.str());
    }
    return law;
}

// ---------------------------------------------------------------------------
// Best response against a frozen affine profile: a single-player LQ problem
// in the N-dimensional state (matrix Riccati + affine + scalar ODE).
// ---------------------------------------------------------------------------

namespace {

struct BrState {
    Eigen::MatrixXd p;  // N x N value curvature
    Eigen::VectorXd q;  // affine value slope
    double r = 0.0;     // value offset
};

BrState operator*(double s, const BrState& x) { return {s * x.p, s * x.q, s * x.r}; }
BrState operator+(const BrState& x, const BrState& y) {
    return {x.p + y.p, x.q + y.q, x.r + y.r};
}

}  // namespace

BestResponse best_response_value(const FiniteGame& game, const AffineProfile& opponents,
                                 int player, double blowup_cap) {
    game.coefficients.validate();
    require_profile_matches(game, opponents);
    const int n_players = game.player_count();
    if (player < 0 || player >= n_players)
        throw std::invalid_argument("finite game: best-response player index out of range");

    const TimeGrid grid = game.grid();
    const int n = grid.intervals();
    const double dt = grid.dt();
    const CostEntries f = cost_entries(game.coefficients);
    const double a = game.coefficients.a, b = game.coefficients.b, c = game.coefficients.c;
    const double inv_r = 1.0 / f.f22;
    const Eigen::MatrixXd wp = game.scaled_weights();
    const Eigen::VectorXd w = wp.row(player).transpose();
    Eigen::VectorXd s = f.f23 * w;
    s(player) += f.f12;

    // Running-cost curvature in the state: Q = f11 e e' + f33 w w' + f13 (e w' + w e').
    Eigen::MatrixXd q_mat = Eigen::MatrixXd::Zero(n_players, n_players);
    if (f.f33 != 0.0) q_mat.noalias() += f.f33 * w * w.transpose();
    if (f.f13 != 0.0) {
        q_mat.row(player) += f.f13 * w.transpose();
        q_mat.col(player) += f.f13 * w;
    }
    q_mat(player, player) += f.f11;

    // Opponent drift pieces at a dense sample: A0 = a I + c W' + b (gain with
    // the player's own row zeroed), o = offsets with the player's entry zeroed.
    const auto opponent_matrix = [&](std::size_t j, Eigen::MatrixXd& a0, Eigen::VectorXd& o) {
        a0 = b * opponents.gain[j];
        a0.row(player).setZero();
        a0.noalias() += c * wp;
        a0.diagonal().array() += a;
        o = opponents.offset[j];
        o(player) = 0.0;
    };

    Eigen::MatrixXd a0(n_players, n_players);
    Eigen::VectorXd o(n_players);
    const auto derivative = [&](const BrState& x, std::size_t dense_j, BrState& out) {
        opponent_matrix(dense_j, a0, o);
        const Eigen::VectorXd u = s + b * x.p.col(player);
        out.p = -q_mat;
        out.p.noalias() -= x.p * a0;
        out.p.noalias() -= a0.transpose() * x.p;
        out.p.noalias() += inv_r * u * u.transpose();
        out.q = -(b * (x.p * o));
        out.q.noalias() -= a0.transpose() * x.q;
        out.q += (inv_r * b * x.q(player)) * u;
        out.r = -(0.5 * x.p.trace() + b * x.q.dot(o) -
                  0.5 * inv_r * b * b * x.q(player) * x.q(player));
    };

    // Terminal curvature: h11 e e' + h12 (e w' + w e') + h22 w w'.
    BrState state;
    state.p = Eigen::MatrixXd::Zero(n_players, n_players);
    if (f.h22 != 0.0) state.p.noalias() += f.h22 * w * w.transpose();
    if (f.h12 != 0.0) {
        state.p.row(player) += f.h12 * w.transpose();
        state.p.col(player) += f.h12 * w;
    }
    state.p(player, player) += f.h11;
    state.q = Eigen::VectorXd::Zero(n_players);
    state.r = 0.0;

    BestResponse response;
    response.gain_row.assign(static_cast<std::size_t>(grid.samples()), Eigen::VectorXd());
    response.offset.assign(static_cast<std::size_t>(grid.samples()), 0.0);
    const auto emit = [&](std::size_t dense_j, const BrState& x) {
        const Eigen::VectorXd u = s + b * x.p.col(player);
        response.gain_row[dense_j] = -inv_r * u;
        response.offset[dense_j] = -inv_r * b * x.q(player);
    };
    // Dense output of the response law needs (P column, q_k) at midpoints;
    // Hermite-fill them from node values and derivatives.
    Eigen::VectorXd col_cur, col_dot_cur, col_prev, col_dot_prev;
    double qk_cur = 0.0, qk_dot_cur = 0.0, qk_prev = 0.0, qk_dot_prev = 0.0;

    BrState d1, d2, d3, d4;
    derivative(state, static_cast<std::size_t>(TimeGrid::node(n)), d1);
    emit(static_cast<std::size_t>(TimeGrid::node(n)), state);
    col_cur = state.p.col(player);
    col_dot_cur = d1.p.col(player);
    qk_cur = state.q(player);
    qk_dot_cur = d1.q(player);

    for (int i = n; i >= 1; --i) {
        const auto mid = static_cast<std::size_t>(TimeGrid::midpoint(i - 1));
        const auto node_prev = static_cast<std::size_t>(TimeGrid::node(i - 1));
        BrState stage = state + (-0.5 * dt) * d1;
        derivative(stage, mid, d2);
        stage = state + (-0.5 * dt) * d2;
        derivative(stage, mid, d3);
        stage = state + (-dt) * d3;
        derivative(stage, node_prev, d4);
        state = state + (-dt / 6.0) * (d1 + 2.0 * d2 + 2.0 * d3 + d4);

        const double max_abs = std::max(state.p.cwiseAbs().maxCoeff(),
                                        std::max(state.q.cwiseAbs().maxCoeff(),
                                                 std::abs(state.r)));
        if (!std::isfinite(max_abs) || max_abs > blowup_cap) {
            std::ostringstream msg;
            msg << "best-response Riccati blew up integrating backward through t = "
                << grid.time_at(TimeGrid::node(i - 1));
            throw numerical_error(msg.str(), grid.time_at(TimeGrid::node(i - 1)));
        }

        derivative(state, node_prev, d1);
        emit(node_prev, state);
        col_prev = col_cur;
        col_dot_prev = col_dot_cur;
        qk_prev = qk_cur;
        qk_dot_prev = qk_dot_cur;
        col_cur = state.p.col(player);
        col_dot_cur = d1.p.col(player);
        qk_cur = state.q(player);
        qk_dot_cur = d1.q(player);

        const Eigen::VectorXd col_mid =
            0.5 * (col_cur + col_prev) + 0.125 * dt * (col_dot_cur - col_dot_prev);
        const double qk_mid = hermite_midpoint(qk_cur, qk_dot_cur, qk_prev, qk_dot_prev, dt);
        response.gain_row[mid] = -inv_r * (s + b * col_mid);
        response.offset[mid] = -inv_r * b * qk_mid;
    }

    // Value at t = 0 against the iid Gaussian initial law.
    const double m0 = game.coefficients.initial_mean;
    const double v0 = game.coefficients.initial_variance;
    response.value = 0.5 * (m0 * m0 * state.p.sum() + v0 * state.p.trace()) +
                     m0 * state.q.sum() + state.r;
    return response;
}

// ---------------------------------------------------------------------------
// Exact closed-loop costs via the state mean and covariance.
// ---------------------------------------------------------------------------

namespace {

// Per-player expected running-cost rate at one dense sample, vectorized over
// players: E[(1/2) y' C_f y] with y = (X^k, alpha^k, Z^k) affine in the state.
Eigen::VectorXd cost_rate(const CostEntries& f, const Eigen::MatrixXd& wp,
                          const Eigen::MatrixXd& gain, const Eigen::VectorXd& offset,
                          const Eigen::VectorXd& mu, const Eigen::MatrixXd& sigma) {
    const Eigen::MatrixXd gs = gain * sigma;
    const Eigen::MatrixXd ws = wp * sigma;
    const Eigen::VectorXd c11 = sigma.diagonal();
    const Eigen::VectorXd c12 = sigma.cwiseProduct(gain).rowwise().sum();
    const Eigen::VectorXd c13 = sigma.cwiseProduct(wp).rowwise().sum();
    const Eigen::VectorXd c22 = gs.cwiseProduct(gain).rowwise().sum();
    const Eigen::VectorXd c23 = gs.cwiseProduct(wp).rowwise().sum();
    const Eigen::VectorXd c33 = ws.cwiseProduct(wp).rowwise().sum();
    const Eigen::VectorXd xb = mu;
    const Eigen::VectorXd ab = gain * mu + offset;
    const Eigen::VectorXd zb = wp * mu;
    return 0.5 * (f.f11 * (c11 + xb.cwiseProduct(xb)) + f.f22 * (c22 + ab.cwiseProduct(ab)) +
                  f.f33 * (c33 + zb.cwiseProduct(zb))) +
           f.f12 * (c12 + xb.cwiseProduct(ab)) + f.f13 * (c13 + xb.cwiseProduct(zb)) +
           f.f23 * (c23 + ab.cwiseProduct(zb));
}

Eigen::VectorXd terminal_cost_value(const CostEntries& f, const Eigen::MatrixXd& wp,
                                    const Eigen::VectorXd& mu, const Eigen::MatrixXd& sigma) {
    const Eigen::MatrixXd ws = wp * sigma;
    const Eigen::VectorXd c11 = sigma.diagonal();
    const Eigen::VectorXd c13 = sigma.cwiseProduct(wp).rowwise().sum();
    const Eigen::VectorXd c33 = ws.cwiseProduct(wp).rowwise().sum();
    const Eigen::VectorXd xb = mu;
    const Eigen::VectorXd zb = wp * mu;
    return 0.5 * (f.h11 * (c11 + xb.cwiseProduct(xb)) + f.h22 * (c33 + zb.cwiseProduct(zb))) +
           f.h12 * (c13 + xb.cwiseProduct(zb));
}

}  // namespace

Eigen::VectorXd cost_evaluate(const FiniteGame& game, const AffineProfile& profile) {
    game.coefficients.validate();
    require_profile_matches(game, profile);
    const int n_players = game.player_count();
    const TimeGrid grid = game.grid();
    const int n = grid.intervals();
    const double dt = grid.dt();
    const CostEntries f = cost_entries(game.coefficients);
    const double a = game.coefficients.a, b = game.coefficients.b, c = game.coefficients.c;
    const Eigen::MatrixXd wp = game.scaled_weights();

    const auto closed_loop = [&](std::size_t dense_j) {
        Eigen::MatrixXd acl = b * profile.gain[dense_j];
        acl.noalias() += c * wp;
        acl.diagonal().array() += a;
        return acl;
    };
    Eigen::MatrixXd acl(n_players, n_players);
    const auto derivative = [&](const Eigen::MatrixXd& sigma, const Eigen::VectorXd& mu,
                                std::size_t dense_j, Eigen::MatrixXd& dsigma,
                                Eigen::VectorXd& dmu) {
        acl = closed_loop(dense_j);
        dsigma.noalias() = acl * sigma;
        dsigma += dsigma.transpose().eval();
        dsigma.diagonal().array() += 1.0;
        dmu.noalias() = acl * mu;
        dmu.noalias() += b * profile.offset[dense_j];
    };

    Eigen::MatrixXd sigma = Eigen::MatrixXd::Identity(n_players, n_players) *
                            game.coefficients.initial_variance;
    Eigen::VectorXd mu =
        Eigen::VectorXd::Constant(n_players, game.coefficients.initial_mean);

    Eigen::MatrixXd rates(n_players, grid.samples());
    Eigen::MatrixXd ds1, ds2, ds3, ds4, sig_stage;
    Eigen::VectorXd dm1, dm2, dm3, dm4, mu_stage;

    auto node_j = static_cast<std::size_t>(TimeGrid::node(0));
    derivative(sigma, mu, node_j, ds1, dm1);
    rates.col(static_cast<Eigen::Index>(node_j)) =
        cost_rate(f, wp, profile.gain[node_j], profile.offset[node_j], mu, sigma);

    for (int i = 0; i < n; ++i) {
        const auto mid = static_cast<std::size_t>(TimeGrid::midpoint(i));
        const auto next = static_cast<std::size_t>(TimeGrid::node(i + 1));
        sig_stage = sigma + (0.5 * dt) * ds1;
        mu_stage = mu + (0.5 * dt) * dm1;
        derivative(sig_stage, mu_stage, mid, ds2, dm2);
        sig_stage = sigma + (0.5 * dt) * ds2;
        mu_stage = mu + (0.5 * dt) * dm2;
        derivative(sig_stage, mu_stage, mid, ds3, dm3);
        sig_stage = sigma + dt * ds3;
        mu_stage = mu + dt * dm3;
        derivative(sig_stage, mu_stage, next, ds4, dm4);
        const Eigen::MatrixXd sigma_next =
            sigma + (dt / 6.0) * (ds1 + 2.0 * ds2 + 2.0 * ds3 + ds4);
        const Eigen::VectorXd mu_next = mu + (dt / 6.0) * (dm1 + 2.0 * dm2 + 2.0 * dm3 + dm4);
        derivative(sigma_next, mu_next, next, ds2, dm2);  // derivative at node i+1

        const Eigen::MatrixXd sigma_mid = hermite_mid(sigma, ds1, sigma_next, ds2, dt);
        const Eigen::VectorXd mu_mid =
            0.5 * (mu + mu_next) + 0.125 * dt * (dm1 - dm2);
        rates.col(static_cast<Eigen::Index>(mid)) =
            cost_rate(f, wp, profile.gain[mid], profile.offset[mid], mu_mid, sigma_mid);
        rates.col(static_cast<Eigen::Index>(next)) =
            cost_rate(f, wp, profile.gain[next], profile.offset[next], mu_next, sigma_next);

        sigma = sigma_next;
        mu = mu_next;
        ds1 = ds2;
        dm1 = dm2;
    }

    Eigen::VectorXd costs = terminal_cost_value(f, wp, mu, sigma);
    std::vector<double> dense(static_cast<std::size_t>(grid.samples()));
    for (int k = 0; k < n_players; ++k) {
        for (int j = 0; j < grid.samples(); ++j)
            dense[static_cast<std::size_t>(j)] = rates(k, j);
        costs(k) += simpson_dense(grid, dense);
    }
    return costs;
}

}  // namespace glq
