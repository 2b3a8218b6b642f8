#include "graphon_lq/spectral_equilibrium.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <sstream>
#include <string>
#include <utility>

#include "graphon_lq/errors.hpp"
#include "graphon_lq/parallel.hpp"

namespace glq {

namespace {

// Exact dense-grid lookup for times that lie on stored samples (RK4 stage
// times always do when paths share a grid or refine it by an integer factor).
double sample_dense(const ScalarPath& path, double t) {
    const double half = 0.5 * path.grid.dt();
    const auto j = static_cast<int>(std::llround(t / half));
    return path.at_dense(j);
}

int dense_index(const TimeGrid& grid, double t) {
    return static_cast<int>(std::llround(t / (0.5 * grid.dt())));
}

int intervals_for(double horizon, double dt) {
    const double ratio = horizon / dt;
    const auto n = static_cast<int>(std::llround(ratio));
    if (n < 1 || std::abs(ratio - n) > 1e-9 * std::max(1.0, ratio)) {
        throw std::invalid_argument("time step must divide the horizon");
    }
    return n;
}

}  // namespace

std::vector<double> project_initial(const SpectralGraphon& sg, double m0) {
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(sg.grid_size());
    std::vector<double> coefficients(static_cast<std::size_t>(sg.mode_count()));
    for (int k = 0; k < sg.mode_count(); ++k) {
        coefficients[static_cast<std::size_t>(k)] =
            m0 * sg.grid_inner(ones, sg.eigenfunctions().col(k));
    }
    return coefficients;
}

std::vector<ModeTrajectory> solve_modes(const GammaMatrices& gm, const RiccatiSolution& eta,
                                        const SpectralGraphon& sg,
                                        const std::vector<double>& initial_modes,
                                        double blowup_cap) {
    if (initial_modes.size() != static_cast<std::size_t>(sg.mode_count())) {
        throw std::invalid_argument("one initial coefficient per retained mode required");
    }
    const TimeGrid& grid = eta.eta.grid;
    std::vector<ModeTrajectory> modes;
    modes.reserve(initial_modes.size());

    for (int k = 0; k < sg.mode_count(); ++k) {
        const double lambda = sg.eigenvalue(k);
        ModeRiccati gain = solve_pi(gm, eta, lambda, k, blowup_cap);

        const double z0 = lambda * initial_modes[static_cast<std::size_t>(k)];
        ScalarPath z = rk4_forward(grid, z0, [&](double t, double y) {
            const double eta_t = sample_dense(eta.eta, t);
            const double pi_t = sample_dense(gain.pi, t);
            return (gm.g11() + gm.g12() * eta_t + gm.z1() * lambda + gm.g12() * lambda * pi_t) * y;
        });

        ScalarPath v(grid);
        for (int j = 0; j < grid.samples(); ++j) {
            v.values[static_cast<std::size_t>(j)] = gain.pi.at_dense(j) * z.at_dense(j);
        }

        // Independent route: integrate the costate coefficient backward from
        // its terminal condition, treating the computed z as data, and compare
        // with the ansatz v = pi z.
        ScalarPath v_direct(grid);
        double escape = 0.0;
        const bool ok = rk4_backward(
            grid, gm.t2() * z.back(),
            [&](double t, double y) {
                const double eta_t = sample_dense(eta.eta, t);
                return y * (gm.g22() - gm.g12() * eta_t) +
                       sample_dense(z, t) * (gm.z2() - gm.z1() * eta_t);
            },
            v_direct, blowup_cap, &escape);
        if (!ok) {
            std::ostringstream msg;
            msg << "costate coefficient of mode " << k << " exceeded the blow-up cap";
            throw numerical_error(msg.str(), escape);
        }
        double gap = 0.0;
        for (int j = 0; j < grid.samples(); ++j) {
            gap = std::max(gap, std::abs(v_direct.at_dense(j) - v.at_dense(j)));
        }
        modes.push_back(
            ModeTrajectory{k, lambda, std::move(z), std::move(v), std::move(gain.pi), gap});
    }
    return modes;
}

EquilibriumSolution reconstruct(const GammaMatrices& gm, const RiccatiSolution& eta,
                                const SpectralGraphon& sg, std::vector<ModeTrajectory> modes,
                                const GameCoefficients& coeffs, int threads) {
    const TimeGrid& grid = eta.eta.grid;
    const int samples = grid.samples();
    const int m_count = sg.grid_size();
    const auto k_count = static_cast<int>(modes.size());

    Eigen::MatrixXd z_coeff(k_count, samples);
    Eigen::MatrixXd v_coeff(k_count, samples);
    for (int k = 0; k < k_count; ++k) {
        for (int j = 0; j < samples; ++j) {
            z_coeff(k, j) = modes[static_cast<std::size_t>(k)].z.at_dense(j);
            v_coeff(k, j) = modes[static_cast<std::size_t>(k)].v.at_dense(j);
        }
    }

    EquilibriumSolution sol{grid,
                            sg.nodes(),
                            Eigen::MatrixXd(),
                            Eigen::MatrixXd::Zero(m_count, samples),
                            Eigen::MatrixXd::Zero(m_count, samples),
                            ScalarPath(grid),
                            std::move(modes),
                            eta,
                            coeffs,
                            0.0,
                            0.0,
                            0.0};
    sol.zhat = sg.eigenfunctions() * z_coeff;

    for (const ModeTrajectory& mode : sol.modes) {
        sol.mode_ansatz_residual = std::max(sol.mode_ansatz_residual, mode.ansatz_residual);
    }

    // Per-index costate offset (backward) and mean state (forward). Bodies
    // write only to their own row; failures are flagged and rethrown after
    // the join.
    const int workers = std::max(1, threads);
    std::vector<char> failed(static_cast<std::size_t>(m_count), 0);
    std::vector<double> escape_times(static_cast<std::size_t>(m_count), 0.0);
    parallel_for(m_count, workers, [&](int i) {
        const auto row = static_cast<Eigen::Index>(i);
        auto zhat_at = [&](double t) { return sol.zhat(row, dense_index(grid, t)); };

        ScalarPath zeta_row(grid);
        double escape = 0.0;
        const bool ok = rk4_backward(
            grid, gm.t2() * sol.zhat(row, samples - 1),
            [&](double t, double y) {
                const double eta_t = sample_dense(eta.eta, t);
                return y * (gm.g22() - gm.g12() * eta_t) +
                       zhat_at(t) * (gm.z2() - gm.z1() * eta_t);
            },
            zeta_row, 1e12, &escape);
        if (!ok) {
            failed[static_cast<std::size_t>(i)] = 1;
            escape_times[static_cast<std::size_t>(i)] = escape;
            return;
        }
        auto zeta_at = [&](double t) { return zeta_row.at_dense(dense_index(grid, t)); };

        const ScalarPath mean_row =
            rk4_forward(grid, coeffs.initial_mean, [&](double t, double y) {
                const double eta_t = sample_dense(eta.eta, t);
                return (gm.g11() + gm.g12() * eta_t) * y + gm.g12() * zeta_at(t) +
                       gm.z1() * zhat_at(t);
            });
        for (int j = 0; j < samples; ++j) {
            sol.zeta(row, j) = zeta_row.at_dense(j);
            sol.mean(row, j) = mean_row.at_dense(j);
        }
    });
    for (int i = 0; i < m_count; ++i) {
        if (failed[static_cast<std::size_t>(i)]) {
            throw numerical_error("costate offset exceeded the blow-up cap",
                                  escape_times[static_cast<std::size_t>(i)]);
        }
    }

    // Index-independent variance of the state about its mean.
    sol.variance = rk4_forward(grid, coeffs.initial_variance, [&](double t, double v) {
        const double eta_t = sample_dense(eta.eta, t);
        return 2.0 * (gm.g11() + gm.g12() * eta_t) * v + 1.0;
    });

    // Structural diagnostics. The offset must equal its modal sum, and the
    // truncated kernel operator applied to the mean must reproduce the
    // aggregate (the modal coefficients of the mean scale to z exactly).
    sol.zeta_modal_residual =
        (sol.zeta - sg.eigenfunctions() * v_coeff).cwiseAbs().maxCoeff();
    sol.operator_consistency_residual =
        (sg.operator_matrix() * sol.mean - sol.zhat).cwiseAbs().maxCoeff();
    return sol;
}

double EquilibriumSolution::surface_at(const Eigen::MatrixXd& surface, double x, double t) const {
    const auto rows = surface.rows();
    const auto cols = surface.cols();

    double ux = x * static_cast<double>(rows) - 0.5;  // node i sits at (i+1/2)/rows
    ux = std::clamp(ux, 0.0, static_cast<double>(rows - 1));
    const auto i0 = std::min(static_cast<Eigen::Index>(ux), rows - 2 >= 0 ? rows - 2 : 0);
    const double fx = rows > 1 ? ux - static_cast<double>(i0) : 0.0;

    double ut = t / (0.5 * grid.dt());
    ut = std::clamp(ut, 0.0, static_cast<double>(cols - 1));
    const auto j0 = std::min(static_cast<Eigen::Index>(ut), cols - 2);
    const double ft = ut - static_cast<double>(j0);

    const auto i1 = rows > 1 ? i0 + 1 : i0;
    const double lo = (1.0 - ft) * surface(i0, j0) + ft * surface(i0, j0 + 1);
    const double hi = (1.0 - ft) * surface(i1, j0) + ft * surface(i1, j0 + 1);
    return (1.0 - fx) * lo + fx * hi;
}

double feedback_control(const EquilibriumSolution& sol, double x, double t, double state) {
    const double eta_t = sol.eta.eta.at_time(t);
    return feedback_state_gain(sol.coefficients, eta_t) * state +
           feedback_offset(sol.coefficients, sol.zhat_at(x, t), sol.zeta_at(x, t));
}

EquilibriumSolution solve_equilibrium(const GameCoefficients& coeffs, const Graphon& graphon,
                                      const SolverOptions& options) {
    coeffs.validate();
    const GammaMatrices gm = assemble_gamma(coeffs, options.aggregate_costate_literal);

    const SpectralGraphon sg = graphon.decompose(options.k_modes, options.grid_size);
    if (sg.truncation_residual() > options.max_truncation_residual) {
        std::ostringstream msg;
        msg << "spectral truncation leaves " << sg.truncation_residual()
            << " of squared kernel mass unresolved (limit " << options.max_truncation_residual
            << "); raise the mode count";
        throw numerical_error(msg.str());
    }

    const double dt = options.dt > 0.0 ? options.dt : coeffs.horizon / 2000.0;
    const RiccatiSolution eta = solve_eta(gm, coeffs.horizon, dt, options.blowup_cap);

    const std::vector<double> initial_modes = project_initial(sg, coeffs.initial_mean);
    std::vector<ModeTrajectory> modes =
        solve_modes(gm, eta, sg, initial_modes, options.blowup_cap);
    return reconstruct(gm, eta, sg, std::move(modes), coeffs, options.threads);
}

FixedPointResult fixed_point_oracle(const GammaMatrices& gm, const RiccatiSolution& eta,
                                    const SpectralGraphon& sg, double m0, double dt, double tol,
                                    int max_iter, double damping, bool full_kernel) {
    if (tol <= 0.0 || max_iter < 1) throw std::invalid_argument("tol and max_iter must be positive");
    if (damping < 0.0 || damping >= 1.0) throw std::invalid_argument("damping must lie in [0,1)");

    const double horizon = eta.eta.grid.horizon();
    const TimeGrid grid(horizon, intervals_for(horizon, dt));

    // Every oracle stage time must land on a stored eta sample.
    const double step_ratio = dt / eta.eta.grid.dt();
    const auto refine = static_cast<int>(std::llround(step_ratio));
    if (refine < 1 || std::abs(step_ratio - refine) > 1e-9) {
        throw std::invalid_argument("oracle step must be an integer multiple of the eta step");
    }
    const int samples = grid.samples();
    std::vector<double> eta_dense(static_cast<std::size_t>(samples));
    for (int j = 0; j < samples; ++j) {
        eta_dense[static_cast<std::size_t>(j)] = eta.eta.at_dense(j * refine);
    }
    auto eta_at = [&](double t) {
        return eta_dense[static_cast<std::size_t>(dense_index(grid, t))];
    };

    const int m_count = sg.grid_size();
    const Eigen::MatrixXd op =
        full_kernel ? quadrature_matrix(sg.kernel(), sg.nodes()) : sg.operator_matrix();

    FixedPointResult result{grid, sg.nodes(), Eigen::MatrixXd(), 0, {}};
    // Start from the aggregate induced by the frozen initial mean profile.
    const Eigen::VectorXd z0 = op * Eigen::VectorXd::Constant(m_count, m0);
    result.zhat = z0.replicate(1, samples);

    Eigen::MatrixXd mean(m_count, samples);
    for (int iter = 1; iter <= max_iter; ++iter) {
        for (int i = 0; i < m_count; ++i) {
            const auto row = static_cast<Eigen::Index>(i);
            auto zhat_at = [&](double t) { return result.zhat(row, dense_index(grid, t)); };

            ScalarPath zeta_row(grid);
            double escape = 0.0;
            const bool ok = rk4_backward(
                grid, gm.t2() * result.zhat(row, samples - 1),
                [&](double t, double y) {
                    return y * (gm.g22() - gm.g12() * eta_at(t)) +
                           zhat_at(t) * (gm.z2() - gm.z1() * eta_at(t));
                },
                zeta_row, 1e12, &escape);
            if (!ok) {
                throw numerical_error("fixed-point offset exceeded the blow-up cap", escape);
            }
            const ScalarPath mean_row = rk4_forward(grid, m0, [&](double t, double y) {
                return (gm.g11() + gm.g12() * eta_at(t)) * y +
                       gm.g12() * zeta_row.at_dense(dense_index(grid, t)) +
                       gm.z1() * zhat_at(t);
            });
            for (int j = 0; j < samples; ++j) mean(row, j) = mean_row.at_dense(j);
        }

        const Eigen::MatrixXd next = op * mean;
        const double change = (next - result.zhat).cwiseAbs().maxCoeff();
        result.residual_history.push_back(change);
        result.iterations = iter;
        if (damping > 0.0) {
            result.zhat = damping * result.zhat + (1.0 - damping) * next;
        } else {
            result.zhat = next;
        }
        if (change < tol) return result;
    }

    std::ostringstream msg;
    msg << "fixed-point iteration did not converge in " << max_iter << " sweeps; last changes:";
    const std::size_t tail = std::min<std::size_t>(5, result.residual_history.size());
    for (std::size_t j = result.residual_history.size() - tail; j < result.residual_history.size();
         ++j) {
        msg << ' ' << result.residual_history[j];
    }
    throw numerical_error(msg.str());
}

}  // namespace glq
