#include "graphon_lq/graphon.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "graphon_lq/errors.hpp"

namespace glq {

namespace {

constexpr double pi = std::numbers::pi;

void require_unit_interval(double v, const char* name) {
    if (!(v >= 0.0 && v <= 1.0))
        throw std::invalid_argument(std::string(name) + " must lie in [0,1]");
}

}  // namespace

// ---------------------------------------------------------------------------
// Graphon construction and pointwise evaluation
// ---------------------------------------------------------------------------

Graphon Graphon::constant(double level) {
    require_unit_interval(level, "constant graphon level");
    return Graphon(GraphonFamily::constant, level);
}

Graphon Graphon::power_law(double gamma) {
    // gamma <= 0 keeps the kernel bounded by 1 on the unit square (exponent
    // -gamma >= 0) and square-integrable: ‖w‖² = (1-2γ)^{-2}.
    if (!(gamma <= 0.0)) throw std::invalid_argument("power-law exponent gamma must be <= 0");
    return Graphon(GraphonFamily::power_law, gamma);
}

Graphon Graphon::min_max() { return Graphon(GraphonFamily::min_max, 0.0); }

Graphon Graphon::grid(Eigen::MatrixXd cell_values) {
    if (cell_values.rows() == 0 || cell_values.rows() != cell_values.cols())
        throw std::invalid_argument("grid graphon needs a nonempty square cell matrix");
    const double asym = (cell_values - cell_values.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-12) throw std::invalid_argument("grid graphon cell matrix must be symmetric");
    if (cell_values.minCoeff() < 0.0 || cell_values.maxCoeff() > 1.0)
        throw std::invalid_argument("grid graphon cells must lie in [0,1]");
    Graphon g(GraphonFamily::grid, 0.0);
    g.cells_ = std::move(cell_values);
    return g;
}

double Graphon::kernel(double x, double y) const {
    require_unit_interval(x, "index x");
    require_unit_interval(y, "index y");
    switch (family_) {
        case GraphonFamily::constant: return param_;
        case GraphonFamily::power_law: return std::pow(x * y, -param_);
        case GraphonFamily::min_max: return std::min(x, y) * (1.0 - std::max(x, y));
        case GraphonFamily::grid: {
            const auto m0 = static_cast<int>(cells_.rows());
            const int i = std::min(static_cast<int>(x * m0), m0 - 1);
            const int j = std::min(static_cast<int>(y * m0), m0 - 1);
            return cells_(i, j);
        }
    }
    throw std::logic_error("unreachable graphon family");
}

double Graphon::hs_norm_sq() const {
    switch (family_) {
        case GraphonFamily::constant: return param_ * param_;
        case GraphonFamily::power_law: {
            // ∫∫ (xy)^{-2γ} = ((1-2γ)^{-1})² = λ², consistent with rank 1.
            const double lam = 1.0 / (1.0 - 2.0 * param_);
            return lam * lam;
        }
        case GraphonFamily::min_max:
            // Σ_k (πk)^{-4} = π^{-4} · π^4/90.
            return 1.0 / 90.0;
        case GraphonFamily::grid: {
            const auto m0 = static_cast<double>(cells_.rows());
            return cells_.squaredNorm() / (m0 * m0);
        }
    }
    throw std::logic_error("unreachable graphon family");
}

std::vector<double> midpoint_nodes(int grid_size) {
    if (grid_size < 1) throw std::invalid_argument("grid_size must be positive");
    std::vector<double> nodes(static_cast<std::size_t>(grid_size));
    for (int i = 0; i < grid_size; ++i)
        nodes[static_cast<std::size_t>(i)] = (i + 0.5) / grid_size;
    return nodes;
}

Eigen::MatrixXd Graphon::sample_weights(const std::vector<double>& indices) const {
    const auto n = static_cast<Eigen::Index>(indices.size());
    Eigen::MatrixXd w(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i; j < n; ++j) {
            const double v = kernel(indices[static_cast<std::size_t>(i)],
                                    indices[static_cast<std::size_t>(j)]);
            w(i, j) = v;
            w(j, i) = v;
        }
    }
    return w;
}

Eigen::MatrixXd quadrature_matrix(const Graphon& g, const std::vector<double>& nodes) {
    Eigen::MatrixXd wq = g.sample_weights(nodes);
    wq /= static_cast<double>(nodes.size());
    return wq;
}

// ---------------------------------------------------------------------------
// Spectral decomposition
// ---------------------------------------------------------------------------

namespace {

// Calibrate one analytic eigenpair to the grid: with q = (1/M) Σ φ(x_i)²,
// return (λq, φ/√q). Rank-1 kernels then satisfy λ̃ φ̃(x_i) φ̃(x_j) = w(x_i,x_j)
// exactly, and grid-orthonormality is exact by construction.
struct CalibratedMode {
    double eigenvalue;
    Eigen::VectorXd values;
    double scale;  // multiply raw φ(x) by this to get the calibrated value
};

template <class Phi>
CalibratedMode calibrate(double lambda, const std::vector<double>& nodes, Phi&& phi) {
    const auto m = static_cast<Eigen::Index>(nodes.size());
    Eigen::VectorXd raw(m);
    for (Eigen::Index i = 0; i < m; ++i) raw(i) = phi(nodes[static_cast<std::size_t>(i)]);
    const double q = raw.squaredNorm() / static_cast<double>(m);
    const double scale = 1.0 / std::sqrt(q);
    return {lambda * q, raw * scale, scale};
}

}  // namespace

SpectralGraphon Graphon::decompose(int k_modes, int grid_size) const {
    if (k_modes < 1) throw std::invalid_argument("k_modes must be >= 1");
    if (grid_size < k_modes) throw std::invalid_argument("grid_size must be >= k_modes");
    const std::vector<double> nodes = midpoint_nodes(grid_size);
    const auto m = static_cast<Eigen::Index>(grid_size);

    std::vector<double> eigenvalues;
    std::vector<double> scales;
    Eigen::MatrixXd phi;

    switch (family_) {
        case GraphonFamily::constant: {
            if (param_ > 0.0) {
                auto mode = calibrate(param_, nodes, [](double) { return 1.0; });
                eigenvalues = {mode.eigenvalue};
                scales = {mode.scale};
                phi = mode.values;
            } else {
                phi.resize(m, 0);  // the zero kernel has no nonzero modes
            }
            break;
        }
        case GraphonFamily::power_law: {
            const double gamma = param_;
            const double lam = 1.0 / (1.0 - 2.0 * gamma);
            const double norm = std::sqrt(1.0 - 2.0 * gamma);
            auto mode = calibrate(lam, nodes,
                                  [gamma, norm](double x) { return norm * std::pow(x, -gamma); });
            eigenvalues = {mode.eigenvalue};
            scales = {mode.scale};
            phi = mode.values;
            break;
        }
        case GraphonFamily::min_max: {
            // Exact grid-orthonormality of the sine modes needs k < M (the
            // midpoint cosine sums vanish only below the aliasing order).
            if (k_modes >= grid_size)
                throw std::invalid_argument("min_max decomposition needs grid_size > k_modes");
            phi.resize(m, k_modes);
            eigenvalues.reserve(static_cast<std::size_t>(k_modes));
            scales.reserve(static_cast<std::size_t>(k_modes));
            for (int k = 1; k <= k_modes; ++k) {
                const double lam = 1.0 / (pi * pi * k * k);
                auto mode = calibrate(
                    lam, nodes, [k](double x) { return std::numbers::sqrt2 * std::sin(pi * k * x); });
                eigenvalues.push_back(mode.eigenvalue);
                scales.push_back(mode.scale);
                phi.col(k - 1) = mode.values;
            }
            break;
        }
        case GraphonFamily::grid: {
            // Symmetric Nyström: eigenpairs of (1/M) w(x_i, x_j); unit-norm
            // discrete eigenvectors rescale by √M to grid-orthonormal
            // functions ((1/M) Σ φ² = 1).
            const Eigen::MatrixXd wq = quadrature_matrix(*this, nodes);
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(wq);
            if (solver.info() != Eigen::Success)
                throw numerical_error("grid graphon eigensolver failed to converge");
            std::vector<Eigen::Index> order(static_cast<std::size_t>(m));
            std::iota(order.begin(), order.end(), 0);
            const auto& vals = solver.eigenvalues();
            std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
                return std::abs(vals(a)) > std::abs(vals(b));
            });
            const int keep = std::min<int>(k_modes, grid_size);
            phi.resize(m, keep);
            eigenvalues.reserve(static_cast<std::size_t>(keep));
            const double root_m = std::sqrt(static_cast<double>(m));
            for (int k = 0; k < keep; ++k) {
                const Eigen::Index src = order[static_cast<std::size_t>(k)];
                eigenvalues.push_back(vals(src));
                Eigen::VectorXd v = solver.eigenvectors().col(src) * root_m;
                // Deterministic sign: largest-magnitude component positive.
                Eigen::Index argmax = 0;
                v.cwiseAbs().maxCoeff(&argmax);
                if (v(argmax) < 0.0) v = -v;
                phi.col(k) = v;
            }
            break;
        }
    }

    return SpectralGraphon(*this, grid_size, std::move(eigenvalues), std::move(phi),
                           std::move(scales));
}

// ---------------------------------------------------------------------------
// SpectralGraphon
// ---------------------------------------------------------------------------

SpectralGraphon::SpectralGraphon(Graphon kernel, int grid_size, std::vector<double> eigenvalues,
                                 Eigen::MatrixXd eigenfunctions,
                                 std::vector<double> analytic_scales)
    : kernel_(std::move(kernel)),
      nodes_(midpoint_nodes(grid_size)),
      eigenvalues_(std::move(eigenvalues)),
      eigenfunctions_(std::move(eigenfunctions)),
      analytic_scales_(std::move(analytic_scales)) {
    const double energy = std::inner_product(eigenvalues_.begin(), eigenvalues_.end(),
                                             eigenvalues_.begin(), 0.0);
    truncation_residual_ = std::max(0.0, kernel_.hs_norm_sq() - energy);
}

double SpectralGraphon::eigenfunction_at(int k, double x) const {
    if (k < 0 || k >= mode_count()) throw std::invalid_argument("eigenfunction index out of range");
    if (!(x >= 0.0 && x <= 1.0)) throw std::invalid_argument("index x must lie in [0,1]");
    if (!analytic_scales_.empty()) {
        const double scale = analytic_scales_[static_cast<std::size_t>(k)];
        switch (kernel_.family()) {
            case GraphonFamily::constant: return scale;
            case GraphonFamily::power_law: {
                const double gamma = kernel_.power_law_exponent();
                return scale * std::sqrt(1.0 - 2.0 * gamma) * std::pow(x, -gamma);
            }
            case GraphonFamily::min_max:
                return scale * std::numbers::sqrt2 * std::sin(pi * (k + 1) * x);
            case GraphonFamily::grid: break;  // grid kernels carry no analytic form
        }
    }
    // Linear interpolation between midpoint nodes, clamped at the ends.
    const auto m = static_cast<double>(grid_size());
    const double u = x * m - 0.5;
    if (u <= 0.0) return eigenfunctions_(0, k);
    const auto last = static_cast<double>(grid_size() - 1);
    if (u >= last) return eigenfunctions_(grid_size() - 1, k);
    const auto i = static_cast<Eigen::Index>(u);
    const double frac = u - static_cast<double>(i);
    return (1.0 - frac) * eigenfunctions_(i, k) + frac * eigenfunctions_(i + 1, k);
}

double SpectralGraphon::grid_inner(const Eigen::VectorXd& f, const Eigen::VectorXd& g) const {
    if (f.size() != grid_size() || g.size() != grid_size())
        throw std::invalid_argument("grid_inner: vector length does not match the grid");
    return f.dot(g) / static_cast<double>(grid_size());
}

Eigen::VectorXd SpectralGraphon::apply_operator(const Eigen::VectorXd& f_on_grid) const {
    if (f_on_grid.size() != grid_size())
        throw std::invalid_argument("apply_operator: vector length does not match the grid");
    if (mode_count() == 0) return Eigen::VectorXd::Zero(grid_size());
    Eigen::VectorXd coeffs =
        eigenfunctions_.transpose() * f_on_grid / static_cast<double>(grid_size());
    for (int k = 0; k < mode_count(); ++k) coeffs(k) *= eigenvalues_[static_cast<std::size_t>(k)];
    return eigenfunctions_ * coeffs;
}

Eigen::MatrixXd SpectralGraphon::operator_matrix() const {
    if (mode_count() == 0) return Eigen::MatrixXd::Zero(grid_size(), grid_size());
    Eigen::VectorXd lam = Eigen::Map<const Eigen::VectorXd>(
        eigenvalues_.data(), static_cast<Eigen::Index>(eigenvalues_.size()));
    return eigenfunctions_ * lam.asDiagonal() * eigenfunctions_.transpose() /
           static_cast<double>(grid_size());
}

}  // namespace glq
