// ---------------------------------------------------------------------------
// graphon.hpp
//
// Graphon kernels and their spectral form.
//
// A graphon is a symmetric measurable kernel w : [0,1]^2 -> [0,1]. It induces
// a compact self-adjoint integral operator on L^2([0,1]),
//
//     [Wf](x) = ∫_0^1 w(x,y) f(y) dy = Σ_k λ_k φ_k(x) ⟨f, φ_k⟩,
//
// with real square-summable eigenvalues λ_k and an orthonormal eigenbasis
// φ_k. The equilibrium solver works in this eigenbasis, so the central
// operation here is producing (λ_k, φ_k) pairs that are *exactly* consistent
// with the discrete inner product in use.
//
// Discretization: all inner products use the midpoint rule on M uniform
// nodes x_i = (i+1/2)/M. Supported families:
//
//   Constant(κ):  w = κ.           Rank 1: λ = κ, φ ≡ 1.
//   PowerLaw(γ):  w = (xy)^{-γ}, γ ≤ 0.  Rank 1: λ = (1-2γ)^{-1},
//                 φ(x) = sqrt(1-2γ) x^{-γ}  (unit L^2 norm, λφφ = w).
//   MinMax:       w = min(x,y)(1-max(x,y)).  Infinite rank:
//                 λ_k = (πk)^{-2}, φ_k(x) = √2 sin(πkx); Σλ_k² = 1/90.
//   Grid:         piecewise-constant on an M0×M0 cell matrix (values in
//                 [0,1], symmetric); eigenpairs from the symmetric Nyström
//                 discretization.
//
// Grid calibration: analytic eigenfunctions are returned rescaled by
// 1/sqrt(q) with q = (1/M) Σ_i φ(x_i)^2, and eigenvalues by q, so that
// grid-orthonormality is exact and rank-1 kernels reproduce w(x_i, x_j)
// exactly on the nodes. For Constant and MinMax q = 1 already (midpoint
// cosine sums vanish for mode order below the grid size); for PowerLaw the
// correction is O(1e-5) at M = 200 and removes a quadrature artifact that
// would otherwise dominate solver-accuracy comparisons.
// ---------------------------------------------------------------------------
#pragma once

#include <Eigen/Dense>
#include <string_view>
#include <vector>

namespace glq {

enum class GraphonFamily { constant, power_law, min_max, grid };

[[nodiscard]] constexpr std::string_view to_string(GraphonFamily f) {
    switch (f) {
        case GraphonFamily::constant: return "constant";
        case GraphonFamily::power_law: return "power_law";
        case GraphonFamily::min_max: return "min_max";
        case GraphonFamily::grid: return "grid";
    }
    return "unknown";
}

class SpectralGraphon;

// Value-semantic kernel description.
class Graphon {
public:
    // w(x,y) = level on [0,1]^2; level in [0,1].
    static Graphon constant(double level);
    // w(x,y) = (xy)^{-gamma}, gamma <= 0 (gamma = 0 degenerates to Constant(1)).
    static Graphon power_law(double gamma);
    // w(x,y) = min(x,y) (1 - max(x,y)).
    static Graphon min_max();
    // Piecewise-constant kernel from a symmetric cell matrix with entries in [0,1].
    static Graphon grid(Eigen::MatrixXd cell_values);

    [[nodiscard]] GraphonFamily family() const noexcept { return family_; }
    [[nodiscard]] double constant_level() const noexcept { return param_; }
    [[nodiscard]] double power_law_exponent() const noexcept { return param_; }
    [[nodiscard]] const Eigen::MatrixXd& cells() const noexcept { return cells_; }

    // Pointwise kernel evaluation; x, y in [0,1].
    [[nodiscard]] double kernel(double x, double y) const;

    // Squared Hilbert-Schmidt norm ‖w‖²_{L²([0,1]²)}, in closed form per family.
    [[nodiscard]] double hs_norm_sq() const;

    // Spectral form: the leading k_modes eigenpairs calibrated to the
    // grid_size-point midpoint grid (analytic families cap k_modes at their
    // rank). Throws numerical_error if the dense eigensolver fails (grid
    // family only).
    [[nodiscard]] SpectralGraphon decompose(int k_modes, int grid_size) const;

    // Pairwise weight matrix w(x_i, x_j) for sampled player indices.
    [[nodiscard]] Eigen::MatrixXd sample_weights(const std::vector<double>& indices) const;

private:
    Graphon(GraphonFamily f, double param) : family_(f), param_(param) {}
    GraphonFamily family_;
    double param_ = 0.0;       // level (constant) or gamma (power_law)
    Eigen::MatrixXd cells_;    // grid family only
};

// Truncated spectral form of a graphon on the midpoint grid.
class SpectralGraphon {
public:
    SpectralGraphon(Graphon kernel, int grid_size, std::vector<double> eigenvalues,
                    Eigen::MatrixXd eigenfunctions, std::vector<double> analytic_scales);

    [[nodiscard]] const Graphon& kernel() const noexcept { return kernel_; }
    [[nodiscard]] int grid_size() const noexcept { return static_cast<int>(nodes_.size()); }
    [[nodiscard]] const std::vector<double>& nodes() const noexcept { return nodes_; }
    [[nodiscard]] int mode_count() const noexcept { return static_cast<int>(eigenvalues_.size()); }
    [[nodiscard]] const std::vector<double>& eigenvalues() const noexcept { return eigenvalues_; }
    [[nodiscard]] double eigenvalue(int k) const { return eigenvalues_.at(static_cast<std::size_t>(k)); }

    // Eigenfunction values on the grid: column k = φ_k(x_·).
    [[nodiscard]] const Eigen::MatrixXd& eigenfunctions() const noexcept { return eigenfunctions_; }

    // φ_k at an arbitrary index: closed form for analytic families, linear
    // interpolation between grid nodes for grid kernels.
    [[nodiscard]] double eigenfunction_at(int k, double x) const;

    // ‖w‖²_{L²} − Σ_{k≤K} λ_k²  (clamped at 0; see header note on calibration).
    [[nodiscard]] double truncation_residual() const noexcept { return truncation_residual_; }

    // Midpoint-quadrature inner product on the grid, (1/M) Σ f_i g_i.
    [[nodiscard]] double grid_inner(const Eigen::VectorXd& f, const Eigen::VectorXd& g) const;

    // Truncated operator application, Σ_{k≤K} λ_k φ_k ⟨f, φ_k⟩ with the grid
    // inner product. f must live on the grid.
    [[nodiscard]] Eigen::VectorXd apply_operator(const Eigen::VectorXd& f_on_grid) const;

    // The truncated operator as an M×M matrix acting on grid functions:
    // Φ Λ Φᵀ / M. This is the operator the solver actually uses; quadrature
    // against the raw kernel is available via quadrature_matrix() below.
    [[nodiscard]] Eigen::MatrixXd operator_matrix() const;

private:
    Graphon kernel_;
    std::vector<double> nodes_;
    std::vector<double> eigenvalues_;
    Eigen::MatrixXd eigenfunctions_;       // M × K
    std::vector<double> analytic_scales_;  // per-mode calibration factor; empty => interpolate
    double truncation_residual_ = 0.0;
};

// Midpoint nodes x_i = (i+1/2)/M.
[[nodiscard]] std::vector<double> midpoint_nodes(int grid_size);

// Raw-kernel quadrature operator matrix, w(x_i, x_j)/M. Untruncated
// counterpart of SpectralGraphon::operator_matrix() for diagnostics.
[[nodiscard]] Eigen::MatrixXd quadrature_matrix(const Graphon& g, const std::vector<double>& nodes);

}  // namespace glq
