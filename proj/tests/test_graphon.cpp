// Tests for the graphon kernels and their grid-calibrated spectral form.
//
// Expected values come from closed-form evaluations done independently of the
// library code: rank-1 eigenpairs reproduce the kernel exactly on the grid,
// the min/max kernel has λ_k = (πk)^{-2} with Σλ_k² = 1/90, and the
// stochastic-block kernel reduces to a 2×2 matrix eigenproblem.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "graphon_lq/graphon.hpp"

using namespace glq;

namespace {
constexpr double pi = std::numbers::pi;

// Independent tail oracle: Σ_{k>K} (πk)^{-4}, summed smallest-first in long
// double. The neglected remainder beyond 10^6 is below 1/(3 π^4 10^18).
double minmax_truncation_tail(int K) {
    long double acc = 0.0L;
    for (int k = 1000000; k > K; --k) {
        const long double pk = static_cast<long double>(pi) * k;
        acc += 1.0L / (pk * pk * pk * pk);
    }
    return static_cast<double>(acc);
}
}  // namespace

TEST_CASE("constant graphon is rank one with a flat eigenfunction") {
    const Graphon g = Graphon::constant(1.0);
    const SpectralGraphon sg = g.decompose(3, 50);  // extra requested modes collapse to rank
    REQUIRE(sg.mode_count() == 1);
    CHECK(sg.eigenvalue(0) == doctest::Approx(1.0).epsilon(1e-14));
    for (int i = 0; i < sg.grid_size(); ++i)
        CHECK(sg.eigenfunctions()(i, 0) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(sg.truncation_residual() == doctest::Approx(0.0).epsilon(1e-14));

    const Graphon half = Graphon::constant(0.5);
    const SpectralGraphon sg_half = half.decompose(1, 50);
    CHECK(sg_half.eigenvalue(0) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(sg_half.truncation_residual() <= 1e-15);
}

TEST_CASE("power-law graphon: eigenvalue (1-2g)^{-1} and exact rank-1 grid reproduction") {
    const double gamma = -0.4;
    const Graphon g = Graphon::power_law(gamma);
    const SpectralGraphon sg = g.decompose(1, 200);
    REQUIRE(sg.mode_count() == 1);

    // Continuum eigenvalue 1/1.8; calibration perturbs it by O(1e-5) at M=200.
    CHECK(sg.eigenvalue(0) == doctest::Approx(1.0 / 1.8).epsilon(1e-4));

    // Grid-orthonormality is exact after calibration.
    const Eigen::VectorXd phi = sg.eigenfunctions().col(0);
    CHECK(sg.grid_inner(phi, phi) == doctest::Approx(1.0).epsilon(1e-14));

    // Rank-1 exactness: λ φ(x_i) φ(x_j) = w(x_i, x_j) on every node pair.
    double worst = 0.0;
    for (int i = 0; i < 200; i += 7) {
        for (int j = 0; j < 200; j += 11) {
            const double xi = sg.nodes()[static_cast<std::size_t>(i)];
            const double xj = sg.nodes()[static_cast<std::size_t>(j)];
            const double recon = sg.eigenvalue(0) * phi(i) * phi(j);
            worst = std::max(worst, std::abs(recon - g.kernel(xi, xj)));
        }
    }
    CHECK(worst <= 1e-13);

    // The analytic evaluator agrees with the stored grid values.
    CHECK(sg.eigenfunction_at(0, sg.nodes()[17]) == doctest::Approx(phi(17)).epsilon(1e-14));
}

TEST_CASE("min/max graphon: sine eigensystem, exact grid orthonormality, HS tail") {
    const Graphon g = Graphon::min_max();
    const int K = 40, M = 200;
    const SpectralGraphon sg = g.decompose(K, M);
    REQUIRE(sg.mode_count() == K);

    CHECK(sg.eigenvalue(0) == doctest::Approx(1.0 / (pi * pi)).epsilon(1e-12));
    CHECK(sg.eigenvalue(1) == doctest::Approx(1.0 / (4.0 * pi * pi)).epsilon(1e-12));

    // Midpoint-rule cosine sums vanish for mode order below the grid size, so
    // the Gram matrix is the identity to rounding.
    double worst = 0.0;
    for (int a = 0; a < K; ++a) {
        for (int b = a; b < K; ++b) {
            const double ip = sg.grid_inner(sg.eigenfunctions().col(a), sg.eigenfunctions().col(b));
            worst = std::max(worst, std::abs(ip - (a == b ? 1.0 : 0.0)));
        }
    }
    CHECK(worst <= 1e-12);

    CHECK(g.hs_norm_sq() == doctest::Approx(1.0 / 90.0).epsilon(1e-15));
    CHECK(sg.truncation_residual() == doctest::Approx(minmax_truncation_tail(K)).epsilon(1e-6));
    CHECK(sg.truncation_residual() <= 1e-7);  // ≈ 5.3e-8 at K=40

    // Hilbert-Schmidt bound.
    double energy = 0.0;
    for (double lam : sg.eigenvalues()) energy += lam * lam;
    CHECK(energy <= g.hs_norm_sq() + 1e-12);
}

TEST_CASE("min/max HS norm cross-checked by direct double quadrature") {
    const Graphon g = Graphon::min_max();
    const int M = 400;
    const auto nodes = midpoint_nodes(M);
    long double acc = 0.0L;
    for (int i = 0; i < M; ++i)
        for (int j = 0; j < M; ++j) {
            const double w = g.kernel(nodes[static_cast<std::size_t>(i)],
                                      nodes[static_cast<std::size_t>(j)]);
            acc += static_cast<long double>(w) * w;
        }
    const double quad = static_cast<double>(acc) / (static_cast<double>(M) * M);
    CHECK(quad == doctest::Approx(g.hs_norm_sq()).epsilon(2e-5));
}

TEST_CASE("apply_operator is the truncated modal operator") {
    const Graphon g = Graphon::min_max();
    const SpectralGraphon sg = g.decompose(40, 200);

    // Eigenfunction in, eigenvalue-scaled eigenfunction out (exactly, thanks
    // to exact grid orthonormality).
    const Eigen::VectorXd phi2 = sg.eigenfunctions().col(1);
    const Eigen::VectorXd out = sg.apply_operator(phi2);
    CHECK((out - sg.eigenvalue(1) * phi2).cwiseAbs().maxCoeff() <= 1e-12);

    // For f ≡ 1 the continuum image is x(1-x)/2. The truncated operator
    // reproduces it up to the odd-mode tail beyond K=40 — a first-order
    // effect of order 2e-5, far above rounding: the bound below documents
    // the truncated semantics rather than full-kernel quadrature.
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(200);
    const Eigen::VectorXd img = sg.apply_operator(ones);
    double worst = 0.0;
    for (int i = 0; i < 200; ++i) {
        const double x = sg.nodes()[static_cast<std::size_t>(i)];
        worst = std::max(worst, std::abs(img(i) - 0.5 * x * (1.0 - x)));
    }
    CHECK(worst <= 4e-5);
    CHECK(worst >= 1e-6);

    // operator_matrix acts identically to apply_operator.
    const Eigen::VectorXd via_matrix = sg.operator_matrix() * ones;
    CHECK((via_matrix - img).cwiseAbs().maxCoeff() <= 1e-13);
}

TEST_CASE("stochastic-block kernel reduces to the block matrix eigenproblem") {
    Eigen::MatrixXd cells(2, 2);
    cells << 0.8, 0.2, 0.2, 0.6;
    const Graphon g = Graphon::grid(cells);
    const SpectralGraphon sg = g.decompose(2, 200);
    REQUIRE(sg.mode_count() == 2);

    // Operator eigenvalues are those of the cell matrix scaled by the block
    // measure 1/2: (0.7 ± sqrt(0.05)) / 1 -> {0.9236068, 0.4763932} halved.
    const double root = std::sqrt(0.05);
    CHECK(sg.eigenvalue(0) == doctest::Approx(0.5 * (0.7 + root)).epsilon(1e-12));
    CHECK(sg.eigenvalue(1) == doctest::Approx(0.5 * (0.7 - root)).epsilon(1e-12));

    // Eigenfunctions are block-constant; check flatness on each half and
    // grid-orthonormality.
    const Eigen::VectorXd phi1 = sg.eigenfunctions().col(0);
    CHECK(std::abs(phi1(0) - phi1(99)) <= 1e-12);
    CHECK(std::abs(phi1(100) - phi1(199)) <= 1e-12);
    CHECK(sg.grid_inner(phi1, phi1) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(sg.grid_inner(phi1, sg.eigenfunctions().col(1)) ==
          doctest::Approx(0.0).epsilon(1e-12));

    // Nyström reproduces the piecewise-constant kernel exactly (M multiple of
    // the block count): residual is zero.
    CHECK(sg.truncation_residual() <= 1e-12);

    // Interpolated evaluation between grid nodes stays within the block range.
    const double v = sg.eigenfunction_at(0, 0.25);
    CHECK(v == doctest::Approx(phi1(50)).epsilon(1e-10));
}

TEST_CASE("sample_weights returns the symmetric pairwise kernel matrix") {
    const Graphon g = Graphon::min_max();
    const std::vector<double> idx = {0.1, 0.5, 0.9, 0.3};
    const Eigen::MatrixXd w = g.sample_weights(idx);
    REQUIRE(w.rows() == 4);
    CHECK((w - w.transpose()).cwiseAbs().maxCoeff() == 0.0);
    CHECK(w(0, 1) == doctest::Approx(0.1 * 0.5).epsilon(1e-15));   // min .1 * (1 - max .5)
    CHECK(w(2, 2) == doctest::Approx(0.9 * 0.1).epsilon(1e-15));
    CHECK(w.minCoeff() >= 0.0);
    CHECK(w.maxCoeff() <= 1.0);
}

TEST_CASE("quadrature rows of min/max approximate the exact aggregate profile") {
    const Graphon g = Graphon::min_max();
    const auto nodes = midpoint_nodes(200);
    const Eigen::MatrixXd wq = quadrature_matrix(g, nodes);
    const Eigen::VectorXd row_sums = wq * Eigen::VectorXd::Ones(200);
    double worst = 0.0;
    for (int i = 0; i < 200; ++i) {
        const double x = nodes[static_cast<std::size_t>(i)];
        worst = std::max(worst, std::abs(row_sums(i) - 0.5 * x * (1.0 - x)));
    }
    CHECK(worst <= 1e-4);  // midpoint quadrature of a kinked integrand
}

TEST_CASE("parameter validation") {
    CHECK_THROWS_AS(Graphon::constant(1.5), std::invalid_argument);
    CHECK_THROWS_AS(Graphon::power_law(0.2), std::invalid_argument);
    CHECK_THROWS_AS(Graphon::grid(Eigen::MatrixXd::Constant(2, 3, 0.5)), std::invalid_argument);
    Eigen::MatrixXd asym(2, 2);
    asym << 0.1, 0.9, 0.2, 0.3;
    CHECK_THROWS_AS(Graphon::grid(asym), std::invalid_argument);
    CHECK_THROWS_AS((void)Graphon::min_max().decompose(50, 40), std::invalid_argument);
    CHECK_THROWS_AS((void)Graphon::min_max().decompose(200, 200), std::invalid_argument);
    CHECK_THROWS_AS((void)Graphon::constant(1.0).kernel(1.2, 0.5), std::invalid_argument);
    CHECK(to_string(GraphonFamily::power_law) == "power_law");
}
