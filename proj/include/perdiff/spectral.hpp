#pragma once

// Hermite(p) x Fourier(q) Galerkin discretisation of the cell problem -L phi = p for the
// rescaled kinetic generator L = gamma^-1 (p d_q - V' d_p) + beta^-1 d_p^2 - p d_p.
//
// Basis functions h_n(p) psi_k(q), orthonormal in L^2(mu), mu ~ exp(-beta H):
//   h_n(p)   = He_n(sqrt(beta) p) / sqrt(n!)
//   psi_k(q) = sqrt(Z / l) exp(beta V(q) / 2) exp(2 pi i k q / l),   |k| <= K.
// In this basis the OU part is diag(n), the Liouville part is anti-Hermitian and couples
// n to n +- 1 through ladder factors and a convolution with the Fourier coefficients of V'.

#include <complex>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "perdiff/estimate.hpp"
#include "perdiff/potential.hpp"

namespace perdiff::spectral {

using cplx = std::complex<double>;

struct GalerkinBasis {
    int n_hermite = 64;  // levels n = 0 .. n_hermite-1
    int n_fourier = 32;  // modes k = -n_fourier .. n_fourier
    double beta = 1.0;

    int modes() const { return 2 * n_fourier + 1; }
    /// Unknowns after removing the (n=0, k=0) element.
    long size() const { return static_cast<long>(n_hermite) * modes() - 1; }
    void validate() const;
};

/// Hermite levels grow like 1/gamma (slow energy exchange at small friction); Fourier modes
/// grow like sqrt(beta).
GalerkinBasis default_basis(double gamma, double beta);

/// -L on the mean-zero subspace, i.e. with the (0, 0) element deleted.
struct GalerkinOperator {
    PeriodicPotential V;
    GalerkinBasis basis;
    double gamma = 1.0;
    double beta = 1.0;
    double Z = 1.0;                  // integral of exp(-beta V) over one period
    std::vector<cplx> dv;            // Fourier coefficients of V', index m + mode_count
    int mode_count = 0;              // highest harmonic of V
    std::vector<cplx> unit;          // coefficients of the constant 1 on psi_k, index k + K
    Eigen::SparseMatrix<cplx, Eigen::RowMajor> matrix;

    /// Position of (n, k) in the packed unknown vector; -1 for the deleted (0, 0).
    long index(int n, int k) const;
    /// Coefficient vector of the function p.
    Eigen::VectorXcd rhs() const;
};

/// Throws TruncationError if V has harmonics beyond basis.n_fourier.
GalerkinOperator assemble(const PeriodicPotential& V, double beta, double gamma, const GalerkinBasis& basis);

struct CellSolution {
    Eigen::MatrixXcd coeffs;  // n_hermite x modes, coeffs(0, K) == 0
    GalerkinBasis basis;
    PeriodicPotential V;
    double gamma = 0.0;
    double beta = 0.0;
    double Z = 1.0;
    double residual_norm = 0.0;        // ||b - M x|| / ||b||
    double truncation_estimate = 0.0;  // relative change of D when both truncations are halved
    double d_inner = 0.0;              // gamma^-1 <p, phi>
    double d_energy = 0.0;             // (gamma beta)^-1 ||d_p phi||^2
    int refinement_steps = 0;
};

/// Direct block-tridiagonal elimination over Hermite levels (a matrix continued fraction),
/// followed by iterative refinement to a residual of 1e-10 ||b||. Throws SolverStall.
/// With `estimate_truncation` the problem is solved again on the halved basis.
CellSolution solve_cell(const GalerkinOperator& op, bool estimate_truncation = true);

/// Mean of both diffusivity formulas; throws InconsistentFormulas if they differ by > 1e-4.
DiffusionEstimate deff_spectral(const CellSolution& sol);

/// Relative difference between the two diffusivity formulas.
double formula_discrepancy(const CellSolution& sol);

/// Basis used for dense eigenvalue computations.
GalerkinBasis default_gap_basis(double beta);

/// Smallest real part among the nonzero eigenvalues of -L, from a dense eigensolve of the
/// truncated operator including the constant mode (whose near-zero eigenvalue is dropped).
/// Throws EigSolverFailure.
double spectral_gap(const PeriodicPotential& V, double beta, double gamma, const GalerkinBasis& basis);
double spectral_gap(const GalerkinOperator& op);

/// All eigenvalues of the truncated -L including the constant mode.
Eigen::VectorXcd operator_eigenvalues(const PeriodicPotential& V, double beta, double gamma,
                                      const GalerkinBasis& basis);

/// || d_p phi ||_{L^p(mu)} from a Gauss-Hermite (p) x trapezoid (q) tensor rule.
double lp_norm_dp_phi(const CellSolution& sol, double exponent = 4.0);

/// Probabilists' Gauss-Hermite rule for exp(-x^2/2)/sqrt(2 pi). Returns nodes and the
/// quantities w_i exp(x_i^2 / 2), which stay representable for large rules.
struct HermiteRule {
    std::vector<double> nodes;
    std::vector<double> scaled_weights;
};
HermiteRule gauss_hermite(int n);

}  // namespace perdiff::spectral
