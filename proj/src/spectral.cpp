#include "perdiff/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "perdiff/errors.hpp"

namespace perdiff::spectral {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kResidualTarget = 1e-10;
constexpr int kMaxRefinements = 4;
// Hermite partial sums do not converge pointwise far out in p (Gaussian L^p, p != 2), so the
// L^p quadrature stops at |sqrt(beta) p| = 8, where the Gaussian mass left out is below 1e-14.
constexpr double kMomentumCutoff = 8.0;

using SparseCol = Eigen::SparseMatrix<cplx>;
using Triplet = Eigen::Triplet<cplx>;

int next_pow2(int n) {
    int m = 1;
    while (m < n) m *= 2;
    return m;
}

// Coefficients of 1 on psi_k: (Z l)^-1/2 * integral exp(-beta V / 2) exp(-2 pi i k q / l) dq.
std::vector<cplx> unit_coefficients(const PeriodicPotential& V, double beta, double Z, int K) {
    const double l = V.period();
    int m = next_pow2(std::max(512, 8 * (2 * K + 1)));
    for (;; m *= 2) {
        std::vector<double> f(m);
        for (int j = 0; j < m; ++j) f[j] = std::exp(-0.5 * beta * V.value(l * j / m));
        auto coefficient = [&](int k) {
            cplx s = 0.0;
            for (int j = 0; j < m; ++j) {
                const double t = -kTwoPi * static_cast<double>((static_cast<long>(k) * j) % m) / m;
                s += f[j] * cplx(std::cos(t), std::sin(t));
            }
            return s * (l / m) / std::sqrt(Z * l);
        };
        // The tail of the sampled spectrum bounds the aliasing error of the kept modes.
        const double tail = std::abs(coefficient(m / 2 - 1));
        if (tail < 1e-16 || m >= (1 << 16)) {
            std::vector<cplx> u(2 * K + 1);
            for (int k = -K; k <= K; ++k) u[k + K] = coefficient(k);
            return u;
        }
    }
}

// hat(j, k) = -gamma^-1 [ beta^-1/2 (2 pi i k / l) delta_jk + sign (sqrt(beta) / 2) v'_{j-k} ];
// sign = +1 for the raising block, -1 for the lowering block. One row or column can be skipped.
SparseCol ladder_block(const GalerkinOperator& op, double sign, int skip_row, int skip_col) {
    const int K = op.basis.n_fourier, d = op.basis.modes(), M = op.mode_count;
    const double l = op.V.period();
    const double a = 1.0 / std::sqrt(op.beta), c = 0.5 * std::sqrt(op.beta);
    auto packed = [](int i, int skip) { return skip < 0 || i < skip ? i : i - 1; };
    std::vector<Triplet> t;
    for (int kc = 0; kc < d; ++kc) {
        if (kc == skip_col) continue;
        const int k = kc - K;
        for (int jr = std::max(0, kc - M); jr <= std::min(d - 1, kc + M); ++jr) {
            if (jr == skip_row) continue;
            cplx v = sign * c * op.dv[jr - kc + M];
            if (jr == kc) v += cplx(0.0, a * kTwoPi * k / l);
            if (v != cplx(0.0)) t.emplace_back(packed(jr, skip_row), packed(kc, skip_col), -v / op.gamma);
        }
    }
    SparseCol m(skip_row < 0 ? d : d - 1, skip_col < 0 ? d : d - 1);
    m.setFromTriplets(t.begin(), t.end());
    return m;
}

// Full (keep_mean) or mean-zero operator in packed indexing.
Eigen::SparseMatrix<cplx, Eigen::RowMajor> build_matrix(const GalerkinOperator& op, bool keep_mean) {
    const int N = op.basis.n_hermite, d = op.basis.modes(), K = op.basis.n_fourier;
    const long removed = keep_mean ? -1 : K;
    auto pos = [&](int n, int kc) -> long {
        const long i = static_cast<long>(n) * d + kc;
        if (removed < 0) return i;
        if (i == removed) return -1;
        return i > removed ? i - 1 : i;
    };
    const SparseCol raise = ladder_block(op, +1.0, -1, -1);
    const SparseCol lower = ladder_block(op, -1.0, -1, -1);
    std::vector<Triplet> t;
    t.reserve(static_cast<std::size_t>(N) * d * (2 * op.mode_count + 3) * 2);
    for (int n = 0; n < N; ++n) {
        for (int kc = 0; kc < d; ++kc) {
            const long col = pos(n, kc);
            if (col < 0) continue;
            if (n > 0) t.emplace_back(col, col, cplx(n));
            if (n + 1 < N) {
                const double s = std::sqrt(n + 1.0);
                for (SparseCol::InnerIterator it(raise, kc); it; ++it) {
                    const long row = pos(n + 1, static_cast<int>(it.row()));
                    t.emplace_back(row, col, s * it.value());
                }
            }
            if (n > 0) {
                const double s = std::sqrt(static_cast<double>(n));
                for (SparseCol::InnerIterator it(lower, kc); it; ++it) {
                    const long row = pos(n - 1, static_cast<int>(it.row()));
                    if (row >= 0) t.emplace_back(row, col, s * it.value());
                }
            }
        }
    }
    const long size = static_cast<long>(N) * d - (keep_mean ? 0 : 1);
    Eigen::SparseMatrix<cplx, Eigen::RowMajor> m(size, size);
    m.setFromTriplets(t.begin(), t.end());
    return m;
}

// Block-tridiagonal elimination over Hermite levels for the mean-zero operator:
//   W_n = (n I - U_n W_{n+1} L_{n+1})^-1,  g_n = W_n (b_n - U_n g_{n+1}),  x_n = g_n - W_n L_n x_{n-1}.
class LevelSolver {
public:
    explicit LevelSolver(const GalerkinOperator& op)
        : N_(op.basis.n_hermite), d_(op.basis.modes()), K_(op.basis.n_fourier),
          raise_(ladder_block(op, +1.0, -1, -1)), lower_(ladder_block(op, -1.0, -1, -1)),
          raise0_(ladder_block(op, +1.0, -1, K_)), lower0_(ladder_block(op, -1.0, K_, -1)),
          W_(N_) {
        W_[N_ - 1] = Eigen::MatrixXcd::Identity(d_, d_) / static_cast<double>(N_ - 1);
        for (int n = N_ - 2; n >= 1; --n) {
            const Eigen::MatrixXcd WL = W_[n + 1] * raise_;
            Eigen::MatrixXcd S = -(n + 1.0) * (lower_ * WL);
            S.diagonal().array() += static_cast<double>(n);
            W_[n] = S.partialPivLu().inverse();
        }
        const Eigen::MatrixXcd WL = W_[1] * raise0_;
        const Eigen::MatrixXcd S = -(lower0_ * WL);
        Eigen::FullPivLU<Eigen::MatrixXcd> lu(S);
        if (!lu.isInvertible()) throw SolverStall("spectral: singular ground level block", 1.0);
        W_[0] = lu.inverse();
    }

    Eigen::VectorXcd solve(const Eigen::VectorXcd& b) const {
        std::vector<Eigen::VectorXcd> g(N_);
        g[N_ - 1] = W_[N_ - 1] * level(b, N_ - 1);
        for (int n = N_ - 2; n >= 0; --n) {
            const double s = std::sqrt(n + 1.0);
            const Eigen::VectorXcd up = n == 0 ? Eigen::VectorXcd(lower0_ * g[1]) : Eigen::VectorXcd(lower_ * g[n + 1]);
            g[n] = W_[n] * (level(b, n) - s * up);
        }
        Eigen::VectorXcd x(b.size());
        Eigen::VectorXcd prev = g[0];
        x.head(d_ - 1) = prev;
        for (int n = 1; n < N_; ++n) {
            const double s = std::sqrt(static_cast<double>(n));
            const Eigen::VectorXcd down = n == 1 ? Eigen::VectorXcd(raise0_ * prev) : Eigen::VectorXcd(raise_ * prev);
            prev = g[n] - s * (W_[n] * down);
            x.segment(offset(n), d_) = prev;
        }
        return x;
    }

private:
    long offset(int n) const { return n == 0 ? 0 : static_cast<long>(n) * d_ - 1; }
    Eigen::VectorXcd level(const Eigen::VectorXcd& v, int n) const {
        return v.segment(offset(n), n == 0 ? d_ - 1 : d_);
    }

    int N_, d_, K_;
    SparseCol raise_, lower_, raise0_, lower0_;
    std::vector<Eigen::MatrixXcd> W_;
};

GalerkinOperator prepare(const PeriodicPotential& V, double beta, double gamma, const GalerkinBasis& basis) {
    if (!(beta > 0.0) || !std::isfinite(beta)) throw DomainError("spectral: beta must be positive");
    if (!(gamma > 0.0) || !std::isfinite(gamma)) throw DomainError("spectral: gamma must be positive");
    basis.validate();
    if (V.mode_count() > basis.n_fourier)
        throw TruncationError("spectral: potential has " + std::to_string(V.mode_count()) +
                              " harmonics but the basis keeps only " + std::to_string(basis.n_fourier));
    GalerkinOperator op;
    op.V = V;
    op.basis = basis;
    op.basis.beta = beta;
    op.beta = beta;
    op.gamma = gamma;
    op.Z = partition_scalars(V, beta).Z;
    op.mode_count = V.mode_count();
    op.dv.resize(2 * op.mode_count + 1);
    for (int m = -op.mode_count; m <= op.mode_count; ++m) op.dv[m + op.mode_count] = V.derivative_fourier(m);
    op.unit = unit_coefficients(V, beta, op.Z, basis.n_fourier);
    return op;
}

}  // namespace

void GalerkinBasis::validate() const {
    if (n_hermite < 2) throw DomainError("spectral: n_hermite must be at least 2");
    if (n_fourier < 1) throw DomainError("spectral: n_fourier must be at least 1");
    if (!(beta > 0.0)) throw DomainError("spectral: basis beta must be positive");
}

GalerkinBasis default_basis(double gamma, double beta) {
    if (!(gamma > 0.0) || !(beta > 0.0)) throw DomainError("spectral: gamma and beta must be positive");
    const int levels = std::max(128, 32 * static_cast<int>(std::ceil(3.0 / gamma)));
    const int modes = std::max(16, 8 + static_cast<int>(std::ceil(16.0 * std::sqrt(beta))));
    return {levels, modes, beta};
}

GalerkinBasis default_gap_basis(double beta) {
    return {48, std::max(6, static_cast<int>(std::ceil(6.0 * std::sqrt(beta)))), beta};
}

long GalerkinOperator::index(int n, int k) const {
    const int K = basis.n_fourier;
    if (n < 0 || n >= basis.n_hermite || k < -K || k > K) throw OutOfRange("spectral: basis index out of range");
    if (n == 0 && k == 0) return -1;
    const long i = static_cast<long>(n) * basis.modes() + (k + K);
    return i > K ? i - 1 : i;
}

Eigen::VectorXcd GalerkinOperator::rhs() const {
    Eigen::VectorXcd b = Eigen::VectorXcd::Zero(basis.size());
    const double s = 1.0 / std::sqrt(beta);
    for (int k = -basis.n_fourier; k <= basis.n_fourier; ++k) b[index(1, k)] = s * unit[k + basis.n_fourier];
    return b;
}

GalerkinOperator assemble(const PeriodicPotential& V, double beta, double gamma, const GalerkinBasis& basis) {
    GalerkinOperator op = prepare(V, beta, gamma, basis);
    op.matrix = build_matrix(op, false);
    return op;
}

CellSolution solve_cell(const GalerkinOperator& op, bool estimate_truncation) {
    const Eigen::VectorXcd b = op.rhs();
    const double bnorm = b.norm();
    const LevelSolver solver(op);
    Eigen::VectorXcd x = solver.solve(b);
    Eigen::VectorXcd r = b - op.matrix * x;
    double rel = r.norm() / bnorm;
    int steps = 0;
    while (rel > 1e-14 && steps < kMaxRefinements) {
        const Eigen::VectorXcd trial = x + solver.solve(r);
        const Eigen::VectorXcd r_trial = b - op.matrix * trial;
        const double rel_trial = r_trial.norm() / bnorm;
        ++steps;
        if (!(rel_trial < rel)) break;
        x = trial;
        r = r_trial;
        rel = rel_trial;
    }
    if (!(rel <= kResidualTarget))
        throw SolverStall("spectral: residual " + std::to_string(rel) + " above target", rel);

    CellSolution sol;
    sol.basis = op.basis;
    sol.V = op.V;
    sol.gamma = op.gamma;
    sol.beta = op.beta;
    sol.Z = op.Z;
    sol.residual_norm = rel;
    sol.refinement_steps = steps;
    const int N = op.basis.n_hermite, K = op.basis.n_fourier;
    sol.coeffs = Eigen::MatrixXcd::Zero(N, op.basis.modes());
    double energy = 0.0;
    for (int n = 0; n < N; ++n)
        for (int k = -K; k <= K; ++k) {
            const long i = op.index(n, k);
            if (i < 0) continue;
            sol.coeffs(n, k + K) = x[i];
            energy += n * std::norm(x[i]);
        }
    sol.d_inner = b.dot(x).real() / op.gamma;
    sol.d_energy = energy / op.gamma;

    if (estimate_truncation) {
        GalerkinBasis half = op.basis;
        half.n_hermite = std::max(2, N / 2);
        half.n_fourier = std::max(std::max(1, op.mode_count), K / 2);
        const CellSolution coarse = solve_cell(assemble(op.V, op.beta, op.gamma, half), false);
        const double fine = 0.5 * (sol.d_inner + sol.d_energy);
        const double rough = 0.5 * (coarse.d_inner + coarse.d_energy);
        sol.truncation_estimate = std::abs(fine - rough) / std::abs(fine);
    }
    return sol;
}

double formula_discrepancy(const CellSolution& sol) {
    const double mean = 0.5 * (sol.d_inner + sol.d_energy);
    return std::abs(sol.d_inner - sol.d_energy) / std::abs(mean);
}

DiffusionEstimate deff_spectral(const CellSolution& sol) {
    const double gap = formula_discrepancy(sol);
    if (!(gap <= 1e-4))
        throw InconsistentFormulas("spectral: inner-product and energy formulas differ by " + std::to_string(gap));
    DiffusionEstimate e;
    e.value = 0.5 * (sol.d_inner + sol.d_energy);
    e.ci_half_width = std::max(sol.truncation_estimate, gap) * std::abs(e.value);
    e.method = "spectral-galerkin";
    e.gamma = sol.gamma;
    e.beta = sol.beta;
    return e;
}

Eigen::VectorXcd operator_eigenvalues(const PeriodicPotential& V, double beta, double gamma,
                                      const GalerkinBasis& basis) {
    const GalerkinOperator op = prepare(V, beta, gamma, basis);
    const Eigen::MatrixXcd dense = Eigen::MatrixXcd(build_matrix(op, true));
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(dense, false);
    if (es.info() != Eigen::Success) throw EigSolverFailure("spectral: eigenvalue iteration did not converge");
    return es.eigenvalues();
}

double spectral_gap(const PeriodicPotential& V, double beta, double gamma, const GalerkinBasis& basis) {
    const Eigen::VectorXcd ev = operator_eigenvalues(V, beta, gamma, basis);
    Eigen::Index zero = 0;
    ev.cwiseAbs().minCoeff(&zero);
    double gap = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < ev.size(); ++i)
        if (i != zero) gap = std::min(gap, ev[i].real());
    if (!std::isfinite(gap) || std::abs(ev[zero]) > 1e-6 * std::max(1.0, gap))
        throw EigSolverFailure("spectral: no isolated zero eigenvalue in the truncated operator");
    return gap;
}

double spectral_gap(const GalerkinOperator& op) {
    return spectral_gap(op.V, op.beta, op.gamma, op.basis);
}

HermiteRule gauss_hermite(int n) {
    if (n < 1) throw DomainError("spectral: Gauss-Hermite rule needs at least one node");
    Eigen::VectorXd diag = Eigen::VectorXd::Zero(n), off(std::max(0, n - 1));
    for (int i = 1; i < n; ++i) off[i - 1] = std::sqrt(static_cast<double>(i));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    es.computeFromTridiagonal(diag, off, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw EigSolverFailure("spectral: Golub-Welsch eigensolve failed");
    HermiteRule rule;
    for (int i = 0; i < n; ++i) {
        const double x = es.eigenvalues()[i];
        // Christoffel weight 1 / sum h_j(x)^2, with every h_j carrying a factor exp(-x^2 / 4).
        double h_prev = 0.0, h = std::exp(-0.25 * x * x), sum = h * h;
        for (int j = 0; j + 1 < n; ++j) {
            const double next = (x * h - std::sqrt(static_cast<double>(j)) * h_prev) / std::sqrt(j + 1.0);
            h_prev = h;
            h = next;
            sum += h * h;
        }
        rule.nodes.push_back(x);
        rule.scaled_weights.push_back(1.0 / sum);
    }
    return rule;
}

double lp_norm_dp_phi(const CellSolution& sol, double exponent) {
    if (!(exponent >= 2.0) || !std::isfinite(exponent)) throw DomainError("spectral: exponent must be at least 2");
    const int N = sol.basis.n_hermite, K = sol.basis.n_fourier, d = sol.basis.modes();
    const double l = sol.V.period(), beta = sol.beta;
    const int nodes = std::max(64, static_cast<int>(std::ceil(exponent / 2.0 * N)) + 8);
    const HermiteRule rule = gauss_hermite(nodes);
    const int J = next_pow2(std::max(512, static_cast<int>(std::ceil(exponent * d)) + 64));

    // c_{m}(q) = sqrt(beta (m + 1)) G_{m+1}(q), G_n(q) = sum_k x_{nk} exp(2 pi i k q / l).
    std::vector<cplx> phase(J);
    for (int j = 0; j < J; ++j) phase[j] = std::polar(1.0, kTwoPi * j / J);
    Eigen::MatrixXd c(J, N - 1);
    for (int j = 0; j < J; ++j)
        for (int n = 1; n < N; ++n) {
            cplx s = 0.0;
            for (int kc = 0; kc < d; ++kc) {
                const long idx = ((static_cast<long>(kc - K) * j) % J + J) % J;
                s += sol.coeffs(n, kc) * phase[idx];
            }
            c(j, n - 1) = std::sqrt(beta * n) * s.real();
        }

    // Hermite functions scaled by exp(-x^2 / (2 exponent)) at every node.
    Eigen::MatrixXd H(N - 1, nodes);
    for (int i = 0; i < nodes; ++i) {
        const double x = rule.nodes[i];
        double h_prev = 0.0, h = std::exp(-x * x / (2.0 * exponent));
        for (int m = 0; m < N - 1; ++m) {
            H(m, i) = h;
            const double next = (x * h - std::sqrt(static_cast<double>(m)) * h_prev) / std::sqrt(m + 1.0);
            h_prev = h;
            h = next;
        }
    }
    const Eigen::MatrixXd F = c * H;  // J x nodes

    // |d_p phi|^p dmu = (Z/l)^{p/2} exp((p/2 - 1) beta V) / Z * |F|^p, Gaussian in p.
    double total = 0.0;
    for (int j = 0; j < J; ++j) {
        const double q = l * j / J;
        double inner = 0.0;
        for (int i = 0; i < nodes; ++i)
            if (std::abs(rule.nodes[i]) <= kMomentumCutoff)
                inner += std::pow(std::abs(F(j, i)), exponent) * rule.scaled_weights[i];
        total += inner * std::exp((0.5 * exponent - 1.0) * beta * sol.V.value(q));
    }
    total *= (l / J) * std::pow(sol.Z / l, 0.5 * exponent) / sol.Z;
    return std::pow(total, 1.0 / exponent);
}

}  // namespace perdiff::spectral
