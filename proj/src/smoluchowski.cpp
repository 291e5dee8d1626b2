#include "perdiff/smoluchowski.hpp"

#include <cmath>
#include <complex>
#include <numbers>

#include "perdiff/errors.hpp"

namespace perdiff {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;

void require_positive(double x, const char* what) {
    if (!(x > 0.0) || !std::isfinite(x)) throw DomainError(std::string(what) + " must be positive and finite");
}
}  // namespace

DiffusionEstimate dbar(const PeriodicPotential& V, double beta) {
    require_positive(beta, "beta");
    const auto s = partition_scalars(V, beta);
    const double l = V.period();
    DiffusionEstimate out;
    out.value = l * l / (beta * s.Z * s.Zhat);
    out.ci_half_width = 1e-12 * out.value;
    out.method = "smoluchowski-formula";
    out.beta = beta;
    return out;
}

CorrectorSample corrector_chi(const PeriodicPotential& V, double beta, int grid) {
    require_positive(beta, "beta");
    if (grid < 16) throw DomainError("corrector grid needs at least 16 points");
    const double l = V.period();
    const auto s = partition_scalars(V, beta);

    // chi' = l exp(beta V) / Zhat - 1 has zero mean, so its antiderivative is periodic and
    // follows from the Fourier coefficients. Sample densely enough that the spectrum of
    // exp(beta V) has decayed to round-off.
    int m = 256;
    while (m < 8 * grid) m *= 2;
    auto spectrum = [&](int n) {
        std::vector<std::complex<double>> c(n / 2);
        std::vector<double> f(n);
        for (int j = 0; j < n; ++j) f[j] = l * std::exp(beta * V.value(l * j / n)) / s.Zhat - 1.0;
        for (int k = 1; k < n / 2; ++k) {
            std::complex<double> acc = 0.0;
            for (int j = 0; j < n; ++j) acc += f[j] * std::polar(1.0, -kTwoPi * k * j / n);
            c[k] = acc / static_cast<double>(n);
        }
        return c;
    };
    auto coeffs = spectrum(m);
    while (m < (1 << 14) && std::abs(coeffs.back()) + std::abs(coeffs[coeffs.size() - 2]) > 1e-15) {
        m *= 2;
        coeffs = spectrum(m);
    }

    CorrectorSample out;
    out.q.resize(grid);
    out.chi.resize(grid);
    out.one_plus_dchi.resize(grid);
    for (int j = 0; j < grid; ++j) {
        const double q = l * j / grid;
        out.q[j] = q;
        out.one_plus_dchi[j] = l * std::exp(beta * V.value(q)) / s.Zhat;
        double chi = 0.0;
        for (int k = 1; k < static_cast<int>(coeffs.size()); ++k) {
            const double w = kTwoPi * k / l;
            // real part of 2 c_k exp(i w q) / (i w)
            const auto term = 2.0 * coeffs[k] * std::polar(1.0, w * q) / std::complex<double>(0.0, w);
            chi += term.real();
        }
        out.chi[j] = chi;
    }

    const double norm = numerics::quad_periodic(
        [&](double q) {
            const double g = l * std::exp(beta * V.value(q)) / s.Zhat;
            return g * g * std::exp(-beta * V.value(q)) / s.Z;
        },
        {}, l);
    const double d = l * l / (beta * s.Z * s.Zhat);
    out.identity_error = std::abs(norm / beta - d) / d;
    return out;
}

ExpansionTerms dgamma_large_expansion_terms(const PeriodicPotential& V, double beta, double gamma) {
    require_positive(beta, "beta");
    require_positive(gamma, "gamma");
    const auto s = partition_scalars(V, beta);
    const double l2 = V.period() * V.period();
    ExpansionTerms t;
    t.leading = l2 / (beta * gamma * s.Z * s.Zhat);
    t.correction = l2 * beta * s.Z1 / (gamma * gamma * gamma * s.Z * s.Zhat * s.Zhat);
    return t;
}

double dgamma_large_expansion(const PeriodicPotential& V, double beta, double gamma) {
    return dgamma_large_expansion_terms(V, beta, gamma).value();
}

SmoluchowskiResult smoluchowski(const PeriodicPotential& V, double beta, double gamma, int grid) {
    SmoluchowskiResult r;
    r.dbar = dbar(V, beta).value;
    r.scalars = partition_scalars(V, beta);
    r.corrector = corrector_chi(V, beta, grid);
    r.expansion = dgamma_large_expansion_terms(V, beta, gamma);
    r.gamma = gamma;
    return r;
}

}  // namespace perdiff
