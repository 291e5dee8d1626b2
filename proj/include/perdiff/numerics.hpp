#pragma once

// Quadrature and root-finding kernels shared by every other module.
// Everything here is a pure function of its arguments.

#include <functional>
#include <vector>

namespace perdiff::numerics {

struct QuadratureSpec {
    double abs_tol = 1e-13;
    double rel_tol = 1e-12;
    int max_refinements = 12;

    void validate() const;
};

/// Interval whose endpoints carry function values of opposite sign.
struct Bracket {
    double lo;
    double hi;
};

using RealFn = std::function<double(double)>;

/// Integrand that also receives the exact distances of the abscissa to the left
/// and right interval ends. Lets callers evaluate near-endpoint quantities without
/// the cancellation of forming `x - a` in floating point.
using EndpointFn = std::function<double(double x, double dist_lo, double dist_hi)>;

/// Integrand of a semi-infinite tail, called with z and the exact offset z - z_lo.
using OffsetFn = std::function<double(double z, double offset)>;

/// Integral of a smooth periodic function over one period [0, period), by the
/// trapezoid rule with dyadic refinement. Throws NonConvergence.
double quad_periodic(const RealFn& f, const QuadratureSpec& spec = {}, double period = 1.0);

/// Integral of g(z) exp(-beta z) over (z_lo, inf). The panel (z_lo, z_lo + 1] is mapped
/// through z = z_lo + exp(-u), which tames logarithmic endpoint behaviour; both panels
/// are then integrated with a double-exponential half-line rule.
/// Throws DomainError for beta <= 0 and NonConvergence.
double quad_exp_tail(const RealFn& g, double beta, double z_lo, const QuadratureSpec& spec = {});
double quad_exp_tail(const OffsetFn& g, double beta, double z_lo, const QuadratureSpec& spec = {});

/// Tanh-sinh quadrature over [a, b]. Integrable endpoint singularities (inverse
/// square roots, logarithms) are handled; the integrand is never evaluated at a or b.
double quad_tanh_sinh(const EndpointFn& f, double a, double b, const QuadratureSpec& spec = {});

/// Exp-sinh quadrature over [0, inf) for integrands decaying at least exponentially.
double quad_exp_sinh(const RealFn& f, const QuadratureSpec& spec = {});

struct TorusRoot {
    double q;
    bool degenerate;  // |f'(q)| < tol, or a tangency without sign change
};

/// All roots of f on [0, period), sorted ascending. Simple roots come from a sign-change
/// scan on `grid` points followed by bisection; tangential roots are located by
/// minimising |f| around grid minima and reported with degenerate = true.
std::vector<TorusRoot> find_roots_on_torus(const RealFn& f, double tol, double period = 1.0,
                                           int grid = 4096);

/// Bisection to full double precision (or until |hi - lo| <= tol).
double bisect(const RealFn& f, Bracket bracket, double tol = 0.0);

}  // namespace perdiff::numerics
