#include "perdiff/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "perdiff/errors.hpp"

namespace perdiff::numerics {

namespace {

constexpr double kHalfPi = std::numbers::pi / 2.0;

bool converged(double previous, double current, const QuadratureSpec& spec) {
    const double diff = std::abs(current - previous);
    return diff <= spec.abs_tol || diff <= spec.rel_tol * std::abs(current);
}

[[noreturn]] void fail(const char* what, double last_estimate, double last_change) {
    std::ostringstream os;
    os << what << ": tolerance not met (estimate " << last_estimate << ", last change "
       << last_change << ")";
    throw NonConvergence(os.str());
}

// Trapezoid sum over t in [-t_max, t_max] with step h, keeping only the odd
// multiples of h when `odd_only` is set (nested refinement).
template <class Term>
double trapezoid_level(const Term& term, double h, double t_max, bool odd_only) {
    double sum = 0.0;
    const long n = static_cast<long>(std::ceil(t_max / h));
    const long stride = odd_only ? 2 : 1;
    const long start = odd_only ? 1 : 0;
    for (long i = start; i <= n; i += stride) {
        const double t = static_cast<double>(i) * h;
        sum += term(t);
        if (i != 0) sum += term(-t);
    }
    return sum;
}

}  // namespace

void QuadratureSpec::validate() const {
    if (!(abs_tol > 0.0) || !(rel_tol > 0.0) || max_refinements < 1)
        throw DomainError("QuadratureSpec requires abs_tol > 0, rel_tol > 0, max_refinements >= 1");
}

double quad_periodic(const RealFn& f, const QuadratureSpec& spec, double period) {
    spec.validate();
    int n = 64;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) sum += f(period * i / n);
    double estimate = period * sum / n;
    int agreements = 0;
    double change = 0.0;
    for (int level = 0; level < spec.max_refinements; ++level) {
        for (int i = 0; i < n; ++i) sum += f(period * (2 * i + 1) / (2.0 * n));
        n *= 2;
        const double refined = period * sum / n;
        change = std::abs(refined - estimate);
        // two consecutive agreements guard against a harmonic aliased onto the coarse grid
        agreements = converged(estimate, refined, spec) ? agreements + 1 : 0;
        estimate = refined;
        if (agreements >= 2) return estimate;
    }
    fail("quad_periodic", estimate, change);
}

namespace {

// Nested trapezoid refinement of a double-exponentially transformed integrand. Besides the
// requested tolerances, a change below the round-off floor of the sum (a small multiple of
// machine epsilon times the L1 norm of the terms) counts as converged: near-singular orbit
// integrands otherwise stall a few ulps above a relative tolerance of 1e-13.
template <class Term>
double double_exponential(const Term& term, double t_max, const QuadratureSpec& spec, const char* name) {
    double l1 = 0.0;
    auto tracked = [&](double t) {
        const double v = term(t);
        l1 += std::abs(v);
        return v;
    };
    double h = 0.5;
    double sum = trapezoid_level(tracked, h, t_max, false);
    double estimate = h * sum;
    double change = 0.0;
    for (int level = 0; level < spec.max_refinements; ++level) {
        h *= 0.5;
        sum += trapezoid_level(tracked, h, t_max, true);
        const double refined = h * sum;
        change = std::abs(refined - estimate);
        const double floor = 64.0 * std::numeric_limits<double>::epsilon() * h * l1;
        const bool ok = converged(estimate, refined, spec) || change <= floor;
        estimate = refined;
        if (ok && level >= 1) return estimate;
    }
    fail(name, estimate, change);
}

}  // namespace

double quad_tanh_sinh(const EndpointFn& f, double a, double b, const QuadratureSpec& spec) {
    spec.validate();
    if (!(b > a)) {
        if (a == b) return 0.0;
        throw DomainError("quad_tanh_sinh requires a <= b");
    }
    const double width = b - a;
    const double half = 0.5 * width;
    auto term = [&](double t) {
        const double u = kHalfPi * std::sinh(t);
        const double cu = std::cosh(u);
        const double weight = half * kHalfPi * std::cosh(t) / (cu * cu);
        if (weight == 0.0 || !std::isfinite(weight)) return 0.0;
        const double dist_lo = width / (1.0 + std::exp(-2.0 * u));
        const double dist_hi = width / (1.0 + std::exp(2.0 * u));
        if (dist_lo == 0.0 || dist_hi == 0.0) return 0.0;
        const double x = dist_lo < dist_hi ? a + dist_lo : b - dist_hi;
        const double value = f(x, dist_lo, dist_hi);
        return std::isfinite(value) ? weight * value : 0.0;
    };
    return double_exponential(term, 6.5, spec, "quad_tanh_sinh");
}

double quad_exp_sinh(const RealFn& f, const QuadratureSpec& spec) {
    spec.validate();
    auto term = [&](double t) {
        const double u = std::exp(kHalfPi * std::sinh(t));
        if (u == 0.0 || !std::isfinite(u)) return 0.0;
        const double weight = u * kHalfPi * std::cosh(t);
        const double contribution = weight * f(u);
        return std::isfinite(contribution) ? contribution : 0.0;
    };
    return double_exponential(term, 5.0, spec, "quad_exp_sinh");
}

double quad_exp_tail(const OffsetFn& g, double beta, double z_lo, const QuadratureSpec& spec) {
    if (!(beta > 0.0)) throw DomainError("quad_exp_tail requires beta > 0");
    spec.validate();
    // The common factor exp(-beta z_lo) is applied at the end so large |z_lo| cannot overflow.
    auto near = [&](double u) {
        const double offset = std::exp(-u);
        if (offset == 0.0) return 0.0;
        return offset * g(z_lo + offset, offset) * std::exp(-beta * offset);
    };
    auto tail = [&](double x) {
        const double offset = 1.0 + x;
        const double decay = std::exp(-beta * offset);
        if (decay == 0.0) return 0.0;
        return g(z_lo + offset, offset) * decay;
    };
    // Split the absolute tolerance between the two panels.
    QuadratureSpec panel = spec;
    panel.abs_tol = 0.5 * spec.abs_tol * std::exp(beta * std::min(z_lo, 700.0 / beta));
    const double value = quad_exp_sinh(near, panel) + quad_exp_sinh(tail, panel);
    return std::exp(-beta * z_lo) * value;
}

double quad_exp_tail(const RealFn& g, double beta, double z_lo, const QuadratureSpec& spec) {
    return quad_exp_tail([&g](double z, double) { return g(z); }, beta, z_lo, spec);
}

double bisect(const RealFn& f, Bracket bracket, double tol) {
    double lo = bracket.lo;
    double hi = bracket.hi;
    if (!(lo < hi)) throw DomainError("bisect requires lo < hi");
    double f_lo = f(lo);
    if (f_lo == 0.0) return lo;
    const double f_hi = f(hi);
    if (f_hi == 0.0) return hi;
    if ((f_lo > 0.0) == (f_hi > 0.0)) throw DomainError("bisect requires a sign change");
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi || hi - lo <= tol) break;
        const double f_mid = f(mid);
        if (f_mid == 0.0) return mid;
        if ((f_mid > 0.0) == (f_lo > 0.0)) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

std::vector<TorusRoot> find_roots_on_torus(const RealFn& f, double tol, double period, int grid) {
    if (!(tol > 0.0) || !(period > 0.0) || grid < 8)
        throw DomainError("find_roots_on_torus requires tol > 0, period > 0, grid >= 8");
    const double step = period / grid;
    std::vector<double> values(grid);
    double f_max = 0.0;
    for (int i = 0; i < grid; ++i) {
        values[i] = f(i * step);
        f_max = std::max(f_max, std::abs(values[i]));
    }
    auto wrap = [period](double q) {
        q = std::fmod(q, period);
        if (q < 0.0) q += period;
        if (q >= period) q = 0.0;
        return q;
    };
    const double h_diff = 1e-5 * period;
    auto is_flat = [&](double q) {
        const double slope = (f(q + h_diff) - f(q - h_diff)) / (2.0 * h_diff);
        return std::abs(slope) < tol;
    };

    std::vector<TorusRoot> roots;
    for (int i = 0; i < grid; ++i) {
        const int j = (i + 1) % grid;
        const double q_i = i * step;
        if (values[i] == 0.0) {
            roots.push_back({q_i, is_flat(q_i)});
            continue;
        }
        if (values[j] != 0.0 && (values[i] > 0.0) != (values[j] > 0.0)) {
            const double r = wrap(bisect(f, {q_i, q_i + step}));
            roots.push_back({r, is_flat(r)});
        }
    }

    // Tangential roots: local minima of |f| with no sign change around them.
    const double accept = 10.0 * tol * std::max(f_max, 1.0);
    for (int i = 0; i < grid; ++i) {
        const int prev = (i + grid - 1) % grid;
        const int next = (i + 1) % grid;
        const double a = values[prev], c = values[i], b = values[next];
        if (c == 0.0 || a == 0.0 || b == 0.0) continue;
        if ((a > 0.0) != (c > 0.0) || (c > 0.0) != (b > 0.0)) continue;
        if (!(std::abs(c) <= std::abs(a) && std::abs(c) < std::abs(b))) continue;
        // golden-section minimisation of |f| on [q_prev, q_next]
        double lo = (i - 1) * step, hi = (i + 1) * step;
        const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
        double x1 = hi - inv_phi * (hi - lo), x2 = lo + inv_phi * (hi - lo);
        double f1 = std::abs(f(x1)), f2 = std::abs(f(x2));
        for (int it = 0; it < 200 && hi - lo > 1e-15 * period; ++it) {
            if (f1 < f2) {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - inv_phi * (hi - lo);
                f1 = std::abs(f(x1));
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + inv_phi * (hi - lo);
                f2 = std::abs(f(x2));
            }
        }
        const double q_star = 0.5 * (lo + hi);
        if (std::abs(f(q_star)) <= accept) roots.push_back({wrap(q_star), true});
    }

    std::sort(roots.begin(), roots.end(),
              [](const TorusRoot& l, const TorusRoot& r) { return l.q < r.q; });
    std::vector<TorusRoot> unique;
    for (const auto& r : roots) {
        if (!unique.empty() && r.q - unique.back().q < 1e-9 * period) {
            unique.back().degenerate = unique.back().degenerate || r.degenerate;
            continue;
        }
        unique.push_back(r);
    }
    if (unique.size() > 1 && unique.front().q + period - unique.back().q < 1e-9 * period) {
        unique.front().degenerate = unique.front().degenerate || unique.back().degenerate;
        unique.pop_back();
    }
    return unique;
}

}  // namespace perdiff::numerics
