#include "perdiff/potential.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include "perdiff/errors.hpp"

namespace perdiff {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;

int highest_mode(const std::vector<double>& a, const std::vector<double>& b) {
    int n = static_cast<int>(std::max(a.size(), b.size()));
    while (n > 0) {
        const double ca = n <= static_cast<int>(a.size()) ? a[n - 1] : 0.0;
        const double cb = n <= static_cast<int>(b.size()) ? b[n - 1] : 0.0;
        if (ca != 0.0 || cb != 0.0) break;
        --n;
    }
    return n;
}
}  // namespace

PeriodicPotential::PeriodicPotential(std::vector<double> cosine_coeffs,
                                     std::vector<double> sine_coeffs, double period, double offset)
    : cos_(std::move(cosine_coeffs)), sin_(std::move(sine_coeffs)), period_(period), offset_(offset) {
    if (!(period_ > 0.0) || !std::isfinite(period_))
        throw ValidationError("potential period must be positive and finite");
    if (!std::isfinite(offset_)) throw ValidationError("potential offset must be finite");
    for (double c : cos_)
        if (!std::isfinite(c)) throw ValidationError("non-finite cosine coefficient");
    for (double c : sin_)
        if (!std::isfinite(c)) throw ValidationError("non-finite sine coefficient");
    modes_ = highest_mode(cos_, sin_);
    cos_.resize(modes_, 0.0);
    sin_.resize(modes_, 0.0);
}

PeriodicPotential PeriodicPotential::zero(double period) { return PeriodicPotential({}, {}, period); }

PeriodicPotential PeriodicPotential::pendulum() { return PeriodicPotential({1.0}, {}, 1.0); }

double PeriodicPotential::eval(double q, int order) const {
    if (order < 0 || order > 2) throw DomainError("potential derivative order must be 0, 1 or 2");
    const double theta = kTwoPi * q / period_;
    const double c1 = std::cos(theta), s1 = std::sin(theta);
    double ck = 1.0, sk = 0.0;
    double sum = order == 0 ? offset_ : 0.0;
    for (int k = 1; k <= modes_; ++k) {
        const double next_c = ck * c1 - sk * s1;
        sk = sk * c1 + ck * s1;
        ck = next_c;
        const double a = cos_[k - 1], b = sin_[k - 1];
        const double w = kTwoPi * k / period_;
        switch (order) {
            case 0: sum += a * ck + b * sk; break;
            case 1: sum += w * (b * ck - a * sk); break;
            default: sum -= w * w * (a * ck + b * sk); break;
        }
    }
    return sum;
}

double eval(const PeriodicPotential& V, double q, int order) { return V.eval(q, order); }

double PeriodicPotential::difference(double q, double d) const {
    const double theta = kTwoPi * q / period_;
    const double delta = kTwoPi * d / period_;
    double sum = 0.0;
    for (int k = 1; k <= modes_; ++k) {
        const double s_half = std::sin(0.5 * k * delta);
        if (s_half == 0.0) continue;
        const double phase = k * theta + 0.5 * k * delta;
        sum += 2.0 * s_half * (sin_[k - 1] * std::cos(phase) - cos_[k - 1] * std::sin(phase));
    }
    return sum;
}

namespace {
// 2 sin(x / 2) - x without cancellation.
double two_sin_half_minus(double x) {
    if (std::abs(x) >= 0.25) return 2.0 * std::sin(0.5 * x) - x;
    const double h2 = 0.25 * x * x;
    double term = -x * h2 / 6.0;
    double sum = term;
    for (int n = 2; n < 12; ++n) {
        term *= -h2 / ((2.0 * n) * (2.0 * n + 1.0));
        sum += term;
    }
    return sum;
}
}  // namespace

double PeriodicPotential::difference_without_slope(double c, double y, double d) const {
    // Per mode, with C, S = cos, sin(k theta_c), a = k y and e = k d in radians, b = a + e/2:
    //   cos(a + e) - cos(a) = -2 sin(e/2) sin(b)
    //   sin(a + e) - sin(a) - e = r - 2 (e + r) sin^2(b/2),  r = 2 sin(e/2) - e,
    // where the second line already drops the part linear in e at the anchor. Both
    // are free of cancellation, so small offsets keep full relative accuracy.
    const double theta = kTwoPi * c / period_;
    const double w = kTwoPi / period_;
    const double c1 = std::cos(theta), s1 = std::sin(theta);
    double ck = 1.0, sk = 0.0, sum = 0.0;
    for (int k = 1; k <= modes_; ++k) {
        const double next_c = ck * c1 - sk * s1;
        sk = sk * c1 + ck * s1;
        ck = next_c;
        const double a = cos_[k - 1], b = sin_[k - 1];
        const double e = k * w * d;
        const double mid = k * w * y + 0.5 * e;
        const double sh = std::sin(0.5 * e);
        const double r = two_sin_half_minus(e);
        const double sm = std::sin(0.5 * mid);
        sum += -2.0 * sh * std::sin(mid) * (a * ck + b * sk) + (r - 2.0 * (e + r) * sm * sm) * (b * ck - a * sk);
    }
    return sum;
}

std::complex<double> PeriodicPotential::fourier(int m) const {
    if (m == 0) return offset_;
    const int k = std::abs(m);
    if (k > modes_) return 0.0;
    const double a = cos_[k - 1], b = sin_[k - 1];
    return m > 0 ? std::complex<double>(0.5 * a, -0.5 * b) : std::complex<double>(0.5 * a, 0.5 * b);
}

std::complex<double> PeriodicPotential::derivative_fourier(int m) const {
    return std::complex<double>(0.0, kTwoPi * m / period_) * fourier(m);
}

double PeriodicPotential::max_abs_curvature() const {
    constexpr int n = 4096;
    double best = 0.0;
    for (int i = 0; i < n; ++i) best = std::max(best, std::abs(eval(period_ * i / n, 2)));
    return best;
}

PeriodicPotential PeriodicPotential::translated(double shift) const {
    std::vector<double> a(modes_), b(modes_);
    for (int k = 1; k <= modes_; ++k) {
        const double phi = kTwoPi * k * shift / period_;
        const double c = std::cos(phi), s = std::sin(phi);
        a[k - 1] = cos_[k - 1] * c - sin_[k - 1] * s;
        b[k - 1] = cos_[k - 1] * s + sin_[k - 1] * c;
    }
    return PeriodicPotential(std::move(a), std::move(b), period_, offset_);
}

PeriodicPotential PeriodicPotential::shifted(double constant) const {
    return PeriodicPotential(cos_, sin_, period_, offset_ + constant);
}

double PeriodicPotential::wrap(double q) const {
    double r = std::fmod(q, period_);
    if (r < 0.0) r += period_;
    if (r >= period_) r = 0.0;
    return r;
}

CriticalSet critical_points(const PeriodicPotential& V) {
    CriticalSet set;
    if (V.is_constant()) {
        set.degenerate_flag = true;
        set.E0 = set.E_min = V.offset();
        return set;
    }
    const auto roots =
        numerics::find_roots_on_torus([&V](double q) { return V.derivative(q); }, 1e-10, V.period());
    for (const auto& r : roots) {
        const double curvature = V.second_derivative(r.q);
        if (r.degenerate || std::abs(curvature) < 1e-8) {
            set.degenerate_flag = true;
            continue;
        }
        (curvature > 0.0 ? set.minima : set.maxima).push_back({r.q, V.value(r.q)});
    }
    auto lowest = std::min_element(set.minima.begin(), set.minima.end(),
                                   [](auto& l, auto& r) { return l.energy < r.energy; });
    auto highest = std::max_element(set.maxima.begin(), set.maxima.end(),
                                    [](auto& l, auto& r) { return l.energy < r.energy; });
    set.E_min = lowest != set.minima.end() ? lowest->energy : V.offset();
    set.E0 = highest != set.maxima.end() ? highest->energy : V.offset();
    return set;
}

PartitionScalars partition_scalars(const PeriodicPotential& V, double beta,
                                   const numerics::QuadratureSpec& spec) {
    if (!(beta > 0.0)) throw DomainError("partition_scalars requires beta > 0");
    const double l = V.period();
    PartitionScalars out;
    out.beta = beta;
    out.Z = numerics::quad_periodic([&](double q) { return std::exp(-beta * V.value(q)); }, spec, l);
    out.Zhat = numerics::quad_periodic([&](double q) { return std::exp(beta * V.value(q)); }, spec, l);
    if (V.is_constant()) {
        out.Z1 = 0.0;
    } else {
        out.Z1 = numerics::quad_periodic(
            [&](double q) {
                const double d = V.derivative(q);
                return d * d * std::exp(beta * V.value(q));
            },
            spec, l);
    }
    return out;
}

nlohmann::json to_json(const PeriodicPotential& V) {
    return {{"cos", V.cosine_coeffs()},
            {"sin", V.sine_coeffs()},
            {"period", V.period()},
            {"const", V.offset()}};
}

PeriodicPotential potential_from_json(const nlohmann::json& doc) {
    if (doc.is_string()) return parse_potential(doc.get<std::string>());
    if (!doc.is_object()) throw ValidationError("potential must be a JSON object or preset name");
    try {
        auto a = doc.value("cos", std::vector<double>{});
        auto b = doc.value("sin", std::vector<double>{});
        const double period = doc.value("period", 1.0);
        const double offset = doc.value("const", 0.0);
        for (const auto& [key, _] : doc.items())
            if (key != "cos" && key != "sin" && key != "period" && key != "const")
                throw ValidationError("unknown potential key '" + key + "'");
        return PeriodicPotential(std::move(a), std::move(b), period, offset);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed potential: ") + e.what());
    }
}

PeriodicPotential parse_potential(const std::string& spec) {
    if (spec == "pendulum") return PeriodicPotential::pendulum();
    if (spec == "zero" || spec == "free") return PeriodicPotential::zero();
    if (!spec.empty() && spec.front() == '{') {
        try {
            return potential_from_json(nlohmann::json::parse(spec));
        } catch (const nlohmann::json::parse_error& e) {
            throw ValidationError(std::string("malformed potential JSON: ") + e.what());
        }
    }
    std::ifstream in(spec);
    if (!in) throw ValidationError("unknown potential '" + spec + "' (not a preset or readable file)");
    try {
        return potential_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError("malformed potential file '" + spec + "': " + e.what());
    }
}

}  // namespace perdiff
