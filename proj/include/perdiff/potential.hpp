#pragma once

#include <complex>
#include <string>
#include <vector>

#include "json.hpp"
#include "perdiff/numerics.hpp"

namespace perdiff {

/// Smooth periodic potential given by a truncated Fourier series
///   V(q) = c + sum_k a_k cos(2 pi k q / l) + b_k sin(2 pi k q / l),  k = 1..n.
class PeriodicPotential {
public:
    PeriodicPotential() = default;
    PeriodicPotential(std::vector<double> cosine_coeffs, std::vector<double> sine_coeffs,
                      double period = 1.0, double offset = 0.0);

    static PeriodicPotential zero(double period = 1.0);
    /// cos(2 pi q)
    static PeriodicPotential pendulum();

    const std::vector<double>& cosine_coeffs() const { return cos_; }
    const std::vector<double>& sine_coeffs() const { return sin_; }
    double period() const { return period_; }
    double offset() const { return offset_; }

    /// Highest harmonic carrying a nonzero coefficient.
    int mode_count() const { return modes_; }
    bool is_constant() const { return modes_ == 0; }

    /// V, V' or V'' for order 0, 1, 2.
    double eval(double q, int order = 0) const;
    double value(double q) const { return eval(q, 0); }
    double derivative(double q) const { return eval(q, 1); }
    double second_derivative(double q) const { return eval(q, 2); }

    /// V(q + d) - V(q) without cancellation for small d.
    double difference(double q, double d) const;
    /// V(c + y + d) - V(c + y) minus the term linear in d of the expansion about c, i.e. the
    /// difference with V'(c) taken as zero. Meant for a critical point c, where it keeps full
    /// relative accuracy for tiny y and d (V'(c) in floating point is only round-off).
    double difference_without_slope(double c, double y, double d) const;

    /// Complex coefficient of exp(2 pi i m q / l) in V (m may be negative; m = 0 gives the offset).
    std::complex<double> fourier(int m) const;
    /// Complex coefficient of exp(2 pi i m q / l) in V'.
    std::complex<double> derivative_fourier(int m) const;

    /// max |V''| over one period, from a dense scan.
    double max_abs_curvature() const;
    /// V(q - shift), as a new set of coefficients.
    PeriodicPotential translated(double shift) const;
    PeriodicPotential shifted(double constant) const;

    /// q mapped into [0, period).
    double wrap(double q) const;

private:
    std::vector<double> cos_;
    std::vector<double> sin_;
    double period_ = 1.0;
    double offset_ = 0.0;
    int modes_ = 0;
};

double eval(const PeriodicPotential& V, double q, int order);

struct CriticalPoint {
    double q;
    double energy;
};

struct CriticalSet {
    std::vector<CriticalPoint> minima;
    std::vector<CriticalPoint> maxima;
    double E_min = 0.0;
    double E0 = 0.0;  // global maximum of V
    bool degenerate_flag = false;
};

/// Roots of V' on one period, classified by the sign of V''. Roots with |V''| < 1e-8
/// (or tangential roots of V') set degenerate_flag instead of being classified.
CriticalSet critical_points(const PeriodicPotential& V);

struct PartitionScalars {
    double Z = 0.0;     // int exp(-beta V)
    double Zhat = 0.0;  // int exp(+beta V)
    double Z1 = 0.0;    // int V'^2 exp(+beta V)
    double beta = 0.0;
};

/// Integrals over one full period [0, l).
PartitionScalars partition_scalars(const PeriodicPotential& V, double beta,
                                   const numerics::QuadratureSpec& spec = {});

// JSON documents of the form {"cos": [...], "sin": [...], "period": 1.0, "const": 0.0}.
nlohmann::json to_json(const PeriodicPotential& V);
PeriodicPotential potential_from_json(const nlohmann::json& doc);

/// Resolves "pendulum", "zero", an inline JSON object, or a path to a JSON file.
PeriodicPotential parse_potential(const std::string& spec);

}  // namespace perdiff
