#pragma once

// Independent reference values used across the unit tests.

#include <cmath>

namespace oracle {

// Power series of the modified Bessel function I_n, n = 0 or 1.
inline double bessel_i(int n, double x) {
    double term = std::pow(0.5 * x, n);
    for (int j = 1; j <= n; ++j) term /= j;
    double sum = term;
    for (int k = 1; k < 60; ++k) {
        term *= 0.25 * x * x / (k * (k + n));
        sum += term;
    }
    return sum;
}

// Composite Simpson rule on [a, b] with n (even) panels.
template <class F>
double simpson(F f, double a, double b, int n) {
    const double h = (b - a) / n;
    double s = f(a) + f(b);
    for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
    return s * h / 3.0;
}

}  // namespace oracle
