#pragma once

#include <cmath>
#include <limits>
#include <string>

#include "json.hpp"

namespace perdiff {

/// A diffusivity value together with how it was obtained.
struct DiffusionEstimate {
    double value = 0.0;
    /// Half-width of a 95% confidence interval for Monte Carlo methods, a
    /// quadrature/truncation error bound for deterministic ones.
    double ci_half_width = 0.0;
    std::string method;
    double gamma = std::numeric_limits<double>::quiet_NaN();  // NaN when not applicable
    double beta = std::numeric_limits<double>::quiet_NaN();
};

inline nlohmann::json to_json(const DiffusionEstimate& e) {
    nlohmann::json j{{"value", e.value}, {"ci", e.ci_half_width}, {"method", e.method},
                     {"beta", e.beta}};
    j["gamma"] = std::isnan(e.gamma) ? nlohmann::json(nullptr) : nlohmann::json(e.gamma);
    return j;
}

}  // namespace perdiff
