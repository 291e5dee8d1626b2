#pragma once

// Overdamped (large-friction) quantities: the Smoluchowski diffusivity, its cell-problem
// corrector and the two-term large-gamma expansion of the underdamped diffusivity.

#include <vector>

#include "perdiff/estimate.hpp"
#include "perdiff/potential.hpp"

namespace perdiff {

/// l^2 / (beta Z Zhat).
DiffusionEstimate dbar(const PeriodicPotential& V, double beta);

struct CorrectorSample {
    std::vector<double> q;
    std::vector<double> chi;             // mean-zero periodic corrector
    std::vector<double> one_plus_dchi;   // 1 + chi'(q) = l exp(beta V) / Zhat
    /// Relative mismatch between beta^-1 ||1 + chi'||^2 (Gibbs weighted) and dbar.
    double identity_error = 0.0;
};

/// Corrector on a uniform grid of `grid` points over one period (grid >= 16).
CorrectorSample corrector_chi(const PeriodicPotential& V, double beta, int grid);

struct ExpansionTerms {
    double leading = 0.0;     // l^2 / (beta gamma Z Zhat)
    double correction = 0.0;  // l^2 beta Z1 / (gamma^3 Z Zhat^2), subtracted
    double value() const { return leading - correction; }
};

/// D_gamma ~ leading - correction for large gamma; the remainder is O(gamma^-5).
ExpansionTerms dgamma_large_expansion_terms(const PeriodicPotential& V, double beta, double gamma);
double dgamma_large_expansion(const PeriodicPotential& V, double beta, double gamma);

struct SmoluchowskiResult {
    double dbar = 0.0;
    PartitionScalars scalars;
    CorrectorSample corrector;
    ExpansionTerms expansion;
    double gamma = 0.0;
};

SmoluchowskiResult smoluchowski(const PeriodicPotential& V, double beta, double gamma, int grid = 64);

}  // namespace perdiff
