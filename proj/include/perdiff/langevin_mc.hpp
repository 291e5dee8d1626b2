#pragma once

// Ensemble simulation of dq = p dt, dp = -V'(q) dt - gamma p dt + sqrt(2 gamma / beta) dW
// from Gibbs initial data, with the effective diffusivity read off the mean-square
// displacement.

#include <cstdint>
#include <vector>

#include "json.hpp"
#include "perdiff/estimate.hpp"
#include "perdiff/parallel.hpp"
#include "perdiff/potential.hpp"

namespace perdiff::mc {

struct McConfig {
    PeriodicPotential V = PeriodicPotential::pendulum();
    double beta = 1.0;
    double gamma = 1.0;
    double dt = 0.01;
    double t_end = 100.0;
    long n_paths = 1000;
    std::uint64_t seed = 1;
    long record_stride = 100;  // steps between recorded times
    int workers = 0;           // 0 = default
    int bootstrap = 200;

    /// Largest admissible step: 0.1 min(1/gamma, 1/omega_max), omega_max^2 = max |V''|.
    double max_dt() const;
    /// Throws ValidationError unless dt, t_end, n_paths and record_stride are admissible.
    void validate() const;
};

struct PhasePoint {
    long winding = 0;     // whole periods travelled
    double frac = 0.0;    // position inside [0, l)
    double p = 0.0;

    double unwrapped(double period) const { return static_cast<double>(winding) * period + frac; }
};

/// p ~ N(0, 1/beta); q ~ exp(-beta V) / Z by rejection from the uniform law.
PhasePoint sample_gibbs(const PeriodicPotential& V, double beta, Rng& rng);

/// One B-A-O-A-B step with an exact Ornstein-Uhlenbeck substep.
void step_baoab(PhasePoint& s, double dt, double gamma, double beta, const PeriodicPotential& V, Rng& rng);

struct TrajectoryEnsemble {
    std::vector<double> times;
    std::vector<double> msd;         // variance of q(t) - q(0) over paths
    std::vector<double> p_variance;
    long n_paths = 0;
    std::uint64_t seed = 0;
    /// Displacements, row-major [path][record].
    std::vector<double> displacement;
};

/// Runs the ensemble (ValidationError on bad config). Bit-identical for any worker count.
TrajectoryEnsemble simulate(const McConfig& cfg);

struct MsdFit {
    DiffusionEstimate estimate;  // slope / 2 over [t_end/2, t_end], bootstrap 95% CI
    double slope = 0.0;
    double tau_diff = 0.0;       // first time after which msd/2t stays within 10% of D
    double trend = 0.0;          // relative change of msd/2t across the fit window
};

/// Fits curve(t) over [t_end/2, t_end]; bootstrap resamples paths of `displacement`, scaled by
/// `scale` (the curve is scale^2 times the variance of the displacements).
/// Throws NotDiffusive if curve/2t changes by more than 5% across the window and the bootstrap
/// 95% interval of that change excludes zero.
MsdFit fit_msd(const TrajectoryEnsemble& ens, double scale, int bootstrap, std::uint64_t seed,
               bool check_trend = true);

/// Requires t_end >= 20/gamma. Returns the ensemble and D = slope/2 of the MSD.
struct MsdResult {
    TrajectoryEnsemble ensemble;
    MsdFit fit;
};
MsdResult estimate_deff_msd(const McConfig& cfg);

struct ScalingFamily {
    double alpha = 1.0;
    double gamma = 0.2;
    bool small_gamma = true;

    /// q^gamma(t) = lambda q(t / mu).
    double lambda() const;
    double mu() const;
    void validate() const;
};

struct RescaledCheck {
    std::vector<double> times;     // rescaled times
    std::vector<double> variance;  // var(q^gamma(t))
    MsdFit fit;                    // estimate.value = slope / 2
    ScalingFamily family;
};

/// Simulates the unscaled process with cfg (cfg.gamma is overwritten by family.gamma) until
/// t_rescaled / mu and reports the variance of the rescaled displacement.
RescaledCheck rescaled_process_check(const ScalingFamily& family, McConfig cfg, double t_rescaled);

nlohmann::json to_json(const MsdResult& r, const McConfig& cfg);

}  // namespace perdiff::mc
