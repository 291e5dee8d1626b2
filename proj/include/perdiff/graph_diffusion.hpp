#pragma once

// Simulation of the limiting energy diffusion on the Freidlin-Wentzell graph,
//   dz = (1/beta - S/T) dt + sqrt(2 S / (beta T)) dW   on each edge,
// glued at interior vertices by choosing the outgoing edge with probability proportional
// to its one-sided action limit, reflected at minima. Along a path the position process
// accumulates q* += mean_velocity(edge, z) dt, which vanishes on wells.

#include <cstdint>
#include <utility>
#include <vector>

#include "json.hpp"
#include "perdiff/estimate.hpp"
#include "perdiff/fw_graph.hpp"
#include "perdiff/parallel.hpp"

namespace perdiff::graph {

struct GraphState {
    int edge = 0;
    double z = 0.0;
    double t = 0.0;
};

struct GluingRule {
    int vertex = -1;
    double vertex_energy = 0.0;
    std::vector<std::pair<int, double>> adjacent;  // (edge id, one-sided limit of S)

    std::vector<double> probabilities() const;
};

struct SdeCoefficients {
    double drift = 0.0;
    double diffusion = 0.0;  // sigma > 0
};

/// Exact coefficients from T and S. Throws OutOfRange unless z is inside the edge.
SdeCoefficients sde_coefficients(const fw::EnergyGraph& g, int edge, double z, double beta);

/// Counters filled by `step`.
struct StepStats {
    std::vector<std::vector<long>> vertex_choices;  // [vertex][position in its gluing rule]
    long substeps = 0;
};

/// Edge coefficients tabulated on grids clustered geometrically toward the vertices, where
/// T diverges logarithmically. Immutable after construction and safe to share across threads.
class GraphDiffusion {
public:
    GraphDiffusion(const fw::EnergyGraph& g, double beta);

    const fw::EnergyGraph& graph() const { return *graph_; }
    double beta() const { return beta_; }
    SdeCoefficients coefficients(int edge, double z) const;
    /// p-bar: 0 on wells, p_sign * l / T(z) on rotational edges.
    double mean_velocity(int edge, double z) const;
    /// Rule at an interior vertex; OutOfRange for minima.
    const GluingRule& gluing(int vertex) const;
    const std::vector<GluingRule>& gluing_rules() const { return rules_; }

    /// Draw from the stationary law T(z) exp(-beta z) dz / Z_beta over all edges.
    GraphState sample_stationary(Rng& rng) const;

    /// Euler-Maruyama over dt, subdivided so that sigma sqrt(h) < 0.1 * distance to the nearest
    /// vertex (h >= dt / 64). Returns the new state and adds p-bar integrated over dt to *qstar.
    GraphState step(GraphState s, double dt, Rng& rng, double* qstar = nullptr, StepStats* stats = nullptr) const;

    StepStats make_stats() const;

private:
    struct Table {
        std::vector<double> z;       // ascending nodes
        std::vector<double> ratio;   // S / T
        std::vector<double> inv_T;   // 1 / T
        std::vector<double> cdf;     // cumulative T exp(-beta (z - z_ref)), normalised to 1
        double mass = 0.0;           // integral of T exp(-beta z) over the edge
    };
    struct Lookup {
        double ratio;
        double inv_T;
    };
    Lookup lookup(int edge, double z) const;
    GraphState cross_vertex(int vertex, double overshoot, Rng& rng, StepStats* stats) const;

    const fw::EnergyGraph* graph_;
    double beta_;
    double period_;
    std::vector<Table> tables_;
    std::vector<GluingRule> rules_;     // one per vertex (empty for minima / infinity)
    std::vector<double> edge_cdf_;      // cumulative edge_mass / Z_beta
};

struct QstarConfig {
    double beta = 1.0;
    double t_end = 200.0;
    double dt = 2e-3;
    long n_paths = 1000;
    std::uint64_t seed = 1;
    int n_records = 100;
    int workers = 0;  // 0 = default
};

struct QstarResult {
    std::vector<double> times;
    std::vector<double> mean_qstar;
    std::vector<double> var_qstar;
    std::vector<double> final_qstar;  // per path
    DiffusionEstimate estimate;       // var(q*(t_end)) / (2 t_end), jackknife 95% CI
    StepStats stats;                  // summed over paths
    std::vector<double> z_samples;    // z at every record time of every path (stationarity checks)
};

/// Throws ValidationError for n_paths < 100 or nonpositive t_end, dt, beta.
QstarResult simulate_qstar(const GraphDiffusion& model, const QstarConfig& cfg);
QstarResult simulate_qstar(const PeriodicPotential& V, const QstarConfig& cfg);

/// P(H <= z) under the Gibbs law, by direct phase-space quadrature (independent of the graph).
double gibbs_energy_cdf(const PeriodicPotential& V, double beta, double z);

/// Kolmogorov-Smirnov distance between samples of H and the Gibbs energy law.
double ks_distance(std::vector<double> samples, const PeriodicPotential& V, double beta);

nlohmann::json to_json(const QstarResult& r, const QstarConfig& cfg);

}  // namespace perdiff::graph
