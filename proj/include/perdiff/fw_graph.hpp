#pragma once

// Freidlin-Wentzell graph of H(q, p) = p^2/2 + V(q): each point of the graph is a
// connected component of a level set of H. Edges carry the energy z as coordinate,
// the orbit period T(z) and the action S(z) = closed-orbit integral of |p| dq.

#include <functional>
#include <limits>
#include <utility>
#include <vector>

#include "json.hpp"
#include "perdiff/estimate.hpp"
#include "perdiff/numerics.hpp"
#include "perdiff/potential.hpp"

namespace perdiff::fw {

enum class VertexKind { interior, minimum, infinity };
enum class EdgeKind { well, rotational_infinite };

struct Vertex {
    double energy;
    VertexKind kind;
    std::vector<int> edges;
};

struct Edge {
    int id = 0;
    EdgeKind kind = EdgeKind::well;
    double z_lo = 0.0;
    double z_hi = std::numeric_limits<double>::infinity();
    int p_sign = 0;  // +1/-1 on rotational edges, 0 on wells
    int lo_vertex = -1;
    int hi_vertex = -1;  // -1 for the vertex at infinity
    std::vector<int> minima;  // indices into CriticalSet::minima enclosed by a well

    // Orbit geometry in unwrapped coordinates: the orbit lives in [left, right].
    // Wells: left/right are the bounding maxima. Rotational: left = a global maximum,
    // right = left + period.
    double left = 0.0;
    double right = 0.0;
    double left_energy = 0.0;
    double right_energy = 0.0;
    std::vector<double> interior_q;       // critical points strictly inside, ascending
    std::vector<double> interior_energy;  // V at those points

    bool is_well() const { return kind == EdgeKind::well; }
    bool is_infinite() const { return kind == EdgeKind::rotational_infinite; }
};

/// Energy written as base + delta. Anchoring at a vertex energy keeps z - V(critical point)
/// exact for the critical points on that vertex's level set.
struct Level {
    double base = 0.0;
    double delta = 0.0;
    double z() const { return base + delta; }
};

class EnergyGraph {
public:
    const PeriodicPotential& potential() const { return V_; }
    const CriticalSet& critical() const { return crit_; }
    const std::vector<Vertex>& vertices() const { return vertices_; }
    const std::vector<Edge>& edges() const { return edges_; }
    const Edge& edge(int id) const { return edges_.at(id); }
    double E0() const { return crit_.E0; }
    double E_min() const { return crit_.E_min; }
    /// The rotational edge with the given momentum sign.
    const Edge& rotational(int p_sign) const;
    int well_count() const;
    /// Edges whose open energy interval contains z.
    std::vector<int> edges_at(double z) const;

    friend EnergyGraph build_graph(const PeriodicPotential& V);

private:
    PeriodicPotential V_;
    CriticalSet crit_;
    std::vector<Vertex> vertices_;
    std::vector<Edge> edges_;
};

/// Throws DegeneratePotential when V has non-Morse critical points (V = const is allowed).
EnergyGraph build_graph(const PeriodicPotential& V);

/// Turning-point intervals of the orbit at energy z (one interval per edge orbit, in
/// unwrapped coordinates; rotational orbits span a full period).
std::vector<std::pair<double, double>> q_support(const EnergyGraph& g, int edge, double z);

/// Integral over the orbit of w(q, s) dq, where s = z - V(q) >= 0. The caller's density
/// must already account for both momentum branches on wells.
double orbit_integral(const EnergyGraph& g, const Edge& e, Level level,
                      const std::function<double(double q, double s)>& w);

/// Period T(z): requires z strictly inside the edge (OutOfRange otherwise).
double period_T(const EnergyGraph& g, int edge, double z);
double period_T(const EnergyGraph& g, int edge, Level level);
/// Action S(z): defined on the closed edge, with one-sided limits at the vertices.
double action_S(const EnergyGraph& g, int edge, double z);
double action_S(const EnergyGraph& g, int edge, Level level);

/// One-sided limit of S at vertex `vertex` along `edge`.
double action_limit(const EnergyGraph& g, int edge, int vertex);

struct OrbitQuantities {
    const Edge* edge;
    std::function<double(double)> T;
    std::function<double(double)> S;
};
OrbitQuantities orbit_quantities(const EnergyGraph& g, int edge);

/// (1/T(z)) * orbit integral of f(q, p) against the line measure dq/|p|.
double orbit_average(const EnergyGraph& g, const std::function<double(double q, double p)>& f,
                     int edge, double z);
/// Average velocity: 0 on wells, p_sign * period / T(z) on rotational edges.
double mean_velocity(const EnergyGraph& g, int edge, double z);

/// Integral of T(z) exp(-beta z) over one edge.
double edge_mass(const EnergyGraph& g, int edge, double beta);
/// Z_beta = sum over edges of edge_mass.
double graph_partition(const EnergyGraph& g, double beta);
double graph_partition(const PeriodicPotential& V, double beta);

/// D* = 2 l^2 / (beta Z_beta) * integral_{E0}^{inf} exp(-beta z) / S(z) dz.
DiffusionEstimate dstar(const EnergyGraph& g, double beta);
DiffusionEstimate dstar(const PeriodicPotential& V, double beta);

struct DStarAsymptotics {
    double low_beta = 0.0;       // 2 / beta, as stated for beta -> 0
    double low_beta_free = 0.0;  // l^2 / beta: exact value of the formula for V = const
    double high_beta = 0.0;      // 2 l^2 exp(-beta (E0 - E_min)) / (beta T0 S(E0))
    double T0 = 0.0;             // small-oscillation period at the global minimum
    double S_E0 = 0.0;           // action of a rotational orbit at the separatrix
};
/// Throws DegeneratePotential for constant V (no well).
DStarAsymptotics dstar_asymptotics(const EnergyGraph& g, double beta);

nlohmann::json describe(const EnergyGraph& g);

}  // namespace perdiff::fw
