#include "perdiff/fw_graph.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "perdiff/errors.hpp"

namespace perdiff::fw {

namespace {

const numerics::QuadratureSpec kOrbitSpec{1e-15, 1e-12, 10};
const numerics::QuadratureSpec kEnergySpec{1e-15, 1e-10, 10};

// Orbit node at anchor + offset, where anchor is a critical point of V. Turning points keep
// their (exact) offset from the critical point they were solved against.
struct Node {
    double anchor;
    double offset;
    double gap;  // z - V at the node, nonnegative
    double q() const { return anchor + offset; }
};

bool is_minimum_leaf(const EnergyGraph& g, const Edge& e) {
    return e.lo_vertex >= 0 && g.vertices()[e.lo_vertex].kind == VertexKind::minimum;
}

[[noreturn]] void out_of_range(const Edge& e, double z, const char* what) {
    std::ostringstream os;
    os << what << ": z = " << z << " outside edge " << e.id << " (" << e.z_lo << ", " << e.z_hi
       << ")";
    throw OutOfRange(os.str());
}

// `closed` admits the vertex energies themselves.
void check_level(const Edge& e, Level L, bool closed, const char* what) {
    const double z = L.z();
    bool ok;
    if (L.base == e.z_lo)
        ok = (closed ? L.delta >= 0.0 : L.delta > 0.0) && (z < e.z_hi || (closed && z <= e.z_hi));
    else if (L.base == e.z_hi)
        ok = (closed ? L.delta <= 0.0 : L.delta < 0.0) && (z > e.z_lo || (closed && z >= e.z_lo));
    else
        ok = closed ? (z >= e.z_lo && z <= e.z_hi) : (z > e.z_lo && z < e.z_hi);
    if (!ok) out_of_range(e, z, what);
}

Level anchor(const Edge& e, double z) {
    if (e.is_infinite() || z - e.z_lo <= e.z_hi - z) return {e.z_lo, z - e.z_lo};
    return {e.z_hi, z - e.z_hi};
}

// Turning point between a bounding maximum and the adjacent interior critical point.
// The root is located relative to whichever end has the smaller |z - V|, so the
// cancellation in z - V stays at the scale of that gap.
Node turning_point(const PeriodicPotential& V, double outer_q, double outer_gap, double inner_q,
                   double inner_gap) {
    const double width = std::abs(inner_q - outer_q);
    const double dir = inner_q > outer_q ? 1.0 : -1.0;  // from outer towards inner
    if (outer_gap >= 0.0) return {outer_q, 0.0, 0.0};
    if (std::abs(outer_gap) <= inner_gap) {
        auto f = [&](double x) { return outer_gap - V.difference_without_slope(outer_q, 0.0, dir * x); };
        return {outer_q, dir * numerics::bisect(f, {0.0, width}), 0.0};
    }
    auto f = [&](double x) { return inner_gap - V.difference_without_slope(inner_q, 0.0, -dir * x); };
    return {inner_q, -dir * numerics::bisect(f, {0.0, width}), 0.0};
}

std::vector<Node> orbit_nodes(const EnergyGraph& g, const Edge& e, Level L) {
    const auto& V = g.potential();
    auto gap_of = [&](double energy) { return (L.base - energy) + L.delta; };
    std::vector<Node> nodes;
    if (e.is_infinite()) {
        nodes.push_back({e.left, 0.0, gap_of(e.left_energy)});
        for (std::size_t i = 0; i < e.interior_q.size(); ++i)
            nodes.push_back({e.interior_q[i], 0.0, gap_of(e.interior_energy[i])});
        nodes.push_back({e.right, 0.0, gap_of(e.right_energy)});
        return nodes;
    }
    const double first_gap = gap_of(e.interior_energy.front());
    const double last_gap = gap_of(e.interior_energy.back());
    if (first_gap <= 0.0 && e.interior_q.size() == 1) return nodes;  // orbit collapsed to a point
    nodes.push_back(turning_point(V, e.left, gap_of(e.left_energy), e.interior_q.front(), first_gap));
    for (std::size_t i = 0; i < e.interior_q.size(); ++i)
        nodes.push_back({e.interior_q[i], 0.0, std::max(0.0, gap_of(e.interior_energy[i]))});
    nodes.push_back(turning_point(V, e.right, gap_of(e.right_energy), e.interior_q.back(), last_gap));
    return nodes;
}

double orbit_weight_T(bool well, double s) { return (well ? 2.0 : 1.0) / std::sqrt(2.0 * s); }
double orbit_weight_S(bool well, double s) { return (well ? 2.0 : 1.0) * std::sqrt(2.0 * s); }

}  // namespace

const Edge& EnergyGraph::rotational(int p_sign) const {
    for (const auto& e : edges_)
        if (e.is_infinite() && e.p_sign == p_sign) return e;
    throw std::logic_error("graph without rotational edges");
}

int EnergyGraph::well_count() const {
    return static_cast<int>(std::count_if(edges_.begin(), edges_.end(),
                                          [](const Edge& e) { return e.is_well(); }));
}

std::vector<int> EnergyGraph::edges_at(double z) const {
    std::vector<int> out;
    for (const auto& e : edges_)
        if (z > e.z_lo && z < e.z_hi) out.push_back(e.id);
    return out;
}

EnergyGraph build_graph(const PeriodicPotential& V) {
    EnergyGraph g;
    g.V_ = V;
    g.crit_ = critical_points(V);
    const double l = V.period();

    auto add_rotational = [&](double left, double energy, const std::vector<double>& iq,
                              const std::vector<double>& ie) {
        for (int sign : {+1, -1}) {
            Edge e;
            e.id = static_cast<int>(g.edges_.size());
            e.kind = EdgeKind::rotational_infinite;
            e.z_lo = g.crit_.E0;
            e.p_sign = sign;
            e.left = left;
            e.right = left + l;
            e.left_energy = e.right_energy = energy;
            e.interior_q = iq;
            e.interior_energy = ie;
            g.edges_.push_back(std::move(e));
        }
    };

    if (V.is_constant()) {
        add_rotational(0.0, V.offset(), {}, {});
        g.vertices_.push_back({V.offset(), VertexKind::interior, {0, 1}});
        for (auto& e : g.edges_) e.lo_vertex = 0;
        return g;
    }
    if (g.crit_.degenerate_flag)
        throw DegeneratePotential("potential has a degenerate (non-Morse) critical point");

    struct Cp {
        double q;
        double energy;
        bool is_max;
        int index;
    };
    std::vector<Cp> cps;
    for (int i = 0; i < static_cast<int>(g.crit_.minima.size()); ++i)
        cps.push_back({g.crit_.minima[i].q, g.crit_.minima[i].energy, false, i});
    for (int i = 0; i < static_cast<int>(g.crit_.maxima.size()); ++i)
        cps.push_back({g.crit_.maxima[i].q, g.crit_.maxima[i].energy, true, i});
    std::sort(cps.begin(), cps.end(), [](const Cp& a, const Cp& b) { return a.q < b.q; });
    const int n = static_cast<int>(cps.size());
    for (int i = 0; i < n; ++i)
        if (cps[i].is_max == cps[(i + 1) % n].is_max)
            throw DegeneratePotential("critical points of V do not alternate between minima and maxima");

    // Distinct critical energies; nearly equal ones share one level.
    std::vector<double> levels;
    for (const auto& c : cps) levels.push_back(c.energy);
    std::sort(levels.begin(), levels.end());
    std::vector<double> distinct;
    for (double e : levels) {
        if (!distinct.empty() && e - distinct.back() <= 1e-10 * std::max(1.0, std::abs(e)))
            distinct.back() = e;
        else
            distinct.push_back(e);
    }
    auto level_of = [&](double e) {
        for (double lv : distinct)
            if (std::abs(lv - e) <= 1e-10 * std::max(1.0, std::abs(e))) return lv;
        return e;
    };
    const int top = static_cast<int>(distinct.size()) - 1;
    g.crit_.E0 = distinct[top];

    int global_max = -1;
    for (int i = 0; i < n; ++i)
        if (cps[i].is_max && (global_max < 0 || cps[i].energy > cps[global_max].energy)) global_max = i;

    auto unwrapped = [&](int j) { return cps[j % n].q + l * (j / n); };

    std::map<std::vector<int>, int> by_key;
    for (int band = 0; band < top; ++band) {
        const double z_mid = 0.5 * (distinct[band] + distinct[band + 1]);
        std::vector<int> high;
        for (int i = 0; i < n; ++i)
            if (cps[i].is_max && cps[i].energy > z_mid) high.push_back(i);
        for (std::size_t h = 0; h < high.size(); ++h) {
            const int from = high[h];
            const int to = h + 1 < high.size() ? high[h + 1] : high[0] + n;
            std::vector<int> key;
            for (int j = from + 1; j < to; ++j)
                if (!cps[j % n].is_max && cps[j % n].energy < z_mid) key.push_back(cps[j % n].index);
            if (key.empty()) continue;
            std::sort(key.begin(), key.end());
            auto it = by_key.find(key);
            if (it != by_key.end()) {
                g.edges_[it->second].z_hi = distinct[band + 1];
                continue;
            }
            Edge e;
            e.id = static_cast<int>(g.edges_.size());
            e.kind = EdgeKind::well;
            e.z_lo = distinct[band];
            e.z_hi = distinct[band + 1];
            e.minima = key;
            e.left = unwrapped(from);
            e.right = unwrapped(to);
            e.left_energy = cps[from % n].energy;
            e.right_energy = cps[to % n].energy;
            for (int j = from + 1; j < to; ++j) {
                e.interior_q.push_back(unwrapped(j));
                e.interior_energy.push_back(cps[j % n].energy);
            }
            by_key.emplace(key, e.id);
            g.edges_.push_back(std::move(e));
        }
    }

    {
        std::vector<double> iq, ie;
        for (int j = global_max + 1; j < global_max + n; ++j) {
            iq.push_back(unwrapped(j));
            ie.push_back(cps[j % n].energy);
        }
        add_rotational(cps[global_max].q, cps[global_max].energy, iq, ie);
    }

    // Vertices: one per connected piece of each critical level set.
    auto subset = [](const std::vector<int>& a, const std::vector<int>& b) {
        return std::includes(b.begin(), b.end(), a.begin(), a.end());
    };
    for (int lv = 0; lv <= top; ++lv) {
        const double energy = distinct[lv];
        std::vector<int> ending, starting;
        for (const auto& e : g.edges_) {
            if (e.is_well() && level_of(e.z_hi) == energy) ending.push_back(e.id);
            if (e.is_well() && level_of(e.z_lo) == energy) starting.push_back(e.id);
        }
        if (lv == top) {
            Vertex v{energy, VertexKind::interior, ending};
            for (const auto& e : g.edges_)
                if (e.is_infinite()) v.edges.push_back(e.id);
            g.vertices_.push_back(std::move(v));
            continue;
        }
        std::vector<bool> used(ending.size(), false);
        for (int s : starting) {
            Vertex v{energy, VertexKind::interior, {s}};
            for (std::size_t k = 0; k < ending.size(); ++k) {
                if (subset(g.edges_[ending[k]].minima, g.edges_[s].minima)) {
                    v.edges.push_back(ending[k]);
                    used[k] = true;
                }
            }
            if (v.edges.size() == 1) v.kind = VertexKind::minimum;
            g.vertices_.push_back(std::move(v));
        }
        if (std::find(used.begin(), used.end(), false) != used.end())
            throw std::logic_error("graph construction left an edge without upper vertex");
    }
    for (int vi = 0; vi < static_cast<int>(g.vertices_.size()); ++vi) {
        for (int eid : g.vertices_[vi].edges) {
            auto& e = g.edges_[eid];
            if (level_of(e.z_lo) == g.vertices_[vi].energy && (e.is_infinite() || e.lo_vertex < 0) &&
                !(e.is_well() && level_of(e.z_hi) == g.vertices_[vi].energy && e.lo_vertex >= 0))
                e.lo_vertex = e.lo_vertex < 0 ? vi : e.lo_vertex;
            if (e.is_well() && level_of(e.z_hi) == g.vertices_[vi].energy) e.hi_vertex = vi;
        }
    }
    return g;
}

std::vector<std::pair<double, double>> q_support(const EnergyGraph& g, int edge, double z) {
    const Edge& e = g.edge(edge);
    const Level L = anchor(e, z);
    check_level(e, L, true, "q_support");
    const auto nodes = orbit_nodes(g, e, L);
    if (nodes.empty()) {
        const double q = e.interior_q.front();
        return {{q, q}};
    }
    return {{nodes.front().q(), nodes.back().q()}};
}

double orbit_integral(const EnergyGraph& g, const Edge& e, Level level,
                      const std::function<double(double q, double s)>& w) {
    const auto& V = g.potential();
    const auto nodes = orbit_nodes(g, e, level);
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
        const Node a = nodes[i], b = nodes[i + 1];
        const double width = a.anchor == b.anchor ? b.offset - a.offset
                                                  : (b.anchor - a.anchor) + (b.offset - a.offset);
        if (!(width > 0.0)) continue;
        total += numerics::quad_tanh_sinh(
            [&](double x, double dl, double dr) {
                const double s = dl <= dr ? a.gap - V.difference_without_slope(a.anchor, a.offset, dl)
                                          : b.gap - V.difference_without_slope(b.anchor, b.offset, -dr);
                return s > 0.0 ? w(a.q() + x, s) : 0.0;
            },
            0.0, width, kOrbitSpec);
    }
    return total;
}

double period_T(const EnergyGraph& g, int edge, Level level) {
    const Edge& e = g.edge(edge);
    check_level(e, level, false, "period_T");
    const bool well = e.is_well();
    return orbit_integral(g, e, level, [well](double, double s) { return orbit_weight_T(well, s); });
}

double period_T(const EnergyGraph& g, int edge, double z) {
    return period_T(g, edge, anchor(g.edge(edge), z));
}

double action_S(const EnergyGraph& g, int edge, Level level) {
    const Edge& e = g.edge(edge);
    check_level(e, level, true, "action_S");
    if (is_minimum_leaf(g, e) && level.z() <= e.z_lo) return 0.0;
    const bool well = e.is_well();
    return orbit_integral(g, e, level, [well](double, double s) { return orbit_weight_S(well, s); });
}

double action_S(const EnergyGraph& g, int edge, double z) {
    return action_S(g, edge, anchor(g.edge(edge), z));
}

double action_limit(const EnergyGraph& g, int edge, int vertex) {
    const Edge& e = g.edge(edge);
    const double energy = g.vertices().at(vertex).energy;
    if (vertex == e.lo_vertex) return action_S(g, edge, Level{e.z_lo, 0.0});
    if (vertex == e.hi_vertex) return action_S(g, edge, Level{e.z_hi, 0.0});
    std::ostringstream os;
    os << "edge " << edge << " is not adjacent to the vertex at energy " << energy;
    throw OutOfRange(os.str());
}

OrbitQuantities orbit_quantities(const EnergyGraph& g, int edge) {
    const Edge* e = &g.edge(edge);
    return {e, [&g, edge](double z) { return period_T(g, edge, z); },
            [&g, edge](double z) { return action_S(g, edge, z); }};
}

double orbit_average(const EnergyGraph& g, const std::function<double(double q, double p)>& f,
                     int edge, double z) {
    const Edge& e = g.edge(edge);
    const Level L = anchor(e, z);
    check_level(e, L, false, "orbit_average");
    const double T = period_T(g, edge, L);
    double integral;
    if (e.is_well()) {
        integral = orbit_integral(g, e, L, [&](double q, double s) {
            const double p = std::sqrt(2.0 * s);
            return (f(q, p) + f(q, -p)) / p;
        });
    } else {
        const double sign = e.p_sign;
        integral = orbit_integral(g, e, L, [&](double q, double s) {
            const double p = std::sqrt(2.0 * s);
            return f(q, sign * p) / p;
        });
    }
    return integral / T;
}

double mean_velocity(const EnergyGraph& g, int edge, double z) {
    const Edge& e = g.edge(edge);
    if (e.is_well()) {
        check_level(e, anchor(e, z), false, "mean_velocity");
        return 0.0;
    }
    return e.p_sign * g.potential().period() / period_T(g, edge, z);
}

double edge_mass(const EnergyGraph& g, int edge, double beta) {
    if (!(beta > 0.0)) throw DomainError("edge_mass requires beta > 0");
    const Edge& e = g.edge(edge);
    if (e.is_infinite()) {
        return numerics::quad_exp_tail(
            [&](double, double offset) { return period_T(g, edge, Level{e.z_lo, offset}); }, beta,
            e.z_lo, kEnergySpec);
    }
    // exp(-beta z) is taken relative to z_lo so deep wells cannot overflow.
    const double scale = std::exp(-beta * e.z_lo);
    const double inner = numerics::quad_tanh_sinh(
        [&](double z, double dl, double dr) {
            // Below ~1e-100 of the band the turning points are no longer resolvable; the
            // contribution of that sliver is negligible and T is read at its edge instead.
            const double floor = 1e-100 * (e.z_hi - e.z_lo);
            const Level L = dl <= dr ? Level{e.z_lo, std::max(dl, floor)} : Level{e.z_hi, -std::max(dr, floor)};
            return period_T(g, edge, L) * std::exp(-beta * (z - e.z_lo));
        },
        e.z_lo, e.z_hi, kEnergySpec);
    return scale * inner;
}

double graph_partition(const EnergyGraph& g, double beta) {
    if (!(beta > 0.0)) throw DomainError("graph_partition requires beta > 0");
    double total = 0.0;
    // Both rotational edges carry the same T(z).
    double rotational_mass = -1.0;
    for (const auto& e : g.edges()) {
        if (e.is_infinite()) {
            if (rotational_mass < 0.0) rotational_mass = edge_mass(g, e.id, beta);
            total += rotational_mass;
        } else {
            total += edge_mass(g, e.id, beta);
        }
    }
    return total;
}

double graph_partition(const PeriodicPotential& V, double beta) {
    return graph_partition(build_graph(V), beta);
}

DiffusionEstimate dstar(const EnergyGraph& g, double beta) {
    if (!(beta > 0.0)) throw DomainError("dstar requires beta > 0");
    const Edge& rot = g.rotational(+1);
    const double l = g.potential().period();
    const double Z = graph_partition(g, beta);
    auto tail = [&](const numerics::QuadratureSpec& spec) {
        return numerics::quad_exp_tail(
            [&](double, double offset) { return 1.0 / action_S(g, rot.id, Level{rot.z_lo, offset}); },
            beta, rot.z_lo, spec);
    };
    const double integral = tail(kEnergySpec);
    const double coarse = tail(numerics::QuadratureSpec{1e-12, 1e-7, 9});
    DiffusionEstimate out;
    out.value = 2.0 * l * l * integral / (beta * Z);
    out.ci_half_width = std::max(std::abs(integral - coarse) / integral, 1e-11) * out.value;
    out.method = "fw-formula";
    out.beta = beta;
    return out;
}

DiffusionEstimate dstar(const PeriodicPotential& V, double beta) { return dstar(build_graph(V), beta); }

DStarAsymptotics dstar_asymptotics(const EnergyGraph& g, double beta) {
    if (!(beta > 0.0)) throw DomainError("dstar_asymptotics requires beta > 0");
    const auto& crit = g.critical();
    if (g.potential().is_constant() || crit.minima.empty())
        throw DegeneratePotential("beta asymptotics need at least one potential well");
    const auto& V = g.potential();
    const double l = V.period();
    const auto lowest = std::min_element(crit.minima.begin(), crit.minima.end(),
                                         [](auto& a, auto& b) { return a.energy < b.energy; });
    DStarAsymptotics out;
    out.T0 = 2.0 * std::numbers::pi / std::sqrt(V.second_derivative(lowest->q));
    const Edge& rot = g.rotational(+1);
    out.S_E0 = action_S(g, rot.id, Level{rot.z_lo, 0.0});
    out.low_beta = 2.0 / beta;
    out.low_beta_free = l * l / beta;
    out.high_beta = 2.0 * l * l * std::exp(-beta * (g.E0() - g.E_min())) / (beta * out.T0 * out.S_E0);
    return out;
}

nlohmann::json describe(const EnergyGraph& g) {
    nlohmann::json vertices = nlohmann::json::array(), edges = nlohmann::json::array();
    for (const auto& v : g.vertices()) {
        const char* kind = v.kind == VertexKind::minimum ? "minimum"
                           : v.kind == VertexKind::interior ? "interior"
                                                            : "infinity";
        vertices.push_back({{"energy", v.energy}, {"kind", kind}, {"edges", v.edges}});
    }
    for (const auto& e : g.edges()) {
        nlohmann::json j{{"id", e.id},
                         {"kind", e.is_well() ? "well" : "rotational-infinite"},
                         {"z_lo", e.z_lo},
                         {"p_sign", e.p_sign}};
        j["z_hi"] = std::isinf(e.z_hi) ? nlohmann::json("inf") : nlohmann::json(e.z_hi);
        edges.push_back(std::move(j));
    }
    return {{"vertices", vertices}, {"edges", edges}, {"E0", g.E0()}, {"E_min", g.E_min()}};
}

}  // namespace perdiff::fw
