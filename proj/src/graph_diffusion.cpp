#include "perdiff/graph_diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "perdiff/errors.hpp"

namespace perdiff::graph {

namespace {

constexpr int kNodesPerDecade = 48;
constexpr double kNearestOffset = 1e-13;  // closest tabulated distance to a vertex, relative
constexpr double kSubstepFloor = 1.0 / 64.0;

// Offsets d_i from `tiny` to `span`, geometric.
std::vector<double> geometric_offsets(double tiny, double span) {
    const int n = std::max(8, static_cast<int>(std::ceil(std::log10(span / tiny) * kNodesPerDecade)));
    std::vector<double> d(n + 1);
    for (int i = 0; i <= n; ++i) d[i] = tiny * std::pow(span / tiny, static_cast<double>(i) / n);
    d.back() = span;
    return d;
}

double interpolate(const std::vector<double>& x, const std::vector<double>& y, std::size_t i, double at) {
    const double w = (at - x[i]) / (x[i + 1] - x[i]);
    return y[i] + w * (y[i + 1] - y[i]);
}

}  // namespace

std::vector<double> GluingRule::probabilities() const {
    std::vector<double> p;
    double total = 0.0;
    for (const auto& a : adjacent) total += a.second;
    for (const auto& a : adjacent)
        p.push_back(total > 0.0 ? a.second / total : 1.0 / static_cast<double>(adjacent.size()));
    return p;
}

SdeCoefficients sde_coefficients(const fw::EnergyGraph& g, int edge, double z, double beta) {
    if (!(beta > 0.0)) throw DomainError("sde_coefficients: beta must be positive");
    const double T = fw::period_T(g, edge, z);
    const double S = fw::action_S(g, edge, z);
    return {1.0 / beta - S / T, std::sqrt(2.0 * S / (beta * T))};
}

GraphDiffusion::GraphDiffusion(const fw::EnergyGraph& g, double beta)
    : graph_(&g), beta_(beta), period_(g.potential().period()) {
    if (!(beta > 0.0) || !std::isfinite(beta)) throw DomainError("graph diffusion: beta must be positive");
    const auto& edges = g.edges();
    const auto& vertices = g.vertices();
    const double spread = std::max(1.0, g.E0() - g.E_min());

    tables_.resize(edges.size());
    for (const auto& e : edges) {
        Table& tab = tables_[e.id];
        std::vector<fw::Level> levels;
        if (e.is_infinite()) {
            const double cap = 60.0 / beta + spread;
            for (double d : geometric_offsets(kNearestOffset * spread, cap)) levels.push_back({e.z_lo, d});
        } else {
            const double half = 0.5 * (e.z_hi - e.z_lo);
            const auto d = geometric_offsets(kNearestOffset * half, half);
            for (double x : d) levels.push_back({e.z_lo, x});
            for (auto it = d.rbegin() + 1; it != d.rend(); ++it) levels.push_back({e.z_hi, -*it});
        }
        const bool lo_is_min = e.lo_vertex >= 0 && vertices[e.lo_vertex].kind == fw::VertexKind::minimum;
        // Vertex node: S/T -> 0 at both vertex kinds; 1/T -> 0 at separatrices and to 1/T0 at minima.
        tab.z.push_back(e.z_lo);
        tab.ratio.push_back(0.0);
        tab.inv_T.push_back(0.0);
        for (const auto& L : levels) {
            const double T = fw::period_T(g, e.id, L);
            const double S = fw::action_S(g, e.id, L);
            tab.z.push_back(L.z());
            tab.ratio.push_back(S / T);
            tab.inv_T.push_back(1.0 / T);
        }
        if (lo_is_min) tab.inv_T[0] = tab.inv_T[1];
        if (!e.is_infinite()) {
            tab.z.push_back(e.z_hi);
            tab.ratio.push_back(0.0);
            tab.inv_T.push_back(0.0);
        }
        // Cumulative mass of T exp(-beta (z - z_lo)); the first and last cells use the inner
        // node's T, since T diverges logarithmically at separatrix vertices.
        const std::size_t n = tab.z.size();
        tab.cdf.assign(n, 0.0);
        auto density = [&](std::size_t i) {
            std::size_t j = i == 0 ? 1 : (i == n - 1 && !e.is_infinite() ? n - 2 : i);
            return std::exp(-beta * (tab.z[i] - e.z_lo)) / tab.inv_T[j];
        };
        for (std::size_t i = 1; i < n; ++i)
            tab.cdf[i] = tab.cdf[i - 1] + 0.5 * (density(i - 1) + density(i)) * (tab.z[i] - tab.z[i - 1]);
        const double total = tab.cdf.back();
        for (double& c : tab.cdf) c /= total;
        tab.mass = fw::edge_mass(g, e.id, beta);
    }

    const double Z = std::accumulate(tables_.begin(), tables_.end(), 0.0,
                                     [](double s, const Table& t) { return s + t.mass; });
    double acc = 0.0;
    for (const auto& t : tables_) edge_cdf_.push_back(acc += t.mass / Z);
    edge_cdf_.back() = 1.0;

    rules_.resize(vertices.size());
    for (std::size_t v = 0; v < vertices.size(); ++v) {
        if (vertices[v].kind != fw::VertexKind::interior) continue;
        GluingRule& r = rules_[v];
        r.vertex = static_cast<int>(v);
        r.vertex_energy = vertices[v].energy;
        for (int id : vertices[v].edges) r.adjacent.emplace_back(id, fw::action_limit(g, id, static_cast<int>(v)));
    }
}

StepStats GraphDiffusion::make_stats() const {
    StepStats s;
    s.vertex_choices.resize(rules_.size());
    for (std::size_t v = 0; v < rules_.size(); ++v) s.vertex_choices[v].assign(rules_[v].adjacent.size(), 0);
    return s;
}

const GluingRule& GraphDiffusion::gluing(int vertex) const {
    if (vertex < 0 || vertex >= static_cast<int>(rules_.size()) || rules_[vertex].adjacent.empty())
        throw OutOfRange("graph diffusion: vertex " + std::to_string(vertex) + " has no gluing rule");
    return rules_[vertex];
}

GraphDiffusion::Lookup GraphDiffusion::lookup(int edge, double z) const {
    const Table& t = tables_[edge];
    if (z >= t.z.back()) {
        if (z == t.z.back()) return {t.ratio.back(), t.inv_T.back()};
        // Beyond the rotational table: evaluate directly (probability below exp(-60)).
        return {fw::action_S(*graph_, edge, z) / fw::period_T(*graph_, edge, z), 1.0 / fw::period_T(*graph_, edge, z)};
    }
    if (z <= t.z.front()) return {t.ratio.front(), t.inv_T.front()};
    const std::size_t i = static_cast<std::size_t>(std::upper_bound(t.z.begin(), t.z.end(), z) - t.z.begin()) - 1;
    return {interpolate(t.z, t.ratio, i, z), interpolate(t.z, t.inv_T, i, z)};
}

SdeCoefficients GraphDiffusion::coefficients(int edge, double z) const {
    const auto& e = graph_->edge(edge);
    if (z < e.z_lo || z > e.z_hi) throw OutOfRange("graph diffusion: z outside the edge");
    const double r = std::max(0.0, lookup(edge, z).ratio);
    return {1.0 / beta_ - r, std::sqrt(2.0 * r / beta_)};
}

double GraphDiffusion::mean_velocity(int edge, double z) const {
    const auto& e = graph_->edge(edge);
    if (e.is_well()) return 0.0;
    return e.p_sign * period_ * lookup(edge, z).inv_T;
}

GraphState GraphDiffusion::sample_stationary(Rng& rng) const {
    const double u = uniform01(rng);
    const int edge = static_cast<int>(std::upper_bound(edge_cdf_.begin(), edge_cdf_.end(), u) - edge_cdf_.begin());
    const Table& t = tables_[std::min<std::size_t>(edge, tables_.size() - 1)];
    const double w = uniform01(rng);
    std::size_t i = static_cast<std::size_t>(std::upper_bound(t.cdf.begin(), t.cdf.end(), w) - t.cdf.begin());
    i = std::clamp<std::size_t>(i, 1, t.cdf.size() - 1) - 1;
    const double span = t.cdf[i + 1] - t.cdf[i];
    const double f = span > 0.0 ? (w - t.cdf[i]) / span : 0.5;
    return {std::min<int>(edge, static_cast<int>(tables_.size()) - 1), t.z[i] + f * (t.z[i + 1] - t.z[i]), 0.0};
}

GraphState GraphDiffusion::cross_vertex(int vertex, double overshoot, Rng& rng, StepStats* stats) const {
    const GluingRule& rule = rules_[vertex];
    const auto probs = rule.probabilities();
    double u = uniform01(rng);
    std::size_t k = 0;
    while (k + 1 < probs.size() && u >= probs[k]) u -= probs[k++];
    if (stats) ++stats->vertex_choices[vertex][k];
    const auto& e = graph_->edge(rule.adjacent[k].first);
    const double width = e.z_hi - e.z_lo;
    const double inside = std::isfinite(width) ? std::min(overshoot, 0.5 * width) : overshoot;
    GraphState s;
    s.edge = e.id;
    s.z = e.lo_vertex == vertex ? e.z_lo + inside : e.z_hi - inside;
    return s;
}

GraphState GraphDiffusion::step(GraphState s, double dt, Rng& rng, double* qstar, StepStats* stats) const {
    if (!(dt > 0.0)) throw DomainError("graph diffusion: dt must be positive");
    const auto& vertices = graph_->vertices();
    double remaining = dt;
    while (remaining > 0.0) {
        const auto& e = graph_->edge(s.edge);
        const Lookup lk = lookup(s.edge, s.z);
        const double r = std::max(0.0, lk.ratio);
        const double b = 1.0 / beta_ - r;
        const double sigma = std::sqrt(2.0 * r / beta_);
        const double dist = std::min(s.z - e.z_lo, e.z_hi - s.z);
        double h = remaining;
        if (sigma * sigma * h > 0.01 * dist * dist) h = std::max(0.01 * dist * dist / (sigma * sigma), dt * kSubstepFloor);
        if (std::abs(b) * h > 0.1 * dist) h = std::max(0.1 * dist / std::abs(b), dt * kSubstepFloor);
        h = std::min(h, remaining);
        if (qstar && !e.is_well()) *qstar += e.p_sign * period_ * lk.inv_T * h;
        double z = s.z + b * h + sigma * std::sqrt(h) * standard_normal(rng);
        remaining -= h;
        s.t += h;
        if (stats) ++stats->substeps;
        if (z < e.z_lo) {
            const bool minimum = vertices[e.lo_vertex].kind == fw::VertexKind::minimum;
            if (minimum) {
                z = std::min(2.0 * e.z_lo - z, 0.5 * (e.z_lo + e.z_hi));
            } else {
                const double t = s.t;
                s = cross_vertex(e.lo_vertex, e.z_lo - z, rng, stats);
                s.t = t;
                continue;
            }
        } else if (z > e.z_hi) {
            const double t = s.t;
            s = cross_vertex(e.hi_vertex, z - e.z_hi, rng, stats);
            s.t = t;
            continue;
        }
        s.z = z;
    }
    return s;
}

QstarResult simulate_qstar(const GraphDiffusion& model, const QstarConfig& cfg) {
    if (!(cfg.t_end > 0.0) || !(cfg.dt > 0.0)) throw ValidationError("graph-sim: t_end and dt must be positive");
    if (cfg.n_paths < 100) throw ValidationError("graph-sim: n_paths must be at least 100");
    if (cfg.n_records < 1) throw ValidationError("graph-sim: n_records must be positive");
    if (std::abs(cfg.beta - model.beta()) > 0.0) throw ValidationError("graph-sim: beta differs from the model");

    const int R = cfg.n_records;
    const double interval = cfg.t_end / R;
    const long per_record = std::max(1L, static_cast<long>(std::llround(interval / cfg.dt)));
    const double h = interval / static_cast<double>(per_record);
    const long P = cfg.n_paths;

    std::vector<double> q(static_cast<std::size_t>(P) * R), zs(static_cast<std::size_t>(P) * R);
    std::vector<StepStats> stats(P);
    parallel_for(
        P,
        [&](long path) {
            Rng rng = make_rng(cfg.seed, static_cast<std::uint64_t>(path));
            StepStats st = model.make_stats();
            GraphState s = model.sample_stationary(rng);
            double qs = 0.0;
            for (int j = 0; j < R; ++j) {
                for (long k = 0; k < per_record; ++k) s = model.step(s, h, rng, &qs, &st);
                q[static_cast<std::size_t>(path) * R + j] = qs;
                zs[static_cast<std::size_t>(path) * R + j] = s.z;
            }
            stats[path] = std::move(st);
        },
        cfg.workers);

    QstarResult res;
    res.stats = model.make_stats();
    for (const auto& st : stats) {
        res.stats.substeps += st.substeps;
        for (std::size_t v = 0; v < st.vertex_choices.size(); ++v)
            for (std::size_t k = 0; k < st.vertex_choices[v].size(); ++k)
                res.stats.vertex_choices[v][k] += st.vertex_choices[v][k];
    }
    for (int j = 0; j < R; ++j) {
        double mean = 0.0;
        for (long p = 0; p < P; ++p) mean += q[static_cast<std::size_t>(p) * R + j];
        mean /= static_cast<double>(P);
        double var = 0.0;
        for (long p = 0; p < P; ++p) {
            const double d = q[static_cast<std::size_t>(p) * R + j] - mean;
            var += d * d;
        }
        res.times.push_back(interval * (j + 1));
        res.mean_qstar.push_back(mean);
        res.var_qstar.push_back(var / static_cast<double>(P - 1));
    }
    for (long p = 0; p < P; ++p) res.final_qstar.push_back(q[static_cast<std::size_t>(p) * R + R - 1]);
    res.z_samples = std::move(zs);

    // Delete-one jackknife of var(q*(t_end)) / (2 t_end).
    const auto& x = res.final_qstar;
    const double n = static_cast<double>(P);
    double s1 = 0.0, s2 = 0.0;
    for (double v : x) s1 += v;
    double mean = s1 / n;
    for (double v : x) s2 += (v - mean) * (v - mean);
    std::vector<double> loo(P);
    for (long i = 0; i < P; ++i) {
        const double d = x[i] - mean;
        // Sum of squares about the leave-one-out mean, from the full-sample sum.
        const double ss = s2 - d * d * n / (n - 1.0);
        loo[i] = ss / (n - 2.0) / (2.0 * cfg.t_end);
    }
    const double loo_mean = std::accumulate(loo.begin(), loo.end(), 0.0) / n;
    double jk = 0.0;
    for (double v : loo) jk += (v - loo_mean) * (v - loo_mean);
    res.estimate.value = res.var_qstar.back() / (2.0 * cfg.t_end);
    res.estimate.ci_half_width = 1.96 * std::sqrt((n - 1.0) / n * jk);
    res.estimate.method = "fw-graph-mc";
    res.estimate.beta = cfg.beta;
    return res;
}

QstarResult simulate_qstar(const PeriodicPotential& V, const QstarConfig& cfg) {
    const fw::EnergyGraph g = fw::build_graph(V);
    const GraphDiffusion model(g, cfg.beta);
    return simulate_qstar(model, cfg);
}

double gibbs_energy_cdf(const PeriodicPotential& V, double beta, double z) {
    if (!(beta > 0.0)) throw DomainError("gibbs_energy_cdf: beta must be positive");
    constexpr int n = 20000;
    const double l = V.period();
    double num = 0.0, den = 0.0;
    const double vmin = critical_points(V).E_min;
    for (int i = 0; i < n; ++i) {
        const double v = V.value(l * i / n);
        const double w = std::exp(-beta * (v - vmin));
        den += w;
        if (z > v) num += w * std::erf(std::sqrt(beta * (z - v)));
    }
    return num / den;
}

double ks_distance(std::vector<double> samples, const PeriodicPotential& V, double beta) {
    if (samples.empty()) throw ValidationError("ks_distance: no samples");
    std::sort(samples.begin(), samples.end());
    const double lo = samples.front(), hi = samples.back();
    constexpr int grid = 4000;
    std::vector<double> zg(grid + 1), fg(grid + 1);
    for (int i = 0; i <= grid; ++i) {
        zg[i] = lo + (hi - lo) * i / grid;
        fg[i] = gibbs_energy_cdf(V, beta, zg[i]);
    }
    const double n = static_cast<double>(samples.size());
    double d = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        std::size_t j = static_cast<std::size_t>((samples[i] - lo) / (hi - lo) * grid);
        j = std::min<std::size_t>(j, grid - 1);
        const double F = hi > lo ? interpolate(zg, fg, j, samples[i]) : fg[0];
        d = std::max({d, (i + 1) / n - F, F - i / n});
    }
    return d;
}

nlohmann::json to_json(const QstarResult& r, const QstarConfig& cfg) {
    nlohmann::json j;
    j["estimate"] = to_json(r.estimate);
    j["D_star"] = r.estimate.value;
    j["ci"] = r.estimate.ci_half_width;
    j["n_paths"] = cfg.n_paths;
    j["dt"] = cfg.dt;
    j["t_end"] = cfg.t_end;
    j["seed"] = cfg.seed;
    j["substeps"] = r.stats.substeps;
    j["vertex_choices"] = r.stats.vertex_choices;
    return j;
}

}  // namespace perdiff::graph
