// Acceptance run: one PASS/FAIL line per criterion. Exit status 0 only if every selected
// criterion passes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "perdiff/cli.hpp"
#include "perdiff/errors.hpp"
#include "perdiff/fw_graph.hpp"
#include "perdiff/graph_diffusion.hpp"
#include "perdiff/langevin_mc.hpp"
#include "perdiff/smoluchowski.hpp"
#include "perdiff/spectral.hpp"

using namespace perdiff;

namespace {

struct Verdict {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

void append(std::string& s, const std::string& part) { s += (s.empty() ? "" : "; ") + part; }

double spectral_d(const PeriodicPotential& V, double beta, double gamma, spectral::GalerkinBasis basis,
                  double* trunc = nullptr) {
    const auto sol = spectral::solve_cell(spectral::assemble(V, beta, gamma, basis), trunc != nullptr);
    if (trunc) *trunc = sol.truncation_estimate;
    return spectral::deff_spectral(sol).value;
}

double spectral_d(const PeriodicPotential& V, double beta, double gamma, double* trunc = nullptr) {
    return spectral_d(V, beta, gamma, spectral::default_basis(gamma, beta), trunc);
}

int g_workers = 0;

// 1. Free particle exactness.
Verdict free_particle() {
    Verdict v{true, ""};
    const auto V = PeriodicPotential::zero();
    double worst_spec = 0.0, worst_star = 0.0;
    int mc_fail = 0;
    std::string mc_detail;
    for (double beta : {0.5, 1.0, 2.0}) {
        const double dstar = fw::dstar(V, beta).value;
        const double dbar_v = dbar(V, beta).value;
        worst_star = std::max(worst_star, std::abs(dstar - 1.0 / beta));
        if (dbar_v != 1.0 / beta) {
            v.pass = false;
            append(v.detail, fmt("dbar(beta=%g) = %.17g != 1/beta", beta, dbar_v));
        }
        for (double gamma : {0.1, 1.0, 10.0}) {
            const double exact = 1.0 / (beta * gamma);
            worst_spec = std::max(worst_spec, std::abs(spectral_d(V, beta, gamma) - exact) / exact);
            mc::McConfig cfg;
            cfg.V = V;
            cfg.beta = beta;
            cfg.gamma = gamma;
            cfg.dt = cfg.max_dt();
            cfg.t_end = 100.0 / gamma;
            cfg.n_paths = 10000;
            cfg.record_stride = 10;
            cfg.seed = 1;
            cfg.workers = g_workers;
            const auto r = mc::estimate_deff_msd(cfg);
            const double err = std::abs(r.fit.estimate.value - exact);
            if (err > r.fit.estimate.ci_half_width) {
                ++mc_fail;
                append(mc_detail, fmt("MC beta=%g gamma=%g: D=%.5g ci=%.2g exact=%.5g", beta, gamma,
                                      r.fit.estimate.value, r.fit.estimate.ci_half_width, exact));
            }
        }
    }
    if (worst_spec > 1e-10) v.pass = false;
    if (worst_star > 1e-8) v.pass = false;
    if (mc_fail > 0) v.pass = false;
    append(v.detail, fmt("spectral max rel err %.1e (<= 1e-10); |dstar - 1/beta| max %.1e (<= 1e-8); dbar exact; "
                         "MC outside 95%% CI in %d of 9 cases",
                         worst_spec, worst_star, mc_fail));
    if (!mc_detail.empty()) append(v.detail, mc_detail);
    return v;
}

// 2. Two-sided bound.
Verdict two_sided_bound() {
    Verdict v{true, ""};
    const auto V = PeriodicPotential::pendulum();
    int rows = 0, bad = 0;
    double min_margin = 1e300;
    for (double beta : {0.5, 1.0, 2.0}) {
        const double lo = fw::dstar(V, beta).value, hi = dbar(V, beta).value;
        for (double gamma : {0.05, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0}) {
            double trunc = 0.0;
            const double D = spectral_d(V, beta, gamma, &trunc);
            const double eps = 10.0 * trunc * D;
            ++rows;
            const bool ok = lo / gamma - eps <= D && D <= hi / gamma + eps;
            min_margin = std::min(min_margin, std::min(gamma * D - lo, hi - gamma * D) / (gamma * D));
            if (!ok) {
                ++bad;
                append(v.detail, fmt("violated at beta=%g gamma=%g: %.6g not in [%.6g, %.6g]", beta, gamma, D,
                                     lo / gamma, hi / gamma));
            }
        }
    }
    v.pass = bad == 0;
    append(v.detail, fmt("%d/%d rows inside [dstar/gamma - eps, dbar/gamma + eps]; smallest relative margin %.3g",
                         rows - bad, rows, min_margin));
    return v;
}

// 3. Small-gamma limit.
Verdict small_gamma_limit() {
    const auto V = PeriodicPotential::pendulum();
    const double ds = fw::dstar(V, 1.0).value;
    std::vector<double> ratio;
    for (double g : {0.3, 0.1}) ratio.push_back(g * spectral_d(V, 1.0, g) / ds);
    auto big = spectral::default_basis(0.05, 1.0);
    const double r_default = 0.05 * spectral_d(V, 1.0, 0.05, big) / ds;
    big.n_hermite *= 2;
    big.n_fourier *= 2;
    const double r_big = 0.05 * spectral_d(V, 1.0, 0.05, big) / ds;
    ratio.push_back(r_big);
    const bool monotone = std::abs(ratio[0] - 1) > std::abs(ratio[1] - 1) && std::abs(ratio[1] - 1) > std::abs(ratio[2] - 1);
    const bool close = std::abs(r_big - 1.0) <= 0.10;
    Verdict v{monotone && close, ""};
    append(v.detail, fmt("gammaD/dstar = %.5f (0.3), %.5f (0.1), %.5f (0.05, %dx%d basis; %.5f on the default)",
                         ratio[0], ratio[1], r_big, big.n_hermite, 2 * big.n_fourier + 1, r_default));
    append(v.detail, fmt("|ratio - 1| at 0.05 = %.3f (<= 0.10: %s); monotone approach: %s", std::abs(r_big - 1),
                         close ? "yes" : "no", monotone ? "yes" : "no"));
    return v;
}

// 4. Large-gamma expansion.
Verdict large_gamma_expansion() {
    const auto V = PeriodicPotential::pendulum();
    auto err = [&](double g) { return std::abs(g * spectral_d(V, 1.0, g) - g * dgamma_large_expansion(V, 1.0, g)); };
    const double e10 = err(10.0), e20 = err(20.0);
    const double ratio = e10 / e20;
    const bool ratio_ok = ratio >= 8.0 && ratio <= 40.0;
    const bool size_ok = e10 <= 1e-3;
    Verdict v{ratio_ok && size_ok, ""};
    append(v.detail, fmt("err(10) = %.4g (<= 1e-3: %s), err(20) = %.4g, ratio %.2f (in [8, 40]: %s)", e10,
                         size_ok ? "yes" : "no", e20, ratio, ratio_ok ? "yes" : "no"));
    return v;
}

// 5. Graph quantities.
Verdict graph_quantities() {
    const auto g = fw::build_graph(PeriodicPotential::pendulum());
    double worst = 0.0;
    for (const auto& e : g.edges()) {
        const double lo = e.z_lo + 1e-3;
        const double hi = e.is_infinite() ? e.z_lo + 10.0 : e.z_hi - 1e-3;
        for (int i = 0; i < 50; ++i) {
            const double z = lo + (hi - lo) * i / 49.0;
            const double h = 1e-5 * std::max(1.0, std::abs(z));
            const double fd = (fw::action_S(g, e.id, z + h) - fw::action_S(g, e.id, z - h)) / (2 * h);
            const double T = fw::period_T(g, e.id, z);
            worst = std::max(worst, std::abs(fd - T) / T);
        }
    }
    double mass = 0.0;
    for (int vi = 0; vi < static_cast<int>(g.vertices().size()); ++vi) {
        const auto& vx = g.vertices()[vi];
        if (vx.kind != fw::VertexKind::interior) continue;
        double below = 0.0, above = 0.0;
        for (int eid : vx.edges) (g.edge(eid).hi_vertex == vi ? below : above) += fw::action_limit(g, eid, vi);
        mass = std::max(mass, std::abs(below - above) / above);
    }
    const auto asy = fw::dstar_asymptotics(g, 1.0);
    const double eT = std::abs(asy.T0 - 1.0), eS = std::abs(asy.S_E0 - 4.0 / M_PI);
    Verdict v{worst <= 1e-4 && mass <= 1e-6 && eT <= 1e-8 && eS <= 1e-8, ""};
    append(v.detail, fmt("max |S'/T - 1| = %.2e over %zu edges x 50 points; action mass mismatch %.2e; "
                         "|T0 - 1| = %.1e; |S(E0) - 4/pi| = %.1e",
                         worst, g.edges().size(), mass, eT, eS));
    return v;
}

// 6. Graph-diffusion cross-check.
Verdict graph_diffusion() {
    const auto V = PeriodicPotential::pendulum();
    const auto g = fw::build_graph(V);
    const graph::GraphDiffusion model(g, 1.0);
    graph::QstarConfig cfg;
    cfg.beta = 1.0;
    cfg.t_end = 200.0;
    cfg.dt = 2e-3;
    cfg.n_paths = 1000;
    cfg.seed = 1;
    cfg.workers = g_workers;
    const auto r = graph::simulate_qstar(model, cfg);
    const double ds = fw::dstar(g, 1.0).value;
    const double rel = std::abs(r.estimate.value - ds) / ds;
    const double ks = graph::ks_distance(r.z_samples, V, 1.0);
    bool split_ok = true;
    std::string split;
    for (const auto& rule : model.gluing_rules()) {
        if (rule.adjacent.empty()) continue;
        const auto p = rule.probabilities();
        const auto& counts = r.stats.vertex_choices[rule.vertex];
        long n = 0;
        for (long c : counts) n += c;
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double se = std::sqrt(n * p[i] * (1 - p[i]));
            const double z = (counts[i] - n * p[i]) / se;
            split_ok = split_ok && std::abs(z) <= 3.0;
            append(split, fmt("edge %d: %.5f vs %.3f (%.2f SE)", rule.adjacent[i].first, double(counts[i]) / n, p[i], z));
        }
    }
    Verdict v{rel <= 0.10 && ks < 0.01 && split_ok, ""};
    append(v.detail, fmt("D* estimate %.5f +- %.4f vs dstar %.5f (rel %.3f, <= 0.10); KS %.4f (< 0.01)", r.estimate.value,
                         r.estimate.ci_half_width, ds, rel, ks));
    append(v.detail, "splitting " + split);
    return v;
}

mc::McConfig pendulum_mc(double gamma, long paths, double t_end, long stride) {
    mc::McConfig cfg;
    cfg.gamma = gamma;
    cfg.beta = 1.0;
    cfg.dt = 0.01;
    cfg.t_end = t_end;
    cfg.n_paths = paths;
    cfg.record_stride = stride;
    cfg.seed = 1;
    cfg.workers = g_workers;
    return cfg;
}

// 7. Full dynamics against the graph limit.
Verdict full_dynamics() {
    const double ds = fw::dstar(PeriodicPotential::pendulum(), 1.0).value;
    const auto small = mc::estimate_deff_msd(pendulum_mc(0.1, 2000, 500.0, 100));
    const double gd = 0.1 * small.fit.estimate.value;
    const double rel = std::abs(gd - ds) / ds;
    const auto unit = mc::estimate_deff_msd(pendulum_mc(1.0, 10000, 50.0, 10));
    const double ratio = small.fit.tau_diff / unit.fit.tau_diff;
    Verdict v{rel <= 0.15 && ratio >= 5.0 && ratio <= 20.0, ""};
    append(v.detail, fmt("gamma D_MC(0.1) = %.5f +- %.4f vs dstar %.5f (rel %.3f, <= 0.15: %s)", gd,
                         0.1 * small.fit.estimate.ci_half_width, ds, rel, rel <= 0.15 ? "yes" : "no"));
    append(v.detail, fmt("tau_diff %.3g (gamma 0.1) / %.3g (gamma 1) = %.2f (in [5, 20]: %s)", small.fit.tau_diff,
                         unit.fit.tau_diff, ratio, ratio >= 5.0 && ratio <= 20.0 ? "yes" : "no"));
    const double spec = 0.1 * spectral_d(PeriodicPotential::pendulum(), 1.0, 0.1);
    append(v.detail, fmt("spectral gamma D(0.1) = %.5f", spec));
    return v;
}

// 8. Spectral gap.
Verdict spectral_gap() {
    const auto V = PeriodicPotential::pendulum();
    const auto basis = spectral::default_gap_basis(1.0);
    spectral::GalerkinBasis bigger = basis;
    bigger.n_hermite += 16;
    bigger.n_fourier += 2;
    std::vector<double> gaps;
    double change = 0.0;
    for (double g : {0.1, 0.3, 1.0}) {
        gaps.push_back(spectral::spectral_gap(V, 1.0, g, basis));
        const double ref = spectral::spectral_gap(V, 1.0, g, bigger);
        change = std::max(change, std::abs(ref - gaps.back()) / ref);
    }
    const double lo = *std::min_element(gaps.begin(), gaps.end());
    const double hi = *std::max_element(gaps.begin(), gaps.end());
    Verdict v{lo >= 0.05 && hi <= 3.0 * lo && change < 1e-2, ""};
    append(v.detail, fmt("gaps %.5f (0.1), %.5f (0.3), %.5f (1); min %.4f (>= 0.05), max/min %.3f (<= 3); "
                         "change on a larger basis %.1e",
                         gaps[0], gaps[1], gaps[2], lo, hi / lo, change));
    return v;
}

// 9. L4 diagnostic.
Verdict l4_growth() {
    const auto V = PeriodicPotential::pendulum();
    std::vector<double> x, y;
    double change = 0.0;
    std::string values;
    for (double g : {1.0, 0.3, 0.1}) {
        auto basis = spectral::default_basis(g, 1.0);
        const auto sol = spectral::solve_cell(spectral::assemble(V, 1.0, g, basis), false);
        const double l4 = spectral::lp_norm_dp_phi(sol);
        basis.n_hermite *= 2;
        const double ref = spectral::lp_norm_dp_phi(spectral::solve_cell(spectral::assemble(V, 1.0, g, basis), false));
        change = std::max(change, std::abs(ref - l4) / ref);
        x.push_back(std::log(1.0 / g));
        y.push_back(std::log(l4));
        append(values, fmt("%.5f (gamma %g)", l4, g));
    }
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) mx += x[i] / x.size(), my += y[i] / y.size();
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < x.size(); ++i) sxy += (x[i] - mx) * (y[i] - my), sxx += (x[i] - mx) * (x[i] - mx);
    const double exponent = sxy / sxx;
    Verdict v{exponent >= 0.0 && exponent <= 0.3, ""};
    append(v.detail, "L4 norms " + values);
    append(v.detail, fmt("fitted exponent %.4f (in [0, 0.3]: %s); change with doubled Hermite levels %.1e", exponent,
                         v.pass ? "yes" : "no", change));
    return v;
}

// 10. Intermediate scalings.
Verdict intermediate_scalings() {
    const auto V = PeriodicPotential::pendulum();
    const double ds = fw::dstar(V, 1.0).value, db = dbar(V, 1.0).value;
    const mc::ScalingFamily small{1.0, 0.2, true};
    const auto a = mc::rescaled_process_check(small, pendulum_mc(0.2, 4000, 0.0, 125), 1.0);
    const mc::ScalingFamily large{1.0, 10.0, false};
    const auto b = mc::rescaled_process_check(large, pendulum_mc(10.0, 8000, 0.0, 1000), 1.0);
    const double ra = std::abs(a.fit.estimate.value - ds) / ds;
    const double rb = std::abs(b.fit.estimate.value - db) / db;
    Verdict v{ra <= 0.20 && rb <= 0.15, ""};
    append(v.detail, fmt("small family: slope/2 %.5f +- %.4f vs dstar %.5f (rel %.3f, <= 0.20: %s)",
                         a.fit.estimate.value, a.fit.estimate.ci_half_width, ds, ra, ra <= 0.20 ? "yes" : "no"));
    append(v.detail, fmt("large family: slope/2 %.5f +- %.4f vs dbar %.5f (rel %.3f, <= 0.15: %s)",
                         b.fit.estimate.value, b.fit.estimate.ci_half_width, db, rb, rb <= 0.15 ? "yes" : "no"));
    append(v.detail, fmt("spectral gamma D: %.5f (0.2), %.5f (10)", 0.2 * spectral_d(V, 1.0, 0.2),
                         10.0 * spectral_d(V, 1.0, 10.0)));
    return v;
}

// 11. Reproducibility across worker counts.
Verdict reproducibility() {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "perdiff_acceptance";
    fs::create_directories(dir);
    auto slurp = [](const fs::path& p) {
        std::ifstream f(p, std::ios::binary);
        std::ostringstream s;
        s << f.rdbuf();
        return s.str();
    };
    const std::vector<std::vector<std::string>> runs = {
        {"mc", "--gamma", "1", "--n-paths", "400", "--t-end", "20", "--seed", "5"},
        {"graph-sim", "--n-paths", "200", "--t-end", "10", "--dt", "0.005", "--n-records", "10", "--seed", "5"},
        {"sweep", "--gamma", "0.3,1,3", "--mc-paths", "200", "--mc-time", "30", "--seed", "5"},
        {"deff", "--gamma", "0.5,2", "--no-gap"},
    };
    Verdict v{true, ""};
    for (const auto& base : runs) {
        std::string first;
        bool same = true;
        for (const char* w : {"1", "4"}) {
            auto args = base;
            const fs::path csv = dir / (base[0] + "_w" + w + ".csv");
            args.insert(args.end(), {"--workers", w, "--csv", csv.string(), "--json", (dir / "out.json").string()});
            std::ostringstream out, err;
            const int code = cli::run(args, out, err);
            if (code != 0) {
                same = false;
                append(v.detail, base[0] + " exited with " + std::to_string(code) + ": " + err.str());
                break;
            }
            const std::string text = slurp(csv);
            if (first.empty()) first = text;
            else same = same && text == first && !text.empty();
        }
        v.pass = v.pass && same;
        append(v.detail, base[0] + (same ? " identical" : " DIFFERS"));
    }
    fs::remove_all(dir);
    append(v.detail, "workers 1 vs 4, CSV compared byte for byte");
    return v;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance criteria"};
    std::vector<int> only;
    app.add_option("--only", only, "criteria to run (default: all)")->delimiter(',');
    app.add_option("--workers", g_workers, "worker threads (0 = default)");
    CLI11_PARSE(app, argc, argv);

    const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
        {"free-particle exactness", free_particle},
        {"two-sided bound", two_sided_bound},
        {"small-gamma limit", small_gamma_limit},
        {"large-gamma expansion", large_gamma_expansion},
        {"graph quantities", graph_quantities},
        {"graph-diffusion cross-check", graph_diffusion},
        {"full dynamics vs graph limit", full_dynamics},
        {"spectral gap", spectral_gap},
        {"L4 diagnostic", l4_growth},
        {"intermediate scalings", intermediate_scalings},
        {"reproducibility", reproducibility},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
        const auto start = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = criteria[i].second();
        } catch (const std::exception& e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        failed += !v.pass;
        std::cout << "criterion " << id << " " << (v.pass ? "PASS" : "FAIL") << " [" << criteria[i].first << "] "
                  << v.detail << fmt(" (%.1f s)", secs) << std::endl;
    }
    return failed == 0 ? 0 : 1;
}
