#include "perdiff/cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <locale>
#include <memory>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "perdiff/errors.hpp"
#include "perdiff/fw_graph.hpp"
#include "perdiff/graph_diffusion.hpp"
#include "perdiff/langevin_mc.hpp"
#include "perdiff/parallel.hpp"
#include "perdiff/smoluchowski.hpp"
#include "perdiff/spectral.hpp"

namespace perdiff::cli {

namespace {

using json = nlohmann::json;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string key_of(std::string flag) {
    std::replace(flag.begin(), flag.end(), '-', '_');
    return flag;
}

// Options registered on a subcommand, filled from a config document when absent on the
// command line and echoed back as the resolved configuration.
class Params {
public:
    explicit Params(CLI::App* app) : app_(app) {}

    template <class T>
    void add(const std::string& flag, T& var, const std::string& help) {
        CLI::Option* opt = app_->add_option("--" + flag, var, help)->capture_default_str();
        const std::string key = key_of(flag);
        keys_.insert(key);
        fill_.push_back([opt, key, &var](const json& cfg) {
            if (opt->count() == 0 && cfg.contains(key)) var = cfg.at(key).get<T>();
        });
        echo_.push_back([key, &var](json& j) { j[key] = var; });
    }

    void add_switch(const std::string& flag, bool& var, const std::string& help) {
        CLI::Option* opt = app_->add_flag("--" + flag, var, help);
        const std::string key = key_of(flag);
        keys_.insert(key);
        fill_.push_back([opt, key, &var](const json& cfg) {
            if (opt->count() == 0 && cfg.contains(key)) var = cfg.at(key).get<bool>();
        });
        echo_.push_back([key, &var](json& j) { j[key] = var; });
    }

    // Potential: a name, a file path, or (in a config file) an inline object.
    void add_potential(std::string& spec) {
        CLI::Option* opt = app_->add_option("--potential", spec, "pendulum, zero, inline JSON or a JSON file")
                               ->capture_default_str();
        keys_.insert("potential");
        fill_.push_back([opt, &spec](const json& cfg) {
            if (opt->count() > 0 || !cfg.contains("potential")) return;
            const json& p = cfg.at("potential");
            spec = p.is_object() ? p.dump() : p.get<std::string>();
        });
    }

    // Friction list: repeatable, comma separated, or lo:hi:n.
    void add_gamma_list(std::vector<std::string>& tokens) {
        CLI::Option* opt = app_->add_option("--gamma", tokens, "friction values: 0.1,1,10 or lo:hi:n (geometric)")
                               ->delimiter(',');
        keys_.insert("gamma");
        fill_.push_back([opt, &tokens](const json& cfg) {
            if (opt->count() > 0 || !cfg.contains("gamma")) return;
            const json& g = cfg.at("gamma");
            tokens.clear();
            if (g.is_array())
                for (const auto& v : g) tokens.push_back(v.is_string() ? v.get<std::string>() : v.dump());
            else
                tokens.push_back(g.is_string() ? g.get<std::string>() : g.dump());
        });
    }

    void apply(const json& cfg) const {
        for (auto it = cfg.begin(); it != cfg.end(); ++it)
            if (!keys_.count(it.key()) && it.key() != "command" && it.key() != "version")
                throw ValidationError("config: unknown key '" + it.key() + "'");
        for (const auto& f : fill_) f(cfg);
    }

    json echo() const {
        json j = json::object();
        for (const auto& e : echo_) e(j);
        return j;
    }

private:
    CLI::App* app_;
    std::set<std::string> keys_;
    std::vector<std::function<void(const json&)>> fill_;
    std::vector<std::function<void(json&)>> echo_;
};

class Csv {
public:
    explicit Csv(const std::vector<std::string>& header) {
        s_.imbue(std::locale::classic());
        s_.precision(std::numeric_limits<double>::max_digits10);
        for (std::size_t i = 0; i < header.size(); ++i) s_ << (i ? "," : "") << header[i];
        s_ << '\n';
    }
    void row(const std::vector<double>& values) {
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (i) s_ << ',';
            if (std::isfinite(values[i])) s_ << values[i];
        }
        s_ << '\n';
    }
    std::string str() const { return s_.str(); }

private:
    std::ostringstream s_;
};

struct Output {
    json doc = json::object();
    std::string csv;
    bool failed = false;  // numerical failure recorded in the document
};

struct Common {
    std::string config_path;
    std::string csv_path;
    std::string json_path;
    std::string potential = "pendulum";
    double beta = 1.0;
};

// One subcommand: its parameters and the pipeline that produces the output.
struct Command {
    CLI::App* app = nullptr;
    std::unique_ptr<Params> params;
    std::shared_ptr<Common> common = std::make_shared<Common>();
    std::function<Output()> execute;
    std::function<json()> extra_echo;
};

void add_common(Command& c) {
    c.app->add_option("--config", c.common->config_path, "JSON config file; flags override its values");
    c.app->add_option("--csv", c.common->csv_path, "CSV output path ('-' for standard output)");
    c.app->add_option("--json", c.common->json_path, "JSON output path (default: standard output)");
    c.params->add_potential(c.common->potential);
    c.params->add("beta", c.common->beta, "inverse temperature");
}

json row_error(const std::string& what) { return json{{"error", what}}; }

double nan_if_null(const json& row, const char* key) {
    return row.contains(key) && row.at(key).is_number() ? row.at(key).get<double>() : kNaN;
}

// ---------------------------------------------------------------------------------------

struct DeffArgs {
    std::vector<std::string> gamma{"1"};
    int nh = 0;
    int nk = 0;
    bool no_gap = false;
    bool no_l4 = false;
    int workers = 0;
};

json deff_row(const PeriodicPotential& V, double beta, double gamma, const DeffArgs& a) {
    spectral::GalerkinBasis basis = spectral::default_basis(gamma, beta);
    if (a.nh > 0) basis.n_hermite = a.nh;
    if (a.nk > 0) basis.n_fourier = a.nk;
    const auto sol = spectral::solve_cell(spectral::assemble(V, beta, gamma, basis));
    const auto est = spectral::deff_spectral(sol);
    json row{{"gamma", gamma},
             {"beta", beta},
             {"D", est.value},
             {"gammaD", gamma * est.value},
             {"ci", est.ci_half_width},
             {"residual", sol.residual_norm},
             {"truncation_estimate", sol.truncation_estimate},
             {"d_inner", sol.d_inner},
             {"d_energy", sol.d_energy},
             {"n_hermite", basis.n_hermite},
             {"n_fourier", basis.n_fourier},
             {"gap", nullptr},
             {"l4_norm", nullptr}};
    if (!a.no_gap) row["gap"] = spectral::spectral_gap(V, beta, gamma, spectral::default_gap_basis(beta));
    if (!a.no_l4) row["l4_norm"] = spectral::lp_norm_dp_phi(sol);
    return row;
}

// Runs one row per gamma in parallel. Numerical failures are kept per row.
std::vector<json> gamma_rows(const std::vector<double>& gammas, int workers,
                             const std::function<json(double)>& row) {
    std::vector<json> rows(gammas.size());
    parallel_for(
        static_cast<long>(gammas.size()),
        [&](long i) {
            try {
                rows[i] = row(gammas[i]);
            } catch (const NumericalError& e) {
                rows[i] = row_error(e.what());
                rows[i]["gamma"] = gammas[i];
            }
        },
        workers);
    return rows;
}

bool any_failed(const std::vector<json>& rows) {
    return std::any_of(rows.begin(), rows.end(), [](const json& r) { return r.contains("error"); });
}

Command make_deff(CLI::App& app) {
    auto a = std::make_shared<DeffArgs>();
    Command c;
    c.app = app.add_subcommand("deff", "effective diffusivity from the spectral cell solve");
    c.params = std::make_unique<Params>(c.app);
    add_common(c);
    c.params->add_gamma_list(a->gamma);
    c.params->add("nh", a->nh, "Hermite levels (0 = automatic)");
    c.params->add("nk", a->nk, "Fourier modes |k| <= nk (0 = automatic)");
    c.params->add_switch("no-gap", a->no_gap, "skip the spectral gap");
    c.params->add_switch("no-l4", a->no_l4, "skip the L4 norm of d_p phi");
    c.params->add("workers", a->workers, "worker threads (0 = default)");
    c.extra_echo = [a] { return json{{"gamma", parse_gamma_list(a->gamma)}}; };
    std::shared_ptr<const Common> common = c.common;
    c.execute = [a, common] {
        const auto V = parse_potential(common->potential);
        const double beta = common->beta;
        const auto gammas = parse_gamma_list(a->gamma);
        const auto rows = gamma_rows(gammas, a->workers, [&](double g) { return deff_row(V, beta, g, *a); });
        Output out;
        Csv csv({"gamma", "beta", "D", "gammaD", "residual", "truncation_estimate", "gap", "l4_norm"});
        for (const auto& r : rows)
            csv.row({r.at("gamma").get<double>(), beta, nan_if_null(r, "D"), nan_if_null(r, "gammaD"),
                     nan_if_null(r, "residual"), nan_if_null(r, "truncation_estimate"), nan_if_null(r, "gap"),
                     nan_if_null(r, "l4_norm")});
        out.csv = csv.str();
        out.doc["rows"] = rows;
        if (rows.size() == 1 && !rows[0].contains("error"))
            for (const char* k : {"D", "gammaD", "ci", "residual", "truncation_estimate", "gap", "l4_norm"})
                out.doc[k] = rows[0].at(k);
        out.failed = any_failed(rows);
        return out;
    };
    return c;
}

// ---------------------------------------------------------------------------------------

struct BoundsArgs {
    std::vector<std::string> gamma{"0.1", "0.5", "1", "5", "10"};
    int nh = 0;
    int nk = 0;
    int workers = 0;
};

Command make_bounds(CLI::App& app) {
    auto a = std::make_shared<BoundsArgs>();
    Command c;
    c.app = app.add_subcommand("bounds-check", "check dstar/gamma <= D <= dbar/gamma row by row");
    c.params = std::make_unique<Params>(c.app);
    add_common(c);
    c.params->add_gamma_list(a->gamma);
    c.params->add("nh", a->nh, "Hermite levels (0 = automatic)");
    c.params->add("nk", a->nk, "Fourier modes (0 = automatic)");
    c.params->add("workers", a->workers, "worker threads (0 = default)");
    c.extra_echo = [a] { return json{{"gamma", parse_gamma_list(a->gamma)}}; };
    std::shared_ptr<const Common> common = c.common;
    c.execute = [a, common] {
        const auto V = parse_potential(common->potential);
        const double beta = common->beta;
        const double ds = fw::dstar(V, beta).value;
        const double db = dbar(V, beta).value;
        const auto rows = gamma_rows(parse_gamma_list(a->gamma), a->workers, [&](double g) {
            spectral::GalerkinBasis basis = spectral::default_basis(g, beta);
            if (a->nh > 0) basis.n_hermite = a->nh;
            if (a->nk > 0) basis.n_fourier = a->nk;
            const auto sol = spectral::solve_cell(spectral::assemble(V, beta, g, basis));
            const double D = spectral::deff_spectral(sol).value;
            const double eps = std::max(10.0 * sol.truncation_estimate, 1e-12) * D;
            const double lo = ds / g, hi = db / g;
            return json{{"gamma", g}, {"lower", lo}, {"D", D}, {"upper", hi}, {"eps", eps},
                        {"ok", lo - eps <= D && D <= hi + eps}};
        });
        Output out;
        Csv csv({"gamma", "lower", "D", "upper", "eps", "ok"});
        bool all_ok = true;
        for (const auto& r : rows) {
            const bool ok = r.value("ok", false);
            all_ok = all_ok && ok;
            csv.row({r.at("gamma").get<double>(), nan_if_null(r, "lower"), nan_if_null(r, "D"),
                     nan_if_null(r, "upper"), nan_if_null(r, "eps"), ok ? 1.0 : 0.0});
        }
        out.csv = csv.str();
        out.doc["dstar"] = ds;
        out.doc["dbar"] = db;
        out.doc["rows"] = rows;
        out.doc["all_within_bounds"] = all_ok;
        out.failed = !all_ok;
        return out;
    };
    return c;
}

// ---------------------------------------------------------------------------------------

struct GapArgs {
    std::vector<std::string> gamma{"1"};
    int nh = 0;
    int nk = 0;
    int workers = 0;
};

Command make_gap(CLI::App& app) {
    auto a = std::make_shared<GapArgs>();
    Command c;
    c.app = app.add_subcommand("gap", "spectral gap of the kinetic generator");
    c.params = std::make_unique<Params>(c.app);
    add_common(c);
    c.params->add_gamma_list(a->gamma);
    c.params->add("nh", a->nh, "Hermite levels (0 = automatic)");
    c.params->add("nk", a->nk, "Fourier modes (0 = automatic)");
    c.params->add("workers", a->workers, "worker threads (0 = default)");
    c.extra_echo = [a] { return json{{"gamma", parse_gamma_list(a->gamma)}}; };
    std::shared_ptr<const Common> common = c.common;
    c.execute = [a, common] {
        const auto V = parse_potential(common->potential);
        const double beta = common->beta;
        spectral::GalerkinBasis basis = spectral::default_gap_basis(beta);
        if (a->nh > 0) basis.n_hermite = a->nh;
        if (a->nk > 0) basis.n_fourier = a->nk;
        const auto rows = gamma_rows(parse_gamma_list(a->gamma), a->workers, [&](double g) {
            return json{{"gamma", g}, {"gap", spectral::spectral_gap(V, beta, g, basis)}};
        });
        Output out;
        Csv csv({"gamma", "gap"});
        for (const auto& r : rows) csv.row({r.at("gamma").get<double>(), nan_if_null(r, "gap")});
        out.csv = csv.str();
        out.doc["n_hermite"] = basis.n_hermite;
        out.doc["n_fourier"] = basis.n_fourier;
        out.doc["rows"] = rows;
        out.failed = any_failed(rows);
        return out;
    };
    return c;
}

// ---------------------------------------------------------------------------------------

struct FwArgs {
    int points = 50;
};

Command make_fw(CLI::App& app) {
    auto a = std::make_shared<FwArgs>();
    Command c;
    c.app = app.add_subcommand("fw", "energy graph, orbit period and action, dstar");
    c.params = std::make_unique<Params>(c.app);
    add_common(c);
    c.params->add("points", a->points, "energy points per edge in the CSV");
    std::shared_ptr<const Common> common = c.common;
    c.execute = [a, common] {
        if (a->points < 1) throw ValidationError("fw: points must be positive");
        const auto V = parse_potential(common->potential);
        const double beta = common->beta;
        const auto g = fw::build_graph(V);
        Output out;
        Csv csv({"z", "edge_id", "T", "S"});
        const double span = std::max(10.0 / beta, 2.0 * (g.E0() - g.E_min()) + 1.0);
        for (const auto& e : g.edges()) {
            const double hi = e.is_infinite() ? e.z_lo + span : e.z_hi;
            for (int i = 0; i < a->points; ++i) {
                const double z = e.z_lo + (i + 0.5) / a->points * (hi - e.z_lo);
                csv.row({z, double(e.id), fw::period_T(g, e.id, z), fw::action_S(g, e.id, z)});
            }
        }
        out.csv = csv.str();
        const auto ds = fw::dstar(g, beta);
        out.doc["E0"] = g.E0();
        out.doc["Z_beta"] = fw::graph_partition(g, beta);
        out.doc["dstar"] = ds.value;
        out.doc["dstar_ci"] = ds.ci_half_width;
        try {
            const auto asy = fw::dstar_asymptotics(g, beta);
            out.doc["T0"] = asy.T0;
            out.doc["S_E0"] = asy.S_E0;
            out.doc["dstar_low_beta"] = asy.low_beta;
            out.doc["dstar_low_beta_free"] = asy.low_beta_free;
            out.doc["dstar_high_beta"] = asy.high_beta;
        } catch (const DegeneratePotential&) {
            for (const char* k : {"T0", "S_E0", "dstar_low_beta", "dstar_low_beta_free", "dstar_high_beta"})
                out.doc[k] = nullptr;
        }
        out.doc["graph"] = fw::describe(g);
        return out;
    };
    return c;
}

// ---------------------------------------------------------------------------------------

struct SmolArgs {
    double gamma = 10.0;
    int grid = 64;
};

Command make_smol(CLI::App& app) {
    auto a = std::make_shared<SmolArgs>();
    Command c;
    c.app = app.add_subcommand("smol", "overdamped diffusivity, corrector and large-gamma expansion");
    c.params = std::make_unique<Params>(c.app);
    add_common(c);
    c.params->add("gamma", a->gamma, "friction for the expansion");
    c.params->add("grid", a->grid, "corrector grid points");
    std::shared_ptr<const Common> common = c.common;
    c.execute = [a, common] {
        const auto V = parse_potential(common->potential);
        const auto r = smoluchowski(V, common->beta, a->gamma, a->grid);
        Output out;
        Csv csv({"q", "chi", "one_plus_dchi"});
        for (std::size_t i = 0; i < r.corrector.q.size(); ++i)
            csv.row({r.corrector.q[i], r.corrector.chi[i], r.corrector.one_plus_dchi[i]});
        out.csv = csv.str();
        out.doc["dbar"] = r.dbar;
        out.doc["Z"] = r.scalars.Z;
        out.doc["Zhat"] = r.scalars.Zhat;
        out.doc["Z1"] = r.scalars.Z1;
        out.doc["expansion"] = {{"gamma", a->gamma},
                                {"value", r.expansion.value()},
                                {"leading", r.expansion.leading},
                                {"correction", r.expansion.correction}};
        out.doc["corrector_identity_error"] = r.corrector.identity_error;
        return out;
    };
    return c;
}

// ---------------------------------------------------------------------------------------

Command make_mc(CLI::App& app) {
    auto cfg = std::make_shared<mc::McConfig>();
    Command c;
    c.app = app.add_subcommand("mc", "Langevin Monte Carlo estimate of the effective diffusivity");
    c.params = std::make_unique<Params>(c.app);
    add_common(c);
    c.params->add("gamma", cfg->gamma, "friction");
    c.params->add("dt", cfg->dt, "time step");
    c.params->add("t-end", cfg->t_end, "final time (>= 20/gamma)");
    c.params->add("n-paths", cfg->n_paths, "number of trajectories");
    c.params->add("seed", cfg->seed, "master seed");
    c.params->add("record-stride", cfg->record_stride, "steps between recorded times");
    c.params->add("workers", cfg->workers, "worker threads (0 = default)");
    c.params->add("bootstrap", cfg->bootstrap, "bootstrap resamples");
    std::shared_ptr<const Common> common = c.common;
    c.execute = [cfg, common] {
        cfg->V = parse_potential(common->potential);
        cfg->beta = common->beta;
        const auto r = mc::estimate_deff_msd(*cfg);
        Output out;
        Csv csv({"t", "msd", "msd_over_2t", "p_var"});
        const auto& e = r.ensemble;
        for (std::size_t i = 0; i < e.times.size(); ++i)
            csv.row({e.times[i], e.msd[i], e.msd[i] / (2.0 * e.times[i]), e.p_variance[i]});
        out.csv = csv.str();
        out.doc = mc::to_json(r, *cfg);
        return out;
    };
    return c;
}

// ---------------------------------------------------------------------------------------

Command make_graph_sim(CLI::App& app) {
    auto cfg = std::make_shared<graph::QstarConfig>();
    Command c;
    c.app = app.add_subcommand("graph-sim", "simulate the limiting diffusion on the energy graph");
    c.params = std::make_unique<Params>(c.app);
    add_common(c);
    c.params->add("t-end", cfg->t_end, "final time");
    c.params->add("dt", cfg->dt, "time step");
    c.params->add("n-paths", cfg->n_paths, "number of paths");
    c.params->add("seed", cfg->seed, "master seed");
    c.params->add("n-records", cfg->n_records, "recorded times");
    c.params->add("workers", cfg->workers, "worker threads (0 = default)");
    std::shared_ptr<const Common> common = c.common;
    c.execute = [cfg, common] {
        const auto V = parse_potential(common->potential);
        cfg->beta = common->beta;
        const auto g = fw::build_graph(V);
        const graph::GraphDiffusion model(g, cfg->beta);
        const auto r = graph::simulate_qstar(model, *cfg);
        Output out;
        Csv csv({"t", "mean_qstar", "var_qstar"});
        for (std::size_t i = 0; i < r.times.size(); ++i) csv.row({r.times[i], r.mean_qstar[i], r.var_qstar[i]});
        out.csv = csv.str();
        out.doc = graph::to_json(r, *cfg);
        out.doc["dstar_reference"] = fw::dstar(g, cfg->beta).value;
        out.doc["ks_distance"] = graph::ks_distance(r.z_samples, V, cfg->beta);
        return out;
    };
    return c;
}

// ---------------------------------------------------------------------------------------

struct SweepArgs {
    std::vector<std::string> gamma{"0.1", "0.3", "1", "3", "10"};
    int nh = 0;
    int nk = 0;
    long mc_paths = 0;
    double mc_dt = 0.0;
    double mc_time = 50.0;
    std::uint64_t seed = 1;
    int workers = 0;
};

Command make_sweep(CLI::App& app) {
    auto a = std::make_shared<SweepArgs>();
    Command c;
    c.app = app.add_subcommand("sweep", "gamma sweep: spectral and Monte Carlo gamma D against dstar, dbar");
    c.params = std::make_unique<Params>(c.app);
    add_common(c);
    c.params->add_gamma_list(a->gamma);
    c.params->add("nh", a->nh, "Hermite levels (0 = automatic)");
    c.params->add("nk", a->nk, "Fourier modes (0 = automatic)");
    c.params->add("mc-paths", a->mc_paths, "Monte Carlo paths per row (0 = no Monte Carlo column)");
    c.params->add("mc-dt", a->mc_dt, "Monte Carlo step (0 = largest admissible, at most 0.01)");
    c.params->add("mc-time", a->mc_time, "Monte Carlo final time in units of 1/gamma");
    c.params->add("seed", a->seed, "master seed; row i uses stream i");
    c.params->add("workers", a->workers, "worker threads (0 = default)");
    c.extra_echo = [a] { return json{{"gamma", parse_gamma_list(a->gamma)}}; };
    std::shared_ptr<const Common> common = c.common;
    c.execute = [a, common] {
        const auto V = parse_potential(common->potential);
        const double beta = common->beta;
        const auto gammas = parse_gamma_list(a->gamma);
        const double ds = fw::dstar(V, beta).value;
        const double db = dbar(V, beta).value;
        auto rows = gamma_rows(gammas, a->workers, [&](double g) {
            spectral::GalerkinBasis basis = spectral::default_basis(g, beta);
            if (a->nh > 0) basis.n_hermite = a->nh;
            if (a->nk > 0) basis.n_fourier = a->nk;
            const auto sol = spectral::solve_cell(spectral::assemble(V, beta, g, basis));
            return json{{"gamma", g},
                        {"gammaD_spectral", g * spectral::deff_spectral(sol).value},
                        {"truncation_estimate", sol.truncation_estimate}};
        });
        // Monte Carlo rows run one after another, each parallel over its paths.
        for (std::size_t i = 0; i < rows.size(); ++i) {
            json& r = rows[i];
            r["gammaD_mc"] = nullptr;
            r["gammaD_ci"] = nullptr;
            r["dstar"] = ds;
            r["dbar"] = db;
            r["expansion"] = dgamma_large_expansion(V, beta, gammas[i]);
            if (a->mc_paths <= 0) continue;
            mc::McConfig cfg;
            cfg.V = V;
            cfg.beta = beta;
            cfg.gamma = gammas[i];
            cfg.dt = a->mc_dt > 0.0 ? a->mc_dt : std::min(0.01, cfg.max_dt());
            cfg.t_end = a->mc_time / gammas[i];
            cfg.n_paths = a->mc_paths;
            cfg.seed = stream_seed(a->seed, i);
            cfg.record_stride = std::max(1L, static_cast<long>(std::llround(cfg.t_end / cfg.dt / 200.0)));
            cfg.workers = a->workers;
            try {
                const auto m = mc::estimate_deff_msd(cfg);
                r["gammaD_mc"] = gammas[i] * m.fit.estimate.value;
                r["gammaD_ci"] = gammas[i] * m.fit.estimate.ci_half_width;
            } catch (const NumericalError& e) {
                r["error"] = e.what();
            }
        }
        Output out;
        Csv csv({"gamma", "gammaD_spectral", "gammaD_mc", "gammaD_ci", "dstar", "dbar", "expansion"});
        for (const auto& r : rows)
            csv.row({r.at("gamma").get<double>(), nan_if_null(r, "gammaD_spectral"), nan_if_null(r, "gammaD_mc"),
                     nan_if_null(r, "gammaD_ci"), ds, db, nan_if_null(r, "expansion")});
        out.csv = csv.str();
        out.doc["rows"] = rows;
        out.failed = any_failed(rows);
        return out;
    };
    return c;
}

void write_file(const std::string& path, const std::string& text, std::ostream& out) {
    if (path == "-") {
        out << text;
        return;
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ValidationError("cannot open '" + path + "' for writing");
    f << text;
    if (!f) throw ValidationError("cannot write '" + path + "'");
}

json read_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ValidationError("cannot read config file '" + path + "'");
    json cfg;
    try {
        cfg = json::parse(f);
    } catch (const json::parse_error& e) {
        throw ValidationError("config file '" + path + "': " + e.what());
    }
    if (!cfg.is_object()) throw ValidationError("config file '" + path + "' must hold a JSON object");
    return cfg;
}

}  // namespace

std::vector<double> parse_gamma_list(const std::vector<std::string>& tokens) {
    auto number = [](const std::string& s) {
        std::istringstream in(s);
        in.imbue(std::locale::classic());
        double v = 0.0;
        in >> v;
        if (in.fail() || !in.eof()) throw ValidationError("gamma: cannot parse '" + s + "'");
        return v;
    };
    std::vector<double> out;
    for (const auto& t : tokens) {
        if (t.find(':') == std::string::npos) {
            out.push_back(number(t));
            continue;
        }
        const auto a = t.find(':'), b = t.find(':', a + 1);
        if (b == std::string::npos) throw ValidationError("gamma: a range reads lo:hi:n, got '" + t + "'");
        const double lo = number(t.substr(0, a)), hi = number(t.substr(a + 1, b - a - 1));
        const double nd = number(t.substr(b + 1));
        const int n = static_cast<int>(nd);
        if (n < 1 || n != nd || !(lo > 0.0) || !(hi > 0.0)) throw ValidationError("gamma: bad range '" + t + "'");
        for (int i = 0; i < n; ++i) out.push_back(n == 1 ? lo : lo * std::pow(hi / lo, double(i) / (n - 1)));
    }
    if (out.empty()) throw ValidationError("gamma: empty grid");
    for (double g : out)
        if (!(g > 0.0) || !std::isfinite(g)) throw ValidationError("gamma: values must be positive");
    return out;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Effective diffusivity of the Langevin dynamics in a periodic potential", "perdiff"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);
    std::vector<Command> commands;
    commands.push_back(make_deff(app));
    commands.push_back(make_mc(app));
    commands.push_back(make_fw(app));
    commands.push_back(make_smol(app));
    commands.push_back(make_graph_sim(app));
    commands.push_back(make_bounds(app));
    commands.push_back(make_gap(app));
    commands.push_back(make_sweep(app));

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitInvalid;
    }

    for (auto& c : commands) {
        if (!c.app->parsed()) continue;
        try {
            if (!c.common->config_path.empty()) c.params->apply(read_config(c.common->config_path));
            Output result = c.execute();
            json doc{{"command", c.app->get_name()}, {"version", kVersion}};
            json config = c.params->echo();
            if (c.extra_echo) config.update(c.extra_echo());
            config["potential"] = to_json(parse_potential(c.common->potential));
            doc["seed"] = config.contains("seed") ? config["seed"] : json(nullptr);
            doc["config"] = config;
            doc.update(result.doc);
            if (!c.common->csv_path.empty()) write_file(c.common->csv_path, result.csv, out);
            const std::string text = doc.dump(2) + "\n";
            if (c.common->json_path.empty()) out << text;
            else write_file(c.common->json_path, text, out);
            if (result.failed) {
                err << "perdiff " << c.app->get_name() << ": one or more rows failed\n";
                return kExitNumerical;
            }
            return kExitOk;
        } catch (const ValidationError& e) {
            err << "perdiff: " << e.what() << '\n';
            return kExitInvalid;
        } catch (const json::exception& e) {
            err << "perdiff: config: " << e.what() << '\n';
            return kExitInvalid;
        } catch (const NumericalError& e) {
            err << "perdiff: " << e.what() << '\n';
            return kExitNumerical;
        } catch (const std::exception& e) {
            err << "perdiff: " << e.what() << '\n';
            return kExitNumerical;
        }
    }
    return kExitInvalid;
}

int run(int argc, const char* const* argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run(args, std::cout, std::cerr);
}

}  // namespace perdiff::cli
