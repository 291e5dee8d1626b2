#include "perdiff/langevin_mc.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "perdiff/errors.hpp"

namespace perdiff::mc {

namespace {

constexpr std::uint64_t kBootstrapStream = 0x5bd1e995b00757a9ULL;

struct Line {
    double slope;
    double intercept;
};

Line least_squares(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    const double slope = sxx > 0.0 ? sxy / sxx : 0.0;
    return {slope, my - slope * mx};
}

double column_variance(const std::vector<double>& data, long stride, long col, const std::vector<long>& rows) {
    const double n = static_cast<double>(rows.size());
    double mean = 0.0;
    for (long r : rows) mean += data[static_cast<std::size_t>(r * stride + col)];
    mean /= n;
    double ss = 0.0;
    for (long r : rows) {
        const double d = data[static_cast<std::size_t>(r * stride + col)] - mean;
        ss += d * d;
    }
    return ss / (n - 1.0);
}

// Relative change of curve / 2t across the window, from a straight-line fit.
double signed_trend(const std::vector<double>& t, const std::vector<double>& curve) {
    std::vector<double> ratio;
    double mean = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        ratio.push_back(curve[i] / (2.0 * t[i]));
        mean += ratio.back();
    }
    mean /= static_cast<double>(ratio.size());
    return least_squares(t, ratio).slope * (t.back() - t.front()) / mean;
}

double quantile(const std::vector<double>& sorted, double q) {
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto i = static_cast<std::size_t>(pos);
    const double f = pos - static_cast<double>(i);
    return i + 1 < sorted.size() ? sorted[i] * (1.0 - f) + sorted[i + 1] * f : sorted[i];
}

}  // namespace

double McConfig::max_dt() const {
    const double omega = std::sqrt(V.max_abs_curvature());
    double limit = 1.0 / gamma;
    if (omega > 0.0) limit = std::min(limit, 1.0 / omega);
    return 0.1 * limit;
}

void McConfig::validate() const {
    if (!(beta > 0.0) || !std::isfinite(beta)) throw ValidationError("mc: beta must be positive");
    if (!(gamma > 0.0) || !std::isfinite(gamma)) throw ValidationError("mc: gamma must be positive");
    if (!(dt > 0.0)) throw ValidationError("mc: dt must be positive");
    if (dt > max_dt() * (1.0 + 1e-12))
        throw ValidationError("mc: dt = " + std::to_string(dt) + " exceeds 0.1 min(1/gamma, 1/omega_max) = " +
                              std::to_string(max_dt()));
    if (!(t_end > 0.0)) throw ValidationError("mc: t_end must be positive");
    if (n_paths < 100) throw ValidationError("mc: n_paths must be at least 100");
    if (record_stride < 1) throw ValidationError("mc: record_stride must be positive");
    if (bootstrap < 200) throw ValidationError("mc: at least 200 bootstrap resamples are required");
}

namespace {

PhasePoint draw_gibbs(const PeriodicPotential& V, double beta, double vmin, Rng& rng) {
    const double l = V.period();
    PhasePoint s;
    for (;;) {
        const double q = l * uniform01(rng);
        if (uniform01(rng) < std::exp(-beta * (V.value(q) - vmin))) {
            s.frac = q;
            break;
        }
    }
    s.p = standard_normal(rng) / std::sqrt(beta);
    return s;
}

void drift(PhasePoint& s, double h, double period) {
    s.frac += h * s.p;
    if (s.frac >= period || s.frac < 0.0) {
        const double w = std::floor(s.frac / period);
        s.winding += static_cast<long>(w);
        s.frac -= w * period;
        if (s.frac >= period) s.frac -= period;  // round-off at the upper end
        if (s.frac < 0.0) s.frac = 0.0;
    }
}

}  // namespace

PhasePoint sample_gibbs(const PeriodicPotential& V, double beta, Rng& rng) {
    if (!(beta > 0.0)) throw DomainError("sample_gibbs: beta must be positive");
    return draw_gibbs(V, beta, critical_points(V).E_min, rng);
}

void step_baoab(PhasePoint& s, double dt, double gamma, double beta, const PeriodicPotential& V, Rng& rng) {
    const double l = V.period();
    const double c = std::exp(-gamma * dt);
    const double noise = std::sqrt((1.0 - c * c) / beta);
    s.p -= 0.5 * dt * V.derivative(s.frac);
    drift(s, 0.5 * dt, l);
    s.p = c * s.p + noise * standard_normal(rng);
    drift(s, 0.5 * dt, l);
    s.p -= 0.5 * dt * V.derivative(s.frac);
}

TrajectoryEnsemble simulate(const McConfig& cfg) {
    cfg.validate();
    const long steps = static_cast<long>(std::llround(cfg.t_end / cfg.dt));
    const long R = std::max(1L, steps / cfg.record_stride);
    const double l = cfg.V.period();
    const double vmin = critical_points(cfg.V).E_min;
    TrajectoryEnsemble ens;
    ens.n_paths = cfg.n_paths;
    ens.seed = cfg.seed;
    ens.displacement.assign(static_cast<std::size_t>(cfg.n_paths * R), 0.0);
    std::vector<double> momenta(static_cast<std::size_t>(cfg.n_paths * R), 0.0);
    parallel_for(
        cfg.n_paths,
        [&](long path) {
            Rng rng = make_rng(cfg.seed, static_cast<std::uint64_t>(path));
            PhasePoint s = draw_gibbs(cfg.V, cfg.beta, vmin, rng);
            const double q0 = s.frac;
            for (long r = 0; r < R; ++r) {
                for (long k = 0; k < cfg.record_stride; ++k) step_baoab(s, cfg.dt, cfg.gamma, cfg.beta, cfg.V, rng);
                // Winding and fraction are differenced separately to keep full precision.
                ens.displacement[static_cast<std::size_t>(path * R + r)] =
                    static_cast<double>(s.winding) * l + (s.frac - q0);
                momenta[static_cast<std::size_t>(path * R + r)] = s.p;
            }
        },
        cfg.workers);
    std::vector<long> all(cfg.n_paths);
    for (long i = 0; i < cfg.n_paths; ++i) all[i] = i;
    for (long r = 0; r < R; ++r) {
        ens.times.push_back(cfg.dt * static_cast<double>((r + 1) * cfg.record_stride));
        ens.msd.push_back(column_variance(ens.displacement, R, r, all));
        ens.p_variance.push_back(column_variance(momenta, R, r, all));
    }
    return ens;
}

MsdFit fit_msd(const TrajectoryEnsemble& ens, double scale, int bootstrap, std::uint64_t seed, bool check_trend) {
    const long R = static_cast<long>(ens.times.size());
    const double t_end = ens.times.back();
    std::vector<long> window;
    for (long r = 0; r < R; ++r)
        if (ens.times[r] >= 0.5 * t_end) window.push_back(r);
    if (window.size() < 3) throw ValidationError("mc: fewer than 3 recorded times in the fit window");

    const double s2 = scale * scale;
    std::vector<double> tw, cw;
    for (long r : window) {
        tw.push_back(ens.times[r]);
        cw.push_back(s2 * ens.msd[r]);
    }
    MsdFit fit;
    fit.slope = least_squares(tw, cw).slope;
    const double D = 0.5 * fit.slope;
    if (!(D > 0.0)) throw NotDiffusive("mc: mean-square displacement is not growing");

    fit.trend = std::abs(signed_trend(tw, cw));
    fit.tau_diff = ens.times.front();
    for (long r = R - 1; r >= 0; --r) {
        if (std::abs(s2 * ens.msd[r] / (2.0 * ens.times[r]) / D - 1.0) > 0.1) {
            fit.tau_diff = r + 1 < R ? ens.times[r + 1] : t_end;
            break;
        }
    }

    std::vector<double> boot(bootstrap), boot_trend(bootstrap);
    const long P = ens.n_paths;
    for (int b = 0; b < bootstrap; ++b) {
        Rng rng = make_rng(seed ^ kBootstrapStream, static_cast<std::uint64_t>(b));
        std::vector<long> rows(P);
        for (long i = 0; i < P; ++i) rows[i] = static_cast<long>(uniform01(rng) * static_cast<double>(P));
        std::vector<double> cb;
        for (long r : window) cb.push_back(s2 * column_variance(ens.displacement, R, r, rows));
        boot[b] = 0.5 * least_squares(tw, cb).slope;
        boot_trend[b] = signed_trend(tw, cb);
    }
    std::sort(boot.begin(), boot.end());
    std::sort(boot_trend.begin(), boot_trend.end());
    // A drift counts only when it exceeds 5% and its bootstrap 95% interval excludes zero.
    const double t_lo = quantile(boot_trend, 0.025), t_hi = quantile(boot_trend, 0.975);
    if (check_trend && fit.trend > 0.05 && (t_lo > 0.0 || t_hi < 0.0))
        throw NotDiffusive("mc: msd/2t drifts by " + std::to_string(100.0 * fit.trend) +
                           "% across the fit window; increase t_end");
    fit.estimate.value = D;
    fit.estimate.ci_half_width = 0.5 * (quantile(boot, 0.975) - quantile(boot, 0.025));
    fit.estimate.method = "langevin-mc-msd";
    return fit;
}

MsdResult estimate_deff_msd(const McConfig& cfg) {
    cfg.validate();
    if (cfg.t_end < 20.0 / cfg.gamma * (1.0 - 1e-12))
        throw ValidationError("mc: t_end must be at least 20/gamma to reach the diffusive regime");
    MsdResult res;
    res.ensemble = simulate(cfg);
    res.fit = fit_msd(res.ensemble, 1.0, cfg.bootstrap, cfg.seed);
    res.fit.estimate.gamma = cfg.gamma;
    res.fit.estimate.beta = cfg.beta;
    return res;
}

double ScalingFamily::lambda() const {
    return small_gamma ? std::pow(gamma, 1.0 + alpha) : std::pow(gamma, -alpha);
}

double ScalingFamily::mu() const {
    return small_gamma ? std::pow(gamma, 1.0 + 2.0 * alpha) : std::pow(gamma, -(1.0 + 2.0 * alpha));
}

void ScalingFamily::validate() const {
    if (!(gamma > 0.0)) throw ValidationError("scaling family: gamma must be positive");
    if (!(alpha >= 0.0)) throw ValidationError("scaling family: alpha must be nonnegative");
    if (small_gamma && !(alpha > 0.5)) throw ValidationError("scaling family: the small-gamma family needs alpha > 1/2");
}

RescaledCheck rescaled_process_check(const ScalingFamily& family, McConfig cfg, double t_rescaled) {
    family.validate();
    if (!(t_rescaled > 0.0)) throw ValidationError("scaling family: t_end must be positive");
    cfg.gamma = family.gamma;
    cfg.t_end = t_rescaled / family.mu();
    const TrajectoryEnsemble ens = simulate(cfg);
    RescaledCheck out;
    out.family = family;
    TrajectoryEnsemble scaled = ens;
    const double lam = family.lambda(), mu = family.mu();
    for (std::size_t r = 0; r < ens.times.size(); ++r) {
        scaled.times[r] = mu * ens.times[r];
        out.times.push_back(scaled.times[r]);
        out.variance.push_back(lam * lam * ens.msd[r]);
    }
    out.fit = fit_msd(scaled, lam, cfg.bootstrap, cfg.seed);
    out.fit.estimate.method = "langevin-mc-rescaled";
    out.fit.estimate.gamma = family.gamma;
    out.fit.estimate.beta = cfg.beta;
    return out;
}

nlohmann::json to_json(const MsdResult& r, const McConfig& cfg) {
    return {{"D", r.fit.estimate.value},
            {"ci", r.fit.estimate.ci_half_width},
            {"tau_diff", r.fit.tau_diff},
            {"trend", r.fit.trend},
            {"gamma", cfg.gamma},
            {"beta", cfg.beta},
            {"n_paths", cfg.n_paths},
            {"dt", cfg.dt},
            {"t_end", cfg.t_end},
            {"seed", cfg.seed}};
}

}  // namespace perdiff::mc
