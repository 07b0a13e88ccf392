// Full samplers assembled from the kernels: unadjusted splitting schemes,
// the non-reversible Metropolis-adjusted ZZS and BPS, subsampled ZZS, the
// continuous-time ZZS reference via Poisson thinning, and a ULA baseline.
#pragma once

#include <cassert>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pdmpsplit/kernels.hpp"
#include "pdmpsplit/rng.hpp"
#include "pdmpsplit/stats.hpp"
#include "pdmpsplit/targets.hpp"

namespace pdmps {

// Raised when a runtime invariant (thinning bound, stability barrier, ...)
// is violated; mapped to exit code 2 by the CLI.
class InvariantError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class Statistic { radius2, radius2_cap4, emp_variance };

inline double eval_statistic(Statistic stat, const Vec& x) {
    switch (stat) {
        case Statistic::radius2: {
            double s = 0.0;
            for (double xi : x) s += xi * xi;
            return s;
        }
        case Statistic::radius2_cap4: {
            double s = 0.0;
            for (double xi : x) s += xi * xi;
            return std::min(4.0, s);
        }
        case Statistic::emp_variance:
            return empirical_variance(x);
    }
    return 0.0;
}

inline Statistic parse_statistic(const std::string& name) {
    if (name == "radius2") return Statistic::radius2;
    if (name == "radius2cap4") return Statistic::radius2_cap4;
    if (name == "empvar") return Statistic::emp_variance;
    throw std::invalid_argument("unknown statistic '" + name + "'");
}

struct SamplerConfig {
    enum class Sampler { zzs, bps, zzs_sub, zzs_cont, ula };

    Sampler sampler = Sampler::zzs;
    std::string scheme = "DBD";
    double delta = 0.1;
    double lambda_r = 0.0;
    long iters = 0;
    double time_horizon = 0.0;  // continuous sampler only
    bool metropolis = false;
    SubsampleMode submode = SubsampleMode::fixed_factor;
    Statistic statistic = Statistic::radius2;
    long dump_every = 0;  // 0 = no dump

    void validate(const Target& target) const {
        if (delta <= 0.0) throw std::invalid_argument("config: delta must be positive");
        if (lambda_r < 0.0) throw std::invalid_argument("config: lambda-r must be >= 0");
        if (metropolis) {
            bool ok = (sampler == Sampler::zzs && scheme == "DBD") ||
                      (sampler == Sampler::bps && scheme == "RDBDR");
            if (!ok)
                throw std::invalid_argument(
                    "config: metropolis is derived only for DBD-ZZS and RDBDR-BPS");
        }
        if ((sampler == Sampler::zzs_cont || sampler == Sampler::ula) &&
            !target.grad_lipschitz().has_value())
            throw std::invalid_argument(
                "config: this sampler needs a gradient-Lipschitz bound, "
                "which the target does not provide");
    }
};

struct ChainOutput {
    long count = 0;          // iterations contributing to the statistic
    OnlineStat stat;         // per-iteration statistic accumulator
    long proposals = 0;      // MH samplers only
    long rejects = 0;
    long grad_evals = 0;
    std::vector<State> dump;

    double reject_fraction() const {
        return proposals > 0 ? static_cast<double>(rejects) / static_cast<double>(proposals)
                             : 0.0;
    }
};

// ---------------------------------------------------------------------------
// One-step transitions
// ---------------------------------------------------------------------------

inline long step_unadjusted(State& s, const SchemeSpec& spec, const Target& target,
                            double lambda_r, RngStream& rng) {
    return apply_scheme(s, spec, target, lambda_r, rng);
}

// Log acceptance ratio of the adjusted ZZS for a realized DBD proposal:
// log pi(x_tilde)/pi(x) + delta * sum_{i not flipped} v_i d_i psi(x_mid).
inline double mh_zzs_log_accept(const Target& target, const Vec& x, const Vec& v,
                                const Vec& x_tilde, const Vec& v_tilde,
                                const Vec& grad_mid, double delta) {
    double s = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i)
        if (v_tilde[i] == v[i]) s += v[i] * grad_mid[i];
    return target.potential(x) - target.potential(x_tilde) + delta * s;
}

// Non-reversible Metropolis-adjusted ZZS (one DBD proposal). On rejection the
// chain moves to (x, -v). Costs one gradient evaluation.
inline std::pair<State, bool> step_mh_zzs(const State& s, double delta, const Target& target,
                                          RngStream& rng) {
    assert(s.family == Family::zzs);
    const int d = s.dim();
    Vec x_mid(d);
    for (int i = 0; i < d; ++i) x_mid[i] = s.x[i] + 0.5 * delta * s.v[i];
    Vec grad_mid = target.gradient(x_mid);
    Vec v_tilde = s.v;
    for (int i = 0; i < d; ++i) {
        double rate = pos_part(s.v[i] * grad_mid[i]);
        if (rate > 0.0 && rng.uniform01() < -std::expm1(-delta * rate)) v_tilde[i] = -v_tilde[i];
    }
    Vec x_tilde(d);
    for (int i = 0; i < d; ++i) x_tilde[i] = x_mid[i] + 0.5 * delta * v_tilde[i];
    double log_a = mh_zzs_log_accept(target, s.x, s.v, x_tilde, v_tilde, grad_mid, delta);
    if (std::log(rng.uniform_pos()) < log_a) return {State{x_tilde, v_tilde, Family::zzs}, true};
    State rejected = s;
    for (auto& vi : rejected.v) vi = -vi;
    return {rejected, false};
}

// Log acceptance ratio of the adjusted BPS given the realized proposal:
// v here is the start-of-DBD velocity (after the leading half refreshment).
inline double mh_bps_log_accept(const Target& target, const Vec& x, const Vec& v,
                                const Vec& x_tilde, const Vec& v_tilde,
                                const Vec& grad_mid, double delta) {
    double lam_fwd = pos_part(dot(v, grad_mid));
    Vec neg_vt = v_tilde;
    for (auto& w : neg_vt) w = -w;
    double lam_bwd = pos_part(dot(neg_vt, grad_mid));
    return target.potential(x) - target.potential(x_tilde) + delta * (lam_fwd - lam_bwd);
}

// Non-reversible Metropolis-adjusted BPS: half refreshment, DBD proposal,
// accept/reject, half refreshment. On rejection the state is (x, -v_mid)
// with v_mid the post-first-refreshment velocity, and the trailing
// refreshment still applies.
inline std::pair<State, bool> step_mh_bps(const State& s, double delta, double lambda_r,
                                          const Target& target, RngStream& rng) {
    assert(s.family == Family::bps);
    const int d = s.dim();
    State cur = s;
    refresh_window(cur, 0.5 * delta, lambda_r, rng);
    Vec v_mid = cur.v;

    Vec x_mid(d);
    for (int i = 0; i < d; ++i) x_mid[i] = cur.x[i] + 0.5 * delta * v_mid[i];
    Vec grad_mid = target.gradient(x_mid);
    Vec v_tilde = v_mid;
    double rate = pos_part(dot(v_mid, grad_mid));
    if (rate > 0.0 && rng.uniform01() < -std::expm1(-delta * rate))
        v_tilde = reflect_op(grad_mid, v_mid);
    Vec x_tilde(d);
    for (int i = 0; i < d; ++i) x_tilde[i] = x_mid[i] + 0.5 * delta * v_tilde[i];

    double log_a = mh_bps_log_accept(target, cur.x, v_mid, x_tilde, v_tilde, grad_mid, delta);
    bool accepted = std::log(rng.uniform_pos()) < log_a;
    State next{accepted ? x_tilde : cur.x, Vec(d), Family::bps};
    if (accepted) {
        next.v = v_tilde;
    } else {
        for (int i = 0; i < d; ++i) next.v[i] = -v_mid[i];
    }
    refresh_window(next, 0.5 * delta, lambda_r, rng);
    return {next, accepted};
}

// DBD with a subsampled bounce window. Returns elementary force evaluations.
inline long step_subsampled_zzs(State& s, double delta, const FactorizedTarget& ft,
                                SubsampleMode mode, RngStream& rng) {
    assert(s.family == Family::zzs);
    drift(s, 0.5 * delta);
    long evals = subsampled_zzs_bounce_window(s, ft, delta, mode, rng);
    drift(s, 0.5 * delta);
    return evals;
}

// ULA step with a hard stability barrier.
inline void step_ula(Vec& x, double delta, const Target& target, RngStream& rng) {
    Vec g = target.gradient(x);
    double scale = std::sqrt(2.0 * delta);
    double norm2 = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] += -delta * g[i] + scale * rng.normal();
        norm2 += x[i] * x[i];
    }
    if (norm2 > 1e16)
        throw InvariantError("ULA stability barrier exceeded (|x| > 1e8); reduce the step size");
}

// ---------------------------------------------------------------------------
// Continuous-time ZZS via Poisson thinning
// ---------------------------------------------------------------------------

// Earliest solution of lambda0 * tau + slope * tau^2 / 2 = e.
inline double thinning_candidate_time(double lambda0, double slope, double e) {
    if (slope == 0.0) {
        if (lambda0 == 0.0) return std::numeric_limits<double>::infinity();
        return e / lambda0;
    }
    return 2.0 * e / (lambda0 + std::sqrt(lambda0 * lambda0 + 2.0 * slope * e));
}

// Event-driven ZZS with the linear rate bound
//   lambda_i(x + v t, v) <= lambda_i(x, v) + t L sqrt(d).
// Every proposed event time costs one (full) gradient evaluation. The
// statistic is integrated exactly along linear segments (radius2 only).
inline ChainOutput run_continuous_zzs(const Vec& x0, const Vec& v0, const Target& target,
                                      double time_horizon, RngStream& rng,
                                      Statistic statistic = Statistic::radius2) {
    if (!target.grad_lipschitz().has_value())
        throw std::invalid_argument("continuous ZZS needs a gradient-Lipschitz bound");
    if (statistic != Statistic::radius2)
        throw std::invalid_argument("continuous ZZS integrates the radius2 statistic only");
    const int d = static_cast<int>(x0.size());
    const double lsd = *target.grad_lipschitz() * std::sqrt(static_cast<double>(d));

    Vec x = x0, v = v0;
    double t = 0.0;
    double integral = 0.0;
    ChainOutput out;

    auto segment_integral = [&](double tau) {
        // int_0^tau |x + v s|^2 ds with |v|^2 = d
        double x2 = dot(x, x), xv = dot(x, v);
        return tau * x2 + tau * tau * xv + tau * tau * tau * d / 3.0;
    };

    while (t < time_horizon) {
        Vec grad = target.gradient(x);
        ++out.grad_evals;
        double tau = std::numeric_limits<double>::infinity();
        int comp = -1;
        double lambda0_min = 0.0;
        for (int i = 0; i < d; ++i) {
            double lambda0 = pos_part(v[i] * grad[i]);
            double ti = thinning_candidate_time(lambda0, lsd, exp_draw(rng, 1.0));
            if (ti < tau) {  // strict: ties break to the lowest index
                tau = ti;
                comp = i;
                lambda0_min = lambda0;
            }
        }
        if (t + tau >= time_horizon || comp < 0) {
            double rest = time_horizon - t;
            integral += segment_integral(rest);
            t = time_horizon;
            break;
        }
        integral += segment_integral(tau);
        for (int i = 0; i < d; ++i) x[i] += tau * v[i];
        t += tau;
        double true_rate = pos_part(v[comp] * target.partial(comp, x));
        double bound = lambda0_min + tau * lsd;
        double ratio = bound > 0.0 ? true_rate / bound : 0.0;
        if (ratio > 1.0 + 1e-10)
            throw InvariantError("thinning bound violated: acceptance ratio " +
                                 std::to_string(ratio));
        if (rng.uniform01() < ratio) v[comp] = -v[comp];
        ++out.count;
    }
    out.stat.add(integral / time_horizon);
    return out;
}

// ---------------------------------------------------------------------------
// Chain driver
// ---------------------------------------------------------------------------

inline ChainOutput run_chain(const SamplerConfig& cfg, const Target& target, State s,
                             RngStream& rng) {
    cfg.validate(target);
    ChainOutput out;

    if (cfg.sampler == SamplerConfig::Sampler::zzs_cont) {
        return run_continuous_zzs(s.x, s.v, target, cfg.time_horizon, rng, cfg.statistic);
    }

    const FactorizedTarget* ft = nullptr;
    if (cfg.sampler == SamplerConfig::Sampler::zzs_sub) {
        ft = dynamic_cast<const FactorizedTarget*>(&target);
        if (!ft) throw std::invalid_argument("config: zzs-sub needs a factorized target");
        if (cfg.submode == SubsampleMode::per_event_factor && !ft->has_force_split())
            throw std::invalid_argument(
                "config: per-event subsampling requires a force-split target");
    }
    SchemeSpec spec;
    if (cfg.sampler == SamplerConfig::Sampler::zzs || cfg.sampler == SamplerConfig::Sampler::bps)
        spec = parse_scheme(cfg.scheme, cfg.delta);

#ifndef NDEBUG
    const State start = s;
    const bool check_parity = cfg.sampler == SamplerConfig::Sampler::zzs &&
                              cfg.scheme == "DBD" && !cfg.metropolis;
#endif

    for (long n = 0; n < cfg.iters; ++n) {
        switch (cfg.sampler) {
            case SamplerConfig::Sampler::zzs:
                if (cfg.metropolis) {
                    auto [next, accepted] = step_mh_zzs(s, cfg.delta, target, rng);
                    s = std::move(next);
                    ++out.proposals;
                    if (!accepted) ++out.rejects;
                    ++out.grad_evals;
                } else {
                    out.grad_evals += step_unadjusted(s, spec, target, cfg.lambda_r, rng);
                }
                break;
            case SamplerConfig::Sampler::bps:
                if (cfg.metropolis) {
                    auto [next, accepted] = step_mh_bps(s, cfg.delta, cfg.lambda_r, target, rng);
                    s = std::move(next);
                    ++out.proposals;
                    if (!accepted) ++out.rejects;
                    ++out.grad_evals;
                } else {
                    out.grad_evals += step_unadjusted(s, spec, target, cfg.lambda_r, rng);
                }
#ifndef NDEBUG
                assert(std::abs(norm(s.v) - 1.0) <= 1e-12);
#endif
                break;
            case SamplerConfig::Sampler::zzs_sub:
                out.grad_evals += step_subsampled_zzs(s, cfg.delta, *ft, cfg.submode, rng);
                break;
            case SamplerConfig::Sampler::ula:
                step_ula(s.x, cfg.delta, target, rng);
                ++out.grad_evals;
                break;
            case SamplerConfig::Sampler::zzs_cont:
                break;  // handled above
        }
#ifndef NDEBUG
        if (check_parity) {
            for (int i = 0; i < s.dim(); ++i) {
                double k = (s.x[i] - start.x[i]) / cfg.delta + 0.5 * (s.v[i] - start.v[i]);
                double r = std::round(k);
                assert(std::abs(k - r) <= 1e-6);
                assert(std::llabs(static_cast<long long>(r) - (n + 1)) % 2 == 0);
            }
        }
#endif
        out.stat.add(eval_statistic(cfg.statistic, s.x));
        ++out.count;
        if (cfg.dump_every > 0 && (n % cfg.dump_every) == 0) out.dump.push_back(s);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Skew detailed balance on the 1D grid (adjusted ZZS)
// ---------------------------------------------------------------------------

// One-step transition probabilities of MH-ZZS from a grid state, in closed
// form: flip probability of the DBD proposal plus the explicit acceptance.
// Returns max over grid pairs of |mu(z) P(z,z') - mu(z') P(theta z', theta z)|
// with theta(x,v) = (x,-v), mu the grid-normalized target.
inline double mh_zzs_skewdb_residual(const Target1D& target, double delta, double x0,
                                     int n_max) {
    const int m = 2 * n_max + 1;
    std::vector<double> mass(m);
    double z = 0.0;
    for (int k = 0; k < m; ++k) {
        double x = x0 + (k - n_max) * delta;
        mass[k] = std::exp(-target.psi(x));
        z += mass[k];
    }
    for (auto& w : mass) w /= 2.0 * z;  // split over the two velocities

    auto transition_ahead = [&](int k, double v) {
        // P((x_k, v) -> (x_k + v delta, v)): no flip, then accept
        double x = x0 + (k - n_max) * delta;
        double xm = x + 0.5 * delta * v;
        double p_flip = -std::expm1(-delta * pos_part(v * target.psi1(xm)));
        double log_a = target.psi(x) - target.psi(x + delta * v) + delta * v * target.psi1(xm);
        double a = std::min(1.0, std::exp(log_a));
        return (1.0 - p_flip) * a;
    };

    double res = 0.0;
    for (int k = 0; k < m; ++k) {
        for (double v : {-1.0, 1.0}) {
            int k2 = k + static_cast<int>(v);
            if (k2 < 0 || k2 >= m) continue;
            // forward flow z=(k,v) -> z'=(k2,v); reverse flow theta z' -> theta z
            double lhs = mass[k] * transition_ahead(k, v);
            double rhs = mass[k2] * transition_ahead(k2, -v);
            res = std::max(res, std::abs(lhs - rhs));
        }
    }
    return res;
}

}  // namespace pdmps
