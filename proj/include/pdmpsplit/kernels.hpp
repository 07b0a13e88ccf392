// Elementary splitting kernels: exact simulation of the drift, bounce and
// refreshment generators over a frozen-rate window, plus the palindromic
// scheme parser and composer.
#pragma once

#include <cassert>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "pdmpsplit/rng.hpp"
#include "pdmpsplit/targets.hpp"

namespace pdmps {

enum class Family { zzs, bps };

struct State {
    Vec x;
    Vec v;
    Family family = Family::zzs;

    int dim() const { return static_cast<int>(x.size()); }
};

inline double dot(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm(const Vec& a) { return std::sqrt(dot(a, a)); }

inline double pos_part(double x) { return x > 0.0 ? x : 0.0; }

// ---------------------------------------------------------------------------
// Scheme specification
// ---------------------------------------------------------------------------

enum class Token : char { D = 'D', B = 'B', R = 'R' };

// Palindromic splitting order. The middle token runs for the full step delta,
// every other token for delta/2, so e.g. RDBDR = R(d/2) D(d/2) B(d) D(d/2) R(d/2).
struct SchemeSpec {
    std::string name;
    std::vector<Token> tokens;
    std::vector<double> durations;
    double delta = 0.0;

    double total_duration() const {
        double s = 0.0;
        for (double d : durations) s += d;
        return s;
    }
};

inline SchemeSpec parse_scheme(const std::string& name, double delta) {
    if (delta <= 0.0) throw std::invalid_argument("parse_scheme: delta must be positive");
    if (name.empty() || name.size() > 5 || name.size() % 2 == 0)
        throw std::invalid_argument("parse_scheme: '" + name +
                                    "' must have odd length 1, 3 or 5");
    SchemeSpec spec;
    spec.name = name;
    spec.delta = delta;
    for (std::size_t i = 0; i < name.size(); ++i) {
        char c = name[i];
        if (c != 'D' && c != 'B' && c != 'R')
            throw std::invalid_argument("parse_scheme: unknown token '" + std::string(1, c) +
                                        "' at position " + std::to_string(i));
        if (name[name.size() - 1 - i] != c)
            throw std::invalid_argument("parse_scheme: '" + name +
                                        "' is not palindromic (position " + std::to_string(i) + ")");
        spec.tokens.push_back(static_cast<Token>(c));
        spec.durations.push_back(i == name.size() / 2 ? delta : 0.5 * delta);
    }
    // construction rule: durations sum to delta * (len+1)/2
    assert(std::abs(spec.total_duration() - delta * ((name.size() + 1) / 2.0)) < 1e-12 * delta);
    return spec;
}

// ---------------------------------------------------------------------------
// Elementary kernels
// ---------------------------------------------------------------------------

// Exact free transport: x' = x + t v.
inline void drift(State& s, double t) {
    assert(t >= 0.0);
    for (int i = 0; i < s.dim(); ++i) s.x[i] += t * s.v[i];
}

// Specular reflection of v off the hyperplane normal to grad.
inline Vec reflect_op(const Vec& grad, const Vec& v) {
    double g2 = dot(grad, grad);
    if (g2 <= 0.0) throw std::invalid_argument("reflect_op: zero gradient");
    double c = 2.0 * dot(v, grad) / g2;
    Vec out = v;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= c * grad[i];
    return out;
}

// Exact draw from exp(t L_R): with probability exp(-lambda_r t) the velocity
// is kept, otherwise it is resampled from nu (any positive number of refresh
// events leaves v ~ nu).
inline void refresh_window(State& s, double t, double lambda_r, RngStream& rng) {
    if (t < 0.0 || lambda_r < 0.0)
        throw std::invalid_argument("refresh_window: t and lambda_r must be >= 0");
    if (t == 0.0 || lambda_r == 0.0) return;
    double p = -std::expm1(-lambda_r * t);
    if (rng.uniform01() < p)
        s.v = (s.family == Family::bps) ? unit_sphere(rng, s.dim()) : rademacher(rng, s.dim());
}

// ZZS bounce window with canonical rates and frozen position: component i
// flips with probability 1 - exp(-t (v_i d_i psi(x))_+). A flipped component
// has rate 0 afterwards, so one draw per component is the exact law.
// Costs one gradient evaluation.
inline void zzs_bounce_window(State& s, const Target& target, double t, RngStream& rng) {
    assert(s.family == Family::zzs);
    if (t < 0.0) throw std::invalid_argument("zzs_bounce_window: t must be >= 0");
    if (t == 0.0) return;
    Vec grad = target.gradient(s.x);
    for (int i = 0; i < s.dim(); ++i) {
        double rate = pos_part(s.v[i] * grad[i]);
        if (rate == 0.0) continue;
        if (rng.uniform01() < -std::expm1(-t * rate)) s.v[i] = -s.v[i];
    }
}

// BPS bounce window: at most one reflection per window since the reflected
// velocity has rate 0. Costs one gradient evaluation.
inline void bps_bounce_window(State& s, const Target& target, double t, RngStream& rng) {
    assert(s.family == Family::bps);
    if (t < 0.0) throw std::invalid_argument("bps_bounce_window: t must be >= 0");
    if (t == 0.0) return;
    Vec grad = target.gradient(s.x);
    double rate = pos_part(dot(s.v, grad));
    if (rate == 0.0) return;
    if (rng.uniform01() < -std::expm1(-t * rate)) s.v = reflect_op(grad, s.v);
}

enum class SubsampleMode { fixed_factor, per_event_factor };

// Jump-count guard: at sane step sizes a component sees O(1) events per
// window; 1000 means the rates are mis-scaled.
inline constexpr int kMaxJumpsPerWindow = 1000;

// Subsampled ZZS bounce window (frozen x).
//
// fixed_factor: one factor J ~ Unif{1..N_f} for the whole window; per
// component simulate the constant-x jump process with rate
// (v_i d_i psi_J(x))_+ until the horizon. Since x is frozen, the factor
// gradient is computed once and reused across flips, so the window costs
// exactly one factor-gradient evaluation.
//
// per_event_factor: per component, race the deterministic-force clock
// against a clock with the uniform bound `split_bound`; a bound-clock event
// picks a partner J uniformly and flips with probability
// (v_i pair_force(i,J,x))_+ / split_bound. The deterministic force is again
// frozen, so the cost is one deterministic force per component plus one pair
// force per bound-clock event.
//
// Returns the number of elementary force evaluations performed (a full
// factor gradient counts as one in fixed_factor mode).
inline long subsampled_zzs_bounce_window(State& s, const FactorizedTarget& ft, double t,
                                         SubsampleMode mode, RngStream& rng) {
    assert(s.family == Family::zzs);
    if (t < 0.0) throw std::invalid_argument("subsampled_zzs_bounce_window: t must be >= 0");
    long force_evals = 0;
    if (t == 0.0) return force_evals;
    const int d = s.dim();
    if (mode == SubsampleMode::fixed_factor) {
        int J = static_cast<int>(rng.below(static_cast<std::uint64_t>(ft.num_factors())));
        Vec fgrad(d);
        for (int i = 0; i < d; ++i) fgrad[i] = ft.factor_partial(J, i, s.x);
        ++force_evals;  // one factor-gradient per iteration
        for (int i = 0; i < d; ++i) {
            double remaining = t;
            int jumps = 0;
            for (;;) {
                double rate = pos_part(s.v[i] * fgrad[i]);
                double tau = exp_draw(rng, rate);
                if (tau > remaining) break;
                remaining -= tau;
                s.v[i] = -s.v[i];
                if (++jumps > kMaxJumpsPerWindow)
                    throw std::runtime_error(
                        "subsampled window: jump-count guard exceeded in component " +
                        std::to_string(i));
            }
        }
    } else {
        if (!ft.has_force_split())
            throw std::invalid_argument("per-event subsampling requires a force-split target");
        const double bound = ft.split_bound();
        const int nf = ft.num_factors();
        for (int i = 0; i < d; ++i) {
            double det_force = ft.det_force(i, s.x);
            ++force_evals;
            double remaining = t;
            int jumps = 0;
            for (;;) {
                double det_rate = pos_part(s.v[i] * det_force);
                double tau_det = exp_draw(rng, det_rate);
                double tau_mf = exp_draw(rng, bound);
                double tau = std::min(tau_det, tau_mf);
                if (tau > remaining) break;
                remaining -= tau;
                if (tau_det <= tau_mf) {  // ties (measure zero) go to the lower clock index
                    s.v[i] = -s.v[i];
                } else {
                    int J = static_cast<int>(rng.below(static_cast<std::uint64_t>(nf)));
                    double accept = pos_part(s.v[i] * ft.pair_force(i, J, s.x)) / bound;
                    ++force_evals;
                    if (rng.uniform01() < accept) s.v[i] = -s.v[i];
                }
                if (++jumps > kMaxJumpsPerWindow)
                    throw std::runtime_error(
                        "subsampled window: jump-count guard exceeded in component " +
                        std::to_string(i));
            }
        }
    }
    return force_evals;
}

// Applies the scheme tokens left to right with their durations. The B token
// dispatches on the state's family. Returns the gradient-evaluation count
// (one per bounce window).
inline long apply_scheme(State& s, const SchemeSpec& spec, const Target& target,
                         double lambda_r, RngStream& rng) {
    long grad_evals = 0;
    for (std::size_t k = 0; k < spec.tokens.size(); ++k) {
        double t = spec.durations[k];
        switch (spec.tokens[k]) {
            case Token::D:
                drift(s, t);
                break;
            case Token::B:
                if (s.family == Family::zzs)
                    zzs_bounce_window(s, target, t, rng);
                else
                    bps_bounce_window(s, target, t, rng);
                ++grad_evals;
                break;
            case Token::R:
                refresh_window(s, t, lambda_r, rng);
                break;
        }
    }
    return grad_evals;
}

}  // namespace pdmps
