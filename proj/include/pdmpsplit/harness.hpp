// Experiment orchestration: replicate fan-out onto independent RNG streams,
// target/velocity initialization at stationarity, the experiment recipes
// behind the CLI subcommands, and CSV/JSON emission.
#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "pdmpsplit/bias1d.hpp"
#include "pdmpsplit/samplers.hpp"

namespace pdmps {

// ---------------------------------------------------------------------------
// Replicate fan-out
// ---------------------------------------------------------------------------

template <class T>
struct Replicated {
    std::vector<std::optional<T>> values;   // index = replicate id
    std::vector<std::string> errors;        // parallel to values; empty = ok

    int completed() const {
        int c = 0;
        for (const auto& v : values)
            if (v.has_value()) ++c;
        return c;
    }
};

// Runs worker(replicate, stream(base_seed, replicate)) for r = 0..R-1.
// Results are keyed by replicate index, so the aggregate is identical
// whether the replicates ran serially or on several threads.
template <class Worker>
auto replicate_fanout(int replicates, std::uint64_t base_seed, Worker&& worker,
                      int threads = 0) {
    using T = decltype(worker(0, std::declval<RngStream&>()));
    Replicated<T> out;
    out.values.resize(replicates);
    out.errors.resize(replicates);
    if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
    threads = std::max(1, std::min(threads, replicates));

    std::atomic<int> next{0};
    auto body = [&]() {
        for (;;) {
            int r = next.fetch_add(1);
            if (r >= replicates) return;
            RngStream rng(base_seed, static_cast<std::uint64_t>(r));
            try {
                out.values[r] = worker(r, rng);
            } catch (const std::exception& e) {
                out.errors[r] = e.what();
            }
        }
    };
    if (threads == 1) {
        body();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(threads);
        for (int t = 0; t < threads; ++t) pool.emplace_back(body);
        for (auto& t : pool) t.join();
    }
    return out;
}

// ---------------------------------------------------------------------------
// Initialization at stationarity
// ---------------------------------------------------------------------------

// Inverse-CDF table for 1D targets without a closed-form sampler.
class InverseCdf1D {
public:
    InverseCdf1D(const Target1D& t, double x_max = 12.0, int intervals = 1 << 14) {
        xs_.resize(intervals + 1);
        cdf_.resize(intervals + 1);
        double lo = t.psi(0.0);
        cdf_[0] = 0.0;
        for (int k = 0; k <= intervals; ++k)
            xs_[k] = -x_max + 2.0 * x_max * k / intervals;
        for (int k = 1; k <= intervals; ++k) {
            double a = std::exp(-(t.psi(xs_[k - 1]) - lo));
            double b = std::exp(-(t.psi(xs_[k]) - lo));
            cdf_[k] = cdf_[k - 1] + 0.5 * (xs_[k] - xs_[k - 1]) * (a + b);
        }
        for (auto& c : cdf_) c /= cdf_.back();
    }

    double operator()(double u) const {
        auto it = std::lower_bound(cdf_.begin(), cdf_.end(), u);
        if (it == cdf_.begin()) return xs_.front();
        if (it == cdf_.end()) return xs_.back();
        std::size_t k = static_cast<std::size_t>(it - cdf_.begin());
        double c0 = cdf_[k - 1], c1 = cdf_[k];
        double w = c1 > c0 ? (u - c0) / (c1 - c0) : 0.0;
        return xs_[k - 1] * (1.0 - w) + xs_[k] * w;
    }

private:
    std::vector<double> xs_, cdf_;
};

// Draw x ~ pi. Gaussian targets use their Cholesky factor, the Cauchy its
// exact quantile function, the quartic a fine inverse-CDF table, and the
// particle chain the i.i.d. standard normal initialization of its experiment.
inline Vec sample_position(const Target& target, RngStream& rng) {
    if (auto* g = dynamic_cast<const GaussianTarget*>(&target)) return g->sample(rng);
    if (auto* t1 = dynamic_cast<const Target1D*>(&target)) {
        switch (t1->kind()) {
            case Target1D::Kind::gaussian:
                return {std::sqrt(t1->sigma2()) * rng.normal()};
            case Target1D::Kind::cauchy:
                return {t1->gamma() * std::tan(3.141592653589793 * (rng.uniform01() - 0.5))};
            case Target1D::Kind::quartic: {
                static const InverseCdf1D table(make_quartic1d(), 3.5);
                return {table(rng.uniform01())};
            }
        }
    }
    return std_normal_vec(rng, target.dim());
}

inline Vec sample_velocity(Family family, int d, RngStream& rng) {
    return family == Family::bps ? unit_sphere(rng, d) : rademacher(rng, d);
}

// E_pi[t(x)] for 1D targets by quadrature (used as the bias reference).
inline double expected_statistic(const Target1D& target, Statistic stat,
                                 const QuadCfg& cfg = {}) {
    if (target.kind() == Target1D::Kind::cauchy && stat == Statistic::radius2)
        throw std::invalid_argument("radius2 has no finite mean under the Cauchy target; "
                                    "use radius2cap4");
    const detail::F2GridMap map = detail::make_grid_map(target, cfg);
    std::size_t n = 200'000;
    const double dp = (map.p_hi - map.p_lo) / static_cast<double>(n);
    double lo = target.psi(0.0);
    double z = 0.0, acc = 0.0, prev_w = 0.0, prev_f = 0.0;
    for (std::size_t k = 0; k <= n; ++k) {
        double p = map.p_lo + dp * static_cast<double>(k);
        double x = map.x_of(p);
        double wj = std::exp(-(target.psi(x) - lo)) * map.jacobian(p);
        double f = eval_statistic(stat, {x});
        if (k > 0) {
            z += 0.5 * dp * (prev_w + wj);
            acc += 0.5 * dp * (prev_f * prev_w + f * wj);
        }
        prev_w = wj;
        prev_f = f;
    }
    return acc / z;
}

// ---------------------------------------------------------------------------
// run: single sampler configuration, replicated
// ---------------------------------------------------------------------------

struct RunSpec {
    SamplerConfig sampler;
    int replicates = 1;
    std::uint64_t seed = 0;
    int threads = 0;
    std::string target_name;  // provenance only
};

struct RunSummary {
    long count = 0;
    double stat_mean = 0.0;
    double stat_se = 0.0;  // NaN when replicates == 1
    double reject_frac = 0.0;
    long grad_evals = 0;
    std::uint64_t seed = 0;
    int replicates = 0;
    int failed_replicates = 0;
    std::vector<std::string> errors;
    std::string provenance;  // canonical config string
    std::string config_hash;

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["count"] = count;
        j["stat_mean"] = stat_mean;
        if (std::isnan(stat_se))
            j["stat_se"] = "nan";
        else
            j["stat_se"] = stat_se;
        j["reject_frac"] = reject_frac;
        j["grad_evals"] = grad_evals;
        j["seed"] = seed;
        j["replicates"] = replicates;
        j["failed_replicates"] = failed_replicates;
        j["errors"] = errors;
        j["provenance"] = provenance;
        j["config_hash"] = config_hash;
        return j;
    }

    static RunSummary from_json(const nlohmann::json& j) {
        RunSummary s;
        s.count = j.at("count").get<long>();
        s.stat_mean = j.at("stat_mean").get<double>();
        s.stat_se = j.at("stat_se").is_string() ? std::nan("")
                                                : j.at("stat_se").get<double>();
        s.reject_frac = j.at("reject_frac").get<double>();
        s.grad_evals = j.at("grad_evals").get<long>();
        s.seed = j.at("seed").get<std::uint64_t>();
        s.replicates = j.at("replicates").get<int>();
        s.failed_replicates = j.at("failed_replicates").get<int>();
        s.errors = j.at("errors").get<std::vector<std::string>>();
        s.provenance = j.at("provenance").get<std::string>();
        s.config_hash = j.at("config_hash").get<std::string>();
        return s;
    }
};

inline std::string hash_hex(const std::string& s) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016zx", std::hash<std::string>{}(s));
    return buf;
}

struct ReplicateResult {
    double stat_mean = 0.0;
    long count = 0;
    long proposals = 0;
    long rejects = 0;
    long grad_evals = 0;
};

inline RunSummary run_experiment(const RunSpec& spec, const Target& target) {
    spec.sampler.validate(target);  // configuration errors surface before fan-out
    if (spec.sampler.sampler == SamplerConfig::Sampler::zzs_sub) {
        auto* ft = dynamic_cast<const FactorizedTarget*>(&target);
        if (!ft) throw std::invalid_argument("config: zzs-sub needs a factorized target");
        if (spec.sampler.submode == SubsampleMode::per_event_factor && !ft->has_force_split())
            throw std::invalid_argument(
                "config: per-event subsampling requires a force-split target");
    }
    auto rep = replicate_fanout(
        spec.replicates, spec.seed,
        [&](int, RngStream& rng) {
            Family fam = spec.sampler.sampler == SamplerConfig::Sampler::bps ? Family::bps
                                                                             : Family::zzs;
            State s{sample_position(target, rng), sample_velocity(fam, target.dim(), rng), fam};
            ChainOutput out = run_chain(spec.sampler, target, std::move(s), rng);
            return ReplicateResult{out.stat.mean(), out.count, out.proposals, out.rejects,
                                   out.grad_evals};
        },
        spec.threads);

    RunSummary summary;
    summary.seed = spec.seed;
    summary.replicates = spec.replicates;
    OnlineStat across;
    long proposals = 0, rejects = 0;
    for (int r = 0; r < spec.replicates; ++r) {
        if (!rep.values[r].has_value()) {
            ++summary.failed_replicates;
            summary.errors.push_back("replicate " + std::to_string(r) + ": " + rep.errors[r]);
            continue;
        }
        const auto& v = *rep.values[r];
        across.add(v.stat_mean);
        summary.count += v.count;
        summary.grad_evals += v.grad_evals;
        proposals += v.proposals;
        rejects += v.rejects;
    }
    summary.stat_mean = across.mean();
    summary.stat_se = across.se();
    summary.reject_frac =
        proposals > 0 ? static_cast<double>(rejects) / static_cast<double>(proposals) : 0.0;

    std::ostringstream prov;
    prov << "sampler=" << static_cast<int>(spec.sampler.sampler) << " scheme="
         << spec.sampler.scheme << " delta=" << spec.sampler.delta
         << " lambda_r=" << spec.sampler.lambda_r << " iters=" << spec.sampler.iters
         << " metropolis=" << spec.sampler.metropolis << " target=" << spec.target_name
         << " seed=" << spec.seed << " replicates=" << spec.replicates
         << " init=stationary";
    summary.provenance = prov.str();
    summary.config_hash = hash_hex(summary.provenance);
    return summary;
}

// ---------------------------------------------------------------------------
// bias-sweep: empirical vs analytic invariant-measure error (Fig. 6 recipe)
// ---------------------------------------------------------------------------

struct BiasSweepRow {
    std::string scheme;
    double lambda_r = 0.0;
    double delta = 0.0;
    long iters = 0;
    int replicates = 0;
    double emp_error = 0.0;  // |cross-replicate mean - truth|
    double emp_se = 0.0;
    double tv2 = 0.0;        // analytic second-order TV term
};

inline std::vector<BiasSweepRow> experiment_bias_sweep(
    const Target1D& target, const std::vector<SplitScheme>& schemes,
    const std::vector<double>& lambda_grid, double delta, long iters, int replicates,
    std::uint64_t seed, Statistic stat = Statistic::radius2, int threads = 0) {
    const double truth = expected_statistic(target, stat);
    std::vector<BiasSweepRow> rows;
    std::uint64_t block = 0;
    for (auto scheme : schemes) {
        for (double lam : lambda_grid) {
            SamplerConfig cfg;
            cfg.sampler = SamplerConfig::Sampler::bps;
            cfg.scheme = split_scheme_name(scheme);
            cfg.delta = delta;
            cfg.lambda_r = lam;
            cfg.iters = iters;
            cfg.statistic = stat;
            auto rep = replicate_fanout(
                replicates, seed + 1000003 * block++,
                [&](int, RngStream& rng) {
                    State s{sample_position(target, rng), sample_velocity(Family::bps, 1, rng),
                            Family::bps};
                    return run_chain(cfg, target, std::move(s), rng).stat.mean();
                },
                threads);
            OnlineStat across;
            for (const auto& v : rep.values)
                if (v.has_value()) across.add(*v);
            BiasSweepRow row;
            row.scheme = split_scheme_name(scheme);
            row.lambda_r = lam;
            row.delta = delta;
            row.iters = iters;
            row.replicates = across.count() ? static_cast<int>(across.count()) : 0;
            row.emp_error = std::abs(across.mean() - truth);
            row.emp_se = across.se();
            row.tv2 = tv_second_order_closed(scheme, target, lam, delta);
            rows.push_back(row);
        }
    }
    return rows;
}

// ---------------------------------------------------------------------------
// order: log-log slope of |bias| against the step size
// ---------------------------------------------------------------------------

struct OrderRow {
    double delta = 0.0;
    long iters = 0;
    double bias = 0.0;
    double abs_bias = 0.0;
    double se = 0.0;
    bool excluded = false;  // |bias| <= 2 se: indistinguishable from zero
};

struct OrderResult {
    std::vector<OrderRow> rows;
    LogLogFit fit;           // over the non-excluded points
    bool unbiased_verdict = false;  // every point consistent with zero
};

inline OrderResult experiment_order(const Target1D& target, const std::string& scheme,
                                    double lambda_r, const std::vector<double>& deltas,
                                    double time_horizon, int replicates, std::uint64_t seed,
                                    Statistic stat = Statistic::radius2, int threads = 0) {
    const double truth = expected_statistic(target, stat);
    OrderResult res;
    std::vector<std::pair<double, double>> pts;
    std::uint64_t block = 0;
    for (double delta : deltas) {
        SamplerConfig cfg;
        cfg.sampler = SamplerConfig::Sampler::bps;
        cfg.scheme = scheme;
        cfg.delta = delta;
        cfg.lambda_r = lambda_r;
        cfg.iters = static_cast<long>(std::ceil(time_horizon / delta));
        cfg.statistic = stat;
        auto rep = replicate_fanout(
            replicates, seed + 7919 * block++,
            [&](int, RngStream& rng) {
                State s{sample_position(target, rng), sample_velocity(Family::bps, 1, rng),
                        Family::bps};
                return run_chain(cfg, target, std::move(s), rng).stat.mean();
            },
            threads);
        OnlineStat across;
        for (const auto& v : rep.values)
            if (v.has_value()) across.add(*v);
        OrderRow row;
        row.delta = delta;
        row.iters = cfg.iters;
        row.bias = across.mean() - truth;
        row.abs_bias = std::abs(row.bias);
        row.se = across.se();
        row.excluded = !(row.abs_bias > 2.0 * row.se);
        if (!row.excluded) pts.emplace_back(delta, row.abs_bias);
        res.rows.push_back(row);
    }
    res.fit = pts.size() >= 2 ? fit_loglog(pts) : LogLogFit{};
    res.unbiased_verdict = pts.empty();
    return res;
}

// ---------------------------------------------------------------------------
// accept: Metropolis rejection fractions over Gaussian parameter grids
// ---------------------------------------------------------------------------

struct AcceptRow {
    std::string sweep;
    double value = 0.0;
    std::string sampler;  // "mh-zzs" or "mh-bps"
    double reject_frac = 0.0;
    double se = 0.0;
};

struct AcceptDefaults {
    int dim = 20;
    double delta = 0.3;
    double lambda_r = 0.5;
    double rho = 0.5;
    double sigma2 = 0.1;
    bool diagonal = false;  // which Gaussian family a delta/dim sweep uses
};

inline std::vector<AcceptRow> experiment_accept(const std::string& sweep,
                                                const std::vector<double>& values,
                                                long iters, int replicates, std::uint64_t seed,
                                                const AcceptDefaults& defs = {},
                                                int threads = 0) {
    std::vector<AcceptRow> rows;
    if (iters <= 0) return rows;  // nothing measured, nothing reported
    std::uint64_t block = 0;
    for (double value : values) {
        GaussianSpec gs;
        gs.dim = defs.dim;
        double delta = defs.delta;
        if (sweep == "rho") {
            gs.structure = GaussianSpec::Structure::equicorrelated;
            gs.rho = value;
        } else if (sweep == "sigma2") {
            gs.structure = GaussianSpec::Structure::diagonal;
            gs.sigma1sq = value;
        } else if (sweep == "delta" || sweep == "dim") {
            gs.structure = defs.diagonal ? GaussianSpec::Structure::diagonal
                                         : GaussianSpec::Structure::equicorrelated;
            gs.rho = defs.rho;
            gs.sigma1sq = defs.sigma2;
            if (sweep == "delta")
                delta = value;
            else
                gs.dim = static_cast<int>(value);
        } else {
            throw std::invalid_argument("accept: unknown sweep '" + sweep + "'");
        }
        auto target = make_gaussian(gs);

        for (bool bps : {false, true}) {
            SamplerConfig cfg;
            cfg.sampler = bps ? SamplerConfig::Sampler::bps : SamplerConfig::Sampler::zzs;
            cfg.scheme = bps ? "RDBDR" : "DBD";
            cfg.metropolis = true;
            cfg.delta = delta;
            cfg.lambda_r = bps ? defs.lambda_r : 0.0;
            cfg.iters = iters;
            auto rep = replicate_fanout(
                replicates, seed + 104729 * block++,
                [&](int, RngStream& rng) {
                    Family fam = bps ? Family::bps : Family::zzs;
                    State s{target->sample(rng), sample_velocity(fam, gs.dim, rng), fam};
                    return run_chain(cfg, *target, std::move(s), rng).reject_fraction();
                },
                threads);
            OnlineStat across;
            for (const auto& v : rep.values)
                if (v.has_value()) across.add(*v);
            rows.push_back({sweep, value, bps ? "mh-bps" : "mh-zzs", across.mean(), across.se()});
        }
    }
    return rows;
}

// ---------------------------------------------------------------------------
// grid-check and skewdb-check
// ---------------------------------------------------------------------------

struct GridCheckRow {
    std::string target;
    double delta = 0.0;
    double lambda_r = 0.0;
    int n_max = 0;
    double residual = 0.0;
    double leakage = 0.0;
    bool pass = false;
    bool leakage_warning = false;
};

inline GridCheckRow experiment_grid_check(const Target1D& target, const std::string& name,
                                          double delta, double lambda_r, double radius,
                                          double residual_tol = 1e-8,
                                          double leakage_tol = 1e-10) {
    int n_max = std::max(1, static_cast<int>(std::floor(radius / delta)));
    auto gm = psi_delta_grid(target, 0.0, delta, n_max);
    auto r = grid_invariance_residual(gm, target, lambda_r);
    GridCheckRow row;
    row.target = name;
    row.delta = delta;
    row.lambda_r = lambda_r;
    row.n_max = n_max;
    row.residual = r.residual;
    row.leakage = r.leakage;
    row.leakage_warning = r.leakage > leakage_tol;
    row.pass = r.residual <= residual_tol && !row.leakage_warning;
    return row;
}

struct SkewDbRow {
    std::string target;
    double delta = 0.0;
    int n_max = 0;
    double residual = 0.0;
    bool pass = false;
};

inline SkewDbRow experiment_skewdb_check(const Target1D& target, const std::string& name,
                                         double delta, double radius, double tol = 1e-12) {
    SkewDbRow row;
    row.target = name;
    row.delta = delta;
    row.n_max = std::max(1, static_cast<int>(std::floor(radius / delta)));
    row.residual = mh_zzs_skewdb_residual(target, delta, 0.0, row.n_max);
    row.pass = row.residual <= tol;
    return row;
}

// ---------------------------------------------------------------------------
// particles: subsampled ZZS vs ULA on the interacting chain
// ---------------------------------------------------------------------------

struct ParticlesRow {
    std::string sampler;
    long step = 0;
    double seconds = 0.0;
    long force_evals = 0;
    double empirical_variance = 0.0;  // running mean of v(x)
};

struct ParticlesSpec {
    int particles = 25;
    double coupling = 1.0;
    double delta = 0.05;
    long iters = 200'000;
    double ula_delta = 0.002;
    long ula_iters = 20'000;
    std::uint64_t seed = 0;
    int checkpoints = 100;
};

inline std::vector<ParticlesRow> experiment_particles(const ParticlesSpec& spec) {
    auto chain = make_particle_chain(spec.particles, spec.coupling);
    std::vector<ParticlesRow> rows;
    const long zz_every = std::max<long>(1, spec.iters / spec.checkpoints);
    const long ula_every = std::max<long>(1, spec.ula_iters / spec.checkpoints);
    const int n = spec.particles;

    {
        RngStream rng(spec.seed, 0);
        State s{std_normal_vec(rng, n), rademacher(rng, n), Family::zzs};
        long force_evals = 0;
        double acc = 0.0;
        auto t0 = std::chrono::steady_clock::now();
        for (long k = 1; k <= spec.iters; ++k) {
            force_evals +=
                step_subsampled_zzs(s, spec.delta, *chain, SubsampleMode::per_event_factor, rng);
            acc += empirical_variance(s.x);
            if (k % zz_every == 0 || k == spec.iters) {
                double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                                 .count();
                rows.push_back({"zzs-sub", k, sec, force_evals, acc / static_cast<double>(k)});
            }
        }
    }
    {
        RngStream rng(spec.seed, 1);
        Vec x = std_normal_vec(rng, n);
        // elementary force evaluations per full gradient: every ordered
        // mean-field pair plus both bond terms per particle
        const long per_grad = static_cast<long>(n) * (n - 1) + 2 * (n - 1);
        long force_evals = 0;
        double acc = 0.0;
        auto t0 = std::chrono::steady_clock::now();
        for (long k = 1; k <= spec.ula_iters; ++k) {
            try {
                step_ula(x, spec.ula_delta, *chain, rng);
            } catch (const InvariantError&) {
                break;  // diverged; series ends here
            }
            force_evals += per_grad;
            acc += empirical_variance(x);
            if (k % ula_every == 0 || k == spec.ula_iters) {
                double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                                 .count();
                rows.push_back({"ula", k, sec, force_evals, acc / static_cast<double>(k)});
            }
        }
    }
    return rows;
}

// ---------------------------------------------------------------------------
// CSV emission
// ---------------------------------------------------------------------------

inline std::string fmt_double(double v) {
    if (std::isnan(v)) return "nan";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

inline void write_csv(std::ostream& os, const std::vector<std::string>& header,
                      const std::vector<std::vector<std::string>>& rows) {
    for (std::size_t i = 0; i < header.size(); ++i)
        os << header[i] << (i + 1 < header.size() ? "," : "\n");
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i)
            os << row[i] << (i + 1 < row.size() ? "," : "\n");
    }
}

inline void csv_bias_sweep(std::ostream& os, const std::vector<BiasSweepRow>& rows) {
    std::vector<std::vector<std::string>> out;
    for (const auto& r : rows)
        out.push_back({r.scheme, fmt_double(r.lambda_r), fmt_double(r.delta),
                       std::to_string(r.iters), std::to_string(r.replicates),
                       fmt_double(r.emp_error), fmt_double(r.emp_se), fmt_double(r.tv2)});
    write_csv(os, {"scheme", "lambda_r", "delta", "iters", "replicates", "emp_error", "emp_se",
                   "tv2"},
              out);
}

inline void csv_order(std::ostream& os, const OrderResult& res) {
    std::vector<std::vector<std::string>> out;
    for (const auto& r : res.rows)
        out.push_back({fmt_double(r.delta), std::to_string(r.iters), fmt_double(r.bias),
                       fmt_double(r.abs_bias), fmt_double(r.se), r.excluded ? "1" : "0"});
    write_csv(os, {"delta", "iters", "bias", "abs_bias", "se", "excluded"}, out);
}

inline void csv_accept(std::ostream& os, const std::vector<AcceptRow>& rows) {
    std::vector<std::vector<std::string>> out;
    for (const auto& r : rows)
        out.push_back({r.sweep, fmt_double(r.value), r.sampler, fmt_double(r.reject_frac),
                       fmt_double(r.se)});
    write_csv(os, {"sweep", "value", "sampler", "reject_frac", "se"}, out);
}

inline void csv_grid_check(std::ostream& os, const std::vector<GridCheckRow>& rows) {
    std::vector<std::vector<std::string>> out;
    for (const auto& r : rows)
        out.push_back({r.target, fmt_double(r.delta), fmt_double(r.lambda_r),
                       std::to_string(r.n_max), fmt_double(r.residual), fmt_double(r.leakage),
                       r.pass ? "PASS" : "FAIL"});
    write_csv(os, {"target", "delta", "lambda_r", "n_max", "residual", "leakage", "pass"}, out);
}

inline void csv_skewdb(std::ostream& os, const std::vector<SkewDbRow>& rows) {
    std::vector<std::vector<std::string>> out;
    for (const auto& r : rows)
        out.push_back({r.target, fmt_double(r.delta), std::to_string(r.n_max),
                       fmt_double(r.residual), r.pass ? "PASS" : "FAIL"});
    write_csv(os, {"target", "delta", "n_max", "residual", "pass"}, out);
}

inline void csv_f2(std::ostream& os, SplitScheme scheme, const Target1D& target,
                   double lambda_r, const std::vector<double>& xs, const F2Solution& sol) {
    std::vector<std::vector<std::string>> out;
    for (double x : xs)
        out.push_back({fmt_double(x), fmt_double(sol.f2_plus(x)), fmt_double(sol.f2_minus(x)),
                       fmt_double(closed_form_f2(scheme, target, lambda_r, x, +1.0)),
                       fmt_double(closed_form_f2(scheme, target, lambda_r, x, -1.0))});
    write_csv(os, {"x", "f2_plus", "f2_minus", "closed_form_plus", "closed_form_minus"}, out);
}

inline void csv_tvterm(std::ostream& os, const Target1D& target, double delta,
                       const std::vector<double>& lambda_grid,
                       const std::vector<SplitScheme>& schemes) {
    std::vector<std::vector<std::string>> out;
    for (double lam : lambda_grid)
        for (auto s : schemes)
            out.push_back({fmt_double(lam), split_scheme_name(s),
                           fmt_double(tv_second_order_closed(s, target, lam, delta))});
    write_csv(os, {"lambda_r", "scheme", "tv2"}, out);
}

inline void csv_particles(std::ostream& os, const std::vector<ParticlesRow>& rows) {
    std::vector<std::vector<std::string>> out;
    for (const auto& r : rows)
        out.push_back({r.sampler, std::to_string(r.step), fmt_double(r.seconds),
                       std::to_string(r.force_evals), fmt_double(r.empirical_variance)});
    write_csv(os, {"sampler", "step", "seconds", "force_evals", "empirical_variance"}, out);
}

inline void csv_dump(std::ostream& os, const std::vector<State>& dump, long every) {
    std::vector<std::string> header{"iter"};
    if (!dump.empty()) {
        for (int i = 1; i <= dump.front().dim(); ++i) header.push_back("x" + std::to_string(i));
        for (int i = 1; i <= dump.front().dim(); ++i) header.push_back("v" + std::to_string(i));
    }
    std::vector<std::vector<std::string>> out;
    long iter = 0;
    for (const auto& s : dump) {
        std::vector<std::string> row{std::to_string(iter)};
        for (double xi : s.x) row.push_back(fmt_double(xi));
        for (double vi : s.v) row.push_back(fmt_double(vi));
        out.push_back(std::move(row));
        iter += every;
    }
    write_csv(os, header, out);
}

}  // namespace pdmps
