// Command-line front end: sampler runs and the experiment recipes, emitting
// CSV or JSON tables. Exit codes: 0 success, 1 configuration error,
// 2 invariant/assertion failure.
#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

#include "pdmpsplit/harness.hpp"

using namespace pdmps;

namespace {

std::vector<double> parse_grid(const std::string& spec) {
    // "lo:hi:step" (inclusive) or a comma-separated list
    std::vector<double> out;
    if (spec.find(':') != std::string::npos) {
        double lo, hi, step;
        char c1, c2;
        std::istringstream is(spec);
        if (!(is >> lo >> c1 >> hi >> c2 >> step) || c1 != ':' || c2 != ':' || step <= 0.0)
            throw std::invalid_argument("bad grid spec '" + spec + "', expected lo:hi:step");
        for (double v = lo; v <= hi + 1e-12 * std::max(1.0, std::abs(hi)); v += step)
            out.push_back(v);
    } else {
        std::istringstream is(spec);
        std::string tok;
        while (std::getline(is, tok, ',')) out.push_back(std::stod(tok));
    }
    if (out.empty()) throw std::invalid_argument("empty grid spec '" + spec + "'");
    if (out.size() > 1) {
        bool increasing = out[1] > out[0];
        for (std::size_t i = 1; i < out.size(); ++i)
            if (increasing ? out[i] <= out[i - 1] : out[i] >= out[i - 1])
                throw std::invalid_argument("grid values must be strictly monotone");
    }
    return out;
}

struct TargetFlags {
    std::string name = "gauss-diag";
    int dim = 1;
    double rho = 0.0;
    double sigma2 = 1.0;
    double gamma = 1.0;
    int nparticles = 25;
    double coupling = 1.0;
};

void add_target_flags(CLI::App* cmd, TargetFlags& tf) {
    cmd->add_option("--target", tf.name,
                    "target: gauss-equi, gauss-diag, quartic1d, cauchy1d, particles");
    cmd->add_option("--dim", tf.dim, "dimension (gaussian targets)");
    cmd->add_option("--rho", tf.rho, "equicorrelation coefficient");
    cmd->add_option("--sigma2", tf.sigma2, "first-component variance / 1d variance");
    cmd->add_option("--gamma", tf.gamma, "cauchy scale");
    cmd->add_option("--nparticles", tf.nparticles, "particle count");
    cmd->add_option("--coupling", tf.coupling, "mean-field coupling strength a");
}

std::shared_ptr<Target> make_target(const TargetFlags& tf) {
    if (tf.name == "gauss-equi")
        return make_gaussian({.dim = tf.dim,
                              .structure = GaussianSpec::Structure::equicorrelated,
                              .rho = tf.rho});
    if (tf.name == "gauss-diag")
        return make_gaussian({.dim = tf.dim,
                              .structure = GaussianSpec::Structure::diagonal,
                              .sigma1sq = tf.sigma2});
    if (tf.name == "quartic1d") return std::make_shared<Target1D>(make_quartic1d());
    if (tf.name == "cauchy1d") return std::make_shared<Target1D>(make_cauchy1d(tf.gamma));
    if (tf.name == "particles") return make_particle_chain(tf.nparticles, tf.coupling);
    throw std::invalid_argument("unknown target '" + tf.name + "'");
}

Target1D make_target1d(const TargetFlags& tf) {
    if (tf.name == "gauss-diag" || tf.name == "gauss-equi") {
        if (tf.dim != 1)
            throw std::invalid_argument("this experiment needs a one-dimensional target");
        return make_gaussian1d(tf.name == "gauss-diag" ? tf.sigma2 : 1.0);
    }
    if (tf.name == "quartic1d") return make_quartic1d();
    if (tf.name == "cauchy1d") return make_cauchy1d(tf.gamma);
    throw std::invalid_argument("target '" + tf.name + "' is not one-dimensional");
}

std::vector<SplitScheme> parse_schemes(const std::string& csv) {
    std::vector<SplitScheme> out;
    std::istringstream is(csv);
    std::string tok;
    while (std::getline(is, tok, ',')) out.push_back(parse_split_scheme(tok));
    return out;
}

// csv text -> json array of row objects (numbers where they parse as such)
nlohmann::json csv_to_json(const std::string& csv) {
    std::istringstream is(csv);
    std::string line;
    std::vector<std::string> header;
    nlohmann::json arr = nlohmann::json::array();
    bool first = true;
    while (std::getline(is, line)) {
        std::vector<std::string> cells;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        if (first) {
            header = cells;
            first = false;
            continue;
        }
        nlohmann::json row;
        for (std::size_t i = 0; i < cells.size() && i < header.size(); ++i) {
            try {
                std::size_t used = 0;
                double v = std::stod(cells[i], &used);
                if (used == cells[i].size()) {
                    row[header[i]] = v;
                    continue;
                }
            } catch (...) {
            }
            row[header[i]] = cells[i];
        }
        arr.push_back(row);
    }
    return arr;
}

void emit(const std::string& csv, const std::string& out_path, const std::string& format) {
    std::string text = format == "json" ? csv_to_json(csv).dump(2) + "\n" : csv;
    if (out_path.empty()) {
        std::cout << text;
    } else {
        std::ofstream f(out_path);
        if (!f) throw std::invalid_argument("cannot open output file '" + out_path + "'");
        f << text;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"splitting-scheme PDMP samplers and their second-order bias analysis"};
    app.require_subcommand(1);
    app.fallthrough();

    std::uint64_t seed = 0;
    int replicates = 0;  // 0 = subcommand default
    std::string out_path, format = "csv";
    bool paper_scale = false;
    int threads = 0;
    app.add_option("--seed", seed, "base seed (64-bit)");
    app.add_option("--replicates", replicates, "replicate count");
    app.add_option("--out", out_path, "output file (default stdout)");
    app.add_option("--format", format, "csv or json")
        ->check(CLI::IsMember({"csv", "json"}));
    app.add_flag("--paper-scale", paper_scale, "use the full-size experiment defaults");
    app.add_option("--threads", threads, "worker threads for replicates (0 = auto)");

    // ---- run ----
    auto* run = app.add_subcommand("run", "run one sampler configuration")->fallthrough();
    TargetFlags run_tf;
    add_target_flags(run, run_tf);
    std::string sampler_name = "zzs", scheme = "DBD", stat_name = "radius2", submode = "fixed";
    double delta = 0.5, lambda_r = 0.0, time_horizon = 0.0;
    long iters = 200'000, dump_every = 0;
    bool metropolis = false;
    run->add_option("--sampler", sampler_name, "zzs, bps, zzs-sub, zzs-cont, ula")
        ->check(CLI::IsMember({"zzs", "bps", "zzs-sub", "zzs-cont", "ula"}));
    run->add_option("--scheme", scheme, "splitting order, e.g. DBD, BDB, RDBDR");
    run->add_flag("--metropolis", metropolis, "non-reversible Metropolis adjustment");
    run->add_option("--delta", delta, "step size");
    run->add_option("--iters", iters, "iteration count");
    run->add_option("--time", time_horizon, "time horizon (zzs-cont)");
    run->add_option("--lambda-r", lambda_r, "refreshment rate");
    run->add_option("--stat", stat_name, "radius2, radius2cap4, empvar");
    run->add_option("--submode", submode, "subsampling mode: fixed or per-event")
        ->check(CLI::IsMember({"fixed", "per-event"}));
    run->add_option("--dump-every", dump_every, "dump every k-th state (csv output)");

    // ---- bias-sweep ----
    auto* bias = app.add_subcommand("bias-sweep",
                                    "empirical vs analytic invariant-measure error")->fallthrough();
    TargetFlags bias_tf;
    add_target_flags(bias, bias_tf);
    std::string bias_schemes = "RDBDR,DBRBD,DRBRD,BDRDB", bias_lambda = "0:3:0.5";
    std::string bias_stat = "radius2";
    double bias_delta = 0.5;
    long bias_iters = 0;
    bias->add_option("--schemes", bias_schemes, "comma-separated split schemes");
    bias->add_option("--lambda-grid", bias_lambda, "lo:hi:step refreshment grid");
    bias->add_option("--delta", bias_delta, "step size");
    bias->add_option("--iters", bias_iters, "iterations per replicate");
    bias->add_option("--stat", bias_stat, "statistic");

    // ---- order ----
    auto* order = app.add_subcommand("order", "log-log order fit of |bias| vs step size")->fallthrough();
    TargetFlags order_tf;
    add_target_flags(order, order_tf);
    std::string order_scheme = "BDB", order_deltas = "0.8,0.4,0.2,0.1";
    double order_lambda = 0.0, order_time = 0.0;
    order->add_option("--scheme", order_scheme, "splitting order");
    order->add_option("--lambda-r", order_lambda, "refreshment rate");
    order->add_option("--deltas", order_deltas, "step-size list or lo:hi:step");
    order->add_option("--time", order_time, "physical time horizon per run");

    // ---- accept ----
    auto* accept = app.add_subcommand("accept", "Metropolis rejection fractions")->fallthrough();
    std::string accept_sweep = "rho", accept_values = "0:0.9:0.1", accept_gauss = "equi";
    AcceptDefaults accept_defs;
    long accept_iters = 0;
    accept->add_option("--sweep", accept_sweep, "rho, sigma2, delta or dim");
    accept->add_option("--values", accept_values, "lo:hi:step or comma list");
    accept->add_option("--dim", accept_defs.dim, "dimension");
    accept->add_option("--delta", accept_defs.delta, "step size");
    accept->add_option("--lambda-r", accept_defs.lambda_r, "BPS refreshment rate");
    accept->add_option("--rho", accept_defs.rho, "fixed correlation for delta/dim sweeps");
    accept->add_option("--sigma2", accept_defs.sigma2, "fixed variance for delta/dim sweeps");
    accept->add_option("--gauss", accept_gauss, "equi or diag Gaussian for delta/dim sweeps")
        ->check(CLI::IsMember({"equi", "diag"}));
    accept->add_option("--iters", accept_iters, "iterations per replicate");

    // ---- grid-check ----
    auto* grid = app.add_subcommand("grid-check", "RDBDR grid-measure stationarity residual")->fallthrough();
    TargetFlags grid_tf;
    grid_tf.name = "quartic1d";
    add_target_flags(grid, grid_tf);
    std::string grid_lambda = "0,1";
    double grid_delta = 0.5, grid_radius = 6.0;
    grid->add_option("--delta", grid_delta, "step size");
    grid->add_option("--lambda-grid", grid_lambda, "refreshment rates");
    grid->add_option("--radius", grid_radius, "grid truncation |x| <= radius");

    // ---- skewdb-check ----
    auto* skew = app.add_subcommand("skewdb-check", "MH-ZZS skew detailed balance residual")->fallthrough();
    TargetFlags skew_tf;
    add_target_flags(skew, skew_tf);
    double skew_delta = 0.5, skew_radius = 6.0;
    skew->add_option("--delta", skew_delta, "step size");
    skew->add_option("--radius", skew_radius, "grid truncation |x| <= radius");

    // ---- f2 ----
    auto* f2 = app.add_subcommand("f2", "second-order bias function on a grid of x")->fallthrough();
    TargetFlags f2_tf;
    f2_tf.name = "quartic1d";
    add_target_flags(f2, f2_tf);
    std::string f2_scheme = "RDBDR", f2_xs = "-3:3:0.05";
    double f2_lambda = 1.0;
    f2->add_option("--scheme", f2_scheme, "split scheme");
    f2->add_option("--lambda-r", f2_lambda, "refreshment rate");
    f2->add_option("--xs", f2_xs, "evaluation grid lo:hi:step");

    // ---- tvterm ----
    auto* tv = app.add_subcommand("tvterm", "second-order TV term over a lambda_r sweep")->fallthrough();
    TargetFlags tv_tf;
    add_target_flags(tv, tv_tf);
    std::string tv_lambda = "0:3:0.25", tv_schemes = "RDBDR,DBRBD,DRBRD,BDRDB";
    double tv_delta = 0.5;
    tv->add_option("--sweep-lambda", tv_lambda, "lo:hi:step refreshment sweep");
    tv->add_option("--delta", tv_delta, "step size");
    tv->add_option("--schemes", tv_schemes, "comma-separated split schemes");

    // ---- particles ----
    auto* parts = app.add_subcommand("particles", "interacting chain: subsampled ZZS vs ULA")->fallthrough();
    ParticlesSpec pspec;
    parts->add_option("--nparticles", pspec.particles, "particle count");
    parts->add_option("--coupling", pspec.coupling, "mean-field strength a");
    parts->add_option("--delta", pspec.delta, "ZZS step size");
    parts->add_option("--iters", pspec.iters, "ZZS iterations");
    parts->add_option("--ula-delta", pspec.ula_delta, "ULA step size");
    parts->add_option("--ula-iters", pspec.ula_iters, "ULA iterations");
    parts->add_option("--checkpoints", pspec.checkpoints, "time-series rows per sampler");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (*run) {
            auto target = make_target(run_tf);
            RunSpec spec;
            spec.sampler.scheme = scheme;
            spec.sampler.delta = delta;
            spec.sampler.lambda_r = lambda_r;
            spec.sampler.iters = iters;
            spec.sampler.time_horizon = time_horizon;
            spec.sampler.metropolis = metropolis;
            spec.sampler.statistic = parse_statistic(stat_name);
            spec.sampler.dump_every = dump_every;
            spec.sampler.submode = submode == "per-event" ? SubsampleMode::per_event_factor
                                                          : SubsampleMode::fixed_factor;
            if (sampler_name == "zzs") spec.sampler.sampler = SamplerConfig::Sampler::zzs;
            else if (sampler_name == "bps") spec.sampler.sampler = SamplerConfig::Sampler::bps;
            else if (sampler_name == "zzs-sub") spec.sampler.sampler = SamplerConfig::Sampler::zzs_sub;
            else if (sampler_name == "zzs-cont") spec.sampler.sampler = SamplerConfig::Sampler::zzs_cont;
            else spec.sampler.sampler = SamplerConfig::Sampler::ula;
            if (spec.sampler.sampler == SamplerConfig::Sampler::zzs_cont && time_horizon <= 0.0)
                throw std::invalid_argument("zzs-cont needs --time");
            spec.replicates = replicates > 0 ? replicates : 1;
            spec.seed = seed;
            spec.threads = threads;
            spec.target_name = run_tf.name;

            std::shared_ptr<Target> effective = target;
            if (spec.sampler.sampler == SamplerConfig::Sampler::zzs_sub &&
                !dynamic_cast<const FactorizedTarget*>(target.get()))
                effective = std::make_shared<SingleFactor>(target);

            // With csv output the file carries the (single-replicate) sample
            // dump; the summary always goes to stdout as JSON.
            if (!out_path.empty() && format == "csv") {
                if (spec.replicates != 1)
                    throw std::invalid_argument("csv state dump requires --replicates 1");
                if (spec.sampler.dump_every <= 0) spec.sampler.dump_every = 1;
                RngStream rng(spec.seed, 0);
                Family fam = spec.sampler.sampler == SamplerConfig::Sampler::bps ? Family::bps
                                                                                 : Family::zzs;
                State s{sample_position(*effective, rng),
                        sample_velocity(fam, effective->dim(), rng), fam};
                ChainOutput outc = run_chain(spec.sampler, *effective, std::move(s), rng);
                std::ofstream fdump(out_path);
                if (!fdump) throw std::invalid_argument("cannot open '" + out_path + "'");
                csv_dump(fdump, outc.dump, spec.sampler.dump_every);
                RunSummary summary;
                summary.count = outc.count;
                summary.stat_mean = outc.stat.mean();
                summary.stat_se = std::nan("");
                summary.reject_frac = outc.reject_fraction();
                summary.grad_evals = outc.grad_evals;
                summary.seed = spec.seed;
                summary.replicates = 1;
                summary.provenance = "single-chain dump target=" + run_tf.name;
                summary.config_hash = hash_hex(summary.provenance);
                std::cout << summary.to_json().dump(2) << "\n";
            } else {
                RunSummary summary = run_experiment(spec, *effective);
                std::string text = summary.to_json().dump(2) + "\n";
                if (!out_path.empty()) {
                    std::ofstream f(out_path);
                    f << text;
                } else {
                    std::cout << text;
                }
                if (summary.replicates > 0 &&
                    summary.failed_replicates == summary.replicates) {
                    std::cerr << "all replicates failed: " << summary.errors.front() << "\n";
                    return 2;
                }
            }
        } else if (*bias) {
            Target1D t = make_target1d(bias_tf);
            long n = bias_iters > 0 ? bias_iters : (paper_scale ? 200'000 : 20'000);
            int r = replicates > 0 ? replicates : (paper_scale ? 250 : 10);
            auto rows = experiment_bias_sweep(t, parse_schemes(bias_schemes),
                                              parse_grid(bias_lambda), bias_delta, n, r, seed,
                                              parse_statistic(bias_stat), threads);
            std::ostringstream os;
            csv_bias_sweep(os, rows);
            emit(os.str(), out_path, format);
        } else if (*order) {
            Target1D t = make_target1d(order_tf);
            double horizon = order_time > 0 ? order_time : (paper_scale ? 1e5 : 1e4);
            int r = replicates > 0 ? replicates : (paper_scale ? 250 : 100);
            auto res = experiment_order(t, order_scheme, order_lambda,
                                        parse_grid(order_deltas), horizon, r, seed,
                                        Statistic::radius2, threads);
            std::ostringstream os;
            csv_order(os, res);
            emit(os.str(), out_path, format);
            std::cerr << "fit over points with |bias| > 2 se (" << res.fit.used << " used, "
                      << res.rows.size() - res.fit.used << " excluded): ";
            if (res.unbiased_verdict)
                std::cerr << "all points consistent with zero bias (unbiased)\n";
            else if (res.fit.used >= 2)
                std::cerr << "slope " << res.fit.slope << ", intercept " << res.fit.intercept
                          << "\n";
            else
                std::cerr << "not enough points for a fit\n";
        } else if (*accept) {
            long n = accept_iters > 0 ? accept_iters : (paper_scale ? 100'000 : 20'000);
            int r = replicates > 0 ? replicates : 10;
            accept_defs.diagonal = accept_gauss == "diag";
            auto rows = experiment_accept(accept_sweep, parse_grid(accept_values), n, r, seed,
                                          accept_defs, threads);
            std::ostringstream os;
            csv_accept(os, rows);
            emit(os.str(), out_path, format);
        } else if (*grid) {
            Target1D t = make_target1d(grid_tf);
            std::vector<GridCheckRow> rows;
            for (double lam : parse_grid(grid_lambda))
                rows.push_back(
                    experiment_grid_check(t, grid_tf.name, grid_delta, lam, grid_radius));
            std::ostringstream os;
            csv_grid_check(os, rows);
            emit(os.str(), out_path, format);
            for (const auto& row : rows)
                if (row.leakage_warning)
                    std::cerr << "warning: boundary leakage " << row.leakage
                              << " at lambda_r = " << row.lambda_r
                              << "; widen --radius or lower --delta\n";
            for (const auto& row : rows)
                if (!row.pass) return 2;
        } else if (*skew) {
            Target1D t = make_target1d(skew_tf);
            std::vector<SkewDbRow> rows{
                experiment_skewdb_check(t, skew_tf.name, skew_delta, skew_radius)};
            std::ostringstream os;
            csv_skewdb(os, rows);
            emit(os.str(), out_path, format);
            if (!rows.front().pass) return 2;
        } else if (*f2) {
            Target1D t = make_target1d(f2_tf);
            auto scheme_id = parse_split_scheme(f2_scheme);
            auto sol = solve_f2(scheme_id, t, f2_lambda);
            std::ostringstream os;
            csv_f2(os, scheme_id, t, f2_lambda, parse_grid(f2_xs), sol);
            emit(os.str(), out_path, format);
        } else if (*tv) {
            Target1D t = make_target1d(tv_tf);
            std::ostringstream os;
            csv_tvterm(os, t, tv_delta, parse_grid(tv_lambda), parse_schemes(tv_schemes));
            emit(os.str(), out_path, format);
        } else if (*parts) {
            pspec.seed = seed;
            if (paper_scale) {
                pspec.iters = std::max<long>(pspec.iters, 1'000'000);
                pspec.ula_iters = std::max<long>(pspec.ula_iters, 100'000);
            }
            auto rows = experiment_particles(pspec);
            std::ostringstream os;
            csv_particles(os, rows);
            emit(os.str(), out_path, format);
        }
    } catch (const InvariantError& e) {
        std::cerr << "invariant violation: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
