#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "pdmpsplit/bias1d.hpp"

using namespace pdmps;

namespace {

const SplitScheme kSchemes[] = {SplitScheme::DBRBD, SplitScheme::RDBDR, SplitScheme::DRBRD,
                                SplitScheme::BDRDB};

Target1D target_of(int i) {
    switch (i) {
        case 0: return make_gaussian1d(1.0);
        case 1: return make_quartic1d();
        default: return make_cauchy1d(1.0);
    }
}

}  // namespace

TEST_CASE("h functions") {
    Target1D g = make_gaussian1d(1.0);
    Target1D q = make_quartic1d();
    Target1D c = make_cauchy1d(1.3);

    SECTION("RDBDR: h = v psi'''/24") {
        for (double x : {-2.0, -0.3, 0.0, 0.7, 1.9})
            for (double v : {-1.0, 1.0}) {
                CHECK(h_function(SplitScheme::RDBDR, q, 1.7, x, v) == Catch::Approx(v * x).margin(1e-14));
                CHECK(h_function(SplitScheme::RDBDR, g, 0.9, x, v) == 0.0);
            }
    }
    SECTION("gaussian h vanishes at zero refreshment for DBRBD and DRBRD") {
        for (double x : {-1.5, 0.4, 2.2})
            for (double v : {-1.0, 1.0}) {
                CHECK(h_function(SplitScheme::DBRBD, g, 0.0, x, v) == 0.0);
                CHECK(h_function(SplitScheme::DRBRD, g, 0.0, x, v) == 0.0);
            }
    }
    SECTION("gaussian BDRDB transcription") {
        double lam = 0.8;
        for (double x : {-2.1, -0.4, 0.5, 1.7})
            for (double v : {-1.0, 1.0}) {
                double expect = (-lam * (x * x + 2 * v * x * pos_part(-v * x)) +
                                 2 * pos_part(-v * x) * (x * x - 2.0)) / 8.0;
                CHECK(h_function(SplitScheme::BDRDB, g, lam, x, v) ==
                      Catch::Approx(expect).margin(1e-14));
            }
    }
    SECTION("quartic DBRBD transcription") {
        double lam = 1.4;
        for (double x : {-1.2, 0.3, 2.0})
            for (double v : {-1.0, 1.0}) {
                double x3 = x * x * x, x6 = x3 * x3;
                double expect = 2 * lam * (x6 + 2 * v * x3 * pos_part(-v * x3)) + v * x;
                CHECK(h_function(SplitScheme::DBRBD, q, lam, x, v) ==
                      Catch::Approx(expect).epsilon(1e-13));
            }
    }
    SECTION("h(.,+1) + h(.,-1) is zero except for BDRDB") {
        for (double x : {-2.0, 0.6, 1.4}) {
            for (auto s : {SplitScheme::DBRBD, SplitScheme::RDBDR, SplitScheme::DRBRD})
                CHECK(std::abs(h_function(s, c, 1.1, x, 1.0) + h_function(s, c, 1.1, x, -1.0)) <= 1e-15);
            double hs = h_function(SplitScheme::BDRDB, c, 1.1, x, 1.0) +
                        h_function(SplitScheme::BDRDB, c, 1.1, x, -1.0);
            // |psi'| (psi'^2 - 2 psi'') / 4
            double expect = std::abs(c.psi1(x)) * (c.psi1(x) * c.psi1(x) - 2 * c.psi2(x)) / 4.0;
            CHECK(hs == Catch::Approx(expect).margin(1e-14));
        }
    }
}

TEST_CASE("solve_f2 spot values") {
    SECTION("RDBDR gaussian is identically zero") {
        auto sol = solve_f2(SplitScheme::RDBDR, make_gaussian1d(1.0), 1.0);
        for (double x = -3.0; x <= 3.0; x += 0.25) {
            CHECK(std::abs(sol.f2_plus(x)) <= 1e-6);
            CHECK(std::abs(sol.f2_minus(x)) <= 1e-6);
        }
    }
    SECTION("BDRDB gaussian at x = -1") {
        auto sol = solve_f2(SplitScheme::BDRDB, make_gaussian1d(1.0), 0.5);
        CHECK(sol.f2_plus(-1.0) == Catch::Approx(-0.125).margin(1e-5));
    }
    SECTION("RDBDR quartic at the origin") {
        auto sol = solve_f2(SplitScheme::RDBDR, make_quartic1d(), 0.7);
        double expect = std::tgamma(0.75) / (2.0 * std::tgamma(0.25));
        CHECK(expect == Catch::Approx(0.168993).margin(1e-6));
        CHECK(sol.f2_plus(0.0) == Catch::Approx(expect).margin(1e-5));
        CHECK(sol.f2_minus(0.0) == Catch::Approx(expect).margin(1e-5));
    }
    SECTION("BDRDB gaussian g matches -x^2 sign(x)/4") {
        auto sol = solve_f2(SplitScheme::BDRDB, make_gaussian1d(1.0), 1.0);
        for (double x = -3.0; x <= 3.0; x += 0.37)
            CHECK(sol.g(x) == Catch::Approx(-x * x * (x > 0 ? 1 : x < 0 ? -1 : 0) / 4.0).margin(1e-6));
    }
}

TEST_CASE("closed form spot values") {
    SECTION("DBRBD gaussian at the origin") {
        Target1D g = make_gaussian1d(1.0);
        double v = closed_form_f2(SplitScheme::DBRBD, g, 1.0, 0.0, 1.0);
        CHECK(v == Catch::Approx(0.0664903).margin(1e-6));
    }
    SECTION("DRBRD at zero refreshment coincides with RDBDR") {
        for (int ti = 0; ti < 3; ++ti) {
            Target1D t = target_of(ti);
            for (double x = -3.0; x <= 3.0; x += 0.5)
                for (double v : {-1.0, 1.0})
                    CHECK(closed_form_f2(SplitScheme::DRBRD, t, 0.0, x, v) ==
                          Catch::Approx(closed_form_f2(SplitScheme::RDBDR, t, 0.0, x, v))
                              .margin(1e-14));
        }
    }
    SECTION("BDRDB cauchy at the mode") {
        Target1D c = make_cauchy1d(1.0);
        CHECK(closed_form_f2(SplitScheme::BDRDB, c, 0.3, 0.0, 1.0) == Catch::Approx(0.1875));
        CHECK(closed_form_f2(SplitScheme::BDRDB, c, 0.3, 0.0, -1.0) == Catch::Approx(0.1875));
    }
}

TEST_CASE("oracle equivalence of quadrature and closed forms") {
    // all 12 scheme x target pairs, lambda_r in {0, 0.5, 1, 2}
    for (int ti = 0; ti < 3; ++ti) {
        Target1D t = target_of(ti);
        for (auto scheme : kSchemes) {
            for (double lam : {0.0, 0.5, 1.0, 2.0}) {
                auto sol = solve_f2(scheme, t, lam);
                double worst = 0.0, worst_x = 0.0;
                for (double x = -3.0; x <= 3.0 + 1e-9; x += 0.05) {
                    for (double v : {-1.0, 1.0}) {
                        double a = v > 0 ? sol.f2_plus(x) : sol.f2_minus(x);
                        double b = closed_form_f2(scheme, t, lam, x, v);
                        if (std::abs(a - b) > worst) {
                            worst = std::abs(a - b);
                            worst_x = x;
                        }
                    }
                }
                INFO("scheme " << split_scheme_name(scheme) << " target " << ti << " lambda "
                               << lam << " worst at x = " << worst_x);
                CHECK(worst <= 1e-4);
            }
        }
    }
}

TEST_CASE("f2 solution invariants") {
    SECTION("f2_minus - f2_plus = g and compatibility") {
        for (int ti = 0; ti < 3; ++ti) {
            Target1D t = target_of(ti);
            for (auto scheme : kSchemes) {
                auto sol = solve_f2(scheme, t, 1.0);
                for (double x = -2.5; x <= 2.5; x += 0.31)
                    CHECK(std::abs(sol.f2_minus(x) - sol.f2_plus(x) - sol.g(x)) <= 1e-10);
                CHECK(sol.compat_residual() <= 1e-6);
                CHECK(sol.boundary_g_decay() <= 1e-6);
            }
        }
    }
    SECTION("RDBDR solution is independent of the refreshment rate") {
        for (int ti = 0; ti < 3; ++ti) {
            Target1D t = target_of(ti);
            auto a = solve_f2(SplitScheme::RDBDR, t, 0.0);
            auto b = solve_f2(SplitScheme::RDBDR, t, 3.0);
            for (double x = -3.0; x <= 3.0; x += 0.2)
                CHECK(std::abs(a.f2_plus(x) - b.f2_plus(x)) <= 1e-8);
        }
    }
}

TEST_CASE("tv second-order term") {
    Target1D g = make_gaussian1d(1.0);
    SECTION("RDBDR gaussian vanishes") {
        auto sol = solve_f2(SplitScheme::RDBDR, g, 1.0);
        CHECK(tv_second_order(sol, g, 0.5) <= 1e-10);
        CHECK(tv_second_order(sol, g, 0.0) == 0.0);
    }
    SECTION("DBRBD gaussian scales linearly in lambda_r") {
        double t1 = tv_second_order_closed(SplitScheme::DBRBD, g, 1.0, 0.5);
        double t2 = tv_second_order_closed(SplitScheme::DBRBD, g, 2.0, 0.5);
        CHECK(t2 / t1 == Catch::Approx(2.0).margin(1e-6));
    }
    SECTION("BDRDB gaussian is independent of lambda_r") {
        double t0 = tv_second_order_closed(SplitScheme::BDRDB, g, 0.0, 0.5);
        double t3 = tv_second_order_closed(SplitScheme::BDRDB, g, 3.0, 0.5);
        CHECK(t0 == t3);  // the closed form carries no lambda_r at all
        CHECK(t0 > 0.0);
    }
    SECTION("quadrature route agrees with the closed route") {
        for (int ti = 0; ti < 3; ++ti) {
            Target1D t = target_of(ti);
            auto sol = solve_f2(SplitScheme::BDRDB, t, 1.0);
            double a = tv_second_order(sol, t, 0.5);
            double b = tv_second_order_closed(SplitScheme::BDRDB, t, 1.0, 0.5);
            CHECK(a == Catch::Approx(b).margin(2e-5));
        }
    }
}

TEST_CASE("psi_delta grid measure") {
    SECTION("gaussian grid potential is exact") {
        Target1D g = make_gaussian1d(1.3);
        auto gm = psi_delta_grid(g, 0.2, 0.5, 10);
        for (int k = 0; k < 21; ++k)
            CHECK(gm.psi_delta[k] == Catch::Approx(g.psi(gm.position(k))).margin(1e-12));
    }
    SECTION("quartic midpoint value") {
        Target1D q = make_quartic1d();
        auto gm = psi_delta_grid(q, 0.0, 0.5, 3);
        CHECK(gm.psi_delta[3] == 0.0);                       // psi_delta(x0) = psi(x0)
        CHECK(gm.psi_delta[4] == Catch::Approx(0.03125));    // 0.5 * psi'(0.25)
    }
    SECTION("masses are normalized") {
        Target1D q = make_quartic1d();
        auto gm = psi_delta_grid(q, 0.1, 0.4, 12);
        double s = 0.0;
        for (double w : gm.mass) s += w;
        CHECK(std::abs(s - 1.0) <= 1e-12);
    }
    CHECK_THROWS_AS(psi_delta_grid(make_quartic1d(), 0.0, -0.5, 5), std::invalid_argument);
    CHECK_THROWS_AS(psi_delta_grid(make_quartic1d(), 0.0, 0.5, 0), std::invalid_argument);
}

TEST_CASE("RDBDR grid stationarity") {
    SECTION("gaussian: exact for any delta and lambda_r") {
        Target1D g = make_gaussian1d(1.0);
        auto gm = psi_delta_grid(g, 0.0, 0.5, 12);
        for (double lam : {0.0, 0.7, 2.0}) {
            auto res = grid_invariance_residual(gm, g, lam);
            CHECK(res.residual <= 1e-12 + res.leakage);
        }
    }
    SECTION("quartic: exact with negligible leakage") {
        Target1D q = make_quartic1d();
        auto gm = psi_delta_grid(q, 0.0, 0.5, 12);
        for (double lam : {0.0, 1.0}) {
            auto res = grid_invariance_residual(gm, q, lam);
            CHECK(res.residual <= 1e-8);
            CHECK(res.leakage <= 1e-10);
        }
    }
    SECTION("cauchy: truncation shows up as leakage, interior residual stays small") {
        Target1D c = make_cauchy1d(1.0);
        auto gm = psi_delta_grid(c, 0.0, 0.5, 40);
        auto res = grid_invariance_residual(gm, c, 0.5);
        CHECK(res.residual <= 1e-8 + 10.0 * res.leakage);
    }
}

TEST_CASE("solver guards") {
    SECTION("insufficient truncation radius is rejected") {
        QuadCfg cfg;
        cfg.x_max = 3.0;  // gaussian mass beyond 3 is ~2.7e-3 >> tail_tol
        cfg.intervals = 20'000;
        CHECK_THROWS_WITH(solve_f2(SplitScheme::RDBDR, make_gaussian1d(1.0), 0.0, cfg),
                          Catch::Matchers::ContainsSubstring("x_max"));
    }
    SECTION("tv term refuses incompatible integrands") {
        CHECK_THROWS_WITH(
            tv_second_order_eval([](double, double) { return 1.0; }, make_gaussian1d(1.0), 0.5),
            Catch::Matchers::ContainsSubstring("compatibility"));
    }
    SECTION("negative refreshment rate is rejected") {
        CHECK_THROWS_AS(solve_f2(SplitScheme::RDBDR, make_gaussian1d(1.0), -0.5),
                        std::invalid_argument);
    }
}

#include "pdmpsplit/harness.hpp"

namespace {

// leading-order prediction for the stationary bias of E[t(X)]:
//   E_delta[t] - E[t] = -(delta^2/2) E_pi[t(x) (f2(x,+1)+f2(x,-1))] + O(delta^4)
double predicted_bias(SplitScheme scheme, const Target1D& t, double lam, double delta,
                      Statistic stat) {
    const auto map = detail::make_grid_map(t, QuadCfg{});
    const std::size_t n = 400'000;
    const double dp = (map.p_hi - map.p_lo) / static_cast<double>(n);
    double z = 0.0, acc = 0.0, prev_w = 0.0, prev_f = 0.0;
    for (std::size_t k = 0; k <= n; ++k) {
        double p = map.p_lo + dp * static_cast<double>(k);
        double x = map.x_of(p);
        double wj = std::exp(-(t.psi(x) - t.psi(0.0))) * map.jacobian(p);
        double s2 = closed_form_f2(scheme, t, lam, x, +1.0) +
                    closed_form_f2(scheme, t, lam, x, -1.0);
        double f = eval_statistic(stat, {x}) * s2;
        if (k > 0) {
            z += 0.5 * dp * (prev_w + wj);
            acc += 0.5 * dp * (prev_f * prev_w + f * wj);
        }
        prev_w = wj;
        prev_f = f;
    }
    return -0.5 * delta * delta * acc / z;
}

}  // namespace

TEST_CASE("empirical scheme bias matches the second-order prediction") {
    struct Leg {
        SplitScheme scheme;
        Target1D target;
        double lambda_r;
        double delta;
        Statistic stat;
        long iters;
        double hot_frac;  // allowance for the O(delta^4) remainder
        std::uint64_t seed;
    };
    const Leg legs[] = {
        {SplitScheme::DBRBD, make_gaussian1d(1.0), 1.0, 0.25, Statistic::radius2, 1'500'000,
         0.15, 101},
        {SplitScheme::DRBRD, make_gaussian1d(1.0), 1.0, 0.25, Statistic::radius2, 1'500'000,
         0.15, 202},
        {SplitScheme::RDBDR, make_quartic1d(), 0.5, 0.25, Statistic::radius2, 1'500'000, 0.15,
         303},
        {SplitScheme::BDRDB, make_gaussian1d(1.0), 1.0, 0.25, Statistic::radius2, 1'500'000,
         0.15, 404},
    };
    for (const auto& leg : legs) {
        const int reps = 8;
        const double truth = expected_statistic(leg.target, leg.stat);
        const double pred = predicted_bias(leg.scheme, leg.target, leg.lambda_r, leg.delta,
                                           leg.stat);
        SamplerConfig cfg;
        cfg.sampler = SamplerConfig::Sampler::bps;
        cfg.scheme = split_scheme_name(leg.scheme);
        cfg.delta = leg.delta;
        cfg.lambda_r = leg.lambda_r;
        cfg.iters = leg.iters;
        cfg.statistic = leg.stat;
        auto rep = replicate_fanout(reps, leg.seed, [&](int, RngStream& rng) {
            State s{sample_position(leg.target, rng), sample_velocity(Family::bps, 1, rng),
                    Family::bps};
            return run_chain(cfg, leg.target, std::move(s), rng).stat.mean();
        });
        OnlineStat across;
        for (const auto& v : rep.values)
            if (v.has_value()) across.add(*v);
        double emp = across.mean() - truth;
        double tol = 3.0 * across.se() + leg.hot_frac * std::abs(pred);
        INFO(split_scheme_name(leg.scheme)
             << ": empirical " << emp << " predicted " << pred << " tol " << tol);
        CHECK(std::abs(emp - pred) <= tol);
        CHECK(tol < std::abs(pred));  // the check can actually tell bias from no bias
    }
}
