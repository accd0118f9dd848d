#include <catch2/catch_amalgamated.hpp>

#include <lbcnet/lbcnet.hpp>

#include "fixtures.hpp"
#include "oracle.hpp"

#include <cmath>
#include <cstdint>
#include <vector>

using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;
using namespace lbcnet;

TEST_CASE("inverse-probability weights from scores", "[estimators]") {
    Vector p(3), t(3);
    p << 0.5, 0.25, 0.25;
    t << 1, 1, 0;
    const Vector w = ipw_weights(p, t);
    CHECK(w[0] == 2.0);                       // p = 1/2, either arm
    CHECK(w[1] == 4.0);                       // treated at p = 1/4
    CHECK_THAT(w[2], WithinRel(4.0 / 3.0, 1e-15));  // control at p = 1/4
    CHECK(w.minCoeff() >= 1.0);

    // symmetric: a control at 1-p weighs the same as a treated at p
    // (dyadic scores, so 1-p is exact)
    Vector ps(2), ts(2);
    ps << 0.25, 0.75;
    ts << 1, 0;
    const Vector ws = ipw_weights(ps, ts);
    CHECK(ws[0] == ws[1]);

    Vector bad(1), tb(1);
    bad << 1.0;
    tb << 1;
    CHECK_THROWS_AS(ipw_weights(bad, tb), Error);
    bad << 0.0;
    CHECK_THROWS_AS(ipw_weights(bad, tb), Error);
    Vector short_t(0);
    CHECK_THROWS_AS(ipw_weights(ps, short_t), Error);
}

TEST_CASE("weight truncation clamps at nearest-rank quantiles", "[estimators]") {
    Vector w(10);
    for (int i = 0; i < 10; ++i) w[i] = i + 1.0;

    const Vector out = truncate_weights(w, 0.1);
    // nearest-rank: the 10% quantile of {1..10} is 1, the 90% quantile is 9
    CHECK(out.minCoeff() == 1.0);
    CHECK(out.maxCoeff() == 9.0);
    for (int i = 0; i < 9; ++i) CHECK(out[i] == w[i]);
    CHECK(out[9] == 9.0);

    CHECK(truncate_weights(w, 0.0) == w);
    CHECK_THROWS_AS(truncate_weights(w, -0.01), Error);
    CHECK_THROWS_AS(truncate_weights(w, 0.5), Error);
}

TEST_CASE("ratio estimator hand example", "[estimators]") {
    Vector y(4), t(4), w(4);
    y << 10, 20, 30, 40;
    t << 1, 1, 0, 0;
    w << 1, 3, 1, 1;
    // treated: (10 + 60)/4 = 17.5; control: (30 + 40)/2 = 35
    CHECK_THAT(ate_hajek(y, t, w), WithinRel(-17.5, 1e-15));
    CHECK_THAT(hajek_treated_mean(y, t, w), WithinRel(17.5, 1e-15));

    // same data, unnormalized: 70/4 - 70/4
    CHECK(ate_horvitz_thompson(y, t, w, 4) == 0.0);
}

TEST_CASE("constant weights reduce the ratio estimator to arm means", "[estimators]") {
    Rng rng(88);
    const int n = 40;
    Vector y(n), t(n), ones = Vector::Ones(n);
    for (int i = 0; i < n; ++i) {
        y[i] = rng.normal() * 3.0 + 1.0;
        t[i] = (i % 2 == 0) ? 1.0 : 0.0;
    }
    double m1 = 0, m0 = 0;
    for (int i = 0; i < n; ++i) (t[i] == 1.0 ? m1 : m0) += y[i];
    const double naive = m1 / (n / 2.0) - m0 / (n / 2.0);
    CHECK_THAT(ate_hajek(y, t, ones), WithinRel(naive, 1e-14));
}

TEST_CASE("ratio estimator is scale invariant, the unnormalized one is not", "[estimators]") {
    Rng rng(12);
    const int n = 30;
    Vector y(n), t(n), w(n);
    for (int i = 0; i < n; ++i) {
        y[i] = rng.normal();
        t[i] = (i < 13) ? 1.0 : 0.0;
        w[i] = 1.0 + rng.uniform() * 4.0;
    }
    const double base = ate_hajek(y, t, w);
    CHECK_THAT(ate_hajek(y, t, (w * 7.5).eval()), WithinRel(base, 1e-12));

    const double ht = ate_horvitz_thompson(y, t, w, n);
    const double ht_scaled = ate_horvitz_thompson(y, t, (w * 7.5).eval(), n);
    CHECK_THAT(ht_scaled, WithinRel(7.5 * ht, 1e-12));
    CHECK(ht_scaled != ht);

    // when each arm's weight mass equals N, the two estimators coincide
    Vector y4(4), t4(4), w4(4);
    y4 << 1.0, 3.0, -2.0, 5.0;
    t4 << 1, 1, 0, 0;
    w4 << 2, 2, 2, 2;  // sum T W = sum (1-T) W = 4 = N
    CHECK_THAT(ate_horvitz_thompson(y4, t4, w4, 4), WithinRel(ate_hajek(y4, t4, w4), 1e-15));

    CHECK(ate_horvitz_thompson(Vector::Zero(n), t, w, n) == 0.0);
    CHECK_THROWS_AS(ate_horvitz_thompson(y, t, w, 0), Error);
}

TEST_CASE("estimators reject single-arm weight mass", "[estimators]") {
    Vector y(2), t(2), w(2);
    y << 1, 2;
    t << 1, 1;
    w << 1, 1;
    CHECK_THROWS_AS(ate_hajek(y, t, w), Error);
    Vector t0 = Vector::Zero(2);
    CHECK_THROWS_AS(hajek_treated_mean(y, t0, w), Error);
}

TEST_CASE("effective sample sizes", "[estimators]") {
    SECTION("constant weights give back the arm counts") {
        Vector t(7), w = Vector::Constant(7, 3.25);
        t << 1, 1, 1, 0, 0, 0, 0;
        const auto ess = effective_sample_size(t, w);
        CHECK_THAT(ess.treated, WithinRel(3.0, 1e-14));
        CHECK_THAT(ess.control, WithinRel(4.0, 1e-14));
    }
    SECTION("unequal weights shrink the effective count") {
        Vector t(3), w(3);
        t << 1, 1, 0;
        w << 1, 3, 2;
        const auto ess = effective_sample_size(t, w);
        CHECK_THAT(ess.treated, WithinRel(1.6, 1e-15));  // 16/10
        CHECK_THAT(ess.control, WithinRel(1.0, 1e-15));
    }
    SECTION("never exceeds the arm size") {
        Rng rng(5);
        Vector t(50), w(50);
        for (int i = 0; i < 50; ++i) {
            t[i] = rng.bernoulli(0.4) ? 1.0 : 0.0;
            w[i] = 0.5 + rng.uniform() * 9.5;
        }
        const auto ess = effective_sample_size(t, w);
        CHECK(ess.treated <= t.sum());
        CHECK(ess.control <= t.size() - t.sum());
        const auto [ot, oc] = oracle::effective_sizes(fixtures::to_std(t), fixtures::to_std(w));
        CHECK_THAT(ess.treated, WithinRel(ot, 1e-12));
        CHECK_THAT(ess.control, WithinRel(oc, 1e-12));
    }
    SECTION("empty arm is an error") {
        Vector t = Vector::Ones(4), w = Vector::Ones(4);
        CHECK_THROWS_AS(effective_sample_size(t, w), Error);
    }
}

TEST_CASE("true scores give weights with mean one per arm", "[estimators]") {
    const auto sim = ks_generate(5000, 314, false);
    const Vector w = ipw_weights(sim.true_propensity, sim.data.treatment);
    const double n = static_cast<double>(sim.data.n());
    double tw = 0.0, cw = 0.0;
    for (Eigen::Index i = 0; i < sim.data.n(); ++i)
        (sim.data.treatment[i] == 1.0 ? tw : cw) += w[i];
    const double slack = 3.0 / std::sqrt(n);
    CHECK_THAT(tw / n, WithinAbs(1.0, slack));
    CHECK_THAT(cw / n, WithinAbs(1.0, slack));
}

TEST_CASE("bootstrap standard error of a sample mean", "[estimators][slow]") {
    const int n = 200;
    Rng rng(2026);
    Matrix raw(n, 1);
    Vector t(n), y(n);
    for (int i = 0; i < n; ++i) {
        raw(i, 0) = rng.normal();
        y[i] = rng.normal();
        t[i] = (i % 2 == 0) ? 1.0 : 0.0;
    }
    const auto data = Dataset::from_raw(raw, t, y, {"x"});

    const auto mean_outcome = [](const Dataset& d, std::uint64_t) {
        return d.outcome->mean();
    };
    const double se = bootstrap_se(data, mean_outcome, 500, 99);
    const double analytic = 1.0 / std::sqrt(static_cast<double>(n));
    CHECK(se > 0.75 * analytic);
    CHECK(se < 1.25 * analytic);

    SECTION("constant estimator has zero spread") {
        const auto constant = [](const Dataset&, std::uint64_t) { return 42.0; };
        CHECK(bootstrap_se(data, constant, 50, 1) == 0.0);
    }
    SECTION("worker count does not change the result") {
        const double serial = bootstrap_se(data, mean_outcome, 60, 7, 1);
        const double threaded = bootstrap_se(data, mean_outcome, 60, 7, 4);
        CHECK(serial == threaded);
    }
    SECTION("too few repetitions") {
        const auto constant = [](const Dataset&, std::uint64_t) { return 0.0; };
        CHECK_THROWS_AS(bootstrap_se(data, constant, 1, 1), Error);
    }
}

TEST_CASE("resampling keeps redrawing until both arms appear", "[estimators]") {
    Vector mixed(6);
    mixed << 1, 0, 0, 0, 0, 0;
    Rng rng(17);
    for (int trial = 0; trial < 20; ++trial) {
        const auto idx = bootstrap_indices(rng, mixed);
        bool any1 = false, any0 = false;
        for (const auto j : idx) (mixed[j] == 1.0 ? any1 : any0) = true;
        CHECK(any1);
        CHECK(any0);
    }

    // with a single-class population every redraw fails
    Vector all_control = Vector::Zero(5);
    Rng rng2(3);
    CHECK_THROWS_AS(bootstrap_indices(rng2, all_control), Error);
}

TEST_CASE("effect report bundles the point estimates", "[estimators]") {
    const auto sim = ks_generate(400, 77, false);
    const Vector p = clamp_scores(sim.true_propensity);
    const auto report = estimate_effect(sim.data, p);

    const Vector w = ipw_weights(p, sim.data.treatment);
    CHECK(report.ate_hajek == ate_hajek(*sim.data.outcome, sim.data.treatment, w));
    CHECK(report.ate_horvitz_thompson ==
          ate_horvitz_thompson(*sim.data.outcome, sim.data.treatment, w, sim.data.n()));
    const auto ess = effective_sample_size(sim.data.treatment, w);
    CHECK(report.ess_treated == ess.treated);
    CHECK(report.ess_control == ess.control);
    CHECK(report.ess_treated <= sim.data.treatment.sum());
    CHECK_FALSE(report.bootstrap_se.has_value());
    CHECK(report.truncation_quantile == 0.0);

    SECTION("truncation narrows the weight range") {
        const auto truncated = estimate_effect(sim.data, p, 0.05);
        CHECK(truncated.truncation_quantile == 0.05);
        CHECK(truncated.ess_treated >= report.ess_treated);
    }
    SECTION("outcome is required") {
        Dataset no_y = sim.data;
        no_y.outcome.reset();
        CHECK_THROWS_AS(estimate_effect(no_y, p), Error);
    }
    SECTION("score length must match") {
        CHECK_THROWS_AS(estimate_effect(sim.data, Vector::Constant(3, 0.5)), Error);
    }
}
