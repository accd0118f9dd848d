#include <catch2/catch_amalgamated.hpp>

#include <lbcnet/adam.hpp>

#include <cmath>
#include <limits>

using Catch::Matchers::WithinAbs;
using namespace lbcnet;

TEST_CASE("zero gradient leaves fresh parameters in place", "[adam]") {
    Vector params(3);
    params << 1.0, -2.0, 0.5;
    const Vector before = params;
    AdamState state(3);
    adam_step(params, state, Vector::Zero(3), 0.1);
    CHECK(params == before);
}

TEST_CASE("single bias-corrected step has the textbook magnitude", "[adam]") {
    Vector params(1);
    params << 0.7;
    AdamState state(1);
    Vector grad(1);
    grad << 1.0;
    adam_step(params, state, grad, 0.1);

    // m-hat = 1, v-hat = 1 -> step = -lr / (1 + eps)
    const double expected = 0.7 - 0.1 / (1.0 + 1e-8);
    CHECK_THAT(params[0], WithinAbs(expected, 1e-15));
    CHECK_THAT(params[0] - 0.7, WithinAbs(-0.09999999, 1e-8));
}

TEST_CASE("coordinates evolve independently", "[adam]") {
    Vector params(2);
    params << 0.4, 0.4;
    AdamState state(2);
    for (double g : {1.0, -0.3, 0.8, 0.05, -2.0}) {
        Vector grad(2);
        grad << g, g;
        adam_step(params, state, grad, 0.05);
        CHECK(params[0] == params[1]);
    }
}

TEST_CASE("multi-step trajectory matches the recurrence", "[adam]") {
    Vector params(1);
    params << -1.5;
    AdamState state(1);

    double x = -1.5, m = 0.0, v = 0.0;
    const double grads[3] = {1.0, -2.0, 0.5};
    for (int s = 1; s <= 3; ++s) {
        Vector g(1);
        g << grads[s - 1];
        adam_step(params, state, g, 0.01);

        m = 0.9 * m + 0.1 * grads[s - 1];
        v = 0.999 * v + 0.001 * grads[s - 1] * grads[s - 1];
        const double mc = m / (1.0 - std::pow(0.9, s));
        const double vc = v / (1.0 - std::pow(0.999, s));
        x -= 0.01 * mc / (std::sqrt(vc) + 1e-8);
        CHECK_THAT(params[0], WithinAbs(x, 1e-15));
    }
    CHECK(state.step == 3);
}

TEST_CASE("bad inputs are rejected", "[adam]") {
    Vector params(2);
    params << 0.0, 0.0;
    AdamState state(2);
    Vector nan_grad(2);
    nan_grad << 1.0, std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(adam_step(params, state, nan_grad, 0.1), Error);

    Vector grad(2);
    grad << 1.0, 1.0;
    CHECK_THROWS_AS(adam_step(params, state, grad, 0.0), Error);
    Vector wrong(3);
    wrong.setZero();
    CHECK_THROWS_AS(adam_step(params, state, wrong, 0.1), Error);
}
