#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "qosc/reference.hpp"

using namespace qosc;

TEST_CASE("initial packet reproduces its defining moments") {
    Grid grid{-8.0, 8.0, 8001, 1e-3};

    GridState g0 = init_packet({1.0, 0.0, 0.0}, grid);
    CHECK(std::abs(grid_moment(g0, grid, 0, Which::position) - 1.0) < 1e-10);
    CHECK(std::abs(grid_moment(g0, grid, 1, Which::position)) < 1e-6);
    CHECK(std::abs(grid_moment(g0, grid, 2, Which::position) - 0.5) < 1e-6);

    GridState g1 = init_packet({0.5, 0.5, 1.0}, grid);
    CHECK(std::abs(grid_moment(g1, grid, 1, Which::position) - 0.5) < 1e-6);
    CHECK(std::abs(grid_moment(g1, grid, 1, Which::momentum) - 1.0) < 1e-5);
    CHECK(std::abs(grid_moment(g1, grid, 2, Which::momentum) - (1.0 + 1.0 / 0.5)) < 1e-4);

    CHECK_THROWS_AS(init_packet({2.0, 7.0, 0.0}, grid), std::invalid_argument);
    CHECK_THROWS_AS(grid_moment(g0, grid, 5, Which::position), std::invalid_argument);
}

TEST_CASE("free packet spreads ballistically") {
    Grid grid{-14.0, 14.0, 7001, 2e-4};
    ModelParams params;
    params.omega_sq = Schedule::constant(0.0);

    GridState s = init_packet({1.0, 0.0, 0.0}, grid);
    s = cn_evolve(std::move(s), grid, params, 0.5);
    const double expect = 0.5 + 0.25 * 0.5;  // sigma^2/2 + t^2 / (2 m^2 sigma^2)
    CHECK(std::abs(grid_moment(s, grid, 2, Which::position) - expect) < 1e-4);
    CHECK(std::abs(grid_moment(s, grid, 0, Which::position) - 1.0) < 1e-8);
}

TEST_CASE("coherent state follows the classical harmonic orbit") {
    Grid grid{-10.0, 10.0, 4001, 2e-4};
    ModelParams params;  // m = 1, omega^2 = 1, lambda = 0; x0^2 = 1

    const double a = 0.7, k = 0.4;
    GridState s = init_packet({1.0, a, k}, grid);
    for (double t : {0.5, 1.0, 2.0}) {
        s = cn_evolve(std::move(s), grid, params, t);
        CHECK(std::abs(grid_moment(s, grid, 1, Which::position) -
                       (a * std::cos(t) + k * std::sin(t))) < 1e-4);
        CHECK(std::abs(grid_moment(s, grid, 1, Which::momentum) -
                       (k * std::cos(t) - a * std::sin(t))) < 1e-4);
    }
}

TEST_CASE("pulsed quartic drive conserves norm") {
    Grid grid{-3.5, 4.5, 4001, 5e-4};
    ModelParams params;
    params.m = 10.0;
    params.omega_sq = Schedule::sin_squared(1.0);
    params.lambda = Schedule::sin_squared(0.2);

    GridState s = init_packet({0.5, 0.5, 1.0}, grid);
    s = cn_evolve(std::move(s), grid, params, 2.0);
    CHECK(std::abs(grid_moment(s, grid, 0, Which::position) - 1.0) < 1e-6);
}

TEST_CASE("norm is preserved through ten thousand steps") {
    Grid grid{-9.0, 9.0, 1501, 1e-4};
    ModelParams params;
    GridState s = init_packet({1.0, 0.5, 0.0}, grid);
    s = cn_evolve(std::move(s), grid, params, 1.0);  // 10^4 steps
    CHECK(std::abs(grid_moment(s, grid, 0, Which::position) - 1.0) < 1e-8);
}

TEST_CASE("quartering the time step cuts the moment error about sixteenfold") {
    ModelParams params;
    const double a = 0.8, t_end = 1.0;
    auto moment_error = [&](double dt) {
        Grid grid{-10.0, 10.0, 8001, dt};
        GridState s = init_packet({1.0, a, 0.0}, grid);
        s = cn_evolve(std::move(s), grid, params, t_end);
        return std::abs(grid_moment(s, grid, 1, Which::position) - a * std::cos(t_end));
    };
    const double coarse = moment_error(0.02);
    const double fine = moment_error(0.005);
    const double ratio = coarse / fine;
    CHECK(ratio > 10.0);
    CHECK(ratio < 22.0);
}

TEST_CASE("escaping probability trips the wall monitor") {
    // A fast packet in a tiny box must hit the boundary check.
    Grid grid{-3.0, 3.0, 301, 1e-3};
    ModelParams params;
    params.omega_sq = Schedule::constant(0.0);
    GridState s = init_packet({0.4, 0.0, 6.0}, grid);
    CHECK_THROWS_AS(cn_evolve(std::move(s), grid, params, 3.0), std::runtime_error);
}

TEST_CASE("spectrum reproduces the harmonic ladder") {
    ModelParams params;
    auto ev = spectrum(params, 24);
    REQUIRE(static_cast<int>(ev.size()) == 24);
    for (int n = 0; n < 12; ++n) CHECK(std::abs(ev[n] - (n + 0.5)) < 1e-10);
    for (int n = 1; n < 24; ++n) CHECK(ev[n] > ev[n - 1]);
}

TEST_CASE("weak quartic coupling shifts the ground state at first order") {
    ModelParams params;
    params.lambda = Schedule::constant(1e-4);
    auto ev = spectrum(params, 4);
    // E0 = 1/2 + lambda <0|x^4|0> / 4 + O(lambda^2), <0|x^4|0> = 3/4.
    CHECK(std::abs(ev[0] - 0.5 - 3.0 * 1e-4 / 16.0) < 1e-8);

    ModelParams strong;
    strong.m = 10.0;
    strong.lambda = Schedule::constant(0.2);
    auto ev2 = spectrum(strong, 4);
    CHECK(ev2[0] > 0.5);  // a positive quartic term raises E0 above hbar*omega/2
}

TEST_CASE("time-dependent coefficients are rejected by the diagonalizer") {
    ModelParams params;
    params.omega_sq = Schedule::sin_squared(1.0);
    CHECK_THROWS_AS(spectrum(params, 8), std::invalid_argument);
}
