#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "qosc/disentangle.hpp"
#include "qosc/observables.hpp"

using namespace qosc;

namespace {
ModelParams quartic_params(double m, double om2, double lam) {
    ModelParams p;
    p.m = m;
    p.omega_sq = Schedule::constant(om2);
    p.lambda = Schedule::constant(lam);
    return p;
}

AbgState initial_triple(double sigma) {
    AbgState s;
    s.alpha = s.beta = s.gamma = complex(1.0 / (sigma * sigma), 0.0);
    return s;
}
}  // namespace

TEST_CASE("hermite polynomials") {
    CHECK(std::abs(hermite(0, complex(0.3, 0.1)) - complex(1.0, 0.0)) < 1e-15);
    const complex x(0.7, -0.4);
    CHECK(std::abs(hermite(3, x) - (8.0 * x * x * x - 12.0 * x)) < 1e-13);
    // H_5(1) = 32 - 160 + 120 = -8
    CHECK(std::abs(hermite(5, complex(1.0, 0.0)) - complex(-8.0, 0.0)) < 1e-12);
    CHECK_THROWS_AS(hermite(-1, complex(0.0, 0.0)), std::invalid_argument);
}

TEST_CASE("one-trajectory samples reproduce the initial moments") {
    GaussianPacket packet{0.7, 0.4, -0.3};
    AbgState s = initial_triple(packet.sigma);
    const double v = 0.5 * packet.sigma * packet.sigma;

    CHECK(std::abs(moment_sample(s, s, packet, 0, Which::position) - 1.0) < 1e-12);
    CHECK(std::abs(moment_sample(s, s, packet, 1, Which::position) - packet.a) < 1e-12);
    CHECK(std::abs(moment_sample(s, s, packet, 2, Which::position) -
                   (packet.a * packet.a + v)) < 1e-12);
    CHECK(std::abs(moment_sample(s, s, packet, 0, Which::momentum) - 1.0) < 1e-12);
    CHECK(std::abs(moment_sample(s, s, packet, 1, Which::momentum) - packet.k) < 1e-12);
    const double p2 = packet.k * packet.k + 0.25 / v;
    CHECK(std::abs(moment_sample(s, s, packet, 2, Which::momentum) - p2) < 1e-12);
}

TEST_CASE("harmonic closed-form moments") {
    auto params = quartic_params(1.0, 1.0, 0.0);
    GaussianPacket packet{1.3, 0.8, 0.5};
    const double v = 0.5 * packet.sigma * packet.sigma;

    CHECK(harmonic_moment(params, packet, 0.0, 1, Which::position) == doctest::Approx(0.8));
    CHECK(harmonic_moment(params, packet, 0.0, 2, Which::position) ==
          doctest::Approx(0.64 + v));
    CHECK(harmonic_moment(params, packet, 0.0, 1, Which::momentum) == doctest::Approx(0.5));

    // Quarter period at m = omega = 1 swaps the roles of x and p.
    const double tq = M_PI / 2.0;
    CHECK(harmonic_moment(params, packet, tq, 1, Which::position) == doctest::Approx(0.5));
    CHECK(harmonic_moment(params, packet, tq, 2, Which::position) ==
          doctest::Approx(0.25 + 0.25 / v));
    CHECK(harmonic_moment(params, packet, tq, 1, Which::momentum) == doctest::Approx(-0.8));

    // Gaussian quartic moment identity at t = 0.
    const double m1 = packet.a;
    CHECK(harmonic_moment(params, packet, 0.0, 4, Which::position) ==
          doctest::Approx(m1 * m1 * m1 * m1 + 6.0 * m1 * m1 * v + 3.0 * v * v));

    CHECK_THROWS_AS(harmonic_moment(quartic_params(1, 1, 0.1), packet, 1.0, 1,
                                    Which::position),
                    std::invalid_argument);
}

TEST_CASE("noiseless Monte Carlo matches the harmonic closed form") {
    auto params = quartic_params(1.0, 1.0, 0.0);
    GaussianPacket packet{1.3, 0.8, 0.5};
    MCConfig cfg;
    cfg.n_traj = 2;
    cfg.dt = 1e-4;
    std::vector<MomentRequest> reqs{{1, Which::position},
                                    {2, Which::position},
                                    {1, Which::momentum},
                                    {2, Which::momentum}};
    std::vector<double> times{0.5, 1.5, 3.0};
    auto est = estimate_moments(params, packet, reqs, times, cfg);
    for (std::size_t r = 0; r < reqs.size(); ++r) {
        for (std::size_t i = 0; i < times.size(); ++i) {
            const double ref = harmonic_moment(params, packet, times[i], reqs[r].order,
                                               reqs[r].which);
            CHECK(est[r][i].std_error < 1e-14);  // identical trajectories
            CHECK(std::abs(est[r][i].value.real() - ref) < 1e-3 * std::max(1.0, std::abs(ref)));
            CHECK(std::abs(est[r][i].value.imag()) < 1e-3);
            CHECK(est[r][i].n_excluded == 0);
        }
    }
}

TEST_CASE("unit operator stays one and starts exact") {
    auto params = quartic_params(10.0, 1.0, 0.2);
    GaussianPacket packet{0.5, 0.5, 1.0};
    MCConfig cfg;
    cfg.n_traj = 20000;
    cfg.dt = 1e-3;
    cfg.seed = 7;
    auto est = estimate_moments(params, packet, {{0, Which::position}}, {0.0, 1.0}, cfg);
    CHECK(est[0][0].value.real() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(est[0][0].std_error < 1e-14);
    const auto& e1 = est[0][1];
    CHECK(std::abs(e1.value.real() - 1.0) < 3.0 * e1.std_error + 1e-6);
    CHECK(std::abs(e1.value.imag()) < 3.0 * e1.std_error_imag + 1e-6);
    CHECK(e1.n_used + e1.n_excluded == 20000);
}

TEST_CASE("statistical error shrinks like the square root of the sample count") {
    auto params = quartic_params(10.0, 1.0, 0.2);
    GaussianPacket packet{1.0, 0.0, 0.0};
    MCConfig cfg;
    cfg.dt = 1e-3;
    cfg.seed = 11;
    std::vector<MomentRequest> reqs{{2, Which::position}};
    cfg.n_traj = 4096;
    auto coarse = estimate_moments(params, packet, reqs, {1.0}, cfg);
    cfg.n_traj = 16384;
    auto fine = estimate_moments(params, packet, reqs, {1.0}, cfg);
    const double ratio = coarse[0][0].std_error / fine[0][0].std_error;
    CHECK(ratio > 1.6);
    CHECK(ratio < 2.4);
}

TEST_CASE("estimates do not depend on the number of worker threads") {
    auto params = quartic_params(10.0, 1.0, 0.2);
    GaussianPacket packet{0.5, 0.5, 1.0};
    MCConfig one;
    one.n_traj = 5000;
    one.dt = 1e-3;
    one.seed = 3;
    one.n_threads = 1;
    MCConfig many = one;
    many.n_threads = 3;
    std::vector<MomentRequest> reqs{{1, Which::position}, {2, Which::momentum}};
    std::vector<double> times{0.5, 1.0};
    auto a = estimate_moments(params, packet, reqs, times, one);
    auto b = estimate_moments(params, packet, reqs, times, many);
    for (std::size_t r = 0; r < reqs.size(); ++r)
        for (std::size_t i = 0; i < times.size(); ++i) {
            CHECK(a[r][i].value == b[r][i].value);
            CHECK(a[r][i].std_error == b[r][i].std_error);
            CHECK(a[r][i].n_excluded == b[r][i].n_excluded);
        }

    MCConfig comm = one;
    comm.commuting = true;
    MCConfig comm4 = comm;
    comm4.n_threads = 4;
    auto c = estimate_moments(params, packet, reqs, times, comm);
    auto d = estimate_moments(params, packet, reqs, times, comm4);
    for (std::size_t r = 0; r < reqs.size(); ++r)
        for (std::size_t i = 0; i < times.size(); ++i)
            CHECK(c[r][i].value == d[r][i].value);
}

TEST_CASE("commuting sampler reproduces the static-position dynamics") {
    // Wide-mass limit with m * omega^2 = 1: the position distribution is
    // frozen while momenta drift under the static force field.
    auto params = quartic_params(1.0, 1.0, 0.2);
    GaussianPacket packet{1.0, 0.5, 1.0};
    MCConfig cfg;
    cfg.n_traj = 200000;
    cfg.seed = 17;
    cfg.commuting = true;

    const double v = 0.5;  // position variance
    const double a = packet.a, k = packet.k, lam = 0.2;
    const double x2 = a * a + v;
    const double x4 = a * a * a * a + 6.0 * a * a * v + 3.0 * v * v;
    const double x6 = std::pow(a, 6) + 15.0 * std::pow(a, 4) * v +
                      45.0 * a * a * v * v + 15.0 * v * v * v;
    const double mean_f = a + lam * (a * a * a + 3.0 * a * v);  // <V'>
    const double f2 = x2 + 2.0 * lam * x4 + lam * lam * x6;     // <V'^2>

    std::vector<MomentRequest> reqs{{1, Which::position},
                                    {1, Which::momentum},
                                    {2, Which::momentum}};
    std::vector<double> times{0.25, 0.5};
    auto est = estimate_moments(params, packet, reqs, times, cfg);
    for (std::size_t i = 0; i < times.size(); ++i) {
        const double t = times[i];
        const double p1 = k - t * mean_f;
        const double p2 = k * k + 0.5 / (packet.sigma * packet.sigma) -
                          2.0 * k * t * mean_f + t * t * f2;
        CHECK(std::abs(est[0][i].value.real() - a) < 4.0 * est[0][i].std_error + 1e-4);
        CHECK(std::abs(est[1][i].value.real() - p1) < 4.0 * est[1][i].std_error + 1e-4);
        CHECK(std::abs(est[2][i].value.real() - p2) < 4.0 * est[2][i].std_error + 1e-4);
        CHECK(est[0][i].n_excluded < cfg.n_traj / 100);
    }
}

TEST_CASE("momentum estimates carry the hbar scale") {
    auto params = quartic_params(1.0, 1.0, 0.0);
    params.hbar = 2.0;
    GaussianPacket packet{1.0, 0.3, 0.7};
    MCConfig cfg;
    cfg.n_traj = 1;
    cfg.dt = 1e-3;
    auto est = estimate_moments(params, packet, {{1, Which::momentum}}, {0.0}, cfg);
    CHECK(est[0][0].value.real() == doctest::Approx(2.0 * 0.7).epsilon(1e-12));
}

TEST_CASE("sample grid validation") {
    auto params = quartic_params(1.0, 1.0, 0.0);
    GaussianPacket packet{1.0, 0.0, 0.0};
    MCConfig cfg;
    cfg.n_traj = 1;
    cfg.dt = 1e-3;
    std::vector<MomentRequest> reqs{{1, Which::position}};
    CHECK_THROWS_AS(estimate_moments(params, packet, reqs, {0.00035}, cfg),
                    std::invalid_argument);
    CHECK_THROWS_AS(estimate_moments(params, packet, reqs, {1.0, 0.5}, cfg),
                    std::invalid_argument);
    CHECK_THROWS_AS(estimate_moments(params, packet, {{-1, Which::position}}, {1.0}, cfg),
                    std::invalid_argument);
}

TEST_CASE("propagator algebra matches the exact harmonic kernel") {
    for (double m : {1.0, 2.5}) {
        for (double w : {1.0, 1.4}) {
            auto params = quartic_params(m, w * w, 0.0);
            for (double t : {0.3, 0.9, 1.8}) {
                if (w * t >= M_PI) continue;
                XiState xi = harmonic_xi(params, t);
                for (double x : {-0.4, 0.0, 0.8}) {
                    const complex got = propagator_sample(xi, x, 0.5, 1.0);
                    const complex ref = harmonic_propagator(params, x, 0.5, t);
                    CHECK(std::abs(got - ref) < 1e-12 * std::abs(ref) + 1e-14);
                }
            }
        }
    }
}

TEST_CASE("noiseless propagator estimate agrees with the closed form") {
    auto params = quartic_params(2.0, 1.69, 0.0);
    MCConfig cfg;
    cfg.n_traj = 2;
    cfg.dt = 1e-4;
    auto est = estimate_propagator(params, 0.3, -0.2, 0.5, cfg);
    const complex ref = harmonic_propagator(params, 0.3, -0.2, 0.5);
    CHECK(std::abs(est.value - ref) < 2e-3 * std::abs(ref));
    CHECK(est.std_error < 1e-14);
    CHECK(est.n_excluded == 0);

    CHECK_THROWS_AS(estimate_propagator(params, 0.0, 0.0, 0.00033, cfg),
                    std::invalid_argument);
}

TEST_CASE("noisy propagator estimate stays normalizable and finite") {
    auto params = quartic_params(10.0, 1.0, 0.2);
    MCConfig cfg;
    cfg.n_traj = 4000;
    cfg.dt = 1e-3;
    cfg.seed = 23;
    auto est = estimate_propagator(params, 0.0, 0.5, 0.5, cfg);
    CHECK(std::isfinite(est.value.real()));
    CHECK(std::isfinite(est.value.imag()));
    CHECK(std::abs(est.value) > 0.05);
    CHECK(std::abs(est.value) < 5.0);
    CHECK(est.n_excluded < 40);
}
