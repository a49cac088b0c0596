#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <complex>
#include <vector>

#include "qosc/model.hpp"
#include "qosc/perturbation.hpp"

using qosc::complex;
using qosc::ModelParams;

namespace {

ModelParams unit_params(double lam) {
    ModelParams mp;
    mp.m = 1.0;
    mp.omega_sq = qosc::Schedule::constant(1.0);
    mp.lambda = qosc::Schedule::constant(lam);
    return mp;
}

}  // namespace

TEST_CASE("exact propagator is unitary and reduces to harmonic phases") {
    const int dim = 12;
    const auto u0 = qosc::u_exact(unit_params(0.0), dim, 0.7);
    for (int j = 0; j < dim; ++j) {
        const complex ref = std::polar(1.0, -(static_cast<double>(j) + 0.5) * 0.7);
        CHECK(std::abs(u0(j, j) - ref) < 1e-12);
    }
    CHECK((u0 - qosc::dyson_term(unit_params(0.0), dim, 0.7, 0)).norm() < 1e-12);

    const auto u = qosc::u_exact(unit_params(0.15), dim, 1.3);
    CHECK((u.adjoint() * u - Eigen::MatrixXcd::Identity(dim, dim)).norm() < 1e-12);
}

TEST_CASE("low order terms scale exactly with the coupling") {
    const int dim = 10;
    const auto t1a = qosc::dyson_term(unit_params(1e-3), dim, 0.5, 1);
    const auto t1b = qosc::dyson_term(unit_params(2e-3), dim, 0.5, 1);
    CHECK((t1b - 2.0 * t1a).norm() == 0.0);

    const auto t2a = qosc::dyson_term(unit_params(1e-3), dim, 0.5, 2);
    const auto t2b = qosc::dyson_term(unit_params(2e-3), dim, 0.5, 2);
    CHECK((t2b - 4.0 * t2a).norm() == 0.0);

    CHECK(t1a.norm() > 0.0);
    CHECK(t2a.norm() > 0.0);
}

TEST_CASE("residuals shrink with order and scale like the next power") {
    const std::vector<double> lams = {1e-4, 2e-4, 5e-4, 1e-3, 2e-3};
    const auto scaling = qosc::residual_scaling(unit_params(0.0), 16, 0.5, lams,
                                                /*max_order=*/2, /*lead_cols=*/0);

    REQUIRE(scaling.residuals.size() == 3);
    for (std::size_t i = 0; i < lams.size(); ++i) {
        CHECK(scaling.residuals[0][i] > scaling.residuals[1][i]);
        CHECK(scaling.residuals[1][i] > scaling.residuals[2][i]);
    }
    // Residual after the order-n partial sum scales like lambda^{n+1}.
    CHECK(scaling.slopes[0] == doctest::Approx(1.0).epsilon(0.2));
    CHECK(scaling.slopes[1] == doctest::Approx(2.0).epsilon(0.1));
    CHECK(scaling.slopes[2] == doctest::Approx(3.0).epsilon(0.1));
}

TEST_CASE("first order sum tracks the observable response") {
    const int dim = 24;
    const double t = 0.9;
    const auto ops = qosc::build_operators(dim, unit_params(0.0), 1.0);
    const Eigen::MatrixXcd x2 = ops.x * ops.x;
    Eigen::VectorXcd ground = Eigen::VectorXcd::Zero(dim);
    ground[0] = 1.0;

    auto observable_error = [&](double lam) {
        const auto exact = qosc::u_exact(unit_params(lam), dim, t);
        const auto first = qosc::dyson_sum(unit_params(lam), dim, t, 1);
        const Eigen::VectorXcd pe = exact * ground;
        const Eigen::VectorXcd pf = first * ground;
        const complex oe = pe.dot(x2 * pe);
        const complex of = pf.dot(x2 * pf);
        return std::abs(oe - of);
    };

    const double e1 = observable_error(5e-4);
    const double e2 = observable_error(1e-3);
    CHECK(e2 / e1 == doctest::Approx(4.0).epsilon(0.2));
}

TEST_CASE("time grid refinement leaves the terms unchanged") {
    const auto coarse = qosc::dyson_term(unit_params(1e-3), 16, 0.5, 2, 240);
    const auto fine = qosc::dyson_term(unit_params(1e-3), 16, 0.5, 2, 960);
    CHECK((coarse - fine).norm() / fine.norm() < 1e-4);

    // Trapezoid error drops by four per halving.
    const auto mid = qosc::dyson_term(unit_params(1e-3), 16, 0.5, 2, 480);
    const double r = (coarse - mid).norm() / (mid - fine).norm();
    CHECK(r == doctest::Approx(4.0).epsilon(0.15));
}

TEST_CASE("invalid setups are rejected") {
    ModelParams pulsed = unit_params(0.0);
    pulsed.omega_sq = qosc::Schedule::sin_squared(1.0);
    CHECK_THROWS_AS(qosc::u_exact(pulsed, 16, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(qosc::u_exact(unit_params(0.0), 2, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(qosc::dyson_term(unit_params(1e-3), 16, 0.5, 3), std::invalid_argument);
    CHECK_THROWS_AS(qosc::residual_scaling(unit_params(0.0), 16, 0.5, {1e-3}, 2, 0),
                    std::invalid_argument);
    CHECK_THROWS_AS(qosc::residual_scaling(unit_params(0.0), 16, 0.5, {1e-3, -1e-3}, 2, 0),
                    std::invalid_argument);
}
